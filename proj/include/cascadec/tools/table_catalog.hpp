// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cascadec/modules/tool_loop.hpp"

namespace cascadec::tools {

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

inline std::string lower(std::string s)
{
    for (auto& c : s)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::vector<std::string> words(const std::string& s)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty())
        out.push_back(cur);
    return out;
}

inline std::size_t levenshtein(const std::string& a, const std::string& b)
{
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j)
        prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

/// In-memory table collection with the search tools of a data-discovery
/// agent. Every search returns at most `limit` table names.
class TableCatalog {
public:
    static constexpr std::size_t limit = 20;

    void add(Table t) { tables_.push_back(std::move(t)); }
    const std::vector<Table>& tables() const noexcept { return tables_; }

    const Table* find(const std::string& name) const
    {
        for (const auto& t : tables_)
            if (t.name == name)
                return &t;
        return nullptr;
    }

    std::string get_schema(const std::string& name) const
    {
        const auto* t = find(name);
        if (!t)
            return "Error: no table named '" + name + "'.";
        std::string out = t->name + "(";
        for (std::size_t i = 0; i < t->columns.size(); ++i)
            out += (i ? ", " : "") + t->columns[i];
        return out + ")";
    }

    /// Tables whose name or column names contain every keyword.
    std::vector<std::string> search_keywords(const std::string& keywords) const
    {
        auto kws = words(keywords);
        std::vector<std::string> out;
        for (const auto& t : tables_) {
            std::string hay = lower(t.name);
            for (const auto& c : t.columns)
                hay += " " + lower(c);
            bool all = !kws.empty();
            for (const auto& k : kws)
                all = all && hay.find(k) != std::string::npos;
            if (all && out.size() < limit)
                out.push_back(t.name);
        }
        return out;
    }

    /// Tables holding a cell within normalized edit distance 0.2 of `value`.
    std::vector<std::string> search_value(const std::string& value) const
    {
        auto v = lower(value);
        std::vector<std::string> out;
        for (const auto& t : tables_) {
            bool hit = false;
            for (const auto& row : t.rows) {
                for (const auto& cell : row) {
                    auto c = lower(cell);
                    auto len = std::max(c.size(), v.size());
                    if (len > 0 && static_cast<double>(levenshtein(c, v)) / static_cast<double>(len) <= 0.2) {
                        hit = true;
                        break;
                    }
                }
                if (hit)
                    break;
            }
            if (hit && out.size() < limit)
                out.push_back(t.name);
        }
        return out;
    }

    /// Tables matching any keyword (by name/columns) that also contain a value
    /// close to any value. Parameter form: "kw1 kw2 | value".
    std::vector<std::string> joint_search(const std::string& param) const
    {
        auto bar = param.find('|');
        auto kw_part = param.substr(0, bar);
        auto val_part = bar == std::string::npos ? std::string {} : trim(param.substr(bar + 1));
        std::set<std::string> by_value;
        if (!val_part.empty())
            for (auto& n : search_value(val_part))
                by_value.insert(n);
        std::vector<std::string> out;
        for (const auto& kw : words(kw_part))
            for (auto& n : search_keywords(kw))
                if ((val_part.empty() || by_value.count(n)) && std::find(out.begin(), out.end(), n) == out.end()
                    && out.size() < limit)
                    out.push_back(n);
        return out;
    }

    /// Okapi BM25 (k1 = 1.2, b = 0.75) over name, columns and cells.
    std::vector<std::string> bm25(const std::string& query) const
    {
        std::vector<std::vector<std::string>> docs;
        for (const auto& t : tables_) {
            std::string text = t.name;
            for (const auto& c : t.columns)
                text += " " + c;
            for (const auto& r : t.rows)
                for (const auto& c : r)
                    text += " " + c;
            docs.push_back(words(text));
        }
        double avg = 0;
        for (const auto& d : docs)
            avg += static_cast<double>(d.size());
        avg = docs.empty() ? 1 : avg / static_cast<double>(docs.size());
        auto q = words(query);
        std::vector<std::pair<double, std::size_t>> scored;
        auto n = static_cast<double>(docs.size());
        for (std::size_t i = 0; i < docs.size(); ++i) {
            double s = 0;
            for (const auto& term : q) {
                double df = 0;
                for (const auto& d : docs)
                    df += std::find(d.begin(), d.end(), term) != d.end() ? 1 : 0;
                double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), term));
                if (tf == 0)
                    continue;
                double idf = std::log(1 + (n - df + 0.5) / (df + 0.5));
                s += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * static_cast<double>(docs[i].size()) / avg));
            }
            if (s > 0)
                scored.emplace_back(-s, i);
        }
        std::sort(scored.begin(), scored.end());
        std::vector<std::string> out;
        for (std::size_t i = 0; i < scored.size() && i < limit; ++i)
            out.push_back(tables_[scored[i].second].name);
        return out;
    }

private:
    std::vector<Table> tables_;
};

inline std::string list_literal(const std::vector<std::string>& names)
{
    std::string out = "[";
    for (std::size_t i = 0; i < names.size(); ++i)
        out += (i ? ", '" : "'") + names[i] + "'";
    return out + "]";
}

inline ToolRegistry make_registry(const TableCatalog& catalog)
{
    ToolRegistry r;
    r.add("GET_SCHEMA", {"GET_SCHEMA(table_name)", "Return the columns of a table.",
                            [&catalog](const std::string& p) { return catalog.get_schema(p); }});
    r.add("SEARCH_KEYWORDS", {"SEARCH_KEYWORDS(keywords)",
                                 "Return a list containing at most 20 tables whose name or columns match all keywords.",
                                 [&catalog](const std::string& p) { return list_literal(catalog.search_keywords(p)); }});
    r.add("SEARCH_VALUE", {"SEARCH_VALUE(value)",
                              "Return a list containing at most 20 tables that contain a value similar to the given one.",
                              [&catalog](const std::string& p) { return list_literal(catalog.search_value(p)); }});
    r.add("JOINT_SEARCH", {"JOINT_SEARCH(keywords | value)",
                              "Return a list containing at most 20 tables matching the keywords and containing the value.",
                              [&catalog](const std::string& p) { return list_literal(catalog.joint_search(p)); }});
    r.add("BM25", {"BM25(query)", "Return a list containing at most 20 tables ranked by BM25 relevance.",
                      [&catalog](const std::string& p) { return list_literal(catalog.bm25(p)); }});
    return r;
}

/// Twenty small tables covering a few business domains.
inline TableCatalog demo_catalog()
{
    TableCatalog c;
    c.add({"hr_1-employees", {"employee_id", "first_name", "last_name", "department_id", "salary"},
        {{"1", "Ada", "Lovelace", "10", "9000"}, {"2", "Alan", "Turing", "20", "8500"}}});
    c.add({"hr_1-departments", {"department_id", "department_name", "location_id"},
        {{"10", "Research", "1700"}, {"20", "Engineering", "1800"}}});
    c.add({"hr_1-locations", {"location_id", "city", "country_id"}, {{"1700", "Seattle", "US"}, {"1800", "Toronto", "CA"}}});
    c.add({"hr_1-jobs", {"job_id", "job_title", "min_salary", "max_salary"}, {{"IT_PROG", "Programmer", "4000", "10000"}}});
    c.add({"sales-orders", {"order_id", "customer_id", "order_date", "total"}, {{"5001", "77", "2021-03-01", "120.50"}}});
    c.add({"sales-customers", {"customer_id", "name", "city"}, {{"77", "Acme Corp", "Boston"}}});
    c.add({"sales-products", {"product_id", "product_name", "price"}, {{"p1", "Widget", "2.50"}, {"p2", "Gadget", "7.00"}}});
    c.add({"sales-order_items", {"order_id", "product_id", "quantity"}, {{"5001", "p1", "10"}}});
    c.add({"school-students", {"student_id", "name", "grade"}, {{"s1", "Mia", "9"}, {"s2", "Leo", "10"}}});
    c.add({"school-courses", {"course_id", "title", "teacher_id"}, {{"c1", "Algebra", "t1"}}});
    c.add({"school-teachers", {"teacher_id", "name", "subject"}, {{"t1", "Grace Hopper", "Math"}}});
    c.add({"school-enrollments", {"student_id", "course_id", "term"}, {{"s1", "c1", "Fall"}}});
    c.add({"music-artists", {"artist_id", "name", "country"}, {{"a1", "Nina Simone", "US"}}});
    c.add({"music-albums", {"album_id", "artist_id", "title", "year"}, {{"al1", "a1", "Pastel Blues", "1965"}}});
    c.add({"music-tracks", {"track_id", "album_id", "title", "seconds"}, {{"tr1", "al1", "Sinnerman", "622"}}});
    c.add({"flights-airports", {"airport_code", "city", "country"}, {{"SEA", "Seattle", "US"}, {"YYZ", "Toronto", "CA"}}});
    c.add({"flights-airlines", {"airline_id", "name", "country"}, {{"AC", "Air Canada", "CA"}}});
    c.add({"flights-routes", {"airline_id", "source_airport", "dest_airport"}, {{"AC", "YYZ", "SEA"}}});
    c.add({"pets-owners", {"owner_id", "name", "city"}, {{"o1", "Sam", "Boston"}}});
    c.add({"pets-pets", {"pet_id", "owner_id", "species", "age"}, {{"pt1", "o1", "cat", "3"}}});
    return c;
}

} // namespace cascadec::tools
