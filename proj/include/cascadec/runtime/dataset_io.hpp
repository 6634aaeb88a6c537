// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascadec/core/error.hpp"
#include "cascadec/runtime/pipeline.hpp"
#include "cascadec/task/task_spec.hpp"

namespace cascadec {

struct Dataset {
    std::vector<Record> records;
    std::vector<std::optional<Value>> labels; // aligned; empty when the column is absent
    bool has_labels = false;

    std::vector<LabeledRecord> labeled() const
    {
        std::vector<LabeledRecord> out;
        for (std::size_t i = 0; i < records.size(); ++i)
            if (i < labels.size() && labels[i])
                out.push_back({records[i], *labels[i]});
        return out;
    }
};

/// RFC 4180 rows: comma separated, double quotes escape commas, newlines and "".
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text)
{
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"')
                quoted = false;
            else
                cell += c;
            continue;
        }
        if (c == '"') {
            quoted = any = true;
        } else if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n')
                ++i;
            if (any || !cell.empty()) {
                row.push_back(std::move(cell));
                rows.push_back(std::move(row));
            }
            row.clear();
            cell.clear();
            any = false;
        } else {
            cell += c;
            any = true;
        }
    }
    if (quoted)
        throw Error(Errc::schema_mismatch, "unterminated quote in CSV");
    if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\n\r") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s)
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

namespace detail {

inline Value field_value(const FieldSpec& f, const std::string& cell, std::size_t line)
{
    if (f.kind == ValueKind::number) {
        if (auto x = parse_number(cell))
            return Value::number(*x);
        throw Error(Errc::schema_mismatch,
            "line " + std::to_string(line) + ": field '" + f.name + "' expects a number, got '" + cell + "'");
    }
    return Value::text(cell);
}

inline Value json_field_value(const FieldSpec& f, const nlohmann::json& j, std::size_t line)
{
    if (j.is_number() && f.kind == ValueKind::number)
        return Value::number(j.get<double>());
    if (j.is_string())
        return field_value(f, j.get<std::string>(), line);
    if (j.is_number())
        return Value::text(format_number(j.get<double>()));
    throw Error(Errc::schema_mismatch, "line " + std::to_string(line) + ": field '" + f.name + "' must be a string or number");
}

inline std::optional<Value> label_value(const FieldSpec& out, const std::string& cell, std::size_t line)
{
    if (cell.empty())
        return std::nullopt;
    auto v = coerce_output(out, cell);
    if (!v)
        throw Error(Errc::schema_mismatch, "line " + std::to_string(line) + ": label '" + cell + "' is not a valid " + out.name);
    return v;
}

} // namespace detail

/// Reads a header-bearing CSV or a JSONL file (by `.jsonl` / `.json`
/// extension). Every declared input must be present; the output column is
/// optional and read as the label when present.
inline Dataset read_dataset(const std::string& path, const TaskSpec& spec)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::schema_mismatch, "cannot read dataset " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    auto text = buf.str();
    Dataset ds;
    bool jsonl = path.ends_with(".jsonl") || path.ends_with(".json");

    if (jsonl) {
        std::istringstream lines(text);
        std::string line;
        std::size_t n = 0;
        while (std::getline(lines, line)) {
            ++n;
            if (trim(line).empty())
                continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw Error(Errc::schema_mismatch, path + ":" + std::to_string(n) + ": " + e.what());
            }
            if (!j.is_object())
                throw Error(Errc::schema_mismatch, path + ":" + std::to_string(n) + ": record must be an object");
            Record r;
            for (const auto& f : spec.inputs) {
                if (!j.contains(f.name))
                    throw Error(Errc::schema_mismatch, path + ":" + std::to_string(n) + ": missing input '" + f.name + "'");
                r[f.name] = detail::json_field_value(f, j[f.name], n);
            }
            std::optional<Value> label;
            if (j.contains(spec.output.name)) {
                ds.has_labels = true;
                const auto& lj = j[spec.output.name];
                label = detail::label_value(spec.output, lj.is_string() ? lj.get<std::string>() : lj.dump(), n);
            }
            ds.records.push_back(std::move(r));
            ds.labels.push_back(std::move(label));
        }
        return ds;
    }

    auto rows = parse_csv(text);
    if (rows.empty())
        throw Error(Errc::schema_mismatch, path + ": missing header row");
    const auto& header = rows.front();
    auto column = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (trim(header[i]) == name)
                return i;
        return std::nullopt;
    };
    std::vector<std::size_t> cols;
    for (const auto& f : spec.inputs) {
        auto c = column(f.name);
        if (!c)
            throw Error(Errc::schema_mismatch, path + ": missing input column '" + f.name + "'");
        cols.push_back(*c);
    }
    auto label_col = column(spec.output.name);
    ds.has_labels = label_col.has_value();
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            throw Error(Errc::schema_mismatch, path + ": row " + std::to_string(r + 1) + " has " + std::to_string(row.size())
                    + " cells, header has " + std::to_string(header.size()));
        Record rec;
        for (std::size_t i = 0; i < spec.inputs.size(); ++i)
            rec[spec.inputs[i].name] = detail::field_value(spec.inputs[i], row[cols[i]], r + 1);
        ds.records.push_back(std::move(rec));
        ds.labels.push_back(label_col ? detail::label_value(spec.output, row[*label_col], r + 1) : std::nullopt);
    }
    return ds;
}

inline nlohmann::json result_to_json(std::size_t index, const RecordResult& r)
{
    nlohmann::json j;
    j["index"] = index;
    j["output"] = r.output ? to_json(*r.output) : nlohmann::json(nullptr);
    j["abstained"] = r.abstained();
    j["confidence"] = r.confidence;
    j["answered_by"] = r.answered_by ? nlohmann::json(*r.answered_by) : nlohmann::json(nullptr);
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& v : r.trace)
        trace.push_back(v.to_json());
    j["trace"] = trace;
    return j;
}

/// One JSON object per line, in input order.
inline void write_results(const std::string& path, const std::vector<RecordResult>& results)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < results.size(); ++i)
        out << result_to_json(i, results[i]).dump() << "\n";
}

} // namespace cascadec
