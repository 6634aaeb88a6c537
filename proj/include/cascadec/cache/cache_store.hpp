// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "cascadec/core/error.hpp"
#include "cascadec/core/hash.hpp"
#include "cascadec/modules/verdict.hpp"
#include "cascadec/providers/embedding.hpp"
#include "cascadec/providers/llm.hpp"

namespace cascadec {

/// One stored provider exchange. `record_text`, `embedding` and `answer` are
/// present when the exchange answered a data record; code-generation traffic
/// carries none of them and is not indexed.
struct CachedExchange {
    std::string key;
    LlmExchange exchange;
    std::optional<std::string> record_text;
    std::optional<Embedding> embedding;
    std::optional<Value> answer;
    std::uint64_t created_seq = 0;
};

struct ModuleIORecord {
    std::string module_id;
    std::string params_digest;
    std::string input_digest;
    ModuleVerdict verdict = ModuleVerdict::fallback();
    double provider_calls = 0; // nominal calls the stage spends on this input
};

struct Neighbor {
    CachedExchange entry;
    double distance = 0;
};

struct CacheStats {
    std::size_t exchanges = 0;
    std::size_t index_size = 0;
    std::map<std::string, std::size_t> module_io; // per module_id
};

/// Stores every provider exchange and every stage input/output pair; answers
/// exact-prompt lookups, nearest-neighbour queries over record embeddings, and
/// module replays. Single writer, many readers. When opened on a file, every
/// write is appended as one JSON line and load() rebuilds the same state.
class CacheStore {
public:
    static constexpr std::uint64_t all = std::numeric_limits<std::uint64_t>::max();

    explicit CacheStore(std::shared_ptr<const Embedder> embedder) : embedder_(std::move(embedder)) {}

    /// Opens (or creates) a persistent store, replaying existing lines.
    static std::unique_ptr<CacheStore> open(const std::string& path, std::shared_ptr<const Embedder> embedder)
    {
        auto store = std::make_unique<CacheStore>(std::move(embedder));
        store->replay_file(path);
        store->path_ = path;
        return store;
    }

    const Embedder& embedder() const { return *embedder_; }
    std::shared_ptr<const Embedder> embedder_ptr() const { return embedder_; }

    CachedExchange put_exchange(const std::string& prompt, std::optional<std::string> record_text,
        const LlmExchange& exchange, std::optional<Value> answer = std::nullopt)
    {
        CachedExchange e;
        e.key = digest(prompt);
        e.exchange = exchange;
        e.exchange.prompt = prompt;
        if (record_text) {
            e.embedding = embedder_->embed(*record_text);
            e.record_text = std::move(record_text);
        }
        e.answer = std::move(answer);
        std::unique_lock lock(mutex_);
        e.created_seq = next_seq_++;
        insert_exchange(e);
        append_line(exchange_line(e));
        return e;
    }

    std::optional<CachedExchange> lookup_exact(const std::string& prompt) const
    {
        std::shared_lock lock(mutex_);
        auto [lo, hi] = by_key_.equal_range(digest(prompt));
        for (auto it = lo; it != hi; ++it)
            if (entries_[it->second].exchange.prompt == prompt)
                return entries_[it->second];
        return std::nullopt;
    }

    /// k nearest indexed exchanges created before `horizon`, ascending by
    /// cosine distance, ties by creation order.
    std::vector<Neighbor> nearest(const Embedding& query, std::size_t k, std::uint64_t horizon = all) const
    {
        if (k == 0)
            throw std::invalid_argument("nearest(): k must be >= 1");
        if (query.dim() != embedder_->dim())
            throw Error(Errc::dim_mismatch, "query dim " + std::to_string(query.dim()) + ", index dim " + std::to_string(embedder_->dim()));
        std::shared_lock lock(mutex_);
        std::vector<std::pair<double, std::size_t>> scored;
        scored.reserve(index_.size());
        for (auto idx : index_) {
            const auto& e = entries_[idx];
            if (e.created_seq >= horizon)
                continue;
            scored.emplace_back(cosine_distance(query, *e.embedding), idx);
        }
        auto take = std::min(k, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
            [&](const auto& a, const auto& b) {
                if (a.first != b.first)
                    return a.first < b.first;
                return entries_[a.second].created_seq < entries_[b.second].created_seq;
            });
        std::vector<Neighbor> out;
        out.reserve(take);
        for (std::size_t i = 0; i < take; ++i)
            out.push_back({entries_[scored[i].second], scored[i].first});
        return out;
    }

    /// Indexed exchanges with an answer, created before `horizon`.
    std::vector<CachedExchange> labeled_entries(std::uint64_t horizon = all) const
    {
        std::shared_lock lock(mutex_);
        std::vector<CachedExchange> out;
        for (auto idx : index_) {
            const auto& e = entries_[idx];
            if (e.created_seq < horizon && e.answer)
                out.push_back(e);
        }
        return out;
    }

    void record_module_io(const ModuleIORecord& rec)
    {
        std::unique_lock lock(mutex_);
        auto seq = next_seq_++;
        module_io_[io_key(rec.module_id, rec.params_digest, rec.input_digest)] = rec;
        append_line(module_io_line(rec, seq));
    }

    std::optional<ModuleIORecord> replay_module_io(
        const std::string& module_id, const std::string& params_digest, const std::string& input_digest) const
    {
        std::shared_lock lock(mutex_);
        auto it = module_io_.find(io_key(module_id, params_digest, input_digest));
        if (it == module_io_.end())
            return std::nullopt;
        return it->second;
    }

    /// Sequence number the next write will receive; usable as a snapshot horizon.
    std::uint64_t next_seq() const
    {
        std::shared_lock lock(mutex_);
        return next_seq_;
    }

    std::size_t exchange_count() const
    {
        std::shared_lock lock(mutex_);
        return entries_.size();
    }

    std::size_t index_size() const
    {
        std::shared_lock lock(mutex_);
        return index_.size();
    }

    /// Exchanges whose created_seq is at or after `seq`.
    std::size_t exchanges_since(std::uint64_t seq) const
    {
        std::shared_lock lock(mutex_);
        return static_cast<std::size_t>(std::count_if(
            entries_.begin(), entries_.end(), [&](const CachedExchange& e) { return e.created_seq >= seq; }));
    }

    CacheStats stats() const
    {
        std::shared_lock lock(mutex_);
        CacheStats s;
        s.exchanges = entries_.size();
        s.index_size = index_.size();
        for (const auto& [_, rec] : module_io_)
            ++s.module_io[rec.module_id];
        return s;
    }

    /// Copies every exchange (not module I/O) into `other`, preserving order.
    void copy_exchanges_to(CacheStore& other) const
    {
        std::shared_lock lock(mutex_);
        for (const auto& e : entries_)
            other.put_exchange(e.exchange.prompt, e.record_text, e.exchange, e.answer);
    }

private:
    static std::string io_key(const std::string& m, const std::string& p, const std::string& i)
    {
        return m + "|" + p + "|" + i;
    }

    void insert_exchange(const CachedExchange& e)
    {
        auto idx = entries_.size();
        entries_.push_back(e);
        by_key_.emplace(e.key, idx);
        if (e.embedding)
            index_.push_back(idx);
    }

    static nlohmann::json exchange_line(const CachedExchange& e)
    {
        nlohmann::json payload = {{"prompt", e.exchange.prompt}, {"response", e.exchange.response},
            {"tokens_in", e.exchange.tokens_in}, {"tokens_out", e.exchange.tokens_out}};
        if (e.record_text)
            payload["record_text"] = *e.record_text;
        if (e.embedding)
            payload["embedding"] = e.embedding->values;
        if (e.answer)
            payload["answer"] = to_json(*e.answer);
        return {{"kind", "exchange"}, {"key", e.key}, {"payload", payload}, {"created_seq", e.created_seq}};
    }

    static nlohmann::json module_io_line(const ModuleIORecord& r, std::uint64_t seq)
    {
        nlohmann::json payload = {{"module_id", r.module_id}, {"params_digest", r.params_digest},
            {"input_digest", r.input_digest}, {"verdict", r.verdict.to_json()}, {"provider_calls", r.provider_calls}};
        return {{"kind", "module_io"}, {"key", digest(io_key(r.module_id, r.params_digest, r.input_digest))},
            {"payload", payload}, {"created_seq", seq}};
    }

    void append_line(const nlohmann::json& line)
    {
        if (!path_)
            return;
        std::ofstream out(*path_, std::ios::app);
        if (!out)
            throw Error(Errc::io_error, "cannot append to " + *path_);
        out << line.dump() << '\n';
    }

    void replay_file(const std::string& path)
    {
        std::ifstream in(path);
        if (!in)
            return; // fresh store
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty())
                continue;
            try {
                auto j = nlohmann::json::parse(line);
                auto kind = j.at("kind").get<std::string>();
                const auto& p = j.at("payload");
                auto seq = j.at("created_seq").get<std::uint64_t>();
                if (seq < next_seq_)
                    throw Error(Errc::corrupt_cache, "non-increasing created_seq");
                if (kind == "exchange") {
                    CachedExchange e;
                    e.key = j.at("key").get<std::string>();
                    e.exchange.prompt = p.at("prompt").get<std::string>();
                    e.exchange.response = p.at("response").get<std::string>();
                    e.exchange.tokens_in = p.at("tokens_in").get<std::size_t>();
                    e.exchange.tokens_out = p.at("tokens_out").get<std::size_t>();
                    if (p.contains("record_text"))
                        e.record_text = p.at("record_text").get<std::string>();
                    if (p.contains("embedding")) {
                        e.embedding = Embedding {p.at("embedding").get<std::vector<double>>()};
                        if (e.embedding->dim() != embedder_->dim())
                            throw Error(Errc::dim_mismatch, "stored embedding dim differs from embedder");
                    }
                    if (p.contains("answer"))
                        e.answer = value_from_json(p.at("answer"));
                    e.created_seq = seq;
                    insert_exchange(e);
                } else if (kind == "module_io") {
                    ModuleIORecord r;
                    r.module_id = p.at("module_id").get<std::string>();
                    r.params_digest = p.at("params_digest").get<std::string>();
                    r.input_digest = p.at("input_digest").get<std::string>();
                    r.verdict = ModuleVerdict::from_json(p.at("verdict"));
                    r.provider_calls = p.at("provider_calls").get<double>();
                    module_io_[io_key(r.module_id, r.params_digest, r.input_digest)] = r;
                } else {
                    throw Error(Errc::corrupt_cache, "unknown record kind '" + kind + "'");
                }
                next_seq_ = seq + 1;
            } catch (const Error& e) {
                throw Error(Errc::corrupt_cache, path + ":" + std::to_string(line_no) + ": " + e.what());
            } catch (const std::exception& e) {
                throw Error(Errc::corrupt_cache, path + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
    }

    std::shared_ptr<const Embedder> embedder_;
    mutable std::shared_mutex mutex_;
    std::vector<CachedExchange> entries_;
    std::unordered_multimap<std::string, std::size_t> by_key_;
    std::vector<std::size_t> index_;
    std::unordered_map<std::string, ModuleIORecord> module_io_;
    std::uint64_t next_seq_ = 0;
    std::optional<std::string> path_;
};

} // namespace cascadec
