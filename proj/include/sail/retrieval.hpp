#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "sail/common.hpp"
#include "sail/gateway.hpp"
#include "sail/memory.hpp"

namespace sail {

enum class RetrievalMethod { cosine, rerank };

inline std::string to_string(RetrievalMethod m) {
    return m == RetrievalMethod::cosine ? "cosine" : "rerank";
}

inline RetrievalMethod retrieval_method_from_string(const std::string& s) {
    if (s == "cosine") return RetrievalMethod::cosine;
    if (s == "rerank") return RetrievalMethod::rerank;
    throw ConfigError("unknown retrieval method: " + s);
}

inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw PreconditionError("cosine_similarity: dimension mismatch");
    }
    if (u.empty()) {
        throw PreconditionError("cosine_similarity: empty vectors");
    }
    double dot = 0.0;
    double nu = 0.0;
    double nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) {
        throw PreconditionError("cosine_similarity is undefined for a zero vector");
    }
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

struct RankedSchema {
    std::string schema_id;
    double score = 0.0;

    friend bool operator==(const RankedSchema&, const RankedSchema&) = default;
};

struct RetrievalResult {
    std::string schema_id;
    double score = 0.0;
    RetrievalMethod method = RetrievalMethod::cosine;
    std::vector<RankedSchema> rank_table;  // every stored schema, best first
};

/// Raised when retrieval is attempted against an empty store; callers fall
/// back to zero-shot and record the fallback.
class NoPriorSchemaError : public LookupError {
public:
    using LookupError::LookupError;
};

namespace detail {

inline void sort_rank_table(std::vector<RankedSchema>& table) {
    std::sort(table.begin(), table.end(), [](const RankedSchema& a, const RankedSchema& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.schema_id < b.schema_id;
    });
}

}  // namespace detail

/// Argmax over sim(query, schema_i) with a total order: descending score,
/// then ascending schema_id. The rank table covers the whole store.
inline RetrievalResult retrieve_prior_schema(const std::string& query_key, const MemoryStore& store,
                                             Gateway& gateway, RetrievalMethod method,
                                             KeyMode key_mode = KeyMode::summary) {
    if (store.empty()) {
        throw NoPriorSchemaError("memory store holds no schemas");
    }
    // documents ordered by schema_id so rerank's index tie-break and the
    // lowest-id rule coincide
    std::vector<const SchemaEntry*> entries;
    for (const auto& e : store.schemas()) {
        entries.push_back(&e);
    }
    std::sort(entries.begin(), entries.end(),
              [](const SchemaEntry* a, const SchemaEntry* b) { return a->schema_id < b->schema_id; });

    RetrievalResult result;
    result.method = method;
    if (method == RetrievalMethod::cosine) {
        const std::vector<double> query_vec = gateway.embed({query_key}).front();
        for (const auto* entry : entries) {
            std::vector<double> vec;
            if (key_mode == KeyMode::summary && entry->embedding) {
                vec = *entry->embedding;
            } else {
                vec = gateway.embed({schema_key_text(entry->schema, key_mode)}).front();
            }
            result.rank_table.push_back(
                {entry->schema_id, cosine_similarity(query_vec, vec)});
        }
        detail::sort_rank_table(result.rank_table);
    } else {
        std::vector<std::string> docs;
        docs.reserve(entries.size());
        for (const auto* entry : entries) {
            docs.push_back(schema_key_text(entry->schema, key_mode));
        }
        for (const auto& hit : gateway.rerank(query_key, docs)) {
            result.rank_table.push_back({entries[hit.index]->schema_id, hit.relevance});
        }
        detail::sort_rank_table(result.rank_table);
    }
    result.schema_id = result.rank_table.front().schema_id;
    result.score = result.rank_table.front().score;
    return result;
}

/// High / Medium / Low latent-similarity bins at rank positions
/// 1, ceil(k_max/2) and k_max of the rank table.
struct RankBins {
    std::string high;
    std::string medium;
    std::string low;
};

enum class LatentBin { high, medium, low };

inline std::string to_string(LatentBin b) {
    switch (b) {
        case LatentBin::high: return "high";
        case LatentBin::medium: return "medium";
        case LatentBin::low: return "low";
    }
    throw Error("unreachable latent bin");
}

inline LatentBin latent_bin_from_string(const std::string& s) {
    if (s == "high") return LatentBin::high;
    if (s == "medium") return LatentBin::medium;
    if (s == "low") return LatentBin::low;
    throw ConfigError("unknown latent bin: " + s);
}

inline RankBins bin_by_rank(const std::vector<RankedSchema>& rank_table, std::size_t k_max = 10) {
    if (k_max == 0) {
        throw PreconditionError("k_max must be positive");
    }
    if (rank_table.size() < k_max) {
        throw PreconditionError("bin_by_rank needs at least " + std::to_string(k_max) +
                                " ranked entries, got " + std::to_string(rank_table.size()));
    }
    const std::size_t medium_rank = (k_max + 1) / 2;  // ceil(k_max / 2)
    return {rank_table[0].schema_id, rank_table[medium_rank - 1].schema_id,
            rank_table[k_max - 1].schema_id};
}

inline std::size_t bin_rank(LatentBin bin, std::size_t k_max = 10) {
    switch (bin) {
        case LatentBin::high: return 1;
        case LatentBin::medium: return (k_max + 1) / 2;
        case LatentBin::low: return k_max;
    }
    throw Error("unreachable latent bin");
}

}  // namespace sail
