#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sail/common.hpp"
#include "sail/schema.hpp"

namespace sail {

/// A stored worked example.
struct EpisodicTrace {
    std::string trace_id;
    std::string question;
    std::vector<std::string> options;
    std::string answer;
    std::optional<std::string> explanation;
    std::string domain_tag;

    friend bool operator==(const EpisodicTrace&, const EpisodicTrace&) = default;

    void validate() const {
        if (trace_id.empty()) {
            throw ValidationError("trace_id is empty");
        }
        std::set<std::string> distinct(options.begin(), options.end());
        if (distinct.size() != options.size()) {
            throw ValidationError("trace " + trace_id + ": options must be pairwise distinct");
        }
        if (distinct.count(answer) == 0) {
            throw ValidationError("trace " + trace_id + ": answer is not among the options");
        }
    }

    json to_json() const {
        json j{{"trace_id", trace_id}, {"question", question},   {"options", options},
               {"answer", answer},     {"domain_tag", domain_tag}};
        if (explanation) j["explanation"] = *explanation;
        return j;
    }

    static EpisodicTrace from_json(const json& j) {
        EpisodicTrace t;
        t.trace_id = j.at("trace_id").get<std::string>();
        t.question = j.at("question").get<std::string>();
        t.options = j.at("options").get<std::vector<std::string>>();
        t.answer = j.at("answer").get<std::string>();
        if (j.contains("explanation") && !j.at("explanation").is_null()) {
            t.explanation = j.at("explanation").get<std::string>();
        }
        t.domain_tag = j.at("domain_tag").get<std::string>();
        return t;
    }

    static EpisodicTrace from_problem(const McqProblem& p) {
        EpisodicTrace t;
        t.trace_id = p.question_id;
        t.question = p.question;
        t.options = p.options;
        t.answer = p.answer;
        t.explanation = p.explanation;
        t.domain_tag = p.domain_tag;
        return t;
    }
};

struct SchemaEntry {
    std::string schema_id;
    ProblemSchema schema;
    std::optional<std::vector<double>> embedding;
    std::optional<std::string> source_trace;

    friend bool operator==(const SchemaEntry&, const SchemaEntry&) = default;

    json to_json() const {
        json j{{"schema_id", schema_id}, {"schema", schema.to_json()}};
        if (embedding) j["embedding"] = *embedding;
        if (source_trace) j["source_trace"] = *source_trace;
        return j;
    }

    static SchemaEntry from_json(const json& j) {
        SchemaEntry e;
        e.schema_id = j.at("schema_id").get<std::string>();
        e.schema = ProblemSchema::from_json(j.at("schema"));
        if (j.contains("embedding") && !j.at("embedding").is_null()) {
            e.embedding = j.at("embedding").get<std::vector<double>>();
        }
        if (j.contains("source_trace") && !j.at("source_trace").is_null()) {
            e.source_trace = j.at("source_trace").get<std::string>();
        }
        return e;
    }
};

/// Weighted schema→trace link; w0 is the strength at ingestion time t0.
struct Association {
    std::string schema_id;
    std::string trace_id;
    double w0 = 1.0;
    std::uint64_t t0 = 0;

    friend bool operator==(const Association&, const Association&) = default;

    json to_json() const {
        return json{{"schema_id", schema_id}, {"trace_id", trace_id}, {"w0", w0}, {"t0", t0}};
    }

    static Association from_json(const json& j) {
        return {j.at("schema_id").get<std::string>(), j.at("trace_id").get<std::string>(),
                j.at("w0").get<double>(), j.at("t0").get<std::uint64_t>()};
    }
};

/// w(t) = w0 * exp(-lambda * (t - t0)), anchored at the ingestion tick.
inline double decayed_weight(const Association& assoc, std::uint64_t t, double lambda) {
    if (t < assoc.t0) {
        throw PreconditionError("decayed_weight: t precedes the association's t0");
    }
    if (lambda < 0.0) {
        throw PreconditionError("decayed_weight: lambda must be >= 0");
    }
    return assoc.w0 * std::exp(-lambda * static_cast<double>(t - assoc.t0));
}

struct WeightedTrace {
    EpisodicTrace trace;
    double weight = 0.0;
};

/// Bipartite schema <-> episodic-trace memory with exponentially decaying
/// association weights over a logical clock (one tick per ingest).
class MemoryStore {
public:
    MemoryStore() = default;
    explicit MemoryStore(double lambda) : lambda_(lambda) {
        if (lambda < 0.0) {
            throw ConfigError("lambda must be >= 0");
        }
    }

    double lambda() const { return lambda_; }
    void set_lambda(double lambda) {
        if (lambda < 0.0) {
            throw ConfigError("lambda must be >= 0");
        }
        lambda_ = lambda;
    }
    std::uint64_t clock() const { return clock_; }
    bool empty() const { return schemas_.empty(); }

    const std::vector<SchemaEntry>& schemas() const { return schemas_; }
    const std::vector<EpisodicTrace>& traces() const { return traces_; }
    const std::vector<Association>& associations() const { return associations_; }

    const SchemaEntry& schema(const std::string& schema_id) const {
        auto it = schema_index_.find(schema_id);
        if (it == schema_index_.end()) {
            throw LookupError("unknown schema_id: " + schema_id);
        }
        return schemas_[it->second];
    }

    const EpisodicTrace& trace(const std::string& trace_id) const {
        auto it = trace_index_.find(trace_id);
        if (it == trace_index_.end()) {
            throw LookupError("unknown trace_id: " + trace_id);
        }
        return traces_[it->second];
    }

    bool has_trace(const std::string& trace_id) const { return trace_index_.count(trace_id) > 0; }

    /// Stores a worked example with its schema: one schema entry (source set),
    /// one trace, one association with w0 = 1.0 at the current tick.
    std::pair<std::string, std::string> ingest_example(const EpisodicTrace& trace,
                                                       const ProblemSchema& schema) {
        trace.validate();
        schema.validate();
        if (trace_index_.count(trace.trace_id) > 0) {
            throw ValidationError("duplicate trace_id: " + trace.trace_id);
        }
        SchemaEntry entry;
        entry.schema_id = "s." + trace.trace_id;
        entry.schema = schema;
        entry.source_trace = trace.trace_id;
        if (schema_index_.count(entry.schema_id) > 0) {
            throw ValidationError("duplicate schema_id: " + entry.schema_id);
        }
        add_schema_entry(entry);
        add_trace(trace);
        add_association({entry.schema_id, trace.trace_id, 1.0, clock_});
        clock_ += 1;
        return {entry.schema_id, trace.trace_id};
    }

    /// Cross-links require an explicit strength; t0 is the current tick and
    /// the clock does not advance (only ingest ticks it).
    void add_association(const std::string& schema_id, const std::string& trace_id, double w0) {
        schema(schema_id);
        trace(trace_id);
        add_association({schema_id, trace_id, w0, clock_});
    }

    void set_embedding(const std::string& schema_id, std::vector<double> embedding) {
        auto it = schema_index_.find(schema_id);
        if (it == schema_index_.end()) {
            throw LookupError("unknown schema_id: " + schema_id);
        }
        if (embedding_dim_ != 0 && embedding.size() != embedding_dim_) {
            throw ValidationError("embedding dimension " + std::to_string(embedding.size()) +
                                  " does not match store dimension " +
                                  std::to_string(embedding_dim_));
        }
        embedding_dim_ = embedding.size();
        schemas_[it->second].embedding = std::move(embedding);
    }

    /// All traces linked to schema_id whose decayed weight at time t is >= tau
    /// (inclusive), ordered by trace_id for deterministic serialization.
    std::vector<WeightedTrace> select_episodic(const std::string& schema_id, std::uint64_t t,
                                               double tau) const {
        if (tau < 0.0 || tau > 1.0) {
            throw PreconditionError("tau must be in [0, 1]");
        }
        schema(schema_id);  // throws LookupError when unknown
        std::vector<WeightedTrace> selected;
        for (const auto& assoc : associations_) {
            if (assoc.schema_id != schema_id) {
                continue;
            }
            const double w = decayed_weight(assoc, t, lambda_);
            if (w >= tau) {
                selected.push_back({trace(assoc.trace_id), w});
            }
        }
        std::sort(selected.begin(), selected.end(), [](const WeightedTrace& a, const WeightedTrace& b) {
            return a.trace.trace_id < b.trace.trace_id;
        });
        return selected;
    }

    json to_json() const {
        json schemas = json::array();
        for (const auto& s : schemas_) schemas.push_back(s.to_json());
        json traces = json::array();
        for (const auto& t : traces_) traces.push_back(t.to_json());
        json associations = json::array();
        for (const auto& a : associations_) associations.push_back(a.to_json());
        return json{{"version", 1},      {"lambda", lambda_},
                    {"clock", clock_},   {"schemas", schemas},
                    {"traces", traces},  {"associations", associations}};
    }

    static MemoryStore from_json(const json& j) {
        MemoryStore store;
        if (j.value("version", 0) != 1) {
            throw ParseError("store file: unsupported version");
        }
        store.lambda_ = j.at("lambda").get<double>();
        if (store.lambda_ < 0.0) {
            throw ParseError("store file: lambda must be >= 0");
        }
        for (const auto& js : j.at("schemas")) {
            SchemaEntry entry;
            try {
                entry = SchemaEntry::from_json(js);
                entry.schema.validate();
            } catch (const std::exception& e) {
                throw ParseError("store file: bad schema record " + js.value("schema_id", "?") +
                                 ": " + e.what());
            }
            if (store.schema_index_.count(entry.schema_id) > 0) {
                throw ParseError("store file: duplicate schema_id " + entry.schema_id);
            }
            if (entry.embedding) {
                if (store.embedding_dim_ != 0 && entry.embedding->size() != store.embedding_dim_) {
                    throw ParseError("store file: schema " + entry.schema_id +
                                     " embedding dimension mismatch");
                }
                store.embedding_dim_ = entry.embedding->size();
            }
            store.add_schema_entry(entry);
        }
        for (const auto& jt : j.at("traces")) {
            EpisodicTrace t;
            try {
                t = EpisodicTrace::from_json(jt);
                t.validate();
            } catch (const std::exception& e) {
                throw ParseError("store file: bad trace record " + jt.value("trace_id", "?") +
                                 ": " + e.what());
            }
            if (store.trace_index_.count(t.trace_id) > 0) {
                throw ParseError("store file: duplicate trace_id " + t.trace_id);
            }
            store.add_trace(t);
        }
        store.clock_ = j.at("clock").get<std::uint64_t>();
        std::set<std::pair<std::string, std::string>> pairs;
        for (const auto& ja : j.at("associations")) {
            Association a;
            try {
                a = Association::from_json(ja);
            } catch (const std::exception& e) {
                throw ParseError(std::string("store file: bad association record: ") + e.what());
            }
            if (a.w0 < 0.0 || a.w0 > 1.0) {
                throw ParseError("store file: association (" + a.schema_id + ", " + a.trace_id +
                                 ") has w0 outside [0, 1]");
            }
            if (a.t0 > store.clock_) {
                throw ParseError("store file: association (" + a.schema_id + ", " + a.trace_id +
                                 ") has t0 beyond the clock");
            }
            if (store.schema_index_.count(a.schema_id) == 0 ||
                store.trace_index_.count(a.trace_id) == 0) {
                throw ParseError("store file: association (" + a.schema_id + ", " + a.trace_id +
                                 ") references a missing id");
            }
            if (!pairs.insert({a.schema_id, a.trace_id}).second) {
                throw ParseError("store file: duplicate association (" + a.schema_id + ", " +
                                 a.trace_id + ")");
            }
            store.associations_.push_back(a);
        }
        return store;
    }

    friend bool operator==(const MemoryStore& a, const MemoryStore& b) {
        return a.lambda_ == b.lambda_ && a.clock_ == b.clock_ && a.schemas_ == b.schemas_ &&
               a.traces_ == b.traces_ && a.associations_ == b.associations_;
    }

private:
    void add_schema_entry(const SchemaEntry& entry) {
        schema_index_[entry.schema_id] = schemas_.size();
        schemas_.push_back(entry);
    }

    void add_trace(const EpisodicTrace& trace) {
        trace_index_[trace.trace_id] = traces_.size();
        traces_.push_back(trace);
    }

    void add_association(Association assoc) {
        if (assoc.w0 < 0.0 || assoc.w0 > 1.0) {
            throw ValidationError("association w0 must be in [0, 1]");
        }
        for (const auto& existing : associations_) {
            if (existing.schema_id == assoc.schema_id && existing.trace_id == assoc.trace_id) {
                throw ValidationError("duplicate association (" + assoc.schema_id + ", " +
                                      assoc.trace_id + ")");
            }
        }
        associations_.push_back(std::move(assoc));
    }

    std::vector<SchemaEntry> schemas_;
    std::vector<EpisodicTrace> traces_;
    std::vector<Association> associations_;
    std::map<std::string, std::size_t> schema_index_;
    std::map<std::string, std::size_t> trace_index_;
    double lambda_ = 0.0;
    std::uint64_t clock_ = 0;
    std::size_t embedding_dim_ = 0;
};

inline void save_store(const MemoryStore& store, const std::filesystem::path& path) {
    write_file_atomic(path, store.to_json().dump(2) + "\n");
}

inline MemoryStore load_store(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError("store file " + path.string() + " is not valid JSON: " + e.what());
    }
    return MemoryStore::from_json(j);
}

}  // namespace sail
