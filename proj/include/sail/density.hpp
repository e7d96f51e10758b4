#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "sail/common.hpp"
#include "sail/gateway.hpp"

namespace sail {

inline constexpr std::size_t kDefaultKMax = 10;
inline constexpr double kDefaultSigma = 0.5;

/// rho(q, k): row q holds the top-k_max relevance scores for question q in
/// rank order. sigma is diagnostic metadata for the summary export.
struct DensityMatrix {
    std::vector<std::string> question_ids;
    std::size_t k_max = kDefaultKMax;
    std::vector<std::vector<double>> rho;
    double sigma = kDefaultSigma;

    friend bool operator==(const DensityMatrix&, const DensityMatrix&) = default;

    std::size_t row_of(const std::string& question_id) const {
        for (std::size_t i = 0; i < question_ids.size(); ++i) {
            if (question_ids[i] == question_id) {
                return i;
            }
        }
        throw LookupError("unknown question_id in density matrix: " + question_id);
    }
};

struct KnowledgeDoc {
    std::string id;
    std::string text;
};

/// Builds rho by reranking each question key against the knowledge texts and
/// keeping the top-k_max scores. Exact-id self matches are excluded unless
/// allow_self_match is set.
inline DensityMatrix relevance_matrix(const std::vector<KnowledgeDoc>& questions,
                                      const std::vector<KnowledgeDoc>& knowledge, Gateway& gateway,
                                      std::size_t k_max = kDefaultKMax,
                                      double sigma = kDefaultSigma,
                                      bool allow_self_match = false) {
    if (questions.empty()) {
        throw PreconditionError("relevance_matrix: no questions");
    }
    DensityMatrix m;
    m.k_max = k_max;
    m.sigma = sigma;
    for (const auto& q : questions) {
        std::vector<std::string> docs;
        for (const auto& doc : knowledge) {
            if (!allow_self_match && doc.id == q.id) {
                continue;
            }
            docs.push_back(doc.text);
        }
        if (docs.size() < k_max) {
            throw PreconditionError("knowledge base too small for question " + q.id + ": " +
                                    std::to_string(docs.size()) + " candidates, k_max=" +
                                    std::to_string(k_max));
        }
        const auto hits = gateway.rerank(q.text, docs);
        std::vector<double> row;
        row.reserve(k_max);
        for (std::size_t k = 0; k < k_max; ++k) {
            row.push_back(hits[k].relevance);
        }
        m.question_ids.push_back(q.id);
        m.rho.push_back(std::move(row));
    }
    return m;
}

/// rho_bar(q): arithmetic mean of row q.
inline double aggregate_density(const DensityMatrix& m, const std::string& question_id) {
    const auto& row = m.rho[m.row_of(question_id)];
    double sum = 0.0;
    for (const double v : row) {
        sum += v;
    }
    return sum / static_cast<double>(m.k_max);
}

/// theta(k) = rho(q,k) / rho(q,1); theta(1) == 1 by construction.
inline double decay_rate(const DensityMatrix& m, const std::string& question_id, std::size_t k) {
    if (k < 1 || k > m.k_max) {
        throw PreconditionError("decay_rate: k out of range");
    }
    const auto& row = m.rho[m.row_of(question_id)];
    if (row[0] <= 0.0) {
        throw PreconditionError("decay_rate undefined: rho(q,1) = 0 for " + question_id);
    }
    if (k == 1) {
        return 1.0;
    }
    return row[k - 1] / row[0];
}

/// theta_bar(k): decay rate averaged over all rows.
inline double domain_mean_decay(const DensityMatrix& m, std::size_t k) {
    std::vector<std::string> undefined;
    double sum = 0.0;
    for (const auto& qid : m.question_ids) {
        if (m.rho[m.row_of(qid)][0] <= 0.0) {
            undefined.push_back(qid);
        }
    }
    if (!undefined.empty()) {
        std::string ids;
        for (const auto& q : undefined) {
            if (!ids.empty()) ids += ", ";
            ids += q;
        }
        throw PreconditionError("domain_mean_decay undefined for rows: " + ids);
    }
    for (const auto& qid : m.question_ids) {
        sum += decay_rate(m, qid, k);
    }
    return sum / static_cast<double>(m.question_ids.size());
}

inline double fraction_above_sigma(const DensityMatrix& m, const std::string& question_id) {
    const auto& row = m.rho[m.row_of(question_id)];
    std::size_t n = 0;
    for (const double v : row) {
        if (v >= m.sigma) {
            ++n;
        }
    }
    return static_cast<double>(n) / static_cast<double>(m.k_max);
}

/// Main CSV: question_id,k1..k{k_max}, full precision. Summary sidecar:
/// rho_bar, theta(k_max) and the fraction of cells >= sigma per question.
inline void export_heatmap_csv(const DensityMatrix& m, const std::filesystem::path& main_csv,
                               const std::filesystem::path& summary_csv) {
    std::string out = "question_id";
    for (std::size_t k = 1; k <= m.k_max; ++k) {
        out += ",k" + std::to_string(k);
    }
    out += "\n";
    for (std::size_t i = 0; i < m.question_ids.size(); ++i) {
        out += m.question_ids[i];
        for (const double v : m.rho[i]) {
            out += "," + format_double(v);
        }
        out += "\n";
    }
    write_file_atomic(main_csv, out);

    std::string summary = "question_id,rho_bar,theta_kmax,frac_at_least_sigma\n";
    for (const auto& qid : m.question_ids) {
        const auto& row = m.rho[m.row_of(qid)];
        const std::string theta =
            row[0] > 0.0 ? format_double(decay_rate(m, qid, m.k_max)) : "undefined";
        summary += qid + "," + format_double(aggregate_density(m, qid)) + "," + theta + "," +
                   format_double(fraction_above_sigma(m, qid)) + "\n";
    }
    write_file_atomic(summary_csv, summary);
}

inline DensityMatrix parse_heatmap_csv(const std::filesystem::path& main_csv,
                                       double sigma = kDefaultSigma) {
    const auto lines = split_lines(read_file(main_csv));
    if (lines.empty() || lines[0].rfind("question_id,k1", 0) != 0) {
        throw ParseError("density CSV: bad header");
    }
    DensityMatrix m;
    m.sigma = sigma;
    m.k_max = count_occurrences(lines[0], ",");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (start <= lines[i].size()) {
            const std::size_t comma = lines[i].find(',', start);
            if (comma == std::string::npos) {
                cells.push_back(lines[i].substr(start));
                break;
            }
            cells.push_back(lines[i].substr(start, comma - start));
            start = comma + 1;
        }
        if (cells.size() != m.k_max + 1) {
            throw ParseError("density CSV line " + std::to_string(i + 1) + ": expected " +
                             std::to_string(m.k_max + 1) + " cells");
        }
        m.question_ids.push_back(cells[0]);
        std::vector<double> row;
        for (std::size_t k = 1; k < cells.size(); ++k) {
            row.push_back(std::stod(cells[k]));
        }
        m.rho.push_back(std::move(row));
    }
    return m;
}

}  // namespace sail
