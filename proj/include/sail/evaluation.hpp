#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "sail/common.hpp"
#include "sail/solver.hpp"

namespace sail {

inline double accuracy(const std::vector<SolveRecord>& records) {
    if (records.empty()) {
        throw PreconditionError("accuracy is undefined on an empty record set");
    }
    std::size_t correct = 0;
    for (const auto& r : records) {
        if (r.correct) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

/// True iff more than half of an odd number of trials were correct.
inline bool majority_correctness(const std::vector<bool>& trials) {
    if (trials.empty() || trials.size() % 2 == 0) {
        throw ConfigError("majority_correctness requires an odd number of trials");
    }
    const std::size_t correct =
        static_cast<std::size_t>(std::count(trials.begin(), trials.end(), true));
    return correct * 2 > trials.size();
}

struct WinRateCell {
    double sa_icl = 0.0;
    double baseline = 0.0;
};

struct WinRateSummary {
    double rate = 0.0;   // strict wins / cells
    std::size_t wins = 0;
    std::size_t ties = 0;
    std::size_t cells = 0;
};

/// Fraction of cells where SA-ICL strictly beats the baseline; ties are
/// non-wins and reported on their own.
inline WinRateSummary win_rate(const std::vector<WinRateCell>& cells) {
    if (cells.empty()) {
        throw PreconditionError("win_rate over an empty cell set");
    }
    WinRateSummary s;
    s.cells = cells.size();
    for (const auto& c : cells) {
        if (c.sa_icl > c.baseline) {
            ++s.wins;
        } else if (c.sa_icl == c.baseline) {
            ++s.ties;
        }
    }
    s.rate = static_cast<double>(s.wins) / static_cast<double>(s.cells);
    return s;
}

// ---------------------------------------------------------------------------
// Top-5 logprob interpretability report
// ---------------------------------------------------------------------------

enum class ProbBucket { green, yellow, red };

/// p >= 0.9 green, 0.5 <= p < 0.9 yellow, p < 0.5 red.
inline ProbBucket prob_bucket(double p) {
    if (p >= 0.9) return ProbBucket::green;
    if (p >= 0.5) return ProbBucket::yellow;
    return ProbBucket::red;
}

namespace detail {

inline const char* ansi_color(ProbBucket b) {
    switch (b) {
        case ProbBucket::green: return "\x1b[32m";
        case ProbBucket::yellow: return "\x1b[33m";
        case ProbBucket::red: return "\x1b[31m";
    }
    return "";
}

inline const char* html_color(ProbBucket b) {
    switch (b) {
        case ProbBucket::green: return "#1a7f37";
        case ProbBucket::yellow: return "#9a6700";
        case ProbBucket::red: return "#cf222e";
    }
    return "#000000";
}

inline std::string html_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (const char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string percent(double p) {
    std::ostringstream os;
    os.precision(1);
    os << std::fixed << p * 100.0 << "%";
    return os.str();
}

}  // namespace detail

/// ANSI rendering: every output token colored by its probability bucket, with
/// the top-5 alternatives listed per token.
inline std::string logprob_report_ansi(const std::vector<SolveRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += "=== " + r.question_id + " [" + to_string(r.mode) + "] answer: " +
               (r.final_answer.empty() ? "(unanswered)" : r.final_answer) +
               (r.correct ? " (correct)" : " (incorrect)") + "\n";
        if (r.token_logprobs.empty()) {
            out += "logprobs unavailable\n";
            continue;
        }
        for (const auto& t : r.token_logprobs) {
            const double p = std::exp(t.logprob);
            out += detail::ansi_color(prob_bucket(p));
            out += t.token;
            out += "\x1b[0m";
        }
        out += "\n";
        for (const auto& t : r.token_logprobs) {
            const double p = std::exp(t.logprob);
            out += "  " + t.token + "  p=" + detail::percent(p) + "  top5:";
            for (const auto& alt : t.top5) {
                out += " [" + alt.token + " " + detail::percent(std::exp(alt.logprob)) + "]";
            }
            out += "\n";
        }
    }
    return out;
}

/// Standalone HTML: colored tokens with the top-5 alternatives in tooltips.
inline std::string logprob_report_html(const std::vector<SolveRecord>& records) {
    std::string out =
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
        "<title>Token log-probability report</title>\n"
        "<style>body{font-family:sans-serif;margin:2em;}"
        ".tok{padding:1px 2px;border-radius:3px;color:#fff;}"
        "h3{margin-bottom:0.2em;}p.meta{color:#555;margin-top:0;}"
        "</style></head><body>\n<h1>Token log-probability report</h1>\n"
        "<p>Buckets: p&ge;0.9 green, 0.5&ndash;0.9 yellow, &lt;0.5 red.</p>\n";
    for (const auto& r : records) {
        out += "<h3>" + detail::html_escape(r.question_id) + " [" + to_string(r.mode) + "]</h3>\n";
        out += "<p class=\"meta\">answer: " +
               detail::html_escape(r.final_answer.empty() ? "(unanswered)" : r.final_answer) +
               (r.correct ? " &#10003;" : " &#10007;") +
               ", completion tokens: " + std::to_string(r.completion_tokens) + "</p>\n";
        if (r.token_logprobs.empty()) {
            out += "<p><em>logprobs unavailable</em></p>\n";
            continue;
        }
        out += "<p>";
        for (const auto& t : r.token_logprobs) {
            const double p = std::exp(t.logprob);
            std::string title = "p=" + detail::percent(p);
            for (const auto& alt : t.top5) {
                title += " | " + alt.token + " " + detail::percent(std::exp(alt.logprob));
            }
            out += "<span class=\"tok\" style=\"background:" +
                   std::string(detail::html_color(prob_bucket(p))) + "\" title=\"" +
                   detail::html_escape(title) + "\">" + detail::html_escape(t.token) + "</span>";
        }
        out += "</p>\n";
    }
    out += "</body></html>\n";
    return out;
}

// ---------------------------------------------------------------------------
// Token-count table (mean tokens + majority correctness per question/mode)
// ---------------------------------------------------------------------------

struct TokenCountCell {
    double mean_tokens = 0.0;
    bool majority_correct = false;
};

struct TokenCountRow {
    std::string question_id;
    std::map<std::string, TokenCountCell> by_mode;
};

inline std::vector<TokenCountRow> token_count_table(const std::vector<SolveRecord>& records) {
    std::map<std::string, std::map<std::string, std::vector<const SolveRecord*>>> grouped;
    for (const auto& r : records) {
        grouped[r.question_id][to_string(r.mode)].push_back(&r);
    }
    std::vector<TokenCountRow> rows;
    for (const auto& [qid, modes] : grouped) {
        TokenCountRow row;
        row.question_id = qid;
        for (const auto& [mode, recs] : modes) {
            TokenCountCell cell;
            double sum = 0.0;
            std::vector<bool> trials;
            for (const auto* r : recs) {
                sum += static_cast<double>(r->completion_tokens);
                trials.push_back(r->correct);
            }
            cell.mean_tokens = sum / static_cast<double>(recs.size());
            cell.majority_correct = majority_correctness(trials);
            row.by_mode[mode] = cell;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string token_count_csv(const std::vector<TokenCountRow>& rows,
                                   const std::vector<std::string>& mode_order) {
    std::string out = "question_id";
    for (const auto& m : mode_order) {
        out += "," + m + "_tokens," + m + "_correct";
    }
    out += "\n";
    for (const auto& row : rows) {
        out += row.question_id;
        for (const auto& m : mode_order) {
            auto it = row.by_mode.find(m);
            if (it == row.by_mode.end()) {
                out += ",,";
            } else {
                out += "," + format_double(it->second.mean_tokens) + "," +
                       (it->second.majority_correct ? "1" : "0");
            }
        }
        out += "\n";
    }
    return out;
}

}  // namespace sail
