/// @file policy_bank.hpp
/// @brief Append-only experience pool of research traces with BM25 retrieval
///        and search-query effectiveness feedback for the critic.
///
/// Traces persist as line-delimited JSON files named `traces_{timestamp}.jsonl`
/// inside a memory directory — one file per optimization round — and the whole
/// directory is scanned on load.  Retrieval ranks traces by BM25 over their
/// query text (k1 = 1.2, b = 0.75, shared tokenizer) with ties broken by
/// recency, newest first.  Feedback injection uses exact query matching.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dre/bm25.hpp"
#include "dre/errors.hpp"
#include "dre/text.hpp"
#include "dre/types.hpp"
#include "dre/util.hpp"

namespace dre {

/// Per-search-query document statistics.
struct QueryDocStats {
    std::string query_text;
    int doc_count = 0;
    std::vector<double> scores;            // judge scores, arrival order
    double avg_relevance = 0.0;            // mean of scores (0 when empty)
    double high_relevance_ratio = 0.0;     // |{s > 0.5}| / max(doc_count, 1)
    std::vector<std::string> snippets;     // each at most 50 characters

    /// Recompute the derived fields from `scores`/`doc_count`.
    void finalize() {
        doc_count = static_cast<int>(scores.size());
        double sum = 0.0;
        int high = 0;
        for (double s : scores) {
            sum += s;
            if (s > 0.5) ++high;
        }
        avg_relevance = scores.empty() ? 0.0 : sum / static_cast<double>(scores.size());
        high_relevance_ratio = static_cast<double>(high) / std::max(doc_count, 1);
        for (auto& s : snippets) s = utf8_prefix(s, 50);
    }

    bool operator==(const QueryDocStats&) const = default;
};

inline void to_json(nlohmann::json& j, const QueryDocStats& s) {
    j = nlohmann::json{{"query_text", s.query_text},
                       {"doc_count", s.doc_count},
                       {"scores", s.scores},
                       {"avg_relevance", s.avg_relevance},
                       {"high_relevance_ratio", s.high_relevance_ratio},
                       {"snippets", s.snippets}};
}

inline void from_json(const nlohmann::json& j, QueryDocStats& s) {
    s.query_text = j.at("query_text").get<std::string>();
    s.scores = j.value("scores", std::vector<double>{});
    s.snippets = j.value("snippets", std::vector<std::string>{});
    s.finalize();
}

/// One recorded research run (or round) for a query: the closing agent
/// states, per-search-query stats, and — when the meta-optimization harness
/// produced them — the criterion scores.
struct TraceRecord {
    std::string query_text;
    int round = 0;  // optimization round the trace was recorded in
    std::string timestamp;
    CriticState critic_state;
    GeneratorState generator_state;
    std::vector<QueryDocStats> per_query_doc_stats;
    nlohmann::json criterion_scores;  // null when no scorer ran

    bool operator==(const TraceRecord&) const = default;
};

inline void to_json(nlohmann::json& j, const TraceRecord& t) {
    j = nlohmann::json{{"query_text", t.query_text},
                       {"round", t.round},
                       {"timestamp", t.timestamp},
                       {"critic_state", t.critic_state},
                       {"generator_state", t.generator_state},
                       {"per_query_doc_stats", t.per_query_doc_stats},
                       {"criterion_scores", t.criterion_scores}};
}

inline void from_json(const nlohmann::json& j, TraceRecord& t) {
    t.query_text = j.at("query_text").get<std::string>();
    t.round = j.value("round", 0);
    t.timestamp = j.value("timestamp", "");
    t.critic_state = j.at("critic_state").get<CriticState>();
    t.generator_state = j.at("generator_state").get<GeneratorState>();
    t.per_query_doc_stats = j.value("per_query_doc_stats", std::vector<QueryDocStats>{});
    t.criterion_scores = j.value("criterion_scores", nlohmann::json());
}

/// Feedback rendering knobs (group split threshold and list caps).
struct FeedbackOptions {
    double group_split_ratio = 0.5;  // high group: high_relevance_ratio >= split
    size_t max_per_group = 5;        // newest-first cap per group
    double fallback_score_gap = 1.0; // rounds this far below best are negative references
};

/// Append-only trace store.
class PolicyBank {
public:
    PolicyBank() = default;

    /// Open a bank over `memory_dir`: load every traces_*.jsonl in filename
    /// order (timestamps sort lexicographically), then arrange for new traces
    /// to append to a fresh `traces_{timestamp}.jsonl`.
    static PolicyBank open(const std::filesystem::path& memory_dir, Clock& clock) {
        PolicyBank bank;
        bank.m_dir = memory_dir;
        std::filesystem::create_directories(memory_dir);
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(memory_dir)) {
            if (!entry.is_regular_file()) continue;
            std::string name = entry.path().filename().string();
            if (name.rfind("traces_", 0) == 0 && entry.path().extension() == ".jsonl") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) bank.load_file(f);
        bank.m_current_file = memory_dir / ("traces_" + clock.timestamp() + ".jsonl");
        return bank;
    }

    /// In-memory bank (tests, read-only tooling).
    static PolicyBank in_memory() { return PolicyBank(); }

    /// Start a fresh trace file (one file per optimization round).  No-op for
    /// in-memory banks.
    void rotate(Clock& clock) {
        if (m_dir.empty()) return;
        m_current_file = m_dir / ("traces_" + clock.timestamp() + ".jsonl");
    }

    const std::vector<TraceRecord>& traces() const { return m_traces; }

    /// Append a trace to memory and to the bank's current file.
    void record_trace(const TraceRecord& trace) {
        m_traces.push_back(trace);
        m_index.add(trace.query_text);
        if (m_current_file.empty()) return;  // in-memory bank
        std::ofstream out(m_current_file, std::ios::app);
        if (!out) {
            throw PersistenceFailure("cannot append trace to " + m_current_file.string());
        }
        out << nlohmann::json(trace).dump() << "\n";
        if (!out) throw PersistenceFailure("short write to " + m_current_file.string());
    }

    /// Top-k traces by BM25 similarity of query text; ties newest-first.
    std::vector<const TraceRecord*> retrieve(const std::string& query_text, size_t k) const {
        std::vector<const TraceRecord*> out;
        for (const auto& hit : m_index.rank(query_text, k)) {
            out.push_back(&m_traces[hit.doc]);
        }
        return out;
    }

    /// Traces whose query text matches exactly (normalized), newest first.
    std::vector<const TraceRecord*> exact_traces(const std::string& query_text) const {
        std::string norm = normalize_query(query_text);
        std::vector<const TraceRecord*> out;
        for (auto it = m_traces.rbegin(); it != m_traces.rend(); ++it) {
            if (normalize_query(it->query_text) == norm) out.push_back(&*it);
        }
        return out;
    }

    /// Render search-query effectiveness feedback for the critic prompt.
    ///
    /// Primary mode — per-query stats exist in the exactly-matching traces:
    /// the most recent stats per search query split into high/low
    /// effectiveness groups at the ratio threshold, at most `max_per_group`
    /// entries each, newest first, e.g.
    ///   - "XX brand review": avg_relevance=0.72, 8/10 documents relevant
    ///
    /// Fallback — no stats recorded: queries from rounds scoring at least
    /// `fallback_score_gap` below the best round (on search_coverage) render
    /// as negative references.  Returns "" when there is nothing to say.
    std::string query_feedback(const std::string& query_text,
                               std::optional<double> current_best_score = std::nullopt,
                               const FeedbackOptions& opts = {}) const {
        auto matches = exact_traces(query_text);
        if (matches.empty()) return "";

        // Most recent stats per search query, preserving newest-first order.
        std::vector<const QueryDocStats*> latest;
        std::set<std::string> seen;
        for (const auto* trace : matches) {
            for (const auto& stats : trace->per_query_doc_stats) {
                std::string key = normalize_query(stats.query_text);
                if (seen.count(key)) continue;
                seen.insert(key);
                latest.push_back(&stats);
            }
        }

        if (!latest.empty()) {
            std::vector<const QueryDocStats*> high, low;
            for (const auto* s : latest) {
                (s->high_relevance_ratio >= opts.group_split_ratio ? high : low).push_back(s);
            }
            auto render_group = [&](const std::vector<const QueryDocStats*>& group) {
                std::string out;
                size_t n = std::min(group.size(), opts.max_per_group);
                for (size_t i = 0; i < n; ++i) {
                    const auto* s = group[i];
                    int relevant = static_cast<int>(
                        std::count_if(s->scores.begin(), s->scores.end(),
                                      [](double v) { return v > 0.5; }));
                    char buf[64];
                    std::snprintf(buf, sizeof(buf), "avg_relevance=%.2f, %d/%d documents relevant",
                                  s->avg_relevance, relevant, s->doc_count);
                    out += "- \"" + s->query_text + "\": " + buf + "\n";
                }
                return out;
            };
            std::string out;
            if (!high.empty()) {
                out += "## High-effectiveness queries (returned documents highly relevant)\n";
                out += render_group(high);
            }
            if (!low.empty()) {
                if (!out.empty()) out += "\n";
                out += "## Low-effectiveness queries (avoid similar formulations)\n";
                out += render_group(low);
            }
            return out;
        }

        // Fallback: no per-query stats anywhere.  Use criterion score gaps.
        double best = current_best_score.value_or(-1.0);
        if (!current_best_score.has_value()) {
            for (const auto* trace : matches) {
                auto s = criterion_search_coverage(*trace);
                if (s.has_value()) best = std::max(best, *s);
            }
        }
        if (best < 0.0) return "";
        std::string out;
        for (const auto* trace : matches) {
            auto s = criterion_search_coverage(*trace);
            if (!s.has_value() || best - *s < opts.fallback_score_gap) continue;
            std::vector<std::string> queries;
            for (const auto& b : trace->critic_state.blueprints) {
                for (const auto& q : b.search_queries) queries.push_back("\"" + q + "\"");
            }
            if (queries.empty()) continue;
            char buf[96];
            std::snprintf(buf, sizeof(buf),
                          "- round %d scored %.2f (best %.2f); its queries read as negative "
                          "references: ",
                          trace->round, *s, best);
            out += buf + join(queries, ", ") + "\n";
        }
        if (out.empty()) return "";
        return "## Low-scoring round queries (negative references)\n" + out;
    }

private:
    static std::optional<double> criterion_search_coverage(const TraceRecord& trace) {
        if (!trace.criterion_scores.is_object()) return std::nullopt;
        const auto& cs = trace.criterion_scores;
        if (cs.contains("search_coverage") && cs.at("search_coverage").is_object()) {
            return cs.at("search_coverage").value("score", 0.0);
        }
        if (cs.contains("search_coverage") && cs.at("search_coverage").is_number()) {
            return cs.at("search_coverage").get<double>();
        }
        return std::nullopt;
    }

    void load_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw PersistenceFailure("cannot open trace file: " + path.string());
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            try {
                TraceRecord t;
                from_json(nlohmann::json::parse(line), t);
                m_index.add(t.query_text);
                m_traces.push_back(std::move(t));
            } catch (const std::exception& e) {
                log_warn("skipping corrupt trace at " + path.filename().string() + ":" +
                         std::to_string(lineno) + ": " + e.what());
            }
        }
    }

    std::filesystem::path m_dir;
    std::filesystem::path m_current_file;
    std::vector<TraceRecord> m_traces;  // load/append order = oldest first
    Bm25Index m_index;
};

} // namespace dre
