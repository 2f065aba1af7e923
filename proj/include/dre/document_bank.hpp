/// @file document_bank.hpp
/// @brief The per-run document store: arrival-ordered ids, parallel relevance
///        scoring, threshold filtering into an archive partition, round
///        reindexing for carried-over citations, and citation-rate metrics.

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dre/errors.hpp"
#include "dre/outline.hpp"
#include "dre/prompts.hpp"
#include "dre/providers.hpp"
#include "dre/util.hpp"

namespace dre {

/// One grounding fact: a claim, the verbatim quote backing it, and its source.
struct Evidence {
    std::string claim;
    std::string quote;
    std::string url;

    bool operator==(const Evidence&) const = default;
};

inline void to_json(nlohmann::json& j, const Evidence& e) {
    j = nlohmann::json::array({e.claim, e.quote, e.url});
}

inline void from_json(const nlohmann::json& j, Evidence& e) {
    if (j.is_array()) {
        e.claim = j.size() > 0 ? j.at(0).get<std::string>() : "";
        e.quote = j.size() > 1 ? j.at(1).get<std::string>() : "";
        e.url = j.size() > 2 ? j.at(2).get<std::string>() : "";
    }
}

/// A scored search document.  `id` is `turn_{round}_{index}` where index is
/// the arrival order within the round.
struct DocumentRecord {
    std::string id;
    int round_introduced = 0;
    int index_in_round = 0;
    std::string url;
    std::string title;
    std::string raw_content;
    std::string summary;
    std::string snippet;   // first 50 characters of the summary
    std::vector<Evidence> evidence;
    double judge_score = 0.0;  // [0, 1]
    std::string source_query;
    bool archived = false;        // below threshold or scoring failed
    bool scoring_failed = false;  // judge call failed; kept for the audit trail
    std::string remapped_from;    // previous id when carried into a new round

    bool operator==(const DocumentRecord&) const = default;
};

inline void to_json(nlohmann::json& j, const DocumentRecord& d) {
    j = nlohmann::json{{"id", d.id},
                       {"round_introduced", d.round_introduced},
                       {"index_in_round", d.index_in_round},
                       {"url", d.url},
                       {"title", d.title},
                       {"raw_content", d.raw_content},
                       {"summary", d.summary},
                       {"snippet", d.snippet},
                       {"evidence", d.evidence},
                       {"judge_score", d.judge_score},
                       {"source_query", d.source_query},
                       {"archived", d.archived},
                       {"scoring_failed", d.scoring_failed},
                       {"remapped_from", d.remapped_from}};
}

inline void from_json(const nlohmann::json& j, DocumentRecord& d) {
    d.id = j.at("id").get<std::string>();
    d.round_introduced = j.at("round_introduced").get<int>();
    d.index_in_round = j.at("index_in_round").get<int>();
    d.url = j.value("url", "");
    d.title = j.value("title", "");
    d.raw_content = j.value("raw_content", "");
    d.summary = j.value("summary", "");
    d.snippet = j.value("snippet", "");
    d.evidence = j.value("evidence", std::vector<Evidence>{});
    d.judge_score = j.value("judge_score", 0.0);
    d.source_query = j.value("source_query", "");
    d.archived = j.value("archived", false);
    d.scoring_failed = j.value("scoring_failed", false);
    d.remapped_from = j.value("remapped_from", "");
}

/// Result of judging one document.
struct JudgeOutcome {
    bool ok = false;
    double score = 0.0;
    std::string summary;
    std::vector<Evidence> evidence;
    std::string error;
};

/// Relevance judge: (document, source query) → outcome.  Pluggable so the
/// bank stays testable without providers.
using DocJudge = std::function<JudgeOutcome(const SearchResult&, const std::string&)>;

/// Context the provider-backed judge embeds into each scoring prompt.
struct JudgeContext {
    std::string folded_query;
    std::string blueprints_digest;
    std::string outline_markdown;
};

/// Build a DocJudge that asks a chat provider per document, using the
/// relevance rubric: a document unrelated to query, outline, blueprints, and
/// search query alike scores 0; partial relevance to any of them scores in
/// (0, 1] by degree.
inline DocJudge make_provider_judge(ChatProvider& provider, const PromptLibrary& prompts,
                                    JudgeContext ctx) {
    return [&provider, &prompts, ctx](const SearchResult& doc,
                                      const std::string& source_query) -> JudgeOutcome {
        JudgeOutcome out;
        CompletionRequest req;
        req.role = "doc_judge";
        req.system_prompt = "You judge search-result relevance for a research engine.";
        req.user_prompt = prompts.render("doc_judge", {
                                                          {"folded_query", ctx.folded_query},
                                                          {"blueprints", ctx.blueprints_digest},
                                                          {"outline", ctx.outline_markdown},
                                                          {"search_query", source_query},
                                                          {"url", doc.url},
                                                          {"title", doc.title},
                                                          {"content", doc.content},
                                                      });
        try {
            auto j = request_json(provider, req);
            out.score = std::clamp(j.value("judge_score", 0.0), 0.0, 1.0);
            out.summary = j.value("summary", "");
            out.evidence = j.value("evidence", std::vector<Evidence>{});
            out.ok = true;
        } catch (const Error& e) {
            out.error = e.what();
        }
        return out;
    };
}

/// The per-run document store.
class DocumentBank {
public:
    explicit DocumentBank(double filter_threshold = 0.2)
        : m_filter_threshold(filter_threshold) {}

    double filter_threshold() const { return m_filter_threshold; }

    /// Ingest one round's search results.  Ids are assigned by arrival order
    /// before scoring, so the id layout never depends on judge behavior or
    /// scheduling.  Scoring runs on a bounded worker pool; results merge by
    /// arrival index.  Documents scoring below the filter threshold land in
    /// the archive partition; judge failures are kept as archived records
    /// flagged `scoring_failed` (with a warning).  Returns the new ids.
    std::vector<std::string> ingest_and_score(
        int round, const std::vector<std::pair<std::string, SearchResult>>& items,
        const DocJudge& judge, size_t workers = 4) {
        if (round < max_round()) {
            throw Error("ingest round " + std::to_string(round) +
                        " precedes current round " + std::to_string(max_round()));
        }
        std::vector<JudgeOutcome> outcomes =
            parallel_map(items.size(),
                         [&](size_t i) { return judge(items[i].second, items[i].first); },
                         workers);

        std::vector<std::string> ids;
        ids.reserve(items.size());
        for (size_t i = 0; i < items.size(); ++i) {
            DocumentRecord rec;
            rec.round_introduced = round;
            rec.index_in_round = m_next_index[round]++;
            rec.id = "turn_" + std::to_string(round) + "_" + std::to_string(rec.index_in_round);
            rec.url = items[i].second.url;
            rec.title = items[i].second.title;
            rec.raw_content = items[i].second.content;
            rec.source_query = items[i].first;

            const JudgeOutcome& oc = outcomes[i];
            if (oc.ok) {
                rec.judge_score = oc.score;
                rec.summary = oc.summary;
                rec.evidence = oc.evidence;
            } else {
                rec.scoring_failed = true;
                rec.judge_score = 0.0;
                log_warn("scoring failed for " + rec.id + " (" + rec.url + "): " + oc.error +
                         "; record skipped from the working set");
            }
            rec.snippet = utf8_prefix(rec.summary, 50);
            rec.archived = rec.scoring_failed || rec.judge_score < m_filter_threshold;

            m_by_id[rec.id] = m_records.size();
            m_per_query[rec.source_query].push_back(rec.id);
            ids.push_back(rec.id);
            m_records.push_back(std::move(rec));
        }
        return ids;
    }

    /// Carry the given documents into `new_round`: each kept record gets a
    /// fresh id in the new round's namespace, assigned in original arrival
    /// order.  Returns the old → new id map (total over kept_ids, injective).
    /// Judge scores are kept; the prior id is noted in `remapped_from`.
    /// Archived records cannot be carried.  Unknown ids raise UnknownId.
    std::map<std::string, std::string> reindex_for_round(
        int new_round, const std::vector<std::string>& kept_ids) {
        if (new_round < max_round()) {
            throw Error("reindex round " + std::to_string(new_round) +
                        " precedes current round " + std::to_string(max_round()));
        }
        // Validate and order by original arrival (round, then index).
        std::vector<size_t> positions;
        positions.reserve(kept_ids.size());
        for (const auto& id : kept_ids) {
            auto it = m_by_id.find(id);
            if (it == m_by_id.end()) throw UnknownId(id);
            if (m_records[it->second].archived) throw UnknownId(id + " (archived)");
            positions.push_back(it->second);
        }
        std::sort(positions.begin(), positions.end(), [&](size_t a, size_t b) {
            const auto& ra = m_records[a];
            const auto& rb = m_records[b];
            return std::tie(ra.round_introduced, ra.index_in_round) <
                   std::tie(rb.round_introduced, rb.index_in_round);
        });
        positions.erase(std::unique(positions.begin(), positions.end()), positions.end());

        std::map<std::string, std::string> remap;
        for (size_t pos : positions) {
            DocumentRecord& rec = m_records[pos];
            std::string old_id = rec.id;
            int index = m_next_index[new_round]++;
            std::string new_id =
                "turn_" + std::to_string(new_round) + "_" + std::to_string(index);
            remap[old_id] = new_id;

            m_by_id.erase(old_id);
            rec.remapped_from = old_id;
            rec.id = new_id;
            rec.round_introduced = new_round;
            rec.index_in_round = index;
            m_by_id[new_id] = pos;
            for (auto& id : m_per_query[rec.source_query]) {
                if (id == old_id) id = new_id;
            }
        }
        return remap;
    }

    /// Share of this round's freshly searched documents that the outline
    /// cites: |cited ∩ ingested(round)| / |ingested(round)|.  Carried-over
    /// remaps are not part of the denominator (they were not returned by this
    /// round's searches).  Returns 0 when the round returned nothing.
    double citation_rate(const Outline& outline, int round) const {
        std::vector<std::string> round_ids;
        for (const auto& rec : m_records) {
            if (rec.round_introduced == round && rec.remapped_from.empty()) {
                round_ids.push_back(rec.id);
            }
        }
        if (round_ids.empty()) return 0.0;
        auto cited = extract_citations(outline);
        size_t hits = 0;
        for (const auto& id : round_ids) {
            if (std::find(cited.begin(), cited.end(), id) != cited.end()) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(round_ids.size());
    }

    // --- lookups ------------------------------------------------------------

    bool contains(const std::string& id) const { return m_by_id.count(id) > 0; }

    const DocumentRecord& get(const std::string& id) const {
        auto it = m_by_id.find(id);
        if (it == m_by_id.end()) throw UnknownId(id);
        return m_records[it->second];
    }

    /// All records in arrival order (both partitions).
    const std::vector<DocumentRecord>& records() const { return m_records; }

    /// Working set for one round: every non-archived record in that round's
    /// namespace (carried remaps and fresh arrivals alike), arrival order.
    std::vector<const DocumentRecord*> visible_for_round(int round) const {
        std::vector<const DocumentRecord*> out;
        for (const auto& rec : m_records) {
            if (rec.round_introduced == round && !rec.archived) out.push_back(&rec);
        }
        std::sort(out.begin(), out.end(), [](const DocumentRecord* a, const DocumentRecord* b) {
            return a->index_in_round < b->index_in_round;
        });
        return out;
    }

    /// Record that a query was executed, even when it returned nothing, so
    /// per-query bookkeeping has one entry per executed search.
    void register_query(const std::string& query) {
        m_per_query.emplace(query, std::vector<std::string>{});
    }

    /// Ids returned for a given search query, arrival order.
    const std::vector<std::string>& ids_for_query(const std::string& query) const {
        static const std::vector<std::string> kEmpty;
        auto it = m_per_query.find(query);
        return it == m_per_query.end() ? kEmpty : it->second;
    }

    const std::map<std::string, std::vector<std::string>>& per_query() const {
        return m_per_query;
    }

    int max_round() const {
        return m_next_index.empty() ? 0 : m_next_index.rbegin()->first;
    }

    size_t archived_count() const {
        size_t n = 0;
        for (const auto& r : m_records) n += r.archived ? 1 : 0;
        return n;
    }

    // --- persistence ----------------------------------------------------------

    /// One JSON record per line, arrival order.
    void save(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw PersistenceFailure("cannot open bank file for write: " + path.string());
        for (const auto& rec : m_records) {
            out << nlohmann::json(rec).dump() << "\n";
        }
        if (!out) throw PersistenceFailure("short write to bank file: " + path.string());
    }

    static DocumentBank load(const std::filesystem::path& path, double filter_threshold = 0.2) {
        std::ifstream in(path);
        if (!in) throw PersistenceFailure("cannot open bank file for read: " + path.string());
        DocumentBank bank(filter_threshold);
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            DocumentRecord rec;
            try {
                from_json(nlohmann::json::parse(line), rec);
            } catch (const nlohmann::json::exception& e) {
                throw PersistenceFailure("corrupt bank record: " + std::string(e.what()));
            }
            bank.m_by_id[rec.id] = bank.m_records.size();
            bank.m_per_query[rec.source_query].push_back(rec.id);
            int next = rec.index_in_round + 1;
            auto& slot = bank.m_next_index[rec.round_introduced];
            slot = std::max(slot, next);
            bank.m_records.push_back(std::move(rec));
        }
        return bank;
    }

private:
    double m_filter_threshold;
    std::vector<DocumentRecord> m_records;            // arrival order
    std::map<std::string, size_t> m_by_id;            // id → position
    std::map<std::string, std::vector<std::string>> m_per_query;
    std::map<int, int> m_next_index;                  // round → next arrival index
};

} // namespace dre
