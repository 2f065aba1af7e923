/// @file generator.hpp
/// @brief The generator agent: executes blueprint search queries, then drafts
///        an outline grounded in the round's visible documents.

#pragma once

#include <set>
#include <string>
#include <vector>

#include "dre/document_bank.hpp"
#include "dre/outline.hpp"
#include "dre/prompts.hpp"
#include "dre/providers.hpp"
#include "dre/types.hpp"

namespace dre {

// ---------------------------------------------------------------------------
// Search execution
// ---------------------------------------------------------------------------

struct SearchBatch {
    /// (source query, result) pairs, flat, in blueprint order then query
    /// order then result rank — the arrival order ids are assigned in.
    std::vector<std::pair<std::string, SearchResult>> items;
    /// Every query that was executed, including those with zero results.
    std::vector<std::string> executed_queries;
};

/// Run every blueprint search query against the provider (up to `top_k`
/// results each).  Queries may execute concurrently; the returned batch is
/// assembled in deterministic order regardless of scheduling.
inline SearchBatch run_searches(SearchProvider& provider,
                                const std::vector<Blueprint>& blueprints, int top_k,
                                size_t workers = 4) {
    SearchBatch batch;
    for (const auto& b : blueprints) {
        for (const auto& q : b.search_queries) batch.executed_queries.push_back(q);
    }
    auto results = parallel_map(
        batch.executed_queries.size(),
        [&](size_t i) { return provider.search(batch.executed_queries[i], top_k); }, workers);
    for (size_t i = 0; i < batch.executed_queries.size(); ++i) {
        for (auto& r : results[i]) {
            batch.items.emplace_back(batch.executed_queries[i], std::move(r));
        }
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Outline generation
// ---------------------------------------------------------------------------

struct GeneratorStepResult {
    GeneratorState state;
    std::vector<std::string> lint;      // soft findings (section band, citations, ...)
    std::vector<std::string> warnings;  // stripped ids, parse retries
};

namespace detail {

/// Documents grouped under the blueprint whose query fetched them; carried
/// remaps get their own group.
inline std::string documents_digest(const DocumentBank& bank, int round,
                                    const std::vector<Blueprint>& blueprints) {
    auto visible = bank.visible_for_round(round);
    std::string out;
    std::set<std::string> listed;
    for (const auto& b : blueprints) {
        std::string group;
        for (const auto* rec : visible) {
            bool mine = std::find(b.search_queries.begin(), b.search_queries.end(),
                                  rec->source_query) != b.search_queries.end();
            if (mine && !listed.count(rec->id)) {
                listed.insert(rec->id);
                group += "- " + rec->id + " | " + rec->title + " | " + rec->snippet + "\n";
            }
        }
        if (!group.empty()) {
            out += "(blueprint " + b.id + ") " + b.content + "\n" + group;
        }
    }
    std::string rest;
    for (const auto* rec : visible) {
        if (!listed.count(rec->id)) {
            listed.insert(rec->id);
            rest += "- " + rec->id + " | " + rec->title + " | " + rec->snippet + "\n";
        }
    }
    if (!rest.empty()) out += "(carried or unassigned)\n" + rest;
    if (out.empty()) out = "(no documents this round)";
    return out;
}

} // namespace detail

/// Draft the round's outline.  The model response must parse under the
/// heading grammar; malformed responses are re-requested up to two times
/// before the failure propagates.  Cite ids that do not resolve in the
/// round's visible working set are stripped with a warning.  Soft structure
/// checks (section band, citation band, interrogative non-leaf headings) are
/// reported as lint findings, never failures.
inline GeneratorStepResult generate_outline(ChatProvider& provider, const PromptLibrary& prompts,
                                            const std::string& folded_query,
                                            const CriticState& critic_state,
                                            const GeneratorState& prev_gen,
                                            const DocumentBank& bank, int round) {
    CompletionRequest req;
    req.role = "generator";
    req.system_prompt = "You draft research-report outlines grounded in retrieved documents.";
    req.user_prompt = prompts.render(
        "generator",
        {
            {"folded_query", folded_query},
            {"blueprints", blueprints_digest(critic_state.blueprints)},
            {"previous_outline",
             prev_gen.outline.empty() ? "(none)" : serialize_outline(prev_gen.outline)},
            {"documents", detail::documents_digest(bank, round, critic_state.blueprints)},
        });

    GeneratorStepResult result;
    Outline outline;
    std::vector<std::string> parse_warnings;
    const int max_attempts = 3;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        std::string text = provider.complete(req);
        parse_warnings.clear();
        try {
            outline = parse_outline(text, &parse_warnings);
            if (outline.empty()) {
                throw MalformedOutline("model returned an empty outline", "");
            }
            break;
        } catch (const MalformedOutline& e) {
            if (attempt == max_attempts) throw;
            result.warnings.push_back(std::string("outline parse retry: ") + e.what());
            log_warn("generator outline attempt " + std::to_string(attempt) + " malformed; retrying");
        }
    }
    for (auto& w : parse_warnings) result.warnings.push_back(std::move(w));

    // Strip citations that do not resolve in this round's working set.
    std::set<std::string> visible;
    for (const auto* rec : bank.visible_for_round(round)) visible.insert(rec->id);
    std::function<void(OutlineNode&)> strip = [&](OutlineNode& node) {
        std::vector<std::string> kept;
        for (auto& id : node.cite_ids) {
            if (visible.count(id)) {
                kept.push_back(id);
            } else {
                result.warnings.push_back("unresolvable citation stripped: " + id);
                log_warn("generator cited unknown id '" + id + "'; stripped");
            }
        }
        node.cite_ids = std::move(kept);
        for (auto& c : node.children) strip(c);
    };
    strip(*outline.root);

    result.lint = lint_outline(outline);
    result.state.round = round;
    result.state.outline = std::move(outline);
    result.state.reference_ids = extract_citations(result.state.outline);
    return result;
}

} // namespace dre
