/// @file critic.hpp
/// @brief The critic agent: rates the current outline on a seven-dimension
///        rubric and updates the blueprint set under continuity constraints
///        (blueprints are only ever modified or expanded, never deleted).

#pragma once

#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dre/prompts.hpp"
#include "dre/providers.hpp"
#include "dre/text.hpp"
#include "dre/types.hpp"

namespace dre {

// ---------------------------------------------------------------------------
// Rating rubric
// ---------------------------------------------------------------------------

inline constexpr size_t kNumRatingDimensions = 7;

inline constexpr std::array<const char*, kNumRatingDimensions> kRatingDimensions = {
    "instruction_adherence", "content_depth",  "perspective_balance", "coverage_breadth",
    "evidence_support",      "insight_value",  "structural_logic",
};

/// Per-dimension scores plus the overall rating.  The overall value is always
/// the arithmetic mean of the dimensions — a model-claimed total that drifts
/// from the mean is overridden.
struct RatingBreakdown {
    std::array<double, kNumRatingDimensions> scores{};  // each in [0, 10]
    double overall = 0.0;

    static RatingBreakdown from_scores(const std::array<double, kNumRatingDimensions>& s) {
        RatingBreakdown b;
        b.scores = s;
        double sum = 0.0;
        for (double v : s) sum += v;
        b.overall = sum / static_cast<double>(kNumRatingDimensions);
        return b;
    }
};

inline void to_json(nlohmann::json& j, const RatingBreakdown& b) {
    nlohmann::json scores;
    for (size_t i = 0; i < kNumRatingDimensions; ++i) scores[kRatingDimensions[i]] = b.scores[i];
    j = nlohmann::json{{"dimension_scores", scores}, {"overall", b.overall}};
}

// ---------------------------------------------------------------------------
// Context shared by the critic entry points
// ---------------------------------------------------------------------------

struct CriticConfig {
    int max_blueprints_len = 10;  // cap on proposed blueprint count
    int max_query_len = 5;        // cap on search queries per blueprint
    int min_query_per_blueprint = 1;
    std::string search_engine = "generic_web";  // selects search-term guidelines
};

struct CriticContext {
    std::string folded_query;
    std::vector<std::string> history_queries;  // raw text of every executed query
    double citation_rate = 0.0;
    std::string feedback;  // policy-bank effectiveness feedback, may be empty
    CriticConfig config;
};

namespace detail {

inline std::string history_digest(const std::vector<std::string>& history) {
    if (history.empty()) return "(none)";
    std::string out;
    for (const auto& q : history) out += "- " + q + "\n";
    return out;
}

inline CompletionRequest build_critic_request(const PromptLibrary& prompts,
                                              const CriticContext& ctx, const Outline& outline,
                                              const std::vector<Blueprint>& prev_blueprints) {
    std::string guidelines_name = ctx.config.search_engine == "rednote"
                                      ? "search_guidelines_rednote"
                                      : "search_guidelines_generic_web";
    char rate_buf[32];
    std::snprintf(rate_buf, sizeof(rate_buf), "%.2f", ctx.citation_rate);
    std::string feedback;
    if (!ctx.feedback.empty()) {
        feedback = "[HISTORICAL SEARCH QUERY EFFECTIVENESS FEEDBACK]\n" + ctx.feedback + "\n\n";
    }
    CompletionRequest req;
    req.role = "critic";
    req.system_prompt = "You review research-report outlines and direct the next research round.";
    req.user_prompt = prompts.render(
        "critic", {
                      {"folded_query", ctx.folded_query},
                      {"outline", outline.empty() ? "(empty)" : serialize_outline(outline)},
                      {"blueprints", dre::blueprints_digest(prev_blueprints)},
                      {"history_queries", history_digest(ctx.history_queries)},
                      {"citation_rate", rate_buf},
                      {"feedback", feedback},
                      {"max_blueprints", std::to_string(ctx.config.max_blueprints_len)},
                      {"max_queries", std::to_string(ctx.config.max_query_len)},
                      {"min_queries", std::to_string(ctx.config.min_query_per_blueprint)},
                      {"engine_guidelines", prompts.get(guidelines_name)},
                  });
    return req;
}

inline RatingBreakdown breakdown_from_json(const nlohmann::json& j) {
    std::array<double, kNumRatingDimensions> scores{};
    if (j.contains("dimension_scores") && j.at("dimension_scores").is_object()) {
        const auto& ds = j.at("dimension_scores");
        for (size_t i = 0; i < kNumRatingDimensions; ++i) {
            double v = ds.value(kRatingDimensions[i], 0.0);
            if (v < 0.0 || v > 10.0) {
                log_warn(std::string("dimension score out of range for ") + kRatingDimensions[i] +
                         "; clamped");
                v = std::clamp(v, 0.0, 10.0);
            }
            scores[i] = v;
        }
    } else {
        // Degraded model output: no per-dimension scores.  Spread the claimed
        // rating uniformly so the mean identity still holds.
        double rating = std::clamp(j.value("rating", 0.0), 0.0, 10.0);
        log_warn("critic output lacks dimension_scores; spreading rating uniformly");
        scores.fill(rating);
    }
    RatingBreakdown b = RatingBreakdown::from_scores(scores);
    if (j.contains("rating") && j.at("rating").is_number()) {
        double claimed = j.at("rating").get<double>();
        if (std::fabs(claimed - b.overall) > 1e-9) {
            log_warn("critic total rating drifts from dimension mean; overriding");
        }
    }
    return b;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Continuity
// ---------------------------------------------------------------------------

/// Merge a proposed blueprint set against the previous one so that no
/// previous blueprint disappears: for each previous id (in previous order)
/// take the proposed revision if present, otherwise reinstate the previous
/// blueprint (logged); brand-new blueprints append in proposed order.
inline std::vector<Blueprint> enforce_continuity(const std::vector<Blueprint>& prev,
                                                 const std::vector<Blueprint>& proposed,
                                                 std::vector<std::string>* warnings = nullptr) {
    std::map<std::string, const Blueprint*> proposed_by_id;
    for (const auto& b : proposed) {
        if (!b.id.empty()) proposed_by_id[b.id] = &b;
    }
    std::vector<Blueprint> result;
    std::set<std::string> placed;
    for (const auto& p : prev) {
        auto it = proposed_by_id.find(p.id);
        if (it != proposed_by_id.end()) {
            result.push_back(*it->second);
        } else {
            if (warnings) warnings->push_back("blueprint '" + p.id + "' reinstated (model dropped it)");
            log_warn("continuity: blueprint '" + p.id + "' was dropped by the model; reinstated");
            result.push_back(p);
        }
        placed.insert(p.id);
    }
    for (const auto& b : proposed) {
        if (b.id.empty() || !placed.count(b.id)) {
            result.push_back(b);
            if (!b.id.empty()) placed.insert(b.id);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Rating
// ---------------------------------------------------------------------------

/// Rate an outline on the seven-dimension rubric.  An empty outline rates
/// exactly 0 with no provider call.
inline RatingBreakdown rate_outline(ChatProvider& provider, const PromptLibrary& prompts,
                                    const CriticContext& ctx, const Outline& outline,
                                    const std::vector<Blueprint>& blueprints = {}) {
    if (outline.empty()) return RatingBreakdown{};
    auto req = detail::build_critic_request(prompts, ctx, outline, blueprints);
    auto j = request_json(provider, req);
    return detail::breakdown_from_json(j);
}

// ---------------------------------------------------------------------------
// Full critic step
// ---------------------------------------------------------------------------

struct CriticStepResult {
    CriticState state;
    RatingBreakdown breakdown;
    std::vector<std::string> warnings;  // continuity repairs, dropped queries, caps
};

namespace detail {

/// Assign stable ids to proposed blueprints: keep echoed ids that exist in
/// `prev`; otherwise match by content similarity (Jaccard over tokens above
/// 0.6 pairs the proposal with the unmatched previous blueprint); otherwise
/// mint a fresh id.
inline void assign_blueprint_ids(const std::vector<Blueprint>& prev,
                                 std::vector<Blueprint>& proposed, int* id_counter) {
    std::set<std::string> prev_ids;
    for (const auto& p : prev) prev_ids.insert(p.id);
    std::set<std::string> used;
    for (auto& b : proposed) {
        if (!b.id.empty() && prev_ids.count(b.id) && !used.count(b.id)) {
            used.insert(b.id);
        } else {
            b.id.clear();  // unknown or duplicate echo: resolve below
        }
    }
    for (auto& b : proposed) {
        if (!b.id.empty()) continue;
        double best = 0.0;
        const Blueprint* match = nullptr;
        for (const auto& p : prev) {
            if (used.count(p.id)) continue;
            double sim = token_jaccard(b.content, p.content);
            if (sim > best) {
                best = sim;
                match = &p;
            }
        }
        if (match && best > 0.6) {
            b.id = match->id;
            used.insert(match->id);
        } else {
            b.id = "b" + std::to_string(++(*id_counter));
        }
    }
}

} // namespace detail

/// One critic move: rate the previous outline (0 for the empty round-0
/// state, without a rating call semantics — the single provider call is
/// still needed for blueprints) and produce the round's blueprint set with
/// continuity enforced, ids stabilized, historical queries deduplicated, and
/// count caps applied.
inline CriticStepResult critic_step(ChatProvider& provider, const PromptLibrary& prompts,
                                    const CriticContext& ctx, const GeneratorState& prev_gen,
                                    const CriticState* prev_critic, int round,
                                    int* blueprint_id_counter) {
    CriticStepResult result;
    std::vector<Blueprint> prev_blueprints =
        prev_critic ? prev_critic->blueprints : std::vector<Blueprint>{};

    auto req = detail::build_critic_request(prompts, ctx, prev_gen.outline, prev_blueprints);
    auto j = request_json(provider, req);

    // Rating: the empty outline is worth exactly 0, regardless of model output.
    if (prev_gen.outline.empty()) {
        result.breakdown = RatingBreakdown{};
    } else {
        result.breakdown = detail::breakdown_from_json(j);
    }

    std::vector<Blueprint> proposed;
    if (j.contains("blueprints") && j.at("blueprints").is_array()) {
        for (const auto& bj : j.at("blueprints")) {
            try {
                proposed.push_back(bj.get<Blueprint>());
            } catch (const nlohmann::json::exception&) {
                result.warnings.push_back("blueprint entry without content dropped");
            }
        }
    }
    // Empty content is a contract violation; drop such entries before merging.
    proposed.erase(std::remove_if(proposed.begin(), proposed.end(),
                                  [&](const Blueprint& b) {
                                      if (trim(b.content).empty()) {
                                          result.warnings.push_back(
                                              "blueprint with empty content dropped");
                                          return true;
                                      }
                                      return false;
                                  }),
                   proposed.end());

    detail::assign_blueprint_ids(prev_blueprints, proposed, blueprint_id_counter);
    std::vector<Blueprint> merged = enforce_continuity(prev_blueprints, proposed, &result.warnings);

    // Cap the blueprint count.  Previous ids always survive (continuity wins
    // over the cap); only brand-new proposals are trimmed.
    std::set<std::string> prev_ids;
    for (const auto& p : prev_blueprints) prev_ids.insert(p.id);
    int allowed_new = ctx.config.max_blueprints_len - static_cast<int>(prev_ids.size());
    std::vector<Blueprint> capped;
    int new_count = 0;
    for (auto& b : merged) {
        if (prev_ids.count(b.id)) {
            capped.push_back(std::move(b));
        } else if (new_count < std::max(0, allowed_new)) {
            capped.push_back(std::move(b));
            ++new_count;
        } else {
            result.warnings.push_back("blueprint cap reached; dropped new blueprint '" +
                                      b.content + "'");
        }
    }

    // Deduplicate search queries against history (and within the round),
    // comparing normalized text; cap per-blueprint query counts.
    std::set<std::string> seen;
    for (const auto& h : ctx.history_queries) seen.insert(normalize_query(h));
    for (auto& b : capped) {
        std::vector<std::string> kept;
        for (auto& q : b.search_queries) {
            std::string norm = normalize_query(q);
            if (norm.empty()) continue;
            if (seen.count(norm)) {
                result.warnings.push_back("duplicate search query dropped: " + q);
                log_warn("critic: duplicate search query dropped: " + q);
                continue;
            }
            if (static_cast<int>(kept.size()) >= ctx.config.max_query_len) {
                result.warnings.push_back("query cap reached for blueprint '" + b.id +
                                          "'; dropped: " + q);
                continue;
            }
            seen.insert(norm);
            kept.push_back(q);
        }
        b.search_queries = std::move(kept);
    }

    result.state.round = round;
    result.state.rating = result.breakdown.overall;
    result.state.justification = j.value("justification", "");
    result.state.blueprints = std::move(capped);
    return result;
}

} // namespace dre
