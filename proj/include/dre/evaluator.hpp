/// @file evaluator.hpp
/// @brief Report-quality evaluation: query mining and classification for
///        building a benchmark set, per-query dimension weighting, and
///        pairwise target-vs-reference grading with weighted aggregation.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "dre/prompts.hpp"
#include "dre/providers.hpp"
#include "dre/util.hpp"

namespace dre {

inline constexpr std::array<const char*, 4> kEvalDimensions = {
    "comprehensiveness", "insight", "instruction_following", "readability"};

// ---------------------------------------------------------------------------
// Dimension weights
// ---------------------------------------------------------------------------

struct DimensionWeights {
    double comprehensiveness = 0.25;
    double insight = 0.25;
    double instruction_following = 0.25;
    double readability = 0.25;

    double& by_name(const std::string& name) {
        if (name == "comprehensiveness") return comprehensiveness;
        if (name == "insight") return insight;
        if (name == "instruction_following") return instruction_following;
        return readability;
    }
    double by_name(const std::string& name) const {
        return const_cast<DimensionWeights*>(this)->by_name(name);
    }

    double sum() const {
        return comprehensiveness + insight + instruction_following + readability;
    }
};

inline void to_json(nlohmann::json& j, const DimensionWeights& w) {
    j = nlohmann::json{{"comprehensiveness", w.comprehensiveness},
                       {"insight", w.insight},
                       {"instruction_following", w.instruction_following},
                       {"readability", w.readability}};
}

/// Clamp negatives to zero and renormalize so the weights sum to 1 (within
/// 1e-9).  An all-zero request falls back to equal weights with a warning.
inline DimensionWeights normalize_weights(DimensionWeights w) {
    for (const char* name : kEvalDimensions) {
        double& v = w.by_name(name);
        if (v < 0.0) {
            log_warn(std::string("negative weight for ") + name + " clamped to 0");
            v = 0.0;
        }
    }
    double total = w.sum();
    if (total <= 0.0) {
        log_warn("all dimension weights zero; falling back to equal weights");
        return DimensionWeights{};
    }
    for (const char* name : kEvalDimensions) w.by_name(name) /= total;
    return w;
}

/// Ask the model for query-specific dimension weights, then normalize them.
inline DimensionWeights allocate_weights(ChatProvider& provider, const PromptLibrary& prompts,
                                         const std::string& query_text) {
    CompletionRequest req;
    req.role = "weights";
    req.system_prompt = "You decide how much each quality dimension matters for a query.";
    req.user_prompt = prompts.render("weights_allocator", {{"query", query_text}});
    nlohmann::json j = request_json(provider, req);
    DimensionWeights w;
    for (const char* name : kEvalDimensions) {
        w.by_name(name) = j.value(name, 0.0);
    }
    return normalize_weights(w);
}

// ---------------------------------------------------------------------------
// Pairwise grading
// ---------------------------------------------------------------------------

struct DimensionScorePair {
    double target = 0.0;     // [0, 100]
    double reference = 0.0;  // [0, 100]
};

struct PairwiseResult {
    DimensionWeights weights;
    std::array<DimensionScorePair, 4> dimensions;  // kEvalDimensions order
    double target_overall = 0.0;
    double reference_overall = 0.0;
    std::string rationale;
};

inline void to_json(nlohmann::json& j, const PairwiseResult& r) {
    nlohmann::json dims;
    for (size_t i = 0; i < kEvalDimensions.size(); ++i) {
        dims[kEvalDimensions[i]] = {{"target", r.dimensions[i].target},
                                    {"reference", r.dimensions[i].reference}};
    }
    j = nlohmann::json{{"weights", r.weights},
                       {"dimensions", dims},
                       {"target_overall", r.target_overall},
                       {"reference_overall", r.reference_overall},
                       {"rationale", r.rationale}};
}

/// Weighted overall from per-dimension scores; the aggregation is recomputed
/// here rather than trusted from the judge.
inline double weighted_overall(const DimensionWeights& weights,
                               const std::array<double, 4>& scores) {
    double total = 0.0;
    for (size_t i = 0; i < kEvalDimensions.size(); ++i) {
        total += weights.by_name(kEvalDimensions[i]) * scores[i];
    }
    return total;
}

/// Grade `target` against `reference` on the four dimensions with the
/// reference anchored at 50 per dimension.  Judged dimension scores are
/// clamped into [0, 100]; both overalls are recomputed as the weighted sum.
/// A report judged against itself scores exactly 50 everywhere.
inline PairwiseResult pairwise_grade(ChatProvider& judge, const PromptLibrary& prompts,
                                     const std::string& query_text, const std::string& target,
                                     const std::string& reference,
                                     const DimensionWeights& weights) {
    PairwiseResult result;
    result.weights = weights;
    if (target == reference) {
        for (auto& d : result.dimensions) d = {50.0, 50.0};
        result.target_overall = weighted_overall(weights, {50.0, 50.0, 50.0, 50.0});
        result.reference_overall = result.target_overall;
        result.rationale = "target and reference are identical";
        return result;
    }
    CompletionRequest req;
    req.role = "pairwise";
    req.system_prompt = "You compare two research reports dimension by dimension.";
    req.user_prompt = prompts.render("pairwise_judge", {{"query", query_text},
                                                        {"target", target},
                                                        {"reference", reference}});
    nlohmann::json j = request_json(judge, req);
    nlohmann::json jt = j.value("target", nlohmann::json::object());
    nlohmann::json jr = j.value("reference", nlohmann::json::object());
    std::array<double, 4> target_scores{};
    std::array<double, 4> reference_scores{};
    for (size_t i = 0; i < kEvalDimensions.size(); ++i) {
        const char* name = kEvalDimensions[i];
        double t = jt.value(name, 0.0);
        double r = jr.value(name, 50.0);
        if (t < 0.0 || t > 100.0 || r < 0.0 || r > 100.0) {
            log_warn(std::string("pairwise score out of range on ") + name + "; clamped");
        }
        target_scores[i] = std::clamp(t, 0.0, 100.0);
        reference_scores[i] = std::clamp(r, 0.0, 100.0);
        result.dimensions[i] = {target_scores[i], reference_scores[i]};
    }
    result.target_overall = weighted_overall(weights, target_scores);
    result.reference_overall = weighted_overall(weights, reference_scores);
    result.rationale = j.value("rationale", "");
    return result;
}

// ---------------------------------------------------------------------------
// Query mining and classification
// ---------------------------------------------------------------------------

/// The closed category label set for benchmark classification.
inline constexpr std::array<const char*, 22> kQueryCategoryLabels = {
    "Finance & Business", "Science & Technology", "Software Development",
    "Education & Jobs",   "Health",               "Literature",
    "History",            "Hardware",             "Industrial",
    "Art & Design",       "Games",                "Crime & Law",
    "Entertainment",      "Sports & Fitness",     "Software",
    "Transportation",     "Religion",             "Home & Hobbies",
    "Travel",             "Food & Dining",        "Fashion & Beauty",
    "Social Life"};

/// Mine `min_n`-`max_n` multi-step research queries in a category.  One retry
/// on a count violation, then LengthViolation.
inline std::vector<std::string> mine_queries(ChatProvider& provider,
                                             const PromptLibrary& prompts,
                                             const std::string& category, size_t min_n = 4,
                                             size_t max_n = 6) {
    CompletionRequest req;
    req.role = "query_miner";
    req.system_prompt = "You write benchmark-grade deep-research queries.";
    req.user_prompt = prompts.render("query_miner", {{"category", category},
                                                     {"min_n", std::to_string(min_n)},
                                                     {"max_n", std::to_string(max_n)}});
    for (int attempt = 0; attempt < 2; ++attempt) {
        nlohmann::json j = request_json(provider, req, /*expect_array=*/true);
        std::vector<std::string> queries;
        for (const auto& item : j) {
            if (item.is_string()) {
                std::string q = trim(item.get<std::string>());
                if (!q.empty()) queries.push_back(q);
            }
        }
        if (queries.size() >= min_n && queries.size() <= max_n) return queries;
        log_warn("query miner returned " + std::to_string(queries.size()) + " queries (want " +
                 std::to_string(min_n) + "-" + std::to_string(max_n) + ")" +
                 (attempt == 0 ? "; retrying" : ""));
    }
    throw LengthViolation("query miner could not produce the requested query count");
}

/// Classify a query into the closed label set.  The label is matched
/// case-insensitively; unknown output earns one retry, then UnknownCategory.
inline std::string classify_query(ChatProvider& provider, const PromptLibrary& prompts,
                                  const std::string& query_text) {
    CompletionRequest req;
    req.role = "query_classifier";
    req.system_prompt = "You assign exactly one category label.";
    req.user_prompt = prompts.render("query_classifier", {{"query", query_text}});
    std::string last;
    for (int attempt = 0; attempt < 2; ++attempt) {
        last = trim(provider.complete(req));
        std::string folded = lower_ascii(collapse_ws(last));
        for (const char* label : kQueryCategoryLabels) {
            if (folded == lower_ascii(label)) return label;
        }
        log_warn("classifier returned unknown label '" + last + "'" +
                 (attempt == 0 ? "; retrying" : ""));
    }
    throw UnknownCategory(last);
}

} // namespace dre
