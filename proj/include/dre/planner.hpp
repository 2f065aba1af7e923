/// @file planner.hpp
/// @brief Query planning: intent classification over the two-category,
///        ten-intent taxonomy, plus folding the plan into the working query.

#pragma once

#include <string>

#include "dre/prompts.hpp"
#include "dre/providers.hpp"
#include "dre/types.hpp"

namespace dre {

/// Classify the query and obtain the response style.  Labels outside the
/// taxonomy fall back to deep_exploration with a warning.  In harness mode
/// the planner is additionally asked for search-formulation guidance, which
/// lands in Plan::instructions.
inline Plan plan_query(ChatProvider& provider, const PromptLibrary& prompts,
                       const std::string& query_text, bool harness_mode = false) {
    CompletionRequest req;
    req.role = "planner";
    req.system_prompt = "You plan how a research query should be answered.";
    req.user_prompt = prompts.render(
        "planner",
        {
            {"query", query_text},
            {"harness_note",
             harness_mode ? "\nAlso fill \"instructions\" with concrete tips for formulating "
                            "effective search queries for this topic.\n"
                          : ""},
        });
    auto j = request_json(provider, req);

    Plan plan;
    bool recognized = false;
    std::string label = j.value("intent", "");
    plan.intent = intent_from_label(label, &recognized);
    if (!recognized) {
        log_warn("planner returned unrecognized intent '" + label +
                 "'; falling back to deep_exploration");
    }
    plan.category = category_of(plan.intent);
    plan.response_style = j.value("response_style", "");
    plan.instructions = j.value("instructions", "");
    return plan;
}

/// Fold the plan into the working query q' = [P; q]: a fenced preamble block
/// carrying the plan (response_style verbatim) followed by the raw query.
inline std::string fold_plan(const Plan& plan, const std::string& query_text) {
    std::string out = "```plan\n";
    out += "category: " + category_label(plan.category) + "\n";
    out += "intent: " + intent_label(plan.intent) + "\n";
    out += "response_style: " + plan.response_style + "\n";
    if (!plan.instructions.empty()) {
        out += "instructions: " + plan.instructions + "\n";
    }
    out += "```\n\n";
    out += query_text;
    return out;
}

} // namespace dre
