/// @file types.hpp
/// @brief Core value types: query plans, blueprints, the per-round agent
///        states, trajectories, and reports — with JSON (de)serialization.

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dre/outline.hpp"
#include "dre/util.hpp"

namespace dre {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Query intent taxonomy
// ---------------------------------------------------------------------------

enum class QueryCategory { information_seeking, decision_making };

enum class QueryIntent {
    // information seeking
    fact_query,
    status_progress,
    news_information,
    deep_exploration,
    resource_locating,
    // decision making
    comparison_selection,
    recommendations,
    how_to_guide,
    travel_planning,
    purchase_decision,
};

inline constexpr std::array<QueryIntent, 10> kAllIntents = {
    QueryIntent::fact_query,           QueryIntent::status_progress,
    QueryIntent::news_information,     QueryIntent::deep_exploration,
    QueryIntent::resource_locating,    QueryIntent::comparison_selection,
    QueryIntent::recommendations,      QueryIntent::how_to_guide,
    QueryIntent::travel_planning,      QueryIntent::purchase_decision,
};

/// Category is a pure function of intent.
inline QueryCategory category_of(QueryIntent intent) {
    switch (intent) {
        case QueryIntent::fact_query:
        case QueryIntent::status_progress:
        case QueryIntent::news_information:
        case QueryIntent::deep_exploration:
        case QueryIntent::resource_locating:
            return QueryCategory::information_seeking;
        default:
            return QueryCategory::decision_making;
    }
}

inline std::string intent_label(QueryIntent intent) {
    switch (intent) {
        case QueryIntent::fact_query: return "fact_query";
        case QueryIntent::status_progress: return "status_progress";
        case QueryIntent::news_information: return "news_information";
        case QueryIntent::deep_exploration: return "deep_exploration";
        case QueryIntent::resource_locating: return "resource_locating";
        case QueryIntent::comparison_selection: return "comparison_selection";
        case QueryIntent::recommendations: return "recommendations";
        case QueryIntent::how_to_guide: return "how_to_guide";
        case QueryIntent::travel_planning: return "travel_planning";
        case QueryIntent::purchase_decision: return "purchase_decision";
    }
    return "deep_exploration";
}

inline std::string category_label(QueryCategory cat) {
    return cat == QueryCategory::information_seeking ? "information_seeking" : "decision_making";
}

/// Map a model-emitted label ("Travel Planning", "travel-planning", ...) back
/// to the enum.  Sets `recognized` false (and falls back to deep_exploration)
/// for labels outside the taxonomy.
inline QueryIntent intent_from_label(std::string_view label, bool* recognized = nullptr) {
    std::string norm = lower_ascii(trim(label));
    for (char& c : norm) {
        if (c == ' ' || c == '-') c = '_';
    }
    for (QueryIntent intent : kAllIntents) {
        if (norm == intent_label(intent)) {
            if (recognized) *recognized = true;
            return intent;
        }
    }
    if (recognized) *recognized = false;
    return QueryIntent::deep_exploration;
}

// ---------------------------------------------------------------------------
// Plan and query
// ---------------------------------------------------------------------------

/// Output of the query planner: intent classification plus the response
/// style the downstream agents must honor.
struct Plan {
    QueryCategory category = QueryCategory::information_seeking;
    QueryIntent intent = QueryIntent::deep_exploration;
    std::string response_style;
    std::string instructions;  // extra guidance, filled in harness mode

    bool operator==(const Plan&) const = default;
};

inline void to_json(json& j, const Plan& p) {
    j = json{{"category", category_label(p.category)},
             {"intent", intent_label(p.intent)},
             {"response_style", p.response_style},
             {"instructions", p.instructions}};
}

inline void from_json(const json& j, Plan& p) {
    p.intent = intent_from_label(j.at("intent").get<std::string>());
    p.category = category_of(p.intent);
    p.response_style = j.value("response_style", "");
    p.instructions = j.value("instructions", "");
}

/// A research request as received by the pipeline.
struct ResearchQuery {
    std::string id;
    std::string text;
    std::string created_at;

    static ResearchQuery make(std::string text, Clock& clock) {
        ResearchQuery q;
        q.created_at = clock.timestamp();
        q.id = "q_" + hex64(fnv1a64(text + "|" + q.created_at));
        q.text = std::move(text);
        return q;
    }

    bool operator==(const ResearchQuery&) const = default;
};

inline void to_json(json& j, const ResearchQuery& q) {
    j = json{{"id", q.id}, {"text", q.text}, {"created_at", q.created_at}};
}

inline void from_json(const json& j, ResearchQuery& q) {
    q.id = j.at("id").get<std::string>();
    q.text = j.at("text").get<std::string>();
    q.created_at = j.value("created_at", "");
}

// ---------------------------------------------------------------------------
// Blueprints and agent states
// ---------------------------------------------------------------------------

/// One research direction: what to investigate and which searches to run.
struct Blueprint {
    std::string id;                           // stable across rounds
    std::string content;                      // the direction, non-empty
    std::vector<std::string> search_queries;  // queries still to execute

    bool operator==(const Blueprint&) const = default;
};

inline void to_json(json& j, const Blueprint& b) {
    j = json{{"id", b.id}, {"content", b.content}, {"search_query", b.search_queries}};
}

inline void from_json(const json& j, Blueprint& b) {
    b.id = j.value("id", "");
    b.content = j.at("content").get<std::string>();
    b.search_queries.clear();
    if (j.contains("search_query")) {
        if (j.at("search_query").is_array()) {
            for (const auto& q : j.at("search_query")) {
                b.search_queries.push_back(q.get<std::string>());
            }
        } else if (j.at("search_query").is_string()) {
            b.search_queries.push_back(j.at("search_query").get<std::string>());
        }
    }
}

/// Plain-text rendering of a blueprint set, used inside prompts.
inline std::string blueprints_digest(const std::vector<Blueprint>& blueprints) {
    if (blueprints.empty()) return "(none yet)";
    std::string out;
    for (const auto& b : blueprints) {
        out += "- (id=" + b.id + ") " + b.content + "\n";
        if (!b.search_queries.empty()) {
            out += "  queries: " + join(b.search_queries, " | ") + "\n";
        }
    }
    return out;
}

/// Critic move for one round: how good the previous outline was, why, and
/// the updated blueprint set.
struct CriticState {
    int round = 0;
    double rating = 0.0;  // [0, 10]; round 0 seeds 0 for the empty outline
    std::string justification;
    std::vector<Blueprint> blueprints;

    bool operator==(const CriticState&) const = default;
};

inline void to_json(json& j, const CriticState& c) {
    j = json{{"round", c.round},
             {"rating", c.rating},
             {"justification", c.justification},
             {"blueprints", c.blueprints}};
}

inline void from_json(const json& j, CriticState& c) {
    c.round = j.at("round").get<int>();
    c.rating = j.at("rating").get<double>();
    c.justification = j.value("justification", "");
    c.blueprints = j.value("blueprints", std::vector<Blueprint>{});
}

/// Generator move for one round: the outline draft and the ids it cites.
struct GeneratorState {
    int round = 0;
    Outline outline;
    std::vector<std::string> reference_ids;  // == extract_citations(outline)

    /// The state the loop is seeded with: nothing drafted, nothing cited.
    static GeneratorState initial() { return GeneratorState{}; }

    bool operator==(const GeneratorState&) const = default;
};

inline void to_json(json& j, const GeneratorState& g) {
    j = json{{"round", g.round},
             {"outline_markdown", serialize_outline(g.outline)},
             {"reference_ids", g.reference_ids}};
}

inline void from_json(const json& j, GeneratorState& g) {
    g.round = j.at("round").get<int>();
    g.outline = parse_outline(j.value("outline_markdown", ""));
    g.reference_ids = j.value("reference_ids", std::vector<std::string>{});
}

/// One critic-then-generator exchange.
struct RoundStep {
    CriticState critic;
    GeneratorState generator;

    bool operator==(const RoundStep&) const = default;
};

inline void to_json(json& j, const RoundStep& s) {
    j = json{{"critic", s.critic}, {"generator", s.generator}};
}

inline void from_json(const json& j, RoundStep& s) {
    s.critic = j.at("critic").get<CriticState>();
    s.generator = j.at("generator").get<GeneratorState>();
}

/// Full record of one research run: the query, its plan, and the alternating
/// agent states round by round.
struct Trajectory {
    ResearchQuery query;
    Plan plan;
    std::vector<RoundStep> steps;  // steps[t].critic.round == t == ...generator.round
    int terminal_round = -1;       // round index at which the loop exited

    bool operator==(const Trajectory&) const = default;
};

inline void to_json(json& j, const Trajectory& t) {
    j = json{{"query", t.query},
             {"plan", t.plan},
             {"steps", t.steps},
             {"terminal_round", t.terminal_round}};
}

inline void from_json(const json& j, Trajectory& t) {
    t.query = j.at("query").get<ResearchQuery>();
    t.plan = j.at("plan").get<Plan>();
    t.steps = j.value("steps", std::vector<RoundStep>{});
    t.terminal_round = j.value("terminal_round", -1);
}

/// Round indices must be contiguous from 0 and agree between the paired
/// states.  Empty vector means the trajectory is well-formed.
inline std::vector<std::string> validate_trajectory(const Trajectory& t) {
    std::vector<std::string> errors;
    for (size_t i = 0; i < t.steps.size(); ++i) {
        int expected = static_cast<int>(i);
        if (t.steps[i].critic.round != expected) {
            errors.push_back("critic round mismatch at step " + std::to_string(i));
        }
        if (t.steps[i].generator.round != expected) {
            errors.push_back("generator round mismatch at step " + std::to_string(i));
        }
    }
    if (t.terminal_round >= 0 && t.terminal_round + 1 != static_cast<int>(t.steps.size())) {
        errors.push_back("terminal_round does not match recorded steps");
    }
    return errors;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// The written deliverable: per-section chunks in outline order, the full
/// markdown, and the id → URL map backing the references appendix.
struct Report {
    std::vector<std::pair<std::string, std::string>> sections;  // (section path, chunk)
    std::string full_markdown;
    std::map<std::string, std::string> citation_map;  // doc id → URL

    bool operator==(const Report&) const = default;
};

inline void to_json(json& j, const Report& r) {
    json sections = json::array();
    for (const auto& [path, chunk] : r.sections) {
        sections.push_back(json{{"path", path}, {"markdown", chunk}});
    }
    j = json{{"sections", sections},
             {"full_markdown", r.full_markdown},
             {"citation_map", r.citation_map}};
}

inline void from_json(const json& j, Report& r) {
    r.sections.clear();
    for (const auto& s : j.value("sections", json::array())) {
        r.sections.emplace_back(s.at("path").get<std::string>(),
                                s.at("markdown").get<std::string>());
    }
    r.full_markdown = j.value("full_markdown", "");
    r.citation_map = j.value("citation_map", std::map<std::string, std::string>{});
}

} // namespace dre
