/// @file research_loop.hpp
/// @brief The outline-optimization loop: alternate critic and generator moves
///        round by round, carry citations forward, and stop on the exit
///        predicate.  Also: best-outline selection over the trajectory.

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dre/critic.hpp"
#include "dre/document_bank.hpp"
#include "dre/generator.hpp"
#include "dre/planner.hpp"
#include "dre/policy_bank.hpp"
#include "dre/prompts.hpp"
#include "dre/providers.hpp"
#include "dre/types.hpp"

namespace dre {

// ---------------------------------------------------------------------------
// Wiring
// ---------------------------------------------------------------------------

/// Provider handles per agent role.  Roles may share one provider (the usual
/// case) or differ; the harness scorer reuses the generator's handle.
struct ProviderSet {
    std::shared_ptr<ChatProvider> planner;
    std::shared_ptr<ChatProvider> critic;
    std::shared_ptr<ChatProvider> generator;
    std::shared_ptr<ChatProvider> writer;
    std::shared_ptr<ChatProvider> judge;  // document relevance scoring
    std::shared_ptr<SearchProvider> search;
    std::shared_ptr<Clock> clock;

    /// Everything on one chat provider.
    static ProviderSet uniform(std::shared_ptr<ChatProvider> chat,
                               std::shared_ptr<SearchProvider> search,
                               std::shared_ptr<Clock> clock) {
        ProviderSet p;
        p.planner = chat;
        p.critic = chat;
        p.generator = chat;
        p.writer = chat;
        p.judge = chat;
        p.search = std::move(search);
        p.clock = std::move(clock);
        return p;
    }

    /// The harness scorer is the repurposed generator role: same provider.
    ChatProvider& scorer() const { return *generator; }
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct LoopConfig {
    double exit_threshold = 8.0;  // rating at which the outline is acceptable
    int min_rounds = 2;           // threshold exit allowed from this round count on
    int max_rounds = 3;           // hard round cap
    int num_searches = 10;        // results fetched per search query
    double filter_threshold = 0.2;
    CriticConfig critic;
    size_t workers = 4;

    void validate() const {
        if (min_rounds < 1) throw ConfigError("min_rounds must be >= 1");
        if (max_rounds < min_rounds) throw ConfigError("max_rounds must be >= min_rounds");
        if (num_searches < 1) throw ConfigError("num_searches must be >= 1");
        if (exit_threshold < 0.0 || exit_threshold > 10.0) {
            throw ConfigError("exit_threshold must lie in [0, 10]");
        }
        if (filter_threshold < 0.0 || filter_threshold > 1.0) {
            throw ConfigError("filter_threshold must lie in [0, 1]");
        }
    }
};

/// The exit predicate, evaluated after round `t` (0-based) completes with
/// rating `rating_t`: with n = t + 1 completed rounds, exit iff
/// (n >= min_rounds and rating_t >= exit_threshold) or n == max_rounds.
inline bool should_exit(int completed_rounds, double rating, const LoopConfig& config) {
    if (completed_rounds >= config.min_rounds && rating >= config.exit_threshold) return true;
    return completed_rounds == config.max_rounds;
}

// ---------------------------------------------------------------------------
// Run record
// ---------------------------------------------------------------------------

/// One line of the run log per round.
struct RoundLogEntry {
    int round = 0;
    double rating = 0.0;
    RatingBreakdown breakdown;
    std::vector<std::string> executed_queries;
    int docs_ingested = 0;
    int docs_archived = 0;
    int docs_carried = 0;
    double citation_rate = 0.0;  // of this round's outline vs this round's searches
    std::vector<std::string> blueprint_ids;
    std::vector<std::string> warnings;
    std::vector<std::string> lint;
};

inline void to_json(nlohmann::json& j, const RoundLogEntry& e) {
    j = nlohmann::json{{"type", "round"},
                       {"round", e.round},
                       {"rating", e.rating},
                       {"breakdown", e.breakdown},
                       {"executed_queries", e.executed_queries},
                       {"docs_ingested", e.docs_ingested},
                       {"docs_archived", e.docs_archived},
                       {"docs_carried", e.docs_carried},
                       {"citation_rate", e.citation_rate},
                       {"blueprint_ids", e.blueprint_ids},
                       {"warnings", e.warnings},
                       {"lint", e.lint}};
}

struct ResearchRun {
    Trajectory trajectory;
    DocumentBank bank;
    std::vector<RoundLogEntry> round_log;

    ResearchRun() : bank(0.2) {}
};

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

/// The generator state of the round with the highest rating; ties go to the
/// latest round.  Throws EmptyTrajectory when no rounds were recorded.
inline const GeneratorState& select_best(const Trajectory& trajectory) {
    if (trajectory.steps.empty()) throw EmptyTrajectory();
    size_t best = 0;
    for (size_t i = 1; i < trajectory.steps.size(); ++i) {
        if (trajectory.steps[i].critic.rating >= trajectory.steps[best].critic.rating) {
            best = i;  // >= so later rounds win ties
        }
    }
    return trajectory.steps[best].generator;
}

// ---------------------------------------------------------------------------
// The loop
// ---------------------------------------------------------------------------

/// Run the critic/generator loop for one query.
///
/// Round t: the critic observes the previous outline (the empty initial state
/// at t = 0, rated exactly 0) and produces the round's rating and blueprint
/// set; citations from the previous outline are carried into round t's
/// namespace; the generator executes the round's searches and drafts the
/// round's outline.  After each round the exit predicate decides whether to
/// continue.  `policy_bank` (optional) supplies effectiveness feedback.
inline ResearchRun run_research(const ResearchQuery& query, const Plan& plan,
                                const ProviderSet& providers, const PromptLibrary& prompts,
                                const LoopConfig& config,
                                const PolicyBank* policy_bank = nullptr,
                                std::optional<double> current_best_score = std::nullopt) {
    config.validate();
    ResearchRun run;
    run.bank = DocumentBank(config.filter_threshold);
    run.trajectory.query = query;
    run.trajectory.plan = plan;
    // prev_critic points into steps; keep it valid across push_back.
    run.trajectory.steps.reserve(static_cast<size_t>(config.max_rounds));

    const std::string folded = fold_plan(plan, query.text);
    GeneratorState prev_gen = GeneratorState::initial();
    const CriticState* prev_critic = nullptr;
    std::vector<std::string> history_queries;
    int blueprint_id_counter = 0;

    for (int round = 0; round < config.max_rounds; ++round) {
        RoundLogEntry log_entry;
        log_entry.round = round;

        // --- critic phase ----------------------------------------------------
        CriticContext ctx;
        ctx.folded_query = folded;
        ctx.history_queries = history_queries;
        ctx.citation_rate =
            round == 0 ? 0.0 : run.bank.citation_rate(prev_gen.outline, round - 1);
        ctx.config = config.critic;
        if (policy_bank) {
            ctx.feedback = policy_bank->query_feedback(query.text, current_best_score);
        }
        CriticStepResult critic =
            critic_step(*providers.critic, prompts, ctx, prev_gen, prev_critic, round,
                        &blueprint_id_counter);
        log_entry.rating = critic.state.rating;
        log_entry.breakdown = critic.breakdown;
        for (const auto& b : critic.state.blueprints) log_entry.blueprint_ids.push_back(b.id);
        for (const auto& w : critic.warnings) log_entry.warnings.push_back(w);

        // --- carry citations into this round's namespace ---------------------
        GeneratorState carried = prev_gen;
        if (!prev_gen.outline.empty()) {
            std::vector<std::string> kept;
            for (const auto& id : extract_citations(prev_gen.outline)) {
                if (run.bank.contains(id) && !run.bank.get(id).archived) kept.push_back(id);
            }
            auto remap = run.bank.reindex_for_round(round, kept);
            log_entry.docs_carried = static_cast<int>(remap.size());
            std::function<void(OutlineNode&)> rewrite = [&](OutlineNode& node) {
                for (auto& id : node.cite_ids) {
                    auto it = remap.find(id);
                    if (it != remap.end()) id = it->second;
                }
                for (auto& c : node.children) rewrite(c);
            };
            if (!carried.outline.empty()) rewrite(*carried.outline.root);
            carried.reference_ids = extract_citations(carried.outline);
        }

        // --- generator phase --------------------------------------------------
        SearchBatch batch = run_searches(*providers.search, critic.state.blueprints,
                                         config.num_searches, config.workers);
        log_entry.executed_queries = batch.executed_queries;
        for (const auto& q : batch.executed_queries) {
            run.bank.register_query(q);
            history_queries.push_back(q);
        }
        JudgeContext jctx;
        jctx.folded_query = folded;
        jctx.blueprints_digest = blueprints_digest(critic.state.blueprints);
        jctx.outline_markdown = serialize_outline(carried.outline);
        auto judge = make_provider_judge(*providers.judge, prompts, jctx);
        auto new_ids = run.bank.ingest_and_score(round, batch.items, judge, config.workers);
        log_entry.docs_ingested = static_cast<int>(new_ids.size());
        log_entry.docs_archived = 0;
        for (const auto& id : new_ids) {
            if (run.bank.get(id).archived) ++log_entry.docs_archived;
        }

        GeneratorStepResult gen = generate_outline(*providers.generator, prompts, folded,
                                                   critic.state, carried, run.bank, round);
        log_entry.citation_rate = run.bank.citation_rate(gen.state.outline, round);
        for (const auto& w : gen.warnings) log_entry.warnings.push_back(w);
        log_entry.lint = gen.lint;

        run.trajectory.steps.push_back(RoundStep{critic.state, gen.state});
        prev_critic = &run.trajectory.steps.back().critic;
        prev_gen = run.trajectory.steps.back().generator;
        run.round_log.push_back(std::move(log_entry));

        if (should_exit(round + 1, critic.state.rating, config)) {
            run.trajectory.terminal_round = round;
            break;
        }
    }
    return run;
}

} // namespace dre
