/// @file pipeline.hpp
/// @brief End-to-end research pipeline: plan, optimize the outline, write the
///        report, persist every artifact of the run.

#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "dre/config.hpp"
#include "dre/planner.hpp"
#include "dre/policy_bank.hpp"
#include "dre/research_loop.hpp"
#include "dre/writer.hpp"

namespace dre {

struct PipelineResult {
    ResearchQuery query;
    Plan plan;
    ResearchRun run;
    GeneratorState best;
    WriteOutcome writing;
    std::filesystem::path report_path;
};

/// Run one query through the whole pipeline and persist the run's artifacts
/// under `out_dir`:
///   report.md            the final report
///   run_log.jsonl        effective config (first line), one line per round,
///                        one closing report line
///   trajectory.json      every round's critic and generator state
///   document_bank.jsonl  all documents, including archived ones
///   plan.json            the query plan
inline PipelineResult run_pipeline(const std::string& query_text, const ProviderSet& providers,
                                   const PromptLibrary& prompts, const EngineConfig& config,
                                   const std::filesystem::path& out_dir,
                                   PolicyBank* policy_bank = nullptr) {
    config.validate();
    std::filesystem::create_directories(out_dir);
    std::ofstream log(out_dir / "run_log.jsonl");
    if (!log) throw PersistenceFailure("cannot write run log in " + out_dir.string());
    log << nlohmann::json{{"type", "config"}, {"config", config.effective()}}.dump() << "\n";

    PipelineResult result;
    result.query = ResearchQuery::make(query_text, *providers.clock);
    result.plan = plan_query(*providers.planner, prompts, query_text);
    {
        std::ofstream out(out_dir / "plan.json");
        out << nlohmann::json(result.plan).dump(2) << "\n";
    }

    result.run = run_research(result.query, result.plan, providers, prompts,
                              config.loop_config(), policy_bank);
    for (const auto& entry : result.run.round_log) {
        log << nlohmann::json(entry).dump() << "\n";
    }

    result.best = select_best(result.run.trajectory);
    const std::string folded = fold_plan(result.plan, query_text);
    result.writing = write_report(*providers.writer, prompts, folded,
                                  result.plan.response_style, result.best.outline,
                                  result.run.bank, config.writer_config());

    result.report_path = out_dir / "report.md";
    {
        std::ofstream out(result.report_path);
        if (!out) throw PersistenceFailure("cannot write report.md");
        out << result.writing.report.full_markdown;
    }
    {
        std::ofstream out(out_dir / "trajectory.json");
        out << nlohmann::json(result.run.trajectory).dump(2) << "\n";
    }
    result.run.bank.save(out_dir / "document_bank.jsonl");

    nlohmann::json rewrites = nlohmann::json::array();
    for (const auto& [from, to] : result.writing.heading_rewrites) {
        rewrites.push_back({{"from", from}, {"to", to}});
    }
    log << nlohmann::json{{"type", "report"},
                          {"best_round", result.best.round},
                          {"sections", result.writing.report.sections.size()},
                          {"citations", result.writing.report.citation_map.size()},
                          {"heading_rewrites", rewrites},
                          {"repeated_citations_removed",
                           result.writing.repeated_citations_removed}}
               .dump()
        << "\n";
    if (!log) throw PersistenceFailure("short write to run log");
    return result;
}

} // namespace dre
