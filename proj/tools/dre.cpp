/// @file dre.cpp
/// @brief Command-line front end for the deep-research engine.
///
/// Subcommands:
///   research <query>   run the full pipeline for one query
///   harness run        run the meta-optimization loop over a query file
///   eval pairwise      grade a target report against a reference report
///   bank show          inspect a persisted document bank
///
/// Exit codes: 0 success, 1 pipeline error, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dre/dre.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string mock_dir;
    std::string model_override;
    std::string search_engine;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "engine config JSON file");
    cmd->add_option("--mock", args.mock_dir,
                    "fixture directory; wires deterministic offline providers");
    cmd->add_option("--provider", args.model_override, "model name override");
    cmd->add_option("--search-engine", args.search_engine,
                    "search engine: generic_web | rednote | mock");
}

dre::EngineConfig load_config(const CommonArgs& args) {
    dre::EngineConfig config;
    if (!args.config_path.empty()) config = dre::EngineConfig::load(args.config_path);
    if (!args.model_override.empty()) config.provider.model = args.model_override;
    if (!args.search_engine.empty()) config.search.engine = args.search_engine;
    if (!args.mock_dir.empty()) config.search.engine = "mock";
    config.validate();
    return config;
}

/// Wire the provider set: deterministic mocks (with a fixed clock) when
/// --mock is given, HTTP providers otherwise.
dre::ProviderSet make_providers(const CommonArgs& args, const dre::EngineConfig& config) {
    if (!args.mock_dir.empty()) {
        auto fixture = std::make_shared<dre::MockFixture>(dre::MockFixture::load(args.mock_dir));
        auto chat = std::make_shared<dre::MockChatProvider>(fixture);
        auto search = std::make_shared<dre::MockSearchProvider>(fixture);
        return dre::ProviderSet::uniform(chat, search, std::make_shared<dre::FixedClock>());
    }
    dre::HttpProviderConfig chat_config;
    chat_config.endpoint = config.provider.endpoint;
    chat_config.api_key_env = config.provider.api_key_env;
    chat_config.model = config.provider.model;
    auto chat = std::make_shared<dre::HttpChatProvider>(chat_config);
    dre::HttpProviderConfig search_config;
    search_config.endpoint = config.search.endpoint;
    search_config.api_key_env = config.search.api_key_env;
    auto search =
        std::make_shared<dre::HttpSearchProvider>(search_config, config.search.engine);
    return dre::ProviderSet::uniform(chat, search, std::make_shared<dre::SystemClock>());
}

dre::PromptLibrary load_prompts(const dre::EngineConfig& config) {
    if (config.templates_dir.empty()) return dre::PromptLibrary::builtin();
    return dre::PromptLibrary::load(config.templates_dir);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw dre::ConfigError("cannot read file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> read_query_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw dre::ConfigError("cannot read query file: " + path.string());
    std::vector<std::string> queries;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = dre::trim(line);
        if (!t.empty()) queries.push_back(t);
    }
    if (queries.empty()) throw dre::ConfigError("query file is empty: " + path.string());
    return queries;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dual-agent deep-research engine"};
    app.require_subcommand(1);

    // --- research ---------------------------------------------------------
    auto* research = app.add_subcommand("research", "run the full pipeline for one query");
    CommonArgs research_args;
    add_common(research, research_args);
    std::string query_text;
    std::string out_dir = "runs/latest";
    int max_rounds_flag = -1;
    double exit_threshold_flag = -1.0;
    research->add_option("query", query_text, "the research query")->required();
    research->add_option("--out", out_dir, "output directory for run artifacts");
    research->add_option("--max-rounds", max_rounds_flag, "override max optimization rounds");
    research->add_option("--exit-threshold", exit_threshold_flag,
                         "override the critic rating exit threshold");

    // --- harness run --------------------------------------------------------
    auto* harness = app.add_subcommand("harness", "meta-optimization harness");
    auto* harness_run = harness->add_subcommand("run", "run the optimization loop");
    CommonArgs harness_args;
    add_common(harness_run, harness_args);
    std::string queries_path;
    std::string harness_out = "harness_run";
    std::string mutation_cmd;
    int harness_rounds_flag = -1;
    harness_run->add_option("--queries", queries_path, "file with one query per line")
        ->required();
    harness_run->add_option("--out", harness_out, "harness run directory");
    harness_run->add_option("--harness-rounds", harness_rounds_flag,
                            "optimization rounds for this invocation");
    harness_run->add_option("--mutation-cmd", mutation_cmd,
                            "external command run as '<cmd> <tracked_root>' between rounds");

    // --- eval pairwise ------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "report evaluation");
    auto* eval_pairwise = eval->add_subcommand("pairwise", "grade target vs reference report");
    CommonArgs eval_args;
    add_common(eval_pairwise, eval_args);
    std::string eval_query, target_path, reference_path;
    eval_pairwise->add_option("--query", eval_query, "the query both reports answer")
        ->required();
    eval_pairwise->add_option("--target", target_path, "target report markdown")->required();
    eval_pairwise->add_option("--reference", reference_path, "reference report markdown")
        ->required();

    // --- bank show ----------------------------------------------------------
    auto* bank = app.add_subcommand("bank", "document bank tools");
    auto* bank_show = bank->add_subcommand("show", "print a persisted document bank");
    std::string bank_path;
    bool archived_too = false;
    bank_show->add_option("--bank", bank_path, "document_bank.jsonl path")->required();
    bank_show->add_flag("--archived", archived_too, "include archived documents");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (research->parsed()) {
            dre::EngineConfig config = load_config(research_args);
            if (max_rounds_flag > 0) {
                config.max_rounds = max_rounds_flag;
                config.min_rounds = std::min(config.min_rounds, config.max_rounds);
            }
            if (exit_threshold_flag >= 0.0) config.exit_threshold = exit_threshold_flag;
            config.validate();
            auto providers = make_providers(research_args, config);
            auto prompts = load_prompts(config);
            std::unique_ptr<dre::PolicyBank> policy;
            if (!config.memory_dir.empty()) {
                policy = std::make_unique<dre::PolicyBank>(
                    dre::PolicyBank::open(config.memory_dir, *providers.clock));
            }
            auto result = dre::run_pipeline(query_text, providers, prompts, config, out_dir,
                                            policy.get());
            std::cout << "report: " << result.report_path.string() << "\n"
                      << "rounds: " << result.run.trajectory.steps.size()
                      << ", best round: " << result.best.round << ", citations: "
                      << result.writing.report.citation_map.size() << "\n";
        } else if (harness_run->parsed()) {
            dre::EngineConfig config = load_config(harness_args);
            auto providers = make_providers(harness_args, config);

            dre::HarnessOptions opts;
            opts.run_root = harness_out;
            opts.queries = read_query_lines(queries_path);
            opts.fixed_sample_size = config.harness.fixed_sample_size;
            opts.seed = config.harness.seed;
            opts.rounds = harness_rounds_flag > 0 ? harness_rounds_flag : config.harness.rounds;
            opts.mutation_cmd = mutation_cmd;
            opts.stop.target_mean = config.harness.target_mean;
            opts.stop.convergence_patience = config.harness.convergence_patience;
            opts.stop.max_optimization_rounds = config.harness.max_optimization_rounds;
            opts.loop = config.loop_config();

            // The tracked state is the prompt-template directory; materialize
            // the defaults on first run so there is something to mutate.
            fs::path tracked_root = config.templates_dir.empty()
                                        ? fs::path(harness_out) / "tracked"
                                        : fs::path(config.templates_dir).parent_path();
            opts.tracked_root = tracked_root;
            fs::path templates_dir = config.templates_dir.empty()
                                         ? tracked_root / "templates"
                                         : fs::path(config.templates_dir);
            if (!fs::exists(templates_dir)) dre::PromptLibrary::write_defaults(templates_dir);
            opts.templates_subdir = templates_dir.filename().string();
            for (const auto& entry : fs::directory_iterator(templates_dir)) {
                if (entry.is_regular_file()) {
                    opts.tracked_files.push_back(
                        (fs::path(opts.templates_subdir) / entry.path().filename()).string());
                }
            }
            std::sort(opts.tracked_files.begin(), opts.tracked_files.end());

            auto result = dre::run_harness(opts, providers);
            for (const auto& round : result.rounds) {
                std::cout << round.version << ": search_coverage mean "
                          << round.means.at("search_coverage") << " (" << round.status << ")\n";
            }
            std::cout << "best: " << result.manifest.best_version
                      << ", stop: " << dre::stop_reason_label(result.final_stop) << "\n";
        } else if (eval_pairwise->parsed()) {
            dre::EngineConfig config = load_config(eval_args);
            auto providers = make_providers(eval_args, config);
            auto prompts = load_prompts(config);
            std::string target = read_file(target_path);
            std::string reference = read_file(reference_path);
            auto weights = dre::allocate_weights(*providers.planner, prompts, eval_query);
            auto result = dre::pairwise_grade(*providers.judge, prompts, eval_query, target,
                                              reference, weights);
            std::cout << nlohmann::json(result).dump(2) << "\n";
        } else if (bank_show->parsed()) {
            dre::DocumentBank loaded = dre::DocumentBank::load(bank_path);
            for (const auto& rec : loaded.records()) {
                if (rec.archived && !archived_too) continue;
                std::cout << rec.id << "\t" << rec.judge_score << "\t" << rec.url << "\t"
                          << rec.title << (rec.archived ? "\t[archived]" : "") << "\n";
            }
        }
    } catch (const dre::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
