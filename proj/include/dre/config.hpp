/// @file config.hpp
/// @brief Engine configuration: JSON file loading, validation, and the
///        effective-config echo emitted at the head of every run log.

#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "dre/errors.hpp"
#include "dre/research_loop.hpp"
#include "dre/util.hpp"
#include "dre/writer.hpp"

namespace dre {

struct ProviderConfig {
    std::string endpoint;
    std::string api_key_env = "DRE_API_KEY";
    std::string model;
};

struct SearchConfig {
    std::string engine = "generic_web";  // generic_web | rednote | mock
    std::string endpoint;
    std::string api_key_env = "DRE_SEARCH_API_KEY";
};

struct HarnessSettings {
    int rounds = 3;
    double target_mean = 9.0;
    int convergence_patience = 5;
    int max_optimization_rounds = 20;
    uint64_t seed = 17;
    size_t fixed_sample_size = 10;
};

/// Whole-engine configuration.  `max_outline_generator_turns` is accepted as
/// an alias for `max_rounds` (the name used by the original experiment
/// configs); an explicit `max_rounds` wins.
struct EngineConfig {
    int min_rounds = 2;
    int max_rounds = 3;
    double exit_threshold = 8.0;
    int num_searches = 10;
    double filter_threshold = 0.2;
    int max_blueprints_len = 10;
    int min_query_per_blueprint = 1;
    int min_query_len = 1;
    int max_query_len = 5;
    int workers = 4;
    int context_budget_chars = 24000;
    std::string templates_dir;
    std::string memory_dir;
    ProviderConfig provider;
    SearchConfig search;
    HarnessSettings harness;

    static EngineConfig from_json(const nlohmann::json& j);
    static EngineConfig load(const std::filesystem::path& path);
    void validate() const;
    nlohmann::json effective() const;
    LoopConfig loop_config() const;
    WriterConfig writer_config() const;
};

inline EngineConfig EngineConfig::from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "min_rounds",      "max_rounds",     "max_outline_generator_turns",
        "exit_threshold",  "num_searches",   "filter_threshold",
        "max_blueprints_len", "min_query_per_blueprint", "min_query_len",
        "max_query_len",   "workers",        "context_budget_chars",
        "templates_dir",   "memory_dir",     "provider",
        "search",          "harness"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.count(key)) log_warn("unknown config key '" + key + "' ignored");
    }
    EngineConfig c;
    c.min_rounds = j.value("min_rounds", c.min_rounds);
    c.max_rounds = j.value("max_outline_generator_turns", c.max_rounds);
    c.max_rounds = j.value("max_rounds", c.max_rounds);
    c.exit_threshold = j.value("exit_threshold", c.exit_threshold);
    c.num_searches = j.value("num_searches", c.num_searches);
    c.filter_threshold = j.value("filter_threshold", c.filter_threshold);
    c.max_blueprints_len = j.value("max_blueprints_len", c.max_blueprints_len);
    c.min_query_per_blueprint = j.value("min_query_per_blueprint", c.min_query_per_blueprint);
    c.min_query_len = j.value("min_query_len", c.min_query_len);
    c.max_query_len = j.value("max_query_len", c.max_query_len);
    c.workers = j.value("workers", c.workers);
    c.context_budget_chars = j.value("context_budget_chars", c.context_budget_chars);
    c.templates_dir = j.value("templates_dir", c.templates_dir);
    c.memory_dir = j.value("memory_dir", c.memory_dir);
    if (j.contains("provider")) {
        const auto& p = j.at("provider");
        c.provider.endpoint = p.value("endpoint", c.provider.endpoint);
        c.provider.api_key_env = p.value("api_key_env", c.provider.api_key_env);
        c.provider.model = p.value("model", c.provider.model);
    }
    if (j.contains("search")) {
        const auto& s = j.at("search");
        c.search.engine = s.value("engine", c.search.engine);
        c.search.endpoint = s.value("endpoint", c.search.endpoint);
        c.search.api_key_env = s.value("api_key_env", c.search.api_key_env);
    }
    if (j.contains("harness")) {
        const auto& h = j.at("harness");
        c.harness.rounds = h.value("rounds", c.harness.rounds);
        c.harness.target_mean = h.value("target_mean", c.harness.target_mean);
        c.harness.convergence_patience =
            h.value("convergence_patience", c.harness.convergence_patience);
        c.harness.max_optimization_rounds =
            h.value("max_optimization_rounds", c.harness.max_optimization_rounds);
        c.harness.seed = h.value("seed", c.harness.seed);
        c.harness.fixed_sample_size = h.value("fixed_sample_size", c.harness.fixed_sample_size);
    }
    return c;
}

inline EngineConfig EngineConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    EngineConfig c = from_json(j);
    c.validate();
    return c;
}

inline void EngineConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (min_rounds < 1) fail("min_rounds must be >= 1");
    if (max_rounds < min_rounds) fail("max_rounds must be >= min_rounds");
    if (exit_threshold < 0.0 || exit_threshold > 10.0) fail("exit_threshold must be in [0, 10]");
    if (num_searches < 1) fail("num_searches must be >= 1");
    if (filter_threshold < 0.0 || filter_threshold > 1.0) {
        fail("filter_threshold must be in [0, 1]");
    }
    if (max_blueprints_len < 1) fail("max_blueprints_len must be >= 1");
    if (min_query_per_blueprint < 1) fail("min_query_per_blueprint must be >= 1");
    if (min_query_len < 1) fail("min_query_len must be >= 1");
    if (max_query_len < min_query_len) fail("max_query_len must be >= min_query_len");
    if (min_query_per_blueprint > max_query_len) {
        fail("min_query_per_blueprint must be <= max_query_len");
    }
    if (workers < 1) fail("workers must be >= 1");
    if (context_budget_chars < 1) fail("context_budget_chars must be >= 1");
    if (search.engine != "generic_web" && search.engine != "rednote" &&
        search.engine != "mock") {
        fail("search.engine must be one of generic_web | rednote | mock");
    }
    if (harness.rounds < 1) fail("harness.rounds must be >= 1");
    if (harness.target_mean < 0.0 || harness.target_mean > 10.0) {
        fail("harness.target_mean must be in [0, 10]");
    }
    if (harness.convergence_patience < 1) fail("harness.convergence_patience must be >= 1");
    if (harness.max_optimization_rounds < 1) {
        fail("harness.max_optimization_rounds must be >= 1");
    }
    if (harness.fixed_sample_size < 1) fail("harness.fixed_sample_size must be >= 1");
}

/// Full resolved configuration, echoed as the first run-log line so every
/// run records exactly what it ran with.
inline nlohmann::json EngineConfig::effective() const {
    return nlohmann::json{
        {"min_rounds", min_rounds},
        {"max_rounds", max_rounds},
        {"exit_threshold", exit_threshold},
        {"num_searches", num_searches},
        {"filter_threshold", filter_threshold},
        {"max_blueprints_len", max_blueprints_len},
        {"min_query_per_blueprint", min_query_per_blueprint},
        {"min_query_len", min_query_len},
        {"max_query_len", max_query_len},
        {"workers", workers},
        {"context_budget_chars", context_budget_chars},
        {"templates_dir", templates_dir},
        {"memory_dir", memory_dir},
        {"provider",
         {{"endpoint", provider.endpoint},
          {"api_key_env", provider.api_key_env},
          {"model", provider.model}}},
        {"search",
         {{"engine", search.engine},
          {"endpoint", search.endpoint},
          {"api_key_env", search.api_key_env}}},
        {"harness",
         {{"rounds", harness.rounds},
          {"target_mean", harness.target_mean},
          {"convergence_patience", harness.convergence_patience},
          {"max_optimization_rounds", harness.max_optimization_rounds},
          {"seed", harness.seed},
          {"fixed_sample_size", harness.fixed_sample_size}}}};
}

inline LoopConfig EngineConfig::loop_config() const {
    LoopConfig loop;
    loop.exit_threshold = exit_threshold;
    loop.min_rounds = min_rounds;
    loop.max_rounds = max_rounds;
    loop.num_searches = num_searches;
    loop.filter_threshold = filter_threshold;
    loop.workers = workers;
    loop.critic.max_blueprints_len = max_blueprints_len;
    loop.critic.max_query_len = max_query_len;
    loop.critic.min_query_per_blueprint = min_query_per_blueprint;
    loop.critic.search_engine = search.engine;
    return loop;
}

inline WriterConfig EngineConfig::writer_config() const {
    WriterConfig w;
    w.context_budget_chars = context_budget_chars;
    return w;
}

} // namespace dre
