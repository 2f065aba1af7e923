/// @file harness.hpp
/// @brief Meta-optimization harness: scores research runs on process
///        criteria, batch-evaluates a fixed query sample, snapshots and
///        restores tracked files, version-tracks results in a manifest, and
///        decides when to stop.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dre/document_bank.hpp"
#include "dre/planner.hpp"
#include "dre/policy_bank.hpp"
#include "dre/research_loop.hpp"
#include "dre/writer.hpp"

namespace dre {

// ---------------------------------------------------------------------------
// Process scoring
// ---------------------------------------------------------------------------

struct CriterionScore {
    double score = 0.0;  // [0, 10]
    std::string reasoning;

    bool operator==(const CriterionScore&) const = default;
};

inline void to_json(nlohmann::json& j, const CriterionScore& c) {
    j = nlohmann::json{{"score", c.score}, {"reasoning", c.reasoning}};
}

inline void from_json(const nlohmann::json& j, CriterionScore& c) {
    c.score = j.value("score", 0.0);
    c.reasoning = j.value("reasoning", "");
}

inline constexpr std::array<const char*, 4> kHarnessCriteria = {
    "completeness", "diversity", "search_coverage", "overall"};

/// The four process criteria the scorer produces.
struct HarnessScore {
    CriterionScore completeness;
    CriterionScore diversity;
    CriterionScore search_coverage;
    CriterionScore overall;

    CriterionScore& by_name(const std::string& name) {
        if (name == "completeness") return completeness;
        if (name == "diversity") return diversity;
        if (name == "search_coverage") return search_coverage;
        return overall;
    }
    const CriterionScore& by_name(const std::string& name) const {
        return const_cast<HarnessScore*>(this)->by_name(name);
    }

    bool operator==(const HarnessScore&) const = default;
};

inline void to_json(nlohmann::json& j, const HarnessScore& s) {
    j = nlohmann::json{{"completeness", s.completeness},
                       {"diversity", s.diversity},
                       {"search_coverage", s.search_coverage},
                       {"overall", s.overall}};
}

inline void from_json(const nlohmann::json& j, HarnessScore& s) {
    s.completeness = j.value("completeness", CriterionScore{});
    s.diversity = j.value("diversity", CriterionScore{});
    s.search_coverage = j.value("search_coverage", CriterionScore{});
    s.overall = j.value("overall", CriterionScore{});
}

/// Parse the scorer's {"evaluation": {...}} envelope, clamping scores into
/// [0, 10] (out-of-range values are clamped with a warning).
inline HarnessScore harness_score_from_model(const nlohmann::json& j) {
    HarnessScore s;
    const nlohmann::json& ev = j.contains("evaluation") ? j.at("evaluation") : j;
    for (const char* name : kHarnessCriteria) {
        if (!ev.contains(name)) {
            log_warn(std::string("scorer output lacks criterion '") + name + "'; scored 0");
            continue;
        }
        CriterionScore c = ev.at(name).get<CriterionScore>();
        if (c.score < 0.0 || c.score > 10.0) {
            log_warn(std::string("criterion '") + name + "' out of range; clamped");
            c.score = std::clamp(c.score, 0.0, 10.0);
        }
        s.by_name(name) = c;
    }
    return s;
}

/// Per-search-query statistics over everything the bank ingested, including
/// archived documents (the searches did return them) and queries that
/// returned nothing.  Deterministic order (by query text).
inline std::vector<QueryDocStats> query_doc_stats(const DocumentBank& bank) {
    std::vector<QueryDocStats> out;
    for (const auto& [query, ids] : bank.per_query()) {
        QueryDocStats stats;
        stats.query_text = query;
        for (const auto& id : ids) {
            const auto& rec = bank.get(id);
            stats.scores.push_back(rec.judge_score);
            stats.snippets.push_back(rec.snippet);
        }
        stats.finalize();
        out.push_back(std::move(stats));
    }
    return out;
}

inline std::string render_stats_lines(const std::vector<QueryDocStats>& stats) {
    if (stats.empty()) return "(no searches executed)";
    std::string out;
    for (const auto& s : stats) {
        int relevant = static_cast<int>(
            std::count_if(s.scores.begin(), s.scores.end(), [](double v) { return v > 0.5; }));
        char buf[96];
        std::snprintf(buf, sizeof(buf), "avg_relevance=%.2f, %d/%d documents relevant",
                      s.avg_relevance, relevant, s.doc_count);
        out += "- \"" + s.query_text + "\": " + buf;
        if (!s.snippets.empty()) {
            out += "; snippets: " + join(s.snippets, " / ");
        }
        out += "\n";
    }
    return out;
}

/// Score one research run on the four process criteria.  The scorer is the
/// repurposed generator role, so it must be called with the generator's
/// provider handle.
inline HarnessScore score_run(ChatProvider& scorer, const PromptLibrary& prompts,
                              const std::string& query_text,
                              const std::vector<Blueprint>& final_blueprints,
                              const std::vector<QueryDocStats>& stats) {
    CompletionRequest req;
    req.role = "harness_scorer";
    req.system_prompt = "You evaluate the quality of research search processes.";
    req.user_prompt = prompts.render("harness_scorer",
                                     {
                                         {"query", query_text},
                                         {"blueprints", blueprints_digest(final_blueprints)},
                                         {"stats", render_stats_lines(stats)},
                                     });
    return harness_score_from_model(request_json(scorer, req));
}

// ---------------------------------------------------------------------------
// Aggregate statistics
// ---------------------------------------------------------------------------

/// mean / median / population std / min / max of a score set.
struct SummaryStats {
    double mean = 0.0;
    double median = 0.0;
    double std_dev = 0.0;
    double min = 0.0;
    double max = 0.0;

    static SummaryStats compute(std::vector<double> values) {
        SummaryStats s;
        if (values.empty()) return s;
        double sum = 0.0;
        for (double v : values) sum += v;
        s.mean = sum / static_cast<double>(values.size());
        double var = 0.0;
        for (double v : values) var += (v - s.mean) * (v - s.mean);
        s.std_dev = std::sqrt(var / static_cast<double>(values.size()));
        std::sort(values.begin(), values.end());
        s.min = values.front();
        s.max = values.back();
        size_t n = values.size();
        s.median = n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
        return s;
    }
};

inline void to_json(nlohmann::json& j, const SummaryStats& s) {
    j = nlohmann::json{{"mean", s.mean},
                       {"median", s.median},
                       {"std", s.std_dev},
                       {"min", s.min},
                       {"max", s.max}};
}

// ---------------------------------------------------------------------------
// Version manifest
// ---------------------------------------------------------------------------

struct VersionEntry {
    std::string version;
    std::string timestamp;
    double search_coverage_mean = 0.0;
    std::map<std::string, double> metrics_summary;  // criterion → mean
    std::string parent;                             // empty serializes as null
    std::string status;                             // baseline | improved | regressed
};

inline void to_json(nlohmann::json& j, const VersionEntry& v) {
    j = nlohmann::json{{"version", v.version},
                       {"timestamp", v.timestamp},
                       {"search_coverage_mean", v.search_coverage_mean},
                       {"metrics_summary", v.metrics_summary},
                       {"parent", v.parent.empty() ? nlohmann::json() : nlohmann::json(v.parent)},
                       {"status", v.status}};
}

inline void from_json(const nlohmann::json& j, VersionEntry& v) {
    v.version = j.at("version").get<std::string>();
    v.timestamp = j.value("timestamp", "");
    v.search_coverage_mean = j.value("search_coverage_mean", 0.0);
    v.metrics_summary = j.value("metrics_summary", std::map<std::string, double>{});
    v.parent = j.at("parent").is_null() ? "" : j.at("parent").get<std::string>();
    v.status = j.value("status", "");
}

/// The optimization run's version history.  `best_version` only moves on
/// strict improvement of the search-coverage mean.
struct RunManifest {
    std::string best_version;
    std::vector<VersionEntry> versions;

    const VersionEntry* find(const std::string& version) const {
        for (const auto& v : versions) {
            if (v.version == version) return &v;
        }
        return nullptr;
    }

    double best_mean() const {
        const VersionEntry* b = find(best_version);
        return b ? b->search_coverage_mean : 0.0;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw PersistenceFailure("cannot write manifest: " + path.string());
        nlohmann::json j{{"best_version", best_version}, {"versions", versions}};
        out << j.dump(2) << "\n";
    }

    static RunManifest load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw PersistenceFailure("cannot read manifest: " + path.string());
        nlohmann::json j = nlohmann::json::parse(in, nullptr, true, true);
        RunManifest m;
        m.best_version = j.value("best_version", "");
        m.versions = j.value("versions", std::vector<VersionEntry>{});
        return m;
    }
};

/// Register a freshly evaluated version.  The first entry is the baseline;
/// later entries are `improved` only when their search-coverage mean strictly
/// exceeds the current best (which then moves), `regressed` otherwise.
inline VersionEntry& advance(RunManifest& manifest, const std::string& version,
                             const std::string& timestamp,
                             const std::map<std::string, double>& metrics_summary) {
    VersionEntry entry;
    entry.version = version;
    entry.timestamp = timestamp;
    entry.metrics_summary = metrics_summary;
    auto it = metrics_summary.find("search_coverage");
    entry.search_coverage_mean = it == metrics_summary.end() ? 0.0 : it->second;
    if (manifest.versions.empty()) {
        entry.parent = "";
        entry.status = "baseline";
        manifest.best_version = version;
    } else {
        entry.parent = manifest.best_version;
        if (entry.search_coverage_mean > manifest.best_mean()) {
            entry.status = "improved";
            manifest.best_version = version;
        } else {
            entry.status = "regressed";
        }
    }
    manifest.versions.push_back(std::move(entry));
    return manifest.versions.back();
}

// ---------------------------------------------------------------------------
// Stop conditions
// ---------------------------------------------------------------------------

enum class StopReason { none, target_reached, converged, capped };

inline std::string stop_reason_label(StopReason r) {
    switch (r) {
        case StopReason::target_reached: return "target_reached";
        case StopReason::converged: return "converged";
        case StopReason::capped: return "capped";
        case StopReason::none: break;
    }
    return "continue";
}

struct HarnessStopConfig {
    double target_mean = 9.0;          // stop once the round's mean reaches this
    int convergence_patience = 5;      // consecutive non-improving rounds
    int max_optimization_rounds = 20;  // excluding the baseline
};

/// Evaluate the stop conditions after the latest round, in priority order:
/// target reached, converged, capped.
inline StopReason evaluate_stop(const RunManifest& manifest, const HarnessStopConfig& config) {
    if (manifest.versions.empty()) return StopReason::none;
    if (manifest.versions.back().search_coverage_mean >= config.target_mean) {
        return StopReason::target_reached;
    }
    int trailing_non_improving = 0;
    for (auto it = manifest.versions.rbegin(); it != manifest.versions.rend(); ++it) {
        if (it->status == "regressed") ++trailing_non_improving;
        else break;
    }
    if (trailing_non_improving >= config.convergence_patience) return StopReason::converged;
    int optimization_rounds = static_cast<int>(manifest.versions.size()) - 1;
    if (optimization_rounds >= config.max_optimization_rounds) return StopReason::capped;
    return StopReason::none;
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

/// Copy `tracked_files` (paths relative to `root`) into `snapshot_dir`,
/// preserving relative paths.  A missing tracked file raises
/// MissingTrackedFile.
inline void snapshot_save(const std::filesystem::path& root,
                          const std::vector<std::string>& tracked_files,
                          const std::filesystem::path& snapshot_dir) {
    for (const auto& rel : tracked_files) {
        std::filesystem::path src = root / rel;
        if (!std::filesystem::exists(src) || !std::filesystem::is_regular_file(src)) {
            throw MissingTrackedFile(src.string());
        }
        std::filesystem::path dst = snapshot_dir / rel;
        std::filesystem::create_directories(dst.parent_path());
        std::filesystem::copy_file(src, dst, std::filesystem::copy_options::overwrite_existing);
    }
}

/// Copy every file under `snapshot_dir` back beneath `root`, preserving
/// relative paths and bytes.
inline void snapshot_restore(const std::filesystem::path& snapshot_dir,
                             const std::filesystem::path& root) {
    if (!std::filesystem::exists(snapshot_dir)) {
        throw PersistenceFailure("snapshot directory missing: " + snapshot_dir.string());
    }
    for (const auto& entry : std::filesystem::recursive_directory_iterator(snapshot_dir)) {
        if (!entry.is_regular_file()) continue;
        std::filesystem::path rel = std::filesystem::relative(entry.path(), snapshot_dir);
        std::filesystem::path dst = root / rel;
        std::filesystem::create_directories(dst.parent_path());
        std::filesystem::copy_file(entry.path(), dst,
                                   std::filesystem::copy_options::overwrite_existing);
    }
}

// ---------------------------------------------------------------------------
// Fixed evaluation sample
// ---------------------------------------------------------------------------

/// The evaluation sample is drawn once (seeded, without replacement),
/// persisted, and reused by every later run so rounds stay comparable.
inline std::vector<size_t> load_or_create_fixed_indices(const std::filesystem::path& path,
                                                        size_t total, size_t sample_size,
                                                        uint64_t seed) {
    sample_size = std::min(sample_size, total);
    if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        nlohmann::json j = nlohmann::json::parse(in, nullptr, true, true);
        std::vector<size_t> indices = j.value("indices", std::vector<size_t>{});
        for (size_t i : indices) {
            if (i >= total) {
                throw ConfigError("fixed index " + std::to_string(i) +
                                  " out of range for query list of " + std::to_string(total));
            }
        }
        return indices;
    }
    // Partial Fisher-Yates, spelled out so the draw is stable across library
    // implementations.
    std::vector<size_t> pool(total);
    for (size_t i = 0; i < total; ++i) pool[i] = i;
    std::mt19937_64 rng(seed);
    for (size_t i = 0; i < sample_size; ++i) {
        size_t j = i + static_cast<size_t>(rng() % (total - i));
        std::swap(pool[i], pool[j]);
    }
    std::vector<size_t> indices(pool.begin(), pool.begin() + static_cast<long>(sample_size));
    std::sort(indices.begin(), indices.end());
    std::ofstream out(path);
    if (!out) throw PersistenceFailure("cannot write fixed indices: " + path.string());
    out << nlohmann::json{{"seed", seed}, {"sample_size", sample_size}, {"indices", indices}}
               .dump(2)
        << "\n";
    return indices;
}

// ---------------------------------------------------------------------------
// Batch evaluation
// ---------------------------------------------------------------------------

struct CaseResult {
    std::string query_text;
    bool ok = false;
    std::string error;
    HarnessScore score;
    int rounds = 0;
    double final_rating = 0.0;
};

inline void to_json(nlohmann::json& j, const CaseResult& c) {
    j = nlohmann::json{{"query_text", c.query_text}, {"ok", c.ok},       {"error", c.error},
                       {"score", c.score},           {"rounds", c.rounds},
                       {"final_rating", c.final_rating}};
}

struct BatchResult {
    std::vector<CaseResult> cases;
    size_t failures = 0;
    std::map<std::string, SummaryStats> criteria;  // criterion → stats over ok cases

    std::map<std::string, double> means() const {
        std::map<std::string, double> m;
        for (const auto& [name, stats] : criteria) m[name] = stats.mean;
        return m;
    }

    nlohmann::json metrics_json() const {
        nlohmann::json j{{"cases", cases.size()}, {"failures", failures}};
        for (const auto& [name, stats] : criteria) j[name] = stats;
        return j;
    }
};

/// Evaluate the fixed query sample once: full research run plus process
/// scoring per query.  Failures are recorded and excluded from aggregates.
/// Each evaluated case appends a trace (with criterion scores) to the policy
/// bank when one is given.
inline BatchResult batch_eval(const std::vector<std::string>& queries,
                              const ProviderSet& providers, const PromptLibrary& prompts,
                              const LoopConfig& loop_config, PolicyBank* policy_bank,
                              int harness_round,
                              std::optional<double> current_best_score = std::nullopt) {
    BatchResult batch;
    for (const auto& text : queries) {
        CaseResult cr;
        cr.query_text = text;
        try {
            ResearchQuery query = ResearchQuery::make(text, *providers.clock);
            Plan plan = plan_query(*providers.planner, prompts, text, /*harness_mode=*/true);
            ResearchRun run = run_research(query, plan, providers, prompts, loop_config,
                                           policy_bank, current_best_score);
            auto stats = query_doc_stats(run.bank);
            const auto& last = run.trajectory.steps.back();
            cr.score = score_run(providers.scorer(), prompts, text,
                                 last.critic.blueprints, stats);
            cr.rounds = static_cast<int>(run.trajectory.steps.size());
            cr.final_rating = last.critic.rating;
            cr.ok = true;
            if (policy_bank) {
                TraceRecord trace;
                trace.query_text = text;
                trace.round = harness_round;
                trace.timestamp = providers.clock->timestamp();
                trace.critic_state = last.critic;
                trace.generator_state = select_best(run.trajectory);
                trace.per_query_doc_stats = stats;
                trace.criterion_scores = nlohmann::json(cr.score);
                policy_bank->record_trace(trace);
            }
        } catch (const Error& e) {
            cr.ok = false;
            cr.error = e.what();
            ++batch.failures;
            log_warn("batch case failed for '" + text + "': " + e.what());
        }
        batch.cases.push_back(std::move(cr));
    }
    for (const char* name : kHarnessCriteria) {
        std::vector<double> values;
        for (const auto& c : batch.cases) {
            if (c.ok) values.push_back(c.score.by_name(name).score);
        }
        batch.criteria[name] = SummaryStats::compute(values);
    }
    return batch;
}

// ---------------------------------------------------------------------------
// The optimization loop
// ---------------------------------------------------------------------------

struct HarnessOptions {
    std::filesystem::path run_root;          // artifacts land here
    std::filesystem::path tracked_root;      // root of the tracked (mutable) files
    std::vector<std::string> tracked_files;  // relative to tracked_root
    std::string templates_subdir = "templates";  // reloaded after each mutation
    std::vector<std::string> queries;        // full query list (pre-sampling)
    size_t fixed_sample_size = 10;
    uint64_t seed = 17;
    int rounds = 3;                          // optimization rounds requested this run
    std::string mutation_cmd;                // external hook; empty = no-op
    HarnessStopConfig stop;
    LoopConfig loop;
};

struct HarnessRoundRecord {
    std::string version;
    std::map<std::string, double> means;
    std::string status;
    StopReason stop = StopReason::none;
};

struct HarnessResult {
    RunManifest manifest;
    std::vector<HarnessRoundRecord> rounds;
    StopReason final_stop = StopReason::none;
};

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw PersistenceFailure("cannot write " + path.string());
    out << text;
}

inline std::string summary_markdown(const std::string& version, const BatchResult& batch,
                                    const std::string& status) {
    std::string out = "# " + version + "\n\nstatus: " + status + "\n\n";
    out += "| criterion | mean | median | std | min | max |\n";
    out += "|---|---|---|---|---|---|\n";
    for (const auto& [name, s] : batch.criteria) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "| %s | %.4f | %.4f | %.4f | %.4f | %.4f |\n",
                      name.c_str(), s.mean, s.median, s.std_dev, s.min, s.max);
        out += buf;
    }
    out += "\ncases: " + std::to_string(batch.cases.size()) +
           ", failures: " + std::to_string(batch.failures) + "\n";
    return out;
}

} // namespace detail

/// Run the meta-optimization loop.
///
/// Round 0 evaluates the baseline (version `v0_baseline`).  Every later round
/// restores the best version's snapshot into the tracked root, invokes the
/// external mutation command (hook \"<cmd> <tracked_root>\"), re-evaluates the
/// fixed sample, snapshots the result, and registers it in the manifest.
/// Stops on target / convergence / cap, or after `rounds` rounds.
inline HarnessResult run_harness(const HarnessOptions& opts, const ProviderSet& providers) {
    namespace fs = std::filesystem;
    HarnessResult result;
    fs::path opt_root = opts.run_root / "optimization_runs";
    fs::create_directories(opt_root);

    auto indices = load_or_create_fixed_indices(opts.run_root / "fixed_indices.json",
                                                opts.queries.size(), opts.fixed_sample_size,
                                                opts.seed);
    std::vector<std::string> sample;
    for (size_t i : indices) sample.push_back(opts.queries[i]);

    PolicyBank bank = PolicyBank::open(opts.run_root / "memory", *providers.clock);

    fs::path manifest_path = opt_root / "manifest.json";
    RunManifest manifest;
    int next_version = 0;
    if (fs::exists(manifest_path)) {
        manifest = RunManifest::load(manifest_path);
        next_version = static_cast<int>(manifest.versions.size());
    }

    PromptLibrary prompts = PromptLibrary::load(opts.tracked_root / opts.templates_subdir);

    // The baseline evaluation is free: a fresh run gets `rounds` optimization
    // rounds after it.  Fix the bound up front; next_version mutates below.
    const int total_rounds = opts.rounds + (next_version == 0 ? 1 : 0);
    for (int i = 0; i < total_rounds; ++i) {
        bool baseline = manifest.versions.empty();
        std::string version = baseline ? "v0_baseline" : "v" + std::to_string(next_version);
        fs::path vdir = opt_root / version;
        fs::create_directories(vdir);
        std::string changelog;

        if (!baseline) {
            const VersionEntry* best = manifest.find(manifest.best_version);
            fs::path best_snapshot = opt_root / manifest.best_version / "snapshot";
            if (fs::exists(best_snapshot)) {
                snapshot_restore(best_snapshot, opts.tracked_root);
            }
            changelog += "restored snapshot of " + manifest.best_version + "\n";
            if (!opts.mutation_cmd.empty()) {
                std::string cmd = opts.mutation_cmd + " \"" + opts.tracked_root.string() + "\"";
                int rc = std::system(cmd.c_str());
                changelog += "mutation command: " + opts.mutation_cmd +
                             " (exit " + std::to_string(rc) + ")\n";
                if (rc != 0) log_warn("mutation command exited with " + std::to_string(rc));
            } else {
                changelog += "mutation command: (none)\n";
            }
            prompts = PromptLibrary::load(opts.tracked_root / opts.templates_subdir);
            (void)best;
        } else {
            changelog += "baseline evaluation\n";
        }

        bank.rotate(*providers.clock);
        int harness_round = static_cast<int>(manifest.versions.size());
        BatchResult batch =
            batch_eval(sample, providers, prompts, opts.loop, &bank, harness_round,
                       baseline ? std::nullopt
                                : std::optional<double>(manifest.best_mean()));

        // Persist the round's artifacts.
        detail::write_text(vdir / "metrics.json", batch.metrics_json().dump(2) + "\n");
        {
            std::ofstream details(vdir / "details.jsonl");
            if (!details) throw PersistenceFailure("cannot write details.jsonl");
            for (const auto& c : batch.cases) details << nlohmann::json(c).dump() << "\n";
        }
        snapshot_save(opts.tracked_root, opts.tracked_files, vdir / "snapshot");

        VersionEntry& entry =
            advance(manifest, version, providers.clock->timestamp(), batch.means());
        detail::write_text(vdir / "summary.md",
                           detail::summary_markdown(version, batch, entry.status));
        detail::write_text(vdir / "changelog.md", changelog);
        manifest.save(manifest_path);

        HarnessRoundRecord record;
        record.version = version;
        record.means = batch.means();
        record.status = entry.status;
        record.stop = evaluate_stop(manifest, opts.stop);
        result.rounds.push_back(record);
        if (!baseline) ++next_version;
        else next_version = 1;

        if (record.stop != StopReason::none) {
            result.final_stop = record.stop;
            break;
        }
    }
    result.manifest = manifest;
    return result;
}

} // namespace dre
