#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>

#include "dre/harness.hpp"
#include "dre/mock.hpp"
#include "oracles.hpp"

using namespace dre;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "dre_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
}

nlohmann::json criterion(double score, const std::string& why = "why") {
    return nlohmann::json{{"score", score}, {"reasoning", why}};
}

nlohmann::json scorer_envelope(double completeness, double diversity,
                               double search_coverage, double overall) {
    return nlohmann::json{{"evaluation",
                           {{"completeness", criterion(completeness)},
                            {"diversity", criterion(diversity)},
                            {"search_coverage", criterion(search_coverage)},
                            {"overall", criterion(overall)}}}};
}

LoopConfig fast_loop() {
    LoopConfig c;
    c.min_rounds = 1;
    c.max_rounds = 2;
    c.exit_threshold = 8.0;
    return c;
}

/// Providers for whole-harness runs: a two-round research loop per query and
/// a scorer whose search-coverage value is scripted per harness round (the
/// round index is derived from the call count and the fixed sample size).
struct HarnessStub {
    ProviderSet set;

    HarnessStub(std::vector<double> round_scores, size_t sample_size,
                uint64_t clock_base = 0) {
        auto scores = std::make_shared<std::vector<double>>(std::move(round_scores));
        auto scorer_calls = std::make_shared<size_t>(0);
        auto critic_turn = std::make_shared<size_t>(0);
        auto chat = std::make_shared<LambdaChatProvider>(
            [scores, scorer_calls, critic_turn,
             sample_size](const CompletionRequest& req) -> std::string {
                if (req.role == "planner") {
                    if (req.user_prompt.find("FAIL CASE") != std::string::npos) {
                        throw ProviderUnavailable("planner down for this query");
                    }
                    return R"({"intent": "deep_exploration",
                               "response_style": "structured prose",
                               "instructions": "prefer concrete nouns"})";
                }
                if (req.role == "critic") {
                    if (req.user_prompt.find("(empty)") != std::string::npos) {
                        *critic_turn = 0;
                    }
                    size_t turn = (*critic_turn)++;
                    nlohmann::json dims;
                    for (const char* d : kRatingDimensions) dims[d] = turn == 0 ? 0.0 : 9.5;
                    nlohmann::json blueprints =
                        turn == 0
                            ? nlohmann::json::array({{{"content", "core direction"},
                                                      {"search_query", {"angle one"}}}})
                            : nlohmann::json::array(
                                  {{{"id", "b1"}, {"content", "core direction"}}});
                    return nlohmann::json{{"rating", turn == 0 ? 0.0 : 9.5},
                                          {"dimension_scores", dims},
                                          {"justification", "j"},
                                          {"blueprints", blueprints}}
                        .dump();
                }
                if (req.role == "generator") {
                    return "# T\n## Answer\n";
                }
                if (req.role == "doc_judge") {
                    return R"({"judge_score": 0.9, "summary": "doc summary", "evidence": []})";
                }
                if (req.role == "harness_scorer") {
                    size_t round = std::min(*scorer_calls / std::max<size_t>(sample_size, 1),
                                            scores->size() - 1);
                    ++*scorer_calls;
                    double v = (*scores)[round];
                    return scorer_envelope(v, v, v, v).dump();
                }
                return "{}";
            });
        auto search = std::make_shared<LambdaSearchProvider>(
            [](const std::string& q, int) -> std::vector<SearchResult> {
                return {{"https://s.example/" + q, "title " + q, "content " + q}};
            });
        set = ProviderSet::uniform(chat, search, std::make_shared<FixedClock>(clock_base));
    }
};

struct HarnessEnv {
    fs::path dir;
    HarnessOptions opts;
};

HarnessEnv make_env(const std::string& name) {
    HarnessEnv env;
    env.dir = fresh_dir(name);
    PromptLibrary::write_defaults(env.dir / "tracked" / "templates");
    env.opts.run_root = env.dir / "run";
    env.opts.tracked_root = env.dir / "tracked";
    env.opts.tracked_files = {"templates/critic.md", "templates/generator.md"};
    env.opts.queries = {"care robots overview", "sensor pricing", "adoption barriers",
                        "regional programs", "insurance coverage"};
    env.opts.fixed_sample_size = 2;
    env.opts.seed = 99;
    env.opts.loop = fast_loop();
    return env;
}

} // namespace

// ---------------------------------------------------------------------------
// Scorer output parsing
// ---------------------------------------------------------------------------

TEST_CASE("scorer parse accepts the envelope and clamps out-of-range scores", "[harness]") {
    WarningCapture warnings;
    HarnessScore s = harness_score_from_model(scorer_envelope(7.0, 6.5, 8.25, 7.5));
    CHECK(s.completeness.score == 7.0);
    CHECK(s.diversity.score == 6.5);
    CHECK(s.search_coverage.score == 8.25);
    CHECK(s.overall.score == 7.5);
    CHECK(s.overall.reasoning == "why");
    CHECK(warnings.messages().empty());

    // A bare object (no "evaluation" wrapper) is accepted unchanged.
    nlohmann::json bare{{"completeness", criterion(3.0)},
                        {"diversity", criterion(4.0)},
                        {"search_coverage", criterion(5.0)},
                        {"overall", criterion(4.0)}};
    CHECK(harness_score_from_model(bare).search_coverage.score == 5.0);

    // Out-of-range scores clamp into [0, 10] with a warning.
    HarnessScore clamped = harness_score_from_model(scorer_envelope(11.2, -0.5, 10.0, 0.0));
    CHECK(clamped.completeness.score == 10.0);
    CHECK(clamped.diversity.score == 0.0);
    CHECK(clamped.search_coverage.score == 10.0);
    bool saw_clamp = false;
    for (const auto& m : warnings.messages()) {
        if (m.find("out of range; clamped") != std::string::npos) saw_clamp = true;
    }
    CHECK(saw_clamp);
}

TEST_CASE("scorer parse defaults missing criteria to zero with a warning", "[harness]") {
    WarningCapture warnings;
    nlohmann::json partial{{"evaluation",
                            {{"completeness", criterion(6.0)},
                             {"search_coverage", criterion(7.0)},
                             {"overall", criterion(6.5)}}}};
    HarnessScore s = harness_score_from_model(partial);
    CHECK(s.diversity.score == 0.0);
    CHECK(s.completeness.score == 6.0);
    bool saw = false;
    for (const auto& m : warnings.messages()) {
        if (m.find("lacks criterion 'diversity'") != std::string::npos) saw = true;
    }
    CHECK(saw);
}

// ---------------------------------------------------------------------------
// Summary statistics
// ---------------------------------------------------------------------------

TEST_CASE("summary statistics on known vectors", "[harness]") {
    SummaryStats s = SummaryStats::compute({3.0, 1.0, 2.0});
    CHECK(s.mean == 2.0);
    CHECK(s.median == 2.0);
    CHECK(s.min == 1.0);
    CHECK(s.max == 3.0);
    CHECK(s.std_dev == Catch::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));

    // Even-length median averages the middle pair.
    CHECK(SummaryStats::compute({1.0, 2.0, 3.0, 4.0}).median == 2.5);

    // Empty input stays all-zero.
    SummaryStats empty = SummaryStats::compute({});
    CHECK(empty.mean == 0.0);
    CHECK(empty.std_dev == 0.0);

    // Serialized field names are part of the metrics file contract.
    nlohmann::json j = s;
    CHECK(j.contains("mean"));
    CHECK(j.contains("median"));
    CHECK(j.contains("std"));
    CHECK(j.contains("min"));
    CHECK(j.contains("max"));
    CHECK(j["std"].get<double>() == s.std_dev);
}

TEST_CASE("summary statistics match the long-double oracle", "[harness][property]") {
    std::mt19937_64 rng(771231);
    std::uniform_int_distribution<size_t> size_d(1, 60);
    std::uniform_real_distribution<double> value_d(0.0, 10.0);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> values(size_d(rng));
        for (double& v : values) v = value_d(rng);
        SummaryStats s = SummaryStats::compute(values);
        oracle::Stats o = oracle::stats_of(values);
        REQUIRE(s.mean == Catch::Approx(o.mean).margin(1e-12));
        REQUIRE(s.median == Catch::Approx(o.median).margin(1e-12));
        REQUIRE(s.std_dev == Catch::Approx(o.std_dev).margin(1e-12));
        REQUIRE(s.min == o.min);
        REQUIRE(s.max == o.max);
    }
}

// ---------------------------------------------------------------------------
// Per-query document statistics
// ---------------------------------------------------------------------------

TEST_CASE("query_doc_stats covers archived documents and empty queries", "[harness]") {
    WarningCapture mute;
    DocumentBank bank(0.2);
    auto judge = [](const SearchResult& doc, const std::string&) {
        JudgeOutcome out;
        out.ok = true;
        out.summary = "summary of " + doc.title;
        out.score = doc.url.find("weak") != std::string::npos ? 0.1 : 0.9;
        return out;
    };
    bank.ingest_and_score(0,
                          {{"beta query", {"https://x/strong", "strong", "c"}},
                           {"beta query", {"https://x/weak", "weak", "c"}},
                           {"alpha query", {"https://x/solo", "solo", "c"}}},
                          judge, 1);
    bank.register_query("gamma empty");

    auto stats = query_doc_stats(bank);
    REQUIRE(stats.size() == 3);
    // Deterministic order: sorted by query text.
    CHECK(stats[0].query_text == "alpha query");
    CHECK(stats[1].query_text == "beta query");
    CHECK(stats[2].query_text == "gamma empty");

    // The archived document still counts: searches did return it.
    CHECK(stats[1].doc_count == 2);
    CHECK(stats[1].avg_relevance == Catch::Approx(0.5).margin(1e-12));
    CHECK(stats[1].high_relevance_ratio == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(stats[1].snippets.size() == 2);
    CHECK(stats[1].snippets[0] == "summary of strong");

    // A query that returned nothing still has an entry.
    CHECK(stats[2].doc_count == 0);
    CHECK(stats[2].avg_relevance == 0.0);

    std::string lines = render_stats_lines(stats);
    CHECK(lines.find("- \"beta query\": avg_relevance=0.50, 1/2 documents relevant") !=
          std::string::npos);
    CHECK(lines.find("- \"gamma empty\": avg_relevance=0.00, 0/0 documents relevant") !=
          std::string::npos);
    CHECK(lines.find("snippets: summary of strong / summary of weak") != std::string::npos);

    CHECK(render_stats_lines({}) == "(no searches executed)");
}

TEST_CASE("score_run binds query, blueprints, and stats into the prompt", "[harness]") {
    WarningCapture warnings;
    auto seen = std::make_shared<std::vector<CompletionRequest>>();
    LambdaChatProvider scorer([seen](const CompletionRequest& req) {
        seen->push_back(req);
        return scorer_envelope(6.0, 6.0, 6.0, 6.0).dump();
    });
    Blueprint b;
    b.id = "b1";
    b.content = "cost structures";
    b.search_queries = {"device pricing"};
    QueryDocStats stats;
    stats.query_text = "device pricing";
    stats.scores = {0.9};
    stats.finalize();

    HarnessScore s = score_run(scorer, PromptLibrary::builtin(), "the research query",
                               {b}, {stats});
    CHECK(s.search_coverage.score == 6.0);
    REQUIRE(seen->size() == 1);
    CHECK((*seen)[0].role == "harness_scorer");
    const std::string& prompt = (*seen)[0].user_prompt;
    CHECK(prompt.find("the research query") != std::string::npos);
    CHECK(prompt.find("- (id=b1) cost structures") != std::string::npos);
    CHECK(prompt.find("avg_relevance=0.90") != std::string::npos);
    CHECK(warnings.messages().empty());  // every placeholder bound
}

// ---------------------------------------------------------------------------
// Version manifest
// ---------------------------------------------------------------------------

TEST_CASE("advance moves best only on strict improvement", "[harness]") {
    RunManifest m;
    advance(m, "v0_baseline", "t0", {{"search_coverage", 6.3}, {"overall", 6.0}});
    CHECK(m.best_version == "v0_baseline");
    CHECK(m.versions[0].status == "baseline");
    CHECK(m.versions[0].parent.empty());
    CHECK(m.best_mean() == 6.3);

    // Strict improvement: best moves.
    advance(m, "v1", "t1", {{"search_coverage", 7.4}});
    CHECK(m.best_version == "v1");
    CHECK(m.versions[1].status == "improved");
    CHECK(m.versions[1].parent == "v0_baseline");

    // Equal mean is not an improvement.
    advance(m, "v2", "t2", {{"search_coverage", 7.4}});
    CHECK(m.best_version == "v1");
    CHECK(m.versions[2].status == "regressed");
    CHECK(m.versions[2].parent == "v1");

    // Slightly below: still regressed; parent is the best at evaluation time.
    advance(m, "v3", "t3", {{"search_coverage", 7.39}});
    CHECK(m.versions[3].status == "regressed");
    CHECK(m.versions[3].parent == "v1");

    // Strictly above the stale best: improvement again.
    advance(m, "v4", "t4", {{"search_coverage", 7.41}});
    CHECK(m.best_version == "v4");
    CHECK(m.versions[4].status == "improved");
    CHECK(m.versions[4].parent == "v1");

    // Missing criterion defaults the mean to zero.
    advance(m, "v5", "t5", {{"overall", 9.9}});
    CHECK(m.versions[5].search_coverage_mean == 0.0);
    CHECK(m.versions[5].status == "regressed");

    CHECK(m.find("nope") == nullptr);
    CHECK(RunManifest{}.best_mean() == 0.0);
}

TEST_CASE("manifest JSON round-trips with a null parent for the baseline", "[harness]") {
    fs::path dir = fresh_dir("manifest_roundtrip");
    RunManifest m;
    advance(m, "v0_baseline", "19700101T000000000Z", {{"search_coverage", 6.3}});
    advance(m, "v1", "19700101T000000001Z",
            {{"search_coverage", 7.4}, {"completeness", 7.0}});
    m.save(dir / "manifest.json");

    nlohmann::json raw = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(raw["best_version"] == "v1");
    CHECK(raw["versions"][0]["parent"].is_null());
    CHECK(raw["versions"][1]["parent"] == "v0_baseline");
    CHECK(raw["versions"][1]["metrics_summary"]["completeness"] == 7.0);

    RunManifest back = RunManifest::load(dir / "manifest.json");
    CHECK(back.best_version == "v1");
    REQUIRE(back.versions.size() == 2);
    CHECK(back.versions[0].parent.empty());
    CHECK(back.versions[0].status == "baseline");
    CHECK(back.versions[1].search_coverage_mean == 7.4);
    CHECK(back.versions[1].timestamp == "19700101T000000001Z");

    CHECK_THROWS_AS(RunManifest::load(dir / "missing.json"), PersistenceFailure);
}

// ---------------------------------------------------------------------------
// Stop conditions
// ---------------------------------------------------------------------------

namespace {

RunManifest manifest_of(const std::vector<std::pair<double, std::string>>& entries) {
    RunManifest m;
    for (size_t i = 0; i < entries.size(); ++i) {
        VersionEntry v;
        v.version = i == 0 ? "v0_baseline" : "v" + std::to_string(i);
        v.search_coverage_mean = entries[i].first;
        v.status = entries[i].second;
        m.versions.push_back(v);
    }
    return m;
}

} // namespace

TEST_CASE("stop conditions fire in priority order", "[harness]") {
    HarnessStopConfig stop;  // target 9.0, patience 5, cap 20

    CHECK(evaluate_stop(RunManifest{}, stop) == StopReason::none);

    // Target reached on the latest round.
    CHECK(evaluate_stop(manifest_of({{6.0, "baseline"}, {9.0, "improved"}}), stop) ==
          StopReason::target_reached);
    CHECK(evaluate_stop(manifest_of({{6.0, "baseline"}, {8.99, "improved"}}), stop) ==
          StopReason::none);

    // Five trailing non-improving rounds converge.
    RunManifest plateau = manifest_of({{7.0, "baseline"},
                                       {6.0, "regressed"},
                                       {6.1, "regressed"},
                                       {6.2, "regressed"},
                                       {6.3, "regressed"},
                                       {6.4, "regressed"}});
    CHECK(evaluate_stop(plateau, stop) == StopReason::converged);
    plateau.versions.pop_back();  // only four trailing
    CHECK(evaluate_stop(plateau, stop) == StopReason::none);

    // An improvement resets the trailing count.
    CHECK(evaluate_stop(manifest_of({{5.0, "baseline"},
                                     {4.0, "regressed"},
                                     {4.0, "regressed"},
                                     {5.5, "improved"},
                                     {5.0, "regressed"},
                                     {5.1, "regressed"}}),
                        stop) == StopReason::none);

    // Cap counts optimization rounds, excluding the baseline.
    HarnessStopConfig tight = stop;
    tight.max_optimization_rounds = 2;
    CHECK(evaluate_stop(manifest_of({{5.0, "baseline"}, {5.5, "improved"}}), tight) ==
          StopReason::none);
    CHECK(evaluate_stop(manifest_of({{5.0, "baseline"}, {5.5, "improved"}, {6.0, "improved"}}),
                        tight) == StopReason::capped);

    // Priority: target beats converged beats capped on the same manifest.
    RunManifest all = manifest_of({{5.0, "baseline"},
                                   {4.0, "regressed"},
                                   {4.0, "regressed"},
                                   {4.0, "regressed"},
                                   {4.0, "regressed"},
                                   {9.5, "regressed"}});
    HarnessStopConfig eager = stop;
    eager.convergence_patience = 5;
    eager.max_optimization_rounds = 1;
    CHECK(evaluate_stop(all, eager) == StopReason::target_reached);
    all.versions.back().search_coverage_mean = 4.0;
    CHECK(evaluate_stop(all, eager) == StopReason::converged);
    eager.convergence_patience = 99;
    CHECK(evaluate_stop(all, eager) == StopReason::capped);
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

TEST_CASE("snapshots restore tracked bytes exactly", "[harness]") {
    fs::path dir = fresh_dir("snapshot_bytes");
    fs::path root = dir / "root";
    std::string a = "alpha\ncontents\n";
    std::string b = std::string("bin\0ary\xE4\xBB\x8B", 10);
    spit(root / "a.txt", a);
    spit(root / "sub" / "b.bin", b);

    snapshot_save(root, {"a.txt", "sub/b.bin"}, dir / "snap");
    CHECK(slurp(dir / "snap" / "sub" / "b.bin") == b);

    // Perturb everything, add an untracked stray, then restore.
    spit(root / "a.txt", "perturbed");
    spit(root / "sub" / "b.bin", "also perturbed");
    spit(root / "stray.txt", "leave me");
    snapshot_restore(dir / "snap", root);
    CHECK(slurp(root / "a.txt") == a);
    CHECK(slurp(root / "sub" / "b.bin") == b);
    CHECK(slurp(root / "stray.txt") == "leave me");  // restore only copies snapshot files

    CHECK_THROWS_AS(snapshot_restore(dir / "no_such_snap", root), PersistenceFailure);
}

TEST_CASE("missing tracked files fail the snapshot", "[harness]") {
    fs::path dir = fresh_dir("snapshot_missing");
    fs::path root = dir / "root";
    spit(root / "present.txt", "x");
    CHECK_THROWS_AS(snapshot_save(root, {"present.txt", "absent.txt"}, dir / "snap"),
                    MissingTrackedFile);
    // A directory does not satisfy a tracked-file entry.
    fs::create_directories(root / "adir");
    CHECK_THROWS_AS(snapshot_save(root, {"adir"}, dir / "snap"), MissingTrackedFile);
}

// ---------------------------------------------------------------------------
// Fixed evaluation sample
// ---------------------------------------------------------------------------

TEST_CASE("fixed indices persist, reload, and validate", "[harness]") {
    fs::path dir = fresh_dir("fixed_indices");
    fs::path path = dir / "fixed_indices.json";

    auto indices = load_or_create_fixed_indices(path, 100, 10, 42);
    REQUIRE(indices.size() == 10);
    CHECK(std::is_sorted(indices.begin(), indices.end()));
    CHECK(std::adjacent_find(indices.begin(), indices.end()) == indices.end());
    for (size_t i : indices) CHECK(i < 100);

    // The draw is the documented partial Fisher-Yates over mt19937_64.
    std::vector<size_t> pool(100);
    for (size_t i = 0; i < 100; ++i) pool[i] = i;
    std::mt19937_64 rng(42);
    for (size_t i = 0; i < 10; ++i) {
        size_t j = i + static_cast<size_t>(rng() % (100 - i));
        std::swap(pool[i], pool[j]);
    }
    std::vector<size_t> expected(pool.begin(), pool.begin() + 10);
    std::sort(expected.begin(), expected.end());
    CHECK(indices == expected);

    nlohmann::json j = nlohmann::json::parse(slurp(path));
    CHECK(j["seed"] == 42);
    CHECK(j["sample_size"] == 10);
    CHECK(j["indices"].get<std::vector<size_t>>() == indices);

    // The file wins over different parameters on later calls.
    CHECK(load_or_create_fixed_indices(path, 100, 5, 7) == indices);

    // Sample larger than the population clamps to everything.
    auto all = load_or_create_fixed_indices(dir / "all.json", 4, 99, 1);
    CHECK(all == std::vector<size_t>{0, 1, 2, 3});

    // Persisted indices outside the query list are rejected.
    spit(dir / "bad.json", R"({"seed": 1, "sample_size": 1, "indices": [999]})");
    CHECK_THROWS_AS(load_or_create_fixed_indices(dir / "bad.json", 100, 1, 1), ConfigError);
}

// ---------------------------------------------------------------------------
// Batch evaluation
// ---------------------------------------------------------------------------

TEST_CASE("batch_eval records failures and aggregates only ok cases", "[harness]") {
    WarningCapture warnings;
    HarnessStub stub({6.0}, 1);
    PolicyBank bank = PolicyBank::in_memory();

    BatchResult batch = batch_eval({"alpha research topic", "FAIL CASE topic"}, stub.set,
                                   PromptLibrary::builtin(), fast_loop(), &bank,
                                   /*harness_round=*/3);
    REQUIRE(batch.cases.size() == 2);
    CHECK(batch.failures == 1);

    const CaseResult& ok = batch.cases[0];
    CHECK(ok.ok);
    CHECK(ok.query_text == "alpha research topic");
    CHECK(ok.rounds == 2);
    CHECK(ok.final_rating == 9.5);
    CHECK(ok.score.overall.score == 6.0);

    const CaseResult& bad = batch.cases[1];
    CHECK_FALSE(bad.ok);
    CHECK(bad.error.find("planner down") != std::string::npos);
    CHECK(bad.final_rating == 0.0);

    // Aggregates cover ok cases only.
    CHECK(batch.criteria.at("search_coverage").mean == 6.0);
    CHECK(batch.criteria.at("overall").min == 6.0);
    nlohmann::json metrics = batch.metrics_json();
    CHECK(metrics["cases"] == 2);
    CHECK(metrics["failures"] == 1);
    CHECK(metrics["search_coverage"]["mean"] == 6.0);

    // Exactly the ok case left a trace, tagged with the harness round.
    auto traces = bank.exact_traces("alpha research topic");
    REQUIRE(traces.size() == 1);
    CHECK(traces[0]->round == 3);
    CHECK(traces[0]->generator_state.round == 1);
    CHECK(traces[0]->criterion_scores["search_coverage"]["score"] == 6.0);
    REQUIRE(traces[0]->per_query_doc_stats.size() == 1);
    CHECK(traces[0]->per_query_doc_stats[0].query_text == "angle one");
    CHECK(bank.exact_traces("FAIL CASE topic").empty());

    bool warned = false;
    for (const auto& m : warnings.messages()) {
        if (m.find("batch case failed for 'FAIL CASE topic'") != std::string::npos) {
            warned = true;
        }
    }
    CHECK(warned);
}

// ---------------------------------------------------------------------------
// Whole-harness runs
// ---------------------------------------------------------------------------

TEST_CASE("run_harness lays out versioned artifacts and tracks the best", "[harness]") {
    WarningCapture mute;
    HarnessEnv env = make_env("harness_smoke");
    fs::path script = env.dir / "mutate.sh";
    spit(script, "#!/bin/sh\nprintf '\\nmutated\\n' >> \"$1/templates/critic.md\"\n");
    env.opts.mutation_cmd = "sh " + script.string();
    env.opts.rounds = 2;

    HarnessStub stub({6.3, 7.4, 7.4}, env.opts.fixed_sample_size);
    HarnessResult result = run_harness(env.opts, stub.set);

    // Baseline plus two optimization rounds; best moved once, at v1.
    REQUIRE(result.rounds.size() == 3);
    CHECK(result.rounds[0].version == "v0_baseline");
    CHECK(result.rounds[0].status == "baseline");
    CHECK(result.rounds[1].version == "v1");
    CHECK(result.rounds[1].status == "improved");
    CHECK(result.rounds[2].version == "v2");
    CHECK(result.rounds[2].status == "regressed");
    CHECK(result.final_stop == StopReason::none);
    CHECK(result.manifest.best_version == "v1");
    CHECK(result.rounds[1].means.at("search_coverage") == 7.4);

    // Directory layout per version.
    fs::path opt = env.opts.run_root / "optimization_runs";
    for (const char* v : {"v0_baseline", "v1", "v2"}) {
        CHECK(fs::exists(opt / v / "metrics.json"));
        CHECK(fs::exists(opt / v / "details.jsonl"));
        CHECK(fs::exists(opt / v / "summary.md"));
        CHECK(fs::exists(opt / v / "changelog.md"));
        CHECK(fs::exists(opt / v / "snapshot" / "templates" / "critic.md"));
        CHECK(fs::exists(opt / v / "snapshot" / "templates" / "generator.md"));
    }

    nlohmann::json metrics = nlohmann::json::parse(slurp(opt / "v0_baseline" / "metrics.json"));
    CHECK(metrics["cases"] == 2);
    CHECK(metrics["failures"] == 0);
    CHECK(metrics["search_coverage"]["mean"] == 6.3);

    // details.jsonl: one parseable case per sampled query.
    {
        std::ifstream details(opt / "v1" / "details.jsonl");
        std::string line;
        int lines = 0;
        while (std::getline(details, line)) {
            ++lines;
            auto c = nlohmann::json::parse(line);
            CHECK(c["ok"] == true);
            CHECK(c["score"]["search_coverage"]["score"] == 7.4);
        }
        CHECK(lines == 2);
    }

    // The mutation hook ran once per optimization round on the restored best.
    std::string snap0 = slurp(opt / "v0_baseline" / "snapshot" / "templates" / "critic.md");
    std::string snap1 = slurp(opt / "v1" / "snapshot" / "templates" / "critic.md");
    std::string snap2 = slurp(opt / "v2" / "snapshot" / "templates" / "critic.md");
    CHECK(snap1 == snap0 + "\nmutated\n");
    CHECK(snap2 == snap1 + "\nmutated\n");
    CHECK(slurp(opt / "v0_baseline" / "changelog.md").find("baseline evaluation") !=
          std::string::npos);
    std::string log2 = slurp(opt / "v2" / "changelog.md");
    CHECK(log2.find("restored snapshot of v1") != std::string::npos);
    CHECK(log2.find("mutation command: sh") != std::string::npos);

    // Manifest and fixed sample persisted.
    RunManifest manifest = RunManifest::load(opt / "manifest.json");
    CHECK(manifest.best_version == "v1");
    REQUIRE(manifest.versions.size() == 3);
    CHECK(manifest.versions[2].parent == "v1");
    nlohmann::json fixed = nlohmann::json::parse(slurp(env.opts.run_root / "fixed_indices.json"));
    CHECK(fixed["sample_size"] == 2);
    CHECK(fixed["indices"].size() == 2);

    // Policy traces landed under the run root.
    bool has_traces = false;
    for (const auto& entry : fs::directory_iterator(env.opts.run_root / "memory")) {
        if (entry.path().filename().string().rfind("traces_", 0) == 0 &&
            fs::file_size(entry.path()) > 0) {
            has_traces = true;
        }
    }
    CHECK(has_traces);

    // Summary table mentions the round's status.
    CHECK(slurp(opt / "v1" / "summary.md").find("status: improved") != std::string::npos);

    // Resuming the same run root picks up the manifest and version numbering.
    HarnessStub stub2({8.0}, env.opts.fixed_sample_size, /*clock_base=*/1000000);
    env.opts.rounds = 1;
    HarnessResult resumed = run_harness(env.opts, stub2.set);
    REQUIRE(resumed.rounds.size() == 1);
    CHECK(resumed.rounds[0].version == "v3");
    CHECK(resumed.rounds[0].status == "improved");
    CHECK(resumed.manifest.best_version == "v3");
    CHECK(resumed.manifest.versions.size() == 4);
    // v3 mutated on top of the previous best, v1.
    std::string snap3 = slurp(opt / "v3" / "snapshot" / "templates" / "critic.md");
    CHECK(snap3 == snap1 + "\nmutated\n");
}

TEST_CASE("run_harness stops on target, convergence, and cap", "[harness]") {
    WarningCapture mute;

    SECTION("target reached by the baseline") {
        HarnessEnv env = make_env("harness_stop_target");
        env.opts.rounds = 5;
        HarnessStub stub({9.5}, env.opts.fixed_sample_size);
        HarnessResult result = run_harness(env.opts, stub.set);
        REQUIRE(result.rounds.size() == 1);
        CHECK(result.final_stop == StopReason::target_reached);
        CHECK_FALSE(fs::exists(env.opts.run_root / "optimization_runs" / "v1"));
    }

    SECTION("converged after one non-improving round") {
        HarnessEnv env = make_env("harness_stop_converged");
        env.opts.rounds = 5;
        env.opts.stop.convergence_patience = 1;
        HarnessStub stub({7.0, 6.0, 6.0}, env.opts.fixed_sample_size);
        HarnessResult result = run_harness(env.opts, stub.set);
        REQUIRE(result.rounds.size() == 2);
        CHECK(result.rounds[1].status == "regressed");
        CHECK(result.final_stop == StopReason::converged);
    }

    SECTION("capped at the optimization-round limit") {
        HarnessEnv env = make_env("harness_stop_capped");
        env.opts.rounds = 5;
        env.opts.stop.max_optimization_rounds = 1;
        HarnessStub stub({5.0, 6.0, 7.0}, env.opts.fixed_sample_size);
        HarnessResult result = run_harness(env.opts, stub.set);
        REQUIRE(result.rounds.size() == 2);
        CHECK(result.rounds[1].status == "improved");
        CHECK(result.final_stop == StopReason::capped);
    }
}
