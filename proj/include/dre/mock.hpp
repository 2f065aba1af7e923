/// @file mock.hpp
/// @brief Deterministic offline providers driven by a fixture directory:
///        canned search corpora, scripted critic/scorer sequences, and
///        prompt-parsing mocks for the generator, judge, and writer roles.
///
/// Dispatch keys off CompletionRequest::role — an engine-internal tag that
/// live HTTP providers ignore — so edited prompt templates can never detune
/// the mocks.  Every response is a pure function of the fixture plus the
/// call sequence, which makes whole-pipeline runs byte-reproducible.

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "dre/document_bank.hpp"
#include "dre/outline.hpp"
#include "dre/providers.hpp"
#include "dre/text.hpp"
#include "dre/util.hpp"

namespace dre {

// ---------------------------------------------------------------------------
// Test-only lambda providers
// ---------------------------------------------------------------------------

class LambdaChatProvider : public ChatProvider {
public:
    using Fn = std::function<std::string(const CompletionRequest&)>;
    explicit LambdaChatProvider(Fn fn) : m_fn(std::move(fn)) {}
    std::string complete(const CompletionRequest& request) override { return m_fn(request); }

private:
    Fn m_fn;
};

class LambdaSearchProvider : public SearchProvider {
public:
    using Fn = std::function<std::vector<SearchResult>(const std::string&, int)>;
    explicit LambdaSearchProvider(Fn fn) : m_fn(std::move(fn)) {}
    std::vector<SearchResult> search(const std::string& query, int top_k) override {
        return m_fn(query, top_k);
    }

private:
    Fn m_fn;
};

// ---------------------------------------------------------------------------
// Fixture
// ---------------------------------------------------------------------------

struct MockDocument {
    std::string url;
    std::string title;
    std::string content;
    std::string summary;
    double score = 0.0;
    nlohmann::json evidence = nlohmann::json::array();
};

/// An offline corpus plus behavior script:
///   documents.jsonl  one document per line (url, title, content, summary,
///                    score, evidence) — the url doubles as the lookup key
///   queries.jsonl    {"query": ..., "urls": [...]} exact-match search results
///   script.json      scripted critic rounds, heading rewrites, scorer
///                    sequences, weights, pairwise scores, plan, classify
///   canned.jsonl     {"prompt": ..., "response": ...} exact-prompt overrides
struct MockFixture {
    std::vector<MockDocument> documents;
    std::map<std::string, std::vector<size_t>> query_results;  // query → doc indexes
    std::map<std::string, size_t> by_url;
    nlohmann::json script = nlohmann::json::object();
    std::map<std::string, std::string> canned;

    static MockFixture load(const std::filesystem::path& dir) {
        MockFixture f;
        {
            std::ifstream in(dir / "documents.jsonl");
            if (!in) {
                throw ConfigError("mock fixture lacks documents.jsonl: " + dir.string());
            }
            std::string line;
            while (std::getline(in, line)) {
                if (trim(line).empty()) continue;
                nlohmann::json j = nlohmann::json::parse(line);
                MockDocument d;
                d.url = j.at("url").get<std::string>();
                d.title = j.value("title", "");
                d.content = j.value("content", "");
                d.summary = j.value("summary", "");
                d.score = j.value("score", 0.0);
                d.evidence = j.value("evidence", nlohmann::json::array());
                f.by_url[d.url] = f.documents.size();
                f.documents.push_back(std::move(d));
            }
        }
        {
            std::ifstream in(dir / "queries.jsonl");
            if (!in) throw ConfigError("mock fixture lacks queries.jsonl: " + dir.string());
            std::string line;
            while (std::getline(in, line)) {
                if (trim(line).empty()) continue;
                nlohmann::json j = nlohmann::json::parse(line);
                std::vector<size_t> indexes;
                for (const auto& url : j.at("urls")) {
                    auto it = f.by_url.find(url.get<std::string>());
                    if (it == f.by_url.end()) {
                        throw ConfigError("fixture query references unknown url: " +
                                          url.get<std::string>());
                    }
                    indexes.push_back(it->second);
                }
                f.query_results[j.at("query").get<std::string>()] = std::move(indexes);
            }
        }
        if (std::filesystem::exists(dir / "script.json")) {
            std::ifstream in(dir / "script.json");
            f.script = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
        }
        if (std::filesystem::exists(dir / "canned.jsonl")) {
            std::ifstream in(dir / "canned.jsonl");
            std::string line;
            while (std::getline(in, line)) {
                if (trim(line).empty()) continue;
                nlohmann::json j = nlohmann::json::parse(line);
                f.canned[j.at("prompt").get<std::string>()] =
                    j.at("response").get<std::string>();
            }
        }
        return f;
    }
};

// ---------------------------------------------------------------------------
// Search provider
// ---------------------------------------------------------------------------

/// Exact-query lookup into the fixture corpus, results in fixture order,
/// truncated to top_k.  Unknown queries return nothing, with a warning.
class MockSearchProvider : public SearchProvider {
public:
    explicit MockSearchProvider(std::shared_ptr<const MockFixture> fixture)
        : m_fixture(std::move(fixture)) {}

    std::vector<SearchResult> search(const std::string& query, int top_k) override {
        auto it = m_fixture->query_results.find(query);
        if (it == m_fixture->query_results.end()) {
            log_warn("mock search has no results for query: " + query);
            return {};
        }
        std::vector<SearchResult> out;
        for (size_t idx : it->second) {
            if (static_cast<int>(out.size()) >= top_k) break;
            const MockDocument& d = m_fixture->documents[idx];
            out.push_back({d.url, d.title, d.content});
        }
        return out;
    }

private:
    std::shared_ptr<const MockFixture> m_fixture;
};

// ---------------------------------------------------------------------------
// Chat provider
// ---------------------------------------------------------------------------

namespace mockdetail {

/// Lines of the prompt block that starts after the `marker` line and ends at
/// the next [BRACKETED] marker (or the end of the prompt).
inline std::vector<std::string> block(const std::string& prompt, const std::string& marker) {
    std::vector<std::string> out;
    bool in = false;
    for (const auto& raw : split(prompt, '\n')) {
        std::string t = trim(raw);
        if (t == marker) {
            in = true;
            continue;
        }
        if (in && t.size() >= 2 && t.front() == '[' && t.back() == ']') break;
        if (in) out.push_back(raw);
    }
    return out;
}

inline std::string first_nonempty(const std::vector<std::string>& lines) {
    for (const auto& l : lines) {
        if (!trim(l).empty()) return trim(l);
    }
    return "";
}

/// The raw query text inside a [USER QUERY] block: everything outside the
/// fenced plan preamble, last non-empty line wins.
inline std::string query_text_of(const std::vector<std::string>& lines) {
    std::string query;
    bool fenced = false;
    for (const auto& l : lines) {
        std::string t = trim(l);
        if (t.rfind("```", 0) == 0) {
            fenced = !fenced;
            continue;
        }
        if (!fenced && !t.empty()) query = t;
    }
    return query;
}

struct DocGroup {
    std::string label;  // blueprint content, or "(carried or unassigned)"
    std::vector<std::string> ids;
};

/// Parse the generator's [DOCUMENTS] digest back into groups of ids.
inline std::vector<DocGroup> parse_doc_groups(const std::vector<std::string>& lines) {
    std::vector<DocGroup> groups;
    for (const auto& raw : lines) {
        std::string t = trim(raw);
        if (t.rfind("(blueprint ", 0) == 0) {
            size_t close = t.find(") ");
            DocGroup g;
            g.label = close == std::string::npos ? "" : trim(t.substr(close + 2));
            groups.push_back(std::move(g));
        } else if (t.rfind("(carried or unassigned)", 0) == 0) {
            groups.push_back({"(carried or unassigned)", {}});
        } else if (t.rfind("- turn_", 0) == 0) {
            std::string rest = t.substr(2);
            std::string id = trim(rest.substr(0, rest.find(" | ")));
            if (groups.empty()) groups.push_back({"", {}});
            groups.back().ids.push_back(id);
        }
    }
    return groups;
}

/// Parse the [BLUEPRINTS] digest lines "- (id=bN) content".
inline std::vector<std::pair<std::string, std::string>> parse_blueprint_lines(
    const std::vector<std::string>& lines) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& raw : lines) {
        std::string t = trim(raw);
        if (t.rfind("- (id=", 0) != 0) continue;
        size_t close = t.find(") ");
        if (close == std::string::npos) continue;
        out.emplace_back(t.substr(6, close - 6), trim(t.substr(close + 2)));
    }
    return out;
}

inline std::string join_ids(const std::vector<std::string>& ids, size_t from, size_t to) {
    std::vector<std::string> slice(ids.begin() + static_cast<long>(from),
                                   ids.begin() + static_cast<long>(to));
    return join(slice, ", ");
}

} // namespace mockdetail

/// Scripted, deterministic chat provider.
///
/// Stateless roles (generator, doc_judge, writer_section, heading_rewrite)
/// are pure functions of the prompt.  Sequenced roles consume the fixture
/// script: the critic sequence restarts whenever it sees a round-0 prompt
/// (empty current outline), so a single provider instance serves any number
/// of back-to-back research runs; the harness-scorer sequence advances per
/// call across the whole process.  Exhausted sequences repeat their last
/// entry.
class MockChatProvider : public ChatProvider {
public:
    explicit MockChatProvider(std::shared_ptr<const MockFixture> fixture)
        : m_fixture(std::move(fixture)) {}

    std::string complete(const CompletionRequest& request) override {
        {
            auto it = m_fixture->canned.find(request.user_prompt);
            if (it != m_fixture->canned.end()) return it->second;
        }
        const std::string& role = request.role;
        if (role == "planner") return plan_response();
        if (role == "critic") return critic_response(request.user_prompt);
        if (role == "generator") return generator_response(request.user_prompt);
        if (role == "doc_judge") return judge_response(request.user_prompt);
        if (role == "writer_section") return writer_response(request.user_prompt);
        if (role == "heading_rewrite") return rewrite_response(request.user_prompt);
        if (role == "harness_scorer") return scorer_response();
        if (role == "weights") return weights_response();
        if (role == "pairwise") return pairwise_response();
        if (role == "query_miner") return miner_response();
        if (role == "query_classifier") return classify_response();
        throw ProviderRefused("mock chat provider has no behavior for role '" + role + "'");
    }

private:
    const nlohmann::json& script() const { return m_fixture->script; }

    std::string plan_response() const {
        if (script().contains("plan")) return script().at("plan").dump();
        return nlohmann::json{{"intent", "deep_exploration"},
                              {"response_style",
                               "A thorough, well-structured analytical report grounded in "
                               "cited evidence."},
                              {"instructions", ""}}
            .dump();
    }

    std::string critic_response(const std::string& prompt) {
        if (!script().contains("critic") || script().at("critic").empty()) {
            throw ProviderRefused("mock fixture has no critic script");
        }
        const auto& seq = script().at("critic");
        std::lock_guard<std::mutex> lock(m_mutex);
        bool round0 =
            mockdetail::first_nonempty(mockdetail::block(prompt, "[CURRENT OUTLINE]")) ==
            "(empty)";
        if (round0) m_critic_idx = 0;
        else ++m_critic_idx;
        size_t idx = std::min(static_cast<size_t>(m_critic_idx), seq.size() - 1);
        return seq[idx].dump();
    }

    /// Rebuild a full outline from the digests in the generator's own prompt:
    /// a direct-answer chapter first, one chapter per blueprint (citing the
    /// documents its searches fetched this round), a carried-evidence
    /// chapter, and a synthesis chapter with one interrogative leaf.
    std::string generator_response(const std::string& prompt) const {
        std::string query =
            mockdetail::query_text_of(mockdetail::block(prompt, "[USER QUERY]"));
        if (query.empty()) query = "Research findings";
        auto blueprints =
            mockdetail::parse_blueprint_lines(mockdetail::block(prompt, "[BLUEPRINTS]"));
        auto groups = mockdetail::parse_doc_groups(mockdetail::block(prompt, "[DOCUMENTS]"));

        auto group_ids = [&](const std::string& label) -> std::vector<std::string> {
            for (const auto& g : groups) {
                if (g.label == label) return g.ids;
            }
            return {};
        };

        std::string out = "# " + query + "\n";
        std::vector<std::string> leads;
        for (const auto& g : groups) {
            if (!g.ids.empty()) leads.push_back(g.ids.front());
        }
        out += "## Direct answer and key findings";
        if (!leads.empty()) out += " <cite>" + join(leads, ", ") + "</cite>";
        out += "\n";
        for (const auto& [id, content] : blueprints) {
            (void)id;
            std::string heading = content;
            while (!heading.empty() && (heading.back() == '.' || heading.back() == ' ')) {
                heading.pop_back();
            }
            auto ids = group_ids(content);
            size_t head_n = std::min<size_t>(ids.size(), 2);
            out += "## " + heading;
            if (head_n > 0) {
                out += " <cite>" + mockdetail::join_ids(ids, 0, head_n) + "</cite>";
            }
            out += "\n";
            if (ids.size() > head_n) {
                out += "### Supporting evidence in detail <cite>" +
                       mockdetail::join_ids(ids, head_n, ids.size()) + "</cite>\n";
            }
        }
        auto carried = group_ids("(carried or unassigned)");
        if (!carried.empty()) {
            out += "## Evidence carried from earlier rounds <cite>" + join(carried, ", ") +
                   "</cite>\n";
        }
        out += "## Synthesis, limitations, and outlook\n";
        out += "### What open questions remain?\n";
        return out;
    }

    std::string judge_response(const std::string& prompt) const {
        std::string url;
        for (const auto& line : mockdetail::block(prompt, "[DOCUMENT]")) {
            std::string t = trim(line);
            if (t.rfind("url: ", 0) == 0) {
                url = t.substr(5);
                break;
            }
        }
        auto it = m_fixture->by_url.find(url);
        if (it == m_fixture->by_url.end()) {
            return nlohmann::json{{"judge_score", 0.0},
                                  {"summary", "(document unknown to the fixture)"},
                                  {"evidence", nlohmann::json::array()}}
                .dump();
        }
        const MockDocument& d = m_fixture->documents[it->second];
        return nlohmann::json{
            {"judge_score", d.score}, {"summary", d.summary}, {"evidence", d.evidence}}
            .dump();
    }

    /// Echo the subtree's headings (sans cite tags) and write one grounded
    /// body paragraph per heading, citing the heading's documents.
    std::string writer_response(const std::string& prompt) const {
        std::string out;
        for (const auto& raw : mockdetail::block(prompt, "[CHAPTER SUBTREE TO WRITE]")) {
            std::string t = trim(raw);
            if (t.empty() || t.front() != '#') continue;
            size_t level = 0;
            while (level < t.size() && t[level] == '#') ++level;
            std::vector<std::string> ids;
            std::string heading =
                collapse_ws(detail::strip_cite_tags(t.substr(level), ids, nullptr));
            out += std::string(level, '#') + " " + heading + "\n";
            out += "This section develops \"" + heading +
                   "\" from the collected evidence, weighing the strongest findings "
                   "against their limitations.";
            if (!ids.empty()) out += " <cite>" + join(ids, ", ") + "</cite>";
            out += "\n\n";
        }
        return out;
    }

    std::string rewrite_response(const std::string& prompt) const {
        std::string heading =
            mockdetail::first_nonempty(mockdetail::block(prompt, "[HEADING]"));
        if (script().contains("rewrites")) {
            const auto& map = script().at("rewrites");
            if (map.contains(heading)) {
                return nlohmann::json{{"heading", map.at(heading).get<std::string>()}}.dump();
            }
        }
        return nlohmann::json{{"heading", strip_interrogative(heading)}}.dump();
    }

    std::string scorer_response() {
        if (!script().contains("harness_scores") || script().at("harness_scores").empty()) {
            throw ProviderRefused("mock fixture has no harness_scores script");
        }
        const auto& seq = script().at("harness_scores");
        std::lock_guard<std::mutex> lock(m_mutex);
        size_t idx = std::min(static_cast<size_t>(m_scorer_idx++), seq.size() - 1);
        const auto& entry = seq[idx];
        if (entry.contains("evaluation")) return entry.dump();
        return nlohmann::json{{"evaluation", entry}}.dump();
    }

    std::string weights_response() const {
        if (script().contains("weights")) return script().at("weights").dump();
        return nlohmann::json{{"comprehensiveness", 0.25},
                              {"insight", 0.25},
                              {"instruction_following", 0.25},
                              {"readability", 0.25}}
            .dump();
    }

    std::string pairwise_response() {
        if (!script().contains("pairwise")) {
            throw ProviderRefused("mock fixture has no pairwise script");
        }
        const auto& p = script().at("pairwise");
        if (p.is_array()) {
            std::lock_guard<std::mutex> lock(m_mutex);
            size_t idx = std::min(static_cast<size_t>(m_pairwise_idx++), p.size() - 1);
            return p[idx].dump();
        }
        return p.dump();
    }

    std::string miner_response() const {
        if (script().contains("miner")) return script().at("miner").dump();
        return nlohmann::json::array({"Deterministic research query one",
                                      "Deterministic research query two",
                                      "Deterministic research query three",
                                      "Deterministic research query four",
                                      "Deterministic research query five"})
            .dump();
    }

    std::string classify_response() const {
        if (script().contains("classify")) {
            return script().at("classify").get<std::string>();
        }
        return "Science & Technology";
    }

    std::shared_ptr<const MockFixture> m_fixture;
    std::mutex m_mutex;
    int m_critic_idx = -1;
    int m_scorer_idx = 0;
    int m_pairwise_idx = 0;
};

} // namespace dre
