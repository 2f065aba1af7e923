#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <memory>

#include "dre/mock.hpp"
#include "dre/writer.hpp"
#include "oracles.hpp"

using namespace dre;

namespace {

DocumentBank scored_bank(int docs) {
    DocumentBank bank;
    std::vector<std::pair<std::string, SearchResult>> items;
    for (int i = 0; i < docs; ++i) {
        items.emplace_back("q", SearchResult{"https://d.example/" + std::to_string(i),
                                             "Title " + std::to_string(i), "content"});
    }
    bank.ingest_and_score(0, items, [](const SearchResult& d, const std::string&) {
        JudgeOutcome out;
        out.ok = true;
        out.score = 0.9;
        out.summary = "summary of " + d.title;
        return out;
    });
    return bank;
}

/// Extract the markdown block between two [...] markers.
std::string block_between(const std::string& text, const std::string& begin,
                          const std::string& end) {
    size_t b = text.find(begin);
    size_t e = text.find(end);
    REQUIRE(b != std::string::npos);
    REQUIRE(e != std::string::npos);
    b += begin.size();
    return text.substr(b, e - b);
}

/// Heading lines of a markdown document as (level, text) pairs.
std::vector<std::pair<int, std::string>> heading_sequence(const std::string& markdown) {
    std::vector<std::pair<int, std::string>> out;
    for (const auto& line : split(markdown, '\n')) {
        std::string t = trim(line);
        int level = detail::heading_level(t);
        if (level > 0) {
            std::vector<std::string> ids;
            out.emplace_back(level, collapse_ws(detail::strip_cite_tags(
                                        t.substr(static_cast<size_t>(level)), ids, nullptr)));
        }
    }
    return out;
}

std::vector<std::pair<int, std::string>> preorder_headings(const Outline& outline) {
    std::vector<std::pair<int, std::string>> out;
    std::function<void(const OutlineNode&)> walk = [&](const OutlineNode& n) {
        out.emplace_back(n.level, n.heading);
        for (const auto& c : n.children) walk(c);
    };
    if (!outline.empty()) walk(*outline.root);
    return out;
}

/// Writer provider: echoes the subtree headings with bodies, applying the
/// per-test tweaks; rewrites headings from a fixed map.
struct ScriptedWriter {
    std::map<std::string, std::string> rewrites;
    bool add_preamble = false;
    bool add_extra_heading = false;
    std::map<std::string, std::string> body_cites;  // heading → cite payload
    std::vector<std::string> section_prompts;
    std::vector<std::string> rewrite_prompts;

    std::shared_ptr<LambdaChatProvider> provider() {
        return std::make_shared<LambdaChatProvider>(
            [this](const CompletionRequest& req) -> std::string {
                if (req.role == "heading_rewrite") {
                    rewrite_prompts.push_back(req.user_prompt);
                    std::string heading =
                        trim(block_between(req.user_prompt, "[HEADING]\n", "\n\nOutput"));
                    auto it = rewrites.find(heading);
                    std::string out = it != rewrites.end() ? it->second
                                                           : strip_interrogative(heading);
                    return nlohmann::json{{"heading", out}}.dump();
                }
                REQUIRE(req.role == "writer_section");
                section_prompts.push_back(req.user_prompt);
                std::string subtree = block_between(req.user_prompt,
                                                    "[CHAPTER SUBTREE TO WRITE]\n",
                                                    "\n[CHAPTER DOCUMENTS]");
                std::string out;
                bool first = true;
                for (const auto& line : split(trim(subtree), '\n')) {
                    std::string t = trim(line);
                    int level = detail::heading_level(t);
                    if (level == 0) continue;
                    std::vector<std::string> ids;
                    std::string heading = collapse_ws(detail::strip_cite_tags(
                        t.substr(static_cast<size_t>(level)), ids, nullptr));
                    if (first && add_preamble) {
                        out += "Lead-in paragraph before any heading.\n";
                    }
                    out += std::string(static_cast<size_t>(level), '#') + " " + heading + "\n";
                    out += "Body for " + heading + ".";
                    auto ct = body_cites.find(heading);
                    if (ct != body_cites.end()) out += " <cite>" + ct->second + "</cite>";
                    out += "\n";
                    first = false;
                }
                if (add_extra_heading) {
                    out += "### Invented extra\nExtra prose the outline never asked for.\n";
                }
                return out;
            });
    }
};

} // namespace

TEST_CASE("rewrite_heading uses the provider and never returns a question", "[writer]") {
    LambdaChatProvider scripted([](const CompletionRequest&) -> std::string {
        return R"({"heading": "The basis for selecting Plan A"})";
    });
    CHECK(rewrite_heading(scripted, PromptLibrary::builtin(), "Why choose Plan A?") ==
          "The basis for selecting Plan A");

    // Parse failure falls back to stripping the mark.
    LambdaChatProvider broken([](const CompletionRequest&) -> std::string {
        return "not json at all";
    });
    WarningCapture mute;
    CHECK(rewrite_heading(broken, PromptLibrary::builtin(), "Why choose Plan A?") ==
          "Why choose Plan A");

    // A model that answers with another question is corrected.
    LambdaChatProvider stubborn([](const CompletionRequest&) -> std::string {
        return R"({"heading": "But why though?"})";
    });
    CHECK(rewrite_heading(stubborn, PromptLibrary::builtin(), "Why?") == "But why though");
}

TEST_CASE("only interrogative non-leaf headings are rewritten", "[writer]") {
    Outline outline = parse_outline(
        "# Title\n"
        "## Why choose Plan A?\n"
        "### Leaf stays a question?\n"
        "## Plain section\n");
    ScriptedWriter sw;
    sw.rewrites = {{"Why choose Plan A?", "The basis for selecting Plan A"}};
    auto provider = sw.provider();
    std::vector<std::pair<std::string, std::string>> log;
    Outline rewritten = rewrite_outline_headings(*provider, PromptLibrary::builtin(), outline,
                                                 &log);
    REQUIRE(log.size() == 1);
    CHECK(log[0].first == "Why choose Plan A?");
    CHECK(log[0].second == "The basis for selecting Plan A");
    CHECK(rewritten.root->children[0].heading == "The basis for selecting Plan A");
    CHECK(rewritten.root->children[0].children[0].heading == "Leaf stays a question?");
    CHECK(rewritten.root->children[1].heading == "Plain section");
    // Exactly one rewrite call was made.
    CHECK(sw.rewrite_prompts.size() == 1);
    CHECK(sw.rewrite_prompts[0].find("Why choose Plan A?") != std::string::npos);
}

TEST_CASE("report headings reproduce the rewritten outline preorder", "[writer]") {
    DocumentBank bank = scored_bank(6);
    Outline outline = parse_outline(
        "# Care report\n"
        "## How is it financed? <cite>turn_0_0</cite>\n"
        "### Premium structure <cite>turn_0_1</cite>\n"
        "## Workforce outlook <cite>turn_0_2</cite>\n"
        "### Is migration the answer?\n"
        "#### Visa channels <cite>turn_0_3</cite>\n");
    ScriptedWriter sw;
    sw.rewrites = {{"How is it financed?", "Financing structure"},
                   {"Is migration the answer?", "The role of migration"}};
    auto provider = sw.provider();
    auto outcome = write_report(*provider, PromptLibrary::builtin(), "fq", "style", outline,
                                bank);

    Outline expected = parse_outline(
        "# Care report\n"
        "## Financing structure\n"
        "### Premium structure\n"
        "## Workforce outlook\n"
        "### The role of migration\n"
        "#### Visa channels\n");
    CHECK(heading_sequence(outcome.report.full_markdown) == preorder_headings(expected));

    REQUIRE(outcome.report.sections.size() == 2);
    CHECK(outcome.report.sections[0].first == "Financing structure");
    CHECK(outcome.report.sections[1].first == "Workforce outlook");
    CHECK(outcome.heading_rewrites.size() == 2);

    // One writer call per top-level section, each carrying its own subtree.
    REQUIRE(sw.section_prompts.size() == 2);
    CHECK(sw.section_prompts[0].find("## Financing structure") != std::string::npos);
    CHECK(sw.section_prompts[0].find("Workforce outlook") != std::string::npos);  // full outline
    CHECK(sw.section_prompts[1].find("#### Visa channels") != std::string::npos);
    // The chapter document digest lists cited records.
    CHECK(sw.section_prompts[0].find("- turn_0_0 | Title 0 | https://d.example/0") !=
          std::string::npos);
}

TEST_CASE("preamble prose merges into the first node's body", "[writer]") {
    DocumentBank bank = scored_bank(1);
    Outline outline = parse_outline("# T\n## Only section\n");
    ScriptedWriter sw;
    sw.add_preamble = true;
    auto provider = sw.provider();
    auto outcome =
        write_report(*provider, PromptLibrary::builtin(), "fq", "style", outline, bank);
    const std::string& chunk = outcome.report.sections[0].second;
    size_t heading_pos = chunk.find("## Only section");
    size_t preamble_pos = chunk.find("Lead-in paragraph before any heading.");
    size_t body_pos = chunk.find("Body for Only section.");
    REQUIRE(heading_pos != std::string::npos);
    REQUIRE(preamble_pos != std::string::npos);
    REQUIRE(body_pos != std::string::npos);
    CHECK(heading_pos < preamble_pos);
    CHECK(preamble_pos < body_pos);
    // The lead-in did not become a heading.
    CHECK(heading_sequence(outcome.report.full_markdown).size() == 2);
}

TEST_CASE("model-invented headings are demoted to bold text", "[writer]") {
    DocumentBank bank = scored_bank(1);
    Outline outline = parse_outline("# T\n## Section\n");
    ScriptedWriter sw;
    sw.add_extra_heading = true;
    auto provider = sw.provider();
    auto outcome =
        write_report(*provider, PromptLibrary::builtin(), "fq", "style", outline, bank);
    const std::string& chunk = outcome.report.sections[0].second;
    CHECK(chunk.find("**Invented extra**") != std::string::npos);
    CHECK(chunk.find("Extra prose the outline never asked for.") != std::string::npos);
    CHECK(chunk.find("### Invented extra") == std::string::npos);
    CHECK(heading_sequence(outcome.report.full_markdown) ==
          std::vector<std::pair<int, std::string>>{{1, "T"}, {2, "Section"}});
}

TEST_CASE("per-section citation hygiene", "[writer]") {
    DocumentBank bank = scored_bank(3);
    Outline outline = parse_outline("# T\n## A\n## B\n");
    ScriptedWriter sw;
    // Section A repeats turn_0_0 (in one tag) and cites an unknown id;
    // section B cites turn_0_0 again, which is fine across sections.
    sw.body_cites = {{"A", "turn_0_0, turn_0_0, turn_9_9, turn_0_1"},
                     {"B", "turn_0_0"}};
    auto provider = sw.provider();
    WarningCapture mute;
    auto outcome =
        write_report(*provider, PromptLibrary::builtin(), "fq", "style", outline, bank);

    CHECK(outcome.repeated_citations_removed == 1);
    bool stripped = false;
    for (const auto& w : outcome.warnings) {
        if (w.find("unresolvable citation stripped: turn_9_9") != std::string::npos) {
            stripped = true;
        }
    }
    CHECK(stripped);

    const std::string& chunk_a = outcome.report.sections[0].second;
    CHECK(chunk_a.find("<cite>turn_0_0, turn_0_1</cite>") != std::string::npos);
    const std::string& chunk_b = outcome.report.sections[1].second;
    CHECK(chunk_b.find("<cite>turn_0_0</cite>") != std::string::npos);

    // References: first-citation order, one line per unique id, em-dash format.
    const std::string& full = outcome.report.full_markdown;
    size_t refs = full.find("---\n\nReferences\n\n");
    REQUIRE(refs != std::string::npos);
    std::string ref_block = full.substr(refs);
    CHECK(ref_block.find("- turn_0_0 \xE2\x80\x94 https://d.example/0\n") != std::string::npos);
    CHECK(ref_block.find("- turn_0_1 \xE2\x80\x94 https://d.example/1\n") != std::string::npos);
    CHECK(ref_block.find("turn_9_9") == std::string::npos);
    CHECK(ref_block.find("- turn_0_0") < ref_block.find("- turn_0_1"));

    CHECK(outcome.report.citation_map ==
          std::map<std::string, std::string>{{"turn_0_0", "https://d.example/0"},
                                             {"turn_0_1", "https://d.example/1"}});
}

TEST_CASE("prior context truncates to the most recent sections", "[writer]") {
    DocumentBank bank = scored_bank(1);
    Outline outline = parse_outline("# T\n## S1\n## S2\n## S3\n## S4\n");
    ScriptedWriter sw;
    auto provider = sw.provider();
    WriterConfig config;
    config.context_budget_chars = 10;  // force truncation immediately
    config.keep_recent_sections = 2;
    write_report(*provider, PromptLibrary::builtin(), "fq", "style", outline, bank, config);
    REQUIRE(sw.section_prompts.size() == 4);
    CHECK(sw.section_prompts[0].find("(none yet)") != std::string::npos);
    // Writing S4: prior context holds S2 and S3 but no longer S1.
    const std::string& last = sw.section_prompts[3];
    std::string prior = last.substr(last.find("[PREVIOUSLY WRITTEN CHAPTERS]"));
    CHECK(prior.find("Body for S2.") != std::string::npos);
    CHECK(prior.find("Body for S3.") != std::string::npos);
    CHECK(prior.find("Body for S1.") == std::string::npos);
}

TEST_CASE("an empty outline cannot be written", "[writer]") {
    DocumentBank bank = scored_bank(1);
    ScriptedWriter sw;
    auto provider = sw.provider();
    CHECK_THROWS_AS(
        write_report(*provider, PromptLibrary::builtin(), "fq", "style", Outline{}, bank),
        Error);
}

TEST_CASE("heading sequence survives random outlines", "[writer][property]") {
    std::mt19937_64 rng(771230);
    DocumentBank bank = scored_bank(30);
    for (int trial = 0; trial < 40; ++trial) {
        // Random tree: 1-5 sections, depth up to 4, occasional interrogative
        // non-leaf headings and citations.
        Outline outline;
        outline.root = OutlineNode{1, "Report " + oracle::random_word(rng), {}, {}};
        std::uniform_int_distribution<int> n_sections(1, 5), n_children(0, 3), coin(0, 1),
            doc_idx(0, 29);
        auto grow = [&](auto&& self, OutlineNode& node) -> void {
            if (node.level >= 4) return;
            int kids = node.level == 1 ? n_sections(rng) : n_children(rng);
            for (int k = 0; k < kids; ++k) {
                OutlineNode child;
                child.level = node.level + 1;
                child.heading = oracle::random_sentence(rng, 3);
                if (coin(rng)) child.cite_ids.push_back("turn_0_" + std::to_string(doc_idx(rng)));
                node.children.push_back(child);
                self(self, node.children.back());
            }
            // Mark some non-leaves interrogative after children exist.
            if (!node.children.empty() && node.level > 1 && coin(rng)) {
                node.heading += "?";
            }
        };
        grow(grow, *outline.root);

        ScriptedWriter sw;
        sw.add_preamble = trial % 2 == 0;
        sw.add_extra_heading = trial % 3 == 0;
        auto provider = sw.provider();
        auto outcome =
            write_report(*provider, PromptLibrary::builtin(), "fq", "style", outline, bank);

        // Oracle: rewrite interrogative non-leaves the same way the scripted
        // provider does (strip the mark), then compare preorders.
        Outline expected = outline;
        std::function<void(OutlineNode&)> strip = [&](OutlineNode& n) {
            if (!n.children.empty() && is_interrogative(n.heading)) {
                n.heading = strip_interrogative(n.heading);
            }
            for (auto& c : n.children) strip(c);
        };
        strip(*expected.root);
        REQUIRE(heading_sequence(outcome.report.full_markdown) ==
                preorder_headings(expected));
    }
}
