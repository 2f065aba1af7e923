/// @file prompts.hpp
/// @brief Prompt templates for every agent role, with file override support.
///
/// The engine ships working built-in templates.  At startup a templates
/// directory may override any of them (one markdown file per template, the
/// stem is the template name), which is also what the meta-optimization
/// harness snapshots and mutates.  Placeholders use {{name}} syntax.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "dre/errors.hpp"
#include "dre/util.hpp"

namespace dre {

namespace builtin_templates {

inline constexpr const char* kPlanner = R"TPL(You are a research query planner. Classify the user's query and describe how the final report should be written.

Intent taxonomy (choose exactly one intent):
- information_seeking: fact_query, status_progress, news_information, deep_exploration, resource_locating
- decision_making: comparison_selection, recommendations, how_to_guide, travel_planning, purchase_decision

Signals: "X vs Y" style queries are comparison_selection; "best/top/which should I" indicate recommendations or purchase_decision; itineraries indicate travel_planning; step-by-step requests indicate how_to_guide; broad "analyze/landscape/implications" requests indicate deep_exploration.

response_style must describe tone, structure, and depth expectations for a long-form research report answering this query.
{{harness_note}}
[QUERY]
{{query}}

Output a single JSON object:
{"intent": "<intent name>", "response_style": "<one paragraph>", "instructions": "<optional extra guidance, may be empty>"}
)TPL";

inline constexpr const char* kCritic = R"TPL(You are a strict and demanding research-report outline reviewer. You rate the current outline draft and steer the next round of research by updating the blueprint set.

[USER QUERY]
{{folded_query}}

[CURRENT OUTLINE]
{{outline}}

[CURRENT BLUEPRINTS]
{{blueprints}}

[HISTORICAL SEARCH QUERIES]
{{history_queries}}

[CITATION RATE OF CURRENT SEARCH CONTENT]
{{citation_rate}}

{{feedback}}Rate the outline on seven dimensions, each 0-10:
1. instruction_adherence - does it answer the query under the requested response style?
2. content_depth - does it go beyond surface enumeration into mechanisms and evidence?
3. perspective_balance - are competing viewpoints and counter-evidence represented?
4. coverage_breadth - are all major sub-topics of the query covered?
5. evidence_support - are claims grounded in cited documents?
6. insight_value - does it offer non-obvious synthesis?
7. structural_logic - is the chapter flow coherent and non-redundant?

The overall rating is the arithmetic mean of the seven dimension scores.
Bands: 8-10 publishable, 6-8 solid but improvable, 4-6 notable gaps, 0-4 inadequate.

Blueprint update rules:
- Blueprints may only be modified or expanded, never deleted. Keep the "id" of every existing blueprint you carry forward or revise; omit "id" only for brand-new blueprints.
- Keep at most {{max_blueprints}} blueprints, and at most {{max_queries}} search queries per blueprint (at least {{min_queries}} for blueprints that still need evidence).
- Do not repeat any historical search query.
{{engine_guidelines}}
Output a single JSON object:
{"rating": <float>, "dimension_scores": {"instruction_adherence": <float>, "content_depth": <float>, "perspective_balance": <float>, "coverage_breadth": <float>, "evidence_support": <float>, "insight_value": <float>, "structural_logic": <float>}, "justification": "<brief analysis of each dimension>", "blueprints": [{"id": "<existing id or omit>", "content": "<research direction>", "search_query": ["<query>", ...]}]}
)TPL";

inline constexpr const char* kSearchGuidelinesRednote = R"TPL(Search-term guidelines (lifestyle platform):
- Use short, colloquial keyword phrases (2-6 words) the way users tag lifestyle posts.
- Prefer concrete brands, places, and scenario words over abstract phrasing.
- No search operators, no long interrogative sentences.
)TPL";

inline constexpr const char* kSearchGuidelinesGenericWeb = R"TPL(Search-term guidelines (web search engine):
- Use precise keyword queries; quoted phrases are allowed when exact wording matters.
- Prefer terminology a domain expert would use; include years or units to pin data queries.
- One fact per query; avoid multi-part questions.
)TPL";

inline constexpr const char* kGenerator = R"TPL(You are a research-report outline architect. Produce the best possible outline for the query, grounded in the retrieved documents.

[USER QUERY]
{{folded_query}}

[BLUEPRINTS]
{{blueprints}}

[PREVIOUS OUTLINE]
{{previous_outline}}

[DOCUMENTS]
{{documents}}

Outline requirements:
- Markdown headings only: exactly one `#` title, `##` for top-level chapters, `###`/`####` for sub-levels; a child heading is exactly one level below its parent; never deeper than `####`.
- The first chapter must directly deliver the substantive answer to the query; development and evidence come after.
- Aim for 7-10 top-level chapters and 100-200 cited documents overall.
- Non-leaf headings must be declarative statements, never questions. Leaf headings may be phrased as questions to mark sub-problems.
- Cite supporting documents on the heading line with <cite>id, id</cite> tags, e.g. `## Market size outlook <cite>turn_0_4, turn_1_8</cite>`.
- Cite only ids listed under [DOCUMENTS] or already cited in [PREVIOUS OUTLINE]. Keep every still-relevant citation from the previous outline.

Output the markdown outline only.
)TPL";

inline constexpr const char* kDocJudge = R"TPL(You are a search-result relevance judge for a research pipeline.

[QUERY CONTEXT]
{{folded_query}}

[RESEARCH BLUEPRINTS]
{{blueprints}}

[CURRENT OUTLINE]
{{outline}}

[SEARCH QUERY]
{{search_query}}

[DOCUMENT]
url: {{url}}
title: {{title}}
content: {{content}}

Scoring rule: if the document is unrelated to the user query AND unrelated to the outline AND unrelated to every blueprint AND unrelated to the search query, the score is 0. If it is at least partially related to any of them, score between 0 and 1 by degree of relevance and evidential value.

Also produce a dense factual summary (2-4 sentences) and evidence triples [claim, verbatim quote, url]; the evidence list may be empty.

Output a single JSON object:
{"judge_score": <float 0..1>, "summary": "<summary>", "evidence": [["<claim>", "<quote>", "<url>"], ...]}
)TPL";

inline constexpr const char* kWriterSection = R"TPL(You are a research-report writer. Write exactly one chapter of the report, following the outline subtree below.

[USER QUERY]
{{folded_query}}

[RESPONSE STYLE]
{{response_style}}

[FULL OUTLINE]
{{outline}}

[CHAPTER SUBTREE TO WRITE]
{{section}}

[CHAPTER DOCUMENTS]
{{documents}}

[PREVIOUSLY WRITTEN CHAPTERS]
{{prior_sections}}

Writing rules:
- Reproduce the subtree's headings exactly as given (same text, same levels) and write substantive prose under each.
- Ground claims in the chapter documents and cite them inline with <cite>id</cite> tags at the end of the supporting sentence.
- Do not cite the same document more than once within this chapter.
- Maintain continuity with previously written chapters; do not repeat their content.
- No meta-commentary; output the chapter markdown only.
)TPL";

inline constexpr const char* kHeadingRewrite = R"TPL(Rewrite the interrogative heading below as a declarative noun phrase that announces the answer, preserving the topic. Example: "Why choose Plan A?" becomes "The basis for selecting Plan A".

[HEADING]
{{heading}}

Output a single JSON object: {"heading": "<declarative heading>"}
)TPL";

inline constexpr const char* kHarnessScorer = R"TPL(You are an evaluator of research *processes*. Given the query, the final research blueprints, and per-search-query document statistics, score the search process on four criteria, each 0-10 with reasoning:

- completeness: did the executed searches cover every information need the query implies?
- diversity: did the searches probe distinct angles rather than rephrasing one angle?
- search_coverage: did the returned documents actually satisfy the information needs? The 9-10 band requires that for substantially all queries, more than 80% of returned documents are highly relevant (relevance score > 0.5) and the evidence is complementary rather than redundant.
- overall: holistic quality of the research process.

[QUERY]
{{query}}

[FINAL BLUEPRINTS]
{{blueprints}}

[PER-QUERY DOCUMENT STATISTICS]
{{stats}}

Output a single JSON object:
{"evaluation": {"completeness": {"score": <float>, "reasoning": "<why>"}, "diversity": {"score": <float>, "reasoning": "<why>"}, "search_coverage": {"score": <float>, "reasoning": "<why>"}, "overall": {"score": <float>, "reasoning": "<why>"}}}
)TPL";

inline constexpr const char* kQueryMiner = R"TPL(Generate {{min_n}} to {{max_n}} complex deep-research queries in the category "{{category}}". Each query must require multi-step research: cross-domain evidence, trade-off analysis, or longitudinal data — not a single lookup. Write each query as one self-contained request of 30-120 words.

Output a valid JSON array of strings and nothing else.
)TPL";

inline constexpr const char* kQueryClassifier = R"TPL(Classify the query into exactly one of these categories:

Finance & Business, Science & Technology, Software Development, Education & Jobs, Health, Literature, History, Hardware, Industrial, Art & Design, Games, Crime & Law, Entertainment, Sports & Fitness, Software, Transportation, Religion, Home & Hobbies, Travel, Food & Dining, Fashion & Beauty, Social Life

[QUERY]
{{query}}

Output only the category name.
)TPL";

inline constexpr const char* kWeightsAllocator = R"TPL(You allocate evaluation-dimension weights for judging research reports answering the query below. Weigh the four dimensions by how much each matters for this particular query; the weights must be non-negative and sum to 1.

Dimensions: comprehensiveness, insight, instruction_following, readability.

[QUERY]
{{query}}

Output a single JSON object: {"comprehensiveness": <float>, "insight": <float>, "instruction_following": <float>, "readability": <float>}
)TPL";

inline constexpr const char* kPairwiseJudge = R"TPL(You are a calibrated pairwise judge of research reports. Score the target report against the reference report on each dimension, 0-100. The reference report is the calibration anchor: it scores exactly 50 on every dimension by definition; score the target relative to it (better than the reference > 50, worse < 50).

Dimensions: comprehensiveness, insight, instruction_following, readability.

[QUERY]
{{query}}

[REFERENCE REPORT]
{{reference}}

[TARGET REPORT]
{{target}}

Output a single JSON object:
{"target": {"comprehensiveness": <float>, "insight": <float>, "instruction_following": <float>, "readability": <float>}, "reference": {"comprehensiveness": <float>, "insight": <float>, "instruction_following": <float>, "readability": <float>}}
)TPL";

} // namespace builtin_templates

/// Named prompt templates with {{placeholder}} substitution.
class PromptLibrary {
public:
    /// The shipped defaults; always complete.
    static PromptLibrary builtin() {
        PromptLibrary lib;
        lib.m_templates = {
            {"planner", builtin_templates::kPlanner},
            {"critic", builtin_templates::kCritic},
            {"generator", builtin_templates::kGenerator},
            {"doc_judge", builtin_templates::kDocJudge},
            {"writer_section", builtin_templates::kWriterSection},
            {"heading_rewrite", builtin_templates::kHeadingRewrite},
            {"harness_scorer", builtin_templates::kHarnessScorer},
            {"query_miner", builtin_templates::kQueryMiner},
            {"query_classifier", builtin_templates::kQueryClassifier},
            {"weights_allocator", builtin_templates::kWeightsAllocator},
            {"pairwise_judge", builtin_templates::kPairwiseJudge},
            {"search_guidelines_rednote", builtin_templates::kSearchGuidelinesRednote},
            {"search_guidelines_generic_web", builtin_templates::kSearchGuidelinesGenericWeb},
        };
        return lib;
    }

    /// Defaults overridden by any `<name>.md` files found in `dir`.
    static PromptLibrary load(const std::filesystem::path& dir) {
        PromptLibrary lib = builtin();
        if (dir.empty() || !std::filesystem::exists(dir)) return lib;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".md") continue;
            std::ifstream in(entry.path());
            std::stringstream buf;
            buf << in.rdbuf();
            lib.m_templates[entry.path().stem().string()] = buf.str();
        }
        return lib;
    }

    /// Materialize the built-in templates as files (one .md per template).
    static void write_defaults(const std::filesystem::path& dir) {
        std::filesystem::create_directories(dir);
        for (const auto& [name, text] : builtin().m_templates) {
            std::ofstream out(dir / (name + ".md"));
            if (!out) throw PersistenceFailure("cannot write template: " + name);
            out << text;
        }
    }

    const std::string& get(const std::string& name) const {
        auto it = m_templates.find(name);
        if (it == m_templates.end()) throw ConfigError("unknown prompt template: " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return m_templates.count(name) > 0; }

    /// Substitute {{key}} placeholders.  Placeholders without a binding stay
    /// in place (with a warning) so an edited template cannot crash a run.
    std::string render(const std::string& name,
                       const std::map<std::string, std::string>& vars) const {
        const std::string& tpl = get(name);
        std::string out;
        out.reserve(tpl.size());
        size_t pos = 0;
        while (pos < tpl.size()) {
            size_t open = tpl.find("{{", pos);
            if (open == std::string::npos) {
                out += tpl.substr(pos);
                break;
            }
            size_t close = tpl.find("}}", open);
            if (close == std::string::npos) {
                out += tpl.substr(pos);
                break;
            }
            out += tpl.substr(pos, open - pos);
            std::string key = trim(tpl.substr(open + 2, close - open - 2));
            auto it = vars.find(key);
            if (it != vars.end()) {
                out += it->second;
            } else {
                log_warn("template '" + name + "' placeholder '{{" + key + "}}' has no binding");
                out += tpl.substr(open, close - open + 2);
            }
            pos = close + 2;
        }
        return out;
    }

private:
    std::map<std::string, std::string> m_templates;
};

} // namespace dre
