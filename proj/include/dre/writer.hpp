/// @file writer.hpp
/// @brief Chunked report writing: one provider call per top-level section,
///        conditioned on previously written chunks, with interrogative
///        heading rewriting and per-section citation hygiene.

#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dre/document_bank.hpp"
#include "dre/outline.hpp"
#include "dre/prompts.hpp"
#include "dre/providers.hpp"
#include "dre/types.hpp"

namespace dre {

struct WriterConfig {
    size_t context_budget_chars = 24000;  // prior-chunk context before truncation
    size_t keep_recent_sections = 2;      // sections kept once over budget
};

// ---------------------------------------------------------------------------
// Heading rewriting
// ---------------------------------------------------------------------------

/// Rewrite one interrogative heading into a declarative one via the provider.
/// On ParseFailure the fallback strips the terminal question mark.  The
/// result is never interrogative.
inline std::string rewrite_heading(ChatProvider& provider, const PromptLibrary& prompts,
                                   const std::string& heading) {
    CompletionRequest req;
    req.role = "heading_rewrite";
    req.system_prompt = "You rewrite headings.";
    req.user_prompt = prompts.render("heading_rewrite", {{"heading", heading}});
    std::string rewritten;
    try {
        auto j = request_json(provider, req);
        rewritten = trim(j.value("heading", ""));
    } catch (const ParseFailure&) {
        log_warn("heading rewrite failed; stripping terminal question mark: " + heading);
        rewritten.clear();
    }
    if (rewritten.empty()) rewritten = strip_interrogative(heading);
    if (is_interrogative(rewritten)) rewritten = strip_interrogative(rewritten);
    return rewritten;
}

/// Rewrite every interrogative non-leaf heading in the outline; leaf headings
/// pass through untouched.  Returns the rewritten tree plus a log of
/// original → rewritten pairs.
inline Outline rewrite_outline_headings(ChatProvider& provider, const PromptLibrary& prompts,
                                        const Outline& outline,
                                        std::vector<std::pair<std::string, std::string>>* log
                                        = nullptr) {
    Outline out = outline;
    if (out.empty()) return out;
    std::function<void(OutlineNode&)> walk = [&](OutlineNode& node) {
        if (!node.children.empty() && is_interrogative(node.heading)) {
            std::string rewritten = rewrite_heading(provider, prompts, node.heading);
            if (log) log->emplace_back(node.heading, rewritten);
            node.heading = rewritten;
        }
        for (auto& c : node.children) walk(c);
    };
    walk(*out.root);
    return out;
}

// ---------------------------------------------------------------------------
// Section assembly
// ---------------------------------------------------------------------------

namespace detail {

struct Segment {
    std::string heading;  // empty for the preamble
    std::string body;
};

/// Split model output into heading-delimited segments.
inline std::vector<Segment> split_segments(const std::string& text) {
    std::vector<Segment> segments;
    segments.push_back({});  // preamble
    for (const auto& raw : split(text, '\n')) {
        std::string line = raw;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string stripped = trim(line);
        int level = heading_level(stripped);
        if (level > 0) {
            Segment seg;
            std::vector<std::string> ids;
            seg.heading = collapse_ws(strip_cite_tags(stripped.substr(static_cast<size_t>(level)),
                                                      ids, nullptr));
            segments.push_back(std::move(seg));
        } else {
            segments.back().body += line;
            segments.back().body += "\n";
        }
    }
    return segments;
}

/// Preorder list of pointers into a subtree.
inline std::vector<const OutlineNode*> preorder(const OutlineNode& root) {
    std::vector<const OutlineNode*> nodes;
    std::function<void(const OutlineNode&)> walk = [&](const OutlineNode& n) {
        nodes.push_back(&n);
        for (const auto& c : n.children) walk(c);
    };
    walk(root);
    return nodes;
}

/// Enforce citation hygiene on one body block: ids must resolve in the bank
/// and may appear at most once per section.  Rewrites cite tags in place;
/// tags left without ids disappear.
inline std::string sanitize_body(const std::string& body, const DocumentBank& bank,
                                 std::set<std::string>& cited_in_section,
                                 std::vector<std::string>& report_order,
                                 std::set<std::string>& report_seen, int* repeats_removed,
                                 std::vector<std::string>* warnings) {
    std::string out;
    for (const auto& raw : split(body, '\n')) {
        std::string line = raw;
        std::string rebuilt;
        size_t pos = 0;
        while (true) {
            size_t open = line.find("<cite>", pos);
            if (open == std::string::npos) {
                rebuilt += line.substr(pos);
                break;
            }
            size_t close = line.find("</cite>", open);
            if (close == std::string::npos) {  // keep malformed tail verbatim
                rebuilt += line.substr(pos);
                break;
            }
            rebuilt += line.substr(pos, open - pos);
            std::vector<std::string> kept;
            for (const auto& part : split(line.substr(open + 6, close - open - 6), ',')) {
                std::string id = trim(part);
                if (id.empty()) continue;
                if (!bank.contains(id)) {
                    if (warnings) warnings->push_back("unresolvable citation stripped: " + id);
                    continue;
                }
                if (cited_in_section.count(id)) {
                    ++*repeats_removed;
                    continue;
                }
                cited_in_section.insert(id);
                kept.push_back(id);
                if (!report_seen.count(id)) {
                    report_seen.insert(id);
                    report_order.push_back(id);
                }
            }
            if (!kept.empty()) rebuilt += "<cite>" + join(kept, ", ") + "</cite>";
            pos = close + 7;
        }
        out += rebuilt;
        out += "\n";
    }
    // Trim the trailing newline added by the loop when the body had none.
    if (!body.empty() && body.back() != '\n' && !out.empty()) out.pop_back();
    return out;
}

} // namespace detail

struct WriteOutcome {
    Report report;
    std::vector<std::pair<std::string, std::string>> heading_rewrites;
    int repeated_citations_removed = 0;
    std::vector<std::string> warnings;
};

/// Write the full report from an outline.
///
/// The outline's interrogative non-leaf headings are rewritten first; the
/// writer then produces one chunk per top-level section (a single provider
/// call each, conditioned on prior chunks, truncated to the most recent
/// `keep_recent_sections` once the context budget is exceeded).  Each chunk
/// is normalized so its heading sequence reproduces the rewritten subtree
/// exactly; model-invented extra headings are demoted to bold text.
/// Citations must resolve in the bank and may not repeat within a section.
inline WriteOutcome write_report(ChatProvider& provider, const PromptLibrary& prompts,
                                 const std::string& folded_query,
                                 const std::string& response_style, const Outline& outline,
                                 const DocumentBank& bank, const WriterConfig& config = {}) {
    if (outline.empty()) throw Error("cannot write a report from an empty outline");

    WriteOutcome outcome;
    Outline rewritten =
        rewrite_outline_headings(provider, prompts, outline, &outcome.heading_rewrites);
    const std::string outline_md = serialize_outline(rewritten);

    std::vector<std::string> report_citation_order;
    std::set<std::string> report_citations_seen;

    std::string title = rewritten.root->heading;
    std::vector<std::string> chunks;

    for (const auto& section : rewritten.root->children) {
        // Per-section document digest from the section subtree's citations.
        Outline subtree;
        subtree.root = section;
        std::string section_md = serialize_outline(subtree);
        std::string docs;
        for (const auto& id : extract_citations(subtree)) {
            if (!bank.contains(id)) continue;
            const auto& rec = bank.get(id);
            docs += "- " + rec.id + " | " + rec.title + " | " + rec.url + " | " + rec.summary +
                    "\n";
        }
        if (docs.empty()) docs = "(no documents cited by this chapter)";

        // Prior-chunk context, truncated to the most recent sections once the
        // budget is exceeded.
        std::string prior;
        size_t total = 0;
        for (const auto& c : chunks) total += c.size();
        size_t start = 0;
        if (total > config.context_budget_chars &&
            chunks.size() > config.keep_recent_sections) {
            start = chunks.size() - config.keep_recent_sections;
        }
        for (size_t i = start; i < chunks.size(); ++i) {
            prior += chunks[i];
            prior += "\n\n";
        }
        if (prior.empty()) prior = "(none yet)";

        CompletionRequest req;
        req.role = "writer_section";
        req.system_prompt = "You write chapters of research reports.";
        req.user_prompt = prompts.render("writer_section", {
                                                               {"folded_query", folded_query},
                                                               {"response_style", response_style},
                                                               {"outline", outline_md},
                                                               {"section", section_md},
                                                               {"documents", docs},
                                                               {"prior_sections", prior},
                                                           });
        std::string raw = provider.complete(req);

        // Normalize: headings come from the outline, bodies from the model.
        auto nodes = detail::preorder(section);
        auto segments = detail::split_segments(raw);
        std::set<std::string> cited_in_section;

        std::string chunk;
        size_t seg_idx = 1;  // segments[0] is the preamble
        for (size_t n = 0; n < nodes.size(); ++n) {
            chunk.append(static_cast<size_t>(nodes[n]->level), '#');
            chunk.push_back(' ');
            chunk += nodes[n]->heading;
            chunk += "\n\n";
            std::string body;
            if (n == 0 && !trim(segments[0].body).empty()) {
                body += segments[0].body;
            }
            if (seg_idx < segments.size()) {
                body += segments[seg_idx].body;
                ++seg_idx;
            }
            // Tail segments the outline does not know: demote their headings
            // to bold text and keep the prose with the last node.
            if (n + 1 == nodes.size()) {
                while (seg_idx < segments.size()) {
                    body += "**" + segments[seg_idx].heading + "**\n";
                    body += segments[seg_idx].body;
                    ++seg_idx;
                }
            }
            std::string clean = detail::sanitize_body(
                body, bank, cited_in_section, report_citation_order, report_citations_seen,
                &outcome.repeated_citations_removed, &outcome.warnings);
            clean = trim(clean);
            if (!clean.empty()) {
                chunk += clean;
                chunk += "\n\n";
            }
        }
        while (!chunk.empty() && chunk.back() == '\n') chunk.pop_back();
        outcome.report.sections.emplace_back(section.heading, chunk);
        chunks.push_back(chunk);
    }

    // Assemble the full document.  The references block is deliberately not a
    // markdown heading: the report's heading sequence must remain exactly the
    // outline's preorder.
    std::string full = "# " + title + "\n\n";
    for (const auto& c : chunks) {
        full += c;
        full += "\n\n";
    }
    full += "---\n\nReferences\n\n";
    for (const auto& id : report_citation_order) {
        const auto& rec = bank.get(id);
        outcome.report.citation_map[id] = rec.url;
        full += "- " + id + " \xE2\x80\x94 " + rec.url + "\n";
    }
    outcome.report.full_markdown = std::move(full);
    if (outcome.repeated_citations_removed > 0) {
        log_warn("writer removed " + std::to_string(outcome.repeated_citations_removed) +
                 " repeated citations across the report");
    }
    return outcome;
}

} // namespace dre
