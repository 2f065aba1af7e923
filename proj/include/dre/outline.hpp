/// @file outline.hpp
/// @brief Markdown outline grammar: parse, serialize, citation extraction,
///        structural validation, and soft lint checks.
///
/// Grammar: `#` introduces the single title (level 1), `##` top-level
/// sections, `###`/`####` deeper levels.  A child is exactly one level below
/// its parent.  Citations attach to headings as `<cite>turn_0_4, turn_1_8</cite>`
/// tags; ids split on commas and trim.  Cite tags on body lines are accepted
/// too: their ids merge into the owning heading and the position is reported
/// as a parse warning.

#pragma once

#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "dre/errors.hpp"
#include "dre/util.hpp"

namespace dre {

/// One heading with its citations and subordinate headings.
struct OutlineNode {
    int level = 1;                        // 1 = title, 2..4 = sections
    std::string heading;                  // text without markers or cite tags
    std::vector<std::string> cite_ids;    // ids cited on this heading
    std::vector<OutlineNode> children;

    bool operator==(const OutlineNode&) const = default;
};

/// An outline.  Emptiness is an explicit state (no root), distinct from a
/// root that merely has no children.
struct Outline {
    std::optional<OutlineNode> root;

    bool empty() const { return !root.has_value(); }
    bool operator==(const Outline&) const = default;
};

/// True when a heading terminates with an interrogative marker
/// ('?' or full-width '？').
inline bool is_interrogative(std::string_view heading) {
    std::string t = trim(heading);
    if (t.empty()) return false;
    if (t.back() == '?') return true;
    static const std::string fullwidth = "\xEF\xBC\x9F";  // U+FF1F
    return t.size() >= 3 && t.compare(t.size() - 3, 3, fullwidth) == 0;
}

/// Strip one terminal interrogative marker, if present.
inline std::string strip_interrogative(std::string_view heading) {
    std::string t = trim(heading);
    if (!t.empty() && t.back() == '?') {
        t.pop_back();
        return trim(t);
    }
    static const std::string fullwidth = "\xEF\xBC\x9F";
    if (t.size() >= 3 && t.compare(t.size() - 3, 3, fullwidth) == 0) {
        t.erase(t.size() - 3);
        return trim(t);
    }
    return t;
}

/// True when the id follows the bank's `turn_{round}_{index}` grammar.
inline bool is_standard_doc_id(std::string_view id) {
    static const std::regex re(R"(^turn_\d+_\d+$)");
    return std::regex_match(id.begin(), id.end(), re);
}

namespace detail {

/// Remove every `<cite>...</cite>` tag from a line, collecting ids in order.
/// Throws MalformedOutline when a tag opens but never closes on the line.
inline std::string strip_cite_tags(const std::string& line, std::vector<std::string>& ids,
                                   std::vector<std::string>* warnings) {
    std::string out;
    size_t pos = 0;
    while (true) {
        size_t open = line.find("<cite>", pos);
        if (open == std::string::npos) {
            out += line.substr(pos);
            break;
        }
        size_t close = line.find("</cite>", open);
        if (close == std::string::npos) {
            throw MalformedOutline("unclosed cite tag", line);
        }
        out += line.substr(pos, open - pos);
        std::string inner = line.substr(open + 6, close - (open + 6));
        for (const auto& raw : split(inner, ',')) {
            std::string id = trim(raw);
            if (id.empty()) continue;
            if (!is_standard_doc_id(id) && warnings) {
                warnings->push_back("non-standard citation id kept verbatim: " + id);
            }
            ids.push_back(id);
        }
        pos = close + 7;
    }
    return out;
}

inline int heading_level(const std::string& line) {
    size_t n = 0;
    while (n < line.size() && line[n] == '#') ++n;
    if (n == 0 || n > 6) return 0;
    if (n < line.size() && line[n] != ' ' && line[n] != '\t') return 0;
    return static_cast<int>(n);
}

} // namespace detail

/// Parse markdown text into an Outline.  Structural violations (multiple
/// roots, level jumps, level > 4, unclosed cite tags) throw MalformedOutline
/// with the offending line.  Recoverable oddities (body-line citations,
/// non-standard ids, text before the first heading) are reported through
/// `warnings` when provided.
inline Outline parse_outline(std::string_view text, std::vector<std::string>* warnings = nullptr) {
    Outline outline;
    if (trim(text).empty()) return outline;

    // Stack of pointers into the tree under construction, one per open level.
    std::vector<OutlineNode*> stack;

    for (const auto& raw_line : split(std::string(text), '\n')) {
        std::string line = raw_line;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string stripped = trim(line);
        if (stripped.empty()) continue;

        int level = detail::heading_level(stripped);
        if (level == 0) {
            // Body line: keep citation ids, attribute them to the nearest
            // heading, and note the position.
            std::vector<std::string> ids;
            detail::strip_cite_tags(stripped, ids, warnings);
            if (!ids.empty()) {
                if (stack.empty()) {
                    if (warnings) {
                        warnings->push_back(
                            "citation ids before any heading were dropped: " + join(ids, ", "));
                    }
                } else {
                    for (auto& id : ids) stack.back()->cite_ids.push_back(id);
                    if (warnings) {
                        warnings->push_back("citation on body line attributed to heading '" +
                                            stack.back()->heading + "'");
                    }
                }
            } else if (warnings && stack.empty()) {
                warnings->push_back("text before first heading ignored: " + stripped);
            }
            continue;
        }

        if (level > 4) throw MalformedOutline("heading level exceeds 4", stripped);

        OutlineNode node;
        node.level = level;
        std::vector<std::string> ids;
        std::string text_part = stripped.substr(static_cast<size_t>(level));
        node.heading = collapse_ws(detail::strip_cite_tags(text_part, ids, warnings));
        node.cite_ids = std::move(ids);
        if (node.heading.empty()) throw MalformedOutline("heading has no text", stripped);

        if (level == 1) {
            if (outline.root.has_value()) {
                throw MalformedOutline("multiple level-1 roots", stripped);
            }
            outline.root = std::move(node);
            stack.assign(1, &*outline.root);
            continue;
        }
        if (stack.empty()) {
            throw MalformedOutline("section appears before the title", stripped);
        }
        // Pop to the parent level.
        while (!stack.empty() && stack.back()->level >= level) stack.pop_back();
        if (stack.empty() || stack.back()->level != level - 1) {
            throw MalformedOutline("heading level jumps past its parent", stripped);
        }
        stack.back()->children.push_back(std::move(node));
        stack.push_back(&stack.back()->children.back());
    }
    return outline;
}

/// Render an outline back to markdown.  Inverse of parse_outline on valid
/// trees: parse(serialize(t)) == t.
inline std::string serialize_outline(const Outline& outline) {
    std::string out;
    if (outline.empty()) return out;
    std::vector<const OutlineNode*> todo{&*outline.root};
    // Explicit preorder walk without recursion limits.
    std::function<void(const OutlineNode&)> emit = [&](const OutlineNode& node) {
        out.append(static_cast<size_t>(node.level), '#');
        out.push_back(' ');
        out += node.heading;
        if (!node.cite_ids.empty()) {
            out += " <cite>" + join(node.cite_ids, ", ") + "</cite>";
        }
        out.push_back('\n');
        for (const auto& child : node.children) emit(child);
    };
    emit(*outline.root);
    return out;
}

/// All cited ids in preorder, first occurrence kept, duplicates dropped.
inline std::vector<std::string> extract_citations(const Outline& outline) {
    std::vector<std::string> ids;
    if (outline.empty()) return ids;
    std::function<void(const OutlineNode&)> walk = [&](const OutlineNode& node) {
        for (const auto& id : node.cite_ids) {
            if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
        }
        for (const auto& child : node.children) walk(child);
    };
    walk(*outline.root);
    return ids;
}

/// Hard structural invariants.  Empty vector means the tree is well-formed.
inline std::vector<std::string> validate_outline(const Outline& outline) {
    std::vector<std::string> errors;
    if (outline.empty()) return errors;
    if (outline.root->level != 1) errors.push_back("root level must be 1");
    std::function<void(const OutlineNode&)> walk = [&](const OutlineNode& node) {
        if (node.level < 1 || node.level > 4) {
            errors.push_back("heading level out of range: '" + node.heading + "'");
        }
        if (trim(node.heading).empty()) errors.push_back("empty heading text");
        for (const auto& child : node.children) {
            if (child.level != node.level + 1) {
                errors.push_back("child level must be parent+1 at '" + child.heading + "'");
            }
            walk(child);
        }
    };
    walk(*outline.root);
    return errors;
}

/// Soft quality targets.  These come from the outline-generation guidelines
/// and are advisory: reported, never fatal.
struct OutlineLintOptions {
    int min_sections = 7;     // target band for top-level sections
    int max_sections = 10;
    int min_citations = 100;  // target band for distinct cited documents
    int max_citations = 200;
};

inline std::vector<std::string> lint_outline(const Outline& outline,
                                             const OutlineLintOptions& opts = {}) {
    std::vector<std::string> findings;
    if (outline.empty()) {
        findings.push_back("outline is empty");
        return findings;
    }
    int sections = static_cast<int>(outline.root->children.size());
    if (sections < opts.min_sections || sections > opts.max_sections) {
        findings.push_back("top-level section count " + std::to_string(sections) +
                           " outside target band [" + std::to_string(opts.min_sections) + ", " +
                           std::to_string(opts.max_sections) + "]");
    }
    int cited = static_cast<int>(extract_citations(outline).size());
    if (cited < opts.min_citations || cited > opts.max_citations) {
        findings.push_back("outline cites " + std::to_string(cited) +
                           " documents; target band [" + std::to_string(opts.min_citations) +
                           ", " + std::to_string(opts.max_citations) + "]");
    }
    std::function<void(const OutlineNode&)> walk = [&](const OutlineNode& node) {
        if (!node.children.empty() && is_interrogative(node.heading)) {
            findings.push_back("non-leaf heading is interrogative: '" + node.heading + "'");
        }
        for (const auto& child : node.children) walk(child);
    };
    walk(*outline.root);

    // The opening section should answer the query directly rather than warm up.
    if (sections > 0) {
        static const char* kBoilerplate[] = {"executive summary", "background", "introduction",
                                             "overview", "research significance", "methodology",
                                             "why this matters"};
        std::string first = lower_ascii(outline.root->children.front().heading);
        for (const char* b : kBoilerplate) {
            if (first.rfind(b, 0) == 0) {
                findings.push_back("first section looks like preamble rather than a direct "
                                   "answer: '" +
                                   outline.root->children.front().heading + "'");
                break;
            }
        }
    }
    return findings;
}

} // namespace dre
