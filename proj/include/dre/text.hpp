/// @file text.hpp
/// @brief Tokenization and query normalization shared by retrieval and the
///        critic's deduplication logic.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dre/util.hpp"

namespace dre {

/// True for code points that belong to CJK scripts (Han ideographs, kana,
/// Hangul).  These scripts carry no whitespace word boundaries, so tokens are
/// formed as character bigrams instead.
inline bool is_cjk(char32_t cp) {
    return (cp >= 0x3040 && cp <= 0x30FF)    // Hiragana, Katakana
        || (cp >= 0x3400 && cp <= 0x4DBF)    // CJK ext A
        || (cp >= 0x4E00 && cp <= 0x9FFF)    // CJK unified
        || (cp >= 0xF900 && cp <= 0xFAFF)    // CJK compatibility
        || (cp >= 0xAC00 && cp <= 0xD7AF);   // Hangul syllables
}

inline bool is_word_cp(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
               (cp >= 'A' && cp <= 'Z');
    }
    // Non-ASCII, non-CJK letters (accented Latin, Cyrillic, ...) count as
    // word characters; everything else splits.
    return !is_cjk(cp);
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

/// Lowercase (ASCII range), split on whitespace and punctuation, and emit
/// character bigrams for contiguous CJK runs (a run of length one yields the
/// single character).  Token order follows the input.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string word;
    std::vector<char32_t> cjk_run;

    auto flush_word = [&]() {
        if (!word.empty()) {
            tokens.push_back(word);
            word.clear();
        }
    };
    auto flush_cjk = [&]() {
        if (cjk_run.empty()) return;
        if (cjk_run.size() == 1) {
            std::string t;
            append_utf8(t, cjk_run[0]);
            tokens.push_back(t);
        } else {
            for (size_t i = 0; i + 1 < cjk_run.size(); ++i) {
                std::string t;
                append_utf8(t, cjk_run[i]);
                append_utf8(t, cjk_run[i + 1]);
                tokens.push_back(t);
            }
        }
        cjk_run.clear();
    };

    size_t i = 0;
    while (i < text.size()) {
        char32_t cp = utf8_next(text, i);
        if (cp < 0x80 && cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';
        if (is_cjk(cp)) {
            flush_word();
            cjk_run.push_back(cp);
        } else if (is_word_cp(cp)) {
            flush_cjk();
            append_utf8(word, cp);
        } else {
            flush_word();
            flush_cjk();
        }
    }
    flush_word();
    flush_cjk();
    return tokens;
}

/// Canonical form used when comparing search queries: trimmed, ASCII
/// lowercased, internal whitespace collapsed.  Idempotent.
inline std::string normalize_query(std::string_view q) {
    return collapse_ws(lower_ascii(trim(q)));
}

/// Jaccard similarity over unique token sets; used to pair up re-proposed
/// blueprints whose ids were not echoed back.
inline double token_jaccard(std::string_view a, std::string_view b) {
    auto ta = tokenize(a);
    auto tb = tokenize(b);
    std::vector<std::string> sa(ta.begin(), ta.end());
    std::vector<std::string> sb(tb.begin(), tb.end());
    std::sort(sa.begin(), sa.end());
    sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
    std::sort(sb.begin(), sb.end());
    sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
    if (sa.empty() && sb.empty()) return 0.0;
    size_t inter = 0;
    size_t ia = 0, ib = 0;
    while (ia < sa.size() && ib < sb.size()) {
        if (sa[ia] == sb[ib]) { ++inter; ++ia; ++ib; }
        else if (sa[ia] < sb[ib]) ++ia;
        else ++ib;
    }
    size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

} // namespace dre
