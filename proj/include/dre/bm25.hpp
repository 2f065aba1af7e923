/// @file bm25.hpp
/// @brief Inverted-index BM25 ranking (k1 = 1.2, b = 0.75) with a
///        non-negative idf and recency tie-breaking.
///
/// Scoring: for unique query tokens q (first-occurrence order),
///   score(D) = Σ_q idf(q) · tf(q,D)·(k1+1) / (tf(q,D) + k1·(1 − b + b·|D|/avgdl))
/// with idf(q) = ln(1 + (N − df + 0.5)/(df + 0.5)).  The idf variant never
/// goes negative, so on a one-document corpus a document scores > 0 exactly
/// when it shares a token with the query.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dre/text.hpp"

namespace dre {

inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;

struct Bm25Hit {
    size_t doc = 0;      // insertion index (doubles as recency: larger = newer)
    double score = 0.0;
};

/// BM25 over short texts.  Documents are added in insertion order; ties in
/// score resolve newest-first.
class Bm25Index {
public:
    explicit Bm25Index(double k1 = kBm25K1, double b = kBm25B) : m_k1(k1), m_b(b) {}

    /// Add a document; returns its insertion index.
    size_t add(const std::string& text) {
        size_t doc = m_doc_len.size();
        auto tokens = tokenize(text);
        m_doc_len.push_back(tokens.size());
        m_total_len += tokens.size();
        std::map<std::string, uint32_t> tf;
        for (const auto& t : tokens) ++tf[t];
        for (const auto& [term, count] : tf) {
            m_postings[term].push_back({doc, count});
        }
        return doc;
    }

    size_t size() const { return m_doc_len.size(); }

    /// Rank all documents against the query; returns up to `top_k` hits with
    /// score > 0, sorted by score descending, then newer (higher insertion
    /// index) first.
    std::vector<Bm25Hit> rank(const std::string& query, size_t top_k) const {
        std::vector<double> scores(m_doc_len.size(), 0.0);
        double n = static_cast<double>(m_doc_len.size());
        if (m_doc_len.empty()) return {};
        double avgdl = m_total_len == 0 ? 0.0 : static_cast<double>(m_total_len) / n;

        // Unique query tokens, first occurrence order, each counted once; the
        // per-token accumulation order is part of the scoring contract so an
        // independent reimplementation produces bit-identical sums.
        std::vector<std::string> terms;
        for (const auto& t : tokenize(query)) {
            if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
        }
        for (const auto& term : terms) {
            auto it = m_postings.find(term);
            if (it == m_postings.end()) continue;
            double df = static_cast<double>(it->second.size());
            double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            for (const auto& [doc, tf] : it->second) {
                double dl = static_cast<double>(m_doc_len[doc]);
                double norm = m_k1 * (1.0 - m_b + m_b * (avgdl == 0.0 ? 0.0 : dl / avgdl));
                scores[doc] += idf * (static_cast<double>(tf) * (m_k1 + 1.0)) /
                               (static_cast<double>(tf) + norm);
            }
        }

        std::vector<Bm25Hit> hits;
        for (size_t d = 0; d < scores.size(); ++d) {
            if (scores[d] > 0.0) hits.push_back({d, scores[d]});
        }
        std::sort(hits.begin(), hits.end(), [](const Bm25Hit& a, const Bm25Hit& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.doc > b.doc;  // recency: newest first
        });
        if (hits.size() > top_k) hits.resize(top_k);
        return hits;
    }

private:
    struct Posting {
        size_t doc;
        uint32_t tf;
    };

    double m_k1;
    double m_b;
    std::vector<size_t> m_doc_len;
    size_t m_total_len = 0;
    std::map<std::string, std::vector<Posting>> m_postings;
};

} // namespace dre
