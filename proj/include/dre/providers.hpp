/// @file providers.hpp
/// @brief Model and search provider interfaces, the live HTTP
///        implementations, and centralized structured-output parsing.
///
/// The live chat client speaks the generic chat-completion protocol: POST to
/// the configured endpoint with a bearer token read from an environment
/// variable, messages in the body, completion text in
/// choices[0].message.content.  Search providers return normalized
/// (url, title, content) records; search failures degrade to an empty result
/// list with a warning rather than an exception, so one dead query never
/// kills a round.

#pragma once

#include <cstdlib>
#include <memory>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

#include "dre/errors.hpp"
#include "dre/util.hpp"

namespace dre {

// ---------------------------------------------------------------------------
// Request / result records
// ---------------------------------------------------------------------------

/// One completion request.  `role` is an engine-internal routing tag (which
/// agent built the request); live providers ignore it, deterministic mocks
/// dispatch on it.
struct CompletionRequest {
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.2;
    int max_output_tokens = 4096;
    std::string role;
};

/// One normalized search hit.
struct SearchResult {
    std::string url;
    std::string title;
    std::string content;

    bool operator==(const SearchResult&) const = default;
};

inline void to_json(nlohmann::json& j, const SearchResult& r) {
    j = nlohmann::json{{"url", r.url}, {"title", r.title}, {"content", r.content}};
}

inline void from_json(const nlohmann::json& j, SearchResult& r) {
    r.url = j.value("url", "");
    r.title = j.value("title", "");
    r.content = j.value("content", "");
}

// ---------------------------------------------------------------------------
// Interfaces
// ---------------------------------------------------------------------------

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string complete(const CompletionRequest& request) = 0;
    virtual std::string name() const { return "chat"; }
};

class SearchProvider {
public:
    virtual ~SearchProvider() = default;
    /// Up to `top_k` results.  Degrades to empty on failure (with a warning).
    virtual std::vector<SearchResult> search(const std::string& query, int top_k) = 0;
    virtual std::string name() const { return "search"; }
};

// ---------------------------------------------------------------------------
// Structured-output parsing
// ---------------------------------------------------------------------------

namespace detail {

/// Remove Markdown code-fence lines, keeping their contents.
inline std::string strip_code_fences(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (const auto& line : split(text, '\n')) {
        std::string t = trim(line);
        if (t.rfind("```", 0) == 0) continue;
        out += line;
        out.push_back('\n');
    }
    return out;
}

/// Locate the first balanced top-level `open`...`close` region, honoring
/// string literals and escapes.  Returns npos when none exists.
inline std::string first_balanced(const std::string& text, char open, char close) {
    size_t start = text.find(open);
    while (start != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        for (size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (c == '\\') { ++i; continue; }
                if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') { in_string = true; continue; }
            if (c == open) ++depth;
            else if (c == close) {
                --depth;
                if (depth == 0) return text.substr(start, i - start + 1);
            }
        }
        start = text.find(open, start + 1);
    }
    return {};
}

} // namespace detail

/// Extract the first top-level JSON object (or array) from free-form model
/// output: fenced code blocks are stripped first, then the first balanced
/// region is parsed.  Throws ParseFailure when nothing parses.
inline nlohmann::json extract_json(const std::string& text, bool expect_array = false) {
    std::string body = detail::strip_code_fences(text);
    char open = expect_array ? '[' : '{';
    char close = expect_array ? ']' : '}';
    std::string candidate = detail::first_balanced(body, open, close);
    if (candidate.empty()) {
        throw ParseFailure(std::string("no balanced JSON ") +
                           (expect_array ? "array" : "object") + " in model output");
    }
    try {
        return nlohmann::json::parse(candidate);
    } catch (const nlohmann::json::exception& e) {
        throw ParseFailure(std::string("JSON parse error: ") + e.what());
    }
}

/// Request a completion and coerce it into JSON, re-requesting on parse
/// failure up to `retries` additional times before giving up.
inline nlohmann::json request_json(ChatProvider& provider, const CompletionRequest& request,
                                   bool expect_array = false, int retries = 2) {
    std::string last_error;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        std::string text = provider.complete(request);
        try {
            return extract_json(text, expect_array);
        } catch (const ParseFailure& e) {
            last_error = e.what();
            if (attempt < retries) {
                log_warn("structured output attempt " + std::to_string(attempt + 1) +
                         " failed (" + request.role + "); retrying");
            }
        }
    }
    throw ParseFailure("giving up after retries (" + request.role + "): " + last_error);
}

// ---------------------------------------------------------------------------
// Live HTTP providers
// ---------------------------------------------------------------------------

struct HttpProviderConfig {
    std::string endpoint;      // e.g. "http://127.0.0.1:8089/v1/chat/completions"
    std::string api_key_env;   // environment variable holding the bearer token
    std::string model;
    int timeout_ms = 60000;
    int max_in_flight = 4;     // concurrent request cap
};

namespace detail {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // /path...
};

inline ParsedUrl split_url(const std::string& url) {
    size_t scheme = url.find("://");
    size_t path_start = scheme == std::string::npos ? url.find('/')
                                                    : url.find('/', scheme + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace detail

} // namespace dre

// httplib is pulled in only here; it is heavy and nothing else needs it.
#ifndef DRE_NO_HTTP
#include <httplib.h>

namespace dre {

/// Generic chat-completion client.
class HttpChatProvider : public ChatProvider {
public:
    explicit HttpChatProvider(HttpProviderConfig config)
        : m_config(std::move(config)),
          m_in_flight(std::max(1, m_config.max_in_flight)) {}

    std::string name() const override { return "http:" + m_config.model; }

    std::string complete(const CompletionRequest& request) override {
        const char* key = m_config.api_key_env.empty()
                              ? nullptr
                              : std::getenv(m_config.api_key_env.c_str());
        if (!key || !*key) {
            throw ProviderUnavailable("auth token not set in $" + m_config.api_key_env);
        }
        nlohmann::json body{
            {"model", m_config.model},
            {"messages",
             {{{"role", "system"}, {"content", request.system_prompt}},
              {{"role", "user"}, {"content", request.user_prompt}}}},
            {"temperature", request.temperature},
            {"max_tokens", request.max_output_tokens},
        };

        auto [origin, path] = detail::split_url(m_config.endpoint);
        m_in_flight.acquire();
        struct Release {
            std::counting_semaphore<>& sem;
            ~Release() { sem.release(); }
        } release{m_in_flight};

        httplib::Client client(origin);
        client.set_connection_timeout(0, m_config.timeout_ms * 1000LL);
        client.set_read_timeout(m_config.timeout_ms / 1000, (m_config.timeout_ms % 1000) * 1000);
        httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            auto err = res.error();
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
                throw ProviderTimeout("no response within " +
                                      std::to_string(m_config.timeout_ms) + " ms");
            }
            throw ProviderUnavailable("transport error contacting " + origin);
        }
        if (res->status < 200 || res->status >= 300) {
            throw ProviderRefused("status " + std::to_string(res->status) + ": " +
                                  utf8_prefix(res->body, 200));
        }
        try {
            auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseFailure(std::string("malformed completion envelope: ") + e.what());
        }
    }

private:
    HttpProviderConfig m_config;
    std::counting_semaphore<> m_in_flight;
};

/// Search client for HTTP engines.  POSTs {query, top_k, engine} and expects
/// {"results": [{url, title, content}]}.  Any failure degrades to an empty
/// list with a warning.
class HttpSearchProvider : public SearchProvider {
public:
    HttpSearchProvider(HttpProviderConfig config, std::string engine)
        : m_config(std::move(config)), m_engine(std::move(engine)) {}

    std::string name() const override { return "http-search:" + m_engine; }

    std::vector<SearchResult> search(const std::string& query, int top_k) override {
        try {
            return search_or_throw(query, top_k);
        } catch (const Error& e) {
            log_warn("search degraded to empty result list for '" + query + "': " + e.what());
            return {};
        }
    }

private:
    std::vector<SearchResult> search_or_throw(const std::string& query, int top_k) {
        const char* key = m_config.api_key_env.empty()
                              ? nullptr
                              : std::getenv(m_config.api_key_env.c_str());
        nlohmann::json body{{"query", query}, {"top_k", top_k}, {"engine", m_engine}};
        auto [origin, path] = detail::split_url(m_config.endpoint);
        httplib::Client client(origin);
        client.set_read_timeout(m_config.timeout_ms / 1000, (m_config.timeout_ms % 1000) * 1000);
        httplib::Headers headers;
        if (key && *key) headers.insert({"Authorization", std::string("Bearer ") + key});
        auto res = client.Post(path, headers, body.dump(), "application/json");
        if (!res) throw ProviderUnavailable("transport error contacting " + origin);
        if (res->status < 200 || res->status >= 300) {
            throw ProviderRefused("status " + std::to_string(res->status));
        }
        try {
            auto j = nlohmann::json::parse(res->body);
            std::vector<SearchResult> out;
            for (const auto& r : j.at("results")) {
                out.push_back(r.get<SearchResult>());
                if (static_cast<int>(out.size()) >= top_k) break;
            }
            return out;
        } catch (const nlohmann::json::exception& e) {
            throw ParseFailure(std::string("malformed search envelope: ") + e.what());
        }
    }

    HttpProviderConfig m_config;
    std::string m_engine;
};

} // namespace dre
#endif // DRE_NO_HTTP
