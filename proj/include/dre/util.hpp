/// @file util.hpp
/// @brief Small shared utilities: string handling, UTF-8 helpers, hashing,
///        a warning log, an injectable clock, and a deterministic parallel map.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <exception>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace dre {

// ---------------------------------------------------------------------------
// String helpers
// ---------------------------------------------------------------------------

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

/// Collapse internal runs of whitespace to a single space.
inline std::string collapse_ws(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool in_ws = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out.push_back(' ');
        in_ws = false;
        out.push_back(c);
    }
    return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.emplace_back(s.substr(start));
            break;
        }
        parts.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return parts;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += sep;
        out += parts[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// UTF-8 helpers
// ---------------------------------------------------------------------------

/// Decode the UTF-8 sequence starting at s[i]; advances i past it.
/// Malformed bytes decode as themselves (one byte) so we never loop forever.
inline char32_t utf8_next(std::string_view s, size_t& i) {
    unsigned char c0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](size_t k) {
        return i + k < s.size() &&
               (static_cast<unsigned char>(s[i + k]) & 0xC0u) == 0x80u;
    };
    if (c0 < 0x80u) { i += 1; return c0; }
    if ((c0 & 0xE0u) == 0xC0u && cont(1)) {
        char32_t cp = (c0 & 0x1Fu) << 6 | (static_cast<unsigned char>(s[i + 1]) & 0x3Fu);
        i += 2;
        return cp;
    }
    if ((c0 & 0xF0u) == 0xE0u && cont(1) && cont(2)) {
        char32_t cp = (c0 & 0x0Fu) << 12 |
                      (static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 6 |
                      (static_cast<unsigned char>(s[i + 2]) & 0x3Fu);
        i += 3;
        return cp;
    }
    if ((c0 & 0xF8u) == 0xF0u && cont(1) && cont(2) && cont(3)) {
        char32_t cp = (c0 & 0x07u) << 18 |
                      (static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 12 |
                      (static_cast<unsigned char>(s[i + 2]) & 0x3Fu) << 6 |
                      (static_cast<unsigned char>(s[i + 3]) & 0x3Fu);
        i += 4;
        return cp;
    }
    i += 1;
    return c0;
}

/// Number of code points in a UTF-8 string.
inline size_t utf8_length(std::string_view s) {
    size_t i = 0, n = 0;
    while (i < s.size()) { utf8_next(s, i); ++n; }
    return n;
}

/// First `max_cp` code points of a UTF-8 string (never cuts a sequence).
inline std::string utf8_prefix(std::string_view s, size_t max_cp) {
    size_t i = 0, n = 0;
    while (i < s.size() && n < max_cp) { utf8_next(s, i); ++n; }
    return std::string(s.substr(0, i));
}

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

/// FNV-1a 64-bit; used for prompt keying and derived identifiers.
inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Warning log
// ---------------------------------------------------------------------------

/// Process-wide warning sink.  Warnings always go to stderr; tests may attach
/// a capture buffer to assert on them.
class WarningLog {
public:
    static WarningLog& instance() {
        static WarningLog log;
        return log;
    }

    void warn(const std::string& msg) {
        std::lock_guard<std::mutex> lock(m_mutex);
        if (m_capture) m_capture->push_back(msg);
        if (m_echo) std::cerr << "[warn] " << msg << "\n";
    }

    void attach(std::vector<std::string>* capture) {
        std::lock_guard<std::mutex> lock(m_mutex);
        m_capture = capture;
    }

    void set_echo(bool on) {
        std::lock_guard<std::mutex> lock(m_mutex);
        m_echo = on;
    }

private:
    std::mutex m_mutex;
    std::vector<std::string>* m_capture = nullptr;
    bool m_echo = true;
};

inline void log_warn(const std::string& msg) { WarningLog::instance().warn(msg); }

/// RAII capture of warnings for tests; silences stderr echo while active.
class WarningCapture {
public:
    WarningCapture() {
        WarningLog::instance().attach(&m_messages);
        WarningLog::instance().set_echo(false);
    }
    ~WarningCapture() {
        WarningLog::instance().attach(nullptr);
        WarningLog::instance().set_echo(true);
    }
    const std::vector<std::string>& messages() const { return m_messages; }

    bool contains(std::string_view needle) const {
        return std::any_of(m_messages.begin(), m_messages.end(), [&](const std::string& m) {
            return m.find(needle) != std::string::npos;
        });
    }

private:
    std::vector<std::string> m_messages;
};

// ---------------------------------------------------------------------------
// Clock
// ---------------------------------------------------------------------------

/// Injectable time source.  Timestamps are compact UTC
/// (YYYYMMDDTHHMMSSmmmZ): sortable and filename-safe.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::string timestamp() = 0;
};

/// Wall-clock time with a strictly monotone tail so repeated calls within one
/// millisecond still sort.
class SystemClock : public Clock {
public:
    std::string timestamp() override {
        using namespace std::chrono;
        auto now = system_clock::now();
        auto ms = duration_cast<milliseconds>(now.time_since_epoch()).count();
        {
            std::lock_guard<std::mutex> lock(m_mutex);
            if (ms <= m_last) ms = m_last + 1;
            m_last = ms;
        }
        return format(ms);
    }

    static std::string format(int64_t epoch_ms) {
        std::time_t secs = static_cast<std::time_t>(epoch_ms / 1000);
        int millis = static_cast<int>(epoch_ms % 1000);
        std::tm tm{};
        gmtime_r(&secs, &tm);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%04d%02d%02dT%02d%02d%02d%03dZ", tm.tm_year + 1900,
                      tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, millis);
        return buf;
    }

private:
    std::mutex m_mutex;
    int64_t m_last = 0;
};

/// Deterministic clock: fixed base advanced one millisecond per call.
/// Used by mock runs so artifacts are byte-identical across reruns.
class FixedClock : public Clock {
public:
    explicit FixedClock(int64_t base_epoch_ms = 0) : m_next(base_epoch_ms) {}

    std::string timestamp() override {
        int64_t v = m_next.fetch_add(1);
        return SystemClock::format(v);
    }

private:
    std::atomic<int64_t> m_next;
};

// ---------------------------------------------------------------------------
// Deterministic parallel map
// ---------------------------------------------------------------------------

/// Apply `fn(i)` for i in [0, n) on up to `workers` threads.  Results land at
/// their input index, so output order never depends on scheduling.  The first
/// exception (by index) is rethrown after all threads join.
template <typename Fn>
auto parallel_map(size_t n, Fn&& fn, size_t workers)
    -> std::vector<decltype(fn(size_t{0}))> {
    using R = decltype(fn(size_t{0}));
    std::vector<R> results(n);
    if (n == 0) return results;
    workers = std::max<size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (size_t i = 0; i < n; ++i) results[i] = fn(i);
        return results;
    }
    std::vector<std::exception_ptr> errors(n);
    std::atomic<size_t> next{0};
    auto run = [&]() {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= n) break;
            try {
                results[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

} // namespace dre
