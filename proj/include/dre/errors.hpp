/// @file errors.hpp
/// @brief Error taxonomy for the research engine.
///
/// Every failure the engine raises deliberately derives from dre::Error so
/// callers can catch one base type at the pipeline boundary.  Subtypes are
/// deliberately fine-grained: tests and the CLI distinguish transport
/// failures (retryable) from contract violations (not retryable).

#pragma once

#include <stdexcept>
#include <string>

namespace dre {

/// Base class for all engine errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Configuration file missing, unreadable, or semantically invalid
/// (e.g. min_rounds > max_rounds).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config error: " + what) {}
};

/// Provider endpoint unreachable, auth token missing, or connection refused.
class ProviderUnavailable : public Error {
public:
    explicit ProviderUnavailable(const std::string& what)
        : Error("provider unavailable: " + what) {}
};

/// Provider reached but it rejected the request (non-2xx status).
class ProviderRefused : public Error {
public:
    explicit ProviderRefused(const std::string& what) : Error("provider refused: " + what) {}
};

/// Provider did not answer within the configured deadline.
class ProviderTimeout : public Error {
public:
    explicit ProviderTimeout(const std::string& what) : Error("provider timeout: " + what) {}
};

/// Model output could not be coerced into the expected structure after the
/// configured number of retries.
class ParseFailure : public Error {
public:
    explicit ParseFailure(const std::string& what) : Error("parse failure: " + what) {}
};

/// Outline text violates the heading grammar.  Carries the offending line.
class MalformedOutline : public Error {
public:
    MalformedOutline(const std::string& what, const std::string& line)
        : Error("malformed outline: " + what + " [line: " + line + "]"), m_line(line) {}

    const std::string& line() const { return m_line; }

private:
    std::string m_line;
};

/// A document id was referenced that the bank does not know.
class UnknownId : public Error {
public:
    explicit UnknownId(const std::string& id) : Error("unknown document id: " + id) {}
};

/// An operation that needs at least one recorded round got an empty trajectory.
class EmptyTrajectory : public Error {
public:
    EmptyTrajectory() : Error("trajectory has no rated rounds") {}
};

/// Durable state could not be written or read back.
class PersistenceFailure : public Error {
public:
    explicit PersistenceFailure(const std::string& what)
        : Error("persistence failure: " + what) {}
};

/// A file listed for snapshotting does not exist.
class MissingTrackedFile : public Error {
public:
    explicit MissingTrackedFile(const std::string& path)
        : Error("missing tracked file: " + path) {}
};

/// Query miner returned a list outside the allowed size band.
class LengthViolation : public Error {
public:
    explicit LengthViolation(const std::string& what) : Error("length violation: " + what) {}
};

/// Classifier returned a label outside the closed category set.
class UnknownCategory : public Error {
public:
    explicit UnknownCategory(const std::string& label)
        : Error("unknown category label: " + label) {}
};

} // namespace dre
