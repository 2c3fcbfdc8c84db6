#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace catbench {

/// Broad failure classes. The CLI maps each onto a process exit code.
enum class ErrorKind {
    Usage,        // bad arguments, bad configuration
    Data,         // parse/validation/integrity/compatibility of input files
    External,     // embedding service or LLM endpoint misbehaved
    Numerical,    // optimizer produced non-finite values
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ArgumentError : Error {
    explicit ArgumentError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

/// Malformed input line. `line` is 1-based; 0 when not applicable.
struct ParseError : Error {
    ParseError(const std::string& what, std::size_t line)
        : Error(ErrorKind::Data, line ? "line " + std::to_string(line) + ": " + what : what), line(line) {}
    std::size_t line;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct IntegrityError : Error {
    explicit IntegrityError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct CompatibilityError : Error {
    explicit CompatibilityError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

/// No embedding cached for `key` (the text or image reference that was looked up).
struct MissingEmbeddingError : Error {
    explicit MissingEmbeddingError(const std::string& key)
        : Error(ErrorKind::Data, "missing embedding for key: " + key), key(key) {}
    std::string key;
};

/// A provider answered, but broke its contract (wrong dimension, non-finite entries).
struct ContractError : Error {
    explicit ContractError(const std::string& what) : Error(ErrorKind::External, what) {}
};

struct TransportError : Error {
    explicit TransportError(const std::string& what) : Error(ErrorKind::External, what) {}
};

/// LLM payload that could not be parsed or violated the response schema.
struct MalformedResponseError : Error {
    MalformedResponseError(const std::string& what, std::string raw)
        : Error(ErrorKind::External, what), raw(std::move(raw)) {}
    std::string raw;
};

/// Constrained-mode LLM payload naming a category outside the taxonomy.
struct ContractViolationError : Error {
    ContractViolationError(const std::string& what, std::string raw)
        : Error(ErrorKind::External, what), raw(std::move(raw)) {}
    std::string raw;
};

struct NumericalError : Error {
    NumericalError(const std::string& what, std::size_t iteration)
        : Error(ErrorKind::Numerical, what + " (iteration " + std::to_string(iteration) + ")"),
          iteration(iteration) {}
    std::size_t iteration;
};

struct BenchmarkError : Error {
    explicit BenchmarkError(const std::string& what) : Error(ErrorKind::External, what) {}
};

}  // namespace catbench
