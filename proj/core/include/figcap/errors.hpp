#pragma once

#include <stdexcept>
#include <string>

namespace figcap {

/// Root of every error this library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (bad k, length mismatch, ...).
class InvalidArgumentError : public Error {
public:
    using Error::Error;
};

/// Dataset or record file violates the documented schema. Carries the
/// offending field and 1-based line number when known (0 = not line-bound).
class SchemaError : public Error {
public:
    SchemaError(const std::string& message, std::string field = "", std::size_t line = 0)
        : Error(format(message, field, line)), field_(std::move(field)), line_(line) {}

    const std::string& field() const { return field_; }
    std::size_t line() const { return line_; }

private:
    static std::string format(const std::string& message, const std::string& field,
                              std::size_t line) {
        std::string out = message;
        if (!field.empty())
            out += " (field: " + field + ")";
        if (line != 0)
            out += " (line " + std::to_string(line) + ")";
        return out;
    }

    std::string field_;
    std::size_t line_;
};

/// Missing/invalid configuration: templates, backend registry, CLI wiring.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Statistic is undefined on this input (constant rater, zero rank variance).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// A model reply contained no parsable 1..6 score. Keeps the raw text.
class UnparseableScoreError : public Error {
public:
    explicit UnparseableScoreError(std::string raw_text)
        : Error("no parsable quality score in model reply"), raw_text_(std::move(raw_text)) {}

    const std::string& raw_text() const { return raw_text_; }

private:
    std::string raw_text_;
};

/// A generation reply violated the output protocol for its mode.
class GenerationParseError : public Error {
public:
    using Error::Error;
};

/// An image-bearing prompt was requested but an image_ref did not resolve.
class MissingImageError : public Error {
public:
    using Error::Error;
};

class BackendError : public Error {
public:
    using Error::Error;
};

/// Transient failure (connect error, 429, 5xx). The gateway retries these.
class TransportError : public BackendError {
public:
    using BackendError::BackendError;
};

class AuthError : public BackendError {
public:
    using BackendError::BackendError;
};

class MalformedReplyError : public BackendError {
public:
    using BackendError::BackendError;
};

class RetriesExhaustedError : public BackendError {
public:
    using BackendError::BackendError;
};

/// A store is missing predictions that an evaluation needs.
class MissingPredictionError : public Error {
public:
    using Error::Error;
};

/// An output dir holds a manifest from a different experiment spec.
class ManifestMismatchError : public Error {
public:
    using Error::Error;
};

/// Too large a fraction of tasks failed in one run.
class AggregateFailureError : public Error {
public:
    using Error::Error;
};

} // namespace figcap
