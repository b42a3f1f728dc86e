#pragma once

#include <stdexcept>
#include <string>

namespace spark {

/// Broad failure classes. Each maps to one CLI exit code.
enum class ErrorKind {
    usage,       // bad arguments or violated preconditions
    backend,     // transport, HTTP or scripted-mock failures
    parse,       // malformed model output or files
    validation,  // well-formed data that breaks a domain rule
    incomplete,  // pipeline stopped before producing a full report
};

int exit_code_for(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

#define SPARK_DEFINE_ERROR(Name, Kind)                                   \
    class Name : public Error {                                          \
    public:                                                              \
        explicit Name(const std::string& what) : Error(Kind, what) {}    \
    }

SPARK_DEFINE_ERROR(UsageError, ErrorKind::usage);

// backend
SPARK_DEFINE_ERROR(BackendError, ErrorKind::backend);

class RetriesExhaustedError : public BackendError {
public:
    RetriesExhaustedError(int attempts, const std::string& last)
        : BackendError("request failed after " + std::to_string(attempts) +
                       " attempts: " + last),
          attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

class HttpStatusError : public BackendError {
public:
    HttpStatusError(int status, std::string body)
        : BackendError("HTTP " + std::to_string(status) + ": " + body),
          status_(status), body_(std::move(body)) {}
    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

class TimeoutError : public BackendError {
public:
    using BackendError::BackendError;
};

class ScriptedMissError : public BackendError {
public:
    using BackendError::BackendError;
};

class ProtocolError : public BackendError {
public:
    using BackendError::BackendError;
};

class SearchError : public BackendError {
public:
    using BackendError::BackendError;
};

// parsing of model output and files
SPARK_DEFINE_ERROR(ParseError, ErrorKind::parse);
SPARK_DEFINE_ERROR(ValidationError, ErrorKind::validation);

class IngestionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};
class DimensionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};
class DuplicateError : public ValidationError {
public:
    using ValidationError::ValidationError;
};
class DegenerateVectorError : public ValidationError {
public:
    using ValidationError::ValidationError;
};
class EmptyIndexError : public ValidationError {
public:
    using ValidationError::ValidationError;
};
class FormatError : public ParseError {
public:
    using ParseError::ParseError;
};
class SplitError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

SPARK_DEFINE_ERROR(IncompleteError, ErrorKind::incomplete);

#undef SPARK_DEFINE_ERROR

}  // namespace spark
