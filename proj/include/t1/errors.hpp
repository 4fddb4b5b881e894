#pragma once

#include <stdexcept>
#include <string>

namespace t1 {

/// Base class for all library errors. Subclasses map onto CLI exit codes
/// (see tools/t1_main.cpp): config -> 2, backend -> 3, ingestion -> 4.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration: invalid RunConfig values, unknown keys, missing files,
/// incompatible mode combinations.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Prompt template rendering failure (unfilled placeholder, unknown template).
class TemplateError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Remote backend failure after exhausting retries, or malformed responses.
class BackendError : public Error {
public:
    using Error::Error;
};

/// Wire-contract violation by an external scoring endpoint (wrong score
/// count, out-of-range score, non-200 status).
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Dataset / corpus ingestion failure (malformed line, missing field,
/// duplicate id). Carries the offending location in the message.
class IngestionError : public Error {
public:
    using Error::Error;
};

/// Caller broke a documented precondition (e.g. scoring a candidate with no
/// rm_score attached).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// The host environment cannot support the request (missing interpreter,
/// unwritable directory). Distinct from failures of the untrusted snippet.
class EnvironmentError : public Error {
public:
    using Error::Error;
};

/// Mathematical parameter outside its admissible domain.
class DomainError : public Error {
public:
    using Error::Error;
};

} // namespace t1
