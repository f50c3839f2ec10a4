#pragma once

#include <stdexcept>
#include <string>

namespace hrm {

// Base of every error raised by the library. Each subclass maps to one
// failure category so callers (and the CLI) can dispatch on type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SchemaError : public Error { using Error::Error; };
class DuplicateRecordError : public Error { using Error::Error; };
class ConsistencyError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class DegenerateError : public Error { using Error::Error; };
class ConvergenceError : public Error { using Error::Error; };
class EstimabilityError : public Error { using Error::Error; };
class PredictionError : public Error { using Error::Error; };
class StateError : public Error { using Error::Error; };
class InputError : public Error { using Error::Error; };
class NestingError : public Error { using Error::Error; };

}  // namespace hrm
