#pragma once

#include <stdexcept>
#include <string>

namespace pipad {

/// Process exit codes used by the command-line front end.
enum class exit_code : int {
    success = 0,
    usage = 2,
    data_validation = 3,
    capacity = 4,
};

/// Base of every error raised by the library. Carries the exit code the
/// CLI reports when the error escapes a command.
class Error : public std::runtime_error {
public:
    Error(const std::string& what, exit_code code)
        : std::runtime_error(what), code_(code)
    {}

    exit_code code() const noexcept { return code_; }

private:
    exit_code code_;
};

/// Bad argument or inconsistent call (shape mismatch, zero sizes, ...).
class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& what)
        : Error(what, exit_code::usage)
    {}
};

/// Malformed input data or a structure violating its invariants.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what)
        : Error(what, exit_code::data_validation)
    {}
};

class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t line)
        : ValidationError("line " + std::to_string(line) + ": " + what),
          line_(line)
    {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Node id, row index or similar outside its valid range.
class BoundsError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Request exceeding a modeled capacity (device memory, edge slots).
class CapacityError : public Error {
public:
    explicit CapacityError(const std::string& what)
        : Error(what, exit_code::capacity)
    {}
};

/// Execution configuration that cannot run the requested work.
class ConfigurationError : public Error {
public:
    explicit ConfigurationError(const std::string& what)
        : Error(what, exit_code::usage)
    {}
};

/// Second record of an already cached (key, epoch) at the same tier.
class IdempotencyError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// A plan that cannot be made from the collected statistics.
class PlanningError : public Error {
public:
    explicit PlanningError(const std::string& what)
        : Error(what, exit_code::data_validation)
    {}
};

/// Internal invariant of the simulator broken; never expected to fire.
class SimulationError : public Error {
public:
    explicit SimulationError(const std::string& what)
        : Error(what, exit_code::capacity)
    {}
};

}  // namespace pipad
