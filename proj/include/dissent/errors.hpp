#pragma once

#include <stdexcept>
#include <string>

namespace dissent {

// Process exit codes used by the CLI. Every library error maps onto one.
enum class ExitCode : int {
    ok = 0,
    usage = 2,
    numerical = 3,
    invariant = 4,
};

class Error : public std::runtime_error {
public:
    Error(const std::string& what, ExitCode code)
        : std::runtime_error(what), code_(code) {}
    ExitCode exit_code() const noexcept { return code_; }

private:
    ExitCode code_;
};

// Bad arguments, unknown names, out-of-range windows.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(what, ExitCode::usage) {}
};

class RangeError : public UsageError {
public:
    explicit RangeError(const std::string& what) : UsageError(what) {}
};

// A physical or structural invariant does not hold (non-PSD covariance,
// populations not summing to one, ...).
class InvariantViolation : public Error {
public:
    explicit InvariantViolation(const std::string& what)
        : Error(what, ExitCode::invariant) {}
};

class NumericalFailure : public Error {
public:
    explicit NumericalFailure(const std::string& what)
        : Error(what, ExitCode::numerical) {}
};

// Division by a vanishing quantity (zero polarization, mu == nu, ...).
class DegenerateError : public NumericalFailure {
public:
    explicit DegenerateError(const std::string& what) : NumericalFailure(what) {}
};

// A measurement carries no information about the quantity asked for.
class NoInformationError : public NumericalFailure {
public:
    explicit NoInformationError(const std::string& what) : NumericalFailure(what) {}
};

class StiffnessError : public NumericalFailure {
public:
    explicit StiffnessError(const std::string& what) : NumericalFailure(what) {}
};

class IntegrationError : public NumericalFailure {
public:
    explicit IntegrationError(const std::string& what) : NumericalFailure(what) {}
};

class StatisticsError : public NumericalFailure {
public:
    explicit StatisticsError(const std::string& what) : NumericalFailure(what) {}
};

class AliasingError : public NumericalFailure {
public:
    explicit AliasingError(const std::string& what) : NumericalFailure(what) {}
};

const char* version() noexcept;

}  // namespace dissent
