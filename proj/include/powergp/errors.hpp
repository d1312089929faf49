#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace powergp {

// Error families map one-to-one onto CLI exit codes.
enum class ErrorFamily : int {
    Parse = 2,           // malformed configs, files, expressions
    Infeasible = 3,      // operating point outside the model's validity
    Numeric = 4,         // non-convergence, domain violations, rank deficiency
    MissingArtifact = 5, // absent or stale pipeline inputs
};

class Error : public std::runtime_error {
public:
    Error(ErrorFamily family, const std::string& msg)
        : std::runtime_error(msg), family_(family) {}

    [[nodiscard]] ErrorFamily family() const noexcept { return family_; }

private:
    ErrorFamily family_;
};

struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(ErrorFamily::Parse, msg) {}
};

struct InvariantViolation : Error {
    explicit InvariantViolation(const std::string& msg) : Error(ErrorFamily::Parse, msg) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error(ErrorFamily::Parse, msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(ErrorFamily::MissingArtifact, msg) {}
};

struct MissingArtifact : Error {
    explicit MissingArtifact(const std::string& msg) : Error(ErrorFamily::MissingArtifact, msg) {}
};

struct DegenerateParameter : Error {
    explicit DegenerateParameter(const std::string& msg) : Error(ErrorFamily::Numeric, msg) {}
};

// Gate voltage cannot sustain the Miller plateau at the requested current:
// the operating point is infeasible, not a numerical bug.
struct InsufficientGateDrive : Error {
    explicit InsufficientGateDrive(const std::string& msg) : Error(ErrorFamily::Infeasible, msg) {}
};

struct ThermalNonConvergence : Error {
    explicit ThermalNonConvergence(const std::string& msg) : Error(ErrorFamily::Numeric, msg) {}
};

struct InfeasiblePoint : Error {
    InfeasiblePoint(std::size_t point, std::size_t condition, const std::string& cause)
        : Error(ErrorFamily::Infeasible,
                "infeasible grid point (i=" + std::to_string(point) +
                ", j=" + std::to_string(condition) + "): " + cause),
          point_index(point), condition_index(condition) {}

    std::size_t point_index;
    std::size_t condition_index;
};

struct EvalDomainError : Error {
    explicit EvalDomainError(const std::string& msg) : Error(ErrorFamily::Numeric, msg) {}
};

struct MissingCoefficient : Error {
    explicit MissingCoefficient(const std::string& msg) : Error(ErrorFamily::Numeric, msg) {}
};

struct RankDeficient : Error {
    explicit RankDeficient(const std::string& msg) : Error(ErrorFamily::Numeric, msg) {}
};

struct ZeroReference : Error {
    explicit ZeroReference(const std::string& msg) : Error(ErrorFamily::Numeric, msg) {}
};

} // namespace powergp
