#pragma once

#include <stdexcept>
#include <string>

namespace ddlab {

// Every failure mode the numeric layers can hit gets its own type so the CLI
// can name it in the output and map it to an exit code. All of them carry a
// human-readable message; some carry the partial value computed so far.

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// precondition violations (bad geometry / parameter domain), CLI exit 2
struct GeometryViolation : Error {
    explicit GeometryViolation(const std::string& msg) : Error(msg) {}
};
struct DomainViolation : Error {
    explicit DomainViolation(const std::string& msg) : Error(msg) {}
};
struct NonPositiveDiffusion : DomainViolation {
    explicit NonPositiveDiffusion(const std::string& msg) : DomainViolation(msg) {}
};

// numerical failures, CLI exit 3; variant() gives the kebab-case name the
// CLI writes into the status column of a failed row
struct NumericalFailure : Error {
    explicit NumericalFailure(const std::string& msg) : Error(msg) {}
    virtual const char* variant() const { return "numerical-failure"; }
};
struct EigenfunctionUnavailable : NumericalFailure {
    explicit EigenfunctionUnavailable(const std::string& msg) : NumericalFailure(msg) {}
    const char* variant() const override { return "eigenfunction-unavailable"; }
};
struct NonConvergence : NumericalFailure {
    explicit NonConvergence(const std::string& msg) : NumericalFailure(msg) {}
    const char* variant() const override { return "non-convergence"; }
};
struct WindowTooWide : NumericalFailure {
    explicit WindowTooWide(const std::string& msg) : NumericalFailure(msg) {}
    const char* variant() const override { return "window-too-wide"; }
};
struct TailNotDecaying : NumericalFailure {
    explicit TailNotDecaying(const std::string& msg) : NumericalFailure(msg) {}
    const char* variant() const override { return "tail-not-decaying"; }
};
struct DivergentAcceleration : NumericalFailure {
    explicit DivergentAcceleration(const std::string& msg) : NumericalFailure(msg) {}
    const char* variant() const override { return "divergent-acceleration"; }
};
struct HorizonTooShort : NumericalFailure {
    explicit HorizonTooShort(const std::string& msg) : NumericalFailure(msg) {}
    const char* variant() const override { return "horizon-too-short"; }
};
struct NonFiniteState : NumericalFailure {
    explicit NonFiniteState(const std::string& msg) : NumericalFailure(msg) {}
    const char* variant() const override { return "non-finite-state"; }
};

// quadrature ran out of subdivisions; carries the best value so far
struct MaxDepthExceeded : NumericalFailure {
    MaxDepthExceeded(const std::string& msg, double partial, double err)
        : NumericalFailure(msg), partial_value(partial), error_bound(err) {}
    const char* variant() const override { return "max-depth-exceeded"; }
    double partial_value;
    double error_bound;
};

} // namespace ddlab
