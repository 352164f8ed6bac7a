#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace deepframe {

// One problem found while validating input, with a JSON-pointer style location.
struct Diagnostic {
    std::string location;
    std::string message;
};

// Invalid user input: malformed documents, inconsistent dimensions, bad shapes.
class SpecError : public std::runtime_error {
public:
    explicit SpecError(std::vector<Diagnostic> diagnostics);
    SpecError(std::string location, std::string message);

    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

// Numerical breakdown: NaN objectives, divergence, zero-norm columns during optimization.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string format_diagnostics(const std::vector<Diagnostic>& diagnostics);

}  // namespace deepframe
