#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fnl {

// Base class so callers can catch all library errors in one handler.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A value left its mathematically legal domain (nonpositive wealth for a
// geometric average, misconfigured state-dependent coefficient, ...).
struct DomainError : Error {
    using Error::Error;
};

// A simulated path crossed the configured guard bound; the scenario or the
// step size is unstable, not the dynamics.
struct NumericalBlowup : Error {
    using Error::Error;
};

// psi >= 1 - eps: the aggregation fixed point has no usable solution.
struct SingularEquilibrium : Error {
    using Error::Error;
};

// Fixed-point iteration exhausted max_iter without meeting tol.
struct NoConvergence : Error {
    using Error::Error;
};

// A conditional mean was requested from fewer than two replications.
struct InsufficientReplications : Error {
    using Error::Error;
};

// Wasserstein distance between empirical measures of different atom counts.
struct SizeMismatch : Error {
    using Error::Error;
};

// Configuration text is syntactically malformed; carries line/column.
struct ParseError : Error {
    int line = 0;
    int column = 0;
    ParseError(const std::string& msg, int line_, int column_)
        : Error("parse error at line " + std::to_string(line_) + ", column " +
                std::to_string(column_) + ": " + msg),
          line(line_),
          column(column_) {}
};

// Configuration parsed but violates semantic constraints; carries the full list.
struct ValidationError : Error {
    std::vector<std::string> violations;
    explicit ValidationError(std::vector<std::string> v)
        : Error(join(v)), violations(std::move(v)) {}

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "invalid configuration:";
        for (const auto& m : v) {
            s += "\n  - " + m;
        }
        return s;
    }
};

} // namespace fnl
