#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fnl/errors.hpp"
#include "fnl/stats.hpp"

namespace fnl {

// A population snapshot: equally weighted atoms, one per agent. Atom order
// follows agent index; nothing here assumes sortedness.
struct EmpiricalMeasure {
    std::vector<double> atoms;

    std::size_t size() const { return atoms.size(); }
    bool empty() const { return atoms.empty(); }
};

inline EmpiricalMeasure make_empirical(std::span<const double> states) {
    return EmpiricalMeasure{std::vector<double>(states.begin(), states.end())};
}

inline double arithmetic_average(std::span<const double> xs) {
    if (xs.empty()) throw SizeMismatch("arithmetic_average of empty measure");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double arithmetic_average(const EmpiricalMeasure& m) {
    return arithmetic_average(std::span<const double>(m.atoms));
}

// Geometric mean; atoms must be strictly positive (multiplicative wealth).
inline double geometric_average(std::span<const double> xs) {
    if (xs.empty()) throw SizeMismatch("geometric_average of empty measure");
    double s = 0.0;
    for (double x : xs) {
        if (!(x > 0.0))
            throw DomainError("geometric_average: nonpositive atom");
        s += std::log(x);
    }
    return std::exp(s / static_cast<double>(xs.size()));
}

inline double geometric_average(const EmpiricalMeasure& m) {
    return geometric_average(std::span<const double>(m.atoms));
}

// Estimate of E[Y | common noise] from per-replication values that share one
// common-noise path: plain cross-replication mean with its standard error.
// ("se" rather than "stderr": the latter is a reserved macro name.)
struct ConditionalMean {
    double estimate = 0.0;
    double se = 0.0;
};

inline ConditionalMean conditional_mean(std::span<const double> per_replication) {
    if (per_replication.size() < 2)
        throw InsufficientReplications(
            "conditional_mean needs at least 2 replications");
    RunningStat st;
    for (double v : per_replication) st.add(v);
    return ConditionalMean{st.mean(), st.stderr_mean()};
}

// Quadratic Wasserstein distance between two equally weighted atomic measures
// on the line, via the sorted (quantile) coupling — exact in one dimension.
inline double wasserstein2(std::span<const double> mu, std::span<const double> nu) {
    if (mu.empty() || nu.empty())
        throw SizeMismatch("wasserstein2: empty measure");
    if (mu.size() != nu.size())
        throw SizeMismatch("wasserstein2: atom counts differ");
    std::vector<double> a(mu.begin(), mu.end());
    std::vector<double> b(nu.begin(), nu.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / static_cast<double>(a.size()));
}

inline double wasserstein2(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    return wasserstein2(std::span<const double>(mu.atoms),
                        std::span<const double>(nu.atoms));
}

} // namespace fnl
