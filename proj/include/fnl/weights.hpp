#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "fnl/coeffs.hpp"
#include "fnl/errors.hpp"

namespace fnl {

enum class Game { Cara, Crra };

// Equilibrium aggregates at one time point of one scenario. phi and psi are
// conditional expectations (given the common noise) of population averages;
// e1_pi_sigma solves the aggregation fixed point in closed form.
struct EquilibriumWeights {
    double phi_sigma = 0.0;    // E1[ avg mu*delta*sigma/Sigma ]
    double psi_sigma = 0.0;    // E1[ avg theta*sigma^2/Sigma ], CRRA with (1-delta)
    double e1_pi_sigma = 0.0;  // phi/(1 - psi), the aggregate E1[(pi sigma)]
    double e1_pi_mu = 0.0;     // E1[(pi mu)] at equilibrium
    double e1_pi2_Sigma = 0.0; // E1[(pi^2 Sigma)] at equilibrium
};

// The population aggregates the correction ODEs consume. At equilibrium they
// are the fields of EquilibriumWeights; under strategy overrides they are
// instead estimated from the realized strategy profile.
struct Aggregates {
    double e1_pi_sigma = 0.0;
    double e1_pi_mu = 0.0;
    double e1_pi2_Sigma = 0.0;
};

inline Aggregates aggregates(const EquilibriumWeights& w) {
    return Aggregates{w.e1_pi_sigma, w.e1_pi_mu, w.e1_pi2_Sigma};
}

inline constexpr double kSingularityEps = 1e-6;

// Best responses to a given exposure aggregate a = E1[(pi sigma)].
inline double cara_best_response(const CoefficientValues& v, double a) {
    return (v.mu * v.delta + v.theta * v.sigma * a) / v.Sigma;
}

inline double crra_best_response(const CoefficientValues& v, double a) {
    return (v.mu * v.delta + (1.0 - v.delta) * v.theta * v.sigma * a) / v.Sigma;
}

inline double best_response(Game g, const CoefficientValues& v, double a) {
    return g == Game::Cara ? cara_best_response(v, a) : crra_best_response(v, a);
}

namespace detail {

// values laid out replication-major: values[r*n + i] is agent i in
// replication r. The replication axis estimates E1 (the coefficient draws in
// different replications share the common-noise path by construction).
inline void check_axis(std::span<const CoefficientValues> values,
                       std::size_t n_agents) {
    if (n_agents == 0 || values.empty())
        throw SizeMismatch("weights: empty population");
    if (values.size() % n_agents != 0)
        throw SizeMismatch("weights: values not a whole number of replications");
}

inline EquilibriumWeights weights_impl(Game g,
                                       std::span<const CoefficientValues> values,
                                       std::size_t n_agents) {
    check_axis(values, n_agents);
    const std::size_t n_rep = values.size() / n_agents;
    double phi = 0.0, psi = 0.0;
    for (std::size_t r = 0; r < n_rep; ++r) {
        double p = 0.0, q = 0.0;
        for (std::size_t i = 0; i < n_agents; ++i) {
            const auto& v = values[r * n_agents + i];
            p += v.mu * v.delta * v.sigma / v.Sigma;
            const double w = g == Game::Cara ? v.theta : (1.0 - v.delta) * v.theta;
            q += w * v.sigma * v.sigma / v.Sigma;
        }
        phi += p / static_cast<double>(n_agents);
        psi += q / static_cast<double>(n_agents);
    }
    phi /= static_cast<double>(n_rep);
    psi /= static_cast<double>(n_rep);
    if (psi >= 1.0 - kSingularityEps)
        throw SingularEquilibrium("psi = " + std::to_string(psi) +
                                  " too close to 1: equilibrium aggregate blows up");
    EquilibriumWeights w;
    w.phi_sigma = phi;
    w.psi_sigma = psi;
    w.e1_pi_sigma = phi / (1.0 - psi);
    // Equilibrium aggregates of (pi mu) and (pi^2 Sigma), evaluated through
    // the per-agent optimal strategy at the solved exposure.
    double pm = 0.0, ps = 0.0;
    for (std::size_t r = 0; r < n_rep; ++r) {
        double m = 0.0, s = 0.0;
        for (std::size_t i = 0; i < n_agents; ++i) {
            const auto& v = values[r * n_agents + i];
            const double pi = best_response(g, v, w.e1_pi_sigma);
            m += pi * v.mu;
            s += pi * pi * v.Sigma;
        }
        pm += m / static_cast<double>(n_agents);
        ps += s / static_cast<double>(n_agents);
    }
    w.e1_pi_mu = pm / static_cast<double>(n_rep);
    w.e1_pi2_Sigma = ps / static_cast<double>(n_rep);
    return w;
}

} // namespace detail

inline EquilibriumWeights cara_weights(std::span<const CoefficientValues> values,
                                       std::size_t n_agents) {
    return detail::weights_impl(Game::Cara, values, n_agents);
}

inline EquilibriumWeights crra_weights(std::span<const CoefficientValues> values,
                                       std::size_t n_agents) {
    return detail::weights_impl(Game::Crra, values, n_agents);
}

inline EquilibriumWeights equilibrium_weights(
    Game g, std::span<const CoefficientValues> values, std::size_t n_agents) {
    return detail::weights_impl(g, values, n_agents);
}

inline double cara_strategy(const CoefficientValues& v,
                            const EquilibriumWeights& w) {
    return cara_best_response(v, w.e1_pi_sigma);
}

inline double crra_strategy(const CoefficientValues& v,
                            const EquilibriumWeights& w) {
    return crra_best_response(v, w.e1_pi_sigma);
}

inline double equilibrium_strategy(Game g, const CoefficientValues& v,
                                   const EquilibriumWeights& w) {
    return best_response(g, v, w.e1_pi_sigma);
}

// Iterates a -> aggregation(a) to a fixed point. The closed-form weights are
// tested against this independent route: the map below is the "multiply the
// best response by sigma and average" step of the equilibrium construction.
template <typename Map>
double fixed_point_solve(Map&& aggregation, double initial, double tol,
                         int max_iter) {
    if (!(tol > 0.0)) throw DomainError("fixed_point_solve: tol must be positive");
    double a = initial;
    for (int it = 0; it < max_iter; ++it) {
        const double next = aggregation(a);
        if (std::fabs(next - a) <= tol) return next;
        a = next;
    }
    throw NoConvergence("fixed point did not converge; psi is likely near 1");
}

// The aggregation map for a fixed population of coefficient draws.
inline auto aggregation_map(Game g, std::span<const CoefficientValues> values,
                            std::size_t n_agents) {
    detail::check_axis(values, n_agents);
    return [g, values, n_agents](double a) {
        const std::size_t n_rep = values.size() / n_agents;
        double acc = 0.0;
        for (std::size_t r = 0; r < n_rep; ++r) {
            double s = 0.0;
            for (std::size_t i = 0; i < n_agents; ++i) {
                const auto& v = values[r * n_agents + i];
                s += v.sigma * best_response(g, v, a);
            }
            acc += s / static_cast<double>(n_agents);
        }
        return acc / static_cast<double>(n_rep);
    };
}

} // namespace fnl
