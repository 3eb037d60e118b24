#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fnl/coeffs.hpp"
#include "fnl/errors.hpp"
#include "fnl/measure.hpp"
#include "fnl/noise.hpp"
#include "fnl/strategy.hpp"
#include "fnl/weights.hpp"

namespace fnl {

enum class Dynamics { Arithmetic, Geometric };

inline constexpr double kArithmeticGuard = 1e12; // |X| bound
inline constexpr double kGeometricGuard = 50.0;  // |log X| bound

// Per-agent coefficient models; size 1 means one shared model.
struct ModelSet {
    std::span<const CoefficientModel> models;

    const CoefficientModel& for_agent(std::size_t i) const {
        if (models.empty()) throw SizeMismatch("ModelSet: no models");
        return models.size() == 1 ? models[0] : models[i];
    }
    bool uses_factor() const {
        for (const auto& m : models)
            if (m.uses_factor()) return true;
        return false;
    }
};

// Wealth paths of the full n-agent system across replications of one
// scenario, stored on the whole grid (step-major). The streaming engine in
// engine.hpp applies the same update kernels without storing the grid.
struct ParticleSystem {
    Dynamics dynamics = Dynamics::Arithmetic;
    std::size_t n_agents = 0;
    std::size_t n_replications = 0;
    std::size_t steps = 0;
    double dt = 0.0;

    std::vector<double> wealth;      // [(step*R + r)*n + i]
    std::vector<double> factor_path; // [step]
    std::vector<double> time_grid;   // [step]

    double& at(std::size_t step, std::size_t r, std::size_t i) {
        return wealth[(step * n_replications + r) * n_agents + i];
    }
    double at(std::size_t step, std::size_t r, std::size_t i) const {
        return wealth[(step * n_replications + r) * n_agents + i];
    }
    std::span<double> slice(std::size_t step) {
        return std::span<double>(wealth)
            .subspan(step * n_replications * n_agents, n_replications * n_agents);
    }
    std::span<const double> slice(std::size_t step) const {
        return std::span<const double>(wealth)
            .subspan(step * n_replications * n_agents, n_replications * n_agents);
    }
};

inline ParticleSystem make_system(Dynamics dyn, std::size_t n_agents,
                                  std::size_t n_replications, std::size_t steps,
                                  double dt, double x0,
                                  const FactorParams& factor = {}) {
    if (n_agents == 0 || n_replications == 0 || steps == 0)
        throw DomainError("make_system: counts must be >= 1");
    if (!(dt > 0.0)) throw DomainError("make_system: dt must be positive");
    if (dyn == Dynamics::Geometric && !(x0 > 0.0))
        throw DomainError("geometric dynamics requires positive initial wealth");
    ParticleSystem s;
    s.dynamics = dyn;
    s.n_agents = n_agents;
    s.n_replications = n_replications;
    s.steps = steps;
    s.dt = dt;
    s.wealth.assign((steps + 1) * n_replications * n_agents, x0);
    s.factor_path.assign(steps + 1, factor_initial(factor));
    s.time_grid.resize(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k)
        s.time_grid[k] = static_cast<double>(k) * dt;
    return s;
}

// One synchronized sweep at a time step: sample everyone's coefficients,
// estimate the weights if the strategy needs them, evaluate every pi.
// Shared by the grid-stepping functions here and the streaming engine so the
// two produce identical arithmetic.
struct StepEvaluation {
    std::vector<CoefficientValues> values; // [r*n + i]
    std::vector<double> pi;                // [r*n + i]
    EquilibriumWeights weights;            // meaningful iff strategy needs them
};

inline void evaluate_step(StepEvaluation& out, Game game,
                          const StrategyClosure& strategy, const ModelSet& models,
                          std::span<const double> wealth_slice,
                          std::size_t n_agents, double z, double t) {
    const std::size_t total = wealth_slice.size();
    out.values.resize(total);
    out.pi.resize(total);
    for (std::size_t j = 0; j < total; ++j)
        out.values[j] =
            sample(models.for_agent(j % n_agents), wealth_slice[j], z, t);
    if (strategy.needs_weights())
        out.weights = equilibrium_weights(game, out.values, n_agents);
    else
        out.weights = EquilibriumWeights{};
    for (std::size_t j = 0; j < total; ++j)
        out.pi[j] = strategy.evaluate(out.values[j], out.weights, j % n_agents);
}

namespace detail {

inline double advance_arithmetic(double x, double pi,
                                 const CoefficientValues& v, double dt,
                                 double dWi, double dW0) {
    const double next = x + pi * (v.mu * dt + v.nu * dWi + v.sigma * dW0);
    if (!(std::fabs(next) <= kArithmeticGuard))
        throw NumericalBlowup("arithmetic wealth exceeded guard bound");
    return next;
}

inline double advance_geometric(double x, double pi,
                                const CoefficientValues& v, double dt,
                                double dWi, double dW0) {
    // Exact lognormal increment for pi held constant over the step.
    const double dlog = pi * v.mu * dt - 0.5 * pi * pi * v.Sigma * dt +
                        pi * (v.nu * dWi + v.sigma * dW0);
    const double next = x * std::exp(dlog);
    if (!(next > 0.0) || !(std::fabs(std::log(next)) <= kGeometricGuard))
        throw NumericalBlowup("geometric wealth exceeded guard bound");
    return next;
}

inline void step_impl(ParticleSystem& sys, Game game,
                      const StrategyClosure& strategy, const ModelSet& models,
                      const NoiseBundle& noise, std::size_t step,
                      StepEvaluation& scratch) {
    if (step >= sys.steps) throw SizeMismatch("step index beyond grid");
    const double t = sys.time_grid[step];
    const double z = sys.factor_path[step];
    const double dW0 = noise.common(step);
    evaluate_step(scratch, game, strategy, models, sys.slice(step),
                  sys.n_agents, z, t);
    const std::size_t n = sys.n_agents;
    for (std::size_t r = 0; r < sys.n_replications; ++r) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = r * n + i;
            const double dWi = noise.idio(r, i, step);
            const double x = sys.at(step, r, i);
            sys.at(step + 1, r, i) =
                sys.dynamics == Dynamics::Arithmetic
                    ? advance_arithmetic(x, scratch.pi[j], scratch.values[j],
                                         sys.dt, dWi, dW0)
                    : advance_geometric(x, scratch.pi[j], scratch.values[j],
                                        sys.dt, dWi, dW0);
        }
    }
    // Shared factor advances on the same common increment.
    FactorParams fp;
    for (const auto& m : models.models)
        if (m.uses_factor()) fp = m.factor;
    sys.factor_path[step + 1] =
        models.uses_factor() ? factor_step(fp, z, sys.dt, dW0) : z;
}

} // namespace detail

inline void step_arithmetic(ParticleSystem& sys, const StrategyClosure& strategy,
                            const CoefficientModel& model,
                            const NoiseBundle& noise, std::size_t step) {
    if (sys.dynamics != Dynamics::Arithmetic)
        throw DomainError("step_arithmetic on non-arithmetic system");
    StepEvaluation scratch;
    const ModelSet ms{std::span<const CoefficientModel>(&model, 1)};
    detail::step_impl(sys, strategy.base_game, strategy, ms, noise, step, scratch);
}

inline void step_geometric(ParticleSystem& sys, const StrategyClosure& strategy,
                           const CoefficientModel& model,
                           const NoiseBundle& noise, std::size_t step) {
    if (sys.dynamics != Dynamics::Geometric)
        throw DomainError("step_geometric on non-geometric system");
    StepEvaluation scratch;
    const ModelSet ms{std::span<const CoefficientModel>(&model, 1)};
    detail::step_impl(sys, strategy.base_game, strategy, ms, noise, step, scratch);
}

inline EmpiricalMeasure empirical_measure(const ParticleSystem& sys,
                                          std::size_t replication,
                                          std::size_t step) {
    if (replication >= sys.n_replications || step > sys.steps)
        throw SizeMismatch("empirical_measure: index out of range");
    EmpiricalMeasure m;
    m.atoms.resize(sys.n_agents);
    for (std::size_t i = 0; i < sys.n_agents; ++i)
        m.atoms[i] = sys.at(step, replication, i);
    return m;
}

} // namespace fnl
