#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fnl/coeffs.hpp"
#include "fnl/corrections.hpp"
#include "fnl/errors.hpp"
#include "fnl/noise.hpp"
#include "fnl/strategy.hpp"
#include "fnl/system.hpp"
#include "fnl/weights.hpp"

namespace fnl {

// How the measure argument of the utility field is estimated from the
// simulated cloud. ConditionalMean pools the per-replication averages across
// replications (an estimate of the conditional law given the common noise,
// which all replications share); ReplicationAverage hands each replication its
// own finite-population average, which carries an O(1/n) fluctuation bias into
// the drift and is kept as a diagnostic mode.
enum class MeasureArgument { ConditionalMean, ReplicationAverage };

inline const char* name(MeasureArgument m) {
    return m == MeasureArgument::ConditionalMean ? "conditional_mean"
                                                 : "replication_average";
}

inline Dynamics dynamics_for(Game g) {
    return g == Game::Cara ? Dynamics::Arithmetic : Dynamics::Geometric;
}

// The measure argument lambda(mu) for one replication: arithmetic average of
// the slice for CARA, geometric average for CRRA.
inline double replication_lambda(Game game, std::span<const double> agents) {
    if (agents.empty()) throw SizeMismatch("replication_lambda: empty slice");
    if (game == Game::Cara) {
        double s = 0.0;
        for (double x : agents) s += x;
        return s / static_cast<double>(agents.size());
    }
    double s = 0.0;
    for (double x : agents) {
        if (!(x > 0.0))
            throw DomainError("replication_lambda: nonpositive wealth");
        s += std::log(x);
    }
    return std::exp(s / static_cast<double>(agents.size()));
}

// Cross-replication estimate of the conditional measure argument: the mean of
// per-replication arithmetic averages (CARA) or the exponential of the mean of
// per-replication log geometric averages (CRRA). Both reduce to the grand
// (arithmetic resp. geometric) mean over all replication*agent cells.
inline double conditional_lambda(Game game, std::span<const double> slice,
                                 std::size_t n_agents) {
    if (n_agents == 0 || slice.size() % n_agents != 0)
        throw SizeMismatch("conditional_lambda: slice/agent count mismatch");
    if (game == Game::Cara) {
        double s = 0.0;
        for (double x : slice) s += x;
        return s / static_cast<double>(slice.size());
    }
    double s = 0.0;
    for (double x : slice) {
        if (!(x > 0.0))
            throw DomainError("conditional_lambda: nonpositive wealth");
        s += std::log(x);
    }
    return std::exp(s / static_cast<double>(slice.size()));
}

struct EngineSpec {
    Game game = Game::Cara;
    std::size_t n_agents = 1;
    std::size_t n_replications = 1;
    std::size_t steps = 1;
    double dt = 1.0 / 64.0;
    double x0 = 1.0;
    std::uint64_t master_seed = 0;
    std::uint32_t scenario = 0;
    // Shift applied to agent indices when drawing idiosyncratic noise,
    // letting two populations coexist in one scenario (same common path,
    // disjoint idiosyncratic cells) — used by the convergence study's
    // reference cloud.
    std::size_t agent_offset = 0;
    VariantFlag variant = VariantFlag::Half;
    Quadrature quadrature = Quadrature::LeftEndpoint;
    bool track_corrections = true;
};

// Step-major streaming simulator. Holds the replication*agent wealth state at
// one grid point at a time, together with the personal correction processes
// K (and G for the CRRA log branch) accumulated from the aggregates realized
// by the strategy actually played. Observers are invoked at every grid point
// k = 0..steps with the state fully consistent at that point.
//
// The wealth updates reuse evaluate_step() and the advance kernels from
// system.hpp, and the noise is drawn from the same counter cells as
// generate_noise(), so a streamed path equals the grid-stepped path bitwise.
//
// The ModelSet is held by reference semantics (a span); the caller keeps the
// model storage alive for the engine's lifetime.
class SimulationEngine {
  public:
    SimulationEngine(const EngineSpec& spec, ModelSet models,
                     StrategyClosure strategy)
        : spec_(spec), models_(models), strategy_(std::move(strategy)),
          stream_(spec.master_seed, spec.scenario, spec.dt) {
        if (spec_.n_agents == 0 || spec_.n_replications == 0 ||
            spec_.steps == 0)
            throw DomainError("SimulationEngine: counts must be >= 1");
        if (!(spec_.dt > 0.0))
            throw DomainError("SimulationEngine: dt must be positive");
        if (dynamics() == Dynamics::Geometric && !(spec_.x0 > 0.0))
            throw DomainError(
                "SimulationEngine: geometric dynamics requires x0 > 0");
        factor_params_ = FactorParams{};
        for (const auto& m : models_.models)
            if (m.uses_factor()) factor_params_ = m.factor;
    }

    Dynamics dynamics() const { return dynamics_for(spec_.game); }
    const EngineSpec& spec() const { return spec_; }
    const ModelSet& models() const { return models_; }
    const StrategyClosure& strategy() const { return strategy_; }

    // State at the current grid point (valid inside an observer call).
    std::size_t grid_index() const { return k_; }
    double time() const { return static_cast<double>(k_) * spec_.dt; }
    double factor() const { return z_; }
    std::span<const double> wealth() const { return x_; }
    std::span<const double> corrections_K() const { return K_; }
    std::span<const double> corrections_G() const { return G_; }
    const StepEvaluation& eval() const { return eval_; }
    const EquilibriumWeights& weights() const { return eval_.weights; }
    const Aggregates& realized() const { return realized_; }
    // Common-noise increment of the step that led to the current point
    // (undefined at k = 0).
    double previous_common_increment() const { return last_dW0_; }

    std::size_t cells() const { return spec_.n_replications * spec_.n_agents; }

    // Run the scenario, invoking obs(*this) at every grid point 0..steps.
    template <typename Observer> void run(Observer&& obs) {
        reset();
        for (;;) {
            evaluate_current();
            if (spec_.track_corrections) {
                compute_rates();
                if (k_ > 0) finalize_corrections();
            }
            obs(*this);
            if (k_ == spec_.steps) break;
            advance();
        }
    }

    // Run and capture the full wealth grid (for measure snapshots and path
    // dumps at scales where storing every step is affordable).
    ParticleSystem run_to_system() {
        ParticleSystem sys =
            make_system(dynamics(), spec_.n_agents, spec_.n_replications,
                        spec_.steps, spec_.dt, spec_.x0, factor_params_);
        run([&sys](const SimulationEngine& e) {
            const auto w = e.wealth();
            auto dst = sys.slice(e.grid_index());
            for (std::size_t j = 0; j < w.size(); ++j) dst[j] = w[j];
            sys.factor_path[e.grid_index()] = e.factor();
        });
        return sys;
    }

  private:
    void reset() {
        const std::size_t total = cells();
        x_.assign(total, spec_.x0);
        K_.assign(total, spec_.game == Game::Cara ? 0.0 : 1.0);
        G_.assign(total, 0.0);
        rate_a_.assign(total, 0.0);
        rate_b_.assign(total, 0.0);
        pend_a_.assign(total, 0.0);
        pend_b_.assign(total, 0.0);
        z_ = factor_initial(factor_params_);
        k_ = 0;
        last_dW0_ = 0.0;
    }

    void evaluate_current() {
        evaluate_step(eval_, spec_.game, strategy_, models_, x_, spec_.n_agents,
                      z_, time());
        double s_ps = 0.0, s_pm = 0.0, s_p2 = 0.0;
        const std::size_t total = cells();
        for (std::size_t j = 0; j < total; ++j) {
            const auto& v = eval_.values[j];
            const double pi = eval_.pi[j];
            s_ps += pi * v.sigma;
            s_pm += pi * v.mu;
            s_p2 += pi * pi * v.Sigma;
        }
        const double inv = 1.0 / static_cast<double>(total);
        realized_ = Aggregates{s_ps * inv, s_pm * inv, s_p2 * inv};
    }

    void compute_rates() {
        const std::size_t total = cells();
        for (std::size_t j = 0; j < total; ++j) {
            const auto& v = eval_.values[j];
            if (spec_.game == Game::Cara) {
                rate_a_[j] = cara_K_rate(v, realized_);
                rate_b_[j] = 0.0;
            } else if (v.delta == 1.0) {
                rate_a_[j] = 0.0;
                rate_b_[j] = crra_G_rate(v, realized_, spec_.variant);
            } else {
                rate_a_[j] = crra_K_rate(v, realized_, spec_.variant);
                rate_b_[j] = 0.0;
            }
        }
    }

    // Bring K (and G) forward to the current grid point using the rates held
    // over from the previous point. The left-endpoint rule uses those rates
    // alone; the trapezoid rule blends in the freshly evaluated ones.
    void finalize_corrections() {
        const bool trap = spec_.quadrature == Quadrature::Trapezoid;
        const double dt = spec_.dt;
        const std::size_t total = cells();
        for (std::size_t j = 0; j < total; ++j) {
            const double ra =
                trap ? 0.5 * (pend_a_[j] + rate_a_[j]) : pend_a_[j];
            const double rb =
                trap ? 0.5 * (pend_b_[j] + rate_b_[j]) : pend_b_[j];
            if (spec_.game == Game::Cara) {
                K_[j] += ra * dt;
            } else {
                K_[j] *= std::exp(ra * dt);
                G_[j] += rb * dt;
            }
        }
    }

    void advance() {
        const double dW0 = stream_.common(k_);
        const bool arith = dynamics() == Dynamics::Arithmetic;
        const std::size_t n = spec_.n_agents;
        for (std::size_t r = 0; r < spec_.n_replications; ++r) {
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t j = r * n + i;
                const double dWi =
                    stream_.idio(r, spec_.agent_offset + i, k_);
                x_[j] = arith
                            ? detail::advance_arithmetic(
                                  x_[j], eval_.pi[j], eval_.values[j],
                                  spec_.dt, dWi, dW0)
                            : detail::advance_geometric(x_[j], eval_.pi[j],
                                                        eval_.values[j],
                                                        spec_.dt, dWi, dW0);
            }
        }
        z_ = models_.uses_factor() ? factor_step(factor_params_, z_, spec_.dt, dW0)
                                   : z_;
        last_dW0_ = dW0;
        pend_a_.swap(rate_a_);
        pend_b_.swap(rate_b_);
        ++k_;
    }

    EngineSpec spec_;
    ModelSet models_;
    StrategyClosure strategy_;
    NoiseStream stream_;
    FactorParams factor_params_;

    std::vector<double> x_, K_, G_;
    std::vector<double> rate_a_, rate_b_, pend_a_, pend_b_;
    StepEvaluation eval_;
    Aggregates realized_{};
    double z_ = 0.0;
    double last_dW0_ = 0.0;
    std::size_t k_ = 0;
};

} // namespace fnl
