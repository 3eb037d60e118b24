#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fnl/coeffs.hpp"
#include "fnl/corrections.hpp"
#include "fnl/engine.hpp"
#include "fnl/errors.hpp"
#include "fnl/fields.hpp"
#include "fnl/measure.hpp"
#include "fnl/stats.hpp"
#include "fnl/strategy.hpp"
#include "fnl/weights.hpp"

namespace fnl {

// ---------------------------------------------------------------------------
// Drift reports
// ---------------------------------------------------------------------------

struct DriftStep {
    double time = 0.0;           // left endpoint of the step
    double estimate = 0.0;       // conditional drift estimate
    double se = 0.0;             // standard error across replications
    double t_stat = 0.0;         // estimate/se (0 when se == 0)
    std::size_t n_replications = 0;
};

struct DriftReport {
    std::vector<DriftStep> steps;

    double max_abs_t() const {
        double m = 0.0;
        for (const auto& s : steps) m = std::max(m, std::fabs(s.t_stat));
        return m;
    }
    std::size_t worst_step() const {
        std::size_t w = 0;
        double m = -1.0;
        for (std::size_t k = 0; k < steps.size(); ++k)
            if (std::fabs(steps[k].t_stat) > m) {
                m = std::fabs(steps[k].t_stat);
                w = k;
            }
        return w;
    }
    // Time-averaged drift estimate and its standard error (steps are
    // conditionally independent given the common path only approximately; the
    // pooled se treats them as independent and is used for magnitude scaling,
    // not for the per-step tests).
    double mean_estimate() const {
        double s = 0.0;
        for (const auto& st : steps) s += st.estimate;
        return steps.empty() ? 0.0 : s / static_cast<double>(steps.size());
    }
    double mean_estimate_se() const {
        double s = 0.0;
        for (const auto& st : steps) s += st.se * st.se;
        return steps.empty() ? 0.0
                             : std::sqrt(s) / static_cast<double>(steps.size());
    }
};

// ---------------------------------------------------------------------------
// Pointwise utility-field evaluation with its common-noise exposure
// ---------------------------------------------------------------------------

namespace detail {

// U at one cell together with C, the loading of dU on the common increment.
// The common term is a martingale component of dU, not drift, and every
// replication of a scenario shares the same realized common increment, so it
// must be removed before averaging increments across replications; the
// idiosyncratic martingale parts are independent across replications and
// average out on their own.
struct FieldPoint {
    double U = 0.0;
    double C = 0.0;
};

inline FieldPoint field_point(Game game, const CoefficientValues& v, double x,
                              double lambda, double K, double G, double pi,
                              double A) {
    if (game == Game::Cara) {
        const double U = cara_field(x, lambda, K, v.delta, v.theta);
        return {U, -(1.0 / v.delta) * (pi * v.sigma - v.theta * A) * U};
    }
    const double U = crra_field(x, lambda, K, G, v.delta, v.theta);
    if (v.delta == 1.0) return {U, K * (pi * v.sigma - v.theta * A)};
    const double c = 1.0 - 1.0 / v.delta;
    return {U, c * (pi * v.sigma - v.theta * A) * U};
}

// The log field is affine in the step's Brownian increments (and may pass
// through zero), while the exponential and power fields are exponentials of
// affine maps and stay bounded away from zero. The two shapes need different
// exact removals of the common component, so the estimator must branch on the
// same predicate field_point branches on.
inline bool field_is_additive(Game game, const CoefficientValues& v) {
    return game == Game::Crra && v.delta == 1.0;
}

// One increment of U with its common-noise martingale component removed
// exactly. Within a step the strategies and coefficients are constant, so an
// affine field carries the common increment additively (subtract C*dW0),
// while an exponential-of-affine field carries it as the stochastic
// exponential of the per-unit loading C/U (divide it out, with the
// compensating variance half-term so the removed factor has unit mean). A
// first-order subtraction on the exponential shape would leave a quadratic
// remainder of order (dW0^2 - dt) that does not shrink with the replication
// count and eventually dominates the shrinking standard error.
inline double deflated_increment(double u0, double u1, double c0,
                                 bool additive, double dW0, double dt) {
    if (additive) return u1 - u0 - c0 * dW0;
    const double g = c0 / u0;
    return u1 * std::exp(-g * dW0 + 0.5 * g * g * dt) - u0;
}

// Evaluate U and C on a full replication*agent slice. ConditionalMean hands
// every cell the cross-replication measure argument and aggregate;
// ReplicationAverage hands each replication its own empirical average and
// its own realized aggregate.
inline void field_slice(Game game, const StepEvaluation& eval,
                        std::span<const double> wealth,
                        std::span<const double> K, std::span<const double> G,
                        const Aggregates& realized, MeasureArgument mode,
                        std::size_t n_agents, std::vector<double>& U,
                        std::vector<double>& C) {
    const std::size_t total = wealth.size();
    const std::size_t R = total / n_agents;
    U.resize(total);
    C.resize(total);
    if (mode == MeasureArgument::ConditionalMean) {
        const double lam = conditional_lambda(game, wealth, n_agents);
        const double A = realized.e1_pi_sigma;
        for (std::size_t j = 0; j < total; ++j) {
            const auto p = field_point(game, eval.values[j], wealth[j], lam,
                                       K[j], G[j], eval.pi[j], A);
            U[j] = p.U;
            C[j] = p.C;
        }
        return;
    }
    for (std::size_t r = 0; r < R; ++r) {
        const auto slice = wealth.subspan(r * n_agents, n_agents);
        const double lam = replication_lambda(game, slice);
        double A = 0.0;
        for (std::size_t i = 0; i < n_agents; ++i) {
            const std::size_t j = r * n_agents + i;
            A += eval.pi[j] * eval.values[j].sigma;
        }
        A /= static_cast<double>(n_agents);
        for (std::size_t i = 0; i < n_agents; ++i) {
            const std::size_t j = r * n_agents + i;
            const auto p = field_point(game, eval.values[j], wealth[j], lam,
                                       K[j], G[j], eval.pi[j], A);
            U[j] = p.U;
            C[j] = p.C;
        }
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Streaming drift verifier (engine observer)
// ---------------------------------------------------------------------------

// Estimates the conditional drift of U given the common path, step by step:
// per replication, the agent-averaged increment with the shared common-noise
// martingale component removed exactly (detail::deflated_increment), then
// mean and standard error across replications. Under the martingale property
// the removal is exact for constant within-step coefficients, so the per-step
// t statistics are standard normal at any replication count.
class DriftVerifier {
  public:
    explicit DriftVerifier(MeasureArgument mode) : mode_(mode) {}

    void operator()(const SimulationEngine& e) {
        const std::size_t n = e.spec().n_agents;
        const std::size_t R = e.spec().n_replications;
        if (R < 2)
            throw InsufficientReplications(
                "drift estimation requires >= 2 replications");
        detail::field_slice(e.spec().game, e.eval(), e.wealth(),
                            e.corrections_K(), e.corrections_G(), e.realized(),
                            mode_, n, U_, C_);
        additive_.resize(U_.size());
        for (std::size_t j = 0; j < U_.size(); ++j)
            additive_[j] =
                detail::field_is_additive(e.spec().game, e.eval().values[j]);
        if (e.grid_index() > 0) {
            const double dt = e.spec().dt;
            const double dW0 = e.previous_common_increment();
            RunningStat stat;
            for (std::size_t r = 0; r < R; ++r) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const std::size_t j = r * n + i;
                    acc += detail::deflated_increment(prev_U_[j], U_[j],
                                                      prev_C_[j],
                                                      prev_additive_[j] != 0,
                                                      dW0, dt);
                }
                stat.add(acc / (static_cast<double>(n) * dt));
            }
            DriftStep s;
            s.time = e.time() - dt;
            s.estimate = stat.mean();
            s.se = stat.stderr_mean();
            s.t_stat = s.se > 0.0 ? s.estimate / s.se : 0.0;
            s.n_replications = R;
            report_.steps.push_back(s);
        }
        prev_U_.swap(U_);
        prev_C_.swap(C_);
        prev_additive_.swap(additive_);
    }

    const DriftReport& report() const { return report_; }

  private:
    MeasureArgument mode_;
    DriftReport report_;
    std::vector<double> U_, C_, prev_U_, prev_C_;
    std::vector<std::uint8_t> additive_, prev_additive_;
};

// ---------------------------------------------------------------------------
// Utility path ensembles (stored form, desk scale)
// ---------------------------------------------------------------------------

struct UtilityPathEnsemble {
    Game game = Game::Cara;
    MeasureArgument measure_argument = MeasureArgument::ConditionalMean;
    std::size_t n_agents = 0;
    std::size_t n_replications = 0;
    std::size_t steps = 0;
    double dt = 0.0;

    std::vector<double> U;    // [(k*R + r)*n + i], k = 0..steps
    std::vector<double> C;    // same layout; exposure at the point
    std::vector<std::uint8_t> additive; // same layout; log-field cells
    std::vector<double> dW0;  // [k], k = 0..steps-1

    double at(std::size_t k, std::size_t r, std::size_t i) const {
        return U[(k * n_replications + r) * n_agents + i];
    }
};

// Simulate a scenario and evaluate the utility field along every path. The
// correction processes are accumulated inside the engine from the aggregates
// realized by the strategy, so the ensemble is well-defined under strategy
// overrides as well as at equilibrium.
inline UtilityPathEnsemble evaluate_utility_paths(
    const EngineSpec& spec, ModelSet models, const StrategyClosure& strategy,
    MeasureArgument mode = MeasureArgument::ConditionalMean) {
    UtilityPathEnsemble ens;
    ens.game = spec.game;
    ens.measure_argument = mode;
    ens.n_agents = spec.n_agents;
    ens.n_replications = spec.n_replications;
    ens.steps = spec.steps;
    ens.dt = spec.dt;
    const std::size_t total = spec.n_replications * spec.n_agents;
    ens.U.resize((spec.steps + 1) * total);
    ens.C.resize((spec.steps + 1) * total);
    ens.additive.resize((spec.steps + 1) * total);
    ens.dW0.resize(spec.steps);

    SimulationEngine engine(spec, models, strategy);
    std::vector<double> u, c;
    engine.run([&](const SimulationEngine& e) {
        detail::field_slice(spec.game, e.eval(), e.wealth(),
                            e.corrections_K(), e.corrections_G(), e.realized(),
                            mode, spec.n_agents, u, c);
        const std::size_t k = e.grid_index();
        std::copy(u.begin(), u.end(), ens.U.begin() + k * total);
        std::copy(c.begin(), c.end(), ens.C.begin() + k * total);
        for (std::size_t j = 0; j < total; ++j)
            ens.additive[k * total + j] =
                detail::field_is_additive(spec.game, e.eval().values[j]);
        if (k > 0) ens.dW0[k - 1] = e.previous_common_increment();
    });
    return ens;
}

// Per-step conditional drift of a stored ensemble (common component removed
// per increment, same estimator as the streaming verifier).
inline DriftReport estimate_drift(const UtilityPathEnsemble& ens) {
    if (ens.n_replications < 2)
        throw InsufficientReplications(
            "estimate_drift requires >= 2 replications");
    DriftReport report;
    const std::size_t total = ens.n_replications * ens.n_agents;
    for (std::size_t k = 0; k < ens.steps; ++k) {
        RunningStat stat;
        for (std::size_t r = 0; r < ens.n_replications; ++r) {
            double acc = 0.0;
            for (std::size_t i = 0; i < ens.n_agents; ++i) {
                const std::size_t j = r * ens.n_agents + i;
                acc += detail::deflated_increment(
                    ens.U[k * total + j], ens.U[(k + 1) * total + j],
                    ens.C[k * total + j], ens.additive[k * total + j] != 0,
                    ens.dW0[k], ens.dt);
            }
            stat.add(acc / (static_cast<double>(ens.n_agents) * ens.dt));
        }
        DriftStep s;
        s.time = static_cast<double>(k) * ens.dt;
        s.estimate = stat.mean();
        s.se = stat.stderr_mean();
        s.t_stat = s.se > 0.0 ? s.estimate / s.se : 0.0;
        s.n_replications = ens.n_replications;
        report.steps.push_back(s);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Quadratic drift predictions at a deviation
// ---------------------------------------------------------------------------

// CARA: drift = Sigma/(2 delta^2) * U * (pi - pi_star)^2, nonpositive since
// U < 0, vanishing exactly at the best response.
inline double predicted_drift_cara(const CoefficientValues& v, double U,
                                   double pi, double pi_star) {
    const double d = pi - pi_star;
    return v.Sigma / (2.0 * v.delta * v.delta) * U * d * d;
}

// CRRA: drift = (1 - 1/delta) * (-Sigma/(2 delta)) * U * (pi - pi_star)^2 for
// delta != 1, and -Sigma/2 * K * (pi - pi_star)^2 on the log branch. The
// quadratic coefficient is shared by both K-variants (they differ only in
// pi-free terms), and the sign pattern keeps the prediction nonpositive in
// every branch.
inline double predicted_drift_crra(const CoefficientValues& v, double U,
                                   double K, double pi, double pi_star) {
    const double d = pi - pi_star;
    if (v.delta == 1.0) return -0.5 * v.Sigma * K * d * d;
    const double c = 1.0 - 1.0 / v.delta;
    return -(v.Sigma / (2.0 * v.delta)) * c * U * d * d;
}

// ---------------------------------------------------------------------------
// K-variant adjudication
// ---------------------------------------------------------------------------

enum class Verdict { Half, Full, Inconclusive };

inline const char* name(Verdict v) {
    switch (v) {
        case Verdict::Half: return "half";
        case Verdict::Full: return "full";
        default: return "inconclusive";
    }
}

struct AdjudicationResult {
    Verdict verdict = Verdict::Inconclusive;
    DriftReport half;
    DriftReport full;
    double threshold = 3.0;
};

// Run the equilibrium martingale test under both K closures and return the
// variant whose worst |t| is smaller. Wealth paths are identical across
// variants (the strategy does not involve K), so the two runs consume the
// same noise cells and differ only in the correction accumulation.
// Inconclusive when both variants clear the threshold (indistinguishable,
// e.g. theta = 0) or both fail it (scale too coarse to trust either).
inline AdjudicationResult adjudicate_variant(
    EngineSpec spec, ModelSet models, const StrategyClosure& strategy,
    MeasureArgument mode = MeasureArgument::ConditionalMean,
    double threshold = 3.0) {
    AdjudicationResult out;
    out.threshold = threshold;

    spec.variant = VariantFlag::Half;
    {
        SimulationEngine engine(spec, models, strategy);
        DriftVerifier v(mode);
        engine.run([&v](const SimulationEngine& e) { v(e); });
        out.half = v.report();
    }
    spec.variant = VariantFlag::Full;
    {
        SimulationEngine engine(spec, models, strategy);
        DriftVerifier v(mode);
        engine.run([&v](const SimulationEngine& e) { v(e); });
        out.full = v.report();
    }

    const double th = out.half.max_abs_t();
    const double tf = out.full.max_abs_t();
    const bool half_ok = th <= threshold;
    const bool full_ok = tf <= threshold;
    if (half_ok == full_ok)
        out.verdict = Verdict::Inconclusive;
    else
        out.verdict = half_ok ? Verdict::Half : Verdict::Full;
    return out;
}

// ---------------------------------------------------------------------------
// Measure-zero deviation experiment
// ---------------------------------------------------------------------------

// The supermartingale half of the equilibrium definition concerns one agent
// deviating while the population plays equilibrium. A finite-n deviator also
// moves the population average it is benchmarked against, which perturbs the
// clean quadratic prediction by O(1/n); this experiment instead attaches one
// zero-weight deviator per replication to an n-agent equilibrium population
// (the deviator consumes its own idiosyncratic noise cells but does not enter
// the average), for which
//   drift = quadratic-form prediction at (pi* + offset, pi*)
// holds with no finite-population correction. Constant coefficients only, so
// the correction processes have exact closed forms in t.
struct OverlayDeviation {
    DriftReport drift;
    std::vector<double> predicted; // per step: prediction averaged over reps
    double pi_star = 0.0;
    double offset = 0.0;
};

inline OverlayDeviation overlay_deviation(
    const CoefficientModel& model, Game game, double offset,
    std::size_t n_population, std::size_t n_replications, std::size_t steps,
    double dt, double x0, std::uint64_t master_seed, std::uint32_t scenario,
    VariantFlag variant = VariantFlag::Half,
    MeasureArgument mode = MeasureArgument::ConditionalMean) {
    if (model.kind() != CoeffKind::Constant)
        throw DomainError(
            "overlay_deviation: constant-coefficient models only");
    if (n_population == 0 || steps == 0)
        throw DomainError("overlay_deviation: counts must be >= 1");
    if (n_replications < 2)
        throw InsufficientReplications(
            "overlay_deviation requires >= 2 replications");
    const Dynamics dyn = dynamics_for(game);
    if (dyn == Dynamics::Geometric && !(x0 > 0.0))
        throw DomainError("overlay_deviation: geometric dynamics needs x0 > 0");

    const CoefficientValues v = sample(model, x0, 0.0, 0.0);
    const EquilibriumWeights w =
        equilibrium_weights(game, std::span<const CoefficientValues>(&v, 1), 1);
    const Aggregates agg = aggregates(w);
    const double pi_star = equilibrium_strategy(game, v, w);
    const double pi_dev = pi_star + offset;

    // Closed-form corrections at the equilibrium aggregates.
    const double rate_a = game == Game::Cara
                              ? cara_K_rate(v, agg)
                              : (v.delta == 1.0 ? 0.0
                                                : crra_K_rate(v, agg, variant));
    const double rate_g =
        game == Game::Crra && v.delta == 1.0 ? crra_G_rate(v, agg, variant)
                                             : 0.0;
    const auto K_at = [&](double t) {
        if (game == Game::Cara) return rate_a * t;
        return v.delta == 1.0 ? 1.0 : std::exp(rate_a * t);
    };
    const auto G_at = [&](double t) { return rate_g * t; };

    const NoiseStream stream(master_seed, scenario, dt);
    const std::size_t R = n_replications;
    const std::size_t n = n_population;
    std::vector<double> pop(R * n, x0), dev(R, x0);
    std::vector<double> U(R), C(R), prev_U(R), prev_C(R);

    OverlayDeviation out;
    out.pi_star = pi_star;
    out.offset = offset;

    std::vector<double> rep_lambda(R);
    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const double Kt = K_at(t), Gt = G_at(t);
        // Measure argument from the population only.
        double lam_cm = 0.0;
        if (mode == MeasureArgument::ConditionalMean) {
            lam_cm = conditional_lambda(game, pop, n);
        } else {
            for (std::size_t r = 0; r < R; ++r)
                rep_lambda[r] = replication_lambda(
                    game, std::span<const double>(pop).subspan(r * n, n));
        }
        for (std::size_t r = 0; r < R; ++r) {
            const double lam =
                mode == MeasureArgument::ConditionalMean ? lam_cm
                                                         : rep_lambda[r];
            const auto p = detail::field_point(game, v, dev[r], lam, Kt, Gt,
                                               pi_dev, agg.e1_pi_sigma);
            U[r] = p.U;
            C[r] = p.C;
        }
        if (k > 0) {
            const double dW0 = stream.common(k - 1);
            const bool additive = detail::field_is_additive(game, v);
            RunningStat stat;
            double pred = 0.0;
            for (std::size_t r = 0; r < R; ++r) {
                stat.add(detail::deflated_increment(prev_U[r], U[r],
                                                    prev_C[r], additive, dW0,
                                                    dt) /
                         dt);
                pred += game == Game::Cara
                            ? predicted_drift_cara(v, prev_U[r], pi_dev,
                                                   pi_star)
                            : predicted_drift_crra(v, prev_U[r],
                                                   K_at(t - dt), pi_dev,
                                                   pi_star);
            }
            DriftStep s;
            s.time = t - dt;
            s.estimate = stat.mean();
            s.se = stat.stderr_mean();
            s.t_stat = s.se > 0.0 ? s.estimate / s.se : 0.0;
            s.n_replications = R;
            out.drift.steps.push_back(s);
            out.predicted.push_back(pred / static_cast<double>(R));
        }
        if (k == steps) break;
        const double dW0 = stream.common(k);
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t i = 0; i < n; ++i) {
                const double dWi = stream.idio(r, i, k);
                double& x = pop[r * n + i];
                x = dyn == Dynamics::Arithmetic
                        ? detail::advance_arithmetic(x, pi_star, v, dt, dWi,
                                                     dW0)
                        : detail::advance_geometric(x, pi_star, v, dt, dWi,
                                                    dW0);
            }
            const double dWd = stream.idio(r, n, k); // own stream, not pooled
            dev[r] = dyn == Dynamics::Arithmetic
                         ? detail::advance_arithmetic(dev[r], pi_dev, v, dt,
                                                      dWd, dW0)
                         : detail::advance_geometric(dev[r], pi_dev, v, dt,
                                                     dWd, dW0);
        }
        prev_U.swap(U);
        prev_C.swap(C);
    }
    return out;
}

} // namespace fnl
