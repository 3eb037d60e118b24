#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fnl/coeffs.hpp"
#include "fnl/corrections.hpp"
#include "fnl/engine.hpp"
#include "fnl/errors.hpp"
#include "fnl/measure.hpp"
#include "fnl/noise.hpp"
#include "fnl/stats.hpp"
#include "fnl/strategy.hpp"
#include "fnl/system.hpp"
#include "fnl/weights.hpp"

namespace fnl {

// ---------------------------------------------------------------------------
// Representative-agent particle cloud
// ---------------------------------------------------------------------------

// A particle approximation of the representative agent's conditional law: all
// particles share one common-noise path and each carries its own
// idiosyncratic noise, so the empirical law across particles at a grid point
// estimates the conditional law given the common path. Stored as a
// single-replication particle system whose "agents" are the particles.
struct MfCloud {
    ParticleSystem system;

    std::size_t n_particles() const { return system.n_agents; }
    std::size_t steps() const { return system.steps; }
    double dt() const { return system.dt; }

    std::span<const double> particles(std::size_t step) const {
        return system.slice(step);
    }
    EmpiricalMeasure law(std::size_t step) const {
        return empirical_measure(system, 0, step);
    }
};

inline MfCloud make_mf_cloud(Dynamics dyn, std::size_t n_particles,
                             std::size_t steps, double dt, double x0,
                             const FactorParams& factor = {}) {
    MfCloud c;
    c.system = make_system(dyn, n_particles, 1, steps, dt, x0, factor);
    return c;
}

// March the whole cloud across the grid. The strategy sees the cloud itself
// as the law argument: when it needs equilibrium weights they are estimated
// from the current particle values (the cloud is the E1 sample).
inline MfCloud& simulate_mkv(MfCloud& cloud, const StrategyClosure& strategy,
                             const ModelSet& models, const NoiseBundle& noise) {
    if (noise.n_agents != cloud.n_particles() || noise.n_replications != 1 ||
        noise.steps != cloud.steps())
        throw SizeMismatch("simulate_mkv: noise bundle shape mismatch");
    StepEvaluation scratch;
    for (std::size_t k = 0; k < cloud.steps(); ++k)
        detail::step_impl(cloud.system, strategy.base_game, strategy, models,
                          noise, k, scratch);
    return cloud;
}

inline MfCloud& simulate_mkv(MfCloud& cloud, const StrategyClosure& strategy,
                             const CoefficientModel& model,
                             const NoiseBundle& noise) {
    const ModelSet ms{std::span<const CoefficientModel>(&model, 1)};
    return simulate_mkv(cloud, strategy, ms, noise);
}

// ---------------------------------------------------------------------------
// Mean-field weights, strategies, corrections
// ---------------------------------------------------------------------------

// The mean-field weights are the same random quantities as the n-agent ones
// with the agent average replaced by E1 over the conditional law; on a
// particle cloud that is the particle average, which is exactly the n-agent
// estimator applied to the cloud as one replication of "n = particles".

inline EquilibriumWeights mf_weights(Game game, const MfCloud& cloud,
                                     const ModelSet& models,
                                     std::size_t step) {
    const auto slice = cloud.particles(step);
    std::vector<CoefficientValues> values(slice.size());
    const double z = cloud.system.factor_path[step];
    const double t = cloud.system.time_grid[step];
    for (std::size_t p = 0; p < slice.size(); ++p)
        values[p] = sample(models.for_agent(p), slice[p], z, t);
    return equilibrium_weights(game, values, values.size());
}

inline EquilibriumWeights mf_weights_cara(const MfCloud& cloud,
                                          const CoefficientModel& model,
                                          std::size_t step) {
    const ModelSet ms{std::span<const CoefficientModel>(&model, 1)};
    return mf_weights(Game::Cara, cloud, ms, step);
}

inline EquilibriumWeights mf_weights_crra(const MfCloud& cloud,
                                          const CoefficientModel& model,
                                          std::size_t step) {
    const ModelSet ms{std::span<const CoefficientModel>(&model, 1)};
    return mf_weights(Game::Crra, cloud, ms, step);
}

// The optimal-strategy formulas coincide with the n-agent ones.
inline double mf_strategy_cara(const CoefficientValues& v,
                               const EquilibriumWeights& w) {
    return cara_strategy(v, w);
}

inline double mf_strategy_crra(const CoefficientValues& v,
                               const EquilibriumWeights& w) {
    return crra_strategy(v, w);
}

// Accumulate the representative agent's correction process from per-grid-point
// weights and own-coefficient values (steps + 1 points each).
inline CorrectionProcess mf_corrections_cara(
    std::span<const EquilibriumWeights> weights,
    std::span<const CoefficientValues> values, double dt,
    Quadrature q = Quadrature::LeftEndpoint) {
    if (weights.size() != values.size() || weights.size() < 2)
        throw SizeMismatch("mf_corrections_cara: need matching paths of >= 2 points");
    const std::size_t steps = weights.size() - 1;
    CorrectionProcess c = CorrectionProcess::start(Game::Cara,
                                                   VariantFlag::Half, steps);
    for (std::size_t k = 0; k < steps; ++k)
        c.advance_cara(cara_K_rate(values[k], weights[k]),
                       cara_K_rate(values[k + 1], weights[k + 1]), dt, q);
    return c;
}

inline CorrectionProcess mf_corrections_crra(
    std::span<const EquilibriumWeights> weights,
    std::span<const CoefficientValues> values, double dt, VariantFlag flag,
    Quadrature q = Quadrature::LeftEndpoint) {
    if (weights.size() != values.size() || weights.size() < 2)
        throw SizeMismatch("mf_corrections_crra: need matching paths of >= 2 points");
    const std::size_t steps = weights.size() - 1;
    CorrectionProcess c = CorrectionProcess::start(Game::Crra, flag, steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const bool log_branch = values[k].delta == 1.0;
        const double lk_now =
            log_branch ? 0.0 : crra_K_rate(values[k], weights[k], flag);
        const double lk_next =
            log_branch ? 0.0 : crra_K_rate(values[k + 1], weights[k + 1], flag);
        const double g_now =
            log_branch ? crra_G_rate(values[k], weights[k], flag) : 0.0;
        const double g_next =
            log_branch ? crra_G_rate(values[k + 1], weights[k + 1], flag) : 0.0;
        c.advance_crra(lk_now, lk_next, g_now, g_next, dt, q);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Chaos convergence study
// ---------------------------------------------------------------------------

// Draws i.i.d. constant-coefficient agent types; market coefficients are
// shared and the preference pair (theta, delta) is uniform on a box.
struct TypeSampler {
    double mu = 0.1;
    double nu = 0.2;
    double sigma = 0.3;
    double theta_lo = 0.0;
    double theta_hi = 1.0;
    double delta_lo = 0.5;
    double delta_hi = 2.0;

    static constexpr std::uint32_t kThetaSlot = 0;
    static constexpr std::uint32_t kDeltaSlot = 1;

    CoefficientValues draw_values(const NoiseStream& s,
                                  std::size_t agent) const {
        const double ut = s.type_uniform(agent, kThetaSlot);
        const double ud = s.type_uniform(agent, kDeltaSlot);
        CoefficientValues v;
        v.mu = mu;
        v.nu = nu;
        v.sigma = sigma;
        v.Sigma = nu * nu + sigma * sigma;
        v.theta = theta_lo + ut * (theta_hi - theta_lo);
        v.delta = delta_lo + ud * (delta_hi - delta_lo);
        return v;
    }

    CoefficientModel draw_model(const NoiseStream& s, std::size_t agent) const {
        const CoefficientValues v = draw_values(s, agent);
        CoefficientModel m;
        m.mu = ParamSpec::constant(v.mu);
        m.nu = ParamSpec::constant(v.nu);
        m.sigma = ParamSpec::constant(v.sigma);
        m.delta = ParamSpec::constant(v.delta);
        m.theta = ParamSpec::constant(v.theta);
        return m;
    }
};

struct ConvergenceRow {
    std::size_t n = 0;
    double phi_gap = 0.0;
    double phi_gap_se = 0.0;
    double psi_gap = 0.0;
    double psi_gap_se = 0.0;
    double w2_sup = 0.0;
    double w2_sup_se = 0.0;
};

struct ConvergenceTable {
    Game game = Game::Cara;
    std::size_t n_reference = 0;
    double phi_mf = 0.0;
    double psi_mf = 0.0;
    std::vector<ConvergenceRow> rows;
};

struct ConvergenceConfig {
    std::vector<std::size_t> n_list;
    std::size_t type_redraws = 200; // replications for the weight-gap columns
    std::size_t path_reps = 12;     // replications for the W2 column
    std::size_t reference_multiple = 10; // n_ref = multiple * max(n_list)
    std::size_t steps = 64;
    double dt = 1.0 / 64.0;
    double x0 = 1.0;
    std::uint64_t master_seed = 0;
    std::uint32_t scenario_base = 0;
};

namespace detail {

// Uniform subsample without replacement (partial Fisher-Yates), deterministic
// in (stream, step, tag).
inline void subsample_atoms(const NoiseStream& stream, std::size_t step,
                            std::uint32_t tag, std::span<const double> pool,
                            std::vector<double>& out, std::size_t count,
                            std::vector<std::uint32_t>& index_scratch) {
    const std::size_t P = pool.size();
    if (count > P)
        throw SizeMismatch("subsample_atoms: more atoms requested than pooled");
    index_scratch.resize(P);
    for (std::size_t p = 0; p < P; ++p)
        index_scratch[p] = static_cast<std::uint32_t>(p);
    out.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double u = stream.aux_uniform(step, i, tag);
        // u in (0,1]; map to {i, ..., P-1} with the top end closed.
        std::size_t pick =
            i + static_cast<std::size_t>(u * static_cast<double>(P - i));
        if (pick >= P) pick = P - 1;
        std::swap(index_scratch[i], index_scratch[pick]);
        out[i] = pool[index_scratch[i]];
    }
}

} // namespace detail

// For each n: the gap between the n-agent equilibrium weights and the
// reference mean-field weights (a large-cloud surrogate for the limit), and
// the grid supremum of W2 between the n-agent empirical wealth law and the
// reference particle law under the same common path. Weight gaps use fresh
// type redraws (they need no path simulation: with constant types, phi_n is
// an n-sample mean); the W2 column couples each n-agent system to a reference
// cloud through a shared common-noise scenario.
inline ConvergenceTable convergence_study(Game game, const TypeSampler& sampler,
                                          const ConvergenceConfig& cfg) {
    if (cfg.n_list.empty())
        throw DomainError("convergence_study: empty n list");
    for (std::size_t j = 1; j < cfg.n_list.size(); ++j)
        if (cfg.n_list[j] <= cfg.n_list[j - 1])
            throw DomainError("convergence_study: n list must be increasing");
    if (cfg.type_redraws < 2 || cfg.path_reps < 2)
        throw InsufficientReplications(
            "convergence_study: needs >= 2 replications per column");

    const std::size_t n_max = cfg.n_list.back();
    const std::size_t n_ref = cfg.reference_multiple * n_max;
    const std::uint32_t M = static_cast<std::uint32_t>(cfg.type_redraws);

    ConvergenceTable table;
    table.game = game;
    table.n_reference = n_ref;

    // Reference weights from one large type sample.
    {
        const NoiseStream ref_stream(cfg.master_seed, cfg.scenario_base + M,
                                     cfg.dt);
        RunningStat phi, psi;
        for (std::size_t p = 0; p < n_ref; ++p) {
            const CoefficientValues v = sampler.draw_values(ref_stream, p);
            phi.add(v.mu * v.delta * v.sigma / v.Sigma);
            psi.add(game == Game::Cara
                        ? v.theta * v.sigma * v.sigma / v.Sigma
                        : (1.0 - v.delta) * v.theta * v.sigma * v.sigma /
                              v.Sigma);
        }
        table.phi_mf = phi.mean();
        table.psi_mf = psi.mean();
    }

    table.rows.resize(cfg.n_list.size());
    for (std::size_t row = 0; row < cfg.n_list.size(); ++row) {
        table.rows[row].n = cfg.n_list[row];
        RunningStat phi_gap, psi_gap;
        for (std::uint32_t m = 0; m < M; ++m) {
            const NoiseStream s(cfg.master_seed, cfg.scenario_base + m, cfg.dt);
            RunningStat phi, psi;
            for (std::size_t i = 0; i < cfg.n_list[row]; ++i) {
                const CoefficientValues v = sampler.draw_values(s, i);
                phi.add(v.mu * v.delta * v.sigma / v.Sigma);
                psi.add(game == Game::Cara
                            ? v.theta * v.sigma * v.sigma / v.Sigma
                            : (1.0 - v.delta) * v.theta * v.sigma * v.sigma /
                                  v.Sigma);
            }
            phi_gap.add(std::fabs(phi.mean() - table.phi_mf));
            psi_gap.add(std::fabs(psi.mean() - table.psi_mf));
        }
        table.rows[row].phi_gap = phi_gap.mean();
        table.rows[row].phi_gap_se = phi_gap.stderr_mean();
        table.rows[row].psi_gap = psi_gap.mean();
        table.rows[row].psi_gap_se = psi_gap.stderr_mean();
    }

    // W2 column: per path replication, one reference cloud and one n-agent
    // system per n, all driven by the same common-noise scenario (the
    // conditional laws being compared share the common path; the reference
    // particles draw their idiosyncratic noise and types from agent indices
    // offset past every n-agent index).
    std::vector<RunningStat> w2_stats(cfg.n_list.size());
    std::vector<CoefficientModel> models;
    std::vector<double> sub_atoms;
    std::vector<std::uint32_t> scratch;
    for (std::uint32_t j = 0; j < cfg.path_reps; ++j) {
        const std::uint32_t scn = cfg.scenario_base + M + 1 + j;
        const NoiseStream s(cfg.master_seed, scn, cfg.dt);

        EngineSpec ref_spec;
        ref_spec.game = game;
        ref_spec.n_agents = n_ref;
        ref_spec.n_replications = 1;
        ref_spec.steps = cfg.steps;
        ref_spec.dt = cfg.dt;
        ref_spec.x0 = cfg.x0;
        ref_spec.master_seed = cfg.master_seed;
        ref_spec.scenario = scn;
        ref_spec.agent_offset = n_max;
        ref_spec.track_corrections = false;
        models.clear();
        models.reserve(n_ref);
        for (std::size_t p = 0; p < n_ref; ++p)
            models.push_back(sampler.draw_model(s, n_max + p));
        SimulationEngine ref_engine(
            ref_spec, ModelSet{std::span<const CoefficientModel>(models)},
            StrategyClosure::equilibrium(game));
        ParticleSystem ref_sys = ref_engine.run_to_system();

        for (std::size_t row = 0; row < cfg.n_list.size(); ++row) {
            const std::size_t n = cfg.n_list[row];
            EngineSpec n_spec = ref_spec;
            n_spec.n_agents = n;
            n_spec.agent_offset = 0;
            std::vector<CoefficientModel> n_models;
            n_models.reserve(n);
            for (std::size_t i = 0; i < n; ++i)
                n_models.push_back(sampler.draw_model(s, i));
            SimulationEngine n_engine(
                n_spec, ModelSet{std::span<const CoefficientModel>(n_models)},
                StrategyClosure::equilibrium(game));
            ParticleSystem n_sys = n_engine.run_to_system();

            double sup = 0.0;
            for (std::size_t k = 0; k <= cfg.steps; ++k) {
                const auto pool = ref_sys.slice(k);
                detail::subsample_atoms(s, k, static_cast<std::uint32_t>(row),
                                        pool, sub_atoms, n, scratch);
                sup = std::max(sup, wasserstein2(n_sys.slice(k), sub_atoms));
            }
            w2_stats[row].add(sup);
        }
    }
    for (std::size_t row = 0; row < cfg.n_list.size(); ++row) {
        table.rows[row].w2_sup = w2_stats[row].mean();
        table.rows[row].w2_sup_se = w2_stats[row].stderr_mean();
    }
    return table;
}

} // namespace fnl
