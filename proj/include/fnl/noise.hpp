#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fnl/errors.hpp"
#include "fnl/rng.hpp"

namespace fnl {

// Brownian increments for one scenario, materialized on the grid. The same
// values can be drawn lazily through `stream` below; the simulation engine
// uses the stream to avoid storing large grids, and a test pins the two
// access paths to bit equality.
struct NoiseBundle {
    double dt = 0.0;
    std::size_t steps = 0;
    std::size_t n_replications = 0;
    std::size_t n_agents = 0;

    std::vector<double> common_increments; // [step], shared by the scenario
    std::vector<double> idio_increments;   // [(replication*n_agents + agent)*steps + step]

    struct SeedLineage {
        std::uint64_t master_seed = 0;
        std::uint32_t scenario = 0;
    };
    SeedLineage seed_lineage;

    double common(std::size_t step) const { return common_increments[step]; }
    double idio(std::size_t replication, std::size_t agent,
                std::size_t step) const {
        return idio_increments[(replication * n_agents + agent) * steps + step];
    }
};

// Both entry points below draw from the same keyed counter cells, so the
// grid and the stream agree bitwise and any (replication, agent, step) cell
// can be evaluated independently of every other.
struct NoiseStream {
    Rng rng;
    std::uint32_t scenario = 0;
    double sqrt_dt = 0.0;

    NoiseStream(std::uint64_t master_seed, std::uint32_t scenario_, double dt)
        : rng(master_seed), scenario(scenario_), sqrt_dt(std::sqrt(dt)) {}

    double common(std::size_t step) const {
        StreamPoint p;
        p.scenario = scenario;
        p.step = static_cast<std::uint32_t>(step);
        p.lane = Lane::Common;
        return rng.increment(p, sqrt_dt);
    }
    double idio(std::size_t replication, std::size_t agent,
                std::size_t step) const {
        StreamPoint p;
        p.scenario = scenario;
        p.replication = static_cast<std::uint32_t>(replication);
        p.agent = static_cast<std::uint32_t>(agent);
        p.step = static_cast<std::uint32_t>(step);
        p.lane = Lane::Idio;
        return rng.increment(p, sqrt_dt);
    }
    // i.i.d. uniform(0,1] draws on the auxiliary lane (subsampling, shuffles);
    // keyed like the idiosyncratic lane but never used for path noise.
    double aux_uniform(std::size_t replication, std::size_t agent,
                       std::uint32_t slot) const {
        StreamPoint p;
        p.scenario = scenario;
        p.replication = static_cast<std::uint32_t>(replication);
        p.agent = static_cast<std::uint32_t>(agent);
        p.step = slot;
        p.lane = Lane::Aux;
        return rng.uniform(p);
    }
    // i.i.d. uniform(0,1] draw for agent-type sampling; slot distinguishes
    // the parameter being drawn.
    double type_uniform(std::size_t agent, std::uint32_t slot) const {
        StreamPoint p;
        p.scenario = scenario;
        p.agent = static_cast<std::uint32_t>(agent);
        p.step = slot;
        p.lane = Lane::Type;
        return rng.uniform(p);
    }
};

inline NoiseBundle generate_noise(std::uint64_t master_seed,
                                  std::uint32_t scenario,
                                  std::size_t n_replications,
                                  std::size_t n_agents, std::size_t steps,
                                  double dt) {
    if (steps == 0) throw DomainError("generate_noise: steps must be >= 1");
    if (!(dt > 0.0)) throw DomainError("generate_noise: dt must be positive");
    NoiseBundle b;
    b.dt = dt;
    b.steps = steps;
    b.n_replications = n_replications;
    b.n_agents = n_agents;
    b.seed_lineage = {master_seed, scenario};
    const NoiseStream s(master_seed, scenario, dt);
    b.common_increments.resize(steps);
    for (std::size_t k = 0; k < steps; ++k) b.common_increments[k] = s.common(k);
    b.idio_increments.resize(n_replications * n_agents * steps);
    for (std::size_t r = 0; r < n_replications; ++r)
        for (std::size_t i = 0; i < n_agents; ++i)
            for (std::size_t k = 0; k < steps; ++k)
                b.idio_increments[(r * n_agents + i) * steps + k] =
                    s.idio(r, i, k);
    return b;
}

} // namespace fnl
