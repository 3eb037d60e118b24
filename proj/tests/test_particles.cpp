#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fnl/coeffs.hpp"
#include "fnl/engine.hpp"
#include "fnl/measure.hpp"
#include "fnl/noise.hpp"
#include "fnl/strategy.hpp"
#include "fnl/system.hpp"

using Catch::Approx;

namespace {

fnl::CoefficientValues reference_values() {
    fnl::CoefficientValues v;
    v.mu = 0.1;
    v.nu = 0.2;
    v.sigma = 0.3;
    v.Sigma = 0.13;
    v.delta = 1.0;
    v.theta = 0.5;
    return v;
}

fnl::NoiseBundle zero_noise(std::size_t reps, std::size_t agents,
                            std::size_t steps, double dt) {
    fnl::NoiseBundle b;
    b.dt = dt;
    b.steps = steps;
    b.n_replications = reps;
    b.n_agents = agents;
    b.common_increments.assign(steps, 0.0);
    b.idio_increments.assign(reps * agents * steps, 0.0);
    return b;
}

} // namespace

TEST_CASE("advance kernels reproduce hand-computed one-step values",
          "[particles]") {
    const auto v = reference_values();
    // x + pi (mu dt + nu dWi + sigma dW0)
    //   = 1 + 2 (0.025 + 0.02 - 0.06) = 0.97
    CHECK(fnl::detail::advance_arithmetic(1.0, 2.0, v, 0.25, 0.1, -0.2) ==
          Approx(0.97).epsilon(1e-15));
    // dlog = pi mu dt - pi^2 Sigma dt / 2 + pi (nu dWi + sigma dW0)
    //      = 0.05 - 0.065 - 0.08 = -0.095
    CHECK(fnl::detail::advance_geometric(1.0, 2.0, v, 0.25, 0.1, -0.2) ==
          Approx(std::exp(-0.095)).epsilon(1e-15));
}

TEST_CASE("advance kernels enforce the blowup guards", "[particles]") {
    const auto v = reference_values();
    CHECK_THROWS_AS(
        fnl::detail::advance_arithmetic(1.0, 1e15, v, 0.25, 0.1, -0.2),
        fnl::NumericalBlowup);
    // dlog = 100*0.1*0.25 - 0.5*1e4*0.13*0.25 = 2.5 - 162.5, far past the
    // log-wealth bound.
    CHECK_THROWS_AS(fnl::detail::advance_geometric(1.0, 100.0, v, 0.25, 0.0, 0.0),
                    fnl::NumericalBlowup);
    // NaN inputs must not slip through the magnitude checks.
    auto bad = v;
    bad.mu = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(fnl::detail::advance_arithmetic(1.0, 1.0, bad, 0.25, 0.0, 0.0),
                    fnl::NumericalBlowup);
}

TEST_CASE("zero noise reduces paths to their deterministic skeleton",
          "[particles]") {
    const double dt = 1.0 / 32.0;
    const std::size_t steps = 32;
    const fnl::CoefficientModel model; // defaults: mu .1, nu .2, sigma .3
    const auto strategy = fnl::StrategyClosure::constant(0.8);
    const auto noise = zero_noise(2, 3, steps, dt);

    SECTION("arithmetic") {
        auto sys = fnl::make_system(fnl::Dynamics::Arithmetic, 3, 2, steps, dt,
                                    1.0);
        for (std::size_t k = 0; k < steps; ++k)
            fnl::step_arithmetic(sys, strategy, model, noise, k);
        double expected = 1.0;
        for (std::size_t k = 1; k <= steps; ++k) {
            expected += 0.8 * (0.1 * dt);
            for (std::size_t r = 0; r < 2; ++r)
                for (std::size_t i = 0; i < 3; ++i)
                    CHECK(sys.at(k, r, i) == expected);
        }
    }
    SECTION("geometric") {
        auto sys = fnl::make_system(fnl::Dynamics::Geometric, 3, 2, steps, dt,
                                    1.0);
        for (std::size_t k = 0; k < steps; ++k)
            fnl::step_geometric(sys, strategy, model, noise, k);
        double expected = 1.0;
        const double factor =
            std::exp(0.8 * 0.1 * dt - 0.5 * 0.8 * 0.8 * 0.13 * dt + 0.0);
        for (std::size_t k = 1; k <= steps; ++k) {
            expected *= factor;
            CHECK(sys.at(k, 0, 0) == Approx(expected).epsilon(1e-14));
        }
    }
}

TEST_CASE("a zero strategy freezes wealth at every grid point", "[particles]") {
    const double dt = 0.05;
    const std::size_t steps = 8;
    const fnl::CoefficientModel model;
    const auto strategy = fnl::StrategyClosure::constant(0.0);
    const auto noise = fnl::generate_noise(7, 0, 4, 2, steps, dt);

    auto arith = fnl::make_system(fnl::Dynamics::Arithmetic, 2, 4, steps, dt, 1.5);
    auto geom = fnl::make_system(fnl::Dynamics::Geometric, 2, 4, steps, dt, 1.5);
    for (std::size_t k = 0; k < steps; ++k) {
        fnl::step_arithmetic(arith, strategy, model, noise, k);
        fnl::step_geometric(geom, strategy, model, noise, k);
    }
    for (std::size_t k = 0; k <= steps; ++k)
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t i = 0; i < 2; ++i) {
                CHECK(arith.at(k, r, i) == 1.5);
                CHECK(geom.at(k, r, i) == 1.5);
            }
}

TEST_CASE("one arithmetic step consumes exactly the bundled increments",
          "[particles]") {
    const double dt = 0.25;
    const std::size_t reps = 5, agents = 3;
    const fnl::CoefficientModel model;
    const auto strategy = fnl::StrategyClosure::constant(1.0);
    const auto noise = fnl::generate_noise(42, 3, reps, agents, 1, dt);

    auto sys = fnl::make_system(fnl::Dynamics::Arithmetic, agents, reps, 1, dt,
                                1.0);
    fnl::step_arithmetic(sys, strategy, model, noise, 0);
    for (std::size_t r = 0; r < reps; ++r)
        for (std::size_t i = 0; i < agents; ++i) {
            const double expected = 1.0 + (0.1 * dt + 0.2 * noise.idio(r, i, 0) +
                                           0.3 * noise.common(0));
            CHECK(sys.at(1, r, i) == expected);
        }
}

TEST_CASE("empirical measures match the grid slices they were cut from",
          "[particles]") {
    const double dt = 1.0 / 16.0;
    const std::size_t steps = 4, reps = 3, agents = 4;
    const fnl::CoefficientModel model;
    const auto noise = fnl::generate_noise(11, 0, reps, agents, steps, dt);

    auto sys = fnl::make_system(fnl::Dynamics::Geometric, agents, reps, steps,
                                dt, 1.0);
    const auto strategy = fnl::StrategyClosure::equilibrium(fnl::Game::Crra);
    for (std::size_t k = 0; k < steps; ++k)
        fnl::step_geometric(sys, strategy, model, noise, k);

    for (std::size_t r = 0; r < reps; ++r) {
        const auto m = fnl::empirical_measure(sys, r, steps);
        REQUIRE(m.atoms.size() == agents);
        for (std::size_t i = 0; i < agents; ++i)
            CHECK(m.atoms[i] == sys.at(steps, r, i));
        const auto slice =
            std::span<const double>(sys.slice(steps)).subspan(r * agents, agents);
        CHECK(fnl::geometric_average(m) ==
              Approx(fnl::replication_lambda(fnl::Game::Crra, slice))
                  .epsilon(1e-15));
    }
    CHECK_THROWS_AS(fnl::empirical_measure(sys, reps, 0), fnl::SizeMismatch);
    CHECK_THROWS_AS(fnl::empirical_measure(sys, 0, steps + 1), fnl::SizeMismatch);
}

TEST_CASE("make_system validates inputs and lays out the grid", "[particles]") {
    const auto sys =
        fnl::make_system(fnl::Dynamics::Arithmetic, 2, 3, 5, 0.125, 0.7);
    REQUIRE(sys.time_grid.size() == 6);
    for (std::size_t k = 0; k <= 5; ++k)
        CHECK(sys.time_grid[k] == static_cast<double>(k) * 0.125);
    CHECK(sys.wealth.size() == 6 * 3 * 2);
    for (double x : sys.wealth) CHECK(x == 0.7);
    CHECK(sys.factor_path == std::vector<double>(6, 0.0));

    CHECK_THROWS_AS(fnl::make_system(fnl::Dynamics::Arithmetic, 0, 1, 1, 0.1, 1.0),
                    fnl::DomainError);
    CHECK_THROWS_AS(fnl::make_system(fnl::Dynamics::Arithmetic, 1, 1, 1, 0.0, 1.0),
                    fnl::DomainError);
    CHECK_THROWS_AS(fnl::make_system(fnl::Dynamics::Geometric, 1, 1, 1, 0.1, 0.0),
                    fnl::DomainError);
    CHECK_THROWS_AS(fnl::make_system(fnl::Dynamics::Geometric, 1, 1, 1, 0.1, -1.0),
                    fnl::DomainError);
}

TEST_CASE("the shared factor advances on the common increments", "[particles]") {
    fnl::CoefficientModel model;
    model.mu.kind = fnl::CoeffKind::CommonFactor;
    model.mu.link = fnl::FactorLink::Exp;
    model.mu.scale = 0.05;
    model.factor = fnl::FactorParams{2.0, 0.5, 0.3};
    REQUIRE(model.uses_factor());

    const double dt = 0.125;
    const std::size_t steps = 3;
    const auto noise = fnl::generate_noise(5, 1, 2, 1, steps, dt);
    auto sys = fnl::make_system(fnl::Dynamics::Arithmetic, 1, 2, steps, dt, 1.0,
                                model.factor);
    CHECK(sys.factor_path[0] == 0.5);
    const auto strategy = fnl::StrategyClosure::constant(0.5);
    for (std::size_t k = 0; k < steps; ++k)
        fnl::step_arithmetic(sys, strategy, model, noise, k);
    double z = 0.5;
    for (std::size_t k = 0; k < steps; ++k) {
        z = fnl::factor_step(model.factor, z, dt, noise.common(k));
        CHECK(sys.factor_path[k + 1] == z);
    }
}

TEST_CASE("step functions reject mismatched dynamics and ragged indices",
          "[particles]") {
    const fnl::CoefficientModel model;
    const auto strategy = fnl::StrategyClosure::constant(0.1);
    const auto noise = fnl::generate_noise(1, 0, 1, 1, 2, 0.5);
    auto arith = fnl::make_system(fnl::Dynamics::Arithmetic, 1, 1, 2, 0.5, 1.0);
    auto geom = fnl::make_system(fnl::Dynamics::Geometric, 1, 1, 2, 0.5, 1.0);
    CHECK_THROWS_AS(fnl::step_arithmetic(geom, strategy, model, noise, 0),
                    fnl::DomainError);
    CHECK_THROWS_AS(fnl::step_geometric(arith, strategy, model, noise, 0),
                    fnl::DomainError);
    CHECK_THROWS_AS(fnl::step_arithmetic(arith, strategy, model, noise, 2),
                    fnl::SizeMismatch);
}
