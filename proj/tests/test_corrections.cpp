#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>

#include "fnl/corrections.hpp"
#include "fnl/weights.hpp"

using Catch::Approx;
using fnl::CoefficientValues;
using fnl::Game;
using fnl::Quadrature;
using fnl::VariantFlag;

namespace {

CoefficientValues values_of(double mu, double nu, double sigma, double delta,
                            double theta) {
    CoefficientValues v;
    v.mu = mu;
    v.nu = nu;
    v.sigma = sigma;
    v.Sigma = nu * nu + sigma * sigma;
    v.delta = delta;
    v.theta = theta;
    return v;
}

fnl::EquilibriumWeights weights_for(Game g, const CoefficientValues& v) {
    const std::array vals{v};
    return fnl::equilibrium_weights(g, vals, 1);
}

} // namespace

TEST_CASE("cara K rate closed forms", "[corrections]") {
    // theta = 0: only the Merton term mu^2/(2 Sigma) = 1/26 survives.
    const auto v0 = values_of(0.1, 0.2, 0.3, 1.0, 0.0);
    CHECK(fnl::cara_K_rate(v0, weights_for(Game::Cara, v0)) ==
          Approx(1.0 / 26.0).epsilon(1e-14));

    // Reference competitive scenario: E = 6/17, E1[pi mu] = 2/17, and
    //   1/26 + (1/2)(3/13)(6/17) - (1/8)(4/13)(6/17)^2 - (1/2)(2/17)
    // reduces to 9/578.
    const auto v = values_of(0.1, 0.2, 0.3, 1.0, 0.5);
    CHECK(fnl::cara_K_rate(v, weights_for(Game::Cara, v)) ==
          Approx(9.0 / 578.0).epsilon(1e-13));
}

TEST_CASE("crra K rates at delta = 2 for both variants", "[corrections]") {
    const auto v = values_of(0.1, 0.2, 0.3, 2.0, 0.5);
    const auto w = weights_for(Game::Crra, v);
    // Hand-reduced: E = 12/35, E1[pi mu] = 4/35, E1[pi^2 Sigma] = 208/1225,
    // Q = 52/1225.
    CHECK(fnl::crra_K_rate(v, w, VariantFlag::Half) ==
          Approx(-43.0 / 2450.0).epsilon(1e-13));
    CHECK(fnl::crra_K_rate(v, w, VariantFlag::Full) ==
          Approx(-52.0 / 1225.0).epsilon(1e-13));
}

TEST_CASE("crra G rates on the log branch", "[corrections]") {
    // delta = 1: E1[pi mu] = 1/13, E1[pi^2 Sigma] = 1/13.
    const auto v = values_of(0.1, 0.2, 0.3, 1.0, 0.5);
    const auto w = weights_for(Game::Crra, v);
    CHECK(fnl::crra_G_rate(v, w, VariantFlag::Half) ==
          Approx(-1.0 / 52.0).epsilon(1e-13));
    CHECK(fnl::crra_G_rate(v, w, VariantFlag::Full) ==
          Approx(-1.0 / 26.0).epsilon(1e-13));

    // theta = 0 collapses both variants to -mu^2/(2 Sigma).
    const auto v0 = values_of(0.1, 0.2, 0.3, 1.0, 0.0);
    const auto w0 = weights_for(Game::Crra, v0);
    CHECK(fnl::crra_G_rate(v0, w0, VariantFlag::Half) ==
          fnl::crra_G_rate(v0, w0, VariantFlag::Full));
    CHECK(fnl::crra_G_rate(v0, w0, VariantFlag::Half) ==
          Approx(-1.0 / 26.0).epsilon(1e-14));

    CHECK_THROWS_AS(fnl::crra_K_increment(v, w, 0.015625, VariantFlag::Half),
                    fnl::DomainError);
}

TEST_CASE("variant coincidence at theta = 0 for the power branch",
          "[corrections]") {
    const auto v = values_of(0.1, 0.2, 0.3, 2.0, 0.0);
    const auto w = weights_for(Game::Crra, v);
    CHECK(fnl::crra_K_rate(v, w, VariantFlag::Half) ==
          fnl::crra_K_rate(v, w, VariantFlag::Full));
}

TEST_CASE("correction accumulation over a unit horizon", "[corrections]") {
    const std::size_t steps = 64;
    const double dt = 1.0 / 64.0;

    // CARA, theta = 0: K(1) = 1/26 under either quadrature (constant rate).
    const auto v0 = values_of(0.1, 0.2, 0.3, 1.0, 0.0);
    const double r0 = fnl::cara_K_rate(v0, weights_for(Game::Cara, v0));
    auto cara = fnl::CorrectionProcess::start(Game::Cara, VariantFlag::Half,
                                              steps);
    auto cara_trap = fnl::CorrectionProcess::start(Game::Cara,
                                                   VariantFlag::Half, steps);
    for (std::size_t k = 0; k < steps; ++k) {
        cara.advance_cara(r0, r0, dt, Quadrature::LeftEndpoint);
        cara_trap.advance_cara(r0, r0, dt, Quadrature::Trapezoid);
    }
    REQUIRE(cara.K.size() == steps + 1);
    CHECK(cara.K.back() == Approx(1.0 / 26.0).epsilon(1e-13));
    CHECK(cara_trap.K.back() == Approx(cara.K.back()).epsilon(1e-15));

    // CRRA, delta = 2: K multiplies exp(rate dt) per step, so the unit-time
    // product is exp(rate) to rounding.
    const auto v = values_of(0.1, 0.2, 0.3, 2.0, 0.5);
    const auto w = weights_for(Game::Crra, v);
    const double rk = fnl::crra_K_rate(v, w, VariantFlag::Half);
    auto crra = fnl::CorrectionProcess::start(Game::Crra, VariantFlag::Half,
                                              steps);
    for (std::size_t k = 0; k < steps; ++k)
        crra.advance_crra(rk, rk, 0.0, 0.0, dt, Quadrature::LeftEndpoint);
    CHECK(crra.K.back() == Approx(std::exp(-43.0 / 2450.0)).epsilon(1e-13));
    CHECK(crra.G.back() == Approx(0.0).margin(1e-15));
    CHECK(crra.K.front() == 1.0);

    // Trapezoid averages the endpoint rates: a linearly growing rate
    // r(t) = t integrates to 1/2 exactly under the trapezoid rule.
    auto ramp = fnl::CorrectionProcess::start(Game::Cara, VariantFlag::Half,
                                              steps);
    for (std::size_t k = 0; k < steps; ++k)
        ramp.advance_cara(static_cast<double>(k) * dt,
                          static_cast<double>(k + 1) * dt, dt,
                          Quadrature::Trapezoid);
    CHECK(ramp.K.back() == Approx(0.5).epsilon(1e-12));
}
