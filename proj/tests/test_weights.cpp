#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <vector>

#include "fnl/rng.hpp"
#include "fnl/weights.hpp"

using Catch::Approx;
using fnl::CoefficientValues;
using fnl::Game;

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

const CoefficientValues kRef = values_of(0.1, 0.2, 0.3, 1.0, 0.5);

} // namespace

TEST_CASE("cara homogeneous closed form", "[weights]") {
    const std::array vals{kRef};
    const auto w = fnl::equilibrium_weights(Game::Cara, vals, 1);
    CHECK(w.phi_sigma == Approx(3.0 / 13.0).epsilon(1e-14));
    CHECK(w.psi_sigma == Approx(9.0 / 26.0).epsilon(1e-14));
    CHECK(w.e1_pi_sigma == Approx(6.0 / 17.0).epsilon(1e-14));
    CHECK(fnl::cara_strategy(kRef, w) == Approx(20.0 / 17.0).epsilon(1e-14));
    CHECK(w.e1_pi_mu == Approx(2.0 / 17.0).epsilon(1e-14));
    CHECK(w.e1_pi2_Sigma ==
          Approx((20.0 / 17.0) * (20.0 / 17.0) * 0.13).epsilon(1e-14));
}

TEST_CASE("crra homogeneous closed form, delta = 2", "[weights]") {
    const std::array vals{values_of(0.1, 0.2, 0.3, 2.0, 0.5)};
    const auto w = fnl::equilibrium_weights(Game::Crra, vals, 1);
    CHECK(w.phi_sigma == Approx(6.0 / 13.0).epsilon(1e-14));
    CHECK(w.psi_sigma == Approx(-9.0 / 26.0).epsilon(1e-14));
    CHECK(w.e1_pi_sigma == Approx(12.0 / 35.0).epsilon(1e-14));
    CHECK(fnl::crra_strategy(vals[0], w) == Approx(8.0 / 7.0).epsilon(1e-14));
    CHECK(w.e1_pi_mu == Approx(4.0 / 35.0).epsilon(1e-14));
    CHECK(w.e1_pi2_Sigma == Approx(208.0 / 1225.0).epsilon(1e-14));
}

TEST_CASE("exact reductions", "[weights]") {
    // theta = 0: Merton ratio, exactly (the competition term is a true zero).
    const std::array merton{values_of(0.1, 0.2, 0.3, 1.7, 0.0)};
    const auto wm = fnl::equilibrium_weights(Game::Cara, merton, 1);
    CHECK(fnl::cara_strategy(merton[0], wm) ==
          merton[0].mu * merton[0].delta / merton[0].Sigma);

    // CRRA delta = 1: log investor ignores competition for every theta.
    for (double theta : {0.0, 0.5, 1.0}) {
        const std::array log_inv{values_of(0.1, 0.2, 0.3, 1.0, theta)};
        const auto wl = fnl::equilibrium_weights(Game::Crra, log_inv, 1);
        CHECK(fnl::crra_strategy(log_inv[0], wl) ==
              log_inv[0].mu / log_inv[0].Sigma);
        CHECK(wl.psi_sigma == 0.0);
    }

    // sigma = 0: no common asset exposure, aggregate vanishes exactly.
    const std::array idio_only{values_of(0.1, 0.2, 0.0, 1.0, 0.8)};
    const auto wi = fnl::equilibrium_weights(Game::Cara, idio_only, 1);
    CHECK(wi.e1_pi_sigma == 0.0);
    CHECK(wi.phi_sigma == 0.0);
}

TEST_CASE("singular equilibrium guard", "[weights]") {
    // theta = 1, nu = 0: psi = 1 and the fixed point escapes to infinity.
    const std::array sing{values_of(0.1, 0.0, 0.3, 1.0, 1.0)};
    CHECK_THROWS_AS(fnl::equilibrium_weights(Game::Cara, sing, 1),
                    fnl::SingularEquilibrium);
}

TEST_CASE("heterogeneous population weights are cross-sectional averages",
          "[weights]") {
    const std::array vals{values_of(0.1, 0.2, 0.3, 1.0, 0.0),
                          values_of(0.05, 0.1, 0.4, 2.0, 0.0)};
    const auto w = fnl::equilibrium_weights(Game::Cara, vals, 2);
    const double phi_expect =
        0.5 * (0.1 * 1.0 * 0.3 / 0.13 + 0.05 * 2.0 * 0.4 / 0.17);
    CHECK(w.phi_sigma == Approx(phi_expect).epsilon(1e-14));
    // theta = 0 for both: strategies are personal Merton ratios.
    CHECK(fnl::cara_strategy(vals[0], w) == Approx(0.1 / 0.13));
    CHECK(fnl::cara_strategy(vals[1], w) == Approx(0.1 / 0.17));
}

TEST_CASE("aggregate is scale-covariant", "[weights]") {
    // Scaling (mu, nu, sigma) by c leaves phi/psi/E invariant and divides
    // strategies by c.
    const double c = 3.0;
    const std::array base{kRef};
    const std::array scaled{values_of(0.3, 0.6, 0.9, 1.0, 0.5)};
    const auto w0 = fnl::equilibrium_weights(Game::Cara, base, 1);
    const auto w1 = fnl::equilibrium_weights(Game::Cara, scaled, 1);
    CHECK(w1.phi_sigma == Approx(w0.phi_sigma).epsilon(1e-13));
    CHECK(w1.psi_sigma == Approx(w0.psi_sigma).epsilon(1e-13));
    CHECK(w1.e1_pi_sigma == Approx(w0.e1_pi_sigma).epsilon(1e-13));
    CHECK(fnl::cara_strategy(scaled[0], w1) ==
          Approx(fnl::cara_strategy(base[0], w0) / c).epsilon(1e-13));
}

TEST_CASE("fixed-point iteration agrees with the closed form", "[weights]") {
    const fnl::Rng rng(31);
    fnl::StreamPoint p;
    p.lane = fnl::Lane::Aux;
    auto draw = [&](std::uint32_t rep, std::uint32_t step, double lo,
                    double hi) {
        p.replication = rep;
        p.step = step;
        return lo + rng.uniform(p) * (hi - lo);
    };

    for (std::uint32_t trial = 0; trial < 10; ++trial) {
        const Game g = trial % 2 ? Game::Crra : Game::Cara;
        std::vector<CoefficientValues> vals;
        for (std::uint32_t i = 0; i < 6; ++i)
            vals.push_back(values_of(draw(trial, 8 * i, 0.02, 0.2),
                                     draw(trial, 8 * i + 1, 0.05, 0.4),
                                     draw(trial, 8 * i + 2, 0.05, 0.4),
                                     draw(trial, 8 * i + 3, 0.5, 2.0),
                                     draw(trial, 8 * i + 4, 0.0, 0.6)));
        const auto w = fnl::equilibrium_weights(g, vals, vals.size());
        const double fp = fnl::fixed_point_solve(
            fnl::aggregation_map(g, vals, vals.size()), 0.0, 1e-14, 500);
        CHECK(fp == Approx(w.e1_pi_sigma).epsilon(1e-10));
    }
}

TEST_CASE("axis checks reject ragged layouts", "[weights]") {
    const std::vector<CoefficientValues> vals(5, kRef);
    CHECK_THROWS_AS(fnl::equilibrium_weights(Game::Cara, vals, 2),
                    fnl::SizeMismatch);
    CHECK_THROWS_AS(fnl::equilibrium_weights(Game::Cara, vals, 0),
                    fnl::SizeMismatch);
}
