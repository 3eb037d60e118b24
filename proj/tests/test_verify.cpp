#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "fnl/coeffs.hpp"
#include "fnl/engine.hpp"
#include "fnl/strategy.hpp"
#include "fnl/verify.hpp"

using Catch::Approx;

namespace {

fnl::CoefficientValues reference_values(double delta, double theta) {
    fnl::CoefficientValues v;
    v.mu = 0.1;
    v.nu = 0.2;
    v.sigma = 0.3;
    v.Sigma = 0.13;
    v.delta = delta;
    v.theta = theta;
    return v;
}

fnl::EngineSpec desk_spec(fnl::Game game) {
    fnl::EngineSpec s;
    s.game = game;
    s.n_agents = 4;
    s.n_replications = 2000;
    s.steps = 16;
    s.dt = 1.0 / 16.0;
    s.x0 = 1.0;
    s.master_seed = 7;
    s.scenario = 0;
    return s;
}

fnl::DriftReport run_verifier(const fnl::EngineSpec& spec,
                              const fnl::CoefficientModel& model,
                              const fnl::StrategyClosure& strategy) {
    const fnl::ModelSet ms{std::span<const fnl::CoefficientModel>(&model, 1)};
    fnl::SimulationEngine engine(spec, ms, strategy);
    fnl::DriftVerifier verifier(fnl::MeasureArgument::ConditionalMean);
    engine.run([&](const fnl::SimulationEngine& e) { verifier(e); });
    return verifier.report();
}

} // namespace

TEST_CASE("quadratic drift predictions reproduce frozen values", "[verify]") {
    // CARA: Sigma/(2 delta^2) U (pi - pi*)^2 = 0.13/2 * (-1) * 1 = -0.065.
    const auto vc = reference_values(1.0, 0.5);
    CHECK(fnl::predicted_drift_cara(vc, -1.0, 2.0, 1.0) ==
          Approx(-0.065).epsilon(1e-15));
    CHECK(fnl::predicted_drift_cara(vc, -1.0, 1.0, 1.0) == 0.0);

    // CRRA log branch: -Sigma/2 K (pi - pi*)^2 = -0.065 at K = 1.
    const auto vl = reference_values(1.0, 0.5);
    CHECK(fnl::predicted_drift_crra(vl, 123.0, 1.0, 2.0, 1.0) ==
          Approx(-0.065).epsilon(1e-15));

    // CRRA power branch, delta = 2, c = 1/2:
    // -(Sigma / (2 delta)) c U = -0.13/4 * 0.5 = -0.01625 at U = 1.
    const auto vp = reference_values(2.0, 0.5);
    CHECK(fnl::predicted_drift_crra(vp, 1.0, 0.9, 2.0, 1.0) ==
          Approx(-0.01625).epsilon(1e-15));
    CHECK(fnl::predicted_drift_crra(vp, 1.0, 0.9, 1.0, 1.0) == 0.0);
}

TEST_CASE("equilibrium drift passes the martingale test at desk scale",
          "[verify]") {
    const fnl::CoefficientModel model; // homogeneous defaults, theta = 0.5

    SECTION("cara") {
        const auto report =
            run_verifier(desk_spec(fnl::Game::Cara), model,
                         fnl::StrategyClosure::equilibrium(fnl::Game::Cara));
        REQUIRE(report.steps.size() == 16);
        CHECK(report.max_abs_t() <= 4.0);
    }
    SECTION("crra half variant") {
        auto spec = desk_spec(fnl::Game::Crra);
        spec.variant = fnl::VariantFlag::Half;
        fnl::CoefficientModel crra = model;
        crra.delta = fnl::ParamSpec::constant(2.0);
        const auto report =
            run_verifier(spec, crra,
                         fnl::StrategyClosure::equilibrium(fnl::Game::Crra));
        CHECK(report.max_abs_t() <= 4.0);
    }
}

TEST_CASE("a constant off-equilibrium strategy fails the martingale test",
          "[verify]") {
    const fnl::CoefficientModel model;
    auto spec = desk_spec(fnl::Game::Cara);
    // pi* = 20/17; holding pi = 3 is far from the best response, and the
    // quadratic penalty must show up as a strongly negative drift. Extra
    // replications push the pure drift signal well past the threshold.
    spec.n_replications = 8000;
    const auto report =
        run_verifier(spec, model, fnl::StrategyClosure::constant(3.0));
    CHECK(report.max_abs_t() > 6.0);
    CHECK(report.mean_estimate() < 0.0);
}

TEST_CASE("the common-noise compensator removes the conditional bias",
          "[verify]") {
    // All replications share the common path, so the shared martingale part
    // C dW0 does not average out across replications: without compensation
    // the per-step estimate is an order of magnitude of standard errors away
    // from zero even at equilibrium. Compensation removes that offset while
    // leaving the cross-replication scatter essentially unchanged.
    const fnl::CoefficientModel model;
    const fnl::ModelSet ms{std::span<const fnl::CoefficientModel>(&model, 1)};
    auto spec = desk_spec(fnl::Game::Cara);
    spec.n_replications = 500;

    const auto ens = fnl::evaluate_utility_paths(
        spec, ms, fnl::StrategyClosure::equilibrium(fnl::Game::Cara));
    const auto compensated = fnl::estimate_drift(ens);

    // Same estimator with the compensation dropped.
    const std::size_t total = ens.n_replications * ens.n_agents;
    double raw_max_t = 0.0, comp_var = 0.0, raw_var = 0.0;
    for (std::size_t k = 0; k < ens.steps; ++k) {
        fnl::RunningStat raw;
        for (std::size_t r = 0; r < ens.n_replications; ++r) {
            double acc = 0.0;
            for (std::size_t i = 0; i < ens.n_agents; ++i) {
                const std::size_t j = r * ens.n_agents + i;
                acc += ens.U[(k + 1) * total + j] - ens.U[k * total + j];
            }
            raw.add(acc / (static_cast<double>(ens.n_agents) * ens.dt));
        }
        raw_max_t = std::max(raw_max_t,
                             std::fabs(raw.mean() / raw.stderr_mean()));
        raw_var += raw.stderr_mean() * raw.stderr_mean();
        comp_var += compensated.steps[k].se * compensated.steps[k].se;
    }
    CHECK(raw_max_t > 10.0);
    CHECK(compensated.max_abs_t() <= 4.0);
    CHECK(comp_var <= raw_var * 1.05);
}

TEST_CASE("stored ensembles and the streaming verifier agree exactly",
          "[verify]") {
    const fnl::CoefficientModel model;
    const fnl::ModelSet ms{std::span<const fnl::CoefficientModel>(&model, 1)};
    auto spec = desk_spec(fnl::Game::Crra);
    spec.n_replications = 64;
    const auto strategy = fnl::StrategyClosure::equilibrium(fnl::Game::Crra);

    const auto ens = fnl::evaluate_utility_paths(spec, ms, strategy);
    REQUIRE(ens.U.size() == (spec.steps + 1) * 64 * spec.n_agents);
    REQUIRE(ens.dW0.size() == spec.steps);
    const auto stored = fnl::estimate_drift(ens);

    fnl::SimulationEngine engine(spec, ms, strategy);
    fnl::DriftVerifier verifier(fnl::MeasureArgument::ConditionalMean);
    engine.run([&](const fnl::SimulationEngine& e) { verifier(e); });
    const auto& streamed = verifier.report();

    REQUIRE(stored.steps.size() == streamed.steps.size());
    for (std::size_t k = 0; k < stored.steps.size(); ++k) {
        CHECK(stored.steps[k].time == streamed.steps[k].time);
        CHECK(stored.steps[k].estimate == streamed.steps[k].estimate);
        CHECK(stored.steps[k].se == streamed.steps[k].se);
    }
}

TEST_CASE("drift estimation requires at least two replications", "[verify]") {
    const fnl::CoefficientModel model;
    const fnl::ModelSet ms{std::span<const fnl::CoefficientModel>(&model, 1)};
    auto spec = desk_spec(fnl::Game::Cara);
    spec.n_replications = 1;
    fnl::SimulationEngine engine(
        spec, ms, fnl::StrategyClosure::equilibrium(fnl::Game::Cara));
    fnl::DriftVerifier verifier(fnl::MeasureArgument::ConditionalMean);
    CHECK_THROWS_AS(
        engine.run([&](const fnl::SimulationEngine& e) { verifier(e); }),
        fnl::InsufficientReplications);

    fnl::UtilityPathEnsemble ens;
    ens.n_replications = 1;
    CHECK_THROWS_AS(fnl::estimate_drift(ens), fnl::InsufficientReplications);
}

TEST_CASE("variant adjudication picks a side only when one test passes",
          "[verify]") {
    fnl::CoefficientModel model;
    model.delta = fnl::ParamSpec::constant(2.0);
    const fnl::ModelSet ms{std::span<const fnl::CoefficientModel>(&model, 1)};
    const auto spec = desk_spec(fnl::Game::Crra);
    const auto strategy = fnl::StrategyClosure::equilibrium(fnl::Game::Crra);

    const auto result = fnl::adjudicate_variant(spec, ms, strategy);
    CHECK(result.verdict == fnl::Verdict::Half);
    CHECK(result.half.max_abs_t() <= result.threshold);
    CHECK(result.full.max_abs_t() > result.threshold);

    // With theta = 0 the variants coincide and the contest must be declared
    // inconclusive rather than resolved by noise.
    fnl::CoefficientModel no_interaction = model;
    no_interaction.theta = fnl::ParamSpec::constant(0.0);
    const fnl::ModelSet ms0{
        std::span<const fnl::CoefficientModel>(&no_interaction, 1)};
    const auto tie = fnl::adjudicate_variant(spec, ms0, strategy);
    CHECK(tie.verdict == fnl::Verdict::Inconclusive);
    CHECK(tie.half.max_abs_t() == tie.full.max_abs_t());
}

TEST_CASE("overlay deviations obey the quadratic drift law", "[verify]") {
    const fnl::CoefficientModel model; // constant coefficients required

    SECTION("zero offset is drift-free") {
        const auto out = fnl::overlay_deviation(model, fnl::Game::Cara, 0.0, 8,
                                                2000, 8, 1.0 / 8.0, 1.0, 3, 0);
        for (double p : out.predicted) CHECK(p == 0.0);
        CHECK(out.drift.max_abs_t() <= 4.0);
        CHECK(out.pi_star == Approx(20.0 / 17.0).epsilon(1e-15));
    }
    SECTION("finite offset matches the prediction within noise") {
        // dt must be fine enough for the Euler residual (O(dt) relative to
        // the prediction) to sit inside the statistical band.
        for (const fnl::Game game : {fnl::Game::Cara, fnl::Game::Crra}) {
            const auto out = fnl::overlay_deviation(model, game, 0.5, 8, 4000,
                                                    16, 1.0 / 32.0, 1.0, 3, 0);
            REQUIRE(out.predicted.size() == out.drift.steps.size());
            double pred = 0.0;
            for (double p : out.predicted) {
                CHECK(p < 0.0);
                pred += p;
            }
            pred /= static_cast<double>(out.predicted.size());
            const double est = out.drift.mean_estimate();
            const double se = out.drift.mean_estimate_se();
            CHECK(std::fabs(est - pred) <= 4.0 * se);
        }
    }
    SECTION("guards") {
        fnl::CoefficientModel ramped;
        ramped.mu.kind = fnl::CoeffKind::DeterministicTime;
        ramped.mu.intercept = 0.1;
        ramped.mu.slope = 0.05;
        CHECK_THROWS_AS(fnl::overlay_deviation(ramped, fnl::Game::Cara, 0.5, 4,
                                               100, 4, 0.25, 1.0, 0, 0),
                        fnl::DomainError);
        CHECK_THROWS_AS(fnl::overlay_deviation(model, fnl::Game::Cara, 0.5, 4,
                                               1, 4, 0.25, 1.0, 0, 0),
                        fnl::InsufficientReplications);
        CHECK_THROWS_AS(fnl::overlay_deviation(model, fnl::Game::Crra, 0.5, 4,
                                               100, 4, 0.25, 0.0, 0, 0),
                        fnl::DomainError);
    }
}
