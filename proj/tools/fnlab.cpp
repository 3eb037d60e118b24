// fnlab: command-line driver for the forward-Nash laboratory.
//
// Subcommands: simulate | equilibrium | verify | adjudicate | converge |
// deriv-check. Every run is deterministic in (config text, seed) and
// independent of --threads; data files are byte-identical across reruns.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fnl/fnl.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
    std::string format; // empty = take from config
    std::size_t threads = 0;
    bool dump_paths = false;
    bool per_agent = false;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config_path, "scenario configuration file")
        ->required();
    cmd->add_option("--seed", a.seed,
                    "master seed override (defaults to the config value)");
    cmd->add_option("--out", a.out, "output file (stdout when omitted)");
    cmd->add_option("--format", a.format, "output format: csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--threads", a.threads,
                    "worker threads (0 = available parallelism)");
}

struct LoadedConfig {
    fnl::ScenarioConfig cfg;
    std::string text;
};

LoadedConfig load_config(const CLI::App* cmd, CommonArgs& a) {
    std::ifstream is(a.config_path, std::ios::binary);
    if (!is)
        throw fnl::DomainError("cannot open config file '" + a.config_path +
                               "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    LoadedConfig lc{fnl::parse_config(buf.str()), buf.str()};
    a.seed_set = cmd->count("--seed") > 0;
    if (a.seed_set) lc.cfg.master_seed = a.seed;
    if (!a.format.empty())
        lc.cfg.format = a.format == "json" ? fnl::OutputFormat::Json
                                           : fnl::OutputFormat::Csv;
    if (!a.out.empty()) lc.cfg.out = a.out;
    for (const auto& w : lc.cfg.warnings) fnl::log::info("config: %s", w.c_str());
    return lc;
}

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Emit a table to --out (plus manifest) or stdout.
void emit(const fnl::Table& table, const fnl::ScenarioConfig& cfg,
          const LoadedConfig& lc, const CommonArgs& a,
          const std::string& command, const std::string& verdict = {},
          std::vector<std::string> extra_outputs = {}) {
    const bool json = cfg.format == fnl::OutputFormat::Json;
    if (cfg.out.empty()) {
        if (json)
            fnl::write_json(table, std::cout);
        else
            fnl::write_csv(table, std::cout);
        return;
    }
    fnl::write_table_file(table, cfg.out, json);
    fnl::RunManifest m;
    m.command = command;
    m.config_hash = fnl::fnv1a64(lc.text);
    m.master_seed = cfg.master_seed;
    m.threads = a.threads;
    m.outputs.push_back(cfg.out);
    for (auto& o : extra_outputs) m.outputs.push_back(std::move(o));
    m.verdict = verdict;
    m.generated_at = timestamp_utc();
    fnl::write_manifest(m, cfg.out + ".manifest.json");
    fnl::log::info("wrote %s", cfg.out.c_str());
}

fnl::Cell num(double v) { return fnl::Cell::number(v); }
fnl::Cell idx(std::size_t v) {
    return fnl::Cell::integer(static_cast<std::int64_t>(v));
}

// Mean and standard deviation of a span (population sd).
std::pair<double, double> mean_sd(std::span<const double> xs) {
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double s2 = 0.0;
    for (double x : xs) s2 += (x - m) * (x - m);
    return {m, std::sqrt(s2 / static_cast<double>(xs.size()))};
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int run_simulate(const LoadedConfig& lc, const CommonArgs& a) {
    const fnl::ScenarioConfig& cfg = lc.cfg;
    fnl::Table table;
    table.columns = {"scenario", "step",        "time",  "wealth_mean",
                     "wealth_sd", "lambda_hat", "K_mean", "G_mean"};

    fnl::Table paths;
    paths.columns = {"scenario", "replication", "agent",
                     "step",     "time",        "wealth"};

    std::vector<std::vector<std::vector<fnl::Cell>>> rows(cfg.n_scenarios);
    std::vector<std::vector<std::vector<fnl::Cell>>> path_rows(
        a.dump_paths ? cfg.n_scenarios : 0);

    fnl::parallel_for(cfg.n_scenarios, a.threads, [&](std::size_t s) {
        const auto models = cfg.draw_models(static_cast<std::uint32_t>(s));
        fnl::SimulationEngine eng(cfg.engine_spec(static_cast<std::uint32_t>(s)),
                                  fnl::ModelSet{models},
                                  cfg.strategy_closure());
        auto& out = rows[s];
        eng.run([&](const fnl::SimulationEngine& e) {
            const auto [wm, wsd] = mean_sd(e.wealth());
            const double lam = fnl::conditional_lambda(
                cfg.base_game(), e.wealth(), e.spec().n_agents);
            const auto [km, ksd] = mean_sd(e.corrections_K());
            const auto [gm, gsd] = mean_sd(e.corrections_G());
            (void)ksd;
            (void)gsd;
            out.push_back({idx(s),
                           idx(e.grid_index()),
                           num(e.time()), num(wm), num(wsd), num(lam),
                           num(km), num(gm)});
            if (a.dump_paths) {
                const std::size_t n = e.spec().n_agents;
                const auto w = e.wealth();
                for (std::size_t r = 0; r < e.spec().n_replications; ++r)
                    for (std::size_t i = 0; i < n; ++i)
                        path_rows[s].push_back(
                            {idx(s),
                             idx(r),
                             idx(i),
                             idx(e.grid_index()),
                             num(e.time()), num(w[r * n + i])});
            }
        });
    });
    for (auto& block : rows)
        for (auto& r : block) table.add_row(std::move(r));

    std::vector<std::string> extra;
    if (a.dump_paths) {
        for (auto& block : path_rows)
            for (auto& r : block) paths.add_row(std::move(r));
        if (cfg.out.empty()) {
            fnl::log::error("%s",
                            "--dump-paths requires --out; skipping path dump");
        } else {
            const std::string ppath = cfg.out + ".paths.csv";
            fnl::write_table_file(paths, ppath, /*as_json=*/false);
            extra.push_back(ppath);
        }
    }
    emit(table, cfg, lc, a, "simulate", {}, std::move(extra));
    return 0;
}

// ---------------------------------------------------------------------------
// equilibrium
// ---------------------------------------------------------------------------

int run_equilibrium(const LoadedConfig& lc, const CommonArgs& a) {
    const fnl::ScenarioConfig& cfg = lc.cfg;
    const std::size_t n_cols =
        cfg.mean_field() ? 1 : cfg.population; // pi_star columns
    fnl::Table table;
    table.columns = {"scenario",    "step",        "time",
                     "phi_sigma",   "psi_sigma",   "e1_pi_sigma",
                     "e1_pi_mu",    "e1_pi2_Sigma"};
    if (a.per_agent)
        for (std::size_t i = 0; i < n_cols; ++i)
            table.columns.push_back("pi_star_" + std::to_string(i));

    std::vector<std::vector<std::vector<fnl::Cell>>> rows(cfg.n_scenarios);
    fnl::parallel_for(cfg.n_scenarios, a.threads, [&](std::size_t s) {
        const auto models = cfg.draw_models(static_cast<std::uint32_t>(s));
        fnl::SimulationEngine eng(
            cfg.engine_spec(static_cast<std::uint32_t>(s)),
            fnl::ModelSet{models},
            fnl::StrategyClosure::equilibrium(cfg.base_game()));
        eng.run([&](const fnl::SimulationEngine& e) {
            const auto& w = e.weights();
            std::vector<fnl::Cell> row{idx(s),
                                       idx(e.grid_index()),
                                       num(e.time()),
                                       num(w.phi_sigma),
                                       num(w.psi_sigma),
                                       num(w.e1_pi_sigma),
                                       num(w.e1_pi_mu),
                                       num(w.e1_pi2_Sigma)};
            if (a.per_agent) {
                const std::size_t n = e.spec().n_agents;
                const std::size_t R = e.spec().n_replications;
                const auto& pi = e.eval().pi;
                for (std::size_t i = 0; i < n; ++i) {
                    double m = 0.0;
                    for (std::size_t r = 0; r < R; ++r) m += pi[r * n + i];
                    row.push_back(num(m / static_cast<double>(R)));
                }
            }
            rows[s].push_back(std::move(row));
        });
    });
    for (auto& block : rows)
        for (auto& r : block) table.add_row(std::move(r));
    emit(table, cfg, lc, a, "equilibrium");
    return 0;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int run_verify(const LoadedConfig& lc, const CommonArgs& a) {
    const fnl::ScenarioConfig& cfg = lc.cfg;
    fnl::Table table;
    table.columns = {"scenario",       "step",   "time",
                     "drift_estimate", "stderr", "t_stat",
                     "predicted_drift_mean"};

    struct ScenarioResult {
        fnl::DriftReport report;
        std::vector<double> predicted; // one per interval, left endpoint
    };
    std::vector<ScenarioResult> results(cfg.n_scenarios);

    fnl::parallel_for(cfg.n_scenarios, a.threads, [&](std::size_t s) {
        const auto models = cfg.draw_models(static_cast<std::uint32_t>(s));
        fnl::SimulationEngine eng(cfg.engine_spec(static_cast<std::uint32_t>(s)),
                                  fnl::ModelSet{models},
                                  cfg.strategy_closure());
        fnl::DriftVerifier verifier(cfg.measure_argument);
        auto& res = results[s];
        std::vector<double> U, C;
        eng.run([&](const fnl::SimulationEngine& e) {
            verifier(e);
            if (e.grid_index() == e.spec().steps) return;
            // Instantaneous predicted drift at this grid point: quadratic in
            // the gap to the best response against the realized aggregate.
            fnl::detail::field_slice(cfg.base_game(), e.eval(), e.wealth(),
                                     e.corrections_K(), e.corrections_G(),
                                     e.realized(), cfg.measure_argument,
                                     e.spec().n_agents, U, C);
            const std::size_t n = e.spec().n_agents;
            const std::size_t R = e.spec().n_replications;
            double acc = 0.0;
            for (std::size_t r = 0; r < R; ++r) {
                double A = e.realized().e1_pi_sigma;
                if (cfg.measure_argument ==
                    fnl::MeasureArgument::ReplicationAverage) {
                    A = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        const std::size_t j = r * n + i;
                        A += e.eval().pi[j] * e.eval().values[j].sigma;
                    }
                    A /= static_cast<double>(n);
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const std::size_t j = r * n + i;
                    const auto& v = e.eval().values[j];
                    const double star =
                        fnl::best_response(cfg.base_game(), v, A);
                    acc += cfg.base_game() == fnl::Game::Cara
                               ? fnl::predicted_drift_cara(v, U[j],
                                                           e.eval().pi[j], star)
                               : fnl::predicted_drift_crra(
                                     v, U[j], e.corrections_K()[j],
                                     e.eval().pi[j], star);
                }
            }
            res.predicted.push_back(acc / static_cast<double>(n * R));
        });
        res.report = verifier.report();
    });

    for (std::size_t s = 0; s < results.size(); ++s) {
        const auto& res = results[s];
        for (std::size_t k = 0; k < res.report.steps.size(); ++k) {
            const auto& st = res.report.steps[k];
            table.add_row({idx(s),
                           idx(k), num(st.time),
                           num(st.estimate), num(st.se), num(st.t_stat),
                           num(res.predicted[k])});
        }
    }
    emit(table, cfg, lc, a, "verify");
    return 0;
}

// ---------------------------------------------------------------------------
// adjudicate
// ---------------------------------------------------------------------------

int run_adjudicate(const LoadedConfig& lc, const CommonArgs& a) {
    const fnl::ScenarioConfig& cfg = lc.cfg;
    const auto models = cfg.draw_models(0);
    const fnl::AdjudicationResult res = fnl::adjudicate_variant(
        cfg.engine_spec(0), fnl::ModelSet{models}, cfg.strategy_closure(),
        cfg.measure_argument);

    std::cout << "verdict: " << fnl::name(res.verdict)
              << "  (max |t| half = " << fnl::format_number(res.half.max_abs_t())
              << ", full = " << fnl::format_number(res.full.max_abs_t())
              << ", threshold = " << fnl::format_number(res.threshold) << ")\n";

    fnl::Table table;
    table.columns = {"variant", "step",   "time",
                     "drift_estimate", "stderr", "t_stat"};
    auto add = [&](const char* tag, const fnl::DriftReport& rep) {
        for (std::size_t k = 0; k < rep.steps.size(); ++k) {
            const auto& st = rep.steps[k];
            table.add_row({fnl::Cell::of(tag), idx(k),
                           num(st.time), num(st.estimate), num(st.se),
                           num(st.t_stat)});
        }
    };
    add("half", res.half);
    add("full", res.full);
    emit(table, cfg, lc, a, "adjudicate", fnl::name(res.verdict));
    return res.verdict == fnl::Verdict::Inconclusive ? 2 : 0;
}

// ---------------------------------------------------------------------------
// converge
// ---------------------------------------------------------------------------

int run_converge(const LoadedConfig& lc, const CommonArgs& a) {
    const fnl::ScenarioConfig& cfg = lc.cfg;
    if (cfg.model.mu.kind != fnl::CoeffKind::Constant ||
        cfg.model.nu.kind != fnl::CoeffKind::Constant ||
        cfg.model.sigma.kind != fnl::CoeffKind::Constant)
        throw fnl::DomainError(
            "converge requires constant mu, nu, sigma coefficients");

    fnl::ConvergenceConfig cc;
    cc.n_list = cfg.converge.n_list;
    cc.type_redraws = cfg.converge.type_redraws;
    cc.path_reps = cfg.converge.path_reps;
    cc.reference_multiple = cfg.converge.reference_multiple;
    cc.steps = cfg.steps;
    cc.dt = cfg.dt;
    cc.x0 = cfg.x0;
    cc.master_seed = cfg.master_seed;
    cc.scenario_base = 0;

    const fnl::ConvergenceTable ct =
        fnl::convergence_study(cfg.base_game(), cfg.type_sampler(), cc);
    fnl::log::info("reference cloud: %zu particles, phi_mf = %.12g, psi_mf = %.12g",
                   ct.n_reference, ct.phi_mf, ct.psi_mf);

    fnl::Table table;
    table.columns = {"n",           "phi_gap", "phi_gap_se", "psi_gap",
                     "psi_gap_se",  "w2_sup",  "w2_sup_se"};
    for (const auto& r : ct.rows)
        table.add_row({idx(r.n), num(r.phi_gap),
                       num(r.phi_gap_se), num(r.psi_gap), num(r.psi_gap_se),
                       num(r.w2_sup), num(r.w2_sup_se)});
    emit(table, cfg, lc, a, "converge");
    return 0;
}

// ---------------------------------------------------------------------------
// deriv-check
// ---------------------------------------------------------------------------

int run_deriv_check(const LoadedConfig& lc, const CommonArgs& a) {
    const fnl::ScenarioConfig& cfg = lc.cfg;
    fnl::Table table;
    table.columns = {"functional_or_field", "entry", "analytic", "finite_diff",
                     "rel_err"};
    auto push = [&](const fnl::FdCheckEntry& e) {
        table.add_row({fnl::Cell::of(e.field), fnl::Cell::of(e.entry),
                       num(e.analytic), num(e.finite_diff), num(e.rel_err)});
    };

    const std::vector<double> atoms{0.7, 1.1, 1.6, 2.4, 3.0};
    for (const fnl::FunctionalKind kind :
         {fnl::FunctionalKind::ArithMean, fnl::FunctionalKind::GeomMean}) {
        const fnl::MeasureFunctional f{kind};
        for (std::size_t i = 0; i < atoms.size(); ++i)
            push(fnl::fd_lift_check(f, atoms, i));
        push(fnl::fd_lift_check2(f, atoms, 1, 1));
        push(fnl::fd_lift_check2(f, atoms, 1, 3));
    }

    const fnl::EmpiricalMeasure mu{atoms};
    fnl::CaraFieldParams cp;
    cp.delta = 1.25;
    cp.theta = 0.6;
    cp.K = 0.2;
    cp.Kdot = 0.05;
    for (const auto& e : fnl::cara_bundle_check(1.3, mu, cp)) push(e);

    fnl::CrraFieldParams pp;
    pp.delta = 2.0;
    pp.theta = 0.5;
    pp.K = 0.9;
    pp.Kdot = -0.02;
    for (const auto& e : fnl::crra_bundle_check(1.3, mu, pp)) push(e);

    fnl::CrraFieldParams lp;
    lp.delta = 1.0;
    lp.theta = 0.5;
    lp.K = 1.0;
    lp.G = 0.1;
    lp.Gdot = -0.01;
    for (const auto& e : fnl::crra_bundle_check(1.3, mu, lp)) push(e);

    emit(table, cfg, lc, a, "deriv-check");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"forward-Nash laboratory"};
    app.require_subcommand(1);
    app.set_version_flag("--version", fnl::version);

    CommonArgs args;
    CLI::App* c_sim = app.add_subcommand("simulate", "run the particle system");
    c_sim->add_flag("--dump-paths", args.dump_paths,
                    "also write per-path wealth CSV (requires --out)");
    CLI::App* c_eq =
        app.add_subcommand("equilibrium", "per-step equilibrium weights");
    c_eq->add_flag("--per-agent", args.per_agent,
                   "append per-agent pi_star columns");
    CLI::App* c_ver =
        app.add_subcommand("verify", "martingale / drift verification");
    CLI::App* c_adj =
        app.add_subcommand("adjudicate", "K-variant adjudication");
    CLI::App* c_con =
        app.add_subcommand("converge", "chaos convergence study");
    CLI::App* c_der =
        app.add_subcommand("deriv-check", "derivative verification table");
    for (CLI::App* c : {c_sim, c_eq, c_ver, c_adj, c_con, c_der})
        add_common(c, args);

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* cmd = app.get_subcommands().front();
        const LoadedConfig lc = load_config(cmd, args);
        if (cmd == c_sim) return run_simulate(lc, args);
        if (cmd == c_eq) return run_equilibrium(lc, args);
        if (cmd == c_ver) return run_verify(lc, args);
        if (cmd == c_adj) return run_adjudicate(lc, args);
        if (cmd == c_con) return run_converge(lc, args);
        return run_deriv_check(lc, args);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
}
