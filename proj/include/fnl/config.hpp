#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "fnl/coeffs.hpp"
#include "fnl/corrections.hpp"
#include "fnl/engine.hpp"
#include "fnl/errors.hpp"
#include "fnl/meanfield.hpp"
#include "fnl/strategy.hpp"

namespace fnl {

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

enum class GameKind { CaraN, CrraN, CaraMf, CrraMf };

inline const char* name(GameKind g) {
    switch (g) {
        case GameKind::CaraN: return "cara_n";
        case GameKind::CrraN: return "crra_n";
        case GameKind::CaraMf: return "cara_mf";
        default: return "crra_mf";
    }
}

enum class OutputFormat { Csv, Json };

struct StrategySpec {
    enum class Kind { Equilibrium, Constant, Perturbed };
    Kind kind = Kind::Equilibrium;
    double value = 0.0;  // Constant
    double offset = 0.0; // Perturbed
    StrategyClosure::Scope scope = StrategyClosure::Scope::All;
    std::size_t agent = 0;
};

struct TypesSpec {
    bool enabled = false;
    double theta_lo = 0.0;
    double theta_hi = 1.0;
    double delta_lo = 0.5;
    double delta_hi = 2.0;
};

struct ConvergeSpec {
    std::vector<std::size_t> n_list{10, 100, 1000, 10000};
    std::size_t type_redraws = 200;
    std::size_t path_reps = 12;
    std::size_t reference_multiple = 10;
};

struct ScenarioConfig {
    GameKind game = GameKind::CaraN;
    std::size_t population = 8; // n_agents (n games) / n_particles (mf games)
    std::size_t n_replications = 256;
    std::size_t n_scenarios = 1;
    std::size_t steps = 64;
    double dt = 1.0 / 64.0;
    double horizon = 1.0; // always steps * dt after resolution
    std::uint64_t master_seed = 0;
    VariantFlag variant = VariantFlag::Half;
    Quadrature quadrature = Quadrature::LeftEndpoint;
    MeasureArgument measure_argument = MeasureArgument::ConditionalMean;
    double x0 = 1.0;

    CoefficientModel model;
    TypesSpec types;
    StrategySpec strategy;
    ConvergeSpec converge;

    std::string out;
    OutputFormat format = OutputFormat::Csv;

    std::vector<std::string> warnings; // from coefficient validation

    Game base_game() const {
        return game == GameKind::CaraN || game == GameKind::CaraMf
                   ? Game::Cara
                   : Game::Crra;
    }
    bool mean_field() const {
        return game == GameKind::CaraMf || game == GameKind::CrraMf;
    }

    StrategyClosure strategy_closure() const {
        switch (strategy.kind) {
            case StrategySpec::Kind::Equilibrium:
                return StrategyClosure::equilibrium(base_game());
            case StrategySpec::Kind::Constant:
                return StrategyClosure::constant(strategy.value);
            default:
                return StrategyClosure::perturbed(base_game(), strategy.offset,
                                                  strategy.scope,
                                                  strategy.agent);
        }
    }

    // Mean-field scenarios are embedded as one representative agent with the
    // particles as replications: every particle shares the common path and
    // owns idiosyncratic noise, and the cross-replication estimators become
    // the E1 over the cloud.
    EngineSpec engine_spec(std::uint32_t scenario_index) const {
        EngineSpec s;
        s.game = base_game();
        if (mean_field()) {
            s.n_agents = 1;
            s.n_replications = population;
        } else {
            s.n_agents = population;
            s.n_replications = n_replications;
        }
        s.steps = steps;
        s.dt = dt;
        s.x0 = x0;
        s.master_seed = master_seed;
        s.scenario = scenario_index;
        s.variant = variant;
        s.quadrature = quadrature;
        return s;
    }

    // Per-agent models for one scenario: the shared model when homogeneous,
    // or one model per agent with (theta, delta) drawn i.i.d. from the types
    // box on the scenario's type lane.
    std::vector<CoefficientModel> draw_models(
        std::uint32_t scenario_index) const {
        if (!types.enabled) return {model};
        const NoiseStream s(master_seed, scenario_index, dt);
        std::vector<CoefficientModel> out_models;
        out_models.reserve(population);
        for (std::size_t i = 0; i < population; ++i) {
            const double ut = s.type_uniform(i, TypeSampler::kThetaSlot);
            const double ud = s.type_uniform(i, TypeSampler::kDeltaSlot);
            CoefficientModel m = model;
            m.theta = ParamSpec::constant(
                types.theta_lo + ut * (types.theta_hi - types.theta_lo));
            m.delta = ParamSpec::constant(
                types.delta_lo + ud * (types.delta_hi - types.delta_lo));
            out_models.push_back(m);
        }
        return out_models;
    }

    TypeSampler type_sampler() const {
        TypeSampler ts;
        ts.mu = model.mu.value;
        ts.nu = model.nu.value;
        ts.sigma = model.sigma.value;
        ts.theta_lo = types.theta_lo;
        ts.theta_hi = types.theta_hi;
        ts.delta_lo = types.delta_lo;
        ts.delta_hi = types.delta_hi;
        return ts;
    }
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace detail_config {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() &&
           (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

struct Cursor {
    int line;
    int column;
};

inline double parse_double(std::string_view v, Cursor at) {
    double out = 0.0;
    const auto* first = v.data();
    const auto* last = v.data() + v.size();
    const auto res = std::from_chars(first, last, out);
    if (res.ec != std::errc{} || res.ptr != last)
        throw ParseError("expected a number, got '" + std::string(v) + "'",
                         at.line, at.column);
    return out;
}

inline std::uint64_t parse_u64(std::string_view v, Cursor at) {
    std::uint64_t out = 0;
    const auto* first = v.data();
    const auto* last = v.data() + v.size();
    const auto res = std::from_chars(first, last, out);
    if (res.ec != std::errc{} || res.ptr != last)
        throw ParseError("expected a nonnegative integer, got '" +
                             std::string(v) + "'",
                         at.line, at.column);
    return out;
}

inline bool parse_bool(std::string_view v, Cursor at) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ParseError("expected a boolean, got '" + std::string(v) + "'",
                     at.line, at.column);
}

[[noreturn]] inline void bad_value(std::string_view key, std::string_view v,
                                   Cursor at) {
    throw ParseError("unknown value '" + std::string(v) + "' for key '" +
                         std::string(key) + "'",
                     at.line, at.column);
}

inline std::vector<std::size_t> parse_size_list(std::string_view v,
                                                Cursor at) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos <= v.size()) {
        std::size_t comma = v.find(',', pos);
        if (comma == std::string_view::npos) comma = v.size();
        const std::string_view item =
            trim(v.substr(pos, comma - pos));
        if (item.empty())
            throw ParseError("empty entry in list", at.line, at.column);
        out.push_back(static_cast<std::size_t>(parse_u64(item, at)));
        if (comma == v.size()) break;
        pos = comma + 1;
    }
    return out;
}

// A coefficient section plus the factor keys it may carry (the factor is
// shared; every section naming a factor parameter must agree).
struct FactorAccumulator {
    std::optional<double> kappa, level, vol;
    std::vector<std::string>* violations = nullptr;

    void set(std::optional<double>& slot, double v, const char* key) {
        if (slot && *slot != v)
            violations->push_back(std::string("factor parameter '") + key +
                                  "' set to conflicting values");
        slot = v;
    }
};

} // namespace detail_config

// Parse the INI-style configuration text. Unknown sections or keys, duplicate
// keys, and malformed values are ParseErrors with line/column; semantic
// violations are collected and thrown together as a ValidationError.
inline ScenarioConfig parse_config(std::string_view text) {
    using detail_config::Cursor;
    using detail_config::trim;

    ScenarioConfig cfg;
    std::vector<std::string> violations;
    detail_config::FactorAccumulator factor;
    factor.violations = &violations;

    std::optional<double> opt_dt, opt_horizon;
    std::optional<std::uint64_t> set_agents, set_particles;

    std::string section = "run"; // keys before any header belong to [run]
    std::unordered_set<std::string> seen;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const std::string_view raw = text.substr(pos, eol - pos);
        ++line_no;
        const std::string_view stripped = trim(raw);

        if (stripped.empty() || stripped.front() == '#' ||
            stripped.front() == ';') {
            if (eol == text.size()) break;
            pos = eol + 1;
            continue;
        }

        const int col0 =
            static_cast<int>(raw.find_first_not_of(" \t")) + 1; // 1-based

        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw ParseError("unterminated section header", line_no, col0);
            const std::string_view name_sv =
                trim(stripped.substr(1, stripped.size() - 2));
            static const char* known[] = {"run",    "initial", "mu",
                                          "nu",     "sigma",   "delta",
                                          "theta",  "factor",  "types",
                                          "strategy", "converge", "output"};
            bool ok = false;
            for (const char* k : known)
                if (name_sv == k) ok = true;
            if (!ok)
                throw ParseError("unknown section '" + std::string(name_sv) +
                                     "'",
                                 line_no, col0);
            section = std::string(name_sv);
            if (eol == text.size()) break;
            pos = eol + 1;
            continue;
        }

        const std::size_t eq = stripped.find('=');
        if (eq == std::string_view::npos)
            throw ParseError("expected 'key = value'", line_no, col0);
        const std::string_view key = trim(stripped.substr(0, eq));
        const std::string_view value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw ParseError("missing key before '='", line_no, col0);
        const int val_col =
            value.empty() ? col0
                          : col0 + static_cast<int>(stripped.find(value, eq));
        const Cursor key_at{line_no, col0};
        const Cursor val_at{line_no, val_col};
        if (value.empty())
            throw ParseError("missing value for key '" + std::string(key) +
                                 "'",
                             line_no, col0);

        const std::string qualified = section + "." + std::string(key);
        if (!seen.insert(qualified).second)
            throw ParseError("duplicate key '" + std::string(key) +
                                 "' in section [" + section + "]",
                             line_no, col0);

        auto num = [&] { return detail_config::parse_double(value, val_at); };
        auto integer = [&] { return detail_config::parse_u64(value, val_at); };

        bool handled = true;
        if (section == "run") {
            if (key == "game") {
                if (value == "cara_n") cfg.game = GameKind::CaraN;
                else if (value == "crra_n") cfg.game = GameKind::CrraN;
                else if (value == "cara_mf") cfg.game = GameKind::CaraMf;
                else if (value == "crra_mf") cfg.game = GameKind::CrraMf;
                else detail_config::bad_value(key, value, val_at);
            } else if (key == "n_agents") {
                set_agents = integer();
            } else if (key == "n_particles") {
                set_particles = integer();
            } else if (key == "n_replications") {
                cfg.n_replications = integer();
            } else if (key == "n_scenarios") {
                cfg.n_scenarios = integer();
            } else if (key == "steps") {
                cfg.steps = integer();
            } else if (key == "dt") {
                opt_dt = num();
            } else if (key == "horizon") {
                opt_horizon = num();
            } else if (key == "master_seed") {
                cfg.master_seed = integer();
            } else if (key == "variant_flag") {
                if (value == "half") cfg.variant = VariantFlag::Half;
                else if (value == "full") cfg.variant = VariantFlag::Full;
                else detail_config::bad_value(key, value, val_at);
            } else if (key == "quadrature") {
                if (value == "left") cfg.quadrature = Quadrature::LeftEndpoint;
                else if (value == "trapezoid")
                    cfg.quadrature = Quadrature::Trapezoid;
                else detail_config::bad_value(key, value, val_at);
            } else if (key == "measure_argument") {
                if (value == "conditional_mean")
                    cfg.measure_argument = MeasureArgument::ConditionalMean;
                else if (value == "replication_average")
                    cfg.measure_argument = MeasureArgument::ReplicationAverage;
                else detail_config::bad_value(key, value, val_at);
            } else {
                handled = false;
            }
        } else if (section == "initial") {
            if (key == "x0") cfg.x0 = num();
            else handled = false;
        } else if (section == "mu" || section == "nu" || section == "sigma" ||
                   section == "delta" || section == "theta") {
            ParamSpec& p = section == "mu"      ? cfg.model.mu
                           : section == "nu"    ? cfg.model.nu
                           : section == "sigma" ? cfg.model.sigma
                           : section == "delta" ? cfg.model.delta
                                                : cfg.model.theta;
            if (key == "kind") {
                if (value == "constant") p.kind = CoeffKind::Constant;
                else if (value == "deterministic_time")
                    p.kind = CoeffKind::DeterministicTime;
                else if (value == "common_factor")
                    p.kind = CoeffKind::CommonFactor;
                else if (value == "state_dependent")
                    p.kind = CoeffKind::StateDependent;
                else detail_config::bad_value(key, value, val_at);
            } else if (key == "value") {
                p.value = num();
            } else if (key == "intercept") {
                p.intercept = num();
            } else if (key == "slope") {
                p.slope = num();
            } else if (key == "link") {
                if (value == "exp") p.link = FactorLink::Exp;
                else if (value == "affine") p.link = FactorLink::AffineClamped;
                else detail_config::bad_value(key, value, val_at);
            } else if (key == "scale") {
                p.scale = num();
            } else if (key == "clamp_lo") {
                p.clamp_lo = num();
            } else if (key == "clamp_hi") {
                p.clamp_hi = num();
            } else if (key == "kappa") {
                factor.set(factor.kappa, num(), "kappa");
            } else if (key == "level") {
                factor.set(factor.level, num(), "level");
            } else if (key == "vol") {
                factor.set(factor.vol, num(), "vol");
            } else {
                handled = false;
            }
        } else if (section == "factor") {
            if (key == "kappa") factor.set(factor.kappa, num(), "kappa");
            else if (key == "level") factor.set(factor.level, num(), "level");
            else if (key == "vol") factor.set(factor.vol, num(), "vol");
            else handled = false;
        } else if (section == "types") {
            if (key == "enabled") {
                cfg.types.enabled = detail_config::parse_bool(value, val_at);
            } else if (key == "theta_lo") cfg.types.theta_lo = num();
            else if (key == "theta_hi") cfg.types.theta_hi = num();
            else if (key == "delta_lo") cfg.types.delta_lo = num();
            else if (key == "delta_hi") cfg.types.delta_hi = num();
            else handled = false;
        } else if (section == "strategy") {
            if (key == "kind") {
                if (value == "equilibrium")
                    cfg.strategy.kind = StrategySpec::Kind::Equilibrium;
                else if (value == "constant")
                    cfg.strategy.kind = StrategySpec::Kind::Constant;
                else if (value == "perturbed")
                    cfg.strategy.kind = StrategySpec::Kind::Perturbed;
                else detail_config::bad_value(key, value, val_at);
            } else if (key == "value") {
                cfg.strategy.value = num();
            } else if (key == "offset") {
                cfg.strategy.offset = num();
            } else if (key == "scope") {
                if (value == "single")
                    cfg.strategy.scope = StrategyClosure::Scope::Single;
                else if (value == "all")
                    cfg.strategy.scope = StrategyClosure::Scope::All;
                else detail_config::bad_value(key, value, val_at);
            } else if (key == "agent") {
                cfg.strategy.agent = integer();
            } else {
                handled = false;
            }
        } else if (section == "converge") {
            if (key == "n_list")
                cfg.converge.n_list =
                    detail_config::parse_size_list(value, val_at);
            else if (key == "type_redraws")
                cfg.converge.type_redraws = integer();
            else if (key == "path_reps") cfg.converge.path_reps = integer();
            else if (key == "reference_multiple")
                cfg.converge.reference_multiple = integer();
            else handled = false;
        } else if (section == "output") {
            if (key == "out") {
                cfg.out = std::string(value);
            } else if (key == "format") {
                if (value == "csv") cfg.format = OutputFormat::Csv;
                else if (value == "json") cfg.format = OutputFormat::Json;
                else detail_config::bad_value(key, value, val_at);
            } else {
                handled = false;
            }
        }
        if (!handled)
            throw ParseError("unknown key '" + std::string(key) +
                                 "' in section [" + section + "]",
                             key_at.line, key_at.column);

        if (eol == text.size()) break;
        pos = eol + 1;
    }

    // --- resolution ---
    if (set_agents && set_particles)
        violations.push_back("specify n_agents or n_particles, not both");
    if (set_agents) cfg.population = static_cast<std::size_t>(*set_agents);
    if (set_particles)
        cfg.population = static_cast<std::size_t>(*set_particles);

    if (cfg.steps == 0) violations.push_back("steps must be >= 1");
    if (cfg.population == 0)
        violations.push_back("population count must be >= 1");
    if (cfg.n_replications == 0)
        violations.push_back("n_replications must be >= 1");
    if (cfg.n_scenarios == 0)
        violations.push_back("n_scenarios must be >= 1");

    if (opt_dt && !(*opt_dt > 0.0)) violations.push_back("dt must be positive");
    if (opt_horizon && !(*opt_horizon > 0.0))
        violations.push_back("horizon must be positive");
    if (cfg.steps > 0) {
        if (opt_dt && opt_horizon) {
            const double implied = static_cast<double>(cfg.steps) * *opt_dt;
            if (std::fabs(implied - *opt_horizon) >
                1e-9 * std::max(1.0, std::fabs(*opt_horizon)))
                violations.push_back(
                    "horizon must equal steps * dt (got horizon = " +
                    std::to_string(*opt_horizon) + ", steps * dt = " +
                    std::to_string(implied) + ")");
            cfg.dt = *opt_dt;
            cfg.horizon = implied;
        } else if (opt_horizon) {
            cfg.dt = *opt_horizon / static_cast<double>(cfg.steps);
            cfg.horizon = *opt_horizon;
        } else {
            if (opt_dt) cfg.dt = *opt_dt;
            cfg.horizon = static_cast<double>(cfg.steps) * cfg.dt;
        }
    }

    if (factor.kappa) cfg.model.factor.kappa = *factor.kappa;
    if (factor.level) cfg.model.factor.level = *factor.level;
    if (factor.vol) cfg.model.factor.vol = *factor.vol;

    // --- semantic validation ---
    const ValidationReport report = validate(cfg.model);
    for (const auto& e : report.errors) violations.push_back(e);
    cfg.warnings = report.warnings;

    if (cfg.base_game() == Game::Crra && !(cfg.x0 > 0.0))
        violations.push_back("CRRA games require strictly positive x0");
    if (!(cfg.x0 == cfg.x0)) violations.push_back("x0 must be a number");

    if (cfg.types.enabled) {
        if (cfg.types.theta_lo < 0.0 || cfg.types.theta_hi > 1.0 ||
            cfg.types.theta_lo > cfg.types.theta_hi)
            violations.push_back("types: theta box must sit inside [0, 1]");
        if (cfg.types.delta_lo < kDeltaFloor ||
            cfg.types.delta_lo > cfg.types.delta_hi)
            violations.push_back(
                "types: delta box must sit inside [1e-6, inf)");
        if (cfg.mean_field())
            violations.push_back(
                "heterogeneous types with mean-field games are supported "
                "through the converge subcommand only");
    }

    if (cfg.strategy.kind == StrategySpec::Kind::Perturbed &&
        cfg.strategy.scope == StrategyClosure::Scope::Single &&
        cfg.strategy.agent >= cfg.population)
        violations.push_back("strategy.agent must be < the population count");

    if (cfg.converge.n_list.empty()) {
        violations.push_back("converge.n_list must not be empty");
    } else {
        for (std::size_t j = 1; j < cfg.converge.n_list.size(); ++j)
            if (cfg.converge.n_list[j] <= cfg.converge.n_list[j - 1]) {
                violations.push_back("converge.n_list must be increasing");
                break;
            }
        if (cfg.converge.n_list.front() == 0)
            violations.push_back("converge.n_list entries must be >= 1");
    }
    if (cfg.converge.reference_multiple == 0)
        violations.push_back("converge.reference_multiple must be >= 1");

    if (!violations.empty()) throw ValidationError(std::move(violations));
    return cfg;
}

} // namespace fnl
