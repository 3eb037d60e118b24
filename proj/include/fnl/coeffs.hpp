#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "fnl/errors.hpp"

namespace fnl {

// The five coefficient processes (market: mu, nu, sigma; preference: delta,
// theta). Each parameter carries its own kind; a model mixing, say, a
// factor-driven sigma with constant preferences is the intended usage.
enum class CoeffKind {
    Constant,          // fixed value
    DeterministicTime, // intercept + slope * t
    CommonFactor,      // link applied to the shared scalar factor z
    StateDependent,    // clamped affine function of current wealth x
};

enum class FactorLink {
    Exp,           // scale * exp(z); sign fixed by scale, never zero
    AffineClamped, // clamp(intercept + slope * z, clamp_lo, clamp_hi)
};

struct ParamSpec {
    CoeffKind kind = CoeffKind::Constant;
    double value = 0.0; // Constant

    double intercept = 0.0; // DeterministicTime and affine links
    double slope = 0.0;

    FactorLink link = FactorLink::Exp; // CommonFactor only
    double scale = 1.0;                // Exp link
    double clamp_lo = -std::numeric_limits<double>::infinity();
    double clamp_hi = std::numeric_limits<double>::infinity();

    static ParamSpec constant(double v) {
        ParamSpec p;
        p.value = v;
        return p;
    }

    double eval(double x, double z, double t) const {
        switch (kind) {
            case CoeffKind::Constant:
                return value;
            case CoeffKind::DeterministicTime:
                return intercept + slope * t;
            case CoeffKind::CommonFactor:
                if (link == FactorLink::Exp) return scale * std::exp(z);
                return std::clamp(intercept + slope * z, clamp_lo, clamp_hi);
            case CoeffKind::StateDependent:
                return std::clamp(intercept + slope * x, clamp_lo, clamp_hi);
        }
        throw DomainError("unknown coefficient kind");
    }
};

// Mean-reverting scalar factor dz = kappa (level - z) dt + vol dW0 shared by
// every CommonFactor parameter; z(0) = level.
struct FactorParams {
    double kappa = 0.0;
    double level = 0.0;
    double vol = 0.0;
};

inline double factor_initial(const FactorParams& f) { return f.level; }

inline double factor_step(const FactorParams& f, double z, double dt, double dW0) {
    return z + f.kappa * (f.level - z) * dt + f.vol * dW0;
}

struct CoefficientModel {
    ParamSpec mu = ParamSpec::constant(0.1);
    ParamSpec nu = ParamSpec::constant(0.2);
    ParamSpec sigma = ParamSpec::constant(0.3);
    ParamSpec delta = ParamSpec::constant(1.0);
    ParamSpec theta = ParamSpec::constant(0.5);
    FactorParams factor;

    bool uses_factor() const {
        for (const ParamSpec* p : {&mu, &nu, &sigma, &delta, &theta})
            if (p->kind == CoeffKind::CommonFactor) return true;
        return false;
    }
    bool state_dependent() const {
        for (const ParamSpec* p : {&mu, &nu, &sigma, &delta, &theta})
            if (p->kind == CoeffKind::StateDependent) return true;
        return false;
    }
    bool time_dependent() const {
        for (const ParamSpec* p : {&mu, &nu, &sigma, &delta, &theta})
            if (p->kind == CoeffKind::DeterministicTime) return true;
        return false;
    }
    // Most dynamic kind in use; Constant only when every parameter is.
    CoeffKind kind() const {
        if (state_dependent()) return CoeffKind::StateDependent;
        if (uses_factor()) return CoeffKind::CommonFactor;
        if (time_dependent()) return CoeffKind::DeterministicTime;
        return CoeffKind::Constant;
    }
};

struct CoefficientValues {
    double mu = 0.0;
    double nu = 0.0;
    double sigma = 0.0;
    double Sigma = 0.0; // nu^2 + sigma^2, stored so the identity is exact
    double delta = 1.0;
    double theta = 0.0;
};

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

inline constexpr double kDeltaFloor = 1e-6;

namespace detail {

struct Interval {
    double lo;
    double hi;
};

// Attainable value range over the parameter's whole declared domain
// (t in [0, inf) for time dependence, z and x unrestricted reals).
inline Interval attainable(const ParamSpec& p) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (p.kind) {
        case CoeffKind::Constant:
            return {p.value, p.value};
        case CoeffKind::DeterministicTime:
            if (p.slope > 0.0) return {p.intercept, inf};
            if (p.slope < 0.0) return {-inf, p.intercept};
            return {p.intercept, p.intercept};
        case CoeffKind::CommonFactor:
            if (p.link == FactorLink::Exp) {
                if (p.scale > 0.0) return {0.0, inf}; // open at 0, never attained
                if (p.scale < 0.0) return {-inf, 0.0};
                return {0.0, 0.0};
            }
            [[fallthrough]];
        case CoeffKind::StateDependent: {
            if (p.slope == 0.0) {
                const double v = std::clamp(p.intercept, p.clamp_lo, p.clamp_hi);
                return {v, v};
            }
            return {p.clamp_lo, p.clamp_hi};
        }
    }
    throw DomainError("unknown coefficient kind");
}

// Where (if anywhere) the parameter can take the value zero, as a subset of
// the product domain (x, z, t). Used to decide whether sigma and nu can
// vanish at the same point, which would make Sigma degenerate.
struct ZeroLocus {
    enum class Kind { Never, Everywhere, Point } kind = Kind::Never;
    char var = ' ';     // 't', 'z', or 'x' for Kind::Point
    double coord = 0.0; // coordinate of the zero
};

inline ZeroLocus zero_locus(const ParamSpec& p) {
    using K = ZeroLocus::Kind;
    switch (p.kind) {
        case CoeffKind::Constant:
            return {p.value == 0.0 ? K::Everywhere : K::Never, ' ', 0.0};
        case CoeffKind::DeterministicTime:
            if (p.slope == 0.0)
                return {p.intercept == 0.0 ? K::Everywhere : K::Never, ' ', 0.0};
            {
                const double t0 = -p.intercept / p.slope;
                if (t0 >= 0.0) return {K::Point, 't', t0};
                return {K::Never, ' ', 0.0};
            }
        case CoeffKind::CommonFactor:
            if (p.link == FactorLink::Exp)
                return {p.scale == 0.0 ? K::Everywhere : K::Never, ' ', 0.0};
            [[fallthrough]];
        case CoeffKind::StateDependent: {
            const char var = p.kind == CoeffKind::StateDependent ? 'x' : 'z';
            if (p.slope == 0.0) {
                const double v = std::clamp(p.intercept, p.clamp_lo, p.clamp_hi);
                return {v == 0.0 ? K::Everywhere : K::Never, ' ', 0.0};
            }
            if (p.clamp_lo > 0.0 || p.clamp_hi < 0.0) return {K::Never, ' ', 0.0};
            if (p.clamp_lo == 0.0 && p.clamp_hi == 0.0)
                return {K::Everywhere, ' ', 0.0};
            // Affine with nonzero slope hits zero at one coordinate; a clamp
            // boundary exactly at zero pins a half-line, still nonempty.
            if (p.clamp_lo == 0.0 || p.clamp_hi == 0.0)
                return {K::Point, var, -p.intercept / p.slope}; // representative
            return {K::Point, var, -p.intercept / p.slope};
        }
    }
    throw DomainError("unknown coefficient kind");
}

// The zero sets live in the product space of (x, z, t): loci on different
// variables always intersect; same-variable points intersect only if equal.
inline bool loci_intersect(const ZeroLocus& a, const ZeroLocus& b) {
    using K = ZeroLocus::Kind;
    if (a.kind == K::Never || b.kind == K::Never) return false;
    if (a.kind == K::Everywhere || b.kind == K::Everywhere) return true;
    if (a.var != b.var) return true;
    return a.coord == b.coord;
}

} // namespace detail

inline ValidationReport validate(const CoefficientModel& m) {
    ValidationReport rep;
    const auto range_mu = detail::attainable(m.mu);
    const auto range_nu = detail::attainable(m.nu);
    const auto range_sigma = detail::attainable(m.sigma);
    const auto range_delta = detail::attainable(m.delta);
    const auto range_theta = detail::attainable(m.theta);

    auto clamp_sane = [&rep](const ParamSpec& p, const char* nm) {
        const bool clamped = (p.kind == CoeffKind::StateDependent) ||
                             (p.kind == CoeffKind::CommonFactor &&
                              p.link == FactorLink::AffineClamped);
        if (clamped && !(p.clamp_lo <= p.clamp_hi))
            rep.errors.push_back(std::string(nm) + ": clamp_lo > clamp_hi");
    };
    clamp_sane(m.mu, "mu");
    clamp_sane(m.nu, "nu");
    clamp_sane(m.sigma, "sigma");
    clamp_sane(m.delta, "delta");
    clamp_sane(m.theta, "theta");

    if (range_nu.lo < 0.0) rep.errors.push_back("nu can be negative");
    if (range_sigma.lo < 0.0) rep.errors.push_back("sigma can be negative");
    if (range_delta.lo < kDeltaFloor)
        rep.errors.push_back("delta must stay >= 1e-6");
    if (range_theta.lo < 0.0 || range_theta.hi > 1.0)
        rep.errors.push_back("theta out of [0,1]");

    // Sigma = nu^2 + sigma^2 must be strictly positive everywhere: reject
    // exactly when the two volatilities can vanish at the same point.
    if (detail::loci_intersect(detail::zero_locus(m.nu),
                               detail::zero_locus(m.sigma)))
        rep.errors.push_back("Sigma must be strictly positive");

    if (range_mu.lo <= 0.0)
        rep.warnings.push_back("mu can be nonpositive");

    if (m.uses_factor()) {
        if (m.factor.kappa < 0.0) rep.errors.push_back("factor kappa negative");
        if (m.factor.vol < 0.0) rep.errors.push_back("factor vol negative");
    }
    return rep;
}

inline CoefficientValues sample(const CoefficientModel& m, double x, double z,
                                double t) {
    CoefficientValues v;
    v.mu = m.mu.eval(x, z, t);
    v.nu = m.nu.eval(x, z, t);
    v.sigma = m.sigma.eval(x, z, t);
    v.Sigma = v.nu * v.nu + v.sigma * v.sigma;
    v.delta = m.delta.eval(x, z, t);
    v.theta = m.theta.eval(x, z, t);
    if (!(v.Sigma > 0.0)) throw DomainError("sampled Sigma not positive");
    if (!(v.delta > 0.0)) throw DomainError("sampled delta not positive");
    if (v.theta < 0.0 || v.theta > 1.0)
        throw DomainError("sampled theta out of [0,1]");
    if (v.nu < 0.0 || v.sigma < 0.0)
        throw DomainError("sampled volatility negative");
    return v;
}

} // namespace fnl
