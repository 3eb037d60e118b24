#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fnl/errors.hpp"
#include "fnl/functionals.hpp"
#include "fnl/measure.hpp"

namespace fnl {

// The two utility families. Exponential preferences compare wealth to the
// arithmetic population average additively; power/log preferences compare to
// the geometric average as a ratio. Correction processes (K, and G on the
// log branch) are supplied by the caller together with their time rates, so
// the field is a pure function here.

// U = -exp(-(x - theta*m)/delta + K), m the arithmetic average.
template <std::floating_point F>
F cara_field(F x, F m, F K, F delta, F theta) {
    return -std::exp(-(x - theta * m) / delta + K);
}

// delta != 1: U = (1/c) (lambda^-theta x)^c K with c = 1 - 1/delta;
// delta == 1: U = log(lambda^-theta x) K + G. lambda is the geometric average.
template <std::floating_point F>
F crra_field(F x, F lambda, F K, F G, F delta, F theta) {
    if (!(x > F(0))) throw DomainError("crra_field: x must be positive");
    if (!(lambda > F(0))) throw DomainError("crra_field: lambda must be positive");
    const F rel = std::pow(lambda, -theta) * x;
    if (delta == F(1)) return std::log(rel) * K + G;
    const F c = F(1) - F(1) / delta;
    return std::pow(rel, c) * K / c;
}

// Lifted versions: the measure argument expanded to explicit atoms.
template <std::floating_point F>
F cara_field_lift(F x, std::span<const F> atoms, F K, F delta, F theta) {
    return cara_field(x, functional_value(FunctionalKind::ArithMean, atoms), K,
                      delta, theta);
}

template <std::floating_point F>
F crra_field_lift(F x, std::span<const F> atoms, F K, F G, F delta, F theta) {
    return crra_field(x, functional_value(FunctionalKind::GeomMean, atoms), K,
                      G, delta, theta);
}

struct CaraFieldParams {
    double delta = 1.0;
    double theta = 0.0;
    double K = 0.0;
    double Kdot = 0.0; // dK/dt at the evaluation time
};

struct CrraFieldParams {
    double delta = 1.0;
    double theta = 0.0;
    double K = 1.0;
    double Kdot = 0.0;
    double G = 0.0;    // log branch only
    double Gdot = 0.0;
};

// All seven derivatives of a utility field at (x, mu). The v-dependence of
// the measure derivatives has the same shape within a family (constant in v
// for the exponential family, powers of 1/v for the power/log family), so
// the bundle stores premultipliers and exposes evaluators.
struct DerivativeBundle {
    enum class Family { Cara, CrraPower, CrraLog };
    Family family = Family::Cara;

    double value = 0.0; // U itself
    double d_t = 0.0;
    double d_x = 0.0;
    double d_xx = 0.0;

    double c_mu = 0.0;    // d_mu(v)    = c_mu    * w(v)
    double c_v_dmu = 0.0; // d_v_dmu(v) = c_v_dmu * w(v)^2
    double c_mumu = 0.0;  // d_mumu(v,v') = c_mumu * w(v) w(v')
    double c_x_dmu = 0.0; // d_x_dmu(v) = c_x_dmu * w(v)
    // w(v) = 1 for Cara, 1/v for the CRRA branches.

    double weight(double v) const {
        if (family == Family::Cara) return 1.0;
        if (!(v > 0.0)) throw DomainError("measure derivative at v <= 0");
        return 1.0 / v;
    }
    double d_mu(double v) const { return c_mu * weight(v); }
    double d_v_dmu(double v) const { return c_v_dmu * weight(v) * weight(v); }
    double d_mumu(double v, double vp) const {
        return c_mumu * weight(v) * weight(vp);
    }
    double d_x_dmu(double v) const { return c_x_dmu * weight(v); }
};

inline DerivativeBundle cara_derivatives(double x, const EmpiricalMeasure& mu,
                                         const CaraFieldParams& p) {
    if (!(p.delta > 0.0)) throw DomainError("cara_derivatives: delta <= 0");
    const double m = arithmetic_average(mu);
    const double U = cara_field(x, m, p.K, p.delta, p.theta);
    const double d = p.delta, th = p.theta;
    DerivativeBundle b;
    b.family = DerivativeBundle::Family::Cara;
    b.value = U;
    b.d_t = p.Kdot * U;
    b.d_x = -(1.0 / d) * U;
    b.d_xx = (1.0 / (d * d)) * U;
    b.c_mu = (th / d) * U;
    b.c_v_dmu = 0.0;
    b.c_mumu = (th / d) * (th / d) * U;
    b.c_x_dmu = -(th / (d * d)) * U;
    return b;
}

inline DerivativeBundle crra_derivatives(double x, const EmpiricalMeasure& mu,
                                         const CrraFieldParams& p) {
    if (!(p.delta > 0.0)) throw DomainError("crra_derivatives: delta <= 0");
    if (!(x > 0.0)) throw DomainError("crra_derivatives: x <= 0");
    const double lambda = geometric_average(mu);
    const double th = p.theta;
    DerivativeBundle b;
    if (p.delta == 1.0) {
        // U = log(lambda^-theta x) K + G
        const double U = crra_field(x, lambda, p.K, p.G, 1.0, th);
        b.family = DerivativeBundle::Family::CrraLog;
        b.value = U;
        b.d_t = std::log(std::pow(lambda, -th) * x) * p.Kdot + p.Gdot;
        b.d_x = p.K / x;
        b.d_xx = -p.K / (x * x);
        b.c_mu = -th * p.K;
        b.c_v_dmu = th * p.K;
        b.c_mumu = 0.0;
        b.c_x_dmu = 0.0;
        return b;
    }
    const double c = 1.0 - 1.0 / p.delta;
    const double U = crra_field(x, lambda, p.K, p.G, p.delta, th);
    b.family = DerivativeBundle::Family::CrraPower;
    b.value = U;
    b.d_t = (p.Kdot / p.K) * U;
    b.d_x = c / x * U;
    b.d_xx = c * (c - 1.0) / (x * x) * U;
    b.c_mu = -c * th * U;
    b.c_v_dmu = c * th * U;
    b.c_mumu = c * c * th * th * U;
    b.c_x_dmu = -c * c * th / x * U;
    return b;
}

// ---------------------------------------------------------------------------
// Lifted finite-difference verification of a bundle. Every entry is checked
// against central differences of the lift (atoms expanded), with the measure
// derivatives scaled through the empirical projection:
//   d(lift)/d atom_j          = (1/N) d_mu(v_j)
//   d2(lift)/dx d atom_j      = (1/N) d_x_dmu(v_j)
//   d2(lift)/d atom_i d atom_j = (1/N) d_v_dmu(v_i) 1{i=j} + (1/N^2) d_mumu(v_i, v_j)
// Time dependence enters only through K(t), G(t); the check differentiates
// along K(t0+s) = K + Kdot*s (and G likewise).
// Long double arithmetic keeps second-difference roundoff ~1e-9, well under
// the 1e-6 gate.
// ---------------------------------------------------------------------------

namespace detail {

struct LiftPoint {
    bool crra = false;
    long double x = 1.0L;
    std::vector<long double> atoms;
    long double K = 0.0L, Kdot = 0.0L, G = 0.0L, Gdot = 0.0L;
    long double delta = 1.0L, theta = 0.0L;

    long double eval_at(long double t) const {
        const long double Kt = K + Kdot * t;
        const long double Gt = G + Gdot * t;
        const std::span<const long double> a(atoms);
        if (crra) return crra_field_lift(x, a, Kt, Gt, delta, theta);
        return cara_field_lift(x, a, Kt, delta, theta);
    }
    long double eval() const { return eval_at(0.0L); }
};

inline void push_entry(std::vector<FdCheckEntry>& out, const char* field,
                       std::string entry, double analytic, long double fd) {
    FdCheckEntry e;
    e.field = field;
    e.entry = std::move(entry);
    e.analytic = analytic;
    e.finite_diff = static_cast<double>(fd);
    e.rel_err = check_error(e.analytic, e.finite_diff);
    out.push_back(std::move(e));
}

inline std::vector<FdCheckEntry> check_bundle(const DerivativeBundle& b,
                                              LiftPoint pt, const char* field,
                                              double bump) {
    const long double h = bump;
    const std::size_t n = pt.atoms.size();
    const double dn = static_cast<double>(n);
    std::vector<FdCheckEntry> out;

    // d_t
    push_entry(out, field, "d_t", b.d_t,
               (pt.eval_at(h) - pt.eval_at(-h)) / (2.0L * h));

    // d_x and d_xx
    const long double x0 = pt.x;
    const long double mid = pt.eval();
    pt.x = x0 + h;
    const long double xp = pt.eval();
    pt.x = x0 - h;
    const long double xm = pt.eval();
    pt.x = x0;
    push_entry(out, field, "d_x", b.d_x, (xp - xm) / (2.0L * h));
    push_entry(out, field, "d_xx", b.d_xx, (xp - 2.0L * mid + xm) / (h * h));

    // d_mu and d_x_dmu per atom
    for (std::size_t j = 0; j < n; ++j) {
        const long double aj = pt.atoms[j];
        const double vj = static_cast<double>(aj);
        pt.atoms[j] = aj + h;
        const long double up = pt.eval();
        pt.x = x0 + h;
        const long double up_xp = pt.eval();
        pt.x = x0 - h;
        const long double up_xm = pt.eval();
        pt.x = x0;
        pt.atoms[j] = aj - h;
        const long double lo = pt.eval();
        pt.x = x0 + h;
        const long double lo_xp = pt.eval();
        pt.x = x0 - h;
        const long double lo_xm = pt.eval();
        pt.x = x0;
        pt.atoms[j] = aj;
        push_entry(out, field, "d_mu[" + std::to_string(j) + "]",
                   b.d_mu(vj) / dn, (up - lo) / (2.0L * h));
        push_entry(out, field, "d_x_dmu[" + std::to_string(j) + "]",
                   b.d_x_dmu(vj) / dn,
                   (up_xp - up_xm - lo_xp + lo_xm) / (4.0L * h * h));
    }

    // atom-atom second order: diagonal carries d_v_dmu, off-diagonal d_mumu
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double vi = static_cast<double>(pt.atoms[i]);
            const double vj = static_cast<double>(pt.atoms[j]);
            long double fd;
            if (i == j) {
                const long double ai = pt.atoms[i];
                pt.atoms[i] = ai + h;
                const long double up = pt.eval();
                pt.atoms[i] = ai - h;
                const long double lo = pt.eval();
                pt.atoms[i] = ai;
                fd = (up - 2.0L * mid + lo) / (h * h);
            } else {
                const long double ai = pt.atoms[i], aj = pt.atoms[j];
                pt.atoms[i] = ai + h; pt.atoms[j] = aj + h;
                const long double pp = pt.eval();
                pt.atoms[j] = aj - h;
                const long double pm = pt.eval();
                pt.atoms[i] = ai - h; pt.atoms[j] = aj + h;
                const long double mp = pt.eval();
                pt.atoms[j] = aj - h;
                const long double mm = pt.eval();
                pt.atoms[i] = ai; pt.atoms[j] = aj;
                fd = (pp - pm - mp + mm) / (4.0L * h * h);
            }
            double analytic = b.d_mumu(vi, vj) / (dn * dn);
            if (i == j) analytic += b.d_v_dmu(vi) / dn;
            const std::string nm = i == j
                ? "d_v_dmu[" + std::to_string(i) + "]"
                : "d_mumu[" + std::to_string(i) + "][" + std::to_string(j) + "]";
            push_entry(out, field, nm, analytic, fd);
        }
    }
    return out;
}

} // namespace detail

inline std::vector<FdCheckEntry> cara_bundle_check(
    double x, const EmpiricalMeasure& mu, const CaraFieldParams& p,
    double bump = 1e-5) {
    detail::LiftPoint pt;
    pt.crra = false;
    pt.x = x;
    pt.atoms.assign(mu.atoms.begin(), mu.atoms.end());
    pt.K = p.K;
    pt.Kdot = p.Kdot;
    pt.delta = p.delta;
    pt.theta = p.theta;
    return detail::check_bundle(cara_derivatives(x, mu, p), std::move(pt),
                                "cara", bump);
}

inline std::vector<FdCheckEntry> crra_bundle_check(
    double x, const EmpiricalMeasure& mu, const CrraFieldParams& p,
    double bump = 1e-5) {
    detail::LiftPoint pt;
    pt.crra = true;
    pt.x = x;
    pt.atoms.assign(mu.atoms.begin(), mu.atoms.end());
    pt.K = p.K;
    pt.Kdot = p.Kdot;
    pt.G = p.G;
    pt.Gdot = p.Gdot;
    pt.delta = p.delta;
    pt.theta = p.theta;
    return detail::check_bundle(crra_derivatives(x, mu, p), std::move(pt),
                                "crra", bump);
}

} // namespace fnl
