#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fnl/errors.hpp"
#include "fnl/measure.hpp"

namespace fnl {

// The benchmark functionals lambda(mu): arithmetic mean (additive wealth
// comparison) and geometric mean (multiplicative). Their measure derivatives
// are defined through the lift to uniform empirical measures: with
// u_N(x_1..x_N) = u(mu_N),
//   d/dx_i u_N = (1/N) d_mu u(mu_N)(x_i),
// and for second order
//   d2/dx_j dx_i u_N = (1/N) d_v d_mu u(x_i) 1{i=j} + (1/N^2) d2_mu u(x_i, x_j).
enum class FunctionalKind {
    ArithMean,
    GeomMean,
};

inline const char* name(FunctionalKind k) {
    return k == FunctionalKind::ArithMean ? "arith_mean" : "geom_mean";
}

template <std::floating_point F>
F functional_value(FunctionalKind k, std::span<const F> atoms) {
    if (atoms.empty()) throw SizeMismatch("functional on empty measure");
    const F n = static_cast<F>(atoms.size());
    F s = F(0);
    if (k == FunctionalKind::ArithMean) {
        for (F v : atoms) s += v;
        return s / n;
    }
    for (F v : atoms) {
        if (!(v > F(0))) throw DomainError("geom_mean: nonpositive atom");
        s += std::log(v);
    }
    return std::exp(s / n);
}

struct MeasureFunctional {
    FunctionalKind kind = FunctionalKind::ArithMean;

    double value(std::span<const double> atoms) const {
        return functional_value(kind, atoms);
    }
    double value(const EmpiricalMeasure& m) const {
        return value(std::span<const double>(m.atoms));
    }

    // d_mu u(mu)(v): ArithMean -> 1;  GeomMean -> h/v with h the value.
    double l_derivative(std::span<const double> atoms, double v) const {
        if (kind == FunctionalKind::ArithMean) return 1.0;
        if (!(v > 0.0)) throw DomainError("geom_mean derivative: v <= 0");
        return value(atoms) / v;
    }

    // d_v d_mu u(mu)(v): ArithMean -> 0;  GeomMean -> -h/v^2.
    double l_derivative_v(std::span<const double> atoms, double v) const {
        if (kind == FunctionalKind::ArithMean) return 0.0;
        if (!(v > 0.0)) throw DomainError("geom_mean derivative: v <= 0");
        return -value(atoms) / (v * v);
    }

    // d2_mu u(mu)(v, v'): ArithMean -> 0;  GeomMean -> h/(v v').
    double l_derivative2(std::span<const double> atoms, double v, double vp) const {
        if (kind == FunctionalKind::ArithMean) return 0.0;
        if (!(v > 0.0) || !(vp > 0.0))
            throw DomainError("geom_mean derivative: v <= 0");
        return value(atoms) / (v * vp);
    }
};

// d/dx_i of the lifted functional: (1/N) d_mu u(mu_N)(x_i).
inline double empirical_projection_grad(const MeasureFunctional& f,
                                        std::span<const double> atoms,
                                        std::size_t i) {
    if (i >= atoms.size()) throw SizeMismatch("atom index out of range");
    return f.l_derivative(atoms, atoms[i]) / static_cast<double>(atoms.size());
}

inline double l_derivative(const MeasureFunctional& f,
                           std::span<const double> atoms, std::size_t i) {
    if (i >= atoms.size()) throw SizeMismatch("atom index out of range");
    return f.l_derivative(atoms, atoms[i]);
}

struct FdCheckEntry {
    std::string field; // object being differentiated
    std::string entry; // component name
    double analytic = 0.0;
    double finite_diff = 0.0;
    double rel_err = 0.0;
};

// Relative to the analytic value; absolute when the analytic value is zero.
inline double check_error(double analytic, double fd) {
    const double diff = std::fabs(analytic - fd);
    return analytic != 0.0 ? diff / std::fabs(analytic) : diff;
}

// First-order check: central difference of the lift in atom i, in long double
// so the difference quotient keeps headroom below the target tolerances.
inline FdCheckEntry fd_lift_check(const MeasureFunctional& f,
                                  std::span<const double> atoms, std::size_t i,
                                  double bump = 1e-5) {
    if (!(bump > 0.0)) throw DomainError("fd_lift_check: bump must be positive");
    if (i >= atoms.size()) throw SizeMismatch("atom index out of range");
    std::vector<long double> x(atoms.begin(), atoms.end());
    const long double h = bump;
    const long double xi = x[i];
    x[i] = xi + h;
    const long double up = functional_value(f.kind, std::span<const long double>(x));
    x[i] = xi - h;
    const long double dn = functional_value(f.kind, std::span<const long double>(x));
    x[i] = xi;
    FdCheckEntry e;
    e.field = name(f.kind);
    e.entry = "grad[" + std::to_string(i) + "]";
    e.analytic = empirical_projection_grad(f, atoms, i);
    e.finite_diff = static_cast<double>((up - dn) / (2.0L * h));
    e.rel_err = check_error(e.analytic, e.finite_diff);
    return e;
}

// Second-order check of the decomposition
//   d2/dx_j dx_i u_N = (1/N) d_v d_mu(x_i) 1{i=j} + (1/N^2) d2_mu(x_i, x_j).
inline FdCheckEntry fd_lift_check2(const MeasureFunctional& f,
                                   std::span<const double> atoms, std::size_t i,
                                   std::size_t j, double bump = 1e-5) {
    if (!(bump > 0.0)) throw DomainError("fd_lift_check2: bump must be positive");
    if (i >= atoms.size() || j >= atoms.size())
        throw SizeMismatch("atom index out of range");
    std::vector<long double> x(atoms.begin(), atoms.end());
    const long double h = bump;
    auto val = [&] { return functional_value(f.kind, std::span<const long double>(x)); };
    long double fd;
    if (i == j) {
        const long double xi = x[i];
        const long double mid = val();
        x[i] = xi + h;
        const long double up = val();
        x[i] = xi - h;
        const long double dn = val();
        x[i] = xi;
        fd = (up - 2.0L * mid + dn) / (h * h);
    } else {
        const long double xi = x[i], xj = x[j];
        x[i] = xi + h; x[j] = xj + h;
        const long double pp = val();
        x[j] = xj - h;
        const long double pm = val();
        x[i] = xi - h; x[j] = xj + h;
        const long double mp = val();
        x[j] = xj - h;
        const long double mm = val();
        x[i] = xi; x[j] = xj;
        fd = (pp - pm - mp + mm) / (4.0L * h * h);
    }
    const double n = static_cast<double>(atoms.size());
    double analytic = f.l_derivative2(atoms, atoms[i], atoms[j]) / (n * n);
    if (i == j) analytic += f.l_derivative_v(atoms, atoms[i]) / n;
    FdCheckEntry e;
    e.field = name(f.kind);
    e.entry = "hess[" + std::to_string(i) + "][" + std::to_string(j) + "]";
    e.analytic = analytic;
    e.finite_diff = static_cast<double>(fd);
    e.rel_err = check_error(analytic, e.finite_diff);
    return e;
}

} // namespace fnl
