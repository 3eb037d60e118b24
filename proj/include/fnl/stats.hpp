#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "fnl/errors.hpp"

namespace fnl {

// Streaming mean/variance (Welford). Numerically stable for the long
// accumulations the drift tests run (tens of thousands of replications).
class RunningStat {
public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }

    // Unbiased sample variance; requires at least two observations.
    double variance() const {
        if (n_ < 2) return std::numeric_limits<double>::quiet_NaN();
        return m2_ / static_cast<double>(n_ - 1);
    }
    double stddev() const { return std::sqrt(variance()); }

    // Standard error of the mean.
    double stderr_mean() const {
        return stddev() / std::sqrt(static_cast<double>(n_));
    }

    // t-statistic of the mean against zero.
    double t_stat() const {
        const double se = stderr_mean();
        if (se == 0.0) return mean_ == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        return mean_ / se;
    }

    RunningStat& merge(const RunningStat& o) {
        if (o.n_ == 0) return *this;
        if (n_ == 0) { *this = o; return *this; }
        const double na = static_cast<double>(n_);
        const double nb = static_cast<double>(o.n_);
        const double d = o.mean_ - mean_;
        mean_ += d * nb / (na + nb);
        m2_ += o.m2_ + d * d * na * nb / (na + nb);
        n_ += o.n_;
        return *this;
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw SizeMismatch("mean of empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Ordinary least squares y = a + b x; returns {intercept, slope}.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw SizeMismatch("fit_line: size mismatch");
    if (x.size() < 2)
        throw SizeMismatch("fit_line: need at least two points");
    const double mx = mean(x);
    const double my = mean(y);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw DomainError("fit_line: degenerate abscissae");
    const double b = sxy / sxx;
    return LineFit{my - b * mx, b};
}

} // namespace fnl
