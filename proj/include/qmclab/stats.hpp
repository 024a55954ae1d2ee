#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace qmclab::stats {

inline double mean(std::span<const double> xs) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

/// Unbiased sample variance; NaN below two samples.
inline double variance(std::span<const double> xs) {
    if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

inline double standard_error(std::span<const double> xs) {
    if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(variance(xs) / static_cast<double>(xs.size()));
}

/// Standard error of the mean of a correlated series from up to `blocks` contiguous block averages.
inline double blocked_standard_error(std::span<const double> xs, std::size_t blocks = 32) {
    if (xs.size() < 2) return 0.0;
    const std::size_t nb = std::min(blocks, xs.size());
    const std::size_t len = xs.size() / nb;
    std::vector<double> block_means(nb);
    for (std::size_t b = 0; b < nb; ++b) block_means[b] = mean(xs.subspan(b * len, len));
    return standard_error(block_means);
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("linear_fit: need >= 2 paired points");
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw std::invalid_argument("linear_fit: degenerate abscissae");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

}  // namespace qmclab::stats
