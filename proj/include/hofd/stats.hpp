#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace hofd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline double mean(const Vector& v) {
    if (v.size() == 0) throw std::invalid_argument("mean: empty vector");
    return v.mean();
}

/// Empirical variance with denominator n, so that decomposition identities
/// (sum of indices = 1) hold exactly on finite samples.
inline double variance_n(const Vector& v) {
    const double m = mean(v);
    return (v.array() - m).square().sum() / static_cast<double>(v.size());
}

inline double covariance_n(const Vector& a, const Vector& b) {
    if (a.size() != b.size() || a.size() == 0)
        throw std::invalid_argument("covariance_n: size mismatch");
    const double ma = mean(a), mb = mean(b);
    return ((a.array() - ma) * (b.array() - mb)).sum() / static_cast<double>(a.size());
}

/// Unbiased (n-1) standard deviation, used for bandwidths and summary tables.
inline double sample_std(const Vector& v) {
    if (v.size() < 2) throw std::invalid_argument("sample_std: need n >= 2");
    const double m = mean(v);
    return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

inline double correlation(const Vector& a, const Vector& b) {
    const double va = variance_n(a), vb = variance_n(b);
    if (va <= 0.0 || vb <= 0.0)
        throw std::invalid_argument("correlation: zero-variance argument");
    return covariance_n(a, b) / std::sqrt(va * vb);
}

/// Linear-interpolation quantile (R type 7) of an unsorted sample.
inline double quantile(std::vector<double> x, double p) {
    if (x.empty()) throw std::invalid_argument("quantile: empty sample");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("quantile: p outside [0,1]");
    std::sort(x.begin(), x.end());
    const double idx = p * static_cast<double>(x.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(idx));
    const auto hi = static_cast<std::size_t>(std::ceil(idx));
    const double w = idx - static_cast<double>(lo);
    return (1.0 - w) * x[lo] + w * x[hi];
}

/// Shortest round-trip decimal form; locale-free, '.' decimal point.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline bool all_finite(const Vector& v) {
    return v.allFinite();
}

inline bool all_finite(const Matrix& m) {
    return m.allFinite();
}

}  // namespace hofd
