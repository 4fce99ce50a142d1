#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hofd/stats.hpp"

namespace hofd {

enum class BandwidthRule { silverman, fixed };
enum class KernelType { gaussian };

struct SmootherConfig {
    int degree = 1;                       // local polynomial order q, <= 3
    BandwidthRule bandwidth_rule = BandwidthRule::silverman;
    std::vector<double> fixed_h;          // per conditioning dimension when rule == fixed
    double bandwidth_scale = 1.0;         // multiplies the Silverman value
    KernelType kernel = KernelType::gaussian;
    double ridge = 1e-8;

    void validate(int d) const {
        if (degree < 0 || degree > 3)
            throw std::invalid_argument("smoother config: degree must lie in [0,3]");
        if (ridge < 0.0) throw std::invalid_argument("smoother config: ridge must be >= 0");
        if (bandwidth_scale <= 0.0)
            throw std::invalid_argument("smoother config: bandwidth_scale must be positive");
        if (bandwidth_rule == BandwidthRule::fixed) {
            if (static_cast<int>(fixed_h.size()) != d)
                throw std::invalid_argument("smoother config: fixed rule needs one bandwidth per dimension");
            for (double h : fixed_h)
                if (!(h > 0.0)) throw std::invalid_argument("smoother config: bandwidths must be positive");
        } else if (!fixed_h.empty()) {
            throw std::invalid_argument("smoother config: fixed_h given without fixed rule");
        }
    }
};

/// Silverman rule of thumb, h = 1.06 sigma n^(-1/5) with
/// sigma = min(sample std, IQR/1.349).
inline double silverman_bandwidth(const Vector& col) {
    const int n = static_cast<int>(col.size());
    if (n < 2) throw std::invalid_argument("bandwidth: need n >= 2");
    std::vector<double> v(col.data(), col.data() + n);
    const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
    const double sigma = std::min(sample_std(col), iqr / 1.349);
    if (!(sigma > 0.0))
        throw std::invalid_argument("bandwidth: degenerate conditioning variable");
    return 1.06 * sigma * std::pow(static_cast<double>(n), -0.2);
}

/// Leave-one-out local-polynomial conditional-mean smoother at the
/// observation points, for one or two conditioning variables.
///
/// For a query point x the weighted normal matrix is
///   S_n(x) = sum_i w_i phi_i(x) phi_i(x)^T,   w_i = K((X_i - x)/h),
/// and the leave-one-out fit at observation k removes the rank-one
/// contribution of row k via the Sherman-Morrison identity
///   S_-k^{-1} = S^{-1} + S^{-1} u u^T S^{-1} / (1 - u^T S^{-1} u),
/// with u = sqrt(w_k) phi_k. At x = X_k the basis vector is e1 and w_k = 1,
/// so the downdated intercept solve reduces to S^{-1} e1 / (1 - (S^{-1})_00).
///
/// The smoother is linear in y: for moderate n the full weight matrix is
/// cached so that repeated applications (Gauss-Seidel sweeps) are a single
/// matrix-vector product; above the cache limit rows are rebuilt on the fly.
class LooSmoother {
public:
    LooSmoother(const Matrix& x_cond, const SmootherConfig& cfg)
        : x_(x_cond), cfg_(cfg) {
        n_ = static_cast<int>(x_.rows());
        d_ = static_cast<int>(x_.cols());
        if (d_ < 1 || d_ > 2)
            throw std::invalid_argument("smoother: conditioning dimension must be 1 or 2");
        cfg_.validate(d_);
        if (!all_finite(x_)) throw std::invalid_argument("smoother: non-finite inputs");

        build_basis();
        if (n_ < 10 * basis_)
            throw std::invalid_argument("smoother: need n >= 10 * basis size (n = " +
                                        std::to_string(n_) + ", basis = " +
                                        std::to_string(basis_) + ")");

        h_.resize(d_);
        for (int j = 0; j < d_; ++j) {
            h_[j] = (cfg_.bandwidth_rule == BandwidthRule::fixed)
                        ? cfg_.fixed_h[j]
                        : cfg_.bandwidth_scale * silverman_bandwidth(x_.col(j));
        }

        cached_ = n_ <= kCacheLimit;
        if (cached_) {
            w_.resize(n_, n_);
            Vector row(n_);
            for (int k = 0; k < n_; ++k) {
                build_row(k, row);
                w_.row(k) = row.transpose();
            }
        }
    }

    int size() const { return n_; }
    const std::vector<double>& bandwidths() const { return h_; }

    /// LOO fitted values m_hat(X_k), k = 1..n.
    Vector apply(const Vector& y) const {
        if (y.size() != n_) throw std::invalid_argument("smoother: y length mismatch");
        if (!all_finite(y)) throw std::invalid_argument("smoother: non-finite response");
        if (cached_) return w_ * y;
        Vector out(n_), row(n_);
        for (int k = 0; k < n_; ++k) {
            build_row(k, row);
            out[k] = row.dot(y);
        }
        return out;
    }

private:
    static constexpr int kCacheLimit = 6000;
    static constexpr double kSupportFloor = 0.1;

    void build_basis() {
        exps_.clear();
        if (d_ == 1) {
            for (int a = 0; a <= cfg_.degree; ++a) exps_.push_back({a, 0});
        } else {
            for (int t = 0; t <= cfg_.degree; ++t)
                for (int a = t; a >= 0; --a) exps_.push_back({a, t - a});
        }
        basis_ = static_cast<int>(exps_.size());
    }

    // One row of the LOO weight matrix: m_hat(X_k) = sum_j row[j] * y[j].
    void build_row(int k, Vector& row) const {
        const int B = basis_;
        Matrix S = Matrix::Zero(B, B);
        Matrix phis(n_, B);
        Vector w(n_);
        for (int j = 0; j < n_; ++j) {
            double q = 0.0;
            double off[2] = {0.0, 0.0};
            for (int c = 0; c < d_; ++c) {
                off[c] = (x_(j, c) - x_(k, c)) / h_[c];
                q += off[c] * off[c];
            }
            w[j] = std::exp(-0.5 * q);
            for (int b = 0; b < B; ++b) {
                double t = 1.0;
                for (int e = 0; e < exps_[b][0]; ++e) t *= off[0];
                for (int e = 0; e < exps_[b][1]; ++e) t *= off[1];
                phis(j, b) = t;
            }
            S.noalias() += w[j] * (phis.row(j).transpose() * phis.row(j));
        }
        const double lam = cfg_.ridge * S.trace() / B;
        for (int b = 0; b < B; ++b) S(b, b) += lam;

        Vector e1 = Vector::Zero(B);
        e1[0] = 1.0;
        Eigen::LDLT<Matrix> ldlt(S);
        if (ldlt.info() != Eigen::Success)
            throw std::runtime_error("smoother: singular normal matrix at query index " +
                                     std::to_string(k));
        Vector g0 = ldlt.solve(e1);
        const double denom = 1.0 - g0[0];  // u = e1 at the query point, w_k = K(0) = 1

        // The denominator is the foreign kernel mass supporting the LOO fit.
        // Below the floor the downdated polynomial fit is pure extrapolation
        // (and a direct re-solve reproduces the same ill-posed system), so
        // the query degrades to the local-constant LOO fit, which is bounded
        // by the data range.
        if (denom < kSupportFloor) {
            double wsum = 0.0;
            for (int j = 0; j < n_; ++j)
                if (j != k) wsum += w[j];
            if (wsum > 0.0) {
                for (int j = 0; j < n_; ++j) row[j] = w[j] / wsum;
            } else {
                for (int j = 0; j < n_; ++j) row[j] = 1.0 / (n_ - 1);
            }
            row[k] = 0.0;
            return;
        }

        const Vector g = g0 / denom;
        for (int j = 0; j < n_; ++j) row[j] = w[j] * phis.row(j).dot(g);
        row[k] = 0.0;
    }

    Matrix x_;
    SmootherConfig cfg_;
    int n_ = 0, d_ = 0, basis_ = 0;
    std::vector<std::array<int, 2>> exps_;
    std::vector<double> h_;
    Matrix w_;
    bool cached_ = false;
};

/// One-shot LOO conditional-mean estimate of E(Y | X_cond) at the sample
/// points.
inline Vector loo_conditional_mean(const Matrix& x_cond, const Vector& y,
                                   const SmootherConfig& cfg) {
    return LooSmoother(x_cond, cfg).apply(y);
}

}  // namespace hofd
