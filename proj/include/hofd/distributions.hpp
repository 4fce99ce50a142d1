#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hofd/rng.hpp"
#include "hofd/stats.hpp"

#include <json.hpp>

namespace hofd {

// ---------------------------------------------------------------------------
// Input-distribution model: two-component Gaussian mixture
//   P_X = alpha * N(mean1, diag(cov1)) + (1 - alpha) * N(mean2, cov2)
// The first component doubles as the product reference measure nu.
// ---------------------------------------------------------------------------

struct GaussianMixtureSpec {
    double alpha = 0.0;
    Vector mean1;
    Vector mean2;
    Vector cov1_diag;  // diagonal of the reference covariance, entries > 0
    Matrix cov2;       // symmetric positive definite

    int dim() const { return static_cast<int>(mean1.size()); }

    bool centered() const { return mean1 == mean2; }

    void validate() const {
        const int p = dim();
        if (p < 1) throw std::invalid_argument("mixture spec: empty mean");
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("mixture spec: alpha must lie in (0,1)");
        if (mean2.size() != p || cov1_diag.size() != p ||
            cov2.rows() != p || cov2.cols() != p)
            throw std::invalid_argument("mixture spec: dimension mismatch");
        if (!all_finite(mean1) || !all_finite(mean2) || !all_finite(cov1_diag) ||
            !all_finite(cov2))
            throw std::invalid_argument("mixture spec: non-finite entry");
        if ((cov1_diag.array() <= 0.0).any())
            throw std::invalid_argument("mixture spec: cov1 diagonal must be positive");
        if (!cov2.isApprox(cov2.transpose(), 1e-12))
            throw std::invalid_argument("mixture spec: cov2 is not symmetric");
        Eigen::LLT<Matrix> llt(cov2);
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument("mixture spec: cov2 is not positive definite");
    }
};

/// Ordered partition of {0..p-1} into blocks of size 1 or 2.
struct PairStructure {
    // second index is -1 for a singleton block
    std::vector<std::array<int, 2>> blocks;

    static PairStructure consecutive(int p) {
        PairStructure ps;
        for (int j = 0; j + 1 < p; j += 2) ps.blocks.push_back({j, j + 1});
        if (p % 2 == 1) ps.blocks.push_back({p - 1, -1});
        return ps;
    }

    void validate(int p) const {
        std::vector<int> seen(p, 0);
        for (const auto& b : blocks) {
            if (b[0] < 0 || b[0] >= p) throw std::invalid_argument("pair structure: index out of range");
            ++seen[b[0]];
            if (b[1] != -1) {
                if (b[1] < 0 || b[1] >= p || b[1] == b[0])
                    throw std::invalid_argument("pair structure: bad pair");
                ++seen[b[1]];
            }
        }
        for (int j = 0; j < p; ++j)
            if (seen[j] != 1)
                throw std::invalid_argument("pair structure: blocks must partition the variables");
    }
};

struct SampleSet {
    Matrix x;  // n x p input draws
    Vector y;  // n model outputs
    std::uint64_t seed = 0;

    int n() const { return static_cast<int>(x.rows()); }
    int p() const { return static_cast<int>(x.cols()); }

    void validate() const {
        if (x.rows() < 2) throw std::invalid_argument("sample set: need n >= 2");
        if (y.size() != x.rows())
            throw std::invalid_argument("sample set: y length must match rows of x");
        if (!all_finite(x) || !all_finite(y))
            throw std::invalid_argument("sample set: non-finite entry");
    }
};

enum class AdmissibilityMethod { gaussian_pd_test, copula_lower_bound, density_bounds };

inline const char* to_string(AdmissibilityMethod m) {
    switch (m) {
        case AdmissibilityMethod::gaussian_pd_test: return "gaussian_pd_test";
        case AdmissibilityMethod::copula_lower_bound: return "copula_lower_bound";
        case AdmissibilityMethod::density_bounds: return "density_bounds";
    }
    return "?";
}

struct AdmissibilityReport {
    bool holds = false;
    std::optional<double> bound_m;  // present iff holds; in (0,1]
    AdmissibilityMethod method = AdmissibilityMethod::gaussian_pd_test;
    std::string details;
};

// ---------------------------------------------------------------------------
// Sampling and densities
// ---------------------------------------------------------------------------

/// i.i.d. draws from the mixture: component selection first, then the
/// component draw. Deterministic given the seed.
inline Matrix sample_mixture(const GaussianMixtureSpec& spec, int n, std::uint64_t seed) {
    spec.validate();
    if (n < 1) throw std::invalid_argument("sample_mixture: n must be >= 1");
    const int p = spec.dim();
    const Vector sd1 = spec.cov1_diag.array().sqrt();
    Eigen::LLT<Matrix> llt(spec.cov2);
    const Matrix chol2 = llt.matrixL();

    RandomStream rs(seed);
    Matrix x(n, p);
    Vector z(p);
    for (int i = 0; i < n; ++i) {
        const bool first = rs.uniform01() <= spec.alpha;
        for (int j = 0; j < p; ++j) z[j] = rs.normal();
        if (first)
            x.row(i) = (spec.mean1 + sd1.cwiseProduct(z)).transpose();
        else
            x.row(i) = (spec.mean2 + chol2 * z).transpose();
    }
    return x;
}

namespace detail {

inline double log_normal_density(const Vector& x, const Vector& mean, const Matrix& cov) {
    const int p = static_cast<int>(x.size());
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("log_normal_density: covariance not positive definite");
    const Vector d = x - mean;
    const Vector w = llt.matrixL().solve(d);
    double log_det = 0.0;
    for (int j = 0; j < p; ++j) log_det += std::log(llt.matrixL()(j, j));
    return -0.5 * (p * std::log(2.0 * M_PI) + w.squaredNorm()) - log_det;
}

inline double log_diag_normal_density(const Vector& x, const Vector& mean, const Vector& var_diag) {
    double acc = 0.0;
    for (int j = 0; j < x.size(); ++j) {
        const double d = x[j] - mean[j];
        acc += -0.5 * (std::log(2.0 * M_PI * var_diag[j]) + d * d / var_diag[j]);
    }
    return acc;
}

}  // namespace detail

/// Density of P_X with respect to the product reference measure
/// nu = N(mean1, diag(cov1)):
///   p_X(x) = alpha + (1 - alpha) * N(x; mean2, cov2) / N(x; mean1, diag(cov1)).
/// For mean1 == mean2 this is the closed form
///   alpha + (1-alpha)|Sigma|^{1/2}|Omega|^{-1/2} exp(-(x-m)'(Omega^{-1}-Sigma^{-1})(x-m)/2).
/// Strictly positive, and >= alpha everywhere.
inline double mixture_density_wrt_nu(const GaussianMixtureSpec& spec, const Vector& x) {
    spec.validate();
    if (x.size() != spec.dim() || !all_finite(x))
        throw std::invalid_argument("mixture_density_wrt_nu: bad evaluation point");
    const double lr = detail::log_normal_density(x, spec.mean2, spec.cov2) -
                      detail::log_diag_normal_density(x, spec.mean1, spec.cov1_diag);
    return spec.alpha + (1.0 - spec.alpha) * std::exp(lr);
}

/// Marginal density of X_u with respect to nu_u for a subset u of coordinates.
/// The marginal of the mixture is the mixture of the marginals.
inline double marginal_density_wrt_nu(const GaussianMixtureSpec& spec,
                                      const std::vector<int>& idx, const Vector& x_sub) {
    spec.validate();
    const int q = static_cast<int>(idx.size());
    if (q < 1 || x_sub.size() != q)
        throw std::invalid_argument("marginal_density_wrt_nu: bad subset");
    Vector m1(q), m2(q), v1(q);
    Matrix c2(q, q);
    for (int a = 0; a < q; ++a) {
        const int i = idx[a];
        if (i < 0 || i >= spec.dim())
            throw std::invalid_argument("marginal_density_wrt_nu: index out of range");
        m1[a] = spec.mean1[i];
        m2[a] = spec.mean2[i];
        v1[a] = spec.cov1_diag[i];
        for (int b = 0; b < q; ++b) c2(a, b) = spec.cov2(i, idx[b]);
    }
    const double lr = detail::log_normal_density(x_sub, m2, c2) -
                      detail::log_diag_normal_density(x_sub, m1, v1);
    return spec.alpha + (1.0 - spec.alpha) * std::exp(lr);
}

/// Restriction of the mixture to a subset of coordinates as a spec of its own.
inline GaussianMixtureSpec marginal_spec(const GaussianMixtureSpec& spec,
                                         const std::vector<int>& idx) {
    const int q = static_cast<int>(idx.size());
    GaussianMixtureSpec out;
    out.alpha = spec.alpha;
    out.mean1.resize(q);
    out.mean2.resize(q);
    out.cov1_diag.resize(q);
    out.cov2.resize(q, q);
    for (int a = 0; a < q; ++a) {
        out.mean1[a] = spec.mean1[idx[a]];
        out.mean2[a] = spec.mean2[idx[a]];
        out.cov1_diag[a] = spec.cov1_diag[idx[a]];
        for (int b = 0; b < q; ++b) out.cov2(a, b) = spec.cov2(idx[a], idx[b]);
    }
    out.validate();
    return out;
}

// ---------------------------------------------------------------------------
// Admissibility certification
// ---------------------------------------------------------------------------

/// Certifies the density lower-bound condition for the Gaussian mixture.
/// Centered case (mean1 == mean2): the density w.r.t. nu is bounded iff
/// (Omega^{-1} - Sigma^{-1}) is positive definite, and then
///   M1 = alpha <= p_X <= M2 = alpha + (1-alpha)|Sigma|^{1/2}|Omega|^{-1/2},
/// which yields the certified bound M = M1 / M2^2.
/// Non-centered specs are certified numerically from a quasi-uniform scan of
/// the density ratio over the 6-sigma box (method = density_bounds).
inline AdmissibilityReport check_c2_gaussian(const GaussianMixtureSpec& spec) {
    spec.validate();
    const int p = spec.dim();

    Matrix sigma_inv = Matrix::Zero(p, p);
    for (int j = 0; j < p; ++j) sigma_inv(j, j) = 1.0 / spec.cov1_diag[j];
    Eigen::LLT<Matrix> llt(spec.cov2);
    const Matrix omega_inv = llt.solve(Matrix::Identity(p, p));
    const Matrix diff = 0.5 * (omega_inv + omega_inv.transpose()) - sigma_inv;

    Eigen::SelfAdjointEigenSolver<Matrix> es(diff);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("check_c2_gaussian: eigen-decomposition failed");
    const Vector ev = es.eigenvalues();
    const double lam_min = ev.minCoeff();
    const double lam_max = ev.maxCoeff();
    const bool pd = lam_min > 1e-10 * std::max(lam_max, 0.0);

    std::ostringstream oss;
    oss << "eigenvalues(Omega^-1 - Sigma^-1) = [";
    for (int j = 0; j < p; ++j) oss << (j ? ", " : "") << ev[j];
    oss << "]";

    AdmissibilityReport rep;
    if (!pd) {
        rep.holds = false;
        rep.method = AdmissibilityMethod::gaussian_pd_test;
        oss << "; not positive definite, density unbounded w.r.t. nu";
        rep.details = oss.str();
        return rep;
    }

    if (spec.centered()) {
        double log_det_sigma = 0.0;
        for (int j = 0; j < p; ++j) log_det_sigma += std::log(spec.cov1_diag[j]);
        double log_det_omega = 0.0;
        for (int j = 0; j < p; ++j) log_det_omega += 2.0 * std::log(llt.matrixL()(j, j));
        const double m2 = spec.alpha +
                          (1.0 - spec.alpha) * std::exp(0.5 * (log_det_sigma - log_det_omega));
        rep.holds = true;
        rep.method = AdmissibilityMethod::gaussian_pd_test;
        rep.bound_m = std::min(1.0, spec.alpha / (m2 * m2));
        oss << "; M1 = " << spec.alpha << ", M2 = " << m2;
        rep.details = oss.str();
        return rep;
    }

    // Non-centered: numeric sup of the density over a Halton scan of the
    // 6-sigma box around both means. The inf is alpha exactly.
    const int n_scan = 1000000;
    Vector lo(p), hi(p);
    for (int j = 0; j < p; ++j) {
        const double s = 6.0 * std::sqrt(std::max(spec.cov1_diag[j], spec.cov2(j, j)));
        lo[j] = std::min(spec.mean1[j], spec.mean2[j]) - s;
        hi[j] = std::max(spec.mean1[j], spec.mean2[j]) + s;
    }
    static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
    if (p > 8) throw std::runtime_error("check_c2_gaussian: scan supports p <= 8");
    double sup = 0.0;
    Vector x(p);
    for (int i = 1; i <= n_scan; ++i) {
        for (int j = 0; j < p; ++j) {
            // radical-inverse Halton point
            double f = 1.0, r = 0.0;
            int k = i;
            while (k > 0) {
                f /= primes[j];
                r += f * (k % primes[j]);
                k /= primes[j];
            }
            x[j] = lo[j] + (hi[j] - lo[j]) * r;
        }
        sup = std::max(sup, mixture_density_wrt_nu(spec, x));
    }
    rep.holds = true;
    rep.method = AdmissibilityMethod::density_bounds;
    rep.bound_m = std::min(1.0, spec.alpha / (sup * sup));
    oss << "; numeric sup over 6-sigma box = " << sup
        << " (caveat: scan-based, not a closed-form bound)";
    rep.details = oss.str();
    return rep;
}

// ---------------------------------------------------------------------------
// Copula families (two inputs)
// ---------------------------------------------------------------------------

enum class CopulaFamily { morgenstern, frank, archimedean_tabulated };

inline const char* to_string(CopulaFamily f) {
    switch (f) {
        case CopulaFamily::morgenstern: return "morgenstern";
        case CopulaFamily::frank: return "frank";
        case CopulaFamily::archimedean_tabulated: return "archimedean_tabulated";
    }
    return "?";
}

/// Archimedean generator tabulated on a uniform grid of [0,1].
/// Strict generators diverge at u=0; the first node may hold +inf for phi
/// (and -inf for dphi).
struct GeneratorTable {
    std::vector<double> phi, dphi, ddphi;

    int size() const { return static_cast<int>(phi.size()); }
    double node(int i) const { return static_cast<double>(i) / (size() - 1); }
};

struct CopulaSpec {
    CopulaFamily family = CopulaFamily::morgenstern;
    double theta = 0.0;
    GeneratorTable generator;  // used by archimedean_tabulated only

    void validate() const {
        switch (family) {
            case CopulaFamily::morgenstern:
                if (!(theta >= -1.0 && theta <= 1.0))
                    throw std::invalid_argument("morgenstern copula: theta must lie in [-1,1]");
                break;
            case CopulaFamily::frank:
                if (theta == 0.0 || !std::isfinite(theta))
                    throw std::invalid_argument("frank copula: theta must be nonzero");
                break;
            case CopulaFamily::archimedean_tabulated: {
                const int k = generator.size();
                if (k < 11 || generator.dphi.size() != static_cast<std::size_t>(k) ||
                    generator.ddphi.size() != static_cast<std::size_t>(k))
                    throw std::invalid_argument("archimedean generator: need matching tables, >= 11 nodes");
                double phi_max = 0.0;
                for (int i = 1; i < k; ++i) phi_max = std::max(phi_max, std::abs(generator.phi[i]));
                if (std::abs(generator.phi[k - 1]) > 1e-10 * (1.0 + phi_max))
                    throw std::invalid_argument("archimedean generator: phi(1) must be 0");
                for (int i = 0; i < k; ++i) {
                    const double f = generator.phi[i], d = generator.dphi[i], dd = generator.ddphi[i];
                    const bool edge = (i == 0);
                    if (!edge && (!std::isfinite(f) || !std::isfinite(d) || !std::isfinite(dd)))
                        throw std::invalid_argument("archimedean generator: non-finite interior node");
                    if (!(d < 0.0))
                        throw std::invalid_argument("archimedean generator: phi' must be negative");
                    if (!(dd > 0.0))
                        throw std::invalid_argument("archimedean generator: phi'' must be positive");
                    if (i > 0 && !(generator.phi[i] < generator.phi[i - 1]))
                        throw std::invalid_argument("archimedean generator: phi must be strictly decreasing");
                }
                break;
            }
        }
    }
};

namespace detail {

inline double interp_table(const std::vector<double>& v, double u) {
    const int k = static_cast<int>(v.size());
    const double t = u * (k - 1);
    const int i = std::min(k - 2, std::max(0, static_cast<int>(std::floor(t))));
    const double w = t - i;
    return (1.0 - w) * v[i] + w * v[i + 1];
}

/// Inverse of a strictly decreasing tabulated phi by bisection on the grid.
inline double inverse_phi(const GeneratorTable& g, double s) {
    const int k = g.size();
    if (s <= g.phi[k - 1]) return 1.0;
    if (s >= g.phi[0]) return 0.0;
    int lo = 0, hi = k - 1;  // phi[lo] > s >= phi[hi]
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (g.phi[mid] > s)
            lo = mid;
        else
            hi = mid;
    }
    const double a = g.phi[lo], b = g.phi[hi];
    double w = 0.0;
    if (std::isfinite(a) && b != a) w = (a - s) / (a - b);
    else w = 1.0;  // segment starting at an infinite node
    return g.node(lo) + w * (g.node(hi) - g.node(lo));
}

}  // namespace detail

inline double copula_cdf(const CopulaSpec& spec, double u, double v) {
    switch (spec.family) {
        case CopulaFamily::morgenstern:
            return u * v * (1.0 + spec.theta * (1.0 - u) * (1.0 - v));
        case CopulaFamily::frank: {
            const double t = spec.theta;
            const double num = std::expm1(-t * u) * std::expm1(-t * v);
            return -std::log1p(num / std::expm1(-t)) / t;
        }
        case CopulaFamily::archimedean_tabulated: {
            if (u <= 0.0 || v <= 0.0) return 0.0;
            if (u >= 1.0) return v;
            if (v >= 1.0) return u;
            const double s = detail::interp_table(spec.generator.phi, u) +
                             detail::interp_table(spec.generator.phi, v);
            return detail::inverse_phi(spec.generator, s);
        }
    }
    return 0.0;
}

inline double copula_density(const CopulaSpec& spec, double u, double v) {
    switch (spec.family) {
        case CopulaFamily::morgenstern:
            return 1.0 + spec.theta * (1.0 - 2.0 * u) * (1.0 - 2.0 * v);
        case CopulaFamily::frank: {
            const double t = spec.theta;
            const double em1 = std::expm1(-t);
            const double den = em1 + std::expm1(-t * u) * std::expm1(-t * v);
            return -t * em1 * std::exp(-t * (u + v)) / (den * den);
        }
        case CopulaFamily::archimedean_tabulated: {
            // c(u,v) = -phi''(C) phi'(u) phi'(v) / phi'(C)^3
            const double c = copula_cdf(spec, u, v);
            if (c <= 0.0) return 0.0;
            const double dc = detail::interp_table(spec.generator.dphi, c);
            const double ddc = detail::interp_table(spec.generator.ddphi, c);
            const double du = detail::interp_table(spec.generator.dphi, u);
            const double dv = detail::interp_table(spec.generator.dphi, v);
            return -ddc * du * dv / (dc * dc * dc);
        }
    }
    return 0.0;
}

/// Lower bound M with c(u,v) >= M on the unit square, per family:
///  - morgenstern: holds iff |theta| < 1, with M = 1 - |theta|;
///  - frank: M = -theta (e^-theta - 1) e^-2theta for theta > 0 and
///    -theta (e^-theta - 1) for theta < 0, clipped to (0,1];
///  - archimedean_tabulated: checks -phi' >= M1 > 0 and
///    d/du( 1/(2 phi'^2) ) >= M2 > 0 on the grid, then reports the
///    grid-minimum density over interior nodes as the bound.
inline AdmissibilityReport copula_lower_bound(const CopulaSpec& spec) {
    spec.validate();
    AdmissibilityReport rep;
    rep.method = AdmissibilityMethod::copula_lower_bound;
    std::ostringstream oss;
    switch (spec.family) {
        case CopulaFamily::morgenstern: {
            const double b = 1.0 - std::abs(spec.theta);
            if (b > 0.0) {
                rep.holds = true;
                rep.bound_m = b;
                oss << "morgenstern density min = 1 - |theta| = " << b;
            } else {
                rep.holds = false;
                oss << "morgenstern bound degenerates to 0 at |theta| = 1";
            }
            break;
        }
        case CopulaFamily::frank: {
            const double t = spec.theta;
            double b = (t > 0.0) ? -t * std::expm1(-t) * std::exp(-2.0 * t)
                                 : -t * std::expm1(-t);
            b = std::min(b, 1.0);
            rep.holds = b > 0.0;
            if (rep.holds) rep.bound_m = b;
            oss << "frank closed-form bound = " << b << " (theta = " << t << ")";
            break;
        }
        case CopulaFamily::archimedean_tabulated: {
            const auto& g = spec.generator;
            const int k = g.size();
            double m1 = std::numeric_limits<double>::infinity();
            double m2 = std::numeric_limits<double>::infinity();
            for (int i = 0; i < k; ++i) {
                m1 = std::min(m1, -g.dphi[i]);
                // d/du( 1/(2 phi'^2) ) = phi'' / |phi'|^3
                const double ad = std::abs(g.dphi[i]);
                if (std::isfinite(ad)) m2 = std::min(m2, g.ddphi[i] / (ad * ad * ad));
            }
            if (!(m1 > 0.0) || !(m2 > 0.0)) {
                rep.holds = false;
                oss << "generator conditions failed: M1 = " << m1 << ", M2 = " << m2;
                break;
            }
            double cmin = std::numeric_limits<double>::infinity();
            for (int i = 1; i + 1 < k; ++i)
                for (int j = 1; j + 1 < k; ++j)
                    cmin = std::min(cmin, copula_density(spec, g.node(i), g.node(j)));
            if (cmin > 0.0) {
                rep.holds = true;
                rep.bound_m = std::min(cmin, 1.0);
                oss << "generator conditions hold (M1 = " << m1 << ", M2 = " << m2
                    << "); interior grid-minimum density = " << cmin;
            } else {
                rep.holds = false;
                oss << "density vanishes on the grid (min = " << cmin << ")";
            }
            break;
        }
    }
    rep.details = oss.str();
    return rep;
}

/// Tabulation of the residual copula C~ = (C - m uv) / (1 - m) on a uniform
/// (k x k) grid including the boundary.
struct CopulaGrid {
    int k = 0;
    Matrix c;  // c(i,j) = C~(i/(k-1), j/(k-1))

    double node(int i) const { return static_cast<double>(i) / (k - 1); }
};

/// Extracts C~ from the decomposition C = m uv + (1-m) C~ and verifies the
/// copula axioms on the grid: margins and nonnegative rectangle masses.
inline CopulaGrid copula_decompose(const CopulaSpec& spec, double m, int grid_k = 101) {
    spec.validate();
    if (grid_k < 3) throw std::invalid_argument("copula_decompose: grid too small");
    const AdmissibilityReport lb = copula_lower_bound(spec);
    if (!(m > 0.0) || !lb.holds || !(lb.bound_m.value() >= m))
        throw std::invalid_argument("copula_decompose: m must satisfy 0 < m <= certified bound");
    if (!(m < 1.0))
        throw std::invalid_argument("copula_decompose: m must be < 1");

    CopulaGrid grid;
    grid.k = grid_k;
    grid.c.resize(grid_k, grid_k);
    for (int i = 0; i < grid_k; ++i) {
        const double u = grid.node(i);
        for (int j = 0; j < grid_k; ++j) {
            const double v = grid.node(j);
            grid.c(i, j) = (copula_cdf(spec, u, v) - m * u * v) / (1.0 - m);
        }
    }

    for (int i = 0; i < grid_k; ++i) {
        const double u = grid.node(i);
        if (std::abs(grid.c(i, 0)) > 1e-12 || std::abs(grid.c(0, i)) > 1e-12 ||
            std::abs(grid.c(i, grid_k - 1) - u) > 1e-12 ||
            std::abs(grid.c(grid_k - 1, i) - u) > 1e-12)
            throw std::runtime_error("copula_decompose: margin axiom violated at node " +
                                     std::to_string(i));
    }
    for (int i = 0; i + 1 < grid_k; ++i)
        for (int j = 0; j + 1 < grid_k; ++j) {
            const double mass = grid.c(i + 1, j + 1) - grid.c(i, j + 1) -
                                grid.c(i + 1, j) + grid.c(i, j);
            if (mass < -1e-10)
                throw std::runtime_error(
                    "copula_decompose: negative rectangle mass at cell (" +
                    std::to_string(i) + "," + std::to_string(j) + "): " +
                    std::to_string(mass));
        }
    return grid;
}

// ---------------------------------------------------------------------------
// JSON serialization (IEEE doubles throughout)
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const GaussianMixtureSpec& spec) {
    nlohmann::json j;
    j["alpha"] = spec.alpha;
    j["mean1"] = std::vector<double>(spec.mean1.data(), spec.mean1.data() + spec.mean1.size());
    j["mean2"] = std::vector<double>(spec.mean2.data(), spec.mean2.data() + spec.mean2.size());
    j["cov1_diag"] =
        std::vector<double>(spec.cov1_diag.data(), spec.cov1_diag.data() + spec.cov1_diag.size());
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < spec.cov2.rows(); ++i) {
        rows.emplace_back();
        for (int jj = 0; jj < spec.cov2.cols(); ++jj) rows.back().push_back(spec.cov2(i, jj));
    }
    j["cov2"] = rows;
    return j;
}

inline GaussianMixtureSpec gaussian_spec_from_json(const nlohmann::json& j) {
    GaussianMixtureSpec spec;
    spec.alpha = j.at("alpha").get<double>();
    const auto m1 = j.at("mean1").get<std::vector<double>>();
    const auto m2 = j.at("mean2").get<std::vector<double>>();
    const auto c1 = j.at("cov1_diag").get<std::vector<double>>();
    const auto c2 = j.at("cov2").get<std::vector<std::vector<double>>>();
    const int p = static_cast<int>(m1.size());
    spec.mean1 = Eigen::Map<const Vector>(m1.data(), p);
    if (static_cast<int>(m2.size()) != p || static_cast<int>(c1.size()) != p ||
        static_cast<int>(c2.size()) != p)
        throw std::invalid_argument("gaussian spec json: dimension mismatch");
    spec.mean2 = Eigen::Map<const Vector>(m2.data(), p);
    spec.cov1_diag = Eigen::Map<const Vector>(c1.data(), p);
    spec.cov2.resize(p, p);
    for (int i = 0; i < p; ++i) {
        if (static_cast<int>(c2[i].size()) != p)
            throw std::invalid_argument("gaussian spec json: cov2 must be square");
        for (int jj = 0; jj < p; ++jj) spec.cov2(i, jj) = c2[i][jj];
    }
    spec.validate();
    return spec;
}

inline CopulaSpec copula_spec_from_json(const nlohmann::json& j) {
    CopulaSpec spec;
    const auto fam = j.at("family").get<std::string>();
    if (fam == "morgenstern") spec.family = CopulaFamily::morgenstern;
    else if (fam == "frank") spec.family = CopulaFamily::frank;
    else if (fam == "archimedean_tabulated") spec.family = CopulaFamily::archimedean_tabulated;
    else throw std::invalid_argument("copula spec json: unknown family " + fam);
    spec.theta = j.value("theta", 0.0);
    if (j.contains("generator_grid")) {
        for (const auto& row : j.at("generator_grid")) {
            if (row.size() != 3)
                throw std::invalid_argument("copula spec json: generator rows must be triples");
            spec.generator.phi.push_back(row[0].get<double>());
            spec.generator.dphi.push_back(row[1].get<double>());
            spec.generator.ddphi.push_back(row[2].get<double>());
        }
    }
    spec.validate();
    return spec;
}

}  // namespace hofd
