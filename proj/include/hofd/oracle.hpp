#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hofd/distributions.hpp"
#include "hofd/hofd.hpp"
#include "hofd/indices.hpp"

namespace hofd {

// ---------------------------------------------------------------------------
// Closed-form moments of a centered two-component Gaussian mixture.
// For a centered Gaussian pair, E[X^2 Y^2] = Vx Vy + 2 Cov^2; mixing the two
// components gives every moment the analytical index formulas need.
// ---------------------------------------------------------------------------

struct MixtureMoments {
    double var_i = 0.0;
    double var_j = 0.0;
    double cov = 0.0;
    double e_x2y2 = 0.0;    // E[Xi^2 Xj^2]
    double var_prod = 0.0;  // V(Xi Xj)
};

inline void require_centered_at_zero(const GaussianMixtureSpec& spec, const char* who) {
    if (spec.mean1.cwiseAbs().maxCoeff() != 0.0 || spec.mean2.cwiseAbs().maxCoeff() != 0.0)
        throw std::invalid_argument(std::string(who) + ": spec must be centered at zero");
}

inline MixtureMoments pair_mixture_moments(const GaussianMixtureSpec& spec, int i, int j) {
    spec.validate();
    require_centered_at_zero(spec, "pair_mixture_moments");
    if (i == j || i < 0 || j < 0 || i >= spec.dim() || j >= spec.dim())
        throw std::invalid_argument("pair_mixture_moments: bad indices");
    const double a = spec.alpha;
    MixtureMoments m;
    m.var_i = a * spec.cov1_diag[i] + (1.0 - a) * spec.cov2(i, i);
    m.var_j = a * spec.cov1_diag[j] + (1.0 - a) * spec.cov2(j, j);
    m.cov = (1.0 - a) * spec.cov2(i, j);  // reference component is diagonal
    m.e_x2y2 = a * spec.cov1_diag[i] * spec.cov1_diag[j] +
               (1.0 - a) * (spec.cov2(i, i) * spec.cov2(j, j) +
                            2.0 * spec.cov2(i, j) * spec.cov2(i, j));
    m.var_prod = m.e_x2y2 - m.cov * m.cov;
    return m;
}

// ---------------------------------------------------------------------------
// Analytical indices for the benchmark models
// ---------------------------------------------------------------------------

/// Indices of Y = X1 + X2 + X1 X2 under a centered 2-D mixture, taking the
/// components as (X1, X2, X1 X2 - E[X1 X2]). Odd mixture moments vanish, so
/// Cov(Xi, X1 X2) = 0 and
///   V(Y) = V1 + V2 + V(X1 X2) + 2 Cov(X1, X2).
inline SensitivityReport bilinear_model_indices(const GaussianMixtureSpec& spec) {
    spec.validate();
    if (spec.dim() != 2)
        throw std::invalid_argument("bilinear_model_indices: spec must be 2-D");
    require_centered_at_zero(spec, "bilinear_model_indices");
    const MixtureMoments m = pair_mixture_moments(spec, 0, 1);
    const double vy = m.var_i + m.var_j + m.var_prod + 2.0 * m.cov;

    SensitivityReport rep;
    rep.total_variance = vy;
    rep.rows.push_back({"variable", "X1", (m.var_i + m.cov) / vy, m.var_i / vy, m.cov / vy});
    rep.rows.push_back({"variable", "X2", (m.var_j + m.cov) / vy, m.var_j / vy, m.cov / vy});
    rep.rows.push_back({"pair", "X1X2", m.var_prod / vy, m.var_prod / vy, 0.0});
    double sum = 0.0;
    for (const auto& r : rep.rows) sum += r.s;
    rep.sum_all = sum;
    return rep;
}

/// Exact indices of the additive model Y = a1 X1 + a2 X2 + a3 X3 + a4 X4 with
/// independent blocks (X1, X3) ~ spec1 and (X2, X4) ~ spec2. All interaction
/// indices are exactly zero.
inline SensitivityReport linear4_model_indices(const GaussianMixtureSpec& spec1,
                                               const GaussianMixtureSpec& spec2,
                                               const std::array<double, 4>& coeffs) {
    for (const auto* s : {&spec1, &spec2}) {
        s->validate();
        if (s->dim() != 2)
            throw std::invalid_argument("linear4_model_indices: specs must be 2-D");
        require_centered_at_zero(*s, "linear4_model_indices");
    }
    const MixtureMoments m1 = pair_mixture_moments(spec1, 0, 1);  // (X1, X3)
    const MixtureMoments m2 = pair_mixture_moments(spec2, 0, 1);  // (X2, X4)
    const double a1 = coeffs[0], a2 = coeffs[1], a3 = coeffs[2], a4 = coeffs[3];
    const double vy = a1 * a1 * m1.var_i + a3 * a3 * m1.var_j + 2.0 * a1 * a3 * m1.cov +
                      a2 * a2 * m2.var_i + a4 * a4 * m2.var_j + 2.0 * a2 * a4 * m2.cov;

    SensitivityReport rep;
    rep.total_variance = vy;
    const double c13 = a1 * a3 * m1.cov / vy;
    const double c24 = a2 * a4 * m2.cov / vy;
    rep.rows.push_back({"variable", "X1", a1 * a1 * m1.var_i / vy + c13,
                        a1 * a1 * m1.var_i / vy, c13});
    rep.rows.push_back({"variable", "X2", a2 * a2 * m2.var_i / vy + c24,
                        a2 * a2 * m2.var_i / vy, c24});
    rep.rows.push_back({"variable", "X3", a3 * a3 * m1.var_j / vy + c13,
                        a3 * a3 * m1.var_j / vy, c13});
    rep.rows.push_back({"variable", "X4", a4 * a4 * m2.var_j / vy + c24,
                        a4 * a4 * m2.var_j / vy, c24});
    rep.rows.push_back({"pair", "X1X3", 0.0, 0.0, 0.0});
    rep.rows.push_back({"pair", "X2X4", 0.0, 0.0, 0.0});
    double sum = 0.0;
    for (const auto& r : rep.rows) sum += r.s;
    rep.sum_all = sum;
    return rep;
}

// ---------------------------------------------------------------------------
// Brute-force oracle for models without closed forms: replicated runs of the
// full pipeline at n = 5000, averaged, with the replication scatter reported.
// Intended for trend and magnitude checks only.
// ---------------------------------------------------------------------------

struct BruteForceIndices {
    SensitivityReport mean_report;
    std::map<std::string, double> rep_std;  // replication std per row name
    int replications = 0;
};

using ModelFn = std::function<double(const Vector&)>;
using SamplerFn = std::function<Matrix(int, std::uint64_t)>;

inline Vector evaluate_model(const ModelFn& model, const Matrix& x) {
    Vector y(x.rows());
    for (int i = 0; i < x.rows(); ++i) y[i] = model(x.row(i).transpose());
    return y;
}

inline BruteForceIndices brute_force_indices(const ModelFn& model, const SamplerFn& sampler,
                                             const PairStructure& pairs, long n_mc,
                                             std::uint64_t seed, const GaussSeidelConfig& cfg) {
    if (n_mc < 100000)
        throw std::invalid_argument("brute_force_indices: need n_mc >= 1e5 draws");
    const int n_per_rep = 5000;
    const int reps = static_cast<int>(n_mc / n_per_rep);

    std::map<std::string, std::vector<double>> samples;
    SensitivityReport proto;
    for (int r = 0; r < reps; ++r) {
        SampleSet s;
        s.seed = derive_seed(seed, static_cast<std::uint64_t>(r) + 1);
        s.x = sampler(n_per_rep, s.seed);
        s.y = evaluate_model(model, s.x);
        const IpdvResult dec = ipdv_decompose(s, pairs, cfg);
        std::vector<ComponentTable> tables;
        for (const auto& p : dec.pairs) tables.push_back(p.table);
        const SensitivityReport rep = generalized_indices(tables, s.y);
        if (r == 0) proto = rep;
        for (const auto& row : rep.rows) samples[row.name].push_back(row.s);
    }

    BruteForceIndices out;
    out.replications = reps;
    out.mean_report = proto;
    double sum = 0.0;
    for (auto& row : out.mean_report.rows) {
        const auto& v = samples[row.name];
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double sd = 0.0;
        if (v.size() > 1) {
            for (double x : v) sd += (x - m) * (x - m);
            sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
        }
        row.s = m;
        out.rep_std[row.name] = sd;
        sum += m;
    }
    out.mean_report.sum_all = sum;
    return out;
}

inline BruteForceIndices brute_force_indices(const ModelFn& model,
                                             const GaussianMixtureSpec& spec,
                                             const PairStructure& pairs, long n_mc,
                                             std::uint64_t seed, const GaussSeidelConfig& cfg) {
    spec.validate();
    pairs.validate(spec.dim());
    SamplerFn sampler = [spec](int n, std::uint64_t s) { return sample_mixture(spec, n, s); };
    return brute_force_indices(model, sampler, pairs, n_mc, seed, cfg);
}

}  // namespace hofd
