#pragma once

#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hofd/distributions.hpp"
#include "hofd/smoother.hpp"
#include "hofd/stats.hpp"

namespace hofd {

// ---------------------------------------------------------------------------
// Hierarchically orthogonal functional decomposition of a bivariate model
// ---------------------------------------------------------------------------

/// Component values at the n sample points for one pair of variables.
/// The residual component is defined by subtraction, so
/// eta0 + eta1[k] + eta2[k] + eta12[k] reconstructs the target exactly.
struct ComponentTable {
    double eta0 = 0.0;
    Vector eta1, eta2, eta12;
    int pair_id = 0;
    std::array<int, 2> block{0, 1};  // column indices; second is -1 for a singleton

    int n() const { return static_cast<int>(eta1.size()); }
    bool singleton() const { return block[1] < 0; }

    /// Reconstructed target values (eta0 + eta1 + eta2 + eta12).
    Vector total() const { return (eta1 + eta2 + eta12).array() + eta0; }

    /// Centered sum of the components, the pair's contribution to the model.
    Vector centered_total() const { return eta1 + eta2 + eta12; }
};

struct GaussSeidelConfig {
    // Stopping tolerance on the RMS component change, relative to std(y).
    double epsilon_rel = 1e-4;
    int max_iter = 100;
    SmootherConfig smoother;

    void validate() const {
        if (!(epsilon_rel > 0.0))
            throw std::invalid_argument("gauss-seidel config: epsilon must be positive");
        if (max_iter < 1)
            throw std::invalid_argument("gauss-seidel config: max_iter must be >= 1");
    }
};

struct ConvergenceReport {
    int iterations = 0;
    double final_change = 0.0;
    bool converged = false;
    std::vector<double> per_iteration_changes;
    double epsilon_used = 0.0;
};

/// Solves the reduced two-component projection system by Gauss-Seidel sweeps:
///   Delta1 <- E(Y - Delta2 | X1) - mean(Y - Delta2)
///   Delta2 <- E(Y - Delta1 | X2) - mean(Y - Delta1)
/// starting from Delta = 0, with conditional expectations estimated by the
/// LOO smoother. Smoother weights are built once from the conditioning
/// columns, so each sweep is an application of a fixed linear operator.
/// After convergence the component means are folded into eta0 and the
/// interaction component is obtained by subtraction.
inline std::pair<ComponentTable, ConvergenceReport> hofd_bivariate(
    const Vector& x1, const Vector& x2, const Vector& y, const GaussSeidelConfig& cfg) {
    cfg.validate();
    const int n = static_cast<int>(y.size());
    if (x1.size() != n || x2.size() != n)
        throw std::invalid_argument("hofd_bivariate: length mismatch");
    if (n < 50) throw std::invalid_argument("hofd_bivariate: need n >= 50");
    if (!all_finite(x1) || !all_finite(x2) || !all_finite(y))
        throw std::invalid_argument("hofd_bivariate: non-finite inputs");

    Matrix c1(n, 1), c2(n, 1);
    c1.col(0) = x1;
    c2.col(0) = x2;
    const LooSmoother s1(c1, cfg.smoother);
    const LooSmoother s2(c2, cfg.smoother);

    // Working on the centered output keeps constants out of the smoothers,
    // which otherwise leak at the ridge level through the weight rows.
    const double y_mean = mean(y);
    const Vector yc = y.array() - y_mean;

    const double sd_y = std::sqrt(variance_n(y));
    const double eps = cfg.epsilon_rel * sd_y;

    Vector d1 = Vector::Zero(n), d2 = Vector::Zero(n);
    ConvergenceReport rep;
    rep.epsilon_used = eps;
    for (int it = 0; it < cfg.max_iter; ++it) {
        Vector r2 = yc - d2;
        Vector d1_new;
        try {
            d1_new = s1.apply(r2).array() - mean(r2);
        } catch (const std::exception& e) {
            throw std::runtime_error("hofd_bivariate: smoother failed at iteration " +
                                     std::to_string(it + 1) + ": " + e.what());
        }
        Vector r1 = yc - d1_new;
        Vector d2_new;
        try {
            d2_new = s2.apply(r1).array() - mean(r1);
        } catch (const std::exception& e) {
            throw std::runtime_error("hofd_bivariate: smoother failed at iteration " +
                                     std::to_string(it + 1) + ": " + e.what());
        }
        const double change = std::sqrt(((d1_new - d1).squaredNorm() +
                                         (d2_new - d2).squaredNorm()) /
                                        (2.0 * n));
        d1 = std::move(d1_new);
        d2 = std::move(d2_new);
        rep.per_iteration_changes.push_back(change);
        rep.iterations = it + 1;
        rep.final_change = change;
        if (change <= eps) {
            rep.converged = true;
            break;
        }
    }

    ComponentTable tbl;
    const double m1 = mean(d1), m2 = mean(d2);
    tbl.eta0 = y_mean + m1 + m2;
    tbl.eta1 = d1.array() - m1;
    tbl.eta2 = d2.array() - m2;
    tbl.eta12 = yc - d1 - d2;  // equals y - eta0 - eta1 - eta2 exactly
    return {std::move(tbl), std::move(rep)};
}

// ---------------------------------------------------------------------------
// Two-stage IPDV pipeline
// ---------------------------------------------------------------------------

struct PairDecomposition {
    ComponentTable table;
    ConvergenceReport report;
};

struct IpdvResult {
    std::vector<PairDecomposition> pairs;
    double y_mean = 0.0;
    Vector stage1_residual;  // y - mean(y) - sum of stage-1 pair estimates

    bool all_converged() const {
        for (const auto& p : pairs)
            if (!p.report.converged) return false;
        return true;
    }
};

/// Stage 1 projects the output onto each independent block,
/// eta_i = E(Y | X^(i)) - E(Y), by a 2-D (or 1-D for singletons) LOO smooth;
/// a single block covering every column needs no smoothing since the model
/// output is a function of the full input. Stage 2 runs the bivariate
/// Gauss-Seidel decomposition within each 2-block, with eta_i as the target.
inline IpdvResult ipdv_decompose(const SampleSet& sample, const PairStructure& pairs,
                                 const GaussSeidelConfig& cfg) {
    sample.validate();
    pairs.validate(sample.p());
    cfg.validate();
    const int n = sample.n();

    IpdvResult res;
    res.y_mean = mean(sample.y);
    Vector sum_stage1 = Vector::Zero(n);

    int pair_id = 0;
    for (const auto& block : pairs.blocks) {
        const bool covers_all = static_cast<int>(pairs.blocks.size()) == 1 &&
                                (block[1] >= 0 ? 2 : 1) == sample.p();
        Vector eta_i;
        if (covers_all) {
            eta_i = sample.y.array() - res.y_mean;
        } else {
            const int d = block[1] >= 0 ? 2 : 1;
            Matrix xc(n, d);
            xc.col(0) = sample.x.col(block[0]);
            if (d == 2) xc.col(1) = sample.x.col(block[1]);
            eta_i = loo_conditional_mean(xc, sample.y, cfg.smoother).array() - res.y_mean;
        }
        sum_stage1 += eta_i;

        PairDecomposition pd;
        if (block[1] >= 0) {
            auto [tbl, rep] = hofd_bivariate(sample.x.col(block[0]), sample.x.col(block[1]),
                                             eta_i, cfg);
            pd.table = std::move(tbl);
            pd.report = std::move(rep);
        } else {
            // singleton: the stage-1 projection is already the first-order component
            pd.table.eta0 = mean(eta_i);
            pd.table.eta1 = eta_i.array() - pd.table.eta0;
            pd.table.eta2 = Vector::Zero(n);
            pd.table.eta12 = Vector::Zero(n);
            pd.report.converged = true;
            pd.report.iterations = 0;
            pd.report.final_change = 0.0;
        }
        pd.table.pair_id = pair_id++;
        pd.table.block = block;
        res.pairs.push_back(std::move(pd));
    }

    res.stage1_residual = sample.y.array() - res.y_mean;
    res.stage1_residual -= sum_stage1;
    return res;
}

// ---------------------------------------------------------------------------
// Constraint and inequality diagnostics
// ---------------------------------------------------------------------------

/// Empirical checks of the hierarchical-orthogonality constraints and of the
/// Stone-type norm inequality with delta = 1 - sqrt(1 - M):
///   E[(eta1+eta2+eta12)^2] >= delta^2 (E[eta1^2]+E[eta2^2]+E[eta12^2]).
/// corr(eta1, eta2) is reported but unconstrained: the decomposition is
/// hierarchically, not mutually, orthogonal.
struct ConstraintDiagnostics {
    double corr_eta1_eta12 = 0.0;
    double corr_eta2_eta12 = 0.0;
    double corr_eta1_eta2 = 0.0;
    double cond_mean_sup_x1 = 0.0;  // sup |smoothed E(eta12 | X1)|
    double cond_mean_sup_x2 = 0.0;
    double stone_lhs = 0.0;
    double stone_rhs = 0.0;
    double delta = 0.0;
};

inline ConstraintDiagnostics constraint_diagnostics(const ComponentTable& components,
                                                    const Vector& x1, const Vector& x2,
                                                    double m_bound,
                                                    const SmootherConfig& cfg) {
    if (!(m_bound > 0.0 && m_bound <= 1.0))
        throw std::invalid_argument("constraint_diagnostics: m_bound must lie in (0,1]");
    const int n = components.n();
    if (x1.size() != n || x2.size() != n)
        throw std::invalid_argument("constraint_diagnostics: length mismatch");

    ConstraintDiagnostics d;
    d.corr_eta1_eta12 = correlation(components.eta1, components.eta12);
    d.corr_eta2_eta12 = correlation(components.eta2, components.eta12);
    d.corr_eta1_eta2 = correlation(components.eta1, components.eta2);

    Matrix c1(n, 1), c2(n, 1);
    c1.col(0) = x1;
    c2.col(0) = x2;
    d.cond_mean_sup_x1 =
        loo_conditional_mean(c1, components.eta12, cfg).cwiseAbs().maxCoeff();
    d.cond_mean_sup_x2 =
        loo_conditional_mean(c2, components.eta12, cfg).cwiseAbs().maxCoeff();

    d.delta = 1.0 - std::sqrt(1.0 - m_bound);
    const Vector total = components.centered_total();
    d.stone_lhs = total.squaredNorm() / n;
    d.stone_rhs = d.delta * d.delta *
                  (components.eta1.squaredNorm() + components.eta2.squaredNorm() +
                   components.eta12.squaredNorm()) /
                  n;
    return d;
}

// ---------------------------------------------------------------------------
// CSV serialization of component tables
// ---------------------------------------------------------------------------

inline void write_component_table_csv(std::ostream& os, const ComponentTable& tbl) {
    os << "eta0," << format_double(tbl.eta0) << ",pair_id," << tbl.pair_id << "\n";
    os << "row_index,eta1,eta2,eta12\n";
    for (int k = 0; k < tbl.n(); ++k)
        os << k << ',' << format_double(tbl.eta1[k]) << ',' << format_double(tbl.eta2[k])
           << ',' << format_double(tbl.eta12[k]) << "\n";
}

inline ComponentTable read_component_table_csv(std::istream& is) {
    ComponentTable tbl;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("component table: empty stream");
    {
        std::istringstream ls(line);
        std::string tag, val;
        std::getline(ls, tag, ',');
        std::getline(ls, val, ',');
        if (tag != "eta0") throw std::runtime_error("component table: missing eta0 header");
        tbl.eta0 = std::stod(val);
        std::getline(ls, tag, ',');
        std::getline(ls, val, ',');
        if (tag == "pair_id") tbl.pair_id = std::stoi(val);
    }
    if (!std::getline(is, line) || line.rfind("row_index", 0) != 0)
        throw std::runtime_error("component table: missing column header");
    std::vector<double> e1, e2, e12;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');  // row index
        std::getline(ls, cell, ',');
        e1.push_back(std::stod(cell));
        std::getline(ls, cell, ',');
        e2.push_back(std::stod(cell));
        std::getline(ls, cell, ',');
        e12.push_back(std::stod(cell));
    }
    const int n = static_cast<int>(e1.size());
    tbl.eta1 = Eigen::Map<const Vector>(e1.data(), n);
    tbl.eta2 = Eigen::Map<const Vector>(e2.data(), n);
    tbl.eta12 = Eigen::Map<const Vector>(e12.data(), n);
    return tbl;
}

}  // namespace hofd
