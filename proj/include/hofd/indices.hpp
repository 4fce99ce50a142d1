#pragma once

#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hofd/hofd.hpp"
#include "hofd/smoother.hpp"
#include "hofd/stats.hpp"

namespace hofd {

inline std::string variable_name(int col) { return "X" + std::to_string(col + 1); }

inline std::string pair_name(const std::array<int, 2>& block) {
    return variable_name(block[0]) + variable_name(block[1]);
}

/// One line of a sensitivity report. scope is "variable", "pair" or
/// "bookkeeping"; for variables s = s_v + s_c splits the index into its
/// variance and covariance contributions.
struct IndexRow {
    std::string scope;
    std::string name;
    double s = 0.0;
    double s_v = 0.0;
    double s_c = 0.0;
};

struct SensitivityReport {
    std::vector<IndexRow> rows;
    double total_variance = 0.0;
    double sum_all = 0.0;

    const IndexRow& row(const std::string& name) const {
        for (const auto& r : rows)
            if (r.name == name) return r;
        throw std::out_of_range("sensitivity report: no row named " + name);
    }
};

/// Generalized sensitivity indices from the component tables of an IPDV
/// decomposition. All moments use denominator n. Per 2-block:
///   s_v = V(eta1)/V(Y), s_c = Cov(eta1, eta2)/V(Y), s = s_v + s_c,
///   s12 = V(eta12)/V(Y);
/// singleton blocks get the plain Sobol ratio. Everything the named indices
/// do not account for on a finite sample (within-pair covariances with the
/// interaction, covariances between blocks, and the stage-1 smoothing
/// residual) is carried in dedicated bookkeeping rows so that sum_all closes
/// the variance decomposition identity exactly.
inline SensitivityReport generalized_indices(const std::vector<ComponentTable>& tables,
                                             const Vector& y) {
    if (tables.empty()) throw std::invalid_argument("generalized_indices: no tables");
    const int n = static_cast<int>(y.size());
    for (const auto& t : tables)
        if (t.n() != n) throw std::invalid_argument("generalized_indices: table size mismatch");

    const double vy = variance_n(y);
    if (!(vy > 1e-300)) throw std::invalid_argument("degenerate output");

    SensitivityReport rep;
    rep.total_variance = vy;

    std::vector<Vector> totals;
    totals.reserve(tables.size());
    Vector recon = Vector::Constant(n, 0.0);
    for (const auto& tbl : tables) {
        totals.push_back(tbl.centered_total());
        recon += tbl.total();
    }

    for (const auto& tbl : tables) {
        if (tbl.singleton()) {
            IndexRow r;
            r.scope = "variable";
            r.name = variable_name(tbl.block[0]);
            r.s_v = variance_n(tbl.eta1) / vy;
            r.s_c = 0.0;
            r.s = r.s_v;
            rep.rows.push_back(r);
            continue;
        }
        const double v1 = variance_n(tbl.eta1) / vy;
        const double v2 = variance_n(tbl.eta2) / vy;
        const double c12 = covariance_n(tbl.eta1, tbl.eta2) / vy;
        IndexRow r1{"variable", variable_name(tbl.block[0]), v1 + c12, v1, c12};
        IndexRow r2{"variable", variable_name(tbl.block[1]), v2 + c12, v2, c12};
        IndexRow rp{"pair", pair_name(tbl.block), variance_n(tbl.eta12) / vy,
                    variance_n(tbl.eta12) / vy, 0.0};
        rep.rows.push_back(r1);
        rep.rows.push_back(r2);
        rep.rows.push_back(rp);
        const double nested = 2.0 *
                              (covariance_n(tbl.eta1, tbl.eta12) +
                               covariance_n(tbl.eta2, tbl.eta12)) /
                              vy;
        rep.rows.push_back({"bookkeeping", "within_" + pair_name(tbl.block), nested, 0.0, 0.0});
    }

    double between = 0.0;
    for (std::size_t i = 0; i < totals.size(); ++i)
        for (std::size_t j = i + 1; j < totals.size(); ++j)
            between += 2.0 * covariance_n(totals[i], totals[j]) / vy;
    rep.rows.push_back({"bookkeeping", "between_pairs", between, 0.0, 0.0});

    Vector resid = y - recon;
    const double mr = mean(resid);
    resid.array() -= mr;
    Vector sum_t = Vector::Zero(n);
    for (const auto& t : totals) sum_t += t;
    const double resid_term =
        (2.0 * covariance_n(sum_t, resid) + variance_n(resid)) / vy;
    rep.rows.push_back({"bookkeeping", "stage1_residual", resid_term, 0.0, 0.0});

    double sum = 0.0;
    for (const auto& r : rep.rows) sum += r.s;
    rep.sum_all = sum;
    return rep;
}

/// Independence special case of the generalized indices: with independent
/// inputs every covariance row estimates zero and the variable indices
/// coincide with the classical Sobol indices.
inline SensitivityReport classical_hoeffding_reference(
    const std::vector<ComponentTable>& tables, const Vector& y) {
    return generalized_indices(tables, y);
}

// ---------------------------------------------------------------------------
// Classical Sobol estimates by conditional-moment smoothing (the comparator
// procedure). Components follow the classical recursion
//   eta_u = E(Y|X_u) - sum_{v subset u} eta_v - E(Y),
// estimated with the LOO smoother, and S_u = V(eta_u)/V(Y). Under dependent
// inputs these indices carry no sum constraint and their total generally
// exceeds one.
// ---------------------------------------------------------------------------

struct DvpEntry {
    std::string name;
    double estimate = 0.0;
};

struct DvpReport {
    std::vector<DvpEntry> entries;
    double sum_all = 0.0;

    double estimate(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return e.estimate;
        throw std::out_of_range("dvp report: no entry named " + name);
    }
};

inline DvpReport dvp_sobol(const SampleSet& sample, const std::vector<std::vector<int>>& subsets,
                           const SmootherConfig& cfg) {
    sample.validate();
    const double vy = variance_n(sample.y);
    if (!(vy > 1e-300)) throw std::invalid_argument("degenerate output");
    const int n = sample.n();
    const double my = mean(sample.y);

    std::map<int, Vector> first_order;  // centered eta_j for singletons
    auto singleton_component = [&](int j) -> const Vector& {
        auto it = first_order.find(j);
        if (it != first_order.end()) return it->second;
        Matrix xc(n, 1);
        xc.col(0) = sample.x.col(j);
        Vector m = loo_conditional_mean(xc, sample.y, cfg);
        m.array() -= my;
        return first_order.emplace(j, std::move(m)).first->second;
    };

    DvpReport rep;
    for (const auto& u : subsets) {
        if (u.size() == 1) {
            const Vector& e = singleton_component(u[0]);
            rep.entries.push_back({variable_name(u[0]), variance_n(e) / vy});
        } else if (u.size() == 2) {
            Matrix xc(n, 2);
            xc.col(0) = sample.x.col(u[0]);
            xc.col(1) = sample.x.col(u[1]);
            Vector m = loo_conditional_mean(xc, sample.y, cfg);
            Vector e = m.array() - my;
            e -= singleton_component(u[0]);
            e -= singleton_component(u[1]);
            rep.entries.push_back({pair_name({u[0], u[1]}), variance_n(e) / vy});
        } else {
            throw std::invalid_argument("dvp_sobol: subsets must have size 1 or 2");
        }
    }
    double sum = 0.0;
    for (const auto& e : rep.entries) sum += e.estimate;
    rep.sum_all = sum;
    return rep;
}

// ---------------------------------------------------------------------------
// CSV serialization
// ---------------------------------------------------------------------------

inline void write_sensitivity_report_csv(std::ostream& os, const SensitivityReport& rep) {
    os << "scope,name,s,s_v,s_c\n";
    for (const auto& r : rep.rows)
        os << r.scope << ',' << r.name << ',' << format_double(r.s) << ','
           << format_double(r.s_v) << ',' << format_double(r.s_c) << "\n";
    os << "summary,sum_all," << format_double(rep.sum_all) << ",,\n";
    os << "summary,total_variance," << format_double(rep.total_variance) << ",,\n";
}

}  // namespace hofd
