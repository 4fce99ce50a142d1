#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "hofd/bench.hpp"
#include "hofd/distributions.hpp"

using namespace hofd;

namespace {

GaussianMixtureSpec spec51() { return bilinear_spec(0.4); }

}  // namespace

TEST_CASE("mixture spec validation", "[distributions]") {
    GaussianMixtureSpec s = spec51();
    REQUIRE_NOTHROW(s.validate());

    SECTION("alpha outside (0,1)") {
        s.alpha = 0.0;
        REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
        s.alpha = 1.0;
        REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
    }
    SECTION("nonpositive reference variance") {
        s.cov1_diag[0] = 0.0;
        REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
    }
    SECTION("cov2 not positive definite") {
        s.cov2 << 0.5, 0.8, 0.8, 0.5;
        REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
    }
    SECTION("cov2 not symmetric") {
        s.cov2(0, 1) = 0.1;
        REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
    }
}

TEST_CASE("sampler determinism and degenerate mixture", "[distributions]") {
    GaussianMixtureSpec s;
    s.alpha = 1.0 - 1e-12;
    s.mean1 = Vector::Zero(2);
    s.mean1 << 3.0, -2.0;
    s.mean2 = Vector::Zero(2);
    s.cov1_diag = Vector::Ones(2);
    s.cov2 = 0.5 * Matrix::Identity(2, 2);
    s.validate();

    const int n = 20000;
    const Matrix x = sample_mixture(s, n, 99);
    // with alpha -> 1 the sample is effectively N(mean1, I)
    const double tol = 4.0 / std::sqrt(static_cast<double>(n));
    REQUIRE(std::abs(x.col(0).mean() - 3.0) < tol);
    REQUIRE(std::abs(x.col(1).mean() + 2.0) < tol);

    const Matrix x2 = sample_mixture(s, n, 99);
    REQUIRE(x == x2);

    REQUIRE_THROWS_AS(sample_mixture(s, 0, 1), std::invalid_argument);
}

TEST_CASE("sampler reproduces the 5.1 mixture covariance", "[distributions][slow]") {
    const Matrix x = sample_mixture(spec51(), 1000000, 7);
    const Vector a = x.col(0), b = x.col(1);
    const double cov = covariance_n(a, b);
    // closed form: alpha*0 + (1-alpha)*0.4 = 0.32
    REQUIRE(std::abs(cov - 0.32) < 0.01);
}

TEST_CASE("sampler law matches closed-form moments within 5 standard errors",
          "[distributions]") {
    const auto spec = spec51();
    const int n = 100000;
    const Matrix x = sample_mixture(spec, n, 123);
    const MixtureMoments m = pair_mixture_moments(spec, 0, 1);

    const double se_mean0 = std::sqrt(m.var_i / n);
    REQUIRE(std::abs(x.col(0).mean()) < 5.0 * se_mean0);
    REQUIRE(std::abs(x.col(1).mean()) < 5.0 * se_mean0);

    // SE of the empirical covariance of centered variables ~ sqrt(V(XY)/n)
    const double se_cov = std::sqrt(m.var_prod / n);
    REQUIRE(std::abs(covariance_n(x.col(0), x.col(1)) - m.cov) < 5.0 * se_cov);

    const double se_var = std::sqrt((m.e_x2y2 - m.var_i * m.var_i) / n);  // rough scale
    REQUIRE(std::abs(variance_n(x.col(0)) - m.var_i) < 5.0 * se_var + 0.01);
}

TEST_CASE("mixture density w.r.t. nu", "[distributions]") {
    const auto spec = spec51();

    SECTION("value at the origin") {
        Vector x = Vector::Zero(2);
        // alpha + (1-alpha) |Sigma|^1/2 |Omega|^-1/2 = 0.2 + 0.8/0.3
        const double expected = 0.2 + 0.8 / 0.3;
        REQUIRE(mixture_density_wrt_nu(spec, x) == Catch::Approx(expected).epsilon(1e-12));
    }
    SECTION("identical components give density 1") {
        GaussianMixtureSpec s = spec;
        s.cov2 = Matrix::Identity(2, 2);
        for (double t : {-2.0, -0.3, 0.0, 1.7}) {
            Vector x(2);
            x << t, -t / 2;
            REQUIRE(mixture_density_wrt_nu(s, x) == Catch::Approx(1.0).epsilon(1e-12));
        }
    }
    SECTION("density tends to alpha along rays") {
        Vector slow(2), fast(2);
        slow << 30.0, 30.0;  // slow eigen-direction of Omega^-1 - I
        fast << 5.0, -5.0;
        REQUIRE(std::abs(mixture_density_wrt_nu(spec, slow) - 0.2) < 1e-10);
        REQUIRE(std::abs(mixture_density_wrt_nu(spec, fast) - 0.2) < 1e-10);
    }
    SECTION("positivity: density >= alpha everywhere (centered case)") {
        RandomStream rs(4);
        for (int i = 0; i < 1000; ++i) {
            Vector x(2);
            x << 4.0 * rs.normal(), 4.0 * rs.normal();
            REQUIRE(mixture_density_wrt_nu(spec, x) >= spec.alpha);
        }
    }
}

TEST_CASE("marginal density matches the 1-D closed form", "[distributions]") {
    const auto spec = spec51();
    for (double t : {-1.5, 0.0, 0.4, 2.2}) {
        Vector x(1);
        x << t;
        const double lebesgue_ratio =
            std::exp(-0.5 * t * t / 0.5) / std::sqrt(0.5) / std::exp(-0.5 * t * t);
        const double expected = 0.2 + 0.8 * lebesgue_ratio;
        REQUIRE(marginal_density_wrt_nu(spec, {0}, x) ==
                Catch::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("admissibility certificate for the 5.1 mixture", "[distributions]") {
    const AdmissibilityReport rep = check_c2_gaussian(spec51());
    REQUIRE(rep.holds);
    REQUIRE(rep.method == AdmissibilityMethod::gaussian_pd_test);
    // eigenvalues of Omega^-1 - I are 1/0.9 - 1 = 0.111.. and 1/0.1 - 1 = 9
    REQUIRE(rep.details.find("0.111") != std::string::npos);
    REQUIRE(rep.details.find("9") != std::string::npos);
    const double m2 = 0.2 + 0.8 / 0.3;
    REQUIRE(rep.bound_m.has_value());
    REQUIRE(*rep.bound_m == Catch::Approx(0.2 / (m2 * m2)).epsilon(1e-12));
}

TEST_CASE("admissibility fails when a second-component variance exceeds the reference",
          "[distributions]") {
    GaussianMixtureSpec s = spec51();
    s.cov2 << 1.2, 0.0, 0.0, 0.5;  // omega_1^2 > sigma_1^2
    const AdmissibilityReport rep = check_c2_gaussian(s);
    REQUIRE_FALSE(rep.holds);
    REQUIRE_FALSE(rep.bound_m.has_value());
}

TEST_CASE("admissibility boundary case Omega == Sigma fails strict test", "[distributions]") {
    GaussianMixtureSpec s = spec51();
    s.cov2 = Matrix::Identity(2, 2);
    REQUIRE_FALSE(check_c2_gaussian(s).holds);
}

TEST_CASE("non-centered specs certify via density bounds", "[distributions]") {
    GaussianMixtureSpec s = spec51();
    s.mean2 << 0.3, -0.1;
    const AdmissibilityReport rep = check_c2_gaussian(s);
    REQUIRE(rep.holds);
    REQUIRE(rep.method == AdmissibilityMethod::density_bounds);
    REQUIRE(*rep.bound_m > 0.0);
    REQUIRE(*rep.bound_m <= 1.0);
}

TEST_CASE("certified bound is valid on a Monte Carlo scan", "[distributions]") {
    const auto spec = spec51();
    const double m = check_c2_gaussian(spec).bound_m.value();
    const Matrix x = sample_mixture(spec, 100000, 31);
    for (int i = 0; i < x.rows(); ++i) {
        const Vector xi = x.row(i).transpose();
        Vector x0(1), x1(1);
        x0 << xi[0];
        x1 << xi[1];
        const double joint = mixture_density_wrt_nu(spec, xi);
        const double prod = marginal_density_wrt_nu(spec, {0}, x0) *
                            marginal_density_wrt_nu(spec, {1}, x1);
        REQUIRE(joint >= m * prod * (1.0 - 1e-12));
    }
}

TEST_CASE("pair structure validation", "[distributions]") {
    PairStructure ps = PairStructure::consecutive(5);
    REQUIRE(ps.blocks.size() == 3);
    REQUIRE(ps.blocks.back()[1] == -1);
    REQUIRE_NOTHROW(ps.validate(5));

    ps.blocks[0] = {0, 0};
    REQUIRE_THROWS_AS(ps.validate(5), std::invalid_argument);

    ps = PairStructure{{{0, 1}, {1, 2}}};
    REQUIRE_THROWS_AS(ps.validate(3), std::invalid_argument);
}

TEST_CASE("copula lower bounds", "[distributions]") {
    SECTION("morgenstern") {
        CopulaSpec s{CopulaFamily::morgenstern, 0.0, {}};
        auto rep = copula_lower_bound(s);
        REQUIRE(rep.holds);
        REQUIRE(*rep.bound_m == Catch::Approx(1.0));

        s.theta = 0.6;
        rep = copula_lower_bound(s);
        REQUIRE(*rep.bound_m == Catch::Approx(0.4).epsilon(1e-14));

        s.theta = 1.0;
        rep = copula_lower_bound(s);
        REQUIRE_FALSE(rep.holds);

        s.theta = 1.5;
        REQUIRE_THROWS_AS(copula_lower_bound(s), std::invalid_argument);
    }
    SECTION("frank, positive theta") {
        CopulaSpec s{CopulaFamily::frank, 1.0, {}};
        const auto rep = copula_lower_bound(s);
        REQUIRE(rep.holds);
        const double expected = -1.0 * (std::exp(-1.0) - 1.0) * std::exp(-2.0);
        REQUIRE(*rep.bound_m == Catch::Approx(expected).epsilon(1e-14));
        REQUIRE(*rep.bound_m == Catch::Approx(0.08554821486874875).epsilon(1e-12));

        // the bound really minorizes the density
        for (double u : {0.0, 0.25, 0.5, 0.75, 1.0})
            for (double v : {0.0, 0.3, 1.0})
                REQUIRE(copula_density(s, u, v) >= *rep.bound_m - 1e-12);
    }
    SECTION("frank, negative theta, clipped") {
        CopulaSpec s{CopulaFamily::frank, -0.5, {}};
        auto rep = copula_lower_bound(s);
        REQUIRE(*rep.bound_m == Catch::Approx(0.5 * (std::exp(0.5) - 1.0)).epsilon(1e-14));

        s.theta = -3.0;  // formula exceeds 1, clipped to the (0,1] range
        rep = copula_lower_bound(s);
        REQUIRE(*rep.bound_m == Catch::Approx(1.0));

        s.theta = 0.0;
        REQUIRE_THROWS_AS(copula_lower_bound(s), std::invalid_argument);
    }
}

namespace {

// Frank generator tabulated on a uniform grid; the strict generator diverges
// at 0, which the table carries as an infinite first node.
CopulaSpec tabulated_frank(double theta, int k) {
    CopulaSpec s;
    s.family = CopulaFamily::archimedean_tabulated;
    s.theta = theta;
    for (int i = 0; i < k; ++i) {
        const double t = static_cast<double>(i) / (k - 1);
        if (i == 0) {
            s.generator.phi.push_back(std::numeric_limits<double>::infinity());
            s.generator.dphi.push_back(-std::numeric_limits<double>::infinity());
            s.generator.ddphi.push_back(std::numeric_limits<double>::infinity());
            continue;
        }
        const double em = std::expm1(-theta * t);
        s.generator.phi.push_back(-std::log(em / std::expm1(-theta)));
        s.generator.dphi.push_back(theta * std::exp(-theta * t) / em);
        const double d = em;
        s.generator.ddphi.push_back(theta * theta * std::exp(-theta * t) / (d * d));
    }
    return s;
}

}  // namespace

TEST_CASE("archimedean tabulated generator", "[distributions]") {
    const CopulaSpec s = tabulated_frank(1.0, 1001);
    REQUIRE_NOTHROW(s.validate());

    SECTION("grid bound approximates the density minimum") {
        const auto rep = copula_lower_bound(s);
        REQUIRE(rep.holds);
        // interior minimum of the frank(1) density sits near the (0,1)/(1,0)
        // corners at about 0.582
        REQUIRE(*rep.bound_m > 0.5);
        REQUIRE(*rep.bound_m < 0.65);
        // and it is consistent with the closed-form frank density
        CopulaSpec frank{CopulaFamily::frank, 1.0, {}};
        for (double u : {0.01, 0.3, 0.77})
            for (double v : {0.02, 0.5, 0.99})
                REQUIRE(copula_density(frank, u, v) >= *rep.bound_m * (1.0 - 0.02));
    }
    SECTION("tabulated cdf tracks the closed form") {
        CopulaSpec frank{CopulaFamily::frank, 1.0, {}};
        for (double u : {0.1, 0.4, 0.9})
            for (double v : {0.2, 0.6, 0.95})
                REQUIRE(copula_cdf(s, u, v) ==
                        Catch::Approx(copula_cdf(frank, u, v)).margin(2e-4));
    }
    SECTION("validation rejects broken tables") {
        CopulaSpec bad = s;
        bad.generator.phi.back() = 0.5;  // phi(1) != 0
        REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

        bad = s;
        bad.generator.dphi[500] = 0.1;  // phi' >= 0
        REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

        bad = s;
        bad.generator.ddphi[200] = -1.0;  // phi'' <= 0
        REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
    }
}

TEST_CASE("copula decomposition on a grid", "[distributions]") {
    SECTION("morgenstern theta=0.5 at m=0.5 leaves the unit-parameter morgenstern") {
        CopulaSpec s{CopulaFamily::morgenstern, 0.5, {}};
        const CopulaGrid g = copula_decompose(s, 0.5, 101);
        CopulaSpec unit{CopulaFamily::morgenstern, 1.0, {}};
        for (int i = 0; i < g.k; i += 10)
            for (int j = 0; j < g.k; j += 10)
                REQUIRE(g.c(i, j) ==
                        Catch::Approx(copula_cdf(unit, g.node(i), g.node(j))).margin(1e-12));
    }
    SECTION("independence copula is a fixed point") {
        CopulaSpec s{CopulaFamily::morgenstern, 0.0, {}};
        const CopulaGrid g = copula_decompose(s, 0.5, 51);
        for (int i = 0; i < g.k; ++i)
            for (int j = 0; j < g.k; ++j)
                REQUIRE(g.c(i, j) == Catch::Approx(g.node(i) * g.node(j)).margin(1e-12));
    }
    SECTION("frank residual copula passes the rectangle scan") {
        CopulaSpec s{CopulaFamily::frank, 1.0, {}};
        const double half = copula_lower_bound(s).bound_m.value() / 2.0;
        REQUIRE_NOTHROW(copula_decompose(s, half, 101));
    }
    SECTION("preconditions") {
        CopulaSpec s{CopulaFamily::frank, 1.0, {}};
        REQUIRE_THROWS_AS(copula_decompose(s, 0.0, 51), std::invalid_argument);
        REQUIRE_THROWS_AS(copula_decompose(s, 0.5, 51), std::invalid_argument);  // > bound
    }
}

TEST_CASE("spec JSON round trips", "[distributions]") {
    const auto spec = spec51();
    const auto j = to_json(spec);
    const auto back = gaussian_spec_from_json(j);
    REQUIRE(back.alpha == spec.alpha);
    REQUIRE(back.cov2 == spec.cov2);
    REQUIRE(back.mean1 == spec.mean1);

    nlohmann::json cj;
    cj["family"] = "frank";
    cj["theta"] = 1.0;
    const auto cop = copula_spec_from_json(cj);
    REQUIRE(cop.family == CopulaFamily::frank);

    cj["family"] = "nope";
    REQUIRE_THROWS_AS(copula_spec_from_json(cj), std::invalid_argument);
}
