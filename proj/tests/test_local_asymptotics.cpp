#include "ucm/asymptotics.hpp"
#include "ucm/localanalysis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ucm;

namespace {

bool has_equilibrium(const EquilibriumSet& set, std::vector<std::optional<Rational>> p) {
    for (const auto& e : set.equilibria)
        if (e.point == p) return true;
    return false;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double n = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST(Equilibria, LineOfEquilibriaOnEpsZero) {
    for (int s = 1; s <= 4; ++s) {
        auto f = restrict_to_zero(normalized_k1(s, Rational(-1)).field(), "eps1");
        EXPECT_EQ(f.coords, (std::vector<std::string>{"v1", "r1"}));
        auto set = equilibria_on_subspace(f, "eps1=0");
        EXPECT_TRUE(set.complete);
        ASSERT_EQ(set.equilibria.size(), 2u) << "s=" << s;
        EXPECT_TRUE(has_equilibrium(set, {Rational(1), std::nullopt}));
        EXPECT_TRUE(has_equilibrium(set, {Rational(0), std::nullopt}));
    }
}

TEST(Equilibria, CenterStablePointOnRadiusZero) {
    auto f = k1_on_r1_zero(1, Rational(-1));
    auto set = equilibria_on_subspace(f, "r1=0");
    ASSERT_EQ(set.equilibria.size(), 2u);
    EXPECT_TRUE(has_equilibrium(set, {Rational(1), Rational(0)}));
    EXPECT_TRUE(has_equilibrium(set, {Rational(0), std::nullopt}));
    for (const auto& e : set.equilibria)
        if (e.is_isolated()) {
            auto p = e.exact_point();
            for (const auto& c : f.components) EXPECT_EQ(c.eval_exact(p), 0);
        }
}

TEST(Equilibria, RescalingChartAxis) {
    for (int s : {1, 2, 3}) {
        auto set = equilibria_on_subspace(k2_planar(s, Rational(-1)));
        ASSERT_EQ(set.equilibria.size(), 1u);
        EXPECT_EQ(set.equilibria[0].point, (std::vector<std::optional<Rational>>{Rational(0), std::nullopt}));
    }
}

TEST(Equilibria, RationalRootsWithFractionalExponents) {
    std::vector<std::string> vw{"v", "w"};
    // (v^(1/2) - 2)(v - 1/9) w and w - 3 -> v in {4, 1/9}, w = 3.
    GenPoly v = GenPoly::variable("v", vw), w = GenPoly::variable("w", vw);
    GenPoly a = (GenPoly::power("v", make_rational(1, 2), vw) - GenPoly::constant(Rational(2), vw)) *
                (v - GenPoly::constant(make_rational(1, 9), vw)) * w;
    GenPoly b = w - GenPoly::constant(Rational(3), vw);
    auto set = equilibria_on_subspace({vw, {a, b}});
    EXPECT_TRUE(has_equilibrium(set, {Rational(4), Rational(3)}));
    EXPECT_TRUE(has_equilibrium(set, {make_rational(1, 9), Rational(3)}));
    EXPECT_EQ(set.equilibria.size(), 2u);
    EXPECT_TRUE(set.complete);
    // v^2 - 2 has an irrational positive root: reported as incomplete.
    auto irr = equilibria_on_subspace({vw, {v * v - GenPoly::constant(Rational(2), vw), b}});
    EXPECT_FALSE(irr.complete);
}

TEST(Eigen, CenterStableEquilibrium) {
    for (int s = 1; s <= 5; ++s) {
        for (long m : {-1L, -2L}) {
            Rational mu(m), S(s);
            auto eig = linearize_eigen(k1_on_r1_zero(s, mu), p1a());
            ASSERT_TRUE(eig.exact);
            EXPECT_EQ(eig.values[0], -S * S);
            EXPECT_EQ(eig.values[1], 0);
            EXPECT_EQ(eig.vectors[1][0] / eig.vectors[1][1], -mu / (S * S));
            EXPECT_EQ(eig.vectors[0], (std::array<Rational, 2>{Rational(1), Rational(0)}));
        }
    }
}

TEST(Eigen, JacobianAgreesWithFiniteDifferences) {
    std::mt19937 gen(1);
    std::uniform_real_distribution<double> d(0.2, 1.5);
    for (int s = 1; s <= 3; ++s) {
        auto f = k1_on_r1_zero(s, Rational(-2));
        VariationalMatrix A(f);
        for (int i = 0; i < 20; ++i) {
            double p[2] = {d(gen), d(gen)};
            auto J = A(p);
            for (int j = 0; j < 2; ++j) {
                double h = 1e-6;
                double pp[2] = {p[0], p[1]}, pm[2] = {p[0], p[1]};
                pp[j] += h;
                pm[j] -= h;
                for (int k = 0; k < 2; ++k) {
                    double fd = (f.components[k].eval(std::span<const double>(pp)) - f.components[k].eval(std::span<const double>(pm))) / (2 * h);
                    EXPECT_NEAR(J[k][j], fd, 1e-7 * std::max(1.0, std::abs(fd)));
                }
            }
        }
    }
}

TEST(Eigen, ComplexPairIsFlagged) {
    std::vector<std::string> ab{"a", "b"};
    VectorField rot{ab, {Rational(-1) * GenPoly::variable("b", ab), GenPoly::variable("a", ab)}};
    auto eig = linearize_eigen(rot, {ab, {Rational(0), Rational(0)}, "none"});
    EXPECT_FALSE(eig.exact);
    EXPECT_TRUE(eig.complex_pair);
    EXPECT_NEAR(std::abs(eig.numeric[0].imag()), 1.0, 1e-15);
    VectorField sq{ab, {GenPoly::variable("a", ab) + GenPoly::variable("b", ab), GenPoly::variable("a", ab)}};
    auto e2 = linearize_eigen(sq, {ab, {Rational(0), Rational(0)}, "none"});
    EXPECT_FALSE(e2.exact);
    EXPECT_FALSE(e2.complex_pair);
    EXPECT_NEAR(e2.numeric[0].real() * e2.numeric[1].real(), -1.0, 1e-12);
}

TEST(CenterManifold, CoefficientsMatchIndependentOracle) {
    // Coefficients a1..a4 from a separate computer-algebra solve of the
    // invariance equation.
    struct Case {
        int s;
        Rational mu;
        std::vector<Rational> a;
    };
    std::vector<Case> cases{
        {1, Rational(-1), {Rational(1), Rational(-2), Rational(10), Rational(-74)}},
        {1, Rational(-2), {Rational(2), Rational(-8), Rational(80), Rational(-1184)}},
        {1, make_rational(1, 2), {make_rational(-1, 2), make_rational(-1, 2), make_rational(-5, 4), make_rational(-37, 8)}},
        {2, Rational(-1), {make_rational(1, 4), make_rational(-5, 32), make_rational(15, 64), make_rational(-1105, 2048)}},
        {2, Rational(-2), {make_rational(1, 2), make_rational(-5, 8), make_rational(15, 8), make_rational(-1105, 128)}},
        {3, Rational(-1), {make_rational(1, 9), make_rational(-1, 27), make_rational(62, 2187), make_rational(-224, 6561)}},
        {3, make_rational(1, 2), {make_rational(-1, 18), make_rational(-1, 108), make_rational(-31, 8748), make_rational(-14, 6561)}},
    };
    for (const auto& c : cases) {
        auto cm = center_manifold_series(k1_on_r1_zero(c.s, c.mu), p1a(), 4);
        for (int k = 1; k <= 4; ++k) EXPECT_EQ(cm.coefficient(k), c.a[k - 1]) << "s=" << c.s << " mu=" << c.mu << " k=" << k;
        EXPECT_EQ(cm.coefficient(0), 1);
    }
}

TEST(CenterManifold, HandDerivedSecondOrderForUnitCase) {
    // s = 1, mu = -1: h = 1 + e + a2 e^2 gives residual (-a2 - 2) e^2 + O(e^3).
    auto cm = center_manifold_series(k1_on_r1_zero(1, Rational(-1)), p1a(), 2);
    EXPECT_EQ(cm.coefficient(1), 1);
    EXPECT_EQ(cm.coefficient(2), -2);
}

TEST(CenterManifold, ResidualCertificateAndTangency) {
    for (int s = 1; s <= 5; ++s) {
        for (long m : {-1L, -2L}) {
            Rational mu(m), S(s);
            auto f = k1_on_r1_zero(s, mu);
            auto cm = center_manifold_series(f, p1a(), 6);
            EXPECT_TRUE(residual_certified(cm));
            EXPECT_EQ(*cm.residual.order(), 7);
            auto eig = linearize_eigen(f, p1a());
            EXPECT_EQ(cm.coefficient(1), eig.vectors[1][0] / eig.vectors[1][1]);
            EXPECT_EQ(cm.coefficient(1), -mu / (S * S));
            // Independent re-check: the residual of the truncated graph itself.
            auto r = invariance_residual(f, 0, 1, cm.series, Rational(7));
            EXPECT_TRUE(r.is_zero());
        }
    }
}

TEST(CenterManifold, ResidualDetectsPerturbedCoefficient) {
    auto f = k1_on_r1_zero(2, Rational(-1));
    auto cm = center_manifold_series(f, p1a(), 4);
    auto bad = cm.series + PuiseuxSeries::monomial("eps1", make_rational(1, 1000), Rational(3));
    auto r = invariance_residual(f, 0, 1, bad, Rational(5));
    EXPECT_FALSE(r.is_zero());
    EXPECT_EQ(r.leading_exponent(), Rational(3));
}

TEST(CenterManifold, ReferenceConstantsComparison) {
    auto cm1 = center_manifold_series(k1_on_r1_zero(1, Rational(-1)), p1a(), 6);
    auto t1 = compare_reference_cm(cm1, 1, Rational(-1));
    ASSERT_EQ(t1.size(), 3u);
    EXPECT_TRUE(t1[0].agree());
    EXPECT_TRUE(t1[1].agree());
    EXPECT_FALSE(t1[2].agree());
    EXPECT_EQ(t1[2].reference, make_rational(-3, 2));
    EXPECT_EQ(t1[2].computed, -2);
    auto cm2 = center_manifold_series(k1_on_r1_zero(2, Rational(-1)), p1a(), 6);
    auto t2 = compare_reference_cm(cm2, 2, Rational(-1));
    EXPECT_FALSE(t2[0].agree());
    EXPECT_TRUE(t2[1].agree());
}

TEST(CenterManifold, RejectsNonSimpleZeroEigenvalue) {
    auto f = k2_planar(2, Rational(-1));
    EXPECT_THROW(center_manifold_series(f, {f.coords, {Rational(0), Rational(0)}, "none"}, 3), UnsupportedError);
}

TEST(Transport, LeadingTermsForUnitCase) {
    auto cm = center_manifold_series(k1_on_r1_zero(1, Rational(-1)), p1a(), 6);
    auto tr = transport_series(cm, kappa12(BlowUpWeights::standard(1)), "y2", "v2");
    EXPECT_TRUE(tr.reciprocal);
    // v2 = y2 + a1 y2^-1 + a2 y2^-3 + ...
    EXPECT_EQ(tr.series.coefficient(Rational(-1)), 1);
    EXPECT_EQ(tr.series.coefficient(Rational(1)), 1);
    EXPECT_EQ(tr.series.coefficient(Rational(3)), -2);
    EXPECT_EQ(tr.series.coefficient(Rational(0)), 0);
    EXPECT_EQ(tr.to_string().substr(0, 22), "y2 + y2^-1 - 2 * y2^-3");
}

TEST(Transport, GeneralStructure) {
    for (int s = 1; s <= 3; ++s) {
        Rational mu(-1), S(s);
        auto cm = center_manifold_series(k1_on_r1_zero(s, mu), p1a(), 6);
        auto tr = transport_series(cm, kappa12(BlowUpWeights::standard(s)), "y2", "v2");
        EXPECT_EQ(tr.series.leading_exponent(), Rational(-1 / S));
        EXPECT_EQ(tr.series.coefficient(Rational(-1 / S)), 1);
        EXPECT_EQ(tr.series.coefficient(Rational(1)), cm.coefficient(1));
        EXPECT_EQ(tr.series.coefficient(Rational((2 * S + 1) / S)), cm.coefficient(2));
        auto diffs = series_diff(tr.series, reference_transport(s, mu));
        EXPECT_FALSE(diffs.empty());
    }
}

TEST(Transport, CommutesWithNumericEvaluation) {
    for (int s = 1; s <= 3; ++s) {
        Rational mu(-1);
        auto cm = center_manifold_series(k1_on_r1_zero(s, mu), p1a(), 6);
        auto map = kappa12(BlowUpWeights::standard(s));
        auto tr = transport_series(cm, map, "y2", "v2");
        for (double y2 : {10.0, 30.0, 100.0, 300.0, 1000.0}) {
            double eps1 = std::pow(y2, -(s + 1.0) / s);
            std::vector<double> p{cm.series.eval(eps1), 0.0, eps1};
            auto q = map.apply(p);
            EXPECT_NEAR(q[1], y2, 1e-9 * y2);
            double rel = std::abs(tr.eval_at_target(y2) - q[0]) / q[0];
            EXPECT_LT(rel, 1e-12);
        }
    }
}

TEST(Transport, IdentityMapLeavesSeriesUnchanged) {
    auto cm = center_manifold_series(k1_on_r1_zero(2, Rational(-1)), p1a(), 5);
    auto id = identity_map("K1", chart_coords(Chart::K1));
    auto tr = transport_series(cm, id, "eps1", "v1");
    EXPECT_FALSE(tr.reciprocal);
    EXPECT_EQ(tr.series.terms(), cm.series.terms());
    EXPECT_EQ(tr.series.order(), cm.series.order());
}

TEST(Variational, RescalingChartMatrices) {
    // s = 2 (k = 1) at v2 = 0: only the (1,2) entry v2^2 could survive and it vanishes too.
    VariationalMatrix a2(k2_planar(2, Rational(-1)));
    EXPECT_EQ(a2.entry(0, 1).to_string(), "v2^2");
    EXPECT_EQ(a2.entry(1, 0).to_string(), "-2 * v2");
    double origin[2] = {0.0, 0.7};
    auto m = a2(origin);
    for (auto& row : m)
        for (double x : row) EXPECT_EQ(x, 0.0);
    // s = 1 (k = 0): the slow row keeps mu, a nilpotent matrix.
    VariationalMatrix a1(k2_planar(1, Rational(-1)));
    double pt[2] = {0.0, 2.0};
    auto m1 = a1(pt);
    EXPECT_EQ(m1[0][0], 0.0);
    EXPECT_EQ(m1[0][1], 0.0);
    EXPECT_EQ(m1[1][0], -1.0);
    EXPECT_EQ(m1[1][1], 0.0);
    EXPECT_EQ(a1.spectral_radius(pt), 0.0);
    VariationalMatrix a3(k2_planar(3, Rational(-1)));
    EXPECT_EQ(a3.entry(0, 0).to_string(), "-5 * v2^4 + 2 * v2 y2");
    EXPECT_EQ(a3.entry(1, 0).to_string(), "-3 * v2^2");
    EXPECT_EQ(a3.spectral_radius(origin), 0.0);
}

TEST(SlowManifold, UnitCaseRecursion) {
    auto sm = slow_manifold_series(1, Rational(1), 3);
    ASSERT_EQ(sm.coefficients.size(), 4u);
    for (int k = 0; k <= 3; ++k) {
        auto expected = PuiseuxSeries::monomial("y", Rational(double_factorial_odd(k)), Rational(-(2 * k + 1)));
        EXPECT_EQ(sm.coefficients[k], expected) << "k=" << k;
    }
    EXPECT_EQ(sm.coefficients[3].to_string(), "15 * y^-7");
    // The reference expansion has coefficients -1, -3, -5 for k = 1, 2, 3.
    EXPECT_EQ(reference_asymptotic_coefficient(1), -1);
    EXPECT_EQ(reference_asymptotic_coefficient(3), -5);
    for (int k = 1; k <= 3; ++k) EXPECT_NE(sm.coefficients[k].coefficient(Rational(-(2 * k + 1))), reference_asymptotic_coefficient(k));
}

TEST(SlowManifold, RecursionKillsEachOrder) {
    for (int s = 1; s <= 4; ++s) {
        for (long m : {-1L, 1L, 3L}) {
            auto sm = slow_manifold_series(s, Rational(m), 4);
            auto r = residual_polynomial(sm);
            for (int k = 0; k <= 4; ++k) EXPECT_TRUE(r[static_cast<std::size_t>(k)].is_zero()) << "s=" << s << " k=" << k;
            EXPECT_FALSE(r[5].is_zero());
        }
    }
}

TEST(SlowManifold, PuiseuxCoefficientsForSquareCase) {
    auto sm = slow_manifold_series(2, Rational(-1), 2);
    EXPECT_EQ(sm.coefficients[0], PuiseuxSeries::monomial("y", Rational(1), make_rational(-1, 2)));
    // x1 = mu / s^2 * y^(-1 - 2/s).
    EXPECT_EQ(sm.coefficients[1], PuiseuxSeries::monomial("y", make_rational(-1, 4), Rational(-2)));
    EXPECT_EQ(sm.coefficients[0].ramification(), 2);
}

TEST(SlowManifold, ResidualScalesLikeNextOrder) {
    std::vector<double> ys{1.0};
    for (int K = 0; K <= 3; ++K) {
        auto sm = slow_manifold_series(1, Rational(-1), K);
        std::vector<double> le, lr;
        for (double lg = -8.0; lg <= -4.0 + 1e-9; lg += 0.5) {
            le.push_back(lg);
            lr.push_back(std::log10(series_residual(sm, std::pow(10.0, lg), ys)));
        }
        EXPECT_NEAR(fit_slope(le, lr), K + 1, 0.1) << "K=" << K;
    }
    auto sm2 = slow_manifold_series(1, Rational(-1), 2);
    double ratio = series_residual(sm2, 1e-4, ys) / series_residual(sm2, 1e-5, ys);
    EXPECT_NEAR(std::log10(ratio), 3.0, 0.01);
}

TEST(SlowManifold, ExactResidualMatchesDirectEvaluation) {
    auto sm = slow_manifold_series(2, Rational(-1), 1);
    for (double y : {0.5, 1.0, 2.0}) {
        double a = series_residual(sm, 1e-2, {y});
        double b = series_residual_direct(sm, 1e-2, y);
        EXPECT_NEAR(a, b, 1e-6 * std::max(1.0, a));
    }
}

TEST(SlowManifold, WrongSignIsDetected) {
    auto sm = slow_manifold_series(1, Rational(-1), 2);
    auto bad = sm;
    bad.coefficients[1] = Rational(-1) * bad.coefficients[1];
    double good = series_residual(sm, 1e-5, {1.0});
    double worse = series_residual(bad, 1e-5, {1.0});
    EXPECT_GT(worse / good, 1e6);
}

TEST(Breakdown, ScalingExponents) {
    for (int s = 1; s <= 8; ++s) {
        auto b = breakdown_scale(slow_manifold_series(s, Rational(-1), 1));
        EXPECT_EQ(b.x_exponent, make_rational(-1, s + 1));
        EXPECT_EQ(b.y_exponent, make_rational(s, s + 1));
    }
    auto b1 = breakdown_scale(slow_manifold_series(1, Rational(1), 3));
    EXPECT_EQ(b1.y_exponent, make_rational(1, 2));
    EXPECT_THROW(breakdown_scale(slow_manifold_series(1, Rational(1), 0)), ParameterError);
}
