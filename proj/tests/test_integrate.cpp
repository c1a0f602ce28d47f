#include "ucm/asymptotics.hpp"
#include "ucm/integrate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace ucm;

namespace {

OdeSystem decay() {
    std::vector<std::string> c{"x"};
    return make_ode(c, {GenPoly::variable("x", c) * GenPoly::constant(Rational(-1), c)});
}

OdeSystem oscillator() {
    std::vector<std::string> c{"p", "q"};
    return make_ode(c, {GenPoly::variable("q", c), GenPoly::variable("p", c) * GenPoly::constant(Rational(-1), c)});
}

IntegratorConfig config(Method m, double rtol = 1e-10, double atol = 1e-12) {
    IntegratorConfig c;
    c.method = m;
    c.rtol = rtol;
    c.atol = atol;
    return c;
}

}  // namespace

class BothMethods : public ::testing::TestWithParam<Method> {};

TEST_P(BothMethods, ExponentialDecay) {
    auto tr = integrate(decay(), {1.0}, {0.0, 1.0}, config(GetParam()));
    ASSERT_EQ(tr.status, Status::Success);
    EXPECT_DOUBLE_EQ(tr.final_time(), 1.0);
    EXPECT_NEAR(tr.final_state()[0], std::exp(-1.0), 1e-8);
}

TEST_P(BothMethods, OscillatorEnergyOverHundredPeriods) {
    auto tr = integrate(oscillator(), {1.0, 0.0}, {0.0, 200 * std::numbers::pi}, config(GetParam(), 1e-11, 1e-13));
    ASSERT_EQ(tr.status, Status::Success);
    double drift = 0;
    for (const auto& x : tr.states) drift = std::max(drift, std::abs(0.5 * (x[0] * x[0] + x[1] * x[1]) - 0.5));
    EXPECT_LT(drift, 1e-6);
    EXPECT_NEAR(tr.final_state()[0], 1.0, 1e-5);
}

TEST_P(BothMethods, FixedStepConvergenceOrder) {
    auto sys = oscillator();
    std::vector<double> errs;
    for (int n : {8, 16, 32}) {
        std::vector<double> x{1.0, 0.0}, out;
        double h = 1.0 / n;
        IntegratorStats st;
        for (int i = 0; i < n; ++i) {
            ASSERT_TRUE(single_step(sys, GetParam(), i * h, x, h, out, st, 1e-13, 1e-15));
            x = out;
        }
        errs.push_back(std::hypot(x[0] - std::cos(1.0), x[1] + std::sin(1.0)));
    }
    EXPECT_GE(std::log2(errs[0] / errs[1]), 4.0);
    EXPECT_GE(std::log2(errs[1] / errs[2]), 4.0);
}

TEST_P(BothMethods, TerminalEventLocated) {
    EventSpec e{"half", [](double, std::span<const double> x) { return x[0] - 0.5; }, -1, true};
    auto tr = integrate(decay(), {1.0}, {0.0, 5.0}, config(GetParam()), {e});
    ASSERT_EQ(tr.status, Status::EventTerminated);
    ASSERT_EQ(tr.events.size(), 1u);
    EXPECT_NEAR(tr.events[0].t, std::log(2.0), 1e-9);
    EXPECT_LT(std::abs(tr.events[0].g_value), 1e-10);
    EXPECT_DOUBLE_EQ(tr.final_time(), tr.events[0].t);
}

INSTANTIATE_TEST_SUITE_P(Integrators, BothMethods, ::testing::Values(Method::Explicit, Method::Implicit),
                         [](const auto& info) { return method_name(info.param); });

TEST(Integrate, NonTerminalEventsCounted) {
    EventSpec e{"upcross", [](double, std::span<const double> x) { return x[1]; }, +1, false};
    auto tr = integrate(oscillator(), {1.0, 0.0}, {0.0, 10 * std::numbers::pi + 0.1}, config(Method::Explicit), {e});
    ASSERT_EQ(tr.status, Status::Success);
    // q = -sin t rises through zero at t = pi, 3 pi, ..., 9 pi.
    ASSERT_EQ(tr.events.size(), 5u);
    for (std::size_t i = 0; i < tr.events.size(); ++i) EXPECT_NEAR(tr.events[i].t, (2 * i + 1) * std::numbers::pi, 1e-8);
}

TEST(Integrate, ExplicitAndImplicitAgreeOnAutocatalator) {
    auto sys = make_ode(autocatalator2d(make_rational(11, 10)), 0.05, TimeScale::Fast);
    auto a = integrate(sys, {1.0, 1.0}, {0.0, 30.0}, config(Method::Explicit));
    auto b = integrate(sys, {1.0, 1.0}, {0.0, 30.0}, config(Method::Implicit));
    ASSERT_TRUE(a.ok());
    ASSERT_TRUE(b.ok());
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(a.final_state()[i], b.final_state()[i], 1e-6);
}

TEST(Integrate, StiffProblemFewerImplicitSteps) {
    auto sys = make_ode(power_law_system(1, Rational(-1)), 1e-4, TimeScale::Slow);
    auto cfg_e = config(Method::Explicit, 1e-6, 1e-9);
    auto cfg_i = config(Method::Implicit, 1e-6, 1e-9);
    auto a = integrate(sys, {0.5, 2.0}, {0.0, 1.0}, cfg_e);
    auto b = integrate(sys, {0.5, 2.0}, {0.0, 1.0}, cfg_i);
    ASSERT_TRUE(a.ok());
    ASSERT_TRUE(b.ok());
    EXPECT_LT(b.stats.steps * 10, a.stats.steps);
    EXPECT_NEAR(a.final_state()[0], b.final_state()[0], 1e-5);
}

TEST(Integrate, MaxStepsReported) {
    auto cfg = config(Method::Explicit);
    cfg.max_steps = 5;
    auto tr = integrate(oscillator(), {1.0, 0.0}, {0.0, 100.0}, cfg);
    EXPECT_EQ(tr.status, Status::MaxStepsExceeded);
    EXPECT_TRUE(tr.truncated());
    EXPECT_LT(tr.final_time(), 100.0);
}

TEST(Integrate, InvalidArguments) {
    EXPECT_THROW(integrate(decay(), {1.0, 2.0}, {0.0, 1.0}, config(Method::Explicit)), StructuralError);
    EXPECT_THROW(integrate(decay(), {1.0}, {1.0, 0.0}, config(Method::Explicit)), ParameterError);
    auto bad = config(Method::Explicit);
    bad.rtol = 0;
    EXPECT_THROW(integrate(decay(), {1.0}, {0.0, 1.0}, bad), ParameterError);
    EXPECT_THROW(make_ode(power_law_system(1, Rational(-1)), 0.0, TimeScale::Fast), ParameterError);
}

TEST(Integrate, BlowUpInFiniteTimeFlagged) {
    std::vector<std::string> c{"x"};
    auto sys = make_ode(c, {GenPoly::variable("x", c).pow(2)});
    auto tr = integrate(sys, {1.0}, {0.0, 2.0}, config(Method::Explicit));
    EXPECT_FALSE(tr.ok());
    EXPECT_LT(tr.final_time(), 1.0 + 1e-6);
}

TEST(Integrate, ReversedRetracesForward) {
    auto sys = make_ode(autocatalator2d(make_rational(11, 10)), 0.1, TimeScale::Fast);
    auto f = integrate(sys, {1.5, 0.7}, {0.0, 2.0}, config(Method::Explicit, 1e-12, 1e-14));
    auto b = integrate(reversed(sys), f.final_state(), {0.0, 2.0}, config(Method::Explicit, 1e-12, 1e-14));
    EXPECT_NEAR(b.final_state()[0], 1.5, 1e-8);
    EXPECT_NEAR(b.final_state()[1], 0.7, 1e-8);
}

TEST(Integrate, TimeScalesAreEquivalent) {
    double eps = 0.05;
    auto model = power_law_system(2, Rational(-1));
    auto fast = integrate(make_ode(model, eps, TimeScale::Fast), {0.6, 2.0}, {0.0, 1.0 / eps}, config(Method::Implicit));
    auto slow = integrate(make_ode(model, eps, TimeScale::Slow), {0.6, 2.0}, {0.0, 1.0}, config(Method::Implicit));
    EXPECT_NEAR(fast.final_state()[0], slow.final_state()[0], 1e-7);
    EXPECT_NEAR(fast.final_state()[1], slow.final_state()[1], 1e-9);
    EXPECT_NEAR(slow.final_state()[1], 1.0, 1e-10);
}

TEST(Integrate, ExactJacobianMatchesFiniteDifferences) {
    auto sys = make_ode(autocatalator3d(make_rational(11, 10), Rational(2)), 0.1, TimeScale::Fast);
    std::vector<double> x{0.8, 1.3, 0.4}, j(9), f0(3), f1(3);
    sys.jacobian(0, x, j);
    for (std::size_t k = 0; k < 3; ++k) {
        auto xp = x, xm = x;
        xp[k] += 1e-6;
        xm[k] -= 1e-6;
        sys.rhs(0, xp, f1);
        sys.rhs(0, xm, f0);
        for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(j[i * 3 + k], (f1[i] - f0[i]) / 2e-6, 1e-7);
    }
}

TEST(Integrate, TracksSlowManifold) {
    // Start on the critical manifold and follow the falling slow flow.
    const Rational mu(-1);
    for (double eps : {1e-3, 1e-4}) {
        auto sys = make_ode(power_law_system(1, mu), eps, TimeScale::Slow);
        EventSpec stop{"y_floor", [](double, std::span<const double> x) { return x[1] - 0.5; }, -1, true};
        auto tr = integrate(sys, {0.5, 2.0}, {0.0, 10.0}, config(Method::Implicit, 1e-12, 1e-14), {stop});
        ASSERT_EQ(tr.status, Status::EventTerminated);
        auto sm = slow_manifold_series(1, mu, 2);
        double worst0 = 0, worst2 = 0;
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            double y = tr.states[i][1], x = tr.states[i][0];
            if (tr.times[i] < 50 * eps) continue;  // initial layer
            worst0 = std::max(worst0, std::abs(x - 1.0 / y) * y);
            worst2 = std::max(worst2, std::abs(x - sm.eval(eps, y)) / sm.eval(eps, y));
        }
        EXPECT_LT(worst0, 10 * eps);
        // Next term relative to x0 is 15 eps^3 / y^6, at most 960 eps^3 for y >= 1/2.
        EXPECT_LT(worst2, 2 * 960 * eps * eps * eps + 1e-8);
    }
}

TEST(Lyapunov, IdentityAndMonotonicity) {
    for (int k : {0, 1, 2}) {
        auto cfg = config(Method::Implicit, 1e-10, 1e-12);
        auto rep = lyapunov_along(k, Rational(-1), {0.8, 0.3}, 20.0, cfg);
        ASSERT_TRUE(rep.trajectory.ok()) << k;
        EXPECT_LT(rep.max_identity_residual, 1e-6) << k;
        EXPECT_TRUE(rep.strictly_decreasing) << k;
        EXPECT_LT(rep.v_final, rep.v_initial) << k;
    }
}

TEST(Lyapunov, ReversedTimeIncreases) {
    auto cfg = config(Method::Explicit, 1e-10, 1e-12);
    auto rep = lyapunov_along(1, Rational(-2), {0.5, 0.2}, 2.0, cfg, true);
    ASSERT_TRUE(rep.trajectory.ok());
    EXPECT_FALSE(rep.strictly_decreasing);
    EXPECT_TRUE(rep.increasing);
    EXPECT_LT(rep.max_identity_residual, 1e-6);
}

TEST(Lyapunov, RejectsBadParameters) {
    auto cfg = config(Method::Explicit);
    EXPECT_THROW(lyapunov_along(1, Rational(1), {0.5, 0.2}, 1.0, cfg), ParameterError);
    EXPECT_THROW(lyapunov_along(0, Rational(-1), {-0.5, 0.2}, 1.0, cfg), DomainError);
}

TEST(Export, CsvAndGnuplot) {
    auto tr = integrate(decay(), {1.0}, {0.0, 1.0}, config(Method::Explicit));
    std::ostringstream os;
    write_csv(os, tr);
    std::string csv = os.str();
    EXPECT_EQ(csv.substr(0, 4), "t,x\n");
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), tr.times.size() + 1);
    std::string gp = gnuplot_trajectory(tr, 0, 1);
    EXPECT_NE(gp.find("$traj << EOD"), std::string::npos);
    EXPECT_NE(gp.find("using 1:2"), std::string::npos);
}
