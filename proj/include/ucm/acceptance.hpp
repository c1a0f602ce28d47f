#pragma once

// The acceptance checks: one entry per criterion with pinned tolerances
// and runtime budgets.

#include "ucm/asymptotics.hpp"
#include "ucm/experiments.hpp"
#include "ucm/io.hpp"
#include "ucm/localanalysis.hpp"
#include "ucm/transforms.hpp"

#include <chrono>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ucm {

struct CheckResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0;
    double budget_seconds = 0;  // 0: no budget
    json data = json::object();
};

namespace detail {

inline std::vector<std::vector<double>> positive_samples(std::size_t n, unsigned seed, double lo, double hi) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    std::vector<std::vector<double>> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back({std::exp(u(rng)), std::exp(u(rng)), std::exp(u(rng))});
    return pts;
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

struct Failures {
    std::vector<std::string> items;
    void add(std::string s) { items.push_back(std::move(s)); }
    bool empty() const { return items.empty(); }
    std::string joined(std::size_t max = 4) const {
        std::string out;
        for (std::size_t i = 0; i < items.size() && i < max; ++i) out += (i ? "; " : "") + items[i];
        if (items.size() > max) out += "; +" + std::to_string(items.size() - max) + " more";
        return out;
    }
};

}  // namespace detail

inline CheckResult check_chart_fields() {
    CheckResult r{1, "chart-field identity", false, "", 0, 1.0};
    detail::Failures f;
    json rows = json::array();
    for (int s = 1; s <= 3; ++s)
        for (const Rational& mu : {Rational(-1), Rational(-2)}) {
            auto field = localized_field3d(s, mu);
            auto w = BlowUpWeights::standard(s);
            auto k1 = compare_fields(blowup_chart(field, w, Chart::K1).components, reference_kappa1(s, mu), chart_coords(Chart::K1));
            auto k2 = compare_fields(blowup_chart(field, w, Chart::K2).components, reference_kappa2(s, mu), chart_coords(Chart::K2));
            rows.push_back({{"s", s},
                            {"mu", to_string(mu)},
                            {"K1_constant", k1.constant ? to_string(*k1.constant) : "none"},
                            {"K2_constant", k2.constant ? to_string(*k2.constant) : "none"}});
            if (!k1.matches() || *k1.constant != Rational(s))
                f.add("K1 s=" + std::to_string(s) + " mu=" + to_string(mu));
            if (!k2.matches() || *k2.constant != 1) f.add("K2 s=" + std::to_string(s) + " mu=" + to_string(mu));
        }
    r.passed = f.empty();
    r.detail = r.passed ? "K1 = s * generic, K2 = generic for s = 1..3 (exact)" : f.joined();
    r.data = {{"rows", rows}};
    return r;
}

inline CheckResult check_eigenstructure() {
    CheckResult r{2, "eigen-structure at p1a", false, "", 0, 0};
    detail::Failures f;
    for (int s = 1; s <= 5; ++s)
        for (const Rational& mu : {Rational(-1), Rational(-2)}) {
            auto e = linearize_eigen(k1_on_r1_zero(s, mu), p1a());
            Rational S(s);
            std::string tag = "s=" + std::to_string(s) + " mu=" + to_string(mu);
            if (!e.exact) {
                f.add(tag + " not exact");
                continue;
            }
            if (e.values[0] != -S * S || e.values[1] != 0) f.add(tag + " eigenvalues");
            const auto& nv = e.vectors[1];
            // Parallel to (-mu/s^2, 1): cross product zero.
            if (nv[0] * 1 - nv[1] * Rational(-mu / (S * S)) != 0 || nv[1] == 0) f.add(tag + " null vector");
        }
    r.passed = f.empty();
    r.detail = r.passed ? "eigenvalues {-s^2, 0}, null vector (-mu/s^2, 1) for s = 1..5, mu = -1, -2" : f.joined();
    return r;
}

inline CheckResult check_center_manifold() {
    CheckResult r{3, "center-manifold certificate", false, "", 0, 1.0};
    detail::Failures f;
    json table = json::array();
    for (int s = 1; s <= 3; ++s)
        for (const Rational& mu : {Rational(-1), Rational(-2)}) {
            std::string tag = "s=" + std::to_string(s) + " mu=" + to_string(mu);
            auto field = k1_on_r1_zero(s, mu);
            auto cm = center_manifold_series(field, p1a(), 6);
            if (!residual_certified(cm)) f.add(tag + " residual");
            auto e = linearize_eigen(field, p1a());
            Rational slope = e.vectors[1][0] / e.vectors[1][1];
            if (cm.coefficient(1) != slope) f.add(tag + " slope");
            for (const auto& row : compare_reference_cm(cm, s, mu))
                table.push_back({{"s", s},
                                 {"mu", to_string(mu)},
                                 {"quantity", row.name},
                                 {"reference", to_string(row.reference)},
                                 {"computed", to_string(row.computed)},
                                 {"agree", row.agree()}});
        }
    std::size_t agree = 0;
    for (const auto& row : table) agree += row["agree"].get<bool>();
    r.passed = f.empty();
    r.detail = r.passed ? "zero residual through order 6, a1 = eigenvector slope; reference constants agree in " + std::to_string(agree) +
                              "/" + std::to_string(table.size()) + " rows"
                        : f.joined();
    r.data = {{"comparison", table}};
    return r;
}

inline CheckResult check_round_trip() {
    CheckResult r{4, "transition round trip", false, "", 0, 0};
    double worst = 0;
    for (int s = 1; s <= 3; ++s) {
        auto w = BlowUpWeights::standard(s);
        auto k12 = kappa12(w), k21 = kappa21(w);
        for (const auto& p : detail::positive_samples(100, 100u + s, 0.01, 3.0)) {
            auto q = k21.apply(k12.apply(p));
            for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(q[i] - p[i]) / std::max(1.0, std::abs(p[i])));
        }
    }
    r.passed = worst <= 1e-12;
    r.detail = "max relative error " + detail::fmt(worst) + " over 300 points (s = 1..3)";
    r.data = {{"max_error", worst}};
    return r;
}

inline CheckResult check_push_forward() {
    CheckResult r{5, "push-forward consistency", false, "", 0, 0};
    double worst = 0;
    std::size_t evaluated = 0;
    std::vector<BlowUpWeights> weights;
    for (int s = 1; s <= 3; ++s) {
        auto field = localized_field3d(s, Rational(-1));
        std::vector<BlowUpWeights> ws{BlowUpWeights::standard(s), BlowUpWeights::modified(s, Rational(1, 10), Rational(0)),
                                      BlowUpWeights::modified(s, Rational(0), Rational(1, 10)),
                                      BlowUpWeights::modified(s, Rational(1, 10), Rational(1, 10))};
        for (const auto& w : ws)
            for (Chart c : {Chart::K1, Chart::K2}) {
                auto rep = blowdown_consistency(blowup_chart(field, w, c), field, detail::positive_samples(100, 200u + s, 0.05, 2.0));
                worst = std::max(worst, rep.max_relative_error);
                evaluated += rep.evaluated;
            }
    }
    r.passed = worst < 1e-10 && evaluated == 2400;
    r.detail = "max relative error " + detail::fmt(worst) + " over " + std::to_string(evaluated) + " samples";
    r.data = {{"max_error", worst}, {"evaluated", evaluated}};
    return r;
}

inline CheckResult check_slow_manifold() {
    CheckResult r{6, "slow-manifold recursion", false, "", 0, 5.0};
    detail::Failures f;
    json slopes = json::array();
    for (int K = 1; K <= 3; ++K) {
        auto sm = slow_manifold_series(1, Rational(-1), K);
        std::vector<double> le, lr;
        for (double lg = -8.0; lg <= -4.0 + 1e-9; lg += 0.5) {
            le.push_back(lg);
            lr.push_back(std::log10(series_residual(sm, std::pow(10.0, lg), {1.0})));
        }
        double m = fit_line(le, lr).slope;
        slopes.push_back({{"K", K}, {"slope", m}});
        if (std::abs(m - (K + 1)) > 0.1) f.add("K=" + std::to_string(K) + " slope " + detail::fmt(m));
    }
    for (int s = 1; s <= 8; ++s) {
        auto b = breakdown_scale(slow_manifold_series(s, Rational(-1), 1));
        if (b.x_exponent != make_rational(-1, s + 1) || b.y_exponent != make_rational(s, s + 1)) f.add("breakdown s=" + std::to_string(s));
    }
    r.passed = f.empty();
    r.detail = r.passed ? "residual slopes K+1 (K = 1..3), breakdown (-1/(s+1), s/(s+1)) for s = 1..8" : f.joined();
    r.data = {{"slopes", slopes}};
    return r;
}

inline CheckResult check_scaling_law(std::size_t workers) {
    CheckResult r{7, "scaling law", false, "", 0, 120.0};
    detail::Failures f;
    json fits = json::array();
    auto grid = log_grid(1e-7, 1e-4, 7);
    for (int s : {1, 2})
        for (double theta : {0.5, 0.3, 0.7}) {
            std::string tag = "s=" + std::to_string(s) + " theta=" + detail::fmt(theta);
            try {
                auto res = scaling_fit(s, Rational(-1), grid, theta, {}, workers);
                fits.push_back({{"s", s}, {"theta", theta}, {"slope_x", res.fit_x.slope}, {"slope_y", res.fit_y.slope}});
                if (res.successes() != grid.size()) f.add(tag + " missing points");
                if (std::abs(res.fit_x.slope - res.expected_x) > 0.05) f.add(tag + " slope_x " + detail::fmt(res.fit_x.slope));
                if (std::abs(res.fit_y.slope - res.expected_y) > 0.05) f.add(tag + " slope_y " + detail::fmt(res.fit_y.slope));
            } catch (const std::exception& e) {
                f.add(tag + ": " + e.what());
            }
        }
    r.passed = f.empty();
    std::string summary;
    for (const auto& fj : fits)
        if (fj["theta"].get<double>() == 0.5)
            summary += (summary.empty() ? "" : ", ") + std::string("s=") + std::to_string(fj["s"].get<int>()) + " (" +
                       detail::fmt(fj["slope_x"].get<double>()) + ", " + detail::fmt(fj["slope_y"].get<double>()) + ")";
    r.detail = r.passed ? "slopes " + summary + "; theta 0.3/0.7 within 0.05" : f.joined();
    r.data = {{"fits", fits}};
    return r;
}

inline CheckResult check_lyapunov() {
    CheckResult r{8, "Lyapunov identity", false, "", 0, 0};
    IntegratorConfig cfg;
    cfg.method = Method::Implicit;
    cfg.rtol = 1e-10;
    cfg.atol = 1e-13;
    const double t_end = 1e5;
    auto rep = lyapunov_along(1, Rational(-1), {1.0, 1.0}, t_end, cfg);
    VariationalMatrix A(k2_planar(3, Rational(-1)));
    double radius = A.spectral_radius(rep.trajectory.final_state());
    r.passed = rep.trajectory.ok() && rep.strictly_decreasing && rep.max_identity_residual < 1e-6 && radius < 1e-3;
    r.detail = "s=3: V decreasing " + std::string(rep.strictly_decreasing ? "yes" : "no") + ", identity residual " +
               detail::fmt(rep.max_identity_residual) + ", spectral radius at t=" + detail::fmt(t_end) + " " + detail::fmt(radius);
    r.data = {{"residual", rep.max_identity_residual}, {"decreasing", rep.strictly_decreasing}, {"final_radius", radius}};
    return r;
}

inline CheckResult check_optimality() {
    CheckResult r{9, "optimality multiplier", false, "", 0, 30.0};
    detail::Failures f;
    json rows = json::array();
    auto grid = log_grid(1e-8, 1e-2, 13);
    const std::vector<std::pair<Rational, Rational>> pairs{
        {Rational(0), Rational(0)}, {Rational(1, 10), Rational(0)}, {Rational(0), Rational(1, 10)}, {Rational(1, 10), Rational(1, 10)}};
    for (int s : {1, 2})
        for (const auto& [a1, a2] : pairs) {
            auto res = optimality_probe(s, Rational(-1), a1, a2, grid);
            std::string tag = "s=" + std::to_string(s) + " (" + to_string(a1) + "," + to_string(a2) + ")";
            rows.push_back({{"s", s},
                            {"alpha1", to_string(a1)},
                            {"alpha2", to_string(a2)},
                            {"beta_fit", res.fit.slope},
                            {"beta_exact", res.exact_beta ? to_string(*res.exact_beta) : "none"},
                            {"r2", res.fit.r2}});
            if (!res.exact_beta) {
                f.add(tag + " multiplier not a single power");
                continue;
            }
            if (res.inconclusive) f.add(tag + " inconclusive fit");
            if (std::abs(res.fit.slope - to_double(*res.exact_beta)) > 0.05) f.add(tag + " fit " + detail::fmt(res.fit.slope));
            if (a1 == 0 && a2 == 0) {
                if (*res.exact_beta != 0 || res.exact_constant == 0) f.add(tag + " control not a nonzero constant");
            } else if (!(*res.exact_beta > 0)) {
                f.add(tag + " beta = " + to_string(*res.exact_beta) + " not > 0");
            }
        }
    r.passed = f.empty();
    r.detail = r.passed ? "beta matches exact exponent and is positive; (0,0) constant -s^2" : f.joined();
    r.data = {{"rows", rows}};
    return r;
}

inline CheckResult check_limit_cycle(std::size_t workers) {
    CheckResult r{10, "limit cycle", false, "", 0, 60.0};
    detail::Failures f;
    auto cyc = find_limit_cycle(1.1, 0.01);
    if (!cyc.attracting()) f.add("no attracting cycle: " + cyc.diagnostic);
    json amp = json::array();
    double slope = std::nan("");
    try {
        auto a = amplitude_scaling(1.1, {0.02, 0.01, 0.005}, {}, workers);
        slope = a.fit.slope;
        for (const auto& c : a.cycles) amp.push_back({{"eps", c.eps}, {"max_x", c.max_x}});
        if (std::abs(slope + 1.0) > 0.15) f.add("amplitude slope " + detail::fmt(slope) + " outside -1 +/- 0.15");
    } catch (const std::exception& e) {
        f.add(e.what());
    }
    r.passed = f.empty();
    std::string head = "P'(y*) = " + detail::fmt(cyc.derivative) + ", period " + detail::fmt(cyc.period);
    r.detail = r.passed ? head + ", amplitude slope " + detail::fmt(slope) : head + "; " + f.joined();
    r.data = {{"derivative", cyc.derivative}, {"period", cyc.period}, {"max_x", cyc.max_x}, {"amplitude", amp}, {"slope", slope}};
    return r;
}

/// Runs every check (or only those listed in `only`), timing each one
/// against its budget.
inline std::vector<CheckResult> run_acceptance(std::size_t workers = worker_count(), const std::vector<int>& only = {}) {
    std::vector<std::function<CheckResult()>> checks{
        check_chart_fields, check_eigenstructure, check_center_manifold, check_round_trip, check_push_forward,
        check_slow_manifold, [workers] { return check_scaling_law(workers); }, check_lyapunov, check_optimality,
        [workers] { return check_limit_cycle(workers); }};
    std::vector<CheckResult> out;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        auto t0 = std::chrono::steady_clock::now();
        CheckResult c;
        try {
            c = checks[i]();
        } catch (const std::exception& e) {
            c.id = id;
            c.name = "criterion " + std::to_string(id);
            c.passed = false;
            c.detail = std::string("exception: ") + e.what();
        }
        c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_seconds > 0 && c.seconds > c.budget_seconds) {
            c.passed = false;
            c.detail += " (runtime " + detail::fmt(c.seconds) + " s over budget " + detail::fmt(c.budget_seconds) + " s)";
        }
        out.push_back(std::move(c));
    }
    return out;
}

inline std::string format_check(const CheckResult& c) {
    std::ostringstream os;
    os << (c.passed ? "PASS" : "FAIL") << "  [" << c.id << "] " << c.name << ": " << c.detail << " (" << detail::fmt(c.seconds) << " s)";
    return os.str();
}

inline json acceptance_document(const std::vector<CheckResult>& checks) {
    json pts = json::array();
    bool all = true;
    for (const auto& c : checks) {
        all = all && c.passed;
        pts.push_back({{"id", c.id},
                       {"name", c.name},
                       {"passed", c.passed},
                       {"detail", c.detail},
                       {"seconds", c.seconds},
                       {"data", c.data}});
    }
    return make_document("verify", {{"checks", checks.size()}}, std::move(pts), nullptr, all ? "pass" : "fail");
}

}  // namespace ucm
