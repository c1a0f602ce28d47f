#pragma once

// Numerical experiments: departure from the slow manifold, scaling-law
// fits, the modified blow-up multiplier probe, the autocatalator limit
// cycle, and asymptotic autonomy of the rescaling-chart flow.

#include "ucm/integrate.hpp"
#include "ucm/localanalysis.hpp"
#include "ucm/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace ucm {

/// Raised when an experiment runs but cannot produce its measurement.
struct ExperimentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- workers

/// Worker-pool size from UCM_WORKERS (default: hardware concurrency).
inline std::size_t worker_count() {
    if (const char* env = std::getenv("UCM_WORKERS")) {
        char* end = nullptr;
        long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n > 0) return static_cast<std::size_t>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Applies fn to every input on a bounded pool; results keep input order.
/// Exceptions are captured per item.
template <class In, class Fn>
auto parallel_map(const std::vector<In>& inputs, Fn fn, std::size_t workers = worker_count()) {
    using Out = decltype(fn(inputs.front()));
    struct Slot {
        std::optional<Out> value;
        std::string error;
    };
    std::vector<Slot> out(inputs.size());
    std::size_t next = 0;
    std::mutex m;
    auto work = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(m);
                if (next >= inputs.size()) return;
                i = next++;
            }
            try {
                out[i].value = fn(inputs[i]);
            } catch (const std::exception& e) {
                out[i].error = e.what();
            }
        }
    };
    workers = std::max<std::size_t>(1, std::min(workers, inputs.size()));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    return out;
}

// ---------------------------------------------------------------- fitting

struct LinearFit {
    double slope = 0, intercept = 0, stderr_slope = 0, r2 = 0;
    std::size_t n = 0;
};

/// Ordinary least squares y = intercept + slope x.
inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ParameterError("fit needs at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0) throw ParameterError("fit abscissae are all equal");
    LinearFit f;
    f.n = x.size();
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - f.intercept - f.slope * x[i];
        sse += r * r;
    }
    f.r2 = syy == 0 ? 1.0 : 1.0 - sse / syy;
    f.stderr_slope = x.size() > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
    return f;
}

inline LinearFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) throw DomainError("log-log fit needs positive data");
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    return fit_line(lx, ly);
}

/// n log-spaced points from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, int n) {
    if (!(lo > 0) || !(hi > lo) || n < 2) throw ParameterError("log grid needs 0 < lo < hi and n >= 2");
    std::vector<double> g;
    for (int i = 0; i < n; ++i) g.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1)));
    return g;
}

// ---------------------------------------------------------------- departure

struct DepartureOptions {
    double x_start = 2.0;
    double rtol = 1e-9;
    double atol = 1e-12;
    long max_steps = 200000;
};

struct DepartureEvent {
    int s = 1;
    Rational mu;
    double eps = 0, theta = 0;
    double x = 0, y = 0;  // departure state
    double time = 0;      // slow time from the start
    double criterion = 0; // x^s y at departure
    long steps = 0;
};

/// Follows the attracting branch x = y^(-1/s) from x_start on the slow
/// time scale and records the first point where x^s y drops below 1 - theta.
inline DepartureEvent departure_point(int s, const Rational& mu, double eps, double theta, const DepartureOptions& opt = {}) {
    if (mu >= 0) throw ParameterError("departure needs mu < 0 (the slow flow must move toward y = 0)");
    if (!(theta > 0 && theta < 1)) throw ParameterError("theta must lie in (0, 1)");
    if (!(eps > 0)) throw ParameterError("eps must be positive");
    if (!(opt.x_start > 0)) throw ParameterError("x_start must be positive");
    auto sys = make_ode(power_law_system(s, mu), eps, TimeScale::Slow);
    double y0 = std::pow(opt.x_start, -s);
    double level = 1.0 - theta;
    double floor = -y0;
    std::vector<EventSpec> ev{
        {"departure", [s, level](double, std::span<const double> x) { return std::pow(x[0], s) * x[1] - level; }, -1, true},
        {"y_floor", [floor](double, std::span<const double> x) { return x[1] - floor; }, -1, true}};
    IntegratorConfig cfg;
    cfg.method = Method::Implicit;
    cfg.rtol = opt.rtol;
    cfg.atol = opt.atol;
    cfg.max_steps = opt.max_steps;
    cfg.time_scale = TimeScale::Slow;
    cfg.record_steps = false;
    double t_end = 4.0 * y0 / std::abs(to_double(mu));
    auto tr = integrate(sys, {opt.x_start, y0}, {0.0, t_end}, cfg, ev);
    const EventRecord* hit = tr.first_event("departure");
    if (!hit) {
        if (!tr.ok()) throw ExperimentError("integration failed: " + status_name(tr.status));
        throw ExperimentError("departure not observed; decrease eps or theta");
    }
    DepartureEvent d;
    d.s = s;
    d.mu = mu;
    d.eps = eps;
    d.theta = theta;
    d.x = hit->state[0];
    d.y = hit->state[1];
    d.time = hit->t;
    d.criterion = std::pow(d.x, s) * d.y;
    d.steps = tr.stats.steps;
    return d;
}

struct ScalingPoint {
    double eps;
    std::optional<DepartureEvent> event;
    std::string error;
};

struct ScalingFitResult {
    int s = 1;
    Rational mu;
    double theta = 0.5;
    std::vector<ScalingPoint> points;
    LinearFit fit_x, fit_y;
    double expected_x = 0, expected_y = 0;  // -1/(s+1), s/(s+1)

    std::size_t successes() const {
        return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [](const auto& p) { return p.event.has_value(); }));
    }
};

/// Departure points over eps_grid and log-log fits of x* and y* against eps.
inline ScalingFitResult scaling_fit(int s, const Rational& mu, const std::vector<double>& eps_grid, double theta,
                                    const DepartureOptions& opt = {}, std::size_t workers = worker_count()) {
    if (eps_grid.size() < 5) throw ParameterError("eps grid needs at least 5 points");
    auto [lo, hi] = std::minmax_element(eps_grid.begin(), eps_grid.end());
    if (!(*lo > 0) || std::log10(*hi / *lo) < 3.0 - 1e-9) throw ParameterError("eps grid must span at least 3 decades");
    // Validate shared parameters up front so they surface as argument errors.
    power_law_system(s, mu);
    if (mu >= 0) throw ParameterError("departure needs mu < 0 (the slow flow must move toward y = 0)");
    if (!(theta > 0 && theta < 1)) throw ParameterError("theta must lie in (0, 1)");
    ScalingFitResult r;
    r.s = s;
    r.mu = mu;
    r.theta = theta;
    r.expected_x = -1.0 / (s + 1);
    r.expected_y = static_cast<double>(s) / (s + 1);
    auto slots = parallel_map(eps_grid, [&](double eps) { return departure_point(s, mu, eps, theta, opt); }, workers);
    std::vector<double> e, xs, ys;
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        ScalingPoint p{eps_grid[i], slots[i].value, slots[i].error};
        if (p.event && !(p.event->y > 0)) {
            p.error = "departure at non-positive y";
            p.event.reset();
        }
        if (p.event) {
            e.push_back(p.eps);
            xs.push_back(p.event->x);
            ys.push_back(p.event->y);
        }
        r.points.push_back(std::move(p));
    }
    if (e.size() < 5) throw ExperimentError("fewer than 5 departure points succeeded");
    r.fit_x = fit_loglog(e, xs);
    r.fit_y = fit_loglog(e, ys);
    return r;
}

// ---------------------------------------------------------------- optimality

struct OptimalityPoint {
    double r1;
    double multiplier;
};

struct OptimalityResult {
    int s = 1;
    Rational mu, alpha1, alpha2;
    Rational line_exponent;        // equilibrium line v1 = r1^line_exponent
    Rational desingularization;    // radius power divided out of the chart field
    GenPoly multiplier;            // d(v1')/d(v1) on eps1 = 0, as a polynomial in (v1, r1)
    GenPoly multiplier_on_line;    // the same restricted to the line, in r1
    std::optional<Rational> exact_beta;  // multiplier_on_line = c r1^beta
    Rational exact_constant;
    std::vector<OptimalityPoint> points;
    LinearFit fit;
    bool inconclusive = false;

    double beta() const { return fit.slope; }
};

/// Modified-weight chart field (v1, r1, eps1), rescaled by s so that the
/// unmodified weights reproduce the normalized chart.
inline ChartField modified_chart(int s, const Rational& mu, const Rational& a1, const Rational& a2) {
    return with_time_rescale(blowup_chart(localized_field3d(s, mu), BlowUpWeights::modified(s, a1, a2), Chart::K1), Rational(s));
}

/// Normal multiplier of the line of equilibria on eps1 = 0 as r1 -> 0.
inline OptimalityResult optimality_probe(int s, const Rational& mu, const Rational& a1, const Rational& a2,
                                         const std::vector<double>& r1_grid) {
    if (a1 < 0 || a2 < 0) throw ParameterError("alpha1, alpha2 must be non-negative");
    if (a1 + a2 > Rational(1, 4)) throw ParameterError("alpha1 + alpha2 must not exceed 1/4");
    if (r1_grid.size() < 2) throw ParameterError("r1 grid needs at least two points");
    auto [lo, hi] = std::minmax_element(r1_grid.begin(), r1_grid.end());
    if (!(*lo > 0) || std::log10(*hi / *lo) < 4.0 - 1e-9) throw ParameterError("r1 grid must span at least 4 decades");
    OptimalityResult r;
    r.s = s;
    r.mu = mu;
    r.alpha1 = a1;
    r.alpha2 = a2;
    ChartField cf = modified_chart(s, mu, a1, a2);
    r.desingularization = cf.factor_exponent;
    VectorField sub = restrict_to_zero(cf.field(), "eps1");
    // sub is over (v1, r1); v1' vanishes on v1^s = r1^(a2 - s a1).
    const std::vector<std::string> vr{"v1", "r1"};
    GenPoly v1dot = sub.components[0].with_variables(vr);
    r.line_exponent = (a2 - Rational(s) * a1) / Rational(s);
    r.multiplier = v1dot.diff("v1");
    const std::vector<std::string> r1only{"r1"};
    auto line_rule = std::vector<SubstitutionRule>{{"v1", GenPoly::power("r1", r.line_exponent, r1only)},
                                                   {"r1", GenPoly::variable("r1", r1only)}};
    GenPoly on_line_field = substitute(v1dot, line_rule, r1only);
    if (!on_line_field.is_zero()) throw StructuralError("v1' does not vanish on the expected equilibrium line");
    r.multiplier_on_line = substitute(r.multiplier, line_rule, r1only);
    if (r.multiplier_on_line.is_monomial()) {
        const auto& [e, c] = *r.multiplier_on_line.terms().begin();
        r.exact_beta = e[0];
        r.exact_constant = c;
    }
    NumericPoly m(r.multiplier);
    double p = to_double(r.line_exponent);
    std::vector<double> rs, ms;
    for (double r1 : r1_grid) {
        double v1 = std::pow(r1, p);
        std::vector<double> pt{v1, r1};
        double val = m(pt);
        r.points.push_back({r1, val});
        rs.push_back(r1);
        ms.push_back(std::abs(val));
    }
    r.fit = fit_loglog(rs, ms);
    r.inconclusive = r.fit.r2 < 0.99;
    return r;
}

// ---------------------------------------------------------------- limit cycle

struct LimitCycleOptions {
    double section_x = 2.0;
    int direction = +1;
    Method method = Method::Implicit;
    double rtol = 1e-10, atol = 1e-12;
    int transient_crossings = 3;
    int max_iterations = 50;
    double tolerance = 1e-10;
    bool reverse_time = false;
};

struct LimitCycleResult {
    double mu = 0, eps = 0;
    double section_x = 2.0;
    bool converged = false;
    std::string diagnostic;
    double fixed_point_y = 0;   // section coordinate
    double closure_error = 0;   // |P(y*) - y*|
    double period = 0;
    double max_x = 0;
    double derivative = 0;      // P'(y*)
    int iterations = 0;
    Trajectory cycle;

    bool attracting() const { return converged && std::abs(derivative) < 1.0; }
};

namespace detail {

struct ReturnMap {
    OdeSystem sys;
    LimitCycleOptions opt;
    double horizon;

    struct Hit {
        double y, t, max_x;
        Trajectory tr;
    };

    std::optional<Hit> operator()(double y, bool keep = false) const {
        double sx = opt.section_x;
        EventSpec ev{"section", [sx](double, std::span<const double> x) { return x[0] - sx; }, opt.direction, true};
        // x' falling through zero marks a local maximum of x.
        const OdeSystem* f = &sys;
        EventSpec peak{"x_max",
                       [f](double t, std::span<const double> x) {
                           double dx[2];
                           f->rhs(t, x, dx);
                           return dx[0];
                       },
                       -1, false};
        IntegratorConfig cfg;
        cfg.method = opt.method;
        cfg.rtol = opt.rtol;
        cfg.atol = opt.atol;
        cfg.record_steps = true;
        cfg.max_steps = 200000;
        auto tr = integrate(sys, {sx, y}, {0.0, horizon}, cfg, {ev, peak});
        if (tr.status != Status::EventTerminated) return std::nullopt;
        double mx = 0;
        for (const auto& st : tr.states) mx = std::max(mx, st[0]);
        for (const auto& e : tr.events) mx = std::max(mx, e.state[0]);
        const EventRecord& hit = *tr.first_event("section");
        Hit h{hit.state[1], hit.t, mx, {}};
        if (keep) h.tr = std::move(tr);
        return h;
    }
};

}  // namespace detail

/// Attracting periodic orbit of the planar autocatalator on the fast time
/// scale via the return map to {x = section_x} crossed in `direction`.
inline LimitCycleResult find_limit_cycle(double mu, double eps, const LimitCycleOptions& opt = {}) {
    if (!(eps > 0)) throw ParameterError("eps must be positive");
    if (!(mu > 0)) throw ParameterError("the autocatalator needs mu > 0");
    LimitCycleResult res;
    res.mu = mu;
    res.eps = eps;
    res.section_x = opt.section_x;
    auto model = autocatalator2d(Rational(mu));
    OdeSystem sys = make_ode(model, eps, TimeScale::Fast);
    if (opt.reverse_time) sys = reversed(sys);
    double horizon = 50.0 / eps;
    detail::ReturnMap P{sys, opt, horizon};

    // Transient from near the equilibrium (mu, mu/(1+mu^2)).
    double sx = opt.section_x;
    EventSpec ev{"section", [sx](double, std::span<const double> x) { return x[0] - sx; }, opt.direction, false};
    IntegratorConfig cfg;
    cfg.method = opt.method;
    cfg.rtol = opt.rtol;
    cfg.atol = opt.atol;
    cfg.record_steps = false;
    cfg.max_steps = 500000;
    std::vector<double> start{mu + 0.1, mu / (1 + mu * mu)};
    double span = horizon * (opt.transient_crossings + 1);
    auto tr = integrate(sys, start, {0.0, span}, cfg, {ev});
    if (tr.events.empty()) {
        res.diagnostic = "no section crossings (" + status_name(tr.status) + ")";
        return res;
    }
    double y = tr.events.back().state[1];

    // Fixed-point iteration with a secant fallback.
    std::optional<double> prev_y, prev_g;
    for (int it = 0; it < opt.max_iterations; ++it) {
        res.iterations = it + 1;
        auto h = P(y);
        if (!h) {
            res.diagnostic = "return map undefined at y = " + std::to_string(y);
            return res;
        }
        double g = h->y - y;
        if (std::abs(g) < opt.tolerance * std::max(1.0, std::abs(y))) {
            res.converged = true;
            break;
        }
        double next = h->y;
        if (prev_y && prev_g && it >= 5 && *prev_g != g) {
            double sec = y - g * (y - *prev_y) / (g - *prev_g);
            if (std::isfinite(sec) && sec > 0) next = sec;
        }
        prev_y = y;
        prev_g = g;
        if (!(next > 0) || !std::isfinite(next)) {
            res.diagnostic = "fixed-point iteration left the positive quadrant";
            return res;
        }
        y = next;
    }
    if (!res.converged) {
        res.diagnostic = "fixed-point iteration did not converge";
        return res;
    }
    auto h = P(y, true);
    res.fixed_point_y = y;
    res.closure_error = std::abs(h->y - y);
    res.period = h->t;
    res.max_x = h->max_x;
    res.cycle = std::move(h->tr);
    double dy = 1e-6 * std::max(1e-3, std::abs(y));
    auto hp = P(y + dy), hm = P(y - dy);
    if (!hp || !hm) {
        res.converged = false;
        res.diagnostic = "return map undefined near the fixed point";
        return res;
    }
    res.derivative = (hp->y - hm->y) / (2 * dy);
    if (res.closure_error > 1e-6) {
        res.converged = false;
        res.diagnostic = "closure error above 1e-6";
    }
    return res;
}

struct AmplitudeScaling {
    std::vector<LimitCycleResult> cycles;
    LinearFit fit;  // log max_x vs log eps
};

inline AmplitudeScaling amplitude_scaling(double mu, const std::vector<double>& eps_values, const LimitCycleOptions& opt = {},
                                          std::size_t workers = worker_count()) {
    AmplitudeScaling out;
    auto slots = parallel_map(eps_values, [&](double eps) { return find_limit_cycle(mu, eps, opt); }, workers);
    std::vector<double> e, a;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (!slots[i].value) throw ExperimentError("limit cycle at eps = " + std::to_string(eps_values[i]) + ": " + slots[i].error);
        auto& c = *slots[i].value;
        if (!c.attracting()) throw ExperimentError("no attracting cycle at eps = " + std::to_string(eps_values[i]) + ": " + c.diagnostic);
        e.push_back(eps_values[i]);
        a.push_back(c.max_x);
        c.cycle = Trajectory{};
        out.cycles.push_back(std::move(c));
    }
    out.fit = fit_loglog(e, a);
    return out;
}

// ---------------------------------------------------------------- autonomy

struct AutonomyReport {
    int k = 1;
    int s = 2;
    Rational mu;
    std::vector<double> times;
    std::vector<double> radii;   // spectral radius of the variational matrix
    std::vector<double> v2;
    double final_radius = 0;
    LinearFit envelope;          // log radius vs log t over the second half
    bool v2_decays = false;
    bool envelope_decreasing = false;
    Trajectory trajectory;
};

/// Integrates the rescaling-chart field for s = 2k (even) or s = 2k+1
/// (odd) and tracks the spectral radius of its Jacobian along the orbit.
inline AutonomyReport asymptotic_autonomy_check(int k, bool odd, const Rational& mu, double t_max,
                                                std::array<double, 2> initial = {1.0, 1.0}) {
    if (k < 0 || (!odd && k == 0)) throw ParameterError("need s = 2k >= 2 or s = 2k+1 >= 1");
    if (mu >= 0) throw ParameterError("asymptotic autonomy needs mu < 0");
    if (!(t_max > 1)) throw ParameterError("t_max must exceed 1");
    if (!(initial[0] > 0)) throw DomainError("v2 must start positive");
    AutonomyReport rep;
    rep.k = k;
    rep.s = odd ? 2 * k + 1 : 2 * k;
    rep.mu = mu;
    VectorField f = k2_planar(rep.s, mu);
    VariationalMatrix A(f);
    IntegratorConfig cfg;
    cfg.method = Method::Implicit;
    cfg.rtol = 1e-9;
    cfg.atol = 1e-13;
    cfg.max_steps = 500000;
    rep.trajectory = integrate(make_ode(f), {initial[0], initial[1]}, {0.0, t_max}, cfg);
    if (!rep.trajectory.ok()) throw ExperimentError("integration failed: " + status_name(rep.trajectory.status));
    const auto& tr = rep.trajectory;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        rep.times.push_back(tr.times[i]);
        rep.radii.push_back(A.spectral_radius(tr.states[i]));
        rep.v2.push_back(tr.states[i][0]);
    }
    rep.final_radius = rep.radii.back();
    rep.v2_decays = rep.v2.back() < 0.5 * initial[0] && rep.v2.back() > 0;
    std::vector<double> lt, lr;
    for (std::size_t i = 0; i < rep.times.size(); ++i)
        if (rep.times[i] >= std::sqrt(t_max) && rep.radii[i] > 0) {
            lt.push_back(std::log(rep.times[i]));
            lr.push_back(std::log(rep.radii[i]));
        }
    if (lt.size() >= 3) {
        rep.envelope = fit_line(lt, lr);
        rep.envelope_decreasing = rep.envelope.slope < 0;
    }
    if (!rep.v2_decays) throw ExperimentError("v2 fails to decay; check the sign of mu");
    return rep;
}

}  // namespace ucm
