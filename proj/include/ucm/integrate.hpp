#pragma once

// Adaptive integration (Dormand-Prince 5(4) and 3-stage Radau IIA with
// exact-Jacobian Newton), event location, and trajectory export.

#include "ucm/localanalysis.hpp"
#include "ucm/models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace ucm {

enum class Method { Explicit, Implicit };
enum class TimeScale { Fast, Slow };

inline std::string method_name(Method m) { return m == Method::Explicit ? "dopri5" : "radau5"; }

struct IntegratorConfig {
    Method method = Method::Explicit;
    double rtol = 1e-8;
    double atol = 1e-10;
    long max_steps = 1000000;
    double h0 = 0.0;  // 0: automatic
    double hmax = std::numeric_limits<double>::infinity();
    TimeScale time_scale = TimeScale::Fast;
    bool record_steps = true;
    double event_tol = 1e-12;

    void validate() const {
        if (!(rtol > 0) || !(atol > 0)) throw ParameterError("tolerances must be positive");
        if (max_steps <= 0) throw ParameterError("max_steps must be positive");
    }
};

/// Autonomous or time-dependent ODE with an exact Jacobian (row-major).
struct OdeSystem {
    std::size_t dim = 0;
    std::function<void(double, std::span<const double>, std::span<double>)> rhs;
    std::function<void(double, std::span<const double>, std::span<double>)> jacobian;
    std::vector<std::string> names;
};

struct EventSpec {
    std::string name;
    std::function<double(double, std::span<const double>)> g;
    int direction = 0;  // +1 rising, -1 falling, 0 either
    bool terminal = false;
};

struct EventRecord {
    std::size_t index;  // index of the stored sample at the event
    std::string name;
    double t;
    std::vector<double> state;
    double g_value;
};

enum class Status { Success, EventTerminated, MaxStepsExceeded, StepSizeUnderflow, NewtonFailure, NonFinite };

inline std::string status_name(Status s) {
    switch (s) {
        case Status::Success: return "success";
        case Status::EventTerminated: return "event";
        case Status::MaxStepsExceeded: return "max_steps_exceeded";
        case Status::StepSizeUnderflow: return "step_size_underflow";
        case Status::NewtonFailure: return "newton_failure";
        case Status::NonFinite: return "non_finite";
    }
    return "unknown";
}

struct IntegratorStats {
    long steps = 0;
    long rejected = 0;
    long newton_iterations = 0;
    long newton_failures = 0;
    long rhs_evaluations = 0;
    long jacobian_evaluations = 0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::vector<EventRecord> events;
    Status status = Status::Success;
    IntegratorStats stats;
    Method method = Method::Explicit;
    std::vector<std::string> names;

    bool ok() const { return status == Status::Success || status == Status::EventTerminated; }
    bool truncated() const { return status == Status::MaxStepsExceeded; }
    const std::vector<double>& final_state() const { return states.back(); }
    double final_time() const { return times.back(); }

    const EventRecord* first_event(const std::string& name) const {
        for (const auto& e : events)
            if (e.name == name) return &e;
        return nullptr;
    }
};

// ---------------------------------------------------------------- systems

namespace detail {

struct CompiledField {
    std::vector<NumericPoly> f;
    std::vector<std::vector<NumericPoly>> df;
    std::vector<double> scale;
};

}  // namespace detail

/// ODE from polynomial components; component i is multiplied by scale[i].
inline OdeSystem make_ode(const std::vector<std::string>& coords, const std::vector<GenPoly>& components,
                          std::vector<double> scale = {}) {
    auto cf = std::make_shared<detail::CompiledField>();
    if (scale.empty()) scale.assign(components.size(), 1.0);
    if (scale.size() != components.size() || components.size() != coords.size())
        throw StructuralError("ODE dimension mismatch");
    for (std::size_t i = 0; i < components.size(); ++i) {
        GenPoly c = components[i].with_variables(coords);
        cf->f.emplace_back(c);
        std::vector<NumericPoly> row;
        for (const auto& v : coords) row.emplace_back(c.diff(v));
        cf->df.push_back(std::move(row));
    }
    cf->scale = std::move(scale);
    OdeSystem sys;
    sys.dim = coords.size();
    sys.names = coords;
    sys.rhs = [cf](double, std::span<const double> x, std::span<double> dx) {
        for (std::size_t i = 0; i < cf->f.size(); ++i) dx[i] = cf->scale[i] * cf->f[i](x);
    };
    sys.jacobian = [cf](double, std::span<const double> x, std::span<double> j) {
        std::size_t n = cf->f.size();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) j[i * n + k] = cf->scale[i] * cf->df[i][k](x);
    };
    return sys;
}

inline OdeSystem make_ode(const VectorField& f) { return make_ode(f.coords, f.components); }

/// The model with numeric eps on the chosen time scale: on the fast scale
/// slow components carry eps, on the slow scale fast components carry 1/eps.
inline OdeSystem make_ode(const PolynomialModel& m, double eps, TimeScale scale) {
    if (!(eps > 0)) throw ParameterError("eps must be positive");
    std::vector<double> k;
    for (bool slow : m.slow) k.push_back(scale == TimeScale::Fast ? (slow ? eps : 1.0) : (slow ? 1.0 : 1.0 / eps));
    return make_ode(m.variables, m.rhs, k);
}

inline OdeSystem make_ode(const FastSlowSystem& sys, double eps, TimeScale scale) {
    return make_ode(as_polynomial_model(sys), eps, scale);
}

/// The same vector field with time reversed.
inline OdeSystem reversed(const OdeSystem& sys) {
    OdeSystem out = sys;
    auto f = sys.rhs;
    auto j = sys.jacobian;
    std::size_t n = sys.dim;
    out.rhs = [f](double t, std::span<const double> x, std::span<double> dx) {
        f(t, x, dx);
        for (auto& v : dx) v = -v;
    };
    out.jacobian = [j, n](double t, std::span<const double> x, std::span<double> m) {
        j(t, x, m);
        for (std::size_t i = 0; i < n * n; ++i) m[i] = -m[i];
    };
    return out;
}

// ---------------------------------------------------------------- steppers

namespace detail {

inline double error_norm(std::span<const double> err, std::span<const double> x0, std::span<const double> x1, double rtol,
                         double atol) {
    double sum = 0.0;
    for (std::size_t i = 0; i < err.size(); ++i) {
        double sc = atol + rtol * std::max(std::abs(x0[i]), std::abs(x1[i]));
        double r = err[i] / sc;
        sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(err.size()));
}

inline bool all_finite(std::span<const double> x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

/// LU with partial pivoting, in place (row-major n x n). Returns false if singular.
inline bool lu_factor(std::vector<double>& a, std::vector<std::size_t>& piv, std::size_t n) {
    piv.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::abs(a[k * n + k]);
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i * n + k]) > best) {
                best = std::abs(a[i * n + k]);
                p = i;
            }
        if (best == 0.0) return false;
        piv[k] = p;
        if (p != k)
            for (std::size_t j = 0; j < n; ++j) std::swap(a[k * n + j], a[p * n + j]);
        for (std::size_t i = k + 1; i < n; ++i) {
            double f = a[i * n + k] /= a[k * n + k];
            for (std::size_t j = k + 1; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
        }
    }
    return true;
}

inline void lu_solve(const std::vector<double>& a, const std::vector<std::size_t>& piv, std::size_t n, std::vector<double>& b) {
    for (std::size_t k = 0; k < n; ++k) std::swap(b[k], b[piv[k]]);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = k + 1; i < n; ++i) b[i] -= a[i * n + k] * b[k];
    for (std::size_t k = n; k-- > 0;) {
        for (std::size_t j = k + 1; j < n; ++j) b[k] -= a[k * n + j] * b[j];
        b[k] /= a[k * n + k];
    }
}

/// Dormand-Prince 5(4) single step; returns the error estimate in `err`.
class Dopri5 {
public:
    explicit Dopri5(const OdeSystem& sys) : sys_(sys), n_(sys.dim) {
        for (auto& k : k_) k.resize(n_);
        tmp_.resize(n_);
    }

    void step(double t, std::span<const double> x, double h, std::vector<double>& out, std::vector<double>& err,
              IntegratorStats& st) {
        static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        static constexpr double a21 = 1.0 / 5;
        static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
        static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                                a65 = -5103.0 / 18656;
        static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
        static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                                e6 = 22.0 / 525, e7 = -1.0 / 40;
        auto f = [&](double tt, std::span<const double> xx, std::vector<double>& k) {
            sys_.rhs(tt, xx, k);
            ++st.rhs_evaluations;
        };
        f(t, x, k_[0]);
        for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + h * a21 * k_[0][i];
        f(t + c2 * h, tmp_, k_[1]);
        for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + h * (a31 * k_[0][i] + a32 * k_[1][i]);
        f(t + c3 * h, tmp_, k_[2]);
        for (std::size_t i = 0; i < n_; ++i) tmp_[i] = x[i] + h * (a41 * k_[0][i] + a42 * k_[1][i] + a43 * k_[2][i]);
        f(t + c4 * h, tmp_, k_[3]);
        for (std::size_t i = 0; i < n_; ++i)
            tmp_[i] = x[i] + h * (a51 * k_[0][i] + a52 * k_[1][i] + a53 * k_[2][i] + a54 * k_[3][i]);
        f(t + c5 * h, tmp_, k_[4]);
        for (std::size_t i = 0; i < n_; ++i)
            tmp_[i] = x[i] + h * (a61 * k_[0][i] + a62 * k_[1][i] + a63 * k_[2][i] + a64 * k_[3][i] + a65 * k_[4][i]);
        f(t + h, tmp_, k_[5]);
        out.resize(n_);
        for (std::size_t i = 0; i < n_; ++i)
            out[i] = x[i] + h * (b1 * k_[0][i] + b3 * k_[2][i] + b4 * k_[3][i] + b5 * k_[4][i] + b6 * k_[5][i]);
        f(t + h, out, k_[6]);
        err.resize(n_);
        for (std::size_t i = 0; i < n_; ++i)
            err[i] = h * (e1 * k_[0][i] + e3 * k_[2][i] + e4 * k_[3][i] + e5 * k_[4][i] + e6 * k_[5][i] + e7 * k_[6][i]);
    }

    static constexpr double order = 5.0;

private:
    const OdeSystem& sys_;
    std::size_t n_;
    std::array<std::vector<double>, 7> k_;
    std::vector<double> tmp_;
};

/// Three-stage Radau IIA (order 5) with simplified Newton iterations on
/// the full 3n stage system, using the exact Jacobian at the step start.
class Radau5 {
public:
    explicit Radau5(const OdeSystem& sys) : sys_(sys), n_(sys.dim) {
        const double r6 = std::sqrt(6.0);
        a_ = {{{(88 - 7 * r6) / 360, (296 - 169 * r6) / 1800, (-2 + 3 * r6) / 225},
               {(296 + 169 * r6) / 1800, (88 + 7 * r6) / 360, (-2 - 3 * r6) / 225},
               {(16 - r6) / 36, (16 + r6) / 36, 1.0 / 9}}};
        c_ = {(4 - r6) / 10, (4 + r6) / 10, 1.0};
        jac_.resize(n_ * n_);
    }

    /// Returns false when Newton fails to converge.
    bool step(double t, std::span<const double> x, double h, std::vector<double>& out, IntegratorStats& st, double rtol,
              double atol) {
        const std::size_t m = 3 * n_;
        sys_.jacobian(t, x, jac_);
        ++st.jacobian_evaluations;
        std::vector<double> mat(m * m, 0.0);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                for (std::size_t p = 0; p < n_; ++p)
                    for (std::size_t q = 0; q < n_; ++q)
                        mat[(i * n_ + p) * m + j * n_ + q] = (i == j && p == q ? 1.0 : 0.0) - h * a_[i][j] * jac_[p * n_ + q];
        std::vector<std::size_t> piv;
        if (!lu_factor(mat, piv, m)) return false;
        std::vector<double> z(m, 0.0), fz(m), rhs(m), stage(n_), fx(n_);
        // Stop when the predicted remaining error eta |dz| is a small fraction
        // of the tolerance, eta = theta / (1 - theta) from the contraction rate.
        constexpr double kappa = 0.03;
        double prev = 0.0, eta = 1.0;
        for (int it = 0; it < 10; ++it) {
            ++st.newton_iterations;
            for (std::size_t j = 0; j < 3; ++j) {
                for (std::size_t p = 0; p < n_; ++p) stage[p] = x[p] + z[j * n_ + p];
                sys_.rhs(t + c_[j] * h, stage, fx);
                ++st.rhs_evaluations;
                for (std::size_t p = 0; p < n_; ++p) fz[j * n_ + p] = fx[p];
            }
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t p = 0; p < n_; ++p) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < 3; ++j) s += a_[i][j] * fz[j * n_ + p];
                    rhs[i * n_ + p] = -z[i * n_ + p] + h * s;
                }
            lu_solve(mat, piv, m, rhs);
            double nrm = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                z[i] += rhs[i];
                double sc = atol + rtol * std::max(std::abs(x[i % n_]), std::abs(x[i % n_] + z[i]));
                nrm += (rhs[i] / sc) * (rhs[i] / sc);
            }
            nrm = std::sqrt(nrm / static_cast<double>(m));
            if (!all_finite(z)) return false;
            if (it > 0) {
                double theta = nrm / prev;
                if (theta >= 0.99) break;
                eta = theta / (1.0 - theta);
            }
            if (nrm == 0.0 || eta * nrm <= kappa) {
                out.resize(n_);
                for (std::size_t p = 0; p < n_; ++p) out[p] = x[p] + z[2 * n_ + p];
                return true;
            }
            prev = nrm;
        }
        ++st.newton_failures;
        return false;
    }

    static constexpr double order = 5.0;

private:
    const OdeSystem& sys_;
    std::size_t n_;
    std::array<std::array<double, 3>, 3> a_;
    std::array<double, 3> c_;
    std::vector<double> jac_;
};

}  // namespace detail

/// One step of size h without error control (used for event refinement
/// and convergence studies). Returns false on Newton failure.
inline bool single_step(const OdeSystem& sys, Method method, double t, std::span<const double> x, double h,
                        std::vector<double>& out, IntegratorStats& st, double rtol = 1e-10, double atol = 1e-12) {
    if (method == Method::Explicit) {
        detail::Dopri5 d(sys);
        std::vector<double> err;
        d.step(t, x, h, out, err, st);
        return true;
    }
    detail::Radau5 r(sys);
    return r.step(t, x, h, out, st, rtol, atol);
}

namespace detail {

inline bool event_triggered(double g0, double g1, int direction) {
    if (direction >= 0 && g0 < 0.0 && g1 >= 0.0) return true;
    if (direction <= 0 && g0 > 0.0 && g1 <= 0.0) return true;
    return false;
}

}  // namespace detail

/// Integrates from t_span[0] to t_span[1] (t1 > t0). Events are located
/// by sign-change bracketing and bisection over re-computed steps.
inline Trajectory integrate(const OdeSystem& sys, std::vector<double> x0, std::array<double, 2> t_span,
                            const IntegratorConfig& cfg, const std::vector<EventSpec>& events = {}) {
    cfg.validate();
    if (x0.size() != sys.dim) throw StructuralError("initial state has wrong dimension");
    if (!(t_span[1] > t_span[0])) throw ParameterError("integration interval must be increasing");
    Trajectory tr;
    tr.method = cfg.method;
    tr.names = sys.names;
    const std::size_t n = sys.dim;
    double t = t_span[0];
    const double tend = t_span[1];
    std::vector<double> x = std::move(x0);
    tr.times.push_back(t);
    tr.states.push_back(x);
    if (!detail::all_finite(x)) {
        tr.status = Status::NonFinite;
        return tr;
    }
    std::vector<double> gprev;
    for (const auto& e : events) gprev.push_back(e.g(t, x));

    detail::Dopri5 dopri(sys);
    detail::Radau5 radau(sys);
    std::vector<double> x1, err(n), xh, xa, xb;

    // Initial step (Hairer-Norsett-Wanner heuristic).
    double h = cfg.h0;
    if (h <= 0.0) {
        std::vector<double> f0(n), f1(n), y1(n);
        sys.rhs(t, x, f0);
        ++tr.stats.rhs_evaluations;
        double d0 = 0, d1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double sc = cfg.atol + cfg.rtol * std::abs(x[i]);
            d0 += (x[i] / sc) * (x[i] / sc);
            d1 += (f0[i] / sc) * (f0[i] / sc);
        }
        d0 = std::sqrt(d0 / n);
        d1 = std::sqrt(d1 / n);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        for (std::size_t i = 0; i < n; ++i) y1[i] = x[i] + h0 * f0[i];
        sys.rhs(t + h0, y1, f1);
        ++tr.stats.rhs_evaluations;
        double d2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double sc = cfg.atol + cfg.rtol * std::abs(x[i]);
            d2 += ((f1[i] - f0[i]) / sc) * ((f1[i] - f0[i]) / sc);
        }
        d2 = std::sqrt(d2 / n) / h0;
        double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
        h = std::min(100 * h0, h1);
    }
    h = std::min({h, cfg.hmax, tend - t});

    auto attempt = [&](double tt, std::span<const double> xx, double hh, std::vector<double>& out, double& errn) -> bool {
        if (cfg.method == Method::Explicit) {
            dopri.step(tt, xx, hh, out, err, tr.stats);
            errn = detail::error_norm(err, xx, out, cfg.rtol, cfg.atol);
            return detail::all_finite(out);
        }
        // Step doubling: one step of h against two of h/2.
        if (!radau.step(tt, xx, hh, xb, tr.stats, cfg.rtol, cfg.atol)) return false;
        if (!radau.step(tt, xx, hh / 2, xh, tr.stats, cfg.rtol, cfg.atol)) return false;
        if (!radau.step(tt + hh / 2, xh, hh / 2, out, tr.stats, cfg.rtol, cfg.atol)) return false;
        for (std::size_t i = 0; i < n; ++i) err[i] = (out[i] - xb[i]) / 31.0;
        errn = detail::error_norm(err, xx, out, cfg.rtol, cfg.atol);
        return detail::all_finite(out);
    };

    long newton_streak = 0;
    while (t < tend) {
        if (tr.stats.steps >= cfg.max_steps) {
            tr.status = Status::MaxStepsExceeded;
            break;
        }
        if (h < 16 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
            tr.status = newton_streak > 0 ? Status::NewtonFailure : Status::StepSizeUnderflow;
            break;
        }
        double errn = 0.0;
        bool ok = attempt(t, x, h, x1, errn);
        if (!ok) {
            ++tr.stats.rejected;
            ++newton_streak;
            if (newton_streak > 60) {
                tr.status = cfg.method == Method::Implicit ? Status::NewtonFailure : Status::NonFinite;
                break;
            }
            h *= 0.25;
            continue;
        }
        newton_streak = 0;
        double fac = errn == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(errn, -1.0 / 5.0)));
        if (errn > 1.0) {
            ++tr.stats.rejected;
            h *= std::max(0.1, fac);
            continue;
        }
        // Accepted step [t, t + h].
        ++tr.stats.steps;
        double tnew = (tend - t - h) <= 1e-14 * std::max(1.0, std::abs(tend)) ? tend : t + h;
        bool stop = false;
        // Earliest triggered event in this step.
        std::size_t hit = events.size();
        double hit_t = tnew;
        std::vector<double> hit_x;
        double hit_g = 0.0;
        for (std::size_t k = 0; k < events.size(); ++k) {
            double g1 = events[k].g(tnew, x1);
            if (!detail::event_triggered(gprev[k], g1, events[k].direction)) continue;
            // Bisection on the sub-step length.
            double lo = 0.0, hi = tnew - t;
            double glo = gprev[k];
            std::vector<double> xm = x1;
            double gm = g1;
            std::vector<double> best = x1;
            double best_g = g1;
            for (int it = 0; it < 200; ++it) {
                double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi) break;
                IntegratorStats scratch;
                if (!single_step(sys, cfg.method, t, x, mid, xm, scratch, cfg.rtol, cfg.atol)) break;
                tr.stats.rhs_evaluations += scratch.rhs_evaluations;
                gm = events[k].g(t + mid, xm);
                if ((glo < 0.0 && gm >= 0.0) || (glo > 0.0 && gm <= 0.0)) {
                    hi = mid;
                    best = xm;
                    best_g = gm;
                } else {
                    lo = mid;
                    glo = gm;
                }
                if (std::abs(best_g) < cfg.event_tol) break;
            }
            if (t + hi < hit_t || hit == events.size()) {
                hit = k;
                hit_t = t + hi;
                hit_x = best;
                hit_g = best_g;
            }
        }
        if (hit < events.size() && events[hit].terminal) {
            t = hit_t;
            x = hit_x;
            tr.times.push_back(t);
            tr.states.push_back(x);
            tr.events.push_back({tr.times.size() - 1, events[hit].name, t, x, hit_g});
            tr.status = Status::EventTerminated;
            stop = true;
        } else {
            // Record non-terminal events (all triggered ones) then take the step.
            for (std::size_t k = 0; k < events.size(); ++k) {
                double g1 = events[k].g(tnew, x1);
                if (detail::event_triggered(gprev[k], g1, events[k].direction)) {
                    // Re-locate for this event if it was not the earliest.
                    double et = hit == k ? hit_t : tnew;
                    std::vector<double> ex = hit == k ? hit_x : x1;
                    double eg = hit == k ? hit_g : g1;
                    if (hit != k) {
                        double lo = 0.0, hi = tnew - t, glo = gprev[k];
                        std::vector<double> xm;
                        for (int it = 0; it < 200; ++it) {
                            double mid = 0.5 * (lo + hi);
                            if (mid <= lo || mid >= hi) break;
                            IntegratorStats scratch;
                            if (!single_step(sys, cfg.method, t, x, mid, xm, scratch, cfg.rtol, cfg.atol)) break;
                            double gm = events[k].g(t + mid, xm);
                            if ((glo < 0.0 && gm >= 0.0) || (glo > 0.0 && gm <= 0.0)) {
                                hi = mid;
                                ex = xm;
                                eg = gm;
                            } else {
                                lo = mid;
                                glo = gm;
                            }
                            if (std::abs(eg) < cfg.event_tol) break;
                        }
                        et = t + hi;
                    }
                    tr.events.push_back({tr.times.size(), events[k].name, et, ex, eg});
                }
                gprev[k] = g1;
            }
            t = tnew;
            x = x1;
            if (cfg.record_steps || t >= tend) {
                tr.times.push_back(t);
                tr.states.push_back(x);
            }
            // Event indices refer to the sample after the event.
            for (auto& e : tr.events)
                if (e.index >= tr.times.size()) e.index = tr.times.size() - 1;
        }
        if (stop) break;
        h = std::min({h * fac, cfg.hmax, tend - t});
        if (tend - t <= 0) break;
    }
    if (!cfg.record_steps && tr.times.back() != t) {
        tr.times.push_back(t);
        tr.states.push_back(x);
    }
    return tr;
}

// ---------------------------------------------------------------- Lyapunov

struct LyapunovReport {
    int k = 0;
    double max_identity_residual = 0.0;  // max |V(t) - V(0) - Q(t)|, Q' = -v2^(2(2k+1))
    bool strictly_decreasing = true;      // up to round-off ties
    bool increasing = true;               // the reversed-time control
    double v_initial = 0.0, v_final = 0.0;
    std::size_t samples = 0;
    Trajectory trajectory;
};

/// V(v2, y2) for the odd-s rescaling-chart field, s = 2k+1. For k >= 1
/// V = v2^(2k)/(2k) + y2^2/(2|mu|); for k = 0, V = ln v2 + y2^2/(2|mu|).
inline double lyapunov_value(int k, double mu, double v2, double y2) {
    double head = k == 0 ? std::log(v2) : std::pow(v2, 2 * k) / (2.0 * k);
    return head + y2 * y2 / (2.0 * std::abs(mu));
}

/// Integrates the s = 2k+1 rescaling-chart field together with the
/// quadrature Q' = -v2^(2(2k+1)) and checks dV/dt = -v2^(2(2k+1)) as the
/// identity V(t) - V(0) = Q(t), plus monotonicity of V.
inline LyapunovReport lyapunov_along(int k, const Rational& mu, std::array<double, 2> initial, double t_end,
                                     IntegratorConfig cfg, bool reverse_time = false) {
    if (k < 0) throw ParameterError("k must be non-negative");
    if (mu >= 0) throw ParameterError("the Lyapunov function requires mu < 0");
    if (k == 0 && !(initial[0] > 0)) throw DomainError("k = 0 uses ln v2 and needs v2 > 0");
    int s = 2 * k + 1;
    VectorField f = k2_planar(s, mu);
    std::vector<std::string> coords{"v2", "y2", "q"};
    std::vector<GenPoly> comps{f.components[0].with_variables(coords), f.components[1].with_variables(coords),
                               GenPoly::power("v2", Rational(2 * s), coords, Rational(-1))};
    OdeSystem sys = make_ode(coords, comps);
    if (reverse_time) sys = reversed(sys);
    LyapunovReport rep;
    rep.k = k;
    rep.trajectory = integrate(sys, {initial[0], initial[1], 0.0}, {0.0, t_end}, cfg);
    const auto& tr = rep.trajectory;
    double m = to_double(mu);
    double v0 = lyapunov_value(k, m, initial[0], initial[1]);
    double prev = v0;
    rep.v_initial = v0;
    for (std::size_t i = 0; i < tr.states.size(); ++i) {
        const auto& x = tr.states[i];
        double v = lyapunov_value(k, m, x[0], x[1]);
        rep.max_identity_residual = std::max(rep.max_identity_residual, std::abs((v - v0) - x[2]));
        double tie = 64 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(v));
        if (i > 0) {
            if (v > prev + tie) rep.strictly_decreasing = false;
            if (v < prev - tie) rep.increasing = false;
        }
        prev = v;
    }
    rep.v_final = prev;
    rep.samples = tr.states.size();
    return rep;
}

// ---------------------------------------------------------------- export

inline void write_csv(std::ostream& os, const Trajectory& tr, const std::string& time_name = "t") {
    os << time_name;
    for (const auto& n : tr.names) os << ',' << n;
    os << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        os << tr.times[i];
        for (double v : tr.states[i]) os << ',' << v;
        os << '\n';
    }
}

/// A gnuplot script with the trajectory as an inline data block.
inline std::string gnuplot_trajectory(const Trajectory& tr, std::size_t xcol = 1, std::size_t ycol = 2,
                                      const std::string& title = "trajectory") {
    std::ostringstream os;
    os.precision(17);
    os << "$traj << EOD\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        os << tr.times[i];
        for (double v : tr.states[i]) os << ' ' << v;
        os << '\n';
    }
    os << "EOD\n";
    auto label = [&](std::size_t c) { return c == 0 ? std::string("t") : (c - 1 < tr.names.size() ? tr.names[c - 1] : "x"); };
    os << "set xlabel '" << label(xcol) << "'\nset ylabel '" << label(ycol) << "'\n";
    os << "plot $traj using " << xcol + 1 << ':' << ycol + 1 << " with lines title '" << title << "'\n";
    return os.str();
}

}  // namespace ucm
