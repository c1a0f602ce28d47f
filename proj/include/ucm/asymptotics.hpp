#pragma once

// Slow-manifold expansion x(y) = x0(y) + eps x1(y) + ... for the power-law
// family and the scale at which it stops being asymptotic.

#include "ucm/models.hpp"
#include "ucm/puiseux.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace ucm {

struct SlowManifoldSeries {
    int s = 1;
    Rational mu;
    int order = 0;                        // K
    std::vector<PuiseuxSeries> coefficients;  // x_0 .. x_K, exact series in y

    double eval(double eps, double y) const {
        double sum = 0.0, p = 1.0;
        for (const auto& c : coefficients) {
            sum += p * c.eval(y);
            p *= eps;
        }
        return sum;
    }
};

namespace detail {

/// Product of two polynomials in eps whose coefficients are series in y,
/// keeping degrees <= max_degree.
inline std::vector<PuiseuxSeries> eps_multiply(const std::vector<PuiseuxSeries>& a, const std::vector<PuiseuxSeries>& b,
                                               std::size_t max_degree) {
    std::size_t n = std::min(max_degree + 1, a.size() + b.size() - 1);
    std::vector<PuiseuxSeries> out(n, PuiseuxSeries("y"));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size() && i + j < n; ++j)
            if (!a[i].is_zero() && !b[j].is_zero()) out[i + j] = out[i + j] + a[i] * b[j];
    return out;
}

inline std::vector<PuiseuxSeries> eps_power(const std::vector<PuiseuxSeries>& a, int s, std::size_t max_degree) {
    std::vector<PuiseuxSeries> out{PuiseuxSeries::constant("y", Rational(1))};
    for (int i = 0; i < s; ++i) out = eps_multiply(out, a, max_degree);
    return out;
}

}  // namespace detail

/// Collects powers of eps in f(x(y), y) = eps mu x'(y) for f = 1 - x^s y:
/// x0 = y^(-1/s), and the order-k relation is linear in x_k with
/// coefficient -s x0^(s-1) y.
inline SlowManifoldSeries slow_manifold_series(int s, const Rational& mu, int K) {
    if (s < 1) throw ParameterError("s must be a positive integer");
    if (mu == 0) throw ParameterError("mu must be nonzero");
    if (K < 0) throw ParameterError("order must be non-negative");
    SlowManifoldSeries sm;
    sm.s = s;
    sm.mu = mu;
    sm.order = K;
    const Rational S(s);
    PuiseuxSeries x0 = PuiseuxSeries::monomial("y", Rational(1), Rational(-1 / S));
    sm.coefficients.push_back(x0);
    // 1 / (s x0^(s-1) y) = (1/s) y^((s-1)/s - 1).
    PuiseuxSeries inv_lin = PuiseuxSeries::monomial("y", Rational(1 / S), Rational((S - 1) / S - 1));
    for (int k = 1; k <= K; ++k) {
        std::vector<PuiseuxSeries> partial = sm.coefficients;
        partial.push_back(PuiseuxSeries("y"));  // x_k = 0 for now
        auto pw = detail::eps_power(partial, s, static_cast<std::size_t>(k));
        PuiseuxSeries known = pw.size() > static_cast<std::size_t>(k) ? pw[static_cast<std::size_t>(k)] : PuiseuxSeries("y");
        // -y (s x0^(s-1) x_k + known) = mu x_{k-1}'.
        PuiseuxSeries rhs = mu * sm.coefficients.back().differentiate() + known.shift(Rational(1));
        sm.coefficients.push_back(Rational(-1) * (rhs * inv_lin));
    }
    return sm;
}

/// The residual eps mu x'(y) - f(x(y), y) of the truncated series as an
/// exact polynomial in eps (entry m is the coefficient of eps^m).
inline std::vector<PuiseuxSeries> residual_polynomial(const SlowManifoldSeries& sm) {
    std::size_t deg = static_cast<std::size_t>(sm.s) * sm.coefficients.size() + 1;
    auto pw = detail::eps_power(sm.coefficients, sm.s, deg);
    std::vector<PuiseuxSeries> r(std::max(pw.size(), sm.coefficients.size() + 1), PuiseuxSeries("y"));
    for (std::size_t m = 0; m < pw.size(); ++m) r[m] = pw[m].shift(Rational(1));  // + x^s y
    r[0] = r[0] - PuiseuxSeries::constant("y", Rational(1));                        // - 1
    for (std::size_t k = 0; k < sm.coefficients.size(); ++k) r[k + 1] = r[k + 1] + sm.mu * sm.coefficients[k].differentiate();
    return r;
}

/// max over ys of |eps mu x'(y) - f(x(y), y)|. The residual is formed
/// exactly and only its surviving terms are evaluated in floating point,
/// so it is free of cancellation.
inline double series_residual(const SlowManifoldSeries& sm, double eps, const std::vector<double>& ys) {
    auto r = residual_polynomial(sm);
    double worst = 0.0;
    for (double y : ys) {
        if (!(y > 0)) throw DomainError("series residual needs y > 0");
        double sum = 0.0, p = 1.0;
        for (const auto& c : r) {
            sum += p * c.eval(y);
            p *= eps;
        }
        worst = std::max(worst, std::abs(sum));
    }
    return worst;
}

/// Direct floating evaluation of the residual (subject to cancellation),
/// used as an independent cross-check at moderate eps.
inline double series_residual_direct(const SlowManifoldSeries& sm, double eps, double y) {
    double h = 1e-6 * y;
    double dx = (sm.eval(eps, y + h) - sm.eval(eps, y - h)) / (2 * h);
    double x = sm.eval(eps, y);
    return std::abs(eps * to_double(sm.mu) * dx - (1.0 - std::pow(x, sm.s) * y));
}

struct BreakdownScale {
    Rational x_exponent;  // x = O(eps^x_exponent)
    Rational y_exponent;  // y = O(eps^y_exponent)
};

/// Balances the leading terms |x0(y)| ~ eps |x1(y)|.
inline BreakdownScale breakdown_scale(const SlowManifoldSeries& sm) {
    if (sm.coefficients.size() < 2) throw ParameterError("breakdown scale needs order >= 1");
    const auto& x0 = sm.coefficients[0];
    const auto& x1 = sm.coefficients[1];
    if (x0.terms().size() != 1 || x1.terms().size() != 1) throw StructuralError("leading coefficients are not single terms");
    Rational p0 = x0.terms().begin()->first, p1 = x1.terms().begin()->first;
    if (p0 == p1) throw StructuralError("degenerate series: x0 and x1 have equal y-exponents");
    Rational y = 1 / (p0 - p1);
    return {Rational(p0 * y), y};
}

/// Reference s = 1 coefficient of eps^k / y^(2k+1): -(2k-1) for k >= 1.
inline Rational reference_asymptotic_coefficient(int k) { return k == 0 ? Rational(1) : Rational(-(2 * k - 1)); }

/// (2k-1)!! for k >= 1, 1 for k = 0.
inline Integer double_factorial_odd(int k) {
    Integer r(1);
    for (int j = 1; j <= k; ++j) r *= 2 * j - 1;
    return r;
}

}  // namespace ucm
