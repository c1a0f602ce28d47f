#pragma once

// Projective localization, desingularization, weighted blow-up charts and
// the monomial maps between charts.

#include "ucm/models.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace ucm {

/// A vector field over named coordinates.
struct VectorField {
    std::vector<std::string> coords;
    std::vector<GenPoly> components;

    std::vector<double> eval(std::span<const double> point) const {
        std::vector<double> out;
        out.reserve(components.size());
        for (const auto& c : components) out.push_back(c.eval(point));
        return out;
    }
};

/// A planar field in localized coordinates: v' = fast, y' = eps * slow.
struct LocalField {
    std::vector<std::string> coords;  // {v, y}
    GenPoly fast;
    GenPoly slow;
    Rational multiplier_exponent{0};  // accumulated var^q desingularization
    std::string multiplier_variable;
    bool reverses_time_for_negative = false;
};

/// x = 1/v: returns v' = -v^2 f(1/v, y) and y' = g(1/v, y) (times ε).
inline LocalField projective_localize(const FastSlowSystem& sys) {
    std::vector<std::string> vy{"v", "y"};
    std::vector<SubstitutionRule> rules{{"x", GenPoly::power("v", Rational(-1), vy)},
                                        {"y", GenPoly::variable("y", vy)}};
    GenPoly f = substitute(sys.fast, rules, vy);
    GenPoly g = substitute(sys.slow, rules, vy);
    LocalField out;
    out.coords = vy;
    out.fast = GenPoly::power("v", Rational(2), vy, Rational(-1)) * f;
    out.slow = g;
    return out;
}

/// Multiplies both components by var^q. Every resulting exponent of var
/// must be non-negative.
inline LocalField desingularize_by_monomial(const LocalField& field, const std::string& var, const Rational& q) {
    LocalField out = field;
    out.fast = field.fast.times_power(var, q);
    out.slow = field.slow.times_power(var, q);
    for (const GenPoly* p : {&out.fast, &out.slow}) {
        for (const auto& [e, c] : p->terms()) {
            if (e[p->index_of(var)] < 0) {
                std::string mono = detail::format_monomial(p->variables(), e);
                throw StructuralError("multiplier " + var + "^" + detail::format_exponent(q) +
                                      " leaves negative power in term " + ucm::to_string(c) + " * " + mono);
            }
        }
    }
    out.multiplier_variable = var;
    out.multiplier_exponent = field.multiplier_exponent + q;
    // An odd integral multiplier is negative for var < 0; fractional ones
    // are undefined there.
    bool odd = is_integer(q) && (to_long(q) % 2 != 0);
    out.reverses_time_for_negative = field.reverses_time_for_negative != (odd || !is_integer(q));
    return out;
}

/// Fast-time field on (v, y, eps) with eps' = 0.
inline VectorField augment_epsilon(const LocalField& field) {
    std::vector<std::string> vye{field.coords[0], field.coords[1], "eps"};
    GenPoly eps = GenPoly::variable("eps", vye);
    return {vye,
            {field.fast.with_variables(vye), eps * field.slow.with_variables(vye), GenPoly(vye)}};
}

/// The localized, desingularized field v' = v^2 (y - v^s), y' = eps mu v^s,
/// eps' = 0 derived from the power-law system.
inline VectorField localized_field3d(int s, const Rational& mu) {
    auto local = projective_localize(power_law_system(s, mu));
    return augment_epsilon(desingularize_by_monomial(local, "v", Rational(s)));
}

struct BlowUpWeights {
    Rational alpha_v, alpha_y, alpha_eps;

    BlowUpWeights(Rational av, Rational ay, Rational ae)
        : alpha_v(std::move(av)), alpha_y(std::move(ay)), alpha_eps(std::move(ae)) {
        if (alpha_v <= 0 || alpha_y <= 0 || alpha_eps <= 0)
            throw ParameterError("blow-up weights must be positive");
    }

    /// (1, s, s+1).
    static BlowUpWeights standard(int s) { return {Rational(1), Rational(s), Rational(s + 1)}; }

    /// (1 + a1, s + a2, s + 1).
    static BlowUpWeights modified(int s, const Rational& a1, const Rational& a2) {
        if (a1 < 0 || a2 < 0) throw ParameterError("weight perturbations must be non-negative");
        return {Rational(1 + a1), Rational(s + a2), Rational(s + 1)};
    }

    friend bool operator==(const BlowUpWeights&, const BlowUpWeights&) = default;
};

enum class Chart { K1, K2 };

inline std::string chart_name(Chart c) { return c == Chart::K1 ? "K1" : "K2"; }

inline std::vector<std::string> chart_coords(Chart c) {
    return c == Chart::K1 ? std::vector<std::string>{"v1", "r1", "eps1"} : std::vector<std::string>{"v2", "y2", "r2"};
}

inline std::string chart_radius(Chart c) { return c == Chart::K1 ? "r1" : "r2"; }

namespace detail {

/// Gauss-Jordan inverse of a square rational matrix.
inline std::vector<std::vector<Rational>> invert(std::vector<std::vector<Rational>> a) {
    const std::size_t n = a.size();
    std::vector<std::vector<Rational>> inv(n, std::vector<Rational>(n, Rational(0)));
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        while (piv < n && a[piv][col] == 0) ++piv;
        if (piv == n) throw StructuralError("exponent matrix is singular");
        std::swap(a[piv], a[col]);
        std::swap(inv[piv], inv[col]);
        Rational d = a[col][col];
        for (std::size_t j = 0; j < n; ++j) {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (i == col || a[i][col] == 0) continue;
            Rational f = a[i][col];
            for (std::size_t j = 0; j < n; ++j) {
                a[i][j] -= f * a[col][j];
                inv[i][j] -= f * inv[col][j];
            }
        }
    }
    return inv;
}

/// Cofactor determinant of a small GenPoly matrix.
inline GenPoly determinant(const std::vector<std::vector<GenPoly>>& m, const std::vector<std::string>& vars) {
    const std::size_t n = m.size();
    if (n == 1) return m[0][0].with_variables(vars);
    GenPoly det(vars);
    for (std::size_t j = 0; j < n; ++j) {
        if (m[0][j].is_zero()) continue;
        std::vector<std::vector<GenPoly>> minor;
        for (std::size_t i = 1; i < n; ++i) {
            std::vector<GenPoly> row;
            for (std::size_t k = 0; k < n; ++k)
                if (k != j) row.push_back(m[i][k]);
            minor.push_back(std::move(row));
        }
        GenPoly term = m[0][j].with_variables(vars) * determinant(minor, vars);
        det = (j % 2 == 0) ? det + term : det - term;
    }
    return det;
}

}  // namespace detail

/// A map whose components are single terms c * prod source^e.
struct TransitionMap {
    std::string source, target;
    std::vector<std::string> source_coords, target_coords;
    std::vector<GenPoly> images;  // one monomial over source_coords per target coordinate

    std::vector<SubstitutionRule> rules() const {
        std::vector<SubstitutionRule> out;
        for (std::size_t i = 0; i < target_coords.size(); ++i) out.push_back({target_coords[i], images[i]});
        return out;
    }

    std::vector<double> apply(std::span<const double> point) const {
        if (point.size() != source_coords.size()) throw StructuralError("point dimension mismatch");
        std::vector<double> out;
        for (const auto& img : images) out.push_back(img.eval(point));
        return out;
    }

    /// Exact image; throws DomainError when a coordinate is irrational.
    std::vector<Rational> apply_exact(std::span<const Rational> point) const {
        if (point.size() != source_coords.size()) throw StructuralError("point dimension mismatch");
        std::vector<Rational> out;
        for (const auto& img : images) out.push_back(img.eval_exact(point));
        return out;
    }

    std::vector<std::vector<GenPoly>> jacobian() const {
        std::vector<std::vector<GenPoly>> j;
        for (const auto& img : images) {
            std::vector<GenPoly> row;
            for (const auto& v : source_coords) row.push_back(img.diff(v));
            j.push_back(std::move(row));
        }
        return j;
    }

    TransitionMap inverse() const {
        const std::size_t n = images.size();
        if (n != source_coords.size()) throw StructuralError("only square maps are invertible");
        std::vector<std::vector<Rational>> e(n);
        std::vector<Rational> coeff(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!images[i].is_monomial()) throw StructuralError("map component is not a single term");
            const auto& [ex, c] = *images[i].terms().begin();
            e[i] = ex;
            coeff[i] = c;
        }
        auto f = detail::invert(e);
        TransitionMap out{target, source, target_coords, source_coords, {}};
        for (std::size_t i = 0; i < n; ++i) {
            Rational c(1);
            for (std::size_t j = 0; j < n; ++j) {
                if (f[i][j] == 0) continue;
                auto k = pow_exact(coeff[j], Rational(-f[i][j]));
                if (!k) throw DomainError("inverse map has an irrational coefficient");
                c *= *k;
            }
            out.images.push_back(GenPoly::monomial(c, target_coords, f[i]));
        }
        return out;
    }

    friend bool operator==(const TransitionMap& a, const TransitionMap& b) {
        return a.source_coords == b.source_coords && a.target_coords == b.target_coords && a.images == b.images;
    }
};

/// second after first.
inline TransitionMap compose(const TransitionMap& second, const TransitionMap& first) {
    if (second.source_coords != first.target_coords) throw StructuralError("maps are not composable");
    TransitionMap out{first.source, second.target, first.source_coords, second.target_coords, {}};
    auto r = first.rules();
    for (const auto& img : second.images) out.images.push_back(substitute(img, r, first.source_coords));
    return out;
}

inline TransitionMap identity_map(const std::string& name, const std::vector<std::string>& coords) {
    TransitionMap m{name, name, coords, coords, {}};
    for (const auto& c : coords) m.images.push_back(GenPoly::variable(c, coords));
    return m;
}

/// The blow-up map from chart coordinates to (v, y, eps).
inline TransitionMap blowup_map(const BlowUpWeights& w, Chart chart) {
    auto cc = chart_coords(chart);
    TransitionMap m{chart_name(chart), "original", cc, {"v", "y", "eps"}, {}};
    if (chart == Chart::K1) {
        m.images = {GenPoly::monomial(Rational(1), cc, {Rational(1), w.alpha_v, Rational(0)}),
                    GenPoly::monomial(Rational(1), cc, {Rational(0), w.alpha_y, Rational(0)}),
                    GenPoly::monomial(Rational(1), cc, {Rational(0), w.alpha_eps, Rational(1)})};
    } else {
        m.images = {GenPoly::monomial(Rational(1), cc, {Rational(1), Rational(0), w.alpha_v}),
                    GenPoly::monomial(Rational(1), cc, {Rational(0), Rational(1), w.alpha_y}),
                    GenPoly::monomial(Rational(1), cc, {Rational(0), Rational(0), w.alpha_eps})};
    }
    return m;
}

/// K1 -> K2 on {eps1 > 0}.
inline TransitionMap kappa12(const BlowUpWeights& w) {
    return compose(blowup_map(w, Chart::K2).inverse(), blowup_map(w, Chart::K1));
}

/// K2 -> K1 on {y2 > 0}.
inline TransitionMap kappa21(const BlowUpWeights& w) {
    return compose(blowup_map(w, Chart::K1).inverse(), blowup_map(w, Chart::K2));
}

/// A desingularized chart field with its provenance: chart field =
/// time_rescale * raw / radius^factor_exponent.
struct ChartField {
    Chart chart = Chart::K1;
    std::optional<BlowUpWeights> weights;
    std::vector<std::string> coords;
    std::vector<GenPoly> components;
    std::vector<GenPoly> raw_components;  // before extraction and rescale
    std::string factor_variable;
    Rational factor_exponent{0};
    Rational time_rescale{1};
    TransitionMap blowup;  // chart coordinates -> original coordinates

    const GenPoly& component(std::string_view coord) const {
        for (std::size_t i = 0; i < coords.size(); ++i)
            if (coords[i] == coord) return components[i];
        throw StructuralError("chart has no coordinate '" + std::string(coord) + "'");
    }

    VectorField field() const { return {coords, components}; }
};

/// Multiplies the chart field by the positive constant c.
inline ChartField with_time_rescale(ChartField cf, const Rational& c) {
    if (c <= 0) throw ParameterError("time rescale must be positive");
    for (auto& comp : cf.components) comp = c * comp;
    cf.time_rescale *= c;
    return cf;
}

/// Induced field of `field3d` (over v, y, eps) in the chart: solves
/// D(Phi) Y = X o Phi by Cramer's rule, then divides by the largest common
/// power of the radius.
inline ChartField blowup_chart(const VectorField& field3d, const BlowUpWeights& w, Chart chart) {
    if (field3d.coords != std::vector<std::string>{"v", "y", "eps"})
        throw StructuralError("blow-up expects a field over (v, y, eps)");
    for (const auto& comp : field3d.components)
        for (const auto& [e, c] : comp.terms())
            for (const auto& q : e)
                if (q < 0) throw StructuralError("blow-up input is not polynomial: " + comp.to_string());
    TransitionMap phi = blowup_map(w, chart);
    const auto& cc = phi.source_coords;
    auto rules = phi.rules();
    std::vector<GenPoly> pulled;
    for (const auto& comp : field3d.components) pulled.push_back(substitute(comp, rules, cc));
    auto jac = phi.jacobian();
    GenPoly det = detail::determinant(jac, cc);
    if (!det.is_monomial()) throw StructuralError("blow-up Jacobian determinant is not a monomial");
    ChartField out;
    out.chart = chart;
    out.weights = w;
    out.coords = cc;
    out.blowup = phi;
    for (std::size_t i = 0; i < cc.size(); ++i) {
        auto m = jac;
        for (std::size_t r = 0; r < m.size(); ++r) m[r][i] = pulled[r];
        out.raw_components.push_back(detail::determinant(m, cc).divide_by_monomial(det));
    }
    std::string radius = chart_radius(chart);
    std::optional<Rational> lo;
    for (const auto& comp : out.raw_components) {
        if (comp.is_zero()) continue;
        Rational e = comp.min_exponent(radius);
        lo = lo ? std::min(*lo, e) : e;
    }
    out.factor_variable = radius;
    out.factor_exponent = lo && *lo > 0 ? *lo : Rational(0);
    for (const auto& comp : out.raw_components) out.components.push_back(comp.times_power(radius, Rational(-out.factor_exponent)));
    return out;
}

/// The generic K1 field rescaled by s: v1' = s v1^2 (1 - v1^s) - mu eps1 v1^(s+1), ...
inline ChartField normalized_k1(int s, const Rational& mu) {
    return with_time_rescale(blowup_chart(localized_field3d(s, mu), BlowUpWeights::standard(s), Chart::K1), Rational(s));
}

/// Closed-form K1 field (coords v1, r1, eps1).
inline std::vector<GenPoly> reference_kappa1(int s, const Rational& mu) {
    auto cc = chart_coords(Chart::K1);
    auto mono = [&](const Rational& c, long ev, long er, long ee) {
        return GenPoly::monomial(c, cc, {Rational(ev), Rational(er), Rational(ee)});
    };
    return {mono(Rational(s), 2, 0, 0) - mono(Rational(s), s + 2, 0, 0) - mono(mu, s + 1, 0, 1),
            mono(mu, s, 1, 1), mono(Rational(-(s + 1) * mu), s, 0, 2)};
}

/// Closed-form K2 field (coords v2, y2, r2): v2' = v2^2 (y2 - v2^s), y2' = mu v2^s, r2' = 0.
inline std::vector<GenPoly> reference_kappa2(int s, const Rational& mu) {
    auto cc = chart_coords(Chart::K2);
    auto mono = [&](const Rational& c, long ev, long ey) {
        return GenPoly::monomial(c, cc, {Rational(ev), Rational(ey), Rational(0)});
    };
    return {mono(Rational(1), 2, 1) - mono(Rational(1), s + 2, 0), mono(mu, s, 0), GenPoly(cc)};
}

/// Closed-form raw (undivided) K1 field for weights (1+a1, s+a2, s+1),
/// components ordered (v1, r1, eps1).
inline std::vector<GenPoly> reference_modified_kappa1(int s, const Rational& mu, const Rational& a1, const Rational& a2) {
    auto cc = chart_coords(Chart::K1);
    auto mono = [&](const Rational& c, const Rational& ev, const Rational& er, const Rational& ee) {
        return GenPoly::monomial(c, cc, {ev, er, ee});
    };
    Rational sa = s + a2;
    Rational base = 1 - a2 + s + s * a1;
    GenPoly v1 = mono(Rational(-mu * (1 + a1) / sa), Rational(s + 1), base, Rational(1)) +
                 mono(Rational(1), Rational(2), Rational(1 + a1 + s + a2), Rational(0)) -
                 mono(Rational(1), Rational(s + 2), Rational(1 + a1 + s + s * a1), Rational(0));
    GenPoly r1 = mono(Rational(mu / sa), Rational(s), Rational(base + 1), Rational(1));
    GenPoly e1 = mono(Rational(-(s + 1) * mu / sa), Rational(s), base, Rational(2));
    return {v1, r1, e1};
}

/// The constant c with reference = c * computed (componentwise), if any.
inline std::optional<Rational> proportionality_constant(const std::vector<GenPoly>& computed,
                                                        const std::vector<GenPoly>& reference) {
    if (computed.size() != reference.size()) return std::nullopt;
    std::optional<Rational> c;
    for (std::size_t i = 0; i < computed.size(); ++i) {
        auto [a, b] = unify(computed[i], reference[i]);
        if (a.is_zero() != b.is_zero()) return std::nullopt;
        if (a.is_zero()) continue;
        const auto& [e, ca] = *a.terms().begin();
        auto it = b.terms().find(e);
        if (it == b.terms().end()) return std::nullopt;
        Rational k = it->second / ca;
        if (c && *c != k) return std::nullopt;
        c = k;
        if (!(k * a == b)) return std::nullopt;
    }
    return c ? c : std::optional<Rational>(Rational(1));
}

struct FieldComparison {
    std::optional<Rational> constant;  // reference = constant * computed
    std::vector<std::string> diffs;     // term-level, against computed (scaled when a constant exists)
    bool matches() const { return constant.has_value() && *constant > 0; }
};

inline FieldComparison compare_fields(const std::vector<GenPoly>& computed, const std::vector<GenPoly>& reference,
                                      const std::vector<std::string>& names) {
    FieldComparison out;
    out.constant = proportionality_constant(computed, reference);
    Rational k = out.constant.value_or(Rational(1));
    for (std::size_t i = 0; i < computed.size() && i < reference.size(); ++i)
        for (auto& line : term_diff(k * computed[i], reference[i]))
            out.diffs.push_back((i < names.size() ? names[i] + "': " : "") + line);
    return out;
}

namespace detail {

inline double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace detail

struct ConsistencyReport {
    double max_relative_error = 0.0;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;  // singular Jacobian
};

/// Pushes the chart field forward through the blow-up map and compares it
/// with the original field at the image points. The extracted factor and
/// time rescale are multiplied back; `exponent_override` replaces the
/// recorded factor exponent (negative control).
inline ConsistencyReport blowdown_consistency(const ChartField& cf, const VectorField& field3d,
                                              const std::vector<std::vector<double>>& samples,
                                              std::optional<Rational> exponent_override = std::nullopt) {
    ConsistencyReport rep;
    auto jac = cf.blowup.jacobian();
    std::size_t n = cf.coords.size();
    Rational expo = exponent_override.value_or(cf.factor_exponent);
    std::size_t radius_index = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (cf.coords[i] == cf.factor_variable) radius_index = i;
    double inv_rescale = 1.0 / to_double(cf.time_rescale);
    for (const auto& p : samples) {
        std::vector<std::vector<double>> J(n, std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) J[i][j] = jac[i][j].eval(std::span<const double>(p));
        double det = 0.0;
        if (n == 3) {
            det = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) - J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                  J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
        } else {
            det = 1.0;  // only checked for the three-dimensional charts
        }
        if (det == 0.0 || !std::isfinite(det)) {
            ++rep.skipped;
            continue;
        }
        double scale = inv_rescale;
        if (!cf.factor_variable.empty()) scale *= pow_double(p[radius_index], expo);
        auto y = cf.field().eval(p);
        std::vector<double> pushed(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) pushed[i] += J[i][j] * y[j] * scale;
        auto q = cf.blowup.apply(p);
        auto x = field3d.eval(q);
        std::vector<double> diff(n);
        for (std::size_t i = 0; i < n; ++i) diff[i] = pushed[i] - x[i];
        double denom = std::max(detail::max_abs(x), 1e-300);
        rep.max_relative_error = std::max(rep.max_relative_error, detail::max_abs(diff) / denom);
        ++rep.evaluated;
    }
    return rep;
}

/// A trivial chart: the original coordinates themselves, no factor.
inline ChartField identity_chart(const VectorField& field3d) {
    ChartField cf;
    cf.chart = Chart::K1;
    cf.coords = field3d.coords;
    cf.components = field3d.components;
    cf.raw_components = field3d.components;
    cf.blowup = identity_map("original", field3d.coords);
    return cf;
}

/// Transports the K1 field through kappa12 and compares it with the K2
/// field at the image point, accounting for the point-dependent time
/// scaling between the two desingularizations. Returns the worst relative
/// mismatch over the samples (points with eps1 > 0).
inline double chart_independence_error(const ChartField& k1, const ChartField& k2,
                                       const std::vector<std::vector<double>>& samples) {
    if (!k1.weights || !k2.weights || !(*k1.weights == *k2.weights))
        throw StructuralError("chart fields come from different blow-ups");
    TransitionMap m = kappa12(*k1.weights);
    auto jac = m.jacobian();
    double worst = 0.0;
    for (const auto& p : samples) {
        auto q = m.apply(p);
        auto y1 = k1.field().eval(p);
        auto y2 = k2.field().eval(q);
        // X = D(Phi1) Y1 r1^E1 / c1 = D(Phi2) Y2 r2^E2 / c2.
        double a = pow_double(p[1], k1.factor_exponent) / to_double(k1.time_rescale);
        double b = pow_double(q[2], k2.factor_exponent) / to_double(k2.time_rescale);
        std::vector<double> diff(3), ref(3);
        for (std::size_t i = 0; i < 3; ++i) {
            double pushed = 0.0;
            for (std::size_t j = 0; j < 3; ++j) pushed += jac[i][j].eval(std::span<const double>(p)) * y1[j];
            ref[i] = y2[i] * b;
            diff[i] = pushed * a - ref[i];
        }
        worst = std::max(worst, detail::max_abs(diff) / std::max(detail::max_abs(ref), 1e-300));
    }
    return worst;
}

}  // namespace ucm
