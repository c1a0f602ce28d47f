#pragma once

// Equilibria, linearization, center-manifold series and series transport
// for the chart fields.

#include "ucm/puiseux.hpp"
#include "ucm/transforms.hpp"

#include <array>
#include <complex>
#include <set>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ucm {

/// Drops `var` from a field whose `var` component vanishes on {var = 0},
/// returning the restriction to that invariant plane.
inline VectorField restrict_to_zero(const VectorField& f, const std::string& var) {
    std::size_t k = f.coords.size();
    for (std::size_t i = 0; i < f.coords.size(); ++i)
        if (f.coords[i] == var) k = i;
    if (k == f.coords.size()) throw StructuralError("field has no coordinate '" + var + "'");
    if (!f.components[k].set_zero(var).is_zero())
        throw StructuralError("{" + var + " = 0} is not invariant: " + f.components[k].to_string());
    VectorField out;
    for (std::size_t i = 0; i < f.coords.size(); ++i) {
        if (i == k) continue;
        out.coords.push_back(f.coords[i]);
        out.components.push_back(f.components[i].set_zero(var));
    }
    return out;
}

/// Drops a coordinate whose component is zero and on which nothing depends
/// (e.g. r2 in the rescaling chart).
inline VectorField drop_passive(const VectorField& f, const std::string& var) {
    VectorField out;
    for (std::size_t i = 0; i < f.coords.size(); ++i) {
        if (f.components[i].depends_on(var)) throw StructuralError("'" + var + "' is not passive");
        if (f.coords[i] == var) {
            if (!f.components[i].is_zero()) throw StructuralError("'" + var + "' is not constant in time");
            continue;
        }
        out.coords.push_back(f.coords[i]);
    }
    for (std::size_t i = 0; i < f.coords.size(); ++i) {
        if (f.coords[i] == var) continue;
        out.components.push_back(f.components[i].set_zero(var));
    }
    return out;
}

/// A zero of a field; nullopt coordinates are free (a line or plane of
/// equilibria).
struct Equilibrium {
    std::vector<std::string> coords;
    std::vector<std::optional<Rational>> point;
    std::string subspace;

    bool is_isolated() const {
        for (const auto& p : point)
            if (!p) return false;
        return true;
    }

    std::vector<Rational> exact_point() const {
        std::vector<Rational> out;
        for (const auto& p : point) {
            if (!p) throw StructuralError("equilibrium has free coordinates");
            out.push_back(*p);
        }
        return out;
    }

    std::string to_string() const {
        std::string out = "(";
        for (std::size_t i = 0; i < point.size(); ++i) {
            if (i) out += ", ";
            out += coords[i] + "=" + (point[i] ? ucm::to_string(*point[i]) : std::string("free"));
        }
        return out + ")";
    }
};

struct EquilibriumSet {
    std::vector<Equilibrium> equilibria;
    bool complete = true;  // false if some stratum had roots we could not resolve exactly
};

namespace detail {

inline std::vector<Integer> positive_divisors(Integer n) {
    if (n < 0) n = -n;
    std::vector<Integer> out;
    if (n == 0) return out;
    for (Integer d = 1; d * d <= n; ++d) {
        if (n % d == 0) {
            out.push_back(d);
            if (d * d != n) out.push_back(Integer(n / d));
        }
    }
    return out;
}

/// Positive roots of sum c_k w^k (integer k >= 0) found by the rational
/// root theorem. `resolved` is false when a factor of positive degree
/// without rational roots remains.
inline std::vector<Rational> positive_rational_roots(std::map<long, Rational> coeffs, bool& resolved) {
    std::vector<Rational> roots;
    resolved = true;
    while (!coeffs.empty() && coeffs.begin()->first > 0) {
        // Factor out w^m (w = 0 is not a positive root).
        std::map<long, Rational> shifted;
        long m = coeffs.begin()->first;
        for (auto& [k, c] : coeffs) shifted[k - m] = c;
        coeffs = std::move(shifted);
    }
    if (coeffs.empty()) return roots;
    Integer den(1);
    for (const auto& [k, c] : coeffs) den = lcm(den, c.get_den());
    std::map<long, Integer> ic;
    for (const auto& [k, c] : coeffs) ic[k] = Integer(c * den);
    auto eval = [&](const Rational& w) {
        Rational sum(0);
        for (const auto& [k, c] : ic) sum += Rational(c) * pow_int(w, k);
        return sum;
    };
    auto deflate = [&](const Rational& w) {
        // Synthetic division by (w - root) in rational arithmetic.
        long deg = ic.rbegin()->first;
        std::vector<Rational> a(static_cast<std::size_t>(deg + 1), Rational(0));
        for (const auto& [k, c] : ic) a[static_cast<std::size_t>(k)] = c;
        std::vector<Rational> q(static_cast<std::size_t>(deg), Rational(0));
        Rational carry(0);
        for (long k = deg; k >= 1; --k) {
            carry = a[static_cast<std::size_t>(k)] + carry * w;
            q[static_cast<std::size_t>(k - 1)] = carry;
        }
        Integer d2(1);
        for (const auto& c : q) d2 = lcm(d2, c.get_den());
        ic.clear();
        for (std::size_t k = 0; k < q.size(); ++k)
            if (q[k] != 0) ic[static_cast<long>(k)] = Integer(q[k] * d2);
    };
    bool found = true;
    while (found && !ic.empty() && ic.rbegin()->first > 0) {
        found = false;
        for (const auto& p : positive_divisors(ic.begin()->second)) {
            for (const auto& q : positive_divisors(ic.rbegin()->second)) {
                Rational w(p, q);
                w.canonicalize();
                if (eval(w) == 0) {
                    if (std::find(roots.begin(), roots.end(), w) == roots.end()) roots.push_back(w);
                    deflate(w);
                    found = true;
                    break;
                }
            }
            if (found) break;
        }
    }
    if (!ic.empty() && ic.rbegin()->first > 0) {
        // Descartes' rule: no sign change means no positive root remains.
        int changes = 0;
        int last = 0;
        for (const auto& [k, c] : ic) {
            int sg = sgn(c);
            if (sg != 0 && last != 0 && sg != last) ++changes;
            if (sg != 0) last = sg;
        }
        if (changes > 0) resolved = false;
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

/// Positive zeros of a univariate GenPoly with rational exponents.
inline std::vector<Rational> positive_zeros(const GenPoly& p, std::size_t var, bool& resolved) {
    Integer d(1);
    for (const auto& [e, c] : p.terms()) d = lcm(d, e[var].get_den());
    Rational lo = p.terms().begin()->first[var];
    for (const auto& [e, c] : p.terms()) lo = std::min(lo, e[var]);
    std::map<long, Rational> coeffs;
    for (const auto& [e, c] : p.terms()) coeffs[to_long(Rational((e[var] - lo) * d))] += c;
    std::vector<Rational> out;
    for (const auto& w : positive_rational_roots(coeffs, resolved)) {
        // var = w^d.
        out.push_back(pow_int(w, to_long(Rational(d))));
    }
    return out;
}

inline bool covers(const Equilibrium& a, const Equilibrium& b) {
    for (std::size_t i = 0; i < a.point.size(); ++i) {
        if (!a.point[i]) continue;
        if (!b.point[i] || *b.point[i] != *a.point[i]) return false;
    }
    return true;
}

}  // namespace detail

/// Equilibria with non-negative coordinates. Each subset of coordinates is
/// set to zero in turn; on the remaining (positive) coordinates every
/// component is divided by its monomial content, and the univariate
/// factors that remain are solved exactly.
inline EquilibriumSet equilibria_on_subspace(const VectorField& f, const std::string& subspace = "none") {
    const std::size_t n = f.coords.size();
    EquilibriumSet result;
    std::vector<Equilibrium> found;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        std::vector<GenPoly> comps;
        bool ok = true;
        for (const auto& c : f.components) {
            GenPoly p = c;
            try {
                for (std::size_t i = 0; i < n; ++i)
                    if (mask & (1u << i)) p = p.set_value(f.coords[i], Rational(0)).with_variables(f.coords) ;
            } catch (const DomainError&) {
                ok = false;
                break;
            }
            comps.push_back(p);
        }
        if (!ok) continue;
        std::vector<std::optional<Rational>> point(n);
        std::vector<bool> fixed(n, false);
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) {
                point[i] = Rational(0);
                fixed[i] = true;
            }
        // Candidate values per free coordinate.
        std::vector<std::optional<std::vector<Rational>>> allowed(n);
        bool empty = false;
        for (auto p : comps) {
            if (p.is_zero()) continue;
            for (const auto& v : f.coords) p = p.extract_common_monomial(v).second;
            std::vector<std::size_t> deps;
            for (std::size_t i = 0; i < n; ++i)
                if (p.depends_on(f.coords[i])) deps.push_back(i);
            if (deps.empty()) {
                empty = true;  // nonzero constant
                break;
            }
            if (deps.size() > 1) {
                result.complete = false;
                empty = true;
                break;
            }
            bool resolved = true;
            auto roots = detail::positive_zeros(p, deps[0], resolved);
            if (!resolved) result.complete = false;
            auto& slot = allowed[deps[0]];
            if (!slot) {
                slot = roots;
            } else {
                std::vector<Rational> keep;
                for (const auto& r : *slot)
                    if (std::find(roots.begin(), roots.end(), r) != roots.end()) keep.push_back(r);
                slot = keep;
            }
            if (slot->empty()) {
                empty = true;
                break;
            }
        }
        if (empty) continue;
        // Cartesian product over constrained coordinates.
        std::vector<std::vector<std::optional<Rational>>> points{point};
        for (std::size_t i = 0; i < n; ++i) {
            if (fixed[i] || !allowed[i]) continue;
            std::vector<std::vector<std::optional<Rational>>> next;
            for (const auto& base : points)
                for (const auto& r : *allowed[i]) {
                    auto q = base;
                    q[i] = r;
                    next.push_back(q);
                }
            points = std::move(next);
        }
        for (auto& q : points) found.push_back({f.coords, q, subspace});
    }
    for (std::size_t i = 0; i < found.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < found.size() && !dominated; ++j) {
            if (i == j) continue;
            bool ji = detail::covers(found[j], found[i]);
            bool ij = detail::covers(found[i], found[j]);
            if (ji && (!ij || j < i)) dominated = true;
        }
        if (!dominated) result.equilibria.push_back(found[i]);
    }
    return result;
}

/// Exact Jacobian of a field at a rational point.
inline std::vector<std::vector<Rational>> jacobian_exact(const VectorField& f, std::span<const Rational> point) {
    std::vector<std::vector<Rational>> j;
    for (const auto& c : f.components) {
        std::vector<Rational> row;
        for (const auto& v : f.coords) row.push_back(c.diff(v).eval_exact(point));
        j.push_back(std::move(row));
    }
    return j;
}

struct EigenData {
    std::array<std::array<Rational, 2>, 2> jacobian;
    bool exact = false;
    std::array<Rational, 2> values;                  // exact case, ascending
    std::array<std::array<Rational, 2>, 2> vectors;  // exact case, matching values
    std::array<std::complex<double>, 2> numeric;     // always filled
    bool complex_pair = false;
};

namespace detail {

inline std::optional<Rational> exact_sqrt(const Rational& q) {
    if (q < 0) return std::nullopt;
    auto n = exact_root(q.get_num(), 2);
    auto d = exact_root(q.get_den(), 2);
    if (!n || !d) return std::nullopt;
    return Rational(*n, *d);
}

/// Null vector of [[a - l, b], [c, d - l]], scaled so that its last
/// nonzero entry is 1.
inline std::array<Rational, 2> null_vector(const std::array<std::array<Rational, 2>, 2>& a, const Rational& l) {
    std::array<Rational, 2> v;
    if (a[0][1] != 0) v = {a[0][1], Rational(l - a[0][0])};
    else if (a[1][0] != 0) v = {Rational(l - a[1][1]), a[1][0]};
    else if (a[0][0] == l && a[1][1] != l) v = {Rational(1), Rational(0)};
    else v = {Rational(0), Rational(1)};
    Rational k = v[1] != 0 ? v[1] : v[0];
    return {Rational(v[0] / k), Rational(v[1] / k)};
}

}  // namespace detail

/// Closed-form eigen-structure of a 2D field at an exact point.
inline EigenData linearize_eigen(const VectorField& f, const Equilibrium& eq) {
    if (f.coords.size() != 2) throw StructuralError("linearize_eigen expects a planar field");
    auto p = eq.exact_point();
    auto j = jacobian_exact(f, p);
    EigenData out;
    out.jacobian = {{{j[0][0], j[0][1]}, {j[1][0], j[1][1]}}};
    Rational tr = j[0][0] + j[1][1];
    Rational det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    Rational disc = tr * tr - 4 * det;
    if (auto r = detail::exact_sqrt(disc)) {
        out.exact = true;
        out.values = {Rational((tr - *r) / 2), Rational((tr + *r) / 2)};
        for (int i = 0; i < 2; ++i) out.vectors[i] = detail::null_vector(out.jacobian, out.values[i]);
        for (int i = 0; i < 2; ++i) out.numeric[i] = to_double(out.values[i]);
        return out;
    }
    double t = to_double(tr), dd = to_double(disc);
    if (dd < 0) {
        out.complex_pair = true;
        out.numeric = {std::complex<double>(t / 2, -std::sqrt(-dd) / 2), std::complex<double>(t / 2, std::sqrt(-dd) / 2)};
    } else {
        out.numeric = {std::complex<double>((t - std::sqrt(dd)) / 2), std::complex<double>((t + std::sqrt(dd)) / 2)};
    }
    return out;
}

/// Center-manifold graph dependent = base + sum a_k graph^k.
struct CMSeries {
    std::vector<std::string> coords;  // {dependent, graph}
    std::vector<Rational> base_point;
    std::string graph_variable, dependent_variable;
    PuiseuxSeries series;    // dependent as a series in the graph variable, O(graph^(order+1))
    int order = 0;
    PuiseuxSeries residual;  // invariance residual, exactly O(graph^(order+1))

    Rational coefficient(int k) const { return series.coefficient(Rational(k)); }
};

/// Invariance residual F_dep(h, g) - h'(g) F_graph(h, g) of a graph h.
inline PuiseuxSeries invariance_residual(const VectorField& f, std::size_t dep, std::size_t graph,
                                         const PuiseuxSeries& h, const Rational& cap) {
    const std::string& gv = f.coords[graph];
    PuiseuxSeries g = PuiseuxSeries::monomial(gv, Rational(1), Rational(1));
    std::vector<PuiseuxSeries> args(2);
    args[dep] = h;
    args[graph] = g;
    PuiseuxSeries fd = evaluate_on_series(f.components[dep], args, cap);
    PuiseuxSeries fg = evaluate_on_series(f.components[graph], args, cap);
    return (fd - (h.differentiate() * fg)).truncate(cap);
}

/// Solves the invariance equation order by order in exact arithmetic for
/// the graph of the first coordinate over the second at `eq`, whose graph
/// coordinate must be 0.
inline CMSeries center_manifold_series(const VectorField& f, const Equilibrium& eq, int order) {
    if (f.coords.size() != 2) throw StructuralError("center_manifold_series expects a planar field");
    if (order < 1) throw ParameterError("series order must be positive");
    auto eig = linearize_eigen(f, eq);
    int zeros = 0;
    for (const auto& z : eig.numeric)
        if (z == std::complex<double>(0.0)) ++zeros;
    if (!eig.exact || zeros != 1) throw UnsupportedError("center manifold requires exactly one zero eigenvalue");
    auto p = eq.exact_point();
    if (p[1] != 0) throw UnsupportedError("graph coordinate must vanish at the base point");
    const std::string& gv = f.coords[1];
    PuiseuxSeries h = PuiseuxSeries::constant(gv, p[0]);
    for (int k = 1; k <= order; ++k) {
        Rational cap(k + 1);
        PuiseuxSeries h0 = h;
        PuiseuxSeries h1 = h + PuiseuxSeries::monomial(gv, Rational(1), Rational(k));
        PuiseuxSeries r0 = invariance_residual(f, 0, 1, h0, cap);
        PuiseuxSeries r1 = invariance_residual(f, 0, 1, h1, cap);
        for (const auto& [e, c] : r0.terms())
            if (e < k) throw std::logic_error("center manifold: lower-order residual did not vanish");
        Rational lin = r1.coefficient(Rational(k)) - r0.coefficient(Rational(k));
        if (lin == 0) throw std::logic_error("center manifold: singular order-" + std::to_string(k) + " equation");
        Rational a = -r0.coefficient(Rational(k)) / lin;
        h = h + PuiseuxSeries::monomial(gv, a, Rational(k));
    }
    CMSeries out;
    out.coords = f.coords;
    out.base_point = p;
    out.graph_variable = gv;
    out.dependent_variable = f.coords[0];
    out.order = order;
    out.series = h.truncate(Rational(order + 1));
    out.residual = invariance_residual(f, 0, 1, h, Rational(order + 1));
    return out;
}

/// True when the residual has no terms below the certified order.
inline bool residual_certified(const CMSeries& cm) {
    return cm.residual.is_zero() && cm.residual.order() && *cm.residual.order() >= cm.order + 1;
}

struct ReferenceComparison {
    std::string name;
    Rational reference;
    Rational computed;
    bool agree() const { return reference == computed; }
};

/// The two reference center-manifold constants for the K1 field: the
/// first-order coefficient -mu/s and c11 = -(1+s+s^2) mu^2 / (2 s^3).
inline std::vector<ReferenceComparison> compare_reference_cm(const CMSeries& cm, int s, const Rational& mu) {
    Rational S(s);
    return {{"a1 (reference -mu/s)", Rational(-mu / S), cm.coefficient(1)},
            {"a1 (eigenvector -mu/s^2)", Rational(-mu / (S * S)), cm.coefficient(1)},
            {"a2 (reference c11)", Rational(-(1 + S + S * S) * mu * mu / (2 * S * S * S)), cm.coefficient(2)}};
}

/// The K1 field restricted to {r1 = 0}, coordinates (v1, eps1), scaled by s
/// (normalized K1 time).
inline VectorField k1_on_r1_zero(int s, const Rational& mu) {
    return restrict_to_zero(normalized_k1(s, mu).field(), "r1");
}

inline Equilibrium p1a() { return {{"v1", "eps1"}, {Rational(1), Rational(0)}, "r1=0"}; }

struct TransportedSeries {
    std::string variable;       // series variable t
    std::string target;         // the target coordinate
    bool reciprocal = false;    // t = 1 / target when true, t = target otherwise
    PuiseuxSeries series;       // dependent target coordinate as a series in t

    /// The series written in the target coordinate.
    std::string to_string() const {
        if (!reciprocal) return series.to_string();
        std::string out;
        for (auto it = series.terms().begin(); it != series.terms().end(); ++it) {
            const auto& [e, c] = *it;
            Rational q = -e;
            std::string mono = q == 0 ? "" : (q == 1 ? target : target + "^" + detail::format_exponent(q));
            Rational mag = rational_abs(c);
            std::string body = mono.empty() ? ucm::to_string(mag) : (mag == 1 ? mono : ucm::to_string(mag) + " * " + mono);
            if (out.empty()) out = (c < 0 ? "-" : "") + body;
            else out += (c < 0 ? " - " : " + ") + body;
        }
        if (series.order()) {
            std::string rem = "O(" + target + "^" + detail::format_exponent(Rational(-*series.order())) + ")";
            out = out.empty() ? rem : out + " + " + rem;
        }
        return out.empty() ? "0" : out;
    }

    double eval_at_target(double value) const { return series.eval(reciprocal ? 1.0 / value : value); }
};

/// Pushes a center-manifold graph through a monomial map restricted to
/// the zero set of the coordinates the graph does not involve. The image
/// of `target` must be a power of the graph variable; the image of the
/// dependent coordinate of the map becomes a series in t = target (or
/// 1/target when that power is negative).
inline TransportedSeries transport_series(const CMSeries& cm, const TransitionMap& map, const std::string& target,
                                          const std::string& dependent_target) {
    auto image_of = [&](const std::string& name) -> const GenPoly& {
        for (std::size_t i = 0; i < map.target_coords.size(); ++i)
            if (map.target_coords[i] == name) return map.images[i];
        throw StructuralError("map has no target coordinate '" + name + "'");
    };
    auto exponents = [&](const GenPoly& img) {
        if (!img.is_monomial()) throw StructuralError("map image is not a single term");
        const auto& [e, c] = *img.terms().begin();
        std::map<std::string, Rational> out;
        for (std::size_t i = 0; i < e.size(); ++i)
            if (e[i] != 0) out[img.variables()[i]] = e[i];
        return std::make_pair(out, c);
    };
    auto [te, tc] = exponents(image_of(target));
    if (tc != 1 || te.size() != 1 || !te.count(cm.graph_variable))
        throw UnsupportedError("target image must be a pure power of " + cm.graph_variable);
    Rational p = te[cm.graph_variable];
    TransportedSeries out;
    out.target = target;
    out.reciprocal = p < 0;
    out.variable = "t";
    // graph = t^(1/|p|).
    Rational gpow = Rational(1) / rational_abs(p);
    PuiseuxSeries inner = PuiseuxSeries::monomial("t", Rational(1), gpow);
    auto [de, dc] = exponents(image_of(dependent_target));
    for (const auto& [v, q] : de)
        if (v != cm.graph_variable && v != cm.dependent_variable)
            throw UnsupportedError("dependent image involves '" + v + "' outside the graph plane");
    Rational cap = *cm.series.order() * gpow;
    PuiseuxSeries h = cm.series.compose(inner, cap);
    PuiseuxSeries result = PuiseuxSeries::constant("t", dc);
    if (de.count(cm.dependent_variable)) {
        // Relative truncation: multiplying by h^a keeps the order relative to the leading term.
        PuiseuxSeries hp = h.pow(de[cm.dependent_variable], cap);
        result = result * hp;
    }
    if (de.count(cm.graph_variable)) result = result.shift(Rational(de[cm.graph_variable] * gpow));
    out.series = result;
    return out;
}

/// The reference transported curve 1 - mu/(s y2) + c11 y2^(-(2s+1)/s) as a
/// series in t = 1/y2.
inline PuiseuxSeries reference_transport(int s, const Rational& mu) {
    Rational S(s);
    Rational c11 = -(1 + S + S * S) * mu * mu / (2 * S * S * S);
    PuiseuxSeries out("t", Rational((3 * S + 2) / S));
    out.add_term(Rational(0), Rational(1));
    out.add_term(Rational(1), Rational(-mu / S));
    out.add_term(Rational((2 * S + 1) / S), c11);
    return out;
}

/// Term-level comparison of two series in the same variable, listing
/// exponents where the coefficients differ below both truncation orders.
inline std::vector<std::string> series_diff(const PuiseuxSeries& computed, const PuiseuxSeries& expected) {
    auto o = PuiseuxSeries::min_order(computed.order(), expected.order());
    std::vector<std::string> lines;
    std::set<Rational> exps;
    for (const auto& [e, c] : computed.terms()) exps.insert(e);
    for (const auto& [e, c] : expected.terms()) exps.insert(e);
    for (const auto& e : exps) {
        if (o && e >= *o) continue;
        Rational a = computed.coefficient(e), b = expected.coefficient(e);
        if (a != b)
            lines.push_back(computed.variable() + "^" + detail::format_exponent(e) + ": computed " + ucm::to_string(a) +
                            ", reference " + ucm::to_string(b));
    }
    return lines;
}

/// D(field) evaluated along states of a planar trajectory.
class VariationalMatrix {
public:
    explicit VariationalMatrix(const VectorField& f) : coords_(f.coords) {
        if (f.coords.size() != 2) throw StructuralError("variational matrix expects a planar field");
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) entries_[i][j] = f.components[i].diff(f.coords[j]);
    }

    const GenPoly& entry(std::size_t i, std::size_t j) const { return entries_[i][j]; }

    std::array<std::array<double, 2>, 2> operator()(std::span<const double> state) const {
        std::array<std::array<double, 2>, 2> a{};
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) a[i][j] = entries_[i][j].eval(state.first(2));
        return a;
    }

    /// Largest eigenvalue modulus of the matrix at a state.
    double spectral_radius(std::span<const double> state) const {
        auto a = (*this)(state);
        double tr = a[0][0] + a[1][1];
        double det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        double disc = tr * tr - 4 * det;
        if (disc < 0) return std::sqrt(std::abs(det));
        double r = std::sqrt(disc);
        return std::max(std::abs((tr - r) / 2), std::abs((tr + r) / 2));
    }

    std::vector<std::array<std::array<double, 2>, 2>> along(const std::vector<std::vector<double>>& states) const {
        std::vector<std::array<std::array<double, 2>, 2>> out;
        for (const auto& s : states) out.push_back((*this)(s));
        return out;
    }

private:
    std::vector<std::string> coords_;
    std::array<std::array<GenPoly, 2>, 2> entries_;
};

/// The planar rescaling-chart field v2' = v2^2 (y2 - v2^s), y2' = mu v2^s.
inline VectorField k2_planar(int s, const Rational& mu) {
    return drop_passive(blowup_chart(localized_field3d(s, mu), BlowUpWeights::standard(s), Chart::K2).field(), "r2");
}

}  // namespace ucm
