#pragma once

// Generalized polynomials: finite sums c * x1^q1 ... xn^qn with rational
// coefficients and rational exponents.

#include "ucm/rational.hpp"

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ucm {

using Exponents = std::vector<Rational>;

/// Graded lexicographic order, largest first: total degree, then
/// exponent vectors compared lexicographically.
struct GradedLexGreater {
    bool operator()(const Exponents& a, const Exponents& b) const {
        Rational da(0), db(0);
        for (const auto& q : a) da += q;
        for (const auto& q : b) db += q;
        if (da != db) return da > db;
        return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
    }
};

using TermMap = std::map<Exponents, Rational, GradedLexGreater>;

namespace detail {

inline std::string format_exponent(const Rational& q) {
    if (is_integer(q)) return to_string(q);
    return "(" + to_string(q) + ")";
}

inline std::string format_monomial(const std::vector<std::string>& vars, const Exponents& e) {
    std::string out;
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (e[i] == 0) continue;
        if (!out.empty()) out += ' ';
        out += vars[i];
        if (e[i] != 1) out += "^" + format_exponent(e[i]);
    }
    return out;
}

}  // namespace detail

class GenPoly {
public:
    GenPoly() = default;

    explicit GenPoly(std::vector<std::string> variables) : vars_(std::move(variables)) {
        check_unique();
    }

    GenPoly(std::vector<std::string> variables, const TermMap& terms) : vars_(std::move(variables)) {
        check_unique();
        for (const auto& [e, c] : terms) add_term(e, c);
    }

    static GenPoly constant(const Rational& c, std::vector<std::string> variables = {}) {
        GenPoly p(std::move(variables));
        p.add_term(Exponents(p.vars_.size(), Rational(0)), c);
        return p;
    }

    static GenPoly monomial(const Rational& c, std::vector<std::string> variables, Exponents e) {
        GenPoly p(std::move(variables));
        if (e.size() != p.vars_.size()) throw StructuralError("exponent vector length mismatch");
        p.add_term(e, c);
        return p;
    }

    /// The polynomial `name` over `variables`.
    static GenPoly variable(const std::string& name, std::vector<std::string> variables) {
        GenPoly p(std::move(variables));
        Exponents e(p.vars_.size(), Rational(0));
        e[p.index_of(name)] = 1;
        p.add_term(e, Rational(1));
        return p;
    }

    /// c * name^q over `variables`.
    static GenPoly power(const std::string& name, const Rational& q, std::vector<std::string> variables,
                         const Rational& c = Rational(1)) {
        GenPoly p(std::move(variables));
        Exponents e(p.vars_.size(), Rational(0));
        e[p.index_of(name)] = q;
        p.add_term(e, c);
        return p;
    }

    const std::vector<std::string>& variables() const { return vars_; }
    const TermMap& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }
    bool is_zero() const { return terms_.empty(); }

    bool is_constant() const {
        if (terms_.empty()) return true;
        if (terms_.size() > 1) return false;
        const auto& e = terms_.begin()->first;
        return std::all_of(e.begin(), e.end(), [](const Rational& q) { return q == 0; });
    }

    Rational constant_term() const {
        auto it = terms_.find(Exponents(vars_.size(), Rational(0)));
        return it == terms_.end() ? Rational(0) : it->second;
    }

    bool is_monomial() const { return terms_.size() == 1; }

    bool has_variable(std::string_view name) const {
        return std::find(vars_.begin(), vars_.end(), name) != vars_.end();
    }

    std::size_t index_of(std::string_view name) const {
        auto it = std::find(vars_.begin(), vars_.end(), name);
        if (it == vars_.end()) throw StructuralError("unknown variable '" + std::string(name) + "'");
        return static_cast<std::size_t>(it - vars_.begin());
    }

    /// True if some term has a nonzero exponent of `name`.
    bool depends_on(std::string_view name) const {
        if (!has_variable(name)) return false;
        std::size_t i = index_of(name);
        return std::any_of(terms_.begin(), terms_.end(), [i](const auto& t) { return t.first[i] != 0; });
    }

    /// Re-expresses the polynomial over another variable list. Variables
    /// that are dropped must not occur with a nonzero exponent.
    GenPoly with_variables(const std::vector<std::string>& target) const {
        GenPoly out(target);
        std::vector<std::ptrdiff_t> where(vars_.size(), -1);
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            auto it = std::find(target.begin(), target.end(), vars_[i]);
            if (it != target.end()) where[i] = it - target.begin();
        }
        for (const auto& [e, c] : terms_) {
            Exponents ne(target.size(), Rational(0));
            for (std::size_t i = 0; i < vars_.size(); ++i) {
                if (where[i] >= 0) {
                    ne[static_cast<std::size_t>(where[i])] = e[i];
                } else if (e[i] != 0) {
                    throw StructuralError("cannot drop variable '" + vars_[i] + "' that occurs in the polynomial");
                }
            }
            out.add_term(ne, c);
        }
        return out;
    }

    GenPoly operator-() const {
        GenPoly out(vars_);
        for (const auto& [e, c] : terms_) out.terms_.emplace(e, Rational(-c));
        return out;
    }

    friend GenPoly operator+(const GenPoly& a, const GenPoly& b) {
        auto [x, y] = promote(a, b);
        GenPoly out = x;
        for (const auto& [e, c] : y.terms_) out.add_term(e, c);
        return out;
    }

    friend GenPoly operator-(const GenPoly& a, const GenPoly& b) { return a + (-b); }

    friend GenPoly operator*(const GenPoly& a, const GenPoly& b) {
        auto [x, y] = promote(a, b);
        GenPoly out(x.vars_);
        for (const auto& [ea, ca] : x.terms_) {
            for (const auto& [eb, cb] : y.terms_) {
                Exponents e(ea.size());
                for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
                out.add_term(e, Rational(ca * cb));
            }
        }
        return out;
    }

    friend GenPoly operator*(const Rational& k, const GenPoly& p) {
        GenPoly out(p.vars_);
        if (k == 0) return out;
        for (const auto& [e, c] : p.terms_) out.terms_.emplace(e, Rational(k * c));
        return out;
    }
    friend GenPoly operator*(const GenPoly& p, const Rational& k) { return k * p; }

    GenPoly& operator+=(const GenPoly& b) { return *this = *this + b; }
    GenPoly& operator-=(const GenPoly& b) { return *this = *this - b; }
    GenPoly& operator*=(const GenPoly& b) { return *this = *this * b; }

    GenPoly pow(unsigned n) const {
        GenPoly result = constant(Rational(1), vars_);
        GenPoly base = *this;
        while (n) {
            if (n & 1U) result = result * base;
            base = base * base;
            n >>= 1;
        }
        return result;
    }

    friend bool operator==(const GenPoly& a, const GenPoly& b) {
        return a.vars_ == b.vars_ && a.terms_ == b.terms_;
    }

    /// Multiplies by name^q (q may be negative or fractional).
    GenPoly times_power(std::string_view name, const Rational& q) const {
        std::size_t i = index_of(name);
        GenPoly out(vars_);
        for (const auto& [e, c] : terms_) {
            Exponents ne = e;
            ne[i] += q;
            out.terms_.emplace(std::move(ne), c);
        }
        return out;
    }

    /// Exact division by a single-term polynomial over the same variables.
    GenPoly divide_by_monomial(const GenPoly& m) const {
        if (!m.is_monomial()) throw StructuralError("divisor " + m.to_string() + " is not a single term");
        auto [x, y] = promote(*this, m);
        const auto& [me, mc] = *y.terms_.begin();
        GenPoly out(x.vars_);
        for (const auto& [e, c] : x.terms_) {
            Exponents ne(e.size());
            for (std::size_t i = 0; i < e.size(); ++i) ne[i] = e[i] - me[i];
            out.terms_.emplace(std::move(ne), Rational(c / mc));
        }
        return out;
    }

    /// Partial derivative; the power rule holds for rational exponents.
    GenPoly diff(std::string_view name) const {
        std::size_t i = index_of(name);
        GenPoly out(vars_);
        for (const auto& [e, c] : terms_) {
            if (e[i] == 0) continue;
            Exponents ne = e;
            ne[i] -= 1;
            out.add_term(ne, Rational(c * e[i]));
        }
        return out;
    }

    /// Minimum exponent of `name` over all terms, and the quotient
    /// p / name^min. The zero polynomial gives (0, 0).
    std::pair<Rational, GenPoly> extract_common_monomial(std::string_view name) const {
        std::size_t i = index_of(name);
        if (is_zero()) return {Rational(0), *this};
        Rational lo = terms_.begin()->first[i];
        for (const auto& [e, c] : terms_) lo = std::min(lo, e[i]);
        return {lo, times_power(name, Rational(-lo))};
    }

    /// Minimum exponent of `name` over all terms (0 for the zero polynomial).
    Rational min_exponent(std::string_view name) const { return extract_common_monomial(name).first; }

    /// Symbolic restriction name = 0. Terms with a positive exponent of
    /// `name` vanish; negative exponents raise DomainError. The variable is
    /// removed from the variable list.
    GenPoly set_zero(std::string_view name) const {
        std::size_t i = index_of(name);
        std::vector<std::string> vars;
        for (std::size_t j = 0; j < vars_.size(); ++j)
            if (j != i) vars.push_back(vars_[j]);
        GenPoly out(vars);
        for (const auto& [e, c] : terms_) {
            if (e[i] < 0) throw DomainError("term with negative power of '" + std::string(name) + "' at zero");
            if (e[i] > 0) continue;
            Exponents ne;
            for (std::size_t j = 0; j < e.size(); ++j)
                if (j != i) ne.push_back(e[j]);
            out.add_term(ne, c);
        }
        return out;
    }

    /// Substitutes a constant value for one variable exactly; the variable
    /// is removed. Throws DomainError if a term is not exactly representable.
    GenPoly set_value(std::string_view name, const Rational& value) const {
        if (value == 0) return set_zero(name);
        std::size_t i = index_of(name);
        std::vector<std::string> vars;
        for (std::size_t j = 0; j < vars_.size(); ++j)
            if (j != i) vars.push_back(vars_[j]);
        GenPoly out(vars);
        for (const auto& [e, c] : terms_) {
            auto f = pow_exact(value, e[i]);
            if (!f) throw DomainError(ucm::to_string(value) + "^" + ucm::to_string(e[i]) + " is not rational");
            Exponents ne;
            for (std::size_t j = 0; j < e.size(); ++j)
                if (j != i) ne.push_back(e[j]);
            out.add_term(ne, Rational(c * *f));
        }
        return out;
    }

    /// Floating-point evaluation at a point aligned with variables().
    double eval(std::span<const double> point) const {
        if (point.size() != vars_.size()) throw StructuralError("point dimension mismatch");
        double sum = 0.0;
        for (const auto& [e, c] : terms_) {
            double t = to_double(c);
            for (std::size_t i = 0; i < e.size(); ++i)
                if (e[i] != 0) t *= pow_double(point[i], e[i]);
            sum += t;
        }
        return sum;
    }

    /// Exact evaluation. Throws DomainError when some term is irrational at
    /// the point (fractional power of a non-perfect power).
    Rational eval_exact(std::span<const Rational> point) const {
        if (point.size() != vars_.size()) throw StructuralError("point dimension mismatch");
        Rational sum(0);
        for (const auto& [e, c] : terms_) {
            Rational t = c;
            for (std::size_t i = 0; i < e.size() && t != 0; ++i) {
                if (e[i] == 0) continue;
                auto f = pow_exact(point[i], e[i]);
                if (!f) throw DomainError(ucm::to_string(point[i]) + "^" + ucm::to_string(e[i]) + " is not rational");
                t *= *f;
            }
            sum += t;
        }
        return sum;
    }

    /// Exact where every term is exactly representable, floating otherwise.
    std::variant<Rational, double> eval(std::span<const Rational> point) const {
        try {
            return eval_exact(point);
        } catch (const DomainError&) {
            std::vector<double> p;
            for (const auto& q : point) p.push_back(to_double(q));
            return eval(std::span<const double>(p));
        }
    }

    /// Canonical text: terms in graded-lex order, e.g. `x^2 - 3/2 * x y^(1/2) + 1`.
    std::string to_string() const {
        if (terms_.empty()) return "0";
        std::string out;
        bool first = true;
        for (const auto& [e, c] : terms_) {
            std::string mono = detail::format_monomial(vars_, e);
            Rational mag = rational_abs(c);
            std::string body;
            if (mono.empty()) {
                body = ucm::to_string(mag);
            } else if (mag == 1) {
                body = mono;
            } else {
                body = ucm::to_string(mag) + " * " + mono;
            }
            if (first) {
                out = (c < 0 ? "-" : "") + body;
                first = false;
            } else {
                out += (c < 0 ? " - " : " + ") + body;
            }
        }
        return out;
    }

    friend std::ostream& operator<<(std::ostream& os, const GenPoly& p) { return os << p.to_string(); }

    /// Adds c * monomial(e), keeping the term map canonical.
    void add_term(const Exponents& e, const Rational& c) {
        if (e.size() != vars_.size()) throw StructuralError("exponent vector length mismatch");
        if (c == 0) return;
        auto [it, inserted] = terms_.emplace(e, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0) terms_.erase(it);
        }
    }

private:
    void check_unique() const {
        for (std::size_t i = 0; i < vars_.size(); ++i)
            for (std::size_t j = i + 1; j < vars_.size(); ++j)
                if (vars_[i] == vars_[j]) throw StructuralError("duplicate variable '" + vars_[i] + "'");
    }

    // Operands must share a variable list unless one has no variables.
    static std::pair<GenPoly, GenPoly> promote(const GenPoly& a, const GenPoly& b) {
        if (a.vars_ == b.vars_) return {a, b};
        if (a.vars_.empty()) return {a.with_variables(b.vars_), b};
        if (b.vars_.empty()) return {a, b.with_variables(a.vars_)};
        throw StructuralError("mismatched variable lists");
    }

    std::vector<std::string> vars_;
    TermMap terms_;
};

/// One replacement rule of a monomial substitution: `variable` becomes
/// `image`, which must be a single term.
struct SubstitutionRule {
    std::string variable;
    GenPoly image;
};

/// Replaces each listed variable by a single-term polynomial. The result is
/// over `target_vars` when given, otherwise over the unreplaced variables
/// followed by the variables of the images in order of first appearance.
inline GenPoly substitute(const GenPoly& p, const std::vector<SubstitutionRule>& rules,
                          std::optional<std::vector<std::string>> target_vars = std::nullopt) {
    const auto& vars_ = p.variables();
    std::vector<std::ptrdiff_t> rule_of(vars_.size(), -1);
    for (std::size_t r = 0; r < rules.size(); ++r) {
        if (!rules[r].image.is_monomial())
            throw StructuralError("substitution image for '" + rules[r].variable + "' is not a single term");
        if (p.has_variable(rules[r].variable)) rule_of[p.index_of(rules[r].variable)] = static_cast<std::ptrdiff_t>(r);
    }
    std::vector<std::string> out_vars;
    if (target_vars) {
        out_vars = *target_vars;
    } else {
        auto push = [&](const std::string& v) {
            if (std::find(out_vars.begin(), out_vars.end(), v) == out_vars.end()) out_vars.push_back(v);
        };
        for (std::size_t i = 0; i < vars_.size(); ++i)
            if (rule_of[i] < 0) push(vars_[i]);
        for (const auto& rule : rules)
            for (const auto& v : rule.image.variables()) push(v);
    }
    auto position = [&](const std::string& v) {
        auto it = std::find(out_vars.begin(), out_vars.end(), v);
        if (it == out_vars.end()) throw StructuralError("variable '" + v + "' missing from target list");
        return static_cast<std::size_t>(it - out_vars.begin());
    };
    GenPoly out(out_vars);
    for (const auto& [e, c] : p.terms()) {
        Exponents ne(out_vars.size(), Rational(0));
        Rational coeff = c;
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            if (e[i] == 0) continue;
            if (rule_of[i] < 0) {
                ne[position(vars_[i])] += e[i];
                continue;
            }
            const GenPoly& img = rules[static_cast<std::size_t>(rule_of[i])].image;
            const auto& [ie, ic] = *img.terms().begin();
            auto k = pow_exact(ic, e[i]);
            if (!k) throw StructuralError("coefficient " + ucm::to_string(ic) + "^" + ucm::to_string(e[i]) + " is irrational");
            coeff *= *k;
            for (std::size_t j = 0; j < ie.size(); ++j)
                if (ie[j] != 0) ne[position(img.variables()[j])] += ie[j] * e[i];
        }
        out.add_term(ne, coeff);
    }
    return out;
}

/// Embeds both operands into the union of their variable lists (a's
/// variables first).
inline std::pair<GenPoly, GenPoly> unify(const GenPoly& a, const GenPoly& b) {
    std::vector<std::string> vars = a.variables();
    for (const auto& v : b.variables())
        if (std::find(vars.begin(), vars.end(), v) == vars.end()) vars.push_back(v);
    return {a.with_variables(vars), b.with_variables(vars)};
}

/// Term-level difference report between two polynomials over the same
/// variables: one line per exponent where the coefficients differ.
inline std::vector<std::string> term_diff(const GenPoly& computed, const GenPoly& expected) {
    auto [a, b] = unify(computed, expected);
    std::vector<std::string> lines;
    GenPoly d = a - b;
    for (const auto& [e, c] : d.terms()) {
        auto ca = a.terms().find(e);
        auto cb = b.terms().find(e);
        std::string mono = detail::format_monomial(a.variables(), e);
        if (mono.empty()) mono = "1";
        lines.push_back(mono + ": computed " + (ca == a.terms().end() ? std::string("0") : to_string(ca->second)) +
                        ", expected " + (cb == b.terms().end() ? std::string("0") : to_string(cb->second)));
    }
    return lines;
}

/// Fast floating-point evaluator for a GenPoly: integral exponents use
/// repeated multiplication, fractional ones std::pow.
class NumericPoly {
public:
    NumericPoly() = default;
    explicit NumericPoly(const GenPoly& p) : dim_(p.variables().size()) {
        for (const auto& [e, c] : p.terms()) {
            Term t;
            t.coeff = to_double(c);
            for (std::size_t i = 0; i < e.size(); ++i) {
                if (e[i] == 0) continue;
                Factor f{i, 0, 0.0, is_integer(e[i])};
                if (f.integral) f.int_power = to_long(e[i]);
                else f.real_power = to_double(e[i]);
                t.factors.push_back(f);
            }
            terms_.push_back(std::move(t));
        }
    }

    std::size_t dimension() const { return dim_; }

    double operator()(std::span<const double> x) const {
        double sum = 0.0;
        for (const auto& t : terms_) {
            double v = t.coeff;
            for (const auto& f : t.factors) v *= f.integral ? ipow(x[f.index], f.int_power) : std::pow(x[f.index], f.real_power);
            sum += v;
        }
        return sum;
    }

private:
    static double ipow(double b, long n) {
        if (n < 0) return 1.0 / ipow(b, -n);
        double r = 1.0;
        while (n) {
            if (n & 1L) r *= b;
            b *= b;
            n >>= 1;
        }
        return r;
    }

    struct Factor {
        std::size_t index;
        long int_power;
        double real_power;
        bool integral;
    };
    struct Term {
        double coeff = 0.0;
        std::vector<Factor> factors;
    };
    std::size_t dim_ = 0;
    std::vector<Term> terms_;
};

}  // namespace ucm
