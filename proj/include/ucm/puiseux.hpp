#pragma once

// Truncated one-variable series with rational exponents and exact
// coefficients. Exponents may be negative (Laurent-Puiseux); the
// truncation order is either a rational bound (all stored exponents lie
// strictly below it) or absent, meaning the series is exact.

#include "ucm/genpoly.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ucm {

class PuiseuxSeries {
public:
    using Order = std::optional<Rational>;  // nullopt: exact (no remainder)

    PuiseuxSeries() = default;

    explicit PuiseuxSeries(std::string variable, Order order = std::nullopt)
        : var_(std::move(variable)), order_(std::move(order)) {}

    PuiseuxSeries(std::string variable, const std::map<Rational, Rational>& terms, Order order = std::nullopt)
        : var_(std::move(variable)), order_(std::move(order)) {
        for (const auto& [e, c] : terms) add_term(e, c);
    }

    static PuiseuxSeries monomial(const std::string& variable, const Rational& coeff, const Rational& exponent,
                                  Order order = std::nullopt) {
        PuiseuxSeries s(variable, std::move(order));
        s.add_term(exponent, coeff);
        return s;
    }

    static PuiseuxSeries constant(const std::string& variable, const Rational& c, Order order = std::nullopt) {
        return monomial(variable, c, Rational(0), std::move(order));
    }

    const std::string& variable() const { return var_; }
    const std::map<Rational, Rational>& terms() const { return terms_; }
    const Order& order() const { return order_; }
    bool is_exact() const { return !order_.has_value(); }

    /// True when no coefficient is stored (the series is O(t^order) or 0).
    bool is_zero() const { return terms_.empty(); }

    Rational coefficient(const Rational& exponent) const {
        auto it = terms_.find(exponent);
        return it == terms_.end() ? Rational(0) : it->second;
    }

    std::optional<Rational> leading_exponent() const {
        if (terms_.empty()) return std::nullopt;
        return terms_.begin()->first;
    }

    /// Smallest exponent that may carry a nonzero contribution: the leading
    /// exponent, or the truncation order for an O(.) remainder.
    Order valuation() const {
        if (!terms_.empty()) return terms_.begin()->first;
        return order_;
    }

    /// Smallest d such that every exponent (and the order) is a multiple of 1/d.
    Integer ramification() const {
        Integer d(1);
        for (const auto& [e, c] : terms_) d = lcm(d, e.get_den());
        if (order_) d = lcm(d, order_->get_den());
        return d;
    }

    PuiseuxSeries truncate(const Rational& order) const {
        Order o = order_ ? std::min(*order_, order) : order;
        PuiseuxSeries out(var_, o);
        for (const auto& [e, c] : terms_) out.add_term(e, c);
        return out;
    }

    PuiseuxSeries operator-() const {
        PuiseuxSeries out(var_, order_);
        for (const auto& [e, c] : terms_) out.terms_.emplace(e, Rational(-c));
        return out;
    }

    friend PuiseuxSeries operator+(const PuiseuxSeries& a, const PuiseuxSeries& b) {
        check_same_variable(a, b);
        PuiseuxSeries out(a.var_, min_order(a.order_, b.order_));
        for (const auto& [e, c] : a.terms_) out.add_term(e, c);
        for (const auto& [e, c] : b.terms_) out.add_term(e, c);
        return out;
    }

    friend PuiseuxSeries operator-(const PuiseuxSeries& a, const PuiseuxSeries& b) { return a + (-b); }

    friend PuiseuxSeries operator*(const PuiseuxSeries& a, const PuiseuxSeries& b) {
        check_same_variable(a, b);
        // O(t^oa) * b contributes from oa + val(b) on, and symmetrically.
        Order o;
        auto va = a.valuation();
        auto vb = b.valuation();
        if (a.order_ && vb) o = min_order(o, Rational(*a.order_ + *vb));
        if (b.order_ && va) o = min_order(o, Rational(*b.order_ + *va));
        PuiseuxSeries out(a.var_, o);
        for (const auto& [ea, ca] : a.terms_)
            for (const auto& [eb, cb] : b.terms_) out.add_term(Rational(ea + eb), Rational(ca * cb));
        return out;
    }

    friend PuiseuxSeries operator*(const Rational& k, const PuiseuxSeries& s) {
        PuiseuxSeries out(s.var_, s.order_);
        for (const auto& [e, c] : s.terms_) out.add_term(e, Rational(k * c));
        return out;
    }

    /// Multiplies by var^q.
    PuiseuxSeries shift(const Rational& q) const {
        PuiseuxSeries out(var_, order_ ? Order(Rational(*order_ + q)) : std::nullopt);
        for (const auto& [e, c] : terms_) out.terms_.emplace(Rational(e + q), c);
        return out;
    }

    PuiseuxSeries differentiate() const {
        PuiseuxSeries out(var_, order_ ? Order(Rational(*order_ - 1)) : std::nullopt);
        for (const auto& [e, c] : terms_)
            if (e != 0) out.add_term(Rational(e - 1), Rational(c * e));
        return out;
    }

    /// this^q. Non-negative integral powers of exact series are exact;
    /// otherwise the binomial expansion is cut at `cap` (required when the
    /// expansion would be infinite). The leading coefficient raised to q must
    /// be rational.
    PuiseuxSeries pow(const Rational& q, Order cap = std::nullopt) const {
        if (is_integer(q) && q >= 0) {
            long n = to_long(q);
            PuiseuxSeries result = constant(var_, Rational(1));
            PuiseuxSeries base = *this;
            while (n) {
                if (n & 1L) result = result * base;
                n >>= 1;
                if (n) base = base * base;
            }
            return cap ? result.truncate(*cap) : result;
        }
        if (terms_.empty()) throw DomainError("power of a series with no known leading term");
        const Rational lead_e = terms_.begin()->first;
        const Rational lead_c = terms_.begin()->second;
        auto lead_pow = pow_exact(lead_c, q);
        if (!lead_pow) throw DomainError("leading coefficient power " + ucm::to_string(lead_c) + "^" + ucm::to_string(q) + " is irrational");
        // this = lead_c t^lead_e (1 + h), h has positive valuation.
        PuiseuxSeries h = (Rational(1) / lead_c) * shift(Rational(-lead_e)) - constant(var_, Rational(1));
        Rational base_e = lead_e * q;
        // Relative truncation of the factor (1+h)^q.
        Order rel = h.order_;
        if (cap) rel = min_order(rel, Rational(*cap - base_e));
        if (!rel && !h.is_zero()) throw DomainError("infinite binomial expansion requires a truncation cap");
        PuiseuxSeries factor = constant(var_, Rational(1), rel);
        if (!h.is_zero()) {
            Rational hv = *h.valuation();
            PuiseuxSeries hj = constant(var_, Rational(1));
            for (long j = 1; Rational(hv * j) < *rel; ++j) {
                hj = (hj * h).truncate(*rel);
                factor = factor + binomial(q, j) * hj;
            }
        }
        if (rel) factor = factor.truncate(*rel);
        return (*lead_pow * factor).shift(base_e);
    }

    /// this(inner(u)): the result is a series in inner's variable. The inner
    /// series must have a positive leading exponent.
    PuiseuxSeries compose(const PuiseuxSeries& inner, Order cap = std::nullopt) const {
        auto lead = inner.leading_exponent();
        if (!lead || *lead <= 0)
            throw DomainError("composition requires an inner series with positive leading exponent");
        Order o = cap;
        if (order_) o = min_order(o, Rational(*order_ * *lead));
        PuiseuxSeries out(inner.var_, o);
        for (const auto& [e, c] : terms_) out = out + c * inner.pow(e, o);
        return o ? out.truncate(*o) : out;
    }

    /// Floating evaluation of the stored terms (the remainder is ignored).
    double eval(double t) const {
        double sum = 0.0;
        for (const auto& [e, c] : terms_) sum += to_double(c) * pow_double(t, e);
        return sum;
    }

    /// Exact evaluation of the stored terms; throws DomainError if a term
    /// is irrational at t.
    Rational eval_exact(const Rational& t) const {
        Rational sum(0);
        for (const auto& [e, c] : terms_) {
            auto f = pow_exact(t, e);
            if (!f) throw DomainError("series term irrational at " + ucm::to_string(t));
            sum += c * *f;
        }
        return sum;
    }

    std::string to_string() const {
        std::string out;
        for (const auto& [e, c] : terms_) {
            std::string mono = e == 0 ? "" : (e == 1 ? var_ : var_ + "^" + detail::format_exponent(e));
            Rational mag = rational_abs(c);
            std::string body = mono.empty() ? ucm::to_string(mag) : (mag == 1 ? mono : ucm::to_string(mag) + " * " + mono);
            if (out.empty()) out = (c < 0 ? "-" : "") + body;
            else out += (c < 0 ? " - " : " + ") + body;
        }
        if (order_) {
            std::string rem = "O(" + var_ + "^" + detail::format_exponent(*order_) + ")";
            out = out.empty() ? rem : out + " + " + rem;
        }
        return out.empty() ? "0" : out;
    }

    friend bool operator==(const PuiseuxSeries& a, const PuiseuxSeries& b) {
        return a.var_ == b.var_ && a.terms_ == b.terms_ && a.order_ == b.order_;
    }

    void add_term(const Rational& e, const Rational& c) {
        if (c == 0) return;
        if (order_ && e >= *order_) return;
        auto [it, inserted] = terms_.emplace(e, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0) terms_.erase(it);
        }
    }

    static Order min_order(const Order& a, const Order& b) {
        if (!a) return b;
        if (!b) return a;
        return std::min(*a, *b);
    }

private:
    static void check_same_variable(const PuiseuxSeries& a, const PuiseuxSeries& b) {
        if (a.var_ != b.var_) throw StructuralError("series in different variables: " + a.var_ + ", " + b.var_);
    }

    std::string var_;
    std::map<Rational, Rational> terms_;
    Order order_;
};

/// Evaluates a GenPoly with series substituted for its variables
/// (args aligned with p.variables()).
inline PuiseuxSeries evaluate_on_series(const GenPoly& p, const std::vector<PuiseuxSeries>& args,
                                        PuiseuxSeries::Order cap = std::nullopt) {
    if (args.size() != p.variables().size()) throw StructuralError("series argument count mismatch");
    if (args.empty()) throw StructuralError("at least one series argument is required");
    const std::string& var = args.front().variable();
    PuiseuxSeries sum(var, cap);
    for (const auto& [e, c] : p.terms()) {
        PuiseuxSeries term = PuiseuxSeries::constant(var, c);
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (e[i] == 0) continue;
            term = term * args[i].pow(e[i], cap);
            if (cap) term = term.truncate(*cap);
        }
        sum = sum + term;
    }
    return sum;
}

}  // namespace ucm
