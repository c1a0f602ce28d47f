#pragma once

// Exact rational scalars and the error types shared by the whole library.

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ucm {

using Integer = mpz_class;
using Rational = mpq_class;

/// Raised when a value lies outside the domain of an operation
/// (fractional power of a non-positive number, division by zero, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when operands are structurally incompatible (variable lists,
/// dimensions, non-monomial divisors).
class StructuralError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for invalid model or experiment parameters.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an analysis is asked for a case it does not cover.
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

inline Rational make_rational(long num, long den = 1) {
    if (den == 0) throw DomainError("rational with zero denominator");
    Rational q(num, den);
    q.canonicalize();
    return q;
}

inline bool is_integer(const Rational& q) { return q.get_den() == 1; }

inline std::string to_string(const Rational& q) { return q.get_str(); }

inline double to_double(const Rational& q) { return q.get_d(); }

/// Parses "3", "-3/2", "1.1", "1e-4", "2.5e3" exactly (decimals become
/// their exact rational value, not the nearest double).
inline Rational parse_rational(std::string_view text) {
    std::string s(text);
    if (s.empty()) throw ParameterError("empty rational literal");
    if (auto slash = s.find('/'); slash != std::string::npos) {
        Rational q;
        try {
            q = Rational(Integer(s.substr(0, slash)), Integer(s.substr(slash + 1)));
        } catch (const std::invalid_argument&) {
            throw ParameterError("malformed rational literal '" + s + "'");
        }
        if (q.get_den() == 0) throw DomainError("rational with zero denominator");
        q.canonicalize();
        return q;
    }
    long exp10 = 0;
    if (auto e = s.find_first_of("eE"); e != std::string::npos) {
        try {
            exp10 = std::stol(s.substr(e + 1));
        } catch (const std::exception&) {
            throw ParameterError("malformed exponent in '" + s + "'");
        }
        s = s.substr(0, e);
    }
    bool negative = false;
    if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
        negative = s[0] == '-';
        s = s.substr(1);
    }
    std::string digits;
    long frac_digits = 0;
    bool seen_point = false;
    for (char c : s) {
        if (c == '.') {
            if (seen_point) throw ParameterError("malformed decimal '" + std::string(text) + "'");
            seen_point = true;
        } else if (c >= '0' && c <= '9') {
            digits.push_back(c);
            if (seen_point) ++frac_digits;
        } else {
            throw ParameterError("malformed number '" + std::string(text) + "'");
        }
    }
    if (digits.empty()) throw ParameterError("malformed number '" + std::string(text) + "'");
    Integer num(digits);
    long shift = exp10 - frac_digits;
    Integer ten_pow;
    mpz_ui_pow_ui(ten_pow.get_mpz_t(), 10, static_cast<unsigned long>(shift < 0 ? -shift : shift));
    Rational q = shift >= 0 ? Rational(num * ten_pow) : Rational(num, ten_pow);
    q.canonicalize();
    return negative ? Rational(-q) : q;
}

/// base^e for integral e; negative e requires base != 0.
inline Rational pow_int(const Rational& base, long e) {
    if (e == 0) return Rational(1);
    if (base == 0) {
        if (e < 0) throw DomainError("zero raised to a negative power");
        return Rational(0);
    }
    unsigned long n = static_cast<unsigned long>(e < 0 ? -e : e);
    Integer num, den;
    mpz_pow_ui(num.get_mpz_t(), base.get_num_mpz_t(), n);
    mpz_pow_ui(den.get_mpz_t(), base.get_den_mpz_t(), n);
    Rational q = e > 0 ? Rational(num, den) : Rational(den, num);
    q.canonicalize();
    return q;
}

/// Exact n-th root of a non-negative integer, if one exists.
inline std::optional<Integer> exact_root(const Integer& a, unsigned long n) {
    if (a < 0) return std::nullopt;
    Integer r;
    if (mpz_root(r.get_mpz_t(), a.get_mpz_t(), n) == 0) return std::nullopt;
    return r;
}

inline long to_long(const Rational& q) {
    if (!is_integer(q) || !q.get_num().fits_slong_p())
        throw DomainError("rational " + to_string(q) + " is not a machine integer");
    return q.get_num().get_si();
}

/// base^e in exact arithmetic. Returns nullopt when the result is
/// irrational (e.g. 2^(1/2)). Fractional powers of non-positive bases
/// raise DomainError.
inline std::optional<Rational> pow_exact(const Rational& base, const Rational& e) {
    if (is_integer(e)) return pow_int(base, to_long(e));
    if (base <= 0)
        throw DomainError("fractional power " + to_string(e) + " of non-positive value " + to_string(base));
    if (!e.get_den().fits_ulong_p()) return std::nullopt;
    unsigned long d = e.get_den().get_ui();
    auto num_root = exact_root(base.get_num(), d);
    auto den_root = exact_root(base.get_den(), d);
    if (!num_root || !den_root) return std::nullopt;
    Rational root(*num_root, *den_root);
    root.canonicalize();
    return pow_int(root, e.get_num().get_si());
}

/// Floating-point power with the same domain rules as pow_exact.
inline double pow_double(double base, const Rational& e) {
    if (is_integer(e)) {
        long n = to_long(e);
        if (base == 0.0) {
            if (n < 0) throw DomainError("zero raised to a negative power");
            return n == 0 ? 1.0 : 0.0;
        }
        double result = 1.0, b = base;
        unsigned long m = static_cast<unsigned long>(n < 0 ? -n : n);
        while (m) {
            if (m & 1UL) result *= b;
            b *= b;
            m >>= 1;
        }
        return n < 0 ? 1.0 / result : result;
    }
    if (!(base > 0.0))
        throw DomainError("fractional power " + to_string(e) + " of non-positive value");
    return std::pow(base, to_double(e));
}

inline Rational rational_abs(const Rational& q) { return q < 0 ? Rational(-q) : q; }

inline Integer lcm(const Integer& a, const Integer& b) {
    Integer r;
    mpz_lcm(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
    return r;
}

/// Generalized binomial coefficient C(q, j) for rational q.
inline Rational binomial(const Rational& q, long j) {
    Rational c(1);
    for (long i = 0; i < j; ++i) {
        c *= Rational(q - i);
        c /= i + 1;
    }
    return c;
}

}  // namespace ucm
