#pragma once

// Planar fast-slow systems x' = f(x, y), y' = eps g(x, y) and the model
// registry used by the command-line tool.

#include "ucm/genpoly.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ucm {

inline const std::vector<std::string>& planar_variables() {
    static const std::vector<std::string> vars{"x", "y"};
    return vars;
}

struct FastSlowSystem {
    std::string name;
    GenPoly fast;  // f(x, y)
    GenPoly slow;  // g(x, y); the slow equation carries the factor eps
    bool epsilon_symbolic = true;
    std::map<std::string, Rational> params;

    /// s for members of the power-law family, nullopt otherwise.
    std::optional<int> power_law_exponent() const {
        if (name != "power-law") return std::nullopt;
        return static_cast<int>(to_long(params.at("s")));
    }

    Rational mu() const { return params.at("mu"); }
};

/// f = 1 - x^s y, g = mu.
inline FastSlowSystem power_law_system(int s, const Rational& mu) {
    if (s < 1) throw ParameterError("power-law exponent s must be a positive integer, got " + std::to_string(s));
    if (mu == 0) throw ParameterError("slow drift mu must be nonzero");
    const auto& xy = planar_variables();
    FastSlowSystem sys;
    sys.name = "power-law";
    sys.fast = GenPoly::constant(Rational(1), xy) - GenPoly::monomial(Rational(1), xy, {Rational(s), Rational(1)});
    sys.slow = GenPoly::constant(mu, xy);
    sys.params = {{"s", Rational(s)}, {"mu", mu}};
    return sys;
}

/// Two-species autocatalator: f = y x^2 + y - x, g = mu - y x^2 - y.
inline FastSlowSystem autocatalator2d(const Rational& mu) {
    const auto& xy = planar_variables();
    GenPoly x = GenPoly::variable("x", xy), y = GenPoly::variable("y", xy);
    FastSlowSystem sys;
    sys.name = "autocatalator2d";
    sys.fast = y * x.pow(2) + y - x;
    sys.slow = GenPoly::constant(mu, xy) - y * x.pow(2) - y;
    sys.params = {{"mu", mu}};
    return sys;
}

/// A polynomial ODE in which some components carry the factor eps.
/// Used for models outside the planar analysis (simulation only).
struct PolynomialModel {
    std::string name;
    std::vector<std::string> variables;
    std::vector<GenPoly> rhs;
    std::vector<bool> slow;  // component multiplied by eps on the fast time scale
    std::map<std::string, Rational> params;
};

inline PolynomialModel as_polynomial_model(const FastSlowSystem& sys) {
    return {sys.name, planar_variables(), {sys.fast, sys.slow}, {false, true}, sys.params};
}

/// Three-species autocatalator (x fast; y, z slow). Registered for
/// simulation only.
inline PolynomialModel autocatalator3d(const Rational& mu, const Rational& kappa) {
    std::vector<std::string> v{"x", "y", "z"};
    GenPoly x = GenPoly::variable("x", v), y = GenPoly::variable("y", v), z = GenPoly::variable("z", v);
    PolynomialModel m;
    m.name = "autocatalator3d";
    m.variables = v;
    m.rhs = {y * x.pow(2) + y - x, mu * (GenPoly::constant(kappa, v) + z) - y * x.pow(2) - y, x - z};
    m.slow = {false, true, true};
    m.params = {{"mu", mu}, {"kappa", kappa}};
    return m;
}

/// The critical manifold as a graph over the fast variable.
struct CriticalManifoldGraph {
    std::string graph_variable;  // the independent variable (x)
    std::string value_variable;  // the variable given by the graph (y)
    GenPoly expression;          // c(x)
};

/// c(x) = x^(-s) for the power-law family; the identity f(x, c(x)) = 0 is
/// verified symbolically before returning.
inline CriticalManifoldGraph critical_graph(const FastSlowSystem& sys) {
    auto s = sys.power_law_exponent();
    if (!s) throw UnsupportedError("critical graph is only available for the power-law family (got " + sys.name + ")");
    GenPoly c = GenPoly::power("x", Rational(-*s), {"x"});
    GenPoly residual = substitute(sys.fast, {{"y", c}}, std::vector<std::string>{"x"});
    if (!residual.is_zero()) throw std::logic_error("critical graph residual is nonzero: " + residual.to_string());
    return {"x", "y", c};
}

/// Normal hyperbolicity measure: the fast-direction derivative df/dx.
inline double nh_measure(const FastSlowSystem& sys, double x, double y) {
    double pt[2] = {x, y};
    return sys.fast.diff("x").eval(std::span<const double>(pt));
}

/// A registry entry: every model has a polynomial form; planar ones also
/// carry their fast-slow structure.
struct RegisteredModel {
    std::string spec;
    PolynomialModel model;
    std::optional<FastSlowSystem> planar;
};

/// Parses "power-law:s=2,mu=-1", "autocatalator2d:mu=1.1" or
/// "autocatalator3d:mu=..,kappa=..".
inline RegisteredModel parse_model(std::string_view spec) {
    std::string text(spec);
    std::string kind = text.substr(0, text.find(':'));
    std::map<std::string, Rational> kv;
    if (auto colon = text.find(':'); colon != std::string::npos) {
        std::string rest = text.substr(colon + 1);
        std::size_t pos = 0;
        while (pos <= rest.size() && !rest.empty()) {
            auto comma = rest.find(',', pos);
            std::string item = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            auto eq = item.find('=');
            if (eq == std::string::npos) throw ParameterError("model parameter '" + item + "' is not key=value");
            kv[item.substr(0, eq)] = parse_rational(item.substr(eq + 1));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    auto need = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw ParameterError("model '" + kind + "' requires parameter '" + key + "'");
        return it->second;
    };
    if (kind == "power-law") {
        Rational s = need("s");
        if (!is_integer(s)) throw ParameterError("power-law exponent s must be an integer");
        auto sys = power_law_system(static_cast<int>(to_long(s)), need("mu"));
        return {text, as_polynomial_model(sys), sys};
    }
    if (kind == "autocatalator2d") {
        auto sys = autocatalator2d(need("mu"));
        return {text, as_polynomial_model(sys), sys};
    }
    if (kind == "autocatalator3d") {
        return {text, autocatalator3d(need("mu"), need("kappa")), std::nullopt};
    }
    throw ParameterError("unknown model '" + kind + "'");
}

}  // namespace ucm
