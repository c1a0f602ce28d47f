#pragma once

// JSON result documents, their validator, and the derived CSV and gnuplot views.

#include "ucm/asymptotics.hpp"
#include "ucm/experiments.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ucm {

using json = nlohmann::ordered_json;

inline constexpr int schema_version = 1;

/// Rationals travel as their exact text plus a float for convenience.
inline json rational_json(const Rational& q) { return {{"exact", to_string(q)}, {"value", to_double(q)}}; }

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json fit_json(const LinearFit& f) {
    return {{"slope", number_or_null(f.slope)},
            {"stderr", number_or_null(f.stderr_slope)},
            {"r2", number_or_null(f.r2)},
            {"intercept", number_or_null(f.intercept)},
            {"n", f.n}};
}

/// {schema_version, experiment, params, points[], fit, verdict}.
inline json make_document(const std::string& experiment, json params, json points, json fit, const std::string& verdict) {
    json d;
    d["schema_version"] = schema_version;
    d["experiment"] = experiment;
    d["params"] = std::move(params);
    d["points"] = points.is_null() ? json::array() : std::move(points);
    d["fit"] = std::move(fit);
    d["verdict"] = verdict;
    return d;
}

inline json error_document(const std::string& command, const std::string& kind, const std::string& message) {
    return {{"schema_version", schema_version},
            {"experiment", command},
            {"error", {{"type", kind}, {"message", message}}},
            {"verdict", "error"}};
}

/// Schema problems of a result document (empty when valid).
inline std::vector<std::string> validate_document(const json& d) {
    std::vector<std::string> bad;
    if (!d.is_object()) return {"document is not an object"};
    static const std::set<std::string> verdicts{"pass", "fail", "inconclusive", "info", "error"};
    if (!d.contains("schema_version") || !d["schema_version"].is_number_integer()) bad.push_back("schema_version missing");
    else if (d["schema_version"].get<int>() != schema_version) bad.push_back("unsupported schema_version");
    if (!d.contains("experiment") || !d["experiment"].is_string()) bad.push_back("experiment missing");
    if (!d.contains("verdict") || !d["verdict"].is_string() || !verdicts.count(d["verdict"].get<std::string>()))
        bad.push_back("verdict missing or unknown");
    if (d.contains("error")) {
        const auto& e = d["error"];
        if (!e.is_object() || !e.contains("type") || !e.contains("message")) bad.push_back("error needs type and message");
        return bad;
    }
    if (!d.contains("params") || !d["params"].is_object()) bad.push_back("params must be an object");
    if (!d.contains("points") || !d["points"].is_array()) bad.push_back("points must be an array");
    else
        for (const auto& p : d["points"])
            if (!p.is_object()) {
                bad.push_back("every point must be an object");
                break;
            }
    if (!d.contains("fit")) bad.push_back("fit missing");
    else if (!d["fit"].is_null()) {
        const auto& f = d["fit"];
        if (!f.is_object()) bad.push_back("fit must be an object or null");
        else
            for (const char* k : {"slope", "stderr", "r2"})
                if (!f.contains(k) || !(f[k].is_number() || f[k].is_null())) bad.push_back(std::string("fit.") + k + " missing");
    }
    return bad;
}

// ---------------------------------------------------------------- views

namespace detail {

inline std::string csv_cell(const json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    }
    if (v.is_object() && v.contains("value")) return csv_cell(v["value"]);
    if (v.is_number_float()) {
        std::ostringstream os;
        os.precision(17);
        os << v.get<double>();
        return os.str();
    }
    return v.dump();
}

}  // namespace detail

/// Points as CSV; columns are the keys of the first point, in order, then
/// any keys first seen later.
inline std::string points_csv(const json& doc) {
    std::vector<std::string> cols;
    std::set<std::string> seen;
    for (const auto& p : doc.at("points"))
        for (auto it = p.begin(); it != p.end(); ++it)
            if (seen.insert(it.key()).second) cols.push_back(it.key());
    std::ostringstream os;
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const auto& p : doc.at("points")) {
        for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << (p.contains(cols[i]) ? detail::csv_cell(p[cols[i]]) : "");
        os << '\n';
    }
    return os.str();
}

struct PlotSpec {
    std::string x, y;  // CSV column names
    bool logx = false, logy = false;
    std::string title;
};

/// Default plot columns per experiment.
inline PlotSpec default_plot(const json& doc) {
    std::string e = doc.value("experiment", "");
    if (e == "scaling-fit") return {"eps", "x", true, true, "departure point vs eps"};
    if (e == "optimality") return {"r1", "abs_multiplier", true, true, "normal multiplier on the equilibrium line"};
    if (e == "limit-cycle") return {"x", "y", false, false, "limit cycle"};
    if (e == "simulate") return {"t", "", false, false, "trajectory"};
    if (e == "series") return {"k", "coefficient", false, false, "slow-manifold coefficients"};
    if (e == "departure") return {"t", "x", false, false, "departure"};
    return {"", "", false, false, e};
}

/// A gnuplot script reading `csv_path`.
inline std::string gnuplot_script(const json& doc, const std::string& csv_path, PlotSpec spec) {
    std::vector<std::string> cols;
    if (!doc["points"].empty())
        for (auto it = doc["points"][0].begin(); it != doc["points"][0].end(); ++it) cols.push_back(it.key());
    auto col = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < cols.size(); ++i)
            if (cols[i] == name) return i + 1;
        return 0;
    };
    std::size_t cx = col(spec.x), cy = col(spec.y);
    if (cx == 0) cx = 1;
    if (cy == 0) cy = cols.size() >= 2 ? 2 : 1;
    std::ostringstream os;
    os << "set datafile separator ','\n";
    os << "set key top left autotitle columnhead\n";
    os << "set title '" << spec.title << "'\n";
    os << "set xlabel '" << (cx <= cols.size() ? cols[cx - 1] : "x") << "'\n";
    os << "set ylabel '" << (cy <= cols.size() ? cols[cy - 1] : "y") << "'\n";
    if (spec.logx) os << "set logscale x\n";
    if (spec.logy) os << "set logscale y\n";
    os << "plot '" << csv_path << "' using " << cx << ':' << cy << " with linespoints title '" << doc.value("experiment", "")
       << "'";
    if (doc.contains("fit") && doc["fit"].is_object() && spec.logx && spec.logy && doc["fit"]["slope"].is_number()) {
        double m = doc["fit"]["slope"].get<double>(), b = doc["fit"].value("intercept", 0.0);
        os << ", exp(" << b << ") * x**(" << m << ") title 'fit slope " << m << "'";
    }
    os << '\n';
    return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << text;
}

// ---------------------------------------------------------------- documents

inline json departure_json(const DepartureEvent& d) {
    return {{"eps", d.eps}, {"x", d.x}, {"y", d.y}, {"t", d.time}, {"criterion", d.criterion}, {"steps", d.steps}};
}

inline json scaling_document(const ScalingFitResult& r, double tol = 0.05) {
    json pts = json::array();
    for (const auto& p : r.points) {
        if (p.event) pts.push_back(departure_json(*p.event));
        else pts.push_back({{"eps", p.eps}, {"error", p.error}});
    }
    bool ok = std::abs(r.fit_x.slope - r.expected_x) <= tol && std::abs(r.fit_y.slope - r.expected_y) <= tol;
    json d = make_document("scaling-fit",
                           {{"s", r.s}, {"mu", rational_json(r.mu)}, {"theta", r.theta}, {"tolerance", tol}},
                           std::move(pts), fit_json(r.fit_x), ok ? "pass" : "fail");
    d["fit_y"] = fit_json(r.fit_y);
    d["expected"] = {{"slope_x", r.expected_x}, {"slope_y", r.expected_y}};
    return d;
}

inline json optimality_document(const OptimalityResult& r, double tol = 0.05) {
    json pts = json::array();
    for (const auto& p : r.points) pts.push_back({{"r1", p.r1}, {"multiplier", p.multiplier}, {"abs_multiplier", std::abs(p.multiplier)}});
    bool control = r.alpha1 == 0 && r.alpha2 == 0;
    std::string verdict;
    if (r.inconclusive) verdict = "inconclusive";
    else if (!r.exact_beta) verdict = "fail";
    else if (control) verdict = (*r.exact_beta == 0 && r.exact_constant != 0) ? "pass" : "fail";
    else verdict = (*r.exact_beta > 0 && std::abs(r.fit.slope - to_double(*r.exact_beta)) <= tol) ? "pass" : "fail";
    json d = make_document("optimality",
                           {{"s", r.s}, {"mu", rational_json(r.mu)}, {"alpha1", rational_json(r.alpha1)}, {"alpha2", rational_json(r.alpha2)}},
                           std::move(pts), fit_json(r.fit), verdict);
    d["symbolic"] = {{"multiplier", r.multiplier.to_string()},
                     {"on_line", r.multiplier_on_line.to_string()},
                     {"line_exponent", rational_json(r.line_exponent)},
                     {"desingularization", rational_json(r.desingularization)},
                     {"beta", r.exact_beta ? rational_json(*r.exact_beta) : json(nullptr)},
                     {"constant", rational_json(r.exact_constant)}};
    d["inconclusive"] = r.inconclusive;
    return d;
}

inline json limit_cycle_document(const LimitCycleResult& r, const std::optional<AmplitudeScaling>& amp = std::nullopt,
                                 double slope_tol = 0.15) {
    json pts = json::array();
    for (std::size_t i = 0; i < r.cycle.times.size(); ++i)
        pts.push_back({{"t", r.cycle.times[i]}, {"x", r.cycle.states[i][0]}, {"y", r.cycle.states[i][1]}});
    bool ok = r.attracting();
    json fit = nullptr;
    if (amp) {
        fit = fit_json(amp->fit);
        ok = ok && std::abs(amp->fit.slope + 1.0) <= slope_tol;
    }
    json d = make_document("limit-cycle", {{"mu", r.mu}, {"eps", r.eps}, {"section_x", r.section_x}}, std::move(pts), fit,
                           ok ? "pass" : "fail");
    d["cycle"] = {{"converged", r.converged},
                  {"diagnostic", r.diagnostic},
                  {"fixed_point_y", r.fixed_point_y},
                  {"closure_error", r.closure_error},
                  {"period", r.period},
                  {"max_x", r.max_x},
                  {"return_map_derivative", r.derivative},
                  {"iterations", r.iterations}};
    if (amp) {
        json a = json::array();
        for (const auto& c : amp->cycles) a.push_back({{"eps", c.eps}, {"max_x", c.max_x}, {"period", c.period}, {"derivative", c.derivative}});
        d["amplitude"] = a;
    }
    return d;
}

inline json trajectory_document(const Trajectory& tr, json params, std::size_t max_points = 20000) {
    json pts = json::array();
    std::size_t stride = std::max<std::size_t>(1, tr.times.size() / max_points);
    for (std::size_t i = 0; i < tr.times.size(); i += stride) {
        json p{{"t", tr.times[i]}};
        for (std::size_t k = 0; k < tr.names.size(); ++k) p[tr.names[k]] = tr.states[i][k];
        pts.push_back(p);
    }
    if ((tr.times.size() - 1) % stride != 0) {
        json p{{"t", tr.times.back()}};
        for (std::size_t k = 0; k < tr.names.size(); ++k) p[tr.names[k]] = tr.states.back()[k];
        pts.push_back(p);
    }
    json d = make_document("simulate", std::move(params), std::move(pts), nullptr, tr.ok() ? "info" : "fail");
    json ev = json::array();
    for (const auto& e : tr.events) ev.push_back({{"name", e.name}, {"t", e.t}, {"state", e.state}, {"g", e.g_value}});
    d["events"] = ev;
    d["status"] = status_name(tr.status);
    d["stats"] = {{"steps", tr.stats.steps},
                  {"rejected", tr.stats.rejected},
                  {"newton_iterations", tr.stats.newton_iterations},
                  {"rhs_evaluations", tr.stats.rhs_evaluations},
                  {"jacobian_evaluations", tr.stats.jacobian_evaluations}};
    return d;
}

inline json series_terms_json(const PuiseuxSeries& p) {
    json t = json::array();
    for (const auto& [e, c] : p.terms()) t.push_back({{"exponent", rational_json(e)}, {"coefficient", rational_json(c)}});
    return t;
}

inline json series_document(const SlowManifoldSeries& sm) {
    json pts = json::array();
    for (std::size_t k = 0; k < sm.coefficients.size(); ++k) {
        const auto& c = sm.coefficients[k];
        json p{{"k", k}, {"series", c.to_string()}, {"terms", series_terms_json(c)}};
        if (c.terms().size() == 1) p["coefficient"] = rational_json(c.terms().begin()->second);
        if (sm.s == 1) p["reference_coefficient"] = rational_json(reference_asymptotic_coefficient(static_cast<int>(k)));
        pts.push_back(p);
    }
    json d = make_document("series", {{"s", sm.s}, {"mu", rational_json(sm.mu)}, {"order", sm.order}}, std::move(pts), nullptr, "info");
    if (sm.order >= 1) {
        auto b = breakdown_scale(sm);
        d["breakdown"] = {{"x_exponent", rational_json(b.x_exponent)}, {"y_exponent", rational_json(b.y_exponent)}};
    }
    if (sm.s == 1) {
        bool agree = true;
        for (std::size_t k = 0; k < sm.coefficients.size(); ++k)
            if (sm.coefficients[k].coefficient(Rational(-(2 * static_cast<long>(k) + 1))) != reference_asymptotic_coefficient(static_cast<int>(k)))
                agree = false;
        d["comparison"] = {{"reference", "x(y) = 1/y - sum_k (2k-1) eps^k / y^(2k+1)"},
                           {"computed", "x_k = (2k-1)!! mu^k / y^(2k+1)"},
                           {"agree", agree}};
    }
    return d;
}

}  // namespace ucm
