#include "ucm/acceptance.hpp"
#include "ucm/asymptotics.hpp"
#include "ucm/experiments.hpp"
#include "ucm/io.hpp"
#include "ucm/localanalysis.hpp"
#include "ucm/transforms.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace ucm;

namespace {

struct Output {
    std::string out, csv, gnuplot;
};

void add_output_options(CLI::App* cmd, Output& o) {
    cmd->add_option("--out", o.out, "write the JSON document here instead of stdout");
    cmd->add_option("--csv", o.csv, "write the points as CSV");
    cmd->add_option("--gnuplot", o.gnuplot, "write a gnuplot script (and the CSV it reads)");
}

void emit(const json& doc, const Output& o) {
    if (auto bad = validate_document(doc); !bad.empty()) throw StructuralError("result document fails its schema: " + bad.front());
    std::string text = doc.dump(2) + "\n";
    if (o.out.empty()) std::cout << text;
    else write_text(o.out, text);
    std::string csv = o.csv;
    if (!o.gnuplot.empty() && csv.empty()) csv = std::filesystem::path(o.gnuplot).replace_extension(".csv").string();
    if (!csv.empty()) write_text(csv, points_csv(doc));
    if (!o.gnuplot.empty()) write_text(o.gnuplot, gnuplot_script(doc, csv, default_plot(doc)));
}

/// "lo:hi:n" log-spaced.
std::vector<double> parse_decades(const std::string& text) {
    auto a = text.find(':');
    auto b = a == std::string::npos ? a : text.find(':', a + 1);
    if (b == std::string::npos) throw ParameterError("grid must be lo:hi:n, got '" + text + "'");
    try {
        double lo = std::stod(text.substr(0, a)), hi = std::stod(text.substr(a + 1, b - a - 1));
        int n = std::stoi(text.substr(b + 1));
        return log_grid(lo, hi, n);
    } catch (const std::invalid_argument&) {
        throw ParameterError("grid must be lo:hi:n, got '" + text + "'");
    } catch (const std::out_of_range&) {
        throw ParameterError("grid value out of range in '" + text + "'");
    }
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto comma = text.find(',', pos);
        std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ParameterError("not a number: '" + item + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

Method parse_method(const std::string& m) {
    if (m == "explicit") return Method::Explicit;
    if (m == "implicit") return Method::Implicit;
    throw ParameterError("method must be explicit or implicit");
}

json rational_list(const std::vector<Rational>& v) {
    json a = json::array();
    for (const auto& q : v) a.push_back(to_string(q));
    return a;
}

// ---------------------------------------------------------------- commands

json cmd_series(int s, const std::string& mu, int order) {
    return series_document(slow_manifold_series(s, parse_rational(mu), order));
}

json cmd_blowup(int s, const std::string& mu_text, const std::string& weights, const std::string& a1_text,
                const std::string& a2_text, const std::string& chart) {
    Rational mu = parse_rational(mu_text);
    if (weights != "standard" && weights != "modified") throw ParameterError("weights must be standard or modified");
    if (chart != "K1" && chart != "K2" && chart != "both") throw ParameterError("chart must be K1, K2 or both");
    power_law_system(s, mu);
    Rational a1 = parse_rational(a1_text), a2 = parse_rational(a2_text);
    auto w = weights == "standard" ? BlowUpWeights::standard(s) : BlowUpWeights::modified(s, a1, a2);
    auto field = localized_field3d(s, mu);
    json pts = json::array(), charts = json::array();
    bool all_match = true;
    for (Chart c : {Chart::K1, Chart::K2}) {
        if (chart != "both" && chart != chart_name(c)) continue;
        ChartField cf = blowup_chart(field, w, c);
        if (weights == "standard" && c == Chart::K1) cf = with_time_rescale(cf, Rational(s));
        json entry{{"chart", chart_name(c)},
                   {"coords", cf.coords},
                   {"factor", cf.factor_variable + "^" + to_string(cf.factor_exponent)},
                   {"time_rescale", to_string(cf.time_rescale)}};
        json comps = json::object();
        for (std::size_t i = 0; i < cf.coords.size(); ++i) {
            comps[cf.coords[i] + "'"] = cf.components[i].to_string();
            pts.push_back({{"chart", chart_name(c)}, {"coordinate", cf.coords[i]}, {"field", cf.components[i].to_string()}});
        }
        entry["field"] = comps;
        std::optional<FieldComparison> cmp;
        if (weights == "standard") cmp = compare_fields(cf.components, c == Chart::K1 ? reference_kappa1(s, mu) : reference_kappa2(s, mu), cf.coords);
        else if (c == Chart::K1) cmp = compare_fields(cf.raw_components, reference_modified_kappa1(s, mu, a1, a2), cf.coords);
        if (cmp) {
            bool exact = cmp->matches() && *cmp->constant == 1;
            all_match = all_match && exact;
            entry["reference_match"] = exact;
            entry["reference_constant"] = cmp->constant ? json(to_string(*cmp->constant)) : json(nullptr);
            entry["differences"] = cmp->diffs;
        }
        charts.push_back(entry);
    }
    json d = make_document("blowup",
                           {{"s", s}, {"mu", rational_json(mu)}, {"weights", weights}, {"alpha1", rational_json(a1)}, {"alpha2", rational_json(a2)}},
                           std::move(pts), nullptr, all_match ? "pass" : "fail");
    d["charts"] = charts;
    return d;
}

json cmd_center_manifold(int s, const std::string& mu_text, int order) {
    Rational mu = parse_rational(mu_text);
    power_law_system(s, mu);
    if (order < 1) throw ParameterError("order must be at least 1");
    auto field = k1_on_r1_zero(s, mu);
    auto cm = center_manifold_series(field, p1a(), order);
    auto eig = linearize_eigen(field, p1a());
    json pts = json::array();
    for (int k = 0; k <= order; ++k) pts.push_back({{"k", k}, {"coefficient", rational_json(cm.coefficient(k))}});
    bool cert = residual_certified(cm);
    Rational slope = eig.vectors[1][0] / eig.vectors[1][1];
    json d = make_document("center-manifold", {{"s", s}, {"mu", rational_json(mu)}, {"order", order}}, std::move(pts), nullptr,
                           cert && cm.coefficient(1) == slope ? "pass" : "fail");
    d["series"] = cm.dependent_variable + " = " + cm.series.to_string();
    d["residual_certified"] = cert;
    d["residual"] = cm.residual.to_string();
    d["eigenvalues"] = rational_list({eig.values[0], eig.values[1]});
    d["null_vector"] = rational_list({eig.vectors[1][0], eig.vectors[1][1]});
    json table = json::array();
    for (const auto& row : compare_reference_cm(cm, s, mu))
        table.push_back({{"quantity", row.name}, {"reference", to_string(row.reference)}, {"computed", to_string(row.computed)}, {"agree", row.agree()}});
    d["reference_comparison"] = table;
    return d;
}

json cmd_transport(int s, const std::string& mu_text, int order) {
    Rational mu = parse_rational(mu_text);
    power_law_system(s, mu);
    if (order < 1) throw ParameterError("order must be at least 1");
    auto cm = center_manifold_series(k1_on_r1_zero(s, mu), p1a(), order);
    auto tr = transport_series(cm, kappa12(BlowUpWeights::standard(s)), "y2", "v2");
    json pts = json::array();
    for (const auto& [e, c] : tr.series.terms())
        pts.push_back({{"y2_exponent", rational_json(Rational(tr.reciprocal ? Rational(-e) : e))}, {"coefficient", rational_json(c)}});
    json d = make_document("transport", {{"s", s}, {"mu", rational_json(mu)}, {"order", order}}, std::move(pts), nullptr, "info");
    d["curve"] = "v2 = " + tr.to_string();
    d["reference_differences"] = series_diff(tr.series, reference_transport(s, mu));
    return d;
}

json cmd_simulate(const std::string& model_spec, double eps, double t_end, const std::string& x0_text, const std::string& method,
                  const std::string& scale, double rtol, double atol, long max_steps, bool reverse) {
    auto reg = parse_model(model_spec);
    if (scale != "fast" && scale != "slow") throw ParameterError("time scale must be fast or slow");
    IntegratorConfig cfg;
    cfg.method = parse_method(method);
    cfg.rtol = rtol;
    cfg.atol = atol;
    cfg.max_steps = max_steps;
    cfg.time_scale = scale == "fast" ? TimeScale::Fast : TimeScale::Slow;
    cfg.validate();
    if (!(t_end > 0)) throw ParameterError("t-end must be positive");
    std::vector<double> x0;
    if (!x0_text.empty()) x0 = parse_list(x0_text);
    else if (reg.planar && reg.model.name.rfind("power-law", 0) == 0) x0 = {2.0, std::pow(2.0, -to_double(reg.planar->params.at("s")))};
    else x0.assign(reg.model.variables.size(), 1.0);
    if (x0.size() != reg.model.variables.size())
        throw ParameterError("x0 needs " + std::to_string(reg.model.variables.size()) + " components");
    OdeSystem sys = make_ode(reg.model, eps, cfg.time_scale);
    if (reverse) sys = reversed(sys);
    auto tr = integrate(sys, x0, {0.0, t_end}, cfg);
    if (!tr.ok())
        throw ExperimentError("integration stopped at t = " + std::to_string(tr.final_time()) + ": " + status_name(tr.status) + " after " +
                              std::to_string(tr.stats.steps) + " steps");
    return trajectory_document(tr, {{"model", model_spec},
                                    {"eps", eps},
                                    {"t_end", t_end},
                                    {"x0", x0},
                                    {"method", method_name(cfg.method)},
                                    {"time_scale", scale},
                                    {"rtol", rtol},
                                    {"atol", atol},
                                    {"reverse", reverse}});
}

json cmd_departure(int s, const std::string& mu_text, double eps, double theta, double x_start) {
    Rational mu = parse_rational(mu_text);
    power_law_system(s, mu);
    DepartureOptions opt;
    opt.x_start = x_start;
    auto d = departure_point(s, mu, eps, theta, opt);
    json doc = make_document("departure", {{"s", s}, {"mu", rational_json(mu)}, {"eps", eps}, {"theta", theta}, {"x_start", x_start}},
                             json::array({departure_json(d)}), nullptr, "info");
    doc["reference_scale"] = {{"x", std::pow(eps, -1.0 / (s + 1))}, {"y", std::pow(eps, static_cast<double>(s) / (s + 1))}};
    return doc;
}

json cmd_scaling_fit(int s, const std::string& mu_text, const std::string& grid, double theta, double x_start) {
    Rational mu = parse_rational(mu_text);
    DepartureOptions opt;
    opt.x_start = x_start;
    auto r = scaling_fit(s, mu, parse_decades(grid), theta, opt);
    json d = scaling_document(r);
    d["params"]["x_start"] = x_start;
    d["params"]["eps_grid"] = grid;
    return d;
}

json cmd_optimality(int s, const std::string& mu_text, const std::string& a1, const std::string& a2, const std::string& grid) {
    Rational mu = parse_rational(mu_text);
    power_law_system(s, mu);
    auto r = optimality_probe(s, mu, parse_rational(a1), parse_rational(a2), parse_decades(grid));
    json d = optimality_document(r);
    d["params"]["r1_grid"] = grid;
    return d;
}

json cmd_limit_cycle(double mu, double eps, double section_x, const std::string& method, const std::string& amp_list, bool reverse) {
    LimitCycleOptions opt;
    opt.section_x = section_x;
    opt.method = parse_method(method);
    opt.reverse_time = reverse;
    if (!(section_x > 0)) throw ParameterError("section-x must be positive");
    std::vector<double> amp_eps;
    if (!amp_list.empty()) amp_eps = parse_list(amp_list);
    if (!amp_eps.empty() && amp_eps.size() < 2) throw ParameterError("amplitude scaling needs at least two eps values");
    auto r = find_limit_cycle(mu, eps, opt);
    std::optional<AmplitudeScaling> amp;
    if (!amp_eps.empty()) amp = amplitude_scaling(mu, amp_eps, opt);
    json d = limit_cycle_document(r, amp);
    d["params"]["method"] = method_name(opt.method);
    d["params"]["reverse"] = reverse;
    return d;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unbounded critical manifolds: symbolic charts, series and scaling experiments"};
    app.require_subcommand(1);
    Output out;
    std::string current = "ucm";

    int s = 1, order = 3;
    std::string mu = "-1";

    auto* series = app.add_subcommand("series", "slow-manifold series coefficients and breakdown exponents");
    series->add_option("--s", s, "power-law exponent")->check(CLI::PositiveNumber);
    series->add_option("--mu", mu, "slow drift (rational)");
    series->add_option("--order", order, "truncation order K")->check(CLI::NonNegativeNumber);
    add_output_options(series, out);

    std::string weights = "standard", alpha1 = "0", alpha2 = "0", chart = "both";
    auto* blowup = app.add_subcommand("blowup", "chart vector fields of the weighted blow-up");
    blowup->add_option("--s", s)->check(CLI::PositiveNumber);
    blowup->add_option("--mu", mu);
    blowup->add_option("--weights", weights, "standard or modified")->check(CLI::IsMember({"standard", "modified"}));
    blowup->add_option("--alpha1", alpha1);
    blowup->add_option("--alpha2", alpha2);
    blowup->add_option("--chart", chart, "K1, K2 or both")->check(CLI::IsMember({"K1", "K2", "both"}));
    add_output_options(blowup, out);

    int cm_order = 6;
    auto* cmcmd = app.add_subcommand("center-manifold", "center-manifold series at p1a with certificate");
    cmcmd->add_option("--s", s)->check(CLI::PositiveNumber);
    cmcmd->add_option("--mu", mu);
    cmcmd->add_option("--order", cm_order)->check(CLI::PositiveNumber);
    add_output_options(cmcmd, out);

    auto* transport = app.add_subcommand("transport", "center manifold carried into the rescaling chart");
    transport->add_option("--s", s)->check(CLI::PositiveNumber);
    transport->add_option("--mu", mu);
    transport->add_option("--order", cm_order)->check(CLI::PositiveNumber);
    add_output_options(transport, out);

    std::string model, x0, method = "implicit", scale = "fast";
    double eps = 0.01, t_end = 10.0, rtol = 1e-8, atol = 1e-10;
    long max_steps = 1000000;
    bool reverse = false;
    auto* simulate = app.add_subcommand("simulate", "integrate a registered model");
    simulate->add_option("--model", model, "e.g. power-law:s=2,mu=-1, autocatalator2d:mu=1.1, autocatalator3d:mu=1.1,kappa=2")->required();
    simulate->add_option("--eps", eps)->check(CLI::PositiveNumber);
    simulate->add_option("--t-end", t_end)->check(CLI::PositiveNumber);
    simulate->add_option("--x0", x0, "comma-separated initial state");
    simulate->add_option("--method", method)->check(CLI::IsMember({"explicit", "implicit"}));
    simulate->add_option("--time-scale", scale)->check(CLI::IsMember({"fast", "slow"}));
    simulate->add_option("--rtol", rtol)->check(CLI::PositiveNumber);
    simulate->add_option("--atol", atol)->check(CLI::PositiveNumber);
    simulate->add_option("--max-steps", max_steps)->check(CLI::PositiveNumber);
    simulate->add_flag("--reverse", reverse, "integrate the time-reversed field");
    add_output_options(simulate, out);

    double theta = 0.5, x_start = 2.0;
    auto* departure = app.add_subcommand("departure", "first point where x^s y drops below 1 - theta");
    departure->add_option("--s", s)->check(CLI::PositiveNumber);
    departure->add_option("--mu", mu);
    departure->add_option("--eps", eps)->check(CLI::PositiveNumber);
    departure->add_option("--theta", theta);
    departure->add_option("--x-start", x_start);
    add_output_options(departure, out);

    std::string eps_grid = "1e-7:1e-4:7";
    auto* scaling = app.add_subcommand("scaling-fit", "log-log fit of departure points against eps");
    scaling->add_option("--s", s)->check(CLI::PositiveNumber);
    scaling->add_option("--mu", mu);
    scaling->add_option("--eps-decades", eps_grid, "lo:hi:n log-spaced");
    scaling->add_option("--theta", theta);
    scaling->add_option("--x-start", x_start);
    add_output_options(scaling, out);

    std::string r1_grid = "1e-8:1e-2:13";
    auto* optimality = app.add_subcommand("optimality", "normal multiplier of the modified blow-up as r1 -> 0");
    optimality->add_option("--s", s)->check(CLI::PositiveNumber);
    optimality->add_option("--mu", mu);
    optimality->add_option("--alpha1", alpha1);
    optimality->add_option("--alpha2", alpha2);
    optimality->add_option("--r1-decades", r1_grid, "lo:hi:n log-spaced");
    add_output_options(optimality, out);

    double lc_mu = 1.1, lc_eps = 0.01, section_x = 2.0;
    std::string amp_list;
    auto* limit = app.add_subcommand("limit-cycle", "autocatalator relaxation cycle via a section return map");
    limit->add_option("--mu", lc_mu)->check(CLI::PositiveNumber);
    limit->add_option("--eps", lc_eps)->check(CLI::PositiveNumber);
    limit->add_option("--section-x", section_x);
    limit->add_option("--method", method)->check(CLI::IsMember({"explicit", "implicit"}));
    limit->add_option("--amplitude-eps", amp_list, "comma-separated eps values for the max-x scaling fit");
    limit->add_flag("--reverse", reverse, "time-reversed control");
    add_output_options(limit, out);

    std::vector<int> only;
    bool quiet = false;
    auto* verify = app.add_subcommand("verify", "run the acceptance checks; exit 0 only if all pass");
    verify->add_option("--only", only, "criterion numbers to run")->delimiter(',')->check(CLI::Range(1, 10));
    verify->add_flag("--quiet", quiet, "suppress per-check lines on stderr");
    add_output_options(verify, out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    current = sub->get_name();
    try {
        json doc;
        if (sub == series) doc = cmd_series(s, mu, order);
        else if (sub == blowup) doc = cmd_blowup(s, mu, weights, alpha1, alpha2, chart);
        else if (sub == cmcmd) doc = cmd_center_manifold(s, mu, cm_order);
        else if (sub == transport) doc = cmd_transport(s, mu, cm_order);
        else if (sub == simulate) doc = cmd_simulate(model, eps, t_end, x0, method, scale, rtol, atol, max_steps, reverse);
        else if (sub == departure) doc = cmd_departure(s, mu, eps, theta, x_start);
        else if (sub == scaling) doc = cmd_scaling_fit(s, mu, eps_grid, theta, x_start);
        else if (sub == optimality) doc = cmd_optimality(s, mu, alpha1, alpha2, r1_grid);
        else if (sub == limit) doc = cmd_limit_cycle(lc_mu, lc_eps, section_x, method, amp_list, reverse);
        else if (sub == verify) {
            auto checks = run_acceptance(worker_count(), only);
            if (!quiet)
                for (const auto& c : checks) std::cerr << format_check(c) << '\n';
            doc = acceptance_document(checks);
            emit(doc, out);
            return doc["verdict"] == "pass" ? 0 : 1;
        }
        emit(doc, out);
        return 0;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << sub->help();
        return 2;
    } catch (const std::exception& e) {
        std::string kind = dynamic_cast<const ExperimentError*>(&e)    ? "experiment"
                           : dynamic_cast<const DomainError*>(&e)      ? "domain"
                           : dynamic_cast<const StructuralError*>(&e)  ? "structural"
                           : dynamic_cast<const UnsupportedError*>(&e) ? "unsupported"
                                                                        : "runtime";
        std::cout << error_document(current, kind, e.what()).dump(2) << '\n';
        return 1;
    }
}
