#include "ucm/acceptance.hpp"
#include "ucm/experiments.hpp"
#include "ucm/io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ucm;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CliRun {
    int code;
    std::string out;
};

CliRun run_cli(const std::string& args) {
    auto dir = std::filesystem::temp_directory_path();
    auto out = dir / "ucm_cli_test_stdout.txt";
    std::string cmd = std::string(UCM_CLI_PATH) + " " + args + " > " + out.string() + " 2>/dev/null";
    int status = std::system(cmd.c_str());
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, read_file(out)};
}

}  // namespace

TEST(LinearAlgebra, PivotedSolveMatchesKnownSolution) {
    // Needs row swaps at two elimination steps.
    std::vector<double> a{0, 2, 1,
                          1, 1, 0,
                          3, 0, 1};
    std::vector<std::size_t> piv;
    ASSERT_TRUE(detail::lu_factor(a, piv, 3));
    std::vector<double> x{1, -2, 3};
    std::vector<double> b{0 * 1 + 2 * -2 + 1 * 3, 1 * 1 + 1 * -2 + 0, 3 * 1 + 0 + 1 * 3};
    detail::lu_solve(a, piv, 3, b);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(b[i], x[i], 1e-14);
}

TEST(Fitting, RecoversExactLine) {
    std::vector<double> x{1, 2, 3, 4, 5}, y;
    for (double v : x) y.push_back(3 - 0.5 * v);
    auto f = fit_line(x, y);
    EXPECT_NEAR(f.slope, -0.5, 1e-14);
    EXPECT_NEAR(f.intercept, 3, 1e-13);
    EXPECT_NEAR(f.r2, 1, 1e-14);
    EXPECT_NEAR(f.stderr_slope, 0, 1e-12);
}

TEST(Fitting, LogGridSpansDecades) {
    auto g = log_grid(1e-6, 1e-2, 5);
    ASSERT_EQ(g.size(), 5u);
    EXPECT_NEAR(g[0], 1e-6, 1e-20);
    EXPECT_NEAR(g[2], 1e-4, 1e-18);
    EXPECT_NEAR(g[4], 1e-2, 1e-16);
    EXPECT_THROW(log_grid(1e-2, 1e-6, 5), ParameterError);
}

TEST(Workers, ParallelMapKeepsOrderAndCapturesErrors) {
    std::vector<int> in{1, 2, 3, 4, 5, 6, 7};
    auto out = parallel_map(in, [](int v) {
        if (v == 4) throw std::runtime_error("four");
        return v * v;
    }, 3);
    ASSERT_EQ(out.size(), in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] == 4) {
            EXPECT_FALSE(out[i].value);
            EXPECT_EQ(out[i].error, "four");
        } else {
            EXPECT_EQ(*out[i].value, in[i] * in[i]);
        }
    }
}

TEST(Workers, CountFromEnvironment) {
    ::setenv("UCM_WORKERS", "3", 1);
    EXPECT_EQ(worker_count(), 3u);
    ::setenv("UCM_WORKERS", "0", 1);
    EXPECT_GE(worker_count(), 1u);
    ::unsetenv("UCM_WORKERS");
    EXPECT_GE(worker_count(), 1u);
}

TEST(Departure, CriterionHitAtThreshold) {
    auto d = departure_point(2, Rational(-1), 1e-5, 0.5);
    EXPECT_NEAR(d.criterion, 0.5, 1e-8);
    EXPECT_NEAR(std::pow(d.x, 2) * d.y, 0.5, 1e-8);
    EXPECT_GT(d.x, 2.0);
    EXPECT_GT(d.y, 0.0);
}

TEST(Departure, LargerThetaLeavesLater) {
    auto a = departure_point(1, Rational(-1), 1e-5, 0.3);
    auto b = departure_point(1, Rational(-1), 1e-5, 0.7);
    EXPECT_LT(a.x, b.x);
    EXPECT_GT(a.y, b.y);
}

TEST(Departure, RejectsBadParameters) {
    EXPECT_THROW(departure_point(1, Rational(-1), 1e-5, 1.5), ParameterError);
    EXPECT_THROW(departure_point(1, Rational(-1), -1e-5, 0.5), ParameterError);
    EXPECT_THROW(departure_point(0, Rational(-1), 1e-5, 0.5), ParameterError);
}

class ScalingSlopes : public ::testing::TestWithParam<int> {};

TEST_P(ScalingSlopes, MatchExponents) {
    int s = GetParam();
    auto r = scaling_fit(s, Rational(-1), log_grid(1e-7, 1e-4, 7), 0.5);
    EXPECT_EQ(r.successes(), 7u);
    EXPECT_NEAR(r.fit_x.slope, -1.0 / (s + 1), 0.05);
    EXPECT_NEAR(r.fit_y.slope, static_cast<double>(s) / (s + 1), 0.05);
    EXPECT_GT(r.fit_x.r2, 0.999);
}

INSTANTIATE_TEST_SUITE_P(PowerLaw, ScalingSlopes, ::testing::Values(1, 2, 3));

TEST(Scaling, NeedsThreeDecades) {
    EXPECT_THROW(scaling_fit(1, Rational(-1), log_grid(1e-5, 1e-4, 6), 0.5), ParameterError);
    EXPECT_THROW(scaling_fit(1, Rational(-1), log_grid(1e-7, 1e-4, 4), 0.5), ParameterError);
}

TEST(Optimality, UnmodifiedWeightsGiveConstantMultiplier) {
    auto r = optimality_probe(2, Rational(-1), Rational(0), Rational(0), log_grid(1e-8, 1e-2, 13));
    ASSERT_TRUE(r.exact_beta);
    EXPECT_EQ(*r.exact_beta, Rational(0));
    EXPECT_EQ(r.exact_constant, Rational(-4));
    EXPECT_NEAR(r.beta(), 0, 1e-9);
}

TEST(Optimality, ExactExponentMatchesFit) {
    struct Case {
        int s;
        Rational a1, a2, beta;
    };
    for (const auto& c : {Case{1, Rational(0), Rational(1, 10), Rational(3, 10)}, Case{2, Rational(0), Rational(1, 10), Rational(1, 4)},
                          Case{2, Rational(1, 10), Rational(1, 10), Rational(1, 20)}, Case{1, Rational(1, 10), Rational(0), Rational(-1, 10)}}) {
        auto r = optimality_probe(c.s, Rational(-1), c.a1, c.a2, log_grid(1e-8, 1e-2, 13));
        ASSERT_TRUE(r.exact_beta);
        EXPECT_EQ(*r.exact_beta, c.beta) << "s=" << c.s;
        EXPECT_NEAR(r.beta(), to_double(c.beta), 1e-6);
    }
}

TEST(Optimality, RejectsShortGridAndLargeShifts) {
    EXPECT_THROW(optimality_probe(1, Rational(-1), Rational(0), Rational(1, 10), log_grid(1e-4, 1e-2, 5)), ParameterError);
    EXPECT_THROW(optimality_probe(1, Rational(-1), Rational(1, 5), Rational(1, 5), log_grid(1e-8, 1e-2, 13)), ParameterError);
}

TEST(LimitCycle, AttractingCycleOnSection) {
    auto r = find_limit_cycle(1.1, 0.01);
    ASSERT_TRUE(r.converged) << r.diagnostic;
    EXPECT_TRUE(r.attracting());
    EXPECT_LT(r.closure_error, 1e-6);
    EXPECT_GT(r.period, 0);
    EXPECT_GT(r.max_x, 2.0);
    EXPECT_NEAR(r.cycle.final_state()[0], 2.0, 1e-8);
}

TEST(LimitCycle, ReversedTimeHasNoAttractingCycle) {
    LimitCycleOptions opt;
    opt.reverse_time = true;
    auto r = find_limit_cycle(1.1, 0.01, opt);
    EXPECT_FALSE(r.attracting());
    EXPECT_FALSE(r.diagnostic.empty());
}

TEST(LimitCycle, AmplitudeGrowsAsEpsShrinks) {
    auto a = amplitude_scaling(1.1, {0.02, 0.01});
    ASSERT_EQ(a.cycles.size(), 2u);
    EXPECT_GT(a.cycles[1].max_x, a.cycles[0].max_x);
    EXPECT_LT(a.fit.slope, 0);
}

TEST(Autonomy, SpectralRadiusDecays) {
    auto r = asymptotic_autonomy_check(1, false, Rational(-1), 1e4);
    EXPECT_TRUE(r.v2_decays);
    EXPECT_TRUE(r.envelope_decreasing);
    EXPECT_LT(r.envelope.slope, -0.5);
    EXPECT_LT(r.final_radius, 1e-2);
    EXPECT_THROW(asymptotic_autonomy_check(0, false, Rational(-1), 1e4), ParameterError);
}

TEST(Documents, ScalingDocumentValidatesAndExports) {
    auto doc = scaling_document(scaling_fit(1, Rational(-1), log_grid(1e-7, 1e-4, 7), 0.5));
    EXPECT_TRUE(validate_document(doc).empty());
    EXPECT_EQ(doc["schema_version"], schema_version);
    EXPECT_EQ(doc["verdict"], "pass");
    EXPECT_NEAR(doc["fit"]["slope"].get<double>(), -0.5, 0.05);
    auto round = json::parse(doc.dump());
    EXPECT_TRUE(validate_document(round).empty());
    auto csv = points_csv(doc);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
    auto gp = gnuplot_script(doc, "points.csv", default_plot(doc));
    EXPECT_NE(gp.find("points.csv"), std::string::npos);
    EXPECT_NE(gp.find("logscale"), std::string::npos);
}

TEST(Documents, ValidatorRejectsMalformed) {
    json bad = make_document("x", json::object(), json::array(), nullptr, "pass");
    EXPECT_TRUE(validate_document(bad).empty());
    bad["verdict"] = "maybe";
    EXPECT_FALSE(validate_document(bad).empty());
    bad.erase("verdict");
    EXPECT_FALSE(validate_document(bad).empty());
    EXPECT_FALSE(validate_document(json::array()).empty());
}

TEST(Documents, ErrorDocumentCarriesMessage) {
    auto e = error_document("simulate", "runtime", "boom");
    EXPECT_EQ(e["verdict"], "error");
    EXPECT_TRUE(validate_document(e).empty());
}

TEST(Acceptance, StructuralChecksPass) {
    auto checks = run_acceptance(1, {1, 2, 4, 5});
    ASSERT_EQ(checks.size(), 4u);
    for (const auto& c : checks) EXPECT_TRUE(c.passed) << format_check(c);
    EXPECT_EQ(acceptance_document(checks)["verdict"], "pass");
}

TEST(Cli, SeriesProducesValidDocument) {
    auto r = run_cli("series --s 2 --order 3");
    ASSERT_EQ(r.code, 0);
    auto doc = json::parse(r.out);
    EXPECT_TRUE(validate_document(doc).empty());
    EXPECT_EQ(doc["experiment"], "series");
}

TEST(Cli, WritesCsvAndGnuplot) {
    auto dir = std::filesystem::temp_directory_path() / "ucm_cli_test";
    std::filesystem::create_directories(dir);
    auto gp = dir / "fit.gp";
    auto r = run_cli("scaling-fit --s 1 --out " + (dir / "fit.json").string() + " --gnuplot " + gp.string());
    ASSERT_EQ(r.code, 0);
    EXPECT_TRUE(validate_document(json::parse(read_file(dir / "fit.json"))).empty());
    EXPECT_TRUE(std::filesystem::exists(dir / "fit.csv"));
    EXPECT_NE(read_file(gp).find("fit.csv"), std::string::npos);
}

TEST(Cli, InvalidArgumentsExitTwo) {
    EXPECT_EQ(run_cli("").code, 2);
    EXPECT_EQ(run_cli("nosuchcommand").code, 2);
    EXPECT_EQ(run_cli("series --s 0").code, 2);
    EXPECT_EQ(run_cli("simulate --t-end 1").code, 2);
    EXPECT_EQ(run_cli("simulate --model nope --t-end 1").code, 2);
    EXPECT_EQ(run_cli("scaling-fit --eps-decades 1e-7:x:3").code, 2);
    EXPECT_EQ(run_cli("departure --theta 2").code, 2);
}

TEST(Cli, RuntimeFailureExitsOneWithErrorDocument) {
    auto r = run_cli("simulate --model power-law:s=1,mu=-1 --t-end 100 --max-steps 3");
    EXPECT_EQ(r.code, 1);
    auto doc = json::parse(r.out);
    EXPECT_EQ(doc["verdict"], "error");
}

TEST(Cli, VerifySubsetExitsZero) {
    auto r = run_cli("verify --only 1,2 --quiet");
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(json::parse(r.out)["verdict"], "pass");
}
