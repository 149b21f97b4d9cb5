#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "shb/error.hpp"
#include "shb/harness.hpp"
#include "shb/problem.hpp"
#include "support/csv.hpp"

using namespace shb;
namespace fs = std::filesystem;

namespace {

template <class F>
Errc code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no shb::Error thrown";
    return Errc::Io;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("shb_harness_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Problem toy() {
    Problem p;
    p.a = Matrix::identity(2);
    p.b = {1, 2};
    p.source = "toy";
    return p;
}

SolverParams params_with(double omega, double beta, std::size_t iters, std::uint64_t seed = 0) {
    SolverParams p;
    p.omega = omega;
    p.beta = beta;
    p.max_iter = iters;
    p.seed = seed;
    return p;
}

}  // namespace

TEST(Analyze, ToyReport) {
    const Problem p = toy();
    const auto j = analyze(p, SketchDistribution::row_norm(p.a));
    EXPECT_DOUBLE_EQ(j["spectrum"]["lambda_max"].get<double>(), 0.5);
    EXPECT_DOUBLE_EQ(j["spectrum"]["lambda_min_plus"].get<double>(), 0.5);
    EXPECT_EQ(j["spectrum"]["rank"], 2);
    EXPECT_EQ(j["spectrum"]["exact"], true);
    const auto& step = j["stepsizes"][0];
    EXPECT_DOUBLE_EQ(step["omega"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(step["rate_beta0"]["q"].get<double>(), 0.5);
    EXPECT_NEAR(step["beta_upper_bound"].get<double>(), 0.11237243569579452455, 1e-15);
    EXPECT_EQ(step["predicted_iterations_l2_beta0"], 20);
    ASSERT_EQ(j["l1_choices"].size(), 2u);
    EXPECT_EQ(j["l1_choices"][0]["choice"], "unit_stepsize");
    EXPECT_EQ(j["l1_choices"][1]["choice"], "inv_lmax");
    EXPECT_DOUBLE_EQ(j["l1_choices"][1]["omega"].get<double>(), 2.0);
    EXPECT_EQ(j["l1_norm"], "euclidean");
}

TEST(Analyze, RankDeficient) {
    Problem p = plant_solution(Matrix{{1, 1, 0}, {2, 2, 0}, {0, 0, 1}}, 1, "rank2");
    const auto j = analyze(p, SketchDistribution::row_norm(p.a), {{1.0, 0.5}});
    EXPECT_EQ(j["spectrum"]["rank"], 2);
    EXPECT_EQ(j["spectrum"]["rank_deficient"], true);
    EXPECT_GT(j["spectrum"]["lambda_min_plus"].get<double>(), 0.0);
    EXPECT_EQ(j["stepsizes"].size(), 2u);
}

TEST(Solve, CsvHeaderRowsAndStrictFormat) {
    TempDir dir;
    const Problem p = toy();
    const auto out = dir.path() / "trace.csv";
    const SolveResult r = solve(p, SketchDistribution::row_norm(p.a), params_with(1.0, 0.0, 20, 3),
                                Vector{0, 0}, out, OutputFormat::Csv);
    const std::string text = slurp(out);
    const auto table = strict_csv::parse(text);
    ASSERT_GE(table.size(), 2u);
    std::string header;
    for (std::size_t i = 0; i < table[0].size(); ++i) header += (i ? "," : "") + table[0][i];
    EXPECT_EQ(header, kTraceHeader);
    EXPECT_EQ(table.size(), r.rows.size() + 1);
    EXPECT_EQ(table[1][0], "0");
    EXPECT_EQ(table[1][2], "1");  // rel_error_x0 at k = 0
    EXPECT_EQ(table[1][5], "");   // no Cesàro average yet
    EXPECT_NE(table[1][6], "");   // theory L2 bound: exact system, q = 0.5
    EXPECT_EQ(table[1][7], "");   // Cesàro bound needs k >= 1
    EXPECT_NE(table[2][7], "");

    // Reaches zero error once both rows are sampled.
    auto rng = RandomStream::derive(3, 0);
    bool seen[2] = {false, false};
    std::size_t first = 0;
    for (std::size_t k = 1; k <= 20 && !first; ++k) {
        seen[std::get<RowSample>(draw(SketchDistribution::row_norm(p.a), 2, rng)).index] = true;
        if (seen[0] && seen[1]) first = k;
    }
    ASSERT_GT(first, 0u);
    EXPECT_EQ(table[first + 1][1], "0");
    EXPECT_NE(table[first][1], "0");
}

TEST(Solve, TheoryColumnsOnlyWhenAdmissible) {
    const Problem p = gen_problem(20, 5, 2);
    const auto dist = SketchDistribution::row_norm(p.a);
    const SpectrumInfo s = hessian_spectrum(p.a, dist);
    const TheoryOverlay bad = make_overlay(s, 1.0, 0.6);
    EXPECT_FALSE(bad.l2);
    EXPECT_FALSE(bad.cesaro);
    const TheoryOverlay good = make_overlay(s, 1.0, 0.0);
    EXPECT_TRUE(good.l2);
    EXPECT_TRUE(good.cesaro);

    TempDir dir;
    const SolveResult r = solve(p, dist, params_with(1.0, 0.6, 30, 1), Vector(5, 0.0),
                                dir.path() / "t.csv", OutputFormat::Csv);
    for (const auto& row : r.rows) {
        EXPECT_FALSE(row.theory_l2_bound);
        EXPECT_FALSE(row.theory_cesaro_bound);
    }
}

TEST(Solve, JsonOutput) {
    TempDir dir;
    const Problem p = gen_problem(10, 4, 3);
    solve(p, SketchDistribution::row_norm(p.a), params_with(1.0, 0.1, 10, 1), Vector(4, 0.0),
          dir.path() / "t.json", OutputFormat::Json);
    const auto j = nlohmann::json::parse(slurp(dir.path() / "t.json"));
    EXPECT_EQ(j["rows"].size(), 11u);
    EXPECT_TRUE(j["rows"][0]["cesaro_f"].is_null());
    EXPECT_EQ(j["rows"][0]["rel_error_x0"], 1.0);
    EXPECT_EQ(j["sketch"], "row");
    for (const char* key : {"k", "l2_error_raw", "rel_error_x0", "rel_error_xstar", "f_value",
                            "cesaro_f", "theory_l2_bound", "theory_cesaro_bound",
                            "elapsed_seconds"}) {
        EXPECT_TRUE(j["rows"][3].contains(key)) << key;
    }
}

TEST(Solve, NoOutputOnDivergence) {
    TempDir dir;
    const Problem p = gen_problem(10, 4, 3);
    const auto out = dir.path() / "t.csv";
    EXPECT_EQ(code_of([&] {
                  solve(p, SketchDistribution::row_norm(p.a), params_with(1.0, 1.5, 100000, 1),
                        Vector(4, 0.0), out, OutputFormat::Csv);
              }),
              Errc::NonFinite);
    EXPECT_FALSE(fs::exists(out));
    EXPECT_TRUE(fs::is_empty(dir.path()));
}

TEST(Sweep, NeedsTwoPairs) {
    const Problem p = toy();
    EXPECT_EQ(code_of([&] {
                  sweep(p, SketchDistribution::row_norm(p.a), {{1.0, 0.0}}, params_with(1, 0, 10),
                        Vector{0, 0});
              }),
              Errc::InvalidArgument);
}

TEST(Sweep, MarksDivergenceAndSummaryIsRecomputable) {
    const Problem p = gen_problem(60, 20, 4);
    auto base = params_with(1.0, 0.0, 3000, 2);
    base.record_every = 10;
    const SweepResult r = sweep(p, SketchDistribution::row_norm(p.a),
                                {{1.0, 0.0}, {1.0, 0.3}, {1.0, 1.2}}, base, Vector(20, 0.0));
    ASSERT_EQ(r.summary.size(), 3u);
    EXPECT_EQ(r.summary[0].status, "ok");
    EXPECT_EQ(r.summary[2].status, "diverged");
    ASSERT_TRUE(r.summary[2].diverged_at);
    EXPECT_GT(*r.summary[2].diverged_at, 0u);
    for (const auto& s : r.summary) {
        if (s.iterations[0] && s.iterations[1]) {
            EXPECT_LE(*s.iterations[0], *s.iterations[1]);
        }
    }

    std::stringstream long_csv;
    write_sweep_long_csv(long_csv, r.records);
    const auto table = strict_csv::parse(long_csv.str());
    EXPECT_EQ(table.size(), r.records.size() + 1);

    long_csv.seekg(0);
    const auto reread = read_sweep_long_csv(long_csv);
    const auto again = summarize_sweep(reread);
    ASSERT_EQ(again.size(), r.summary.size());
    for (std::size_t i = 0; i < again.size(); ++i) {
        EXPECT_EQ(again[i].status, r.summary[i].status);
        EXPECT_EQ(again[i].iterations, r.summary[i].iterations);
        EXPECT_EQ(again[i].diverged_at, r.summary[i].diverged_at);
        EXPECT_EQ(again[i].omega, r.summary[i].omega);
        EXPECT_EQ(again[i].beta, r.summary[i].beta);
    }

    std::stringstream summary;
    write_sweep_summary_csv(summary, r.summary);
    const auto st = strict_csv::parse(summary.str());
    ASSERT_EQ(st.size(), 4u);
    EXPECT_EQ(st[3][3], "diverged");
}

TEST(Sweep, SlowStatus) {
    const Problem p = gen_problem(60, 20, 4);
    const SweepResult r = sweep(p, SketchDistribution::row_norm(p.a), {{1.0, 0.0}, {0.01, 0.0}},
                                params_with(1.0, 0.0, 50, 2), Vector(20, 0.0));
    EXPECT_EQ(r.summary[1].status, "slow");
}

TEST(Sweep, RejectsMalformedLongCsv) {
    std::stringstream bad("pair_id,omega,beta,k,metric,value\r\n0,1,0,x,l2_error_raw,1\r\n");
    EXPECT_EQ(code_of([&] { read_sweep_long_csv(bad); }), Errc::MalformedLine);
    std::stringstream header("nope\r\n");
    EXPECT_EQ(code_of([&] { read_sweep_long_csv(header); }), Errc::MalformedLine);
}

TEST(Verify, ToyNoMomentumBoundIsAttained) {
    // With ω = 1 each RK step zeroes the sampled coordinate, so
    // E‖x_k − x*‖² = 1·P(row 0 unseen) + 4·P(row 1 unseen) = 5·2^-k, which
    // equals q^k (1+δ) ‖x0 − x*‖² with q = 1/2, δ = 0.
    const Problem p = toy();
    const SpectrumInfo s = hessian_spectrum(p.a, SketchDistribution::row_norm(p.a));
    const L2Rate r = l2_rate(1.0, 0.0, s.lambda_min_plus, s.lambda_max);
    for (std::size_t k = 0; k <= 30; ++k) {
        const double exact = k == 0 ? 5.0 : 5.0 * std::pow(0.5, static_cast<double>(k));
        EXPECT_DOUBLE_EQ(l2_envelope(r, k, 5.0, s.lambda_max).l2_bound, exact);
    }
}

TEST(Verify, ToyNoMomentumCesaroAndOrdering) {
    const Problem p = toy();
    VerifyOptions o;
    o.replications = 1000;
    o.check_l2 = false;
    const VerifyReport r =
        verify(p, SketchDistribution::row_norm(p.a), params_with(1.0, 0.0, 30, 5), Vector{0, 0}, o);
    EXPECT_FALSE(r.l2);
    EXPECT_TRUE(r.cesaro_checked);
    EXPECT_TRUE(r.cesaro_ok);
    EXPECT_TRUE(r.l1_below_l2_ok);
    EXPECT_FALSE(r.l1_slope);  // β = 0 is outside the accelerated region
    EXPECT_TRUE(r.passed());
    // At β = 0 the Cesàro bound is ‖x0 − x*‖² / (2ω(2−ω)k).
    for (const auto& c : r.checkpoints) {
        if (c.k == 0) continue;
        ASSERT_TRUE(c.cesaro_bound);
        EXPECT_DOUBLE_EQ(*c.cesaro_bound, 5.0 / (2.0 * c.k));
    }
    const auto j = r.to_json();
    EXPECT_EQ(j["passed"], true);
    EXPECT_TRUE(j["checks"]["l1_rate"].is_null());
    EXPECT_TRUE(j["checks"]["l2_envelope"].is_null());
}

// Known to fail for most seeds: the envelope is attained exactly on this
// problem and the relative slack 3/√R is about one standard error. Seed 5 was
// fixed before the first run. See the project notes.
TEST(Verify, ToyNoMomentumL2EnvelopeWithRelativeSlack) {
    const Problem p = toy();
    VerifyOptions o;
    o.replications = 1000;
    o.check_l2 = true;
    const VerifyReport r =
        verify(p, SketchDistribution::row_norm(p.a), params_with(1.0, 0.0, 30, 5), Vector{0, 0}, o);
    ASSERT_TRUE(r.l2);
    EXPECT_DOUBLE_EQ(r.l2->q, 0.5);
    EXPECT_DOUBLE_EQ(r.l2->delta, 0.0);
    for (const auto& c : r.checkpoints) {
        EXPECT_LE(c.l2_mean, std::pow(0.5, static_cast<double>(c.k)) * 5.0 * (1 + r.slack))
            << "k=" << c.k;
    }
    EXPECT_TRUE(r.l2_ok);
}

TEST(Verify, PreconditionErrors) {
    const Problem p = gen_problem(20, 5, 1);
    const auto dist = SketchDistribution::row_norm(p.a);
    VerifyOptions o;
    o.replications = 99;
    EXPECT_EQ(code_of([&] { verify(p, dist, params_with(1, 0, 10), Vector(5, 0.0), o); }),
              Errc::InsufficientReplications);
    o.replications = 100;
    // β beyond every hypothesis region.
    EXPECT_EQ(code_of([&] { verify(p, dist, params_with(1, 1.0, 10), Vector(5, 0.0), o); }),
              Errc::NotAdmissible);
    o.check_l1 = true;
    EXPECT_EQ(code_of([&] { verify(p, dist, params_with(1, 0.0, 10), Vector(5, 0.0), o); }),
              Errc::NotAdmissible);
}

TEST(FitLogSlope, RecoversGeometricRate) {
    std::vector<std::size_t> ks;
    std::vector<double> v;
    for (std::size_t k = 0; k <= 50; ++k) {
        ks.push_back(k);
        v.push_back(3.0 * std::pow(0.8, static_cast<double>(k)));
    }
    std::size_t used = 0;
    const auto s = fit_log_slope(ks, v, 5, &used);
    ASSERT_TRUE(s);
    EXPECT_NEAR(*s, std::log(0.8), 1e-12);
    EXPECT_EQ(used, 46u);
    EXPECT_FALSE(fit_log_slope({1}, {1.0}, 0));
}

TEST(ExpectedErrorTrajectory, MatchesHeavyBallOnDiagonal) {
    const Matrix w{{0.5, 0}, {0, 0.25}};
    const auto e = expected_error_trajectory(w, Vector{1, 1}, 1.0, 0.0, 3);
    ASSERT_EQ(e.size(), 4u);
    EXPECT_DOUBLE_EQ(e[3][0], 0.125);
    EXPECT_DOUBLE_EQ(e[3][1], std::pow(0.75, 3));
}

TEST(WriteFileAtomically, ReplacesContent) {
    TempDir dir;
    const auto p = dir.path() / "x.txt";
    write_file_atomically(p, "one");
    write_file_atomically(p, "two");
    EXPECT_EQ(slurp(p), "two");
    EXPECT_EQ(std::distance(fs::directory_iterator(dir.path()), fs::directory_iterator{}), 1);
    EXPECT_EQ(code_of([&] { write_file_atomically(dir.path() / "no" / "such" / "x", "y"); }),
              Errc::Io);
}
