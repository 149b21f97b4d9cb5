// shb: stochastic heavy ball experiments on consistent linear systems.
//
//   shb gen     --rows 300 --cols 100 --seed 7 --out problem.json
//   shb analyze --input problem.json --omega 1
//   shb solve   --input problem.json --omega 1 --beta 0.4 --iters 20000 --out trace.csv
//   shb sweep   --input problem.json --betas 0,0.3,0.4,0.5 --out sweep.csv
//   shb verify  --input problem.json --beta 0.05 --reps 1000 --iters 2000 --out report.json

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shb/error.hpp"
#include "shb/harness.hpp"
#include "shb/io.hpp"
#include "shb/problem.hpp"
#include "shb/sketch.hpp"
#include "shb/solver.hpp"
#include "shb/theory.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitVerifyFailed = 3;

struct ProblemArgs {
    std::string input;
    std::string format;
    std::string sketch = "row";
    std::string x0_path;
    std::uint64_t seed = 0;
    std::size_t mc_samples = shb::kDefaultMcSamples;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--input", input, "Problem file (LIBSVM, CSV or bundle manifest)")
            ->required();
        cmd.add_option("--format", format, "Input format: libsvm | csv | bundle (default: by extension)")
            ->check(CLI::IsMember({"libsvm", "csv", "bundle"}));
        cmd.add_option("--sketch", sketch, "row | block:<n> | gaussian:<n>");
        cmd.add_option("--x0", x0_path, "Starting point file (default: zero vector)");
        cmd.add_option("--seed", seed, "Master seed for sampling and planted solutions");
        cmd.add_option("--mc-samples", mc_samples, "Monte Carlo draws for E[H] estimates");
    }

    shb::Problem load() const {
        const auto fmt = format.empty() ? shb::infer_input_format(input)
                                        : shb::parse_input_format(format);
        return shb::load_problem(input, fmt, seed);
    }

    shb::Vector start(const shb::Problem& p) const {
        if (x0_path.empty()) return shb::Vector(p.cols(), 0.0);
        return shb::read_vector(x0_path);
    }
};

struct RunArgs {
    double omega = 1.0;
    double beta = 0.0;
    std::size_t iters = 1000;
    std::size_t record_every = 1;
    std::string metrics = "l2_error,f_value,cesaro_f";

    void add_to(CLI::App& cmd, bool with_beta) {
        cmd.add_option("--omega", omega, "Stepsize");
        if (with_beta) cmd.add_option("--beta", beta, "Momentum");
        cmd.add_option("--iters", iters, "Iteration budget");
        cmd.add_option("--record-every", record_every, "Record metrics every n iterations");
        cmd.add_option("--metrics", metrics,
                       "Comma list of l2_error,f_value,cesaro_f,iterate_snapshot");
    }

    shb::SolverParams params(std::uint64_t seed) const {
        shb::SolverParams p;
        p.omega = omega;
        p.beta = beta;
        p.max_iter = iters;
        p.record_every = record_every;
        p.seed = seed;
        p.metrics = shb::MetricSet::parse(metrics);
        return p;
    }
};

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::exception&) {
            throw shb::Error(shb::Errc::InvalidArgument, "bad number '" + part + "' in list");
        }
    }
    return out;
}

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty() || out_path == "-") {
        std::cout << content;
    } else {
        shb::write_file_atomically(out_path, content);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic heavy ball solver and convergence harness"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a Gaussian problem with a planted solution");
    std::size_t gen_rows = 0, gen_cols = 0;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--rows", gen_rows, "Number of equations")->required();
    gen->add_option("--cols", gen_cols, "Number of unknowns")->required();
    gen->add_option("--seed", gen_seed, "Seed");
    gen->add_option("--out", gen_out, "Bundle manifest path (.json)")->required();

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Spectrum and rate constants");
    ProblemArgs analyze_problem;
    analyze_problem.add_to(*analyze);
    std::vector<double> analyze_omegas{1.0};
    std::string analyze_out;
    analyze->add_option("--omega", analyze_omegas, "Stepsizes to report (repeatable)");
    analyze->add_option("--out", analyze_out, "JSON output path (default: stdout)");

    // solve
    auto* solve = app.add_subcommand("solve", "Run SHB once and write a trace");
    ProblemArgs solve_problem;
    RunArgs solve_run;
    std::string solve_out;
    solve_problem.add_to(*solve);
    solve_run.add_to(*solve, true);
    solve->add_option("--out", solve_out, "Trace path (.csv or .json)")->required();

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Compare several (omega, beta) pairs");
    ProblemArgs sweep_problem;
    RunArgs sweep_run;
    std::string sweep_betas, sweep_out;
    std::vector<double> sweep_omegas{1.0};
    std::size_t sweep_reps = 1;
    sweep_problem.add_to(*sweep);
    sweep_run.add_to(*sweep, false);
    sweep->remove_option(sweep->get_option("--omega"));
    sweep->add_option("--omega", sweep_omegas, "Stepsizes (repeatable)");
    sweep->add_option("--betas", sweep_betas, "Comma-separated momentum values")->required();
    sweep->add_option("--reps", sweep_reps, "Replications averaged per pair");
    sweep->add_option("--out", sweep_out, "Long-format CSV; summary goes to <stem>_summary.csv")
        ->required();

    // verify
    auto* verify = app.add_subcommand("verify", "Monte Carlo check of the convergence guarantees");
    ProblemArgs verify_problem;
    RunArgs verify_run;
    std::size_t verify_reps = 1000;
    std::string verify_checks, verify_choice, verify_out;
    verify_problem.add_to(*verify);
    verify_run.add_to(*verify, true);
    verify->add_option("--reps", verify_reps, "Replications (at least 100)");
    verify->add_option("--checks", verify_checks, "Comma list of l2,cesaro,l1 (default: all that apply)");
    verify->add_option("--l1-choice", verify_choice,
                       "Use accelerated parameters: unit_stepsize | inv_lmax (overrides omega/beta)");
    verify->add_option("--out", verify_out, "JSON report path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*gen) {
            const shb::Problem p = shb::gen_problem(gen_rows, gen_cols, gen_seed);
            shb::write_bundle(gen_out, p, gen_seed);
            std::cout << "wrote " << gen_out << " (" << gen_rows << "x" << gen_cols << ")\n";
            return kExitOk;
        }

        if (*analyze) {
            const shb::Problem p = analyze_problem.load();
            const auto dist = shb::SketchDistribution::parse(analyze_problem.sketch, p.a);
            shb::AnalyzeOptions opts;
            opts.omegas = analyze_omegas;
            opts.mc_samples = analyze_problem.mc_samples;
            opts.seed = analyze_problem.seed;
            emit(analyze_out, shb::analyze(p, dist, opts).dump(2) + "\n");
            return kExitOk;
        }

        if (*solve) {
            const shb::Problem p = solve_problem.load();
            const auto dist = shb::SketchDistribution::parse(solve_problem.sketch, p.a);
            const auto x0 = solve_problem.start(p);
            try {
                const auto result = shb::solve(p, dist, solve_run.params(solve_problem.seed), x0,
                                               solve_out, shb::infer_output_format(solve_out));
                const auto& last = result.rows.back();
                std::cout << "k=" << last.k << " l2_error=" << last.l2_error_raw
                          << " f=" << last.f_value << " -> " << solve_out << "\n";
            } catch (const shb::Error& e) {
                if (e.code() != shb::Errc::NonFinite) throw;
                std::cerr << "shb solve: " << e.what() << "\n";
                return kExitDiverged;
            }
            return kExitOk;
        }

        if (*sweep) {
            const shb::Problem p = sweep_problem.load();
            const auto dist = shb::SketchDistribution::parse(sweep_problem.sketch, p.a);
            std::vector<shb::SweepPair> pairs;
            for (double omega : sweep_omegas)
                for (double beta : parse_list(sweep_betas)) pairs.push_back({omega, beta});
            const auto result = shb::sweep(p, dist, pairs, sweep_run.params(sweep_problem.seed),
                                           sweep_problem.start(p), sweep_reps);
            std::ostringstream long_csv, summary_csv;
            shb::write_sweep_long_csv(long_csv, result.records);
            shb::write_sweep_summary_csv(summary_csv, result.summary);
            fs::path summary_path = sweep_out;
            summary_path.replace_filename(summary_path.stem().string() + "_summary.csv");
            shb::write_file_atomically(sweep_out, long_csv.str());
            shb::write_file_atomically(summary_path, summary_csv.str());
            std::cout << summary_csv.str();
            return kExitOk;
        }

        if (*verify) {
            const shb::Problem p = verify_problem.load();
            const auto dist = shb::SketchDistribution::parse(verify_problem.sketch, p.a);
            auto params = verify_run.params(verify_problem.seed);
            if (!verify_choice.empty()) {
                const auto s = shb::hessian_spectrum(p.a, dist, verify_problem.mc_samples,
                                                     verify_problem.seed);
                const auto l1 = shb::l1_params(shb::parse_l1_choice(verify_choice),
                                               s.lambda_min_plus, s.lambda_max);
                params.omega = l1.omega;
                params.beta = l1.beta;
            }
            shb::VerifyOptions opts;
            opts.replications = verify_reps;
            if (!verify_checks.empty()) {
                opts.check_l2 = opts.check_cesaro = opts.check_l1 = false;
                std::stringstream ss(verify_checks);
                for (std::string c; std::getline(ss, c, ',');) {
                    if (c == "l2") opts.check_l2 = true;
                    else if (c == "cesaro") opts.check_cesaro = true;
                    else if (c == "l1") opts.check_l1 = true;
                    else throw shb::Error(shb::Errc::InvalidArgument, "unknown check '" + c + "'");
                }
            }
            const auto report = shb::verify(p, dist, params, verify_problem.start(p), opts);
            emit(verify_out, report.to_json().dump(2) + "\n");
            std::cerr << "verification " << (report.passed() ? "passed" : "FAILED") << "\n";
            return report.passed() ? kExitOk : kExitVerifyFailed;
        }
    } catch (const shb::Error& e) {
        std::cerr << "shb: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "shb: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}
