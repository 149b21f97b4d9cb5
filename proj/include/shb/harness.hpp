#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "shb/linalg.hpp"
#include "shb/problem.hpp"
#include "shb/sketch.hpp"
#include "shb/solver.hpp"
#include "shb/theory.hpp"

namespace shb {

enum class OutputFormat { Csv, Json };

OutputFormat infer_output_format(const std::filesystem::path& path);

// ---------------------------------------------------------------- analyze

struct AnalyzeOptions {
    std::vector<double> omegas{1.0};
    double target_rel_error = 1e-6;
    std::size_t mc_samples = kDefaultMcSamples;
    std::uint64_t seed = 0;
};

/// Spectrum, L2 constants per ω, β upper bounds, the two accelerated L1
/// parameter choices and predicted iteration counts, as JSON.
nlohmann::ordered_json analyze(const Problem& problem, const SketchDistribution& dist,
                       const AnalyzeOptions& options = {});

// ------------------------------------------------------------------ solve

inline constexpr std::string_view kTraceHeader =
    "k,l2_error_raw,rel_error_x0,rel_error_xstar,f_value,cesaro_f,"
    "theory_l2_bound,theory_cesaro_bound,elapsed_seconds";

struct TraceRow {
    std::size_t k = 0;
    double l2_error_raw = 0.0;
    std::optional<double> rel_error_x0;     // absent when x0 = x*
    std::optional<double> rel_error_xstar;  // absent when x* = 0
    double f_value = 0.0;
    std::optional<double> cesaro_f;
    std::optional<double> theory_l2_bound;
    std::optional<double> theory_cesaro_bound;
    double elapsed_seconds = 0.0;
};

/// Theory overlay inputs; bounds are emitted only where their hypotheses hold.
struct TheoryOverlay {
    std::optional<L2Rate> l2;
    double lambda_max = 0.0;
    bool cesaro = false;
};

TheoryOverlay make_overlay(const SpectrumInfo& spectrum, double omega, double beta);

std::vector<TraceRow> trace_rows(const RunTrace& trace, const RunSetup& setup,
                                 const TheoryOverlay& overlay);

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);
nlohmann::ordered_json trace_json(const std::vector<TraceRow>& rows, const SolverParams& params,
                          const std::string& source, const std::string& sketch);

struct SolveResult {
    RunTrace trace;
    std::vector<TraceRow> rows;
};

/// Runs once and writes the trace. Output is written only after the run
/// completes; nothing is left behind on failure.
SolveResult solve(const Problem& problem, const SketchDistribution& dist,
                  const SolverParams& params, std::span<const double> x0,
                  const std::filesystem::path& out, OutputFormat format);

// ------------------------------------------------------------------ sweep

struct SweepPair {
    double omega = 1.0;
    double beta = 0.0;
};

struct SweepRecord {
    std::size_t pair_id = 0;
    double omega = 0.0;
    double beta = 0.0;
    std::size_t k = 0;
    std::string metric;
    double value = 0.0;
};

inline constexpr std::array<double, 3> kSweepThresholds{1e-2, 1e-4, 1e-6};
inline constexpr std::string_view kSweepLongHeader = "pair_id,omega,beta,k,metric,value";
inline constexpr std::string_view kSweepSummaryHeader =
    "pair_id,omega,beta,status,iters_1e-2,iters_1e-4,iters_1e-6,diverged_at";

struct SweepSummaryRow {
    std::size_t pair_id = 0;
    double omega = 0.0;
    double beta = 0.0;
    std::string status;  // "ok", "slow" or "diverged"
    std::array<std::optional<std::size_t>, 3> iterations;
    std::optional<std::size_t> diverged_at;
};

struct SweepResult {
    std::vector<SweepRecord> records;
    std::vector<SweepSummaryRow> summary;
};

/// Runs every pair on the same problem with the same seed, so pairs share
/// sketch draws. Diverging pairs are marked, not fatal. replications > 1
/// averages metrics over an ensemble.
SweepResult sweep(const Problem& problem, const SketchDistribution& dist,
                  const std::vector<SweepPair>& pairs, const SolverParams& base,
                  std::span<const double> x0, std::size_t replications = 1);

/// Recomputes the summary from long-format records alone.
std::vector<SweepSummaryRow> summarize_sweep(const std::vector<SweepRecord>& records);

void write_sweep_long_csv(std::ostream& out, const std::vector<SweepRecord>& records);
std::vector<SweepRecord> read_sweep_long_csv(std::istream& in);
void write_sweep_summary_csv(std::ostream& out, const std::vector<SweepSummaryRow>& rows);

// ----------------------------------------------------------------- verify

inline constexpr std::size_t kMinVerifyReplications = 100;

struct VerifyOptions {
    std::size_t replications = 1000;
    // Unset means "run when the hypotheses hold"; true forces the check and
    // raises NotAdmissible if they do not.
    std::optional<bool> check_l2;
    std::optional<bool> check_cesaro;
    std::optional<bool> check_l1;
    double transient_fraction = 0.1;
    double slope_slack = 0.05;
    std::size_t threads = 0;
};

struct VerifyCheckpoint {
    std::size_t k = 0;
    double l2_mean = 0.0;
    std::optional<double> l2_envelope;
    std::optional<double> cesaro_mean;
    std::optional<double> cesaro_bound;
    std::optional<double> l1;
    std::optional<double> l1_exact;  // ‖E[x_k − x*]‖² from the mean recursion
    bool l2_pass = true;
    bool cesaro_pass = true;
    bool l1_below_l2 = true;
};

struct SlopeFit {
    double slope = 0.0;
    double threshold = 0.0;
    std::size_t points = 0;
    bool pass = false;
};

struct VerifyReport {
    std::vector<VerifyCheckpoint> checkpoints;
    std::size_t replications = 0;
    double slack = 0.0;  // 3/√R
    SolverParams params;
    SpectrumInfo spectrum;
    std::optional<L2Rate> l2;
    bool cesaro_checked = false;
    std::optional<SlopeFit> l1_slope;        // Monte Carlo estimate
    std::optional<SlopeFit> l1_exact_slope;  // exact mean recursion, informational
    bool l2_ok = true;
    bool cesaro_ok = true;
    bool l1_ok = true;
    bool l1_below_l2_ok = true;

    bool passed() const noexcept { return l2_ok && cesaro_ok && l1_ok && l1_below_l2_ok; }
    nlohmann::ordered_json to_json() const;
};

VerifyReport verify(const Problem& problem, const SketchDistribution& dist,
                    const SolverParams& params, std::span<const double> x0,
                    const VerifyOptions& options);

/// Least-squares slope of log(value) against k over points with k ≥ k_min
/// and value > 0.
std::optional<double> fit_log_slope(const std::vector<std::size_t>& ks,
                                    const std::vector<double>& values, std::size_t k_min,
                                    std::size_t* used = nullptr);

/// E[x_k − x*] under SHB: the deterministic heavy-ball recursion on W,
/// evaluated at steps 0..iterations.
std::vector<Vector> expected_error_trajectory(const Matrix& w, std::span<const double> e0,
                                              double omega, double beta,
                                              std::size_t iterations);

/// Writes `content` to `path` via a temporary file and rename.
void write_file_atomically(const std::filesystem::path& path, const std::string& content);

}  // namespace shb
