#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shb/linalg.hpp"
#include "shb/problem.hpp"
#include "shb/sketch.hpp"

namespace shb {

enum class Metric : unsigned {
    L2Error = 1u << 0,
    FValue = 1u << 1,
    CesaroF = 1u << 2,
    IterateSnapshot = 1u << 3,
};

class MetricSet {
public:
    constexpr MetricSet() = default;
    constexpr MetricSet(std::initializer_list<Metric> metrics) {
        for (Metric m : metrics) bits_ |= static_cast<unsigned>(m);
    }
    static constexpr MetricSet all() {
        return {Metric::L2Error, Metric::FValue, Metric::CesaroF, Metric::IterateSnapshot};
    }
    /// Comma-separated names: l2_error, f_value, cesaro_f, iterate_snapshot.
    static MetricSet parse(std::string_view text);

    constexpr bool has(Metric m) const { return (bits_ & static_cast<unsigned>(m)) != 0; }
    constexpr MetricSet with(Metric m) const {
        MetricSet out = *this;
        out.bits_ |= static_cast<unsigned>(m);
        return out;
    }
    std::string describe() const;

    friend constexpr bool operator==(MetricSet, MetricSet) = default;

private:
    unsigned bits_ = 0;
};

struct SolverParams {
    double omega = 1.0;
    double beta = 0.0;
    std::size_t max_iter = 1000;
    std::uint64_t seed = 0;
    std::size_t record_every = 1;
    MetricSet metrics{Metric::L2Error, Metric::FValue, Metric::CesaroF};

    void validate() const;
};

struct TracePoint {
    std::size_t k = 0;
    double l2_error = 0.0;           // ‖x_k − x*‖²
    double f_value = 0.0;            // f(x_k)
    std::optional<double> cesaro_f;  // f(x̂_k), absent at k = 0
    double elapsed_seconds = 0.0;
};

struct RunTrace {
    std::vector<TracePoint> points;
    std::vector<Vector> snapshots;  // x_k at each recorded point, if requested
    Vector final_iterate;
    SolverParams params;
};

/// Running sum of iterates; average() is x̂ = sum / count.
class CesaroState {
public:
    explicit CesaroState(std::size_t dim) : sum_(dim, 0.0) {}

    void add(std::span<const double> x);
    Vector average() const;
    std::size_t count() const noexcept { return count_; }

private:
    Vector sum_;
    std::size_t count_ = 0;
};

/// x_k − ω·grad + β·(x_k − x_prev), evaluated in that order per coordinate.
Vector shb_step(std::span<const double> x_k, std::span<const double> x_prev,
                std::span<const double> grad, double omega, double beta);

/// Quantities shared by every run on one (problem, distribution, x0).
struct RunSetup {
    Vector x0;
    Vector x_star;      // projection of x0 onto the solution set; empty if not needed
    ExpectedH expected_h;
    double init_sq_dist = 0.0;
    double f0 = 0.0;
};

RunSetup prepare_run(const Problem& problem, const SketchDistribution& dist,
                     std::span<const double> x0, MetricSet metrics,
                     std::size_t mc_samples = kDefaultMcSamples);

inline constexpr double kDivergenceThreshold = 1e30;

/// One SHB trajectory. x1 = x0, so the first update carries no momentum.
/// Throws NonFinite (position = iteration) if an iterate leaves the finite range.
RunTrace run(const Problem& problem, const SketchDistribution& dist,
             const SolverParams& params, std::span<const double> x0);
RunTrace run(const Problem& problem, const SketchDistribution& dist,
             const SolverParams& params, const RunSetup& setup,
             std::uint64_t stream_id = 0);

struct EnsemblePoint {
    std::size_t k = 0;
    double l2_mean = 0.0;           // mean of ‖x_k − x*‖²
    double f_mean = 0.0;            // mean of f(x_k)
    std::optional<double> cesaro_mean;
    std::optional<double> l1;       // ‖mean of (x_k − x*)‖²
};

struct EnsembleStats {
    std::vector<EnsemblePoint> points;
    std::size_t replications = 0;
    SolverParams params;
    double init_sq_dist = 0.0;
    double f0 = 0.0;
    double x_star_sq_norm = 0.0;
};

/// Thread count from SHB_THREADS, else hardware concurrency.
std::size_t default_thread_count();

/// Replication r runs on stream derive(params.seed, r). Aggregation happens in
/// replication order after all runs finish.
EnsembleStats run_ensemble(const Problem& problem, const SketchDistribution& dist,
                           const SolverParams& params, std::span<const double> x0,
                           std::size_t replications, std::size_t threads = 0);
EnsembleStats run_ensemble(const Problem& problem, const SketchDistribution& dist,
                           const SolverParams& params, const RunSetup& setup,
                           std::size_t replications, std::size_t threads = 0);

}  // namespace shb
