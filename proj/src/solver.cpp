#include "shb/solver.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

#include "shb/error.hpp"

namespace shb {

namespace {

struct MetricName {
    Metric metric;
    std::string_view name;
};

constexpr MetricName kMetricNames[] = {
    {Metric::L2Error, "l2_error"},
    {Metric::FValue, "f_value"},
    {Metric::CesaroF, "cesaro_f"},
    {Metric::IterateSnapshot, "iterate_snapshot"},
};

bool should_record(std::size_t k, const SolverParams& p) {
    return k % p.record_every == 0 || k == p.max_iter;
}

// Largest magnitude allowed before an iterate counts as diverged.
bool diverged(std::span<const double> x) {
    return std::any_of(x.begin(), x.end(), [](double v) {
        return !std::isfinite(v) || std::abs(v) > kDivergenceThreshold;
    });
}

}  // namespace

MetricSet MetricSet::parse(std::string_view text) {
    MetricSet out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        const auto token = text.substr(0, comma);
        const auto* hit = std::find_if(std::begin(kMetricNames), std::end(kMetricNames),
                                       [&](const MetricName& m) { return m.name == token; });
        if (hit == std::end(kMetricNames)) {
            throw Error(Errc::InvalidArgument, "unknown metric '" + std::string(token) + "'");
        }
        out = out.with(hit->metric);
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return out;
}

std::string MetricSet::describe() const {
    std::string out;
    for (const auto& m : kMetricNames) {
        if (!has(m.metric)) continue;
        if (!out.empty()) out += ',';
        out += m.name;
    }
    return out;
}

void SolverParams::validate() const {
    if (!(omega > 0.0) || !std::isfinite(omega)) {
        throw Error(Errc::InvalidArgument, "omega must be positive");
    }
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
        throw Error(Errc::InvalidArgument, "beta must be nonnegative");
    }
    if (max_iter < 1) throw Error(Errc::InvalidArgument, "max_iter must be at least 1");
    if (record_every < 1) throw Error(Errc::InvalidArgument, "record_every must be at least 1");
}

void CesaroState::add(std::span<const double> x) {
    if (x.size() != sum_.size()) throw Error(Errc::DimensionMismatch, "CesaroState::add");
    for (std::size_t i = 0; i < x.size(); ++i) sum_[i] += x[i];
    ++count_;
}

Vector CesaroState::average() const {
    if (count_ == 0) throw Error(Errc::InvalidArgument, "Cesàro average of no iterates");
    Vector out(sum_.size());
    const double n = static_cast<double>(count_);
    for (std::size_t i = 0; i < sum_.size(); ++i) out[i] = sum_[i] / n;
    return out;
}

Vector shb_step(std::span<const double> x_k, std::span<const double> x_prev,
                std::span<const double> grad, double omega, double beta) {
    if (x_prev.size() != x_k.size() || grad.size() != x_k.size()) {
        throw Error(Errc::DimensionMismatch, "shb_step: vectors differ in length");
    }
    Vector out(x_k.size());
    for (std::size_t i = 0; i < x_k.size(); ++i) {
        out[i] = x_k[i] - omega * grad[i] + beta * (x_k[i] - x_prev[i]);
    }
    return out;
}

RunSetup prepare_run(const Problem& problem, const SketchDistribution& dist,
                     std::span<const double> x0, MetricSet metrics, std::size_t mc_samples) {
    problem.validate();
    dist.validate(problem.a);
    if (x0.size() != problem.cols()) {
        throw Error(Errc::DimensionMismatch, "x0 has wrong length");
    }
    if (!all_finite(x0)) throw Error(Errc::NonFinite, "x0 must be finite");

    RunSetup setup;
    setup.x0.assign(x0.begin(), x0.end());
    const bool needs_f = metrics.has(Metric::FValue) || metrics.has(Metric::CesaroF);
    const bool needs_x_star = metrics.has(Metric::L2Error) || metrics.has(Metric::IterateSnapshot);
    if (needs_x_star) {
        setup.x_star = project_onto_solutions(x0, problem.a, problem.b);
        setup.init_sq_dist = squared_distance(setup.x0, setup.x_star);
    }
    if (needs_f) {
        setup.expected_h = expected_H(dist, problem.a, mc_samples);
        setup.f0 = f_value(problem.a, problem.b, setup.x0, setup.expected_h);
    }
    return setup;
}

RunTrace run(const Problem& problem, const SketchDistribution& dist, const SolverParams& params,
             std::span<const double> x0) {
    params.validate();
    return run(problem, dist, params, prepare_run(problem, dist, x0, params.metrics));
}

RunTrace run(const Problem& problem, const SketchDistribution& dist, const SolverParams& params,
             const RunSetup& setup, std::uint64_t stream_id) {
    params.validate();
    const auto& a = problem.a;
    const auto& b = problem.b;
    const std::size_t d = a.cols();
    const MetricSet metrics = params.metrics;
    const bool want_l2 = metrics.has(Metric::L2Error);
    const bool want_f = metrics.has(Metric::FValue);
    const bool want_cesaro = metrics.has(Metric::CesaroF);
    const bool want_snapshot = metrics.has(Metric::IterateSnapshot);
    if ((want_l2 || want_snapshot) && setup.x_star.size() != d) {
        throw Error(Errc::InvalidArgument, "run setup lacks the projected solution");
    }
    if ((want_f || want_cesaro) && setup.expected_h.size != a.rows()) {
        throw Error(Errc::InvalidArgument, "run setup lacks E[H]");
    }

    // Row norms are cached for unit-coordinate sampling.
    const bool row_sampling = std::holds_alternative<UnitCoordinate>(dist.variant());
    Vector row_norms;
    if (row_sampling) {
        row_norms.resize(a.rows());
        for (std::size_t i = 0; i < a.rows(); ++i) row_norms[i] = squared_norm(a.row(i));
    }

    auto rng = RandomStream::derive(params.seed, stream_id);
    const auto start = std::chrono::steady_clock::now();

    RunTrace trace;
    trace.params = params;
    Vector x = setup.x0;
    Vector x_prev = setup.x0;
    Vector next(d);
    Vector grad(d);
    CesaroState cesaro(d);

    auto record = [&](std::size_t k) {
        TracePoint pt;
        pt.k = k;
        if (want_l2) pt.l2_error = squared_distance(x, setup.x_star);
        if (want_f) pt.f_value = f_value(a, b, x, setup.expected_h);
        if (want_cesaro && cesaro.count() > 0) {
            pt.cesaro_f = f_value(a, b, cesaro.average(), setup.expected_h);
        }
        pt.elapsed_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        trace.points.push_back(pt);
        if (want_snapshot) trace.snapshots.push_back(x);
    };

    record(0);
    for (std::size_t k = 1; k <= params.max_iter; ++k) {
        // x̂_k averages the iterates entering steps 1..k.
        if (want_cesaro) cesaro.add(x);

        const SketchSample sample = draw(dist, a.rows(), rng);
        if (row_sampling) {
            const std::size_t i = std::get<RowSample>(sample).index;
            row_gradient(a.row(i), b[i], row_norms[i], x, grad);
        } else {
            grad = stoch_grad(a, b, x, sample);
        }
        for (std::size_t j = 0; j < d; ++j) {
            next[j] = x[j] - params.omega * grad[j] + params.beta * (x[j] - x_prev[j]);
        }
        if (diverged(next)) {
            throw Error(Errc::NonFinite,
                        "iterate diverged at iteration " + std::to_string(k) + " (omega=" +
                            std::to_string(params.omega) + ", beta=" + std::to_string(params.beta) +
                            ")",
                        k);
        }
        std::swap(x_prev, x);
        std::swap(x, next);
        if (should_record(k, params)) record(k);
    }
    trace.final_iterate = x;
    return trace;
}

std::size_t default_thread_count() {
    if (const char* env = std::getenv("SHB_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

EnsembleStats run_ensemble(const Problem& problem, const SketchDistribution& dist,
                           const SolverParams& params, std::span<const double> x0,
                           std::size_t replications, std::size_t threads) {
    params.validate();
    const auto setup = prepare_run(problem, dist, x0, params.metrics);
    return run_ensemble(problem, dist, params, setup, replications, threads);
}

EnsembleStats run_ensemble(const Problem& problem, const SketchDistribution& dist,
                           const SolverParams& params, const RunSetup& setup,
                           std::size_t replications, std::size_t threads) {
    if (replications < 1) {
        throw Error(Errc::InsufficientReplications, "replications must be at least 1");
    }
    params.validate();
    if (threads == 0) threads = default_thread_count();
    threads = std::min(threads, replications);

    std::vector<RunTrace> traces(replications);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::size_t failed_at = replications;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (std::size_t r = next++; r < replications; r = next++) {
            try {
                traces[r] = run(problem, dist, params, setup, r);
            } catch (...) {
                // Report the lowest failing replication so the error is deterministic.
                std::lock_guard lock(failure_mutex);
                if (r < failed_at) {
                    failed_at = r;
                    failure = std::current_exception();
                }
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    const MetricSet metrics = params.metrics;
    const std::size_t n_points = traces.front().points.size();
    const std::size_t d = problem.cols();
    const double inv_r = 1.0 / static_cast<double>(replications);

    EnsembleStats stats;
    stats.replications = replications;
    stats.params = params;
    stats.init_sq_dist = setup.init_sq_dist;
    stats.f0 = setup.f0;
    stats.x_star_sq_norm = squared_norm(setup.x_star);
    stats.points.resize(n_points);
    for (std::size_t p = 0; p < n_points; ++p) {
        EnsemblePoint& out = stats.points[p];
        out.k = traces.front().points[p].k;
        double l2 = 0.0, f = 0.0, ces = 0.0;
        bool has_cesaro = true;
        Vector mean_error(metrics.has(Metric::IterateSnapshot) ? d : 0, 0.0);
        for (std::size_t r = 0; r < replications; ++r) {
            const TracePoint& pt = traces[r].points[p];
            l2 += pt.l2_error;
            f += pt.f_value;
            if (pt.cesaro_f) {
                ces += *pt.cesaro_f;
            } else {
                has_cesaro = false;
            }
            if (!mean_error.empty()) {
                const Vector& x = traces[r].snapshots[p];
                for (std::size_t j = 0; j < d; ++j) mean_error[j] += x[j] - setup.x_star[j];
            }
        }
        out.l2_mean = l2 * inv_r;
        out.f_mean = f * inv_r;
        if (metrics.has(Metric::CesaroF) && has_cesaro) out.cesaro_mean = ces * inv_r;
        if (!mean_error.empty()) {
            for (double& v : mean_error) v *= inv_r;
            out.l1 = squared_norm(mean_error);
        }
    }
    return stats;
}

}  // namespace shb
