#include "shb/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unistd.h>

#include "shb/error.hpp"
#include "shb/io.hpp"

namespace shb {

namespace {

namespace fs = std::filesystem;

using nlohmann::ordered_json;

std::string cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

ordered_json nullable(const std::optional<double>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json params_json(const SolverParams& p) {
    ordered_json j;
    j["omega"] = p.omega;
    j["beta"] = p.beta;
    j["max_iter"] = p.max_iter;
    j["seed"] = p.seed;
    j["record_every"] = p.record_every;
    j["metrics"] = p.metrics.describe();
    return j;
}

ordered_json rate_json(const L2Rate& r) {
    ordered_json j;
    j["a1"] = r.a1;
    j["a2"] = r.a2;
    j["q"] = r.q;
    j["delta"] = r.delta;
    j["admissible"] = r.admissible;
    return j;
}

ordered_json iterations_json(std::size_t k) {
    if (k == std::numeric_limits<std::size_t>::max()) return nullptr;
    return k;
}

std::optional<double> ratio(double num, double den) {
    if (den > 0.0) return num / den;
    return std::nullopt;
}

}  // namespace

OutputFormat infer_output_format(const fs::path& path) {
    return path.extension() == ".json" ? OutputFormat::Json : OutputFormat::Csv;
}

void write_file_atomically(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error(Errc::Io, "cannot write " + tmp.string());
        out << content;
        out.close();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error(Errc::Io, "write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(Errc::Io, "cannot move output into " + path.string());
    }
}

// ---------------------------------------------------------------- analyze

ordered_json analyze(const Problem& problem, const SketchDistribution& dist,
             const AnalyzeOptions& options) {
    problem.validate();
    const SpectrumInfo s = hessian_spectrum(problem.a, dist, options.mc_samples, options.seed);
    const double target = options.target_rel_error;

    ordered_json j;
    j["problem"] = {{"rows", problem.rows()}, {"cols", problem.cols()}, {"source", problem.source}};
    j["sketch"] = dist.describe();

    ordered_json spectrum_json;
    spectrum_json["lambda_max"] = s.lambda_max;
    spectrum_json["lambda_min_plus"] = s.lambda_min_plus;
    spectrum_json["rank"] = s.rank;
    spectrum_json["cols"] = problem.cols();
    spectrum_json["rank_deficient"] = s.rank < problem.cols();
    spectrum_json["exact"] = s.exact;
    spectrum_json["expected_h_estimated"] = s.expected_h.estimated;
    spectrum_json["mc_samples"] = s.expected_h.samples;
    spectrum_json["condition_ratio"] = s.lambda_max / s.lambda_min_plus;
    spectrum_json["eigenvalues"] = s.eigenvalues;
    j["spectrum"] = spectrum_json;
    j["target_rel_error"] = target;

    ordered_json steps = ordered_json::array();
    for (double omega : options.omegas) {
        ordered_json e;
        e["omega"] = omega;
        if (!(omega > 0.0 && omega < 2.0)) {
            e["note"] = "outside 0 < omega < 2; no L2 rate";
            steps.push_back(e);
            continue;
        }
        const L2Rate base = l2_rate(omega, 0.0, s.lambda_min_plus, s.lambda_max);
        e["beta_upper_bound"] = beta_upper_bound(omega, s.lambda_min_plus, s.lambda_max);
        e["rate_beta0"] = rate_json(base);
        e["predicted_iterations_l2_beta0"] =
            iterations_json(iterations_to_reach(base.q, 1.0 + base.delta, target));
        e["cesaro_admissible_beta0"] = cesaro_admissible(omega, 0.0);
        steps.push_back(e);
    }
    j["stepsizes"] = steps;

    ordered_json l1 = ordered_json::array();
    for (L1Choice c : {L1Choice::UnitStepsize, L1Choice::InverseLambdaMax}) {
        const L1Params p = l1_params(c, s.lambda_min_plus, s.lambda_max);
        ordered_json e;
        e["choice"] = std::string(to_string(c));
        e["omega"] = p.omega;
        e["beta"] = p.beta;
        e["rate_factor"] = p.rate_factor;
        e["predicted_iterations_l1"] = iterations_json(iterations_to_reach(p.rate_factor, 1.0, target));
        l1.push_back(e);
    }
    j["l1_choices"] = l1;
    j["l1_norm"] = "euclidean";
    j["l1_note"] = "L1 bounds hold up to an unspecified constant; predictions take it as 1";
    return j;
}

// ------------------------------------------------------------------ solve

TheoryOverlay make_overlay(const SpectrumInfo& spectrum, double omega, double beta) {
    TheoryOverlay o;
    o.lambda_max = spectrum.lambda_max;
    if (spectrum.exact && omega > 0.0 && omega < 2.0 && beta >= 0.0) {
        const L2Rate r = l2_rate(omega, beta, spectrum.lambda_min_plus, spectrum.lambda_max);
        if (r.admissible) o.l2 = r;
    }
    o.cesaro = cesaro_admissible(omega, beta);
    return o;
}

std::vector<TraceRow> trace_rows(const RunTrace& trace, const RunSetup& setup,
                                 const TheoryOverlay& overlay) {
    const double x_star_sq = squared_norm(setup.x_star);
    std::vector<TraceRow> rows;
    rows.reserve(trace.points.size());
    for (const TracePoint& pt : trace.points) {
        TraceRow r;
        r.k = pt.k;
        r.l2_error_raw = pt.l2_error;
        r.rel_error_x0 = ratio(pt.l2_error, setup.init_sq_dist);
        r.rel_error_xstar = ratio(pt.l2_error, x_star_sq);
        r.f_value = pt.f_value;
        r.cesaro_f = pt.cesaro_f;
        if (overlay.l2) {
            r.theory_l2_bound =
                l2_envelope(*overlay.l2, pt.k, setup.init_sq_dist, overlay.lambda_max).l2_bound;
        }
        if (overlay.cesaro && pt.k >= 1) {
            r.theory_cesaro_bound = cesaro_bound(trace.params.omega, trace.params.beta, pt.k,
                                                 setup.init_sq_dist, setup.f0);
        }
        r.elapsed_seconds = pt.elapsed_seconds;
        rows.push_back(r);
    }
    return rows;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows) {
    out << kTraceHeader << "\r\n";
    for (const auto& r : rows) {
        out << r.k << ',' << format_number(r.l2_error_raw) << ',' << cell(r.rel_error_x0) << ','
            << cell(r.rel_error_xstar) << ',' << format_number(r.f_value) << ','
            << cell(r.cesaro_f) << ',' << cell(r.theory_l2_bound) << ','
            << cell(r.theory_cesaro_bound) << ',' << format_number(r.elapsed_seconds) << "\r\n";
    }
}

ordered_json trace_json(const std::vector<TraceRow>& rows, const SolverParams& params,
                const std::string& source, const std::string& sketch) {
    ordered_json j;
    j["source"] = source;
    j["sketch"] = sketch;
    j["params"] = params_json(params);
    ordered_json arr = ordered_json::array();
    for (const auto& r : rows) {
        ordered_json e;
        e["k"] = r.k;
        e["l2_error_raw"] = r.l2_error_raw;
        e["rel_error_x0"] = nullable(r.rel_error_x0);
        e["rel_error_xstar"] = nullable(r.rel_error_xstar);
        e["f_value"] = r.f_value;
        e["cesaro_f"] = nullable(r.cesaro_f);
        e["theory_l2_bound"] = nullable(r.theory_l2_bound);
        e["theory_cesaro_bound"] = nullable(r.theory_cesaro_bound);
        e["elapsed_seconds"] = r.elapsed_seconds;
        arr.push_back(std::move(e));
    }
    j["rows"] = std::move(arr);
    return j;
}

SolveResult solve(const Problem& problem, const SketchDistribution& dist,
                  const SolverParams& params, std::span<const double> x0, const fs::path& out,
                  OutputFormat format) {
    params.validate();
    SolverParams p = params;
    p.metrics = p.metrics.with(Metric::L2Error).with(Metric::FValue).with(Metric::CesaroF);
    const RunSetup setup = prepare_run(problem, dist, x0, p.metrics);
    const SpectrumInfo spectrum = hessian_spectrum(problem.a, setup.expected_h);

    SolveResult result;
    result.trace = run(problem, dist, p, setup);
    result.rows = trace_rows(result.trace, setup, make_overlay(spectrum, p.omega, p.beta));

    std::ostringstream body;
    if (format == OutputFormat::Json) {
        body << trace_json(result.rows, p, problem.source, dist.describe()).dump(2) << '\n';
    } else {
        write_trace_csv(body, result.rows);
    }
    write_file_atomically(out, body.str());
    return result;
}

// ------------------------------------------------------------------ sweep

SweepResult sweep(const Problem& problem, const SketchDistribution& dist,
                  const std::vector<SweepPair>& pairs, const SolverParams& base,
                  std::span<const double> x0, std::size_t replications) {
    if (pairs.size() < 2) {
        throw Error(Errc::InvalidArgument, "a sweep needs at least 2 (omega, beta) pairs");
    }
    SolverParams params = base;
    params.metrics = params.metrics.with(Metric::L2Error);
    const RunSetup setup = prepare_run(problem, dist, x0, params.metrics);
    const double x_star_sq = squared_norm(setup.x_star);

    SweepResult result;
    for (std::size_t id = 0; id < pairs.size(); ++id) {
        params.omega = pairs[id].omega;
        params.beta = pairs[id].beta;
        params.validate();
        auto emit = [&](std::size_t k, std::string metric, double value) {
            result.records.push_back({id, params.omega, params.beta, k, std::move(metric), value});
        };
        try {
            const EnsembleStats stats = run_ensemble(problem, dist, params, setup, replications);
            for (const auto& pt : stats.points) {
                emit(pt.k, "l2_error_raw", pt.l2_mean);
                if (auto v = ratio(pt.l2_mean, setup.init_sq_dist)) emit(pt.k, "rel_error_x0", *v);
                if (auto v = ratio(pt.l2_mean, x_star_sq)) emit(pt.k, "rel_error_xstar", *v);
                if (params.metrics.has(Metric::FValue)) emit(pt.k, "f_value", pt.f_mean);
                if (pt.cesaro_mean) emit(pt.k, "cesaro_f", *pt.cesaro_mean);
            }
        } catch (const Error& e) {
            if (e.code() != Errc::NonFinite) throw;
            emit(e.position().value_or(0), "diverged", 1.0);
        }
    }
    result.summary = summarize_sweep(result.records);
    return result;
}

std::vector<SweepSummaryRow> summarize_sweep(const std::vector<SweepRecord>& records) {
    std::map<std::size_t, SweepSummaryRow> rows;
    for (const auto& r : records) {
        auto [it, inserted] = rows.try_emplace(r.pair_id);
        SweepSummaryRow& s = it->second;
        if (inserted) {
            s.pair_id = r.pair_id;
            s.omega = r.omega;
            s.beta = r.beta;
        }
        if (r.metric == "diverged") {
            s.diverged_at = r.k;
        } else if (r.metric == "rel_error_x0") {
            for (std::size_t t = 0; t < kSweepThresholds.size(); ++t) {
                auto& hit = s.iterations[t];
                if (r.value <= kSweepThresholds[t] && (!hit || r.k < *hit)) hit = r.k;
            }
        }
    }
    std::vector<SweepSummaryRow> out;
    for (auto& [id, s] : rows) {
        const bool reached_all = std::all_of(s.iterations.begin(), s.iterations.end(),
                                             [](const auto& v) { return v.has_value(); });
        s.status = s.diverged_at ? "diverged" : reached_all ? "ok" : "slow";
        out.push_back(std::move(s));
    }
    return out;
}

void write_sweep_long_csv(std::ostream& out, const std::vector<SweepRecord>& records) {
    out << kSweepLongHeader << "\r\n";
    for (const auto& r : records) {
        out << r.pair_id << ',' << format_number(r.omega) << ',' << format_number(r.beta) << ','
            << r.k << ',' << r.metric << ',' << format_number(r.value) << "\r\n";
    }
}

std::vector<SweepRecord> read_sweep_long_csv(std::istream& in) {
    std::vector<SweepRecord> out;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& why) -> void {
        throw Error(Errc::MalformedLine, "sweep CSV line " + std::to_string(line_no) + ": " + why,
                    line_no);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != kSweepLongHeader) fail("unexpected header");
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string part; std::getline(ss, part, ',');) f.push_back(part);
        if (f.size() != 6) fail("expected 6 fields");
        try {
            out.push_back({std::stoul(f[0]), std::stod(f[1]), std::stod(f[2]), std::stoul(f[3]),
                           f[4], std::stod(f[5])});
        } catch (const std::exception&) {
            fail("bad number");
        }
    }
    return out;
}

void write_sweep_summary_csv(std::ostream& out, const std::vector<SweepSummaryRow>& rows) {
    out << kSweepSummaryHeader << "\r\n";
    for (const auto& r : rows) {
        out << r.pair_id << ',' << format_number(r.omega) << ',' << format_number(r.beta) << ','
            << r.status;
        for (const auto& it : r.iterations) out << ',' << (it ? std::to_string(*it) : "");
        out << ',' << (r.diverged_at ? std::to_string(*r.diverged_at) : "") << "\r\n";
    }
}

// ----------------------------------------------------------------- verify

std::optional<double> fit_log_slope(const std::vector<std::size_t>& ks,
                                    const std::vector<double>& values, std::size_t k_min,
                                    std::size_t* used) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < ks.size() && i < values.size(); ++i) {
        if (ks[i] < k_min || !(values[i] > 0.0) || !std::isfinite(values[i])) continue;
        const double x = static_cast<double>(ks[i]);
        const double y = std::log(values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (used) *used = n;
    if (n < 2) return std::nullopt;
    const double dn = static_cast<double>(n);
    const double denom = dn * sxx - sx * sx;
    if (denom <= 0.0) return std::nullopt;
    return (dn * sxy - sx * sy) / denom;
}

std::vector<Vector> expected_error_trajectory(const Matrix& w, std::span<const double> e0,
                                              double omega, double beta,
                                              std::size_t iterations) {
    std::vector<Vector> out;
    out.reserve(iterations + 1);
    Vector e(e0.begin(), e0.end());
    Vector e_prev = e;
    out.push_back(e);
    for (std::size_t k = 1; k <= iterations; ++k) {
        const Vector we = multiply(w, e);
        Vector next = shb_step(e, e_prev, we, omega, beta);
        e_prev = std::move(e);
        e = std::move(next);
        out.push_back(e);
    }
    return out;
}

VerifyReport verify(const Problem& problem, const SketchDistribution& dist,
                    const SolverParams& params, std::span<const double> x0,
                    const VerifyOptions& options) {
    if (options.replications < kMinVerifyReplications) {
        throw Error(Errc::InsufficientReplications,
                    "verification needs at least " + std::to_string(kMinVerifyReplications) +
                        " replications, got " + std::to_string(options.replications));
    }
    params.validate();

    SolverParams p = params;
    p.metrics = MetricSet::all();
    const RunSetup setup = prepare_run(problem, dist, x0, p.metrics);

    VerifyReport report;
    report.params = p;
    report.replications = options.replications;
    report.slack = 3.0 / std::sqrt(static_cast<double>(options.replications));
    report.spectrum = hessian_spectrum(problem.a, setup.expected_h);
    const SpectrumInfo& s = report.spectrum;

    auto decide = [](std::optional<bool> requested, bool applicable, const char* what) {
        if (requested.value_or(applicable) && !applicable) {
            throw Error(Errc::NotAdmissible, std::string(what) + " hypotheses do not hold");
        }
        return requested.value_or(applicable);
    };

    bool l2_applicable = false;
    std::optional<L2Rate> rate;
    if (s.exact && p.omega > 0.0 && p.omega < 2.0) {
        rate = l2_rate(p.omega, p.beta, s.lambda_min_plus, s.lambda_max);
        l2_applicable = rate->admissible;
    }
    const bool do_l2 = decide(options.check_l2, l2_applicable, "L2 envelope");
    const bool do_cesaro =
        decide(options.check_cesaro, cesaro_admissible(p.omega, p.beta), "Cesàro bound");
    const bool do_l1 = decide(options.check_l1,
                              s.exact && l1_admissible(p.omega, p.beta, s.lambda_min_plus,
                                                       s.lambda_max),
                              "accelerated L1 rate");
    if (!do_l2 && !do_cesaro && !do_l1) {
        throw Error(Errc::NotAdmissible, "no convergence guarantee applies to these parameters");
    }
    if (do_l2) report.l2 = rate;
    report.cesaro_checked = do_cesaro;

    const EnsembleStats stats =
        run_ensemble(problem, dist, p, setup, options.replications, options.threads);

    const Matrix w = hessian(problem.a, setup.expected_h);
    const auto exact_mean = expected_error_trajectory(w, subtract(setup.x0, setup.x_star), p.omega,
                                                      p.beta, p.max_iter);

    const double factor = 1.0 + report.slack;
    std::vector<std::size_t> ks;
    std::vector<double> l1_values, l1_exact_values;
    for (const auto& pt : stats.points) {
        VerifyCheckpoint c;
        c.k = pt.k;
        c.l2_mean = pt.l2_mean;
        if (do_l2) {
            c.l2_envelope = l2_envelope(*rate, pt.k, setup.init_sq_dist, s.lambda_max).l2_bound;
            c.l2_pass = pt.l2_mean <= *c.l2_envelope * factor;
            report.l2_ok = report.l2_ok && c.l2_pass;
        }
        if (do_cesaro && pt.k >= 1 && pt.cesaro_mean) {
            c.cesaro_mean = pt.cesaro_mean;
            c.cesaro_bound = cesaro_bound(p.omega, p.beta, pt.k, setup.init_sq_dist, setup.f0);
            c.cesaro_pass = *pt.cesaro_mean <= *c.cesaro_bound * factor;
            report.cesaro_ok = report.cesaro_ok && c.cesaro_pass;
        }
        c.l1 = pt.l1;
        c.l1_exact = squared_norm(exact_mean[pt.k]);
        c.l1_below_l2 = *pt.l1 <= pt.l2_mean * (1.0 + 1e-12);
        report.l1_below_l2_ok = report.l1_below_l2_ok && c.l1_below_l2;
        ks.push_back(pt.k);
        l1_values.push_back(*pt.l1);
        l1_exact_values.push_back(*c.l1_exact);
        report.checkpoints.push_back(c);
    }

    if (do_l1) {
        const auto k_min = static_cast<std::size_t>(
            std::ceil(options.transient_fraction * static_cast<double>(p.max_iter)));
        const double threshold = std::log(p.beta) + options.slope_slack;
        auto fit = [&](const std::vector<double>& values) {
            SlopeFit f;
            f.threshold = threshold;
            const auto slope = fit_log_slope(ks, values, k_min, &f.points);
            f.slope = slope.value_or(std::numeric_limits<double>::quiet_NaN());
            f.pass = slope && *slope <= threshold;
            return f;
        };
        report.l1_slope = fit(l1_values);
        report.l1_exact_slope = fit(l1_exact_values);
        report.l1_ok = report.l1_slope->pass;
    }
    return report;
}

ordered_json VerifyReport::to_json() const {
    ordered_json j;
    j["passed"] = passed();
    j["replications"] = replications;
    j["slack"] = slack;
    j["params"] = params_json(params);
    j["spectrum"] = {{"lambda_max", spectrum.lambda_max},
                     {"lambda_min_plus", spectrum.lambda_min_plus},
                     {"rank", spectrum.rank},
                     {"exact", spectrum.exact}};
    ordered_json checks;
    checks["l2_envelope"] = l2 ? ordered_json(l2_ok) : ordered_json(nullptr);
    checks["cesaro_bound"] = cesaro_checked ? ordered_json(cesaro_ok) : ordered_json(nullptr);
    checks["l1_rate"] = l1_slope ? ordered_json(l1_ok) : ordered_json(nullptr);
    checks["l1_below_l2"] = l1_below_l2_ok;
    j["checks"] = checks;
    if (l2) j["l2_rate"] = rate_json(*l2);
    auto slope_json = [](const SlopeFit& f) {
        ordered_json o;
        o["slope"] = std::isfinite(f.slope) ? ordered_json(f.slope) : ordered_json(nullptr);
        o["threshold"] = f.threshold;
        o["points"] = f.points;
        o["pass"] = f.pass;
        return o;
    };
    if (l1_slope) {
        j["l1_slope"] = slope_json(*l1_slope);
        j["l1_norm"] = "euclidean";
    }
    if (l1_exact_slope) j["l1_exact_mean_slope"] = slope_json(*l1_exact_slope);
    ordered_json rows = ordered_json::array();
    for (const auto& c : checkpoints) {
        ordered_json r;
        r["k"] = c.k;
        r["l2_mean"] = c.l2_mean;
        r["l2_envelope"] = nullable(c.l2_envelope);
        r["l2_pass"] = c.l2_pass;
        r["cesaro_mean"] = nullable(c.cesaro_mean);
        r["cesaro_bound"] = nullable(c.cesaro_bound);
        r["cesaro_pass"] = c.cesaro_pass;
        r["l1"] = nullable(c.l1);
        r["l1_exact"] = nullable(c.l1_exact);
        r["l1_below_l2"] = c.l1_below_l2;
        rows.push_back(std::move(r));
    }
    j["checkpoints"] = std::move(rows);
    return j;
}

}  // namespace shb
