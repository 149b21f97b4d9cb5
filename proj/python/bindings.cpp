#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "shb/error.hpp"
#include "shb/harness.hpp"
#include "shb/io.hpp"
#include "shb/problem.hpp"
#include "shb/sketch.hpp"
#include "shb/solver.hpp"
#include "shb/theory.hpp"

namespace py = pybind11;
using namespace shb;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_numpy(std::span<const double> v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::array_t<double> to_numpy(const Matrix& m) {
    py::array_t<double> out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
    std::copy(m.entries().begin(), m.entries().end(), out.mutable_data());
    return out;
}

Vector to_vector(const Array& a) {
    if (a.ndim() != 1) throw Error(Errc::DimensionMismatch, "expected a 1-d array");
    return Vector(a.data(), a.data() + a.size());
}

Matrix to_matrix(const Array& a) {
    if (a.ndim() != 2) throw Error(Errc::DimensionMismatch, "expected a 2-d array");
    return Matrix(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                  std::vector<double>(a.data(), a.data() + a.size()));
}

py::object json_to_py(const nlohmann::ordered_json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

Vector start_point(const Problem& p, const std::optional<Array>& x0) {
    if (!x0) return Vector(p.cols(), 0.0);
    Vector v = to_vector(*x0);
    if (v.size() != p.cols()) throw Error(Errc::DimensionMismatch, "x0 has the wrong length");
    return v;
}

SolverParams make_params(double omega, double beta, std::size_t iters, std::uint64_t seed,
                         std::size_t record_every, const std::string& metrics) {
    SolverParams p;
    p.omega = omega;
    p.beta = beta;
    p.max_iter = iters;
    p.seed = seed;
    p.record_every = record_every;
    p.metrics = MetricSet::parse(metrics);
    p.validate();
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Stochastic heavy ball for consistent linear systems";

    static py::exception<Error> shb_error(m, "ShbError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = shb_error;
            py::object inst = exc(e.what());
            inst.attr("code") = std::string(to_string(e.code()));
            inst.attr("position") =
                e.position() ? py::object(py::int_(*e.position())) : py::object(py::none());
            PyErr_SetObject(exc.ptr(), inst.ptr());
        }
    });

    py::class_<Problem>(m, "Problem")
        .def(py::init([](const Array& a, const Array& b, std::optional<Array> planted,
                         std::string source) {
                 Problem p;
                 p.a = to_matrix(a);
                 p.b = to_vector(b);
                 if (planted) p.planted_solution = to_vector(*planted);
                 p.source = std::move(source);
                 p.validate();
                 return p;
             }),
             py::arg("a"), py::arg("b"), py::arg("planted_solution") = py::none(),
             py::arg("source") = "python")
        .def_property_readonly("a", [](const Problem& p) { return to_numpy(p.a); })
        .def_property_readonly("b", [](const Problem& p) { return to_numpy(p.b); })
        .def_property_readonly("planted_solution",
                               [](const Problem& p) -> py::object {
                                   if (!p.planted_solution) return py::none();
                                   return to_numpy(*p.planted_solution);
                               })
        .def_readonly("source", &Problem::source)
        .def_property_readonly("shape", [](const Problem& p) {
            return py::make_tuple(p.rows(), p.cols());
        })
        .def("__repr__", [](const Problem& p) {
            return "<Problem " + std::to_string(p.rows()) + "x" + std::to_string(p.cols()) +
                   " " + p.source + ">";
        });

    m.def("gen_problem", &gen_problem, py::arg("rows"), py::arg("cols"), py::arg("seed") = 0);
    m.def(
        "load_problem",
        [](const std::string& path, std::optional<std::string> format, std::uint64_t seed) {
            const InputFormat f = format ? parse_input_format(*format) : infer_input_format(path);
            return load_problem(path, f, seed);
        },
        py::arg("path"), py::arg("format") = py::none(), py::arg("seed") = 0);
    m.def(
        "write_bundle",
        [](const std::string& path, const Problem& p, std::uint64_t seed) {
            write_bundle(path, p, seed);
        },
        py::arg("path"), py::arg("problem"), py::arg("seed") = 0);
    m.def("read_bundle", [](const std::string& path) { return read_bundle(path); },
          py::arg("path"));
    m.def("parse_libsvm", [](const std::string& path) { return to_numpy(parse_libsvm(path)); },
          py::arg("path"));

    py::class_<L2Rate>(m, "L2Rate")
        .def_readonly("a1", &L2Rate::a1)
        .def_readonly("a2", &L2Rate::a2)
        .def_readonly("q", &L2Rate::q)
        .def_readonly("delta", &L2Rate::delta)
        .def_readonly("admissible", &L2Rate::admissible)
        .def("__repr__", [](const L2Rate& r) {
            return "<L2Rate q=" + format_number(r.q) + " delta=" + format_number(r.delta) + ">";
        });

    m.def("l2_rate", &l2_rate, py::arg("omega"), py::arg("beta"), py::arg("lambda_min"),
          py::arg("lambda_max"));
    m.def("beta_upper_bound", &beta_upper_bound, py::arg("omega"), py::arg("lambda_min"),
          py::arg("lambda_max"));
    m.def("cesaro_bound", &cesaro_bound, py::arg("omega"), py::arg("beta"), py::arg("k"),
          py::arg("init_sq_dist"), py::arg("f0"));
    m.def(
        "l1_params",
        [](const std::string& choice, double lmin, double lmax) {
            const L1Params p = l1_params(parse_l1_choice(choice), lmin, lmax);
            return py::dict(py::arg("choice") = std::string(to_string(p.choice)),
                            py::arg("omega") = p.omega, py::arg("beta") = p.beta);
        },
        py::arg("choice"), py::arg("lambda_min"), py::arg("lambda_max"));

    m.def(
        "spectrum",
        [](const Problem& p, const std::string& sketch, std::size_t mc_samples,
           std::uint64_t seed) {
            const SpectrumInfo s =
                hessian_spectrum(p.a, SketchDistribution::parse(sketch, p.a), mc_samples, seed);
            return py::dict(py::arg("eigenvalues") = to_numpy(s.eigenvalues),
                            py::arg("lambda_max") = s.lambda_max,
                            py::arg("lambda_min_plus") = s.lambda_min_plus,
                            py::arg("rank") = s.rank, py::arg("exact") = s.exact);
        },
        py::arg("problem"), py::arg("sketch") = "row",
        py::arg("mc_samples") = kDefaultMcSamples, py::arg("seed") = 0);

    m.def(
        "analyze",
        [](const Problem& p, const std::string& sketch, std::vector<double> omegas,
           std::uint64_t seed) {
            AnalyzeOptions o;
            o.omegas = std::move(omegas);
            o.seed = seed;
            return json_to_py(analyze(p, SketchDistribution::parse(sketch, p.a), o));
        },
        py::arg("problem"), py::arg("sketch") = "row",
        py::arg("omegas") = std::vector<double>{1.0}, py::arg("seed") = 0);

    m.def(
        "solve",
        [](const Problem& p, double omega, double beta, std::size_t iters, std::uint64_t seed,
           const std::string& sketch, std::size_t record_every, const std::string& metrics,
           std::optional<Array> x0) {
            const SolverParams params = make_params(omega, beta, iters, seed, record_every, metrics);
            const RunTrace t =
                run(p, SketchDistribution::parse(sketch, p.a), params, start_point(p, x0));
            const std::size_t n = t.points.size();
            py::array_t<std::int64_t> ks(static_cast<py::ssize_t>(n));
            Vector l2(n), f(n), ces(n);
            for (std::size_t i = 0; i < n; ++i) {
                ks.mutable_data()[i] = static_cast<std::int64_t>(t.points[i].k);
                l2[i] = t.points[i].l2_error;
                f[i] = t.points[i].f_value;
                ces[i] = t.points[i].cesaro_f.value_or(std::nan(""));
            }
            py::dict out(py::arg("k") = ks, py::arg("l2_error") = to_numpy(l2),
                         py::arg("f_value") = to_numpy(f), py::arg("cesaro_f") = to_numpy(ces),
                         py::arg("final_iterate") = to_numpy(t.final_iterate));
            return out;
        },
        py::arg("problem"), py::arg("omega") = 1.0, py::arg("beta") = 0.0,
        py::arg("iters") = 1000, py::arg("seed") = 0, py::arg("sketch") = "row",
        py::arg("record_every") = 1, py::arg("metrics") = "l2_error,f_value,cesaro_f",
        py::arg("x0") = py::none());

    m.def(
        "verify",
        [](const Problem& p, double omega, double beta, std::size_t iters, std::size_t reps,
           std::uint64_t seed, const std::string& sketch, std::size_t record_every,
           std::optional<bool> l2, std::optional<bool> cesaro, std::optional<bool> l1,
           std::optional<Array> x0) {
            SolverParams params =
                make_params(omega, beta, iters, seed, record_every, "l2_error,f_value,cesaro_f");
            VerifyOptions o;
            o.replications = reps;
            o.check_l2 = l2;
            o.check_cesaro = cesaro;
            o.check_l1 = l1;
            const VerifyReport r =
                verify(p, SketchDistribution::parse(sketch, p.a), params, start_point(p, x0), o);
            return json_to_py(r.to_json());
        },
        py::arg("problem"), py::arg("omega"), py::arg("beta"), py::arg("iters"),
        py::arg("reps") = 1000, py::arg("seed") = 0, py::arg("sketch") = "row",
        py::arg("record_every") = 1, py::arg("check_l2") = py::none(),
        py::arg("check_cesaro") = py::none(), py::arg("check_l1") = py::none(),
        py::arg("x0") = py::none());
}
