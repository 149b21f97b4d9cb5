#include "shb/problem.hpp"

#include <string>

#include "shb/error.hpp"
#include "shb/random.hpp"

namespace shb {

void Problem::validate() const {
    if (a.rows() == 0 || a.cols() == 0) throw Error(Errc::InvalidArgument, "A is empty");
    if (b.size() != a.rows()) {
        throw Error(Errc::DimensionMismatch, "b has " + std::to_string(b.size()) +
                                                 " entries for " + std::to_string(a.rows()) +
                                                 " rows");
    }
    if (!a.all_finite() || !all_finite(b)) {
        throw Error(Errc::NonFinite, "A and b must be finite");
    }
    bool any_nonzero = false;
    for (std::size_t i = 0; i < a.rows() && !any_nonzero; ++i) {
        any_nonzero = squared_norm(a.row(i)) > 0.0;
    }
    if (!any_nonzero) throw Error(Errc::AllZero, "A has no nonzero row");
    if (planted_solution) {
        if (planted_solution->size() != a.cols()) {
            throw Error(Errc::DimensionMismatch, "planted solution has wrong length");
        }
        const double residual = norm(subtract(multiply(a, *planted_solution), b));
        if (residual > 1e-10 * (1.0 + norm(b))) {
            throw Error(Errc::Inconsistent, "planted solution does not satisfy Ax = b");
        }
    }
}

Problem plant_solution(Matrix a, std::uint64_t seed, std::string source) {
    auto rng = RandomStream::derive(seed, kPlantStream);
    Vector x(a.cols());
    for (double& v : x) v = rng.normal();
    Problem p;
    p.b = multiply(a, x);
    p.a = std::move(a);
    p.planted_solution = std::move(x);
    p.source = std::move(source);
    p.validate();
    return p;
}

Problem gen_problem(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    if (rows == 0 || cols == 0) throw Error(Errc::InvalidArgument, "rows and cols must be >= 1");
    auto rng = RandomStream::derive(seed, kMatrixStream);
    Matrix a(rows, cols);
    for (double& v : a.entries()) v = rng.normal();
    return plant_solution(std::move(a), seed,
                          "gaussian:" + std::to_string(rows) + "x" + std::to_string(cols) +
                              ":seed=" + std::to_string(seed));
}

}  // namespace shb
