#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "shb/linalg.hpp"

namespace shb {

/// A consistent linear system Ax = b.
struct Problem {
    Matrix a;
    Vector b;
    std::optional<Vector> planted_solution;
    std::string source;

    std::size_t rows() const noexcept { return a.rows(); }
    std::size_t cols() const noexcept { return a.cols(); }

    /// Finite entries, matching dimensions, at least one nonzero row, and
    /// ‖A·planted − b‖ ≤ 1e-10·(1+‖b‖) when a planted solution is present.
    void validate() const;
};

/// A ~ N(0,1) i.i.d., x* ~ N(0,1) i.i.d., b = A x*.
Problem gen_problem(std::size_t rows, std::size_t cols, std::uint64_t seed);

/// Plants x* ~ N(0,1) and sets b = A x*.
Problem plant_solution(Matrix a, std::uint64_t seed, std::string source);

}  // namespace shb
