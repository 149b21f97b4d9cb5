#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "shb/linalg.hpp"
#include "shb/random.hpp"

namespace shb {

// S = e_i with probability p_i.
struct UnitCoordinate {
    Vector probabilities;
};

// S = I_{:,C} for a uniformly random subset C of `block_size` rows.
struct BlockRow {
    std::size_t block_size = 1;
};

// S ∈ R^{m×width} with i.i.d. N(0, 1) entries.
struct GaussianSketch {
    std::size_t width = 1;
};

/// The distribution D over sketch matrices S.
class SketchDistribution {
public:
    using Variant = std::variant<UnitCoordinate, BlockRow, GaussianSketch>;

    /// p_i = ‖A_i:‖² / ‖A‖²_F; zero rows get p_i = 0. Throws AllZero for A = 0.
    static SketchDistribution row_norm(const Matrix& a);
    static SketchDistribution unit_coordinate(Vector probabilities);
    static SketchDistribution block_row(std::size_t block_size);
    static SketchDistribution gaussian(std::size_t width);

    /// Parses "row", "block:<τ>" or "gaussian:<τ>"; "row" uses row_norm(a).
    static SketchDistribution parse(std::string_view text, const Matrix& a);

    const Variant& variant() const noexcept { return variant_; }
    std::string describe() const;

    /// Checks the invariants against a system with `rows` equations and, for
    /// unit-coordinate sampling, that no zero row carries probability.
    void validate(const Matrix& a) const;

    /// Inverse-CDF table (unit-coordinate only).
    std::span<const double> cumulative() const noexcept { return cumulative_; }

private:
    explicit SketchDistribution(Variant v);

    Variant variant_;
    Vector cumulative_;
};

struct RowSample {
    std::size_t index = 0;
};
struct BlockSample {
    std::vector<std::size_t> indices;  // sorted ascending
};
struct GaussianSample {
    Matrix s;  // m × τ
};
using SketchSample = std::variant<RowSample, BlockSample, GaussianSample>;

SketchSample draw(const SketchDistribution& dist, std::size_t rows, RandomStream& rng);

/// ∇f_S(x) = AᵀH(Ax − b) with H = S(SᵀAAᵀS)†Sᵀ.
Vector stoch_grad(const Matrix& a, std::span<const double> b,
                  std::span<const double> x, const SketchSample& sample);

/// Same as stoch_grad for a row sample, with ‖A_i:‖² supplied by the caller.
/// Writes into `out` (size d).
void row_gradient(std::span<const double> row, double rhs, double row_norm_sq,
                  std::span<const double> x, std::span<double> out);

/// E[H]. Diagonal for unit-coordinate sampling, dense otherwise.
struct ExpectedH {
    std::size_t size = 0;
    bool is_diagonal = false;
    Vector diag;  // used when is_diagonal
    Matrix dense; // used otherwise
    bool estimated = false;
    std::size_t samples = 0;  // Monte Carlo draws, 0 when exact

    Vector apply(std::span<const double> y) const;
    Matrix to_dense() const;
    Vector eigenvalues() const;  // descending
};

inline constexpr std::size_t kDefaultMcSamples = 10000;
inline constexpr std::size_t kMaxEnumeratedSubsets = 10000;

/// Number of τ-subsets of m rows, saturating at max + 1.
std::size_t count_subsets(std::size_t m, std::size_t tau, std::size_t max);

ExpectedH expected_H(const SketchDistribution& dist, const Matrix& a,
                     std::size_t mc_samples = kDefaultMcSamples,
                     std::uint64_t seed = 0);

struct SpectrumInfo {
    Vector eigenvalues;  // of W = AᵀE[H]A, descending, clamped at zero
    double lambda_max = 0.0;
    double lambda_min_plus = 0.0;
    std::size_t rank = 0;
    bool exact = false;
    ExpectedH expected_h;
};

SpectrumInfo hessian_spectrum(const Matrix& a, const SketchDistribution& dist,
                              std::size_t mc_samples = kDefaultMcSamples,
                              std::uint64_t seed = 0,
                              double rel_tol = kDefaultRelTol);

/// Spectrum from an already computed E[H].
SpectrumInfo hessian_spectrum(const Matrix& a, ExpectedH expected_h,
                              double rel_tol = kDefaultRelTol);

/// W = AᵀE[H]A, symmetrized.
Matrix hessian(const Matrix& a, const ExpectedH& eh);

/// f(x) = ½ (Ax − b)ᵀ E[H] (Ax − b).
double f_value(const Matrix& a, std::span<const double> b, std::span<const double> x,
               const ExpectedH& eh);

}  // namespace shb
