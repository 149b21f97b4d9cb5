#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace shb {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    /// Throws DimensionMismatch unless entries.size() == rows * cols.
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return entries_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const {
        return {entries_.data() + i * cols_, cols_};
    }
    std::span<double> row(std::size_t i) { return {entries_.data() + i * cols_, cols_}; }

    std::span<const double> entries() const noexcept { return entries_; }
    std::span<double> entries() noexcept { return entries_; }

    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> entries_;
};

// Vector kernels. Reductions run sequentially in index order so results are
// reproducible bit-for-bit.
double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> v);
double norm(std::span<const double> v);
double squared_distance(std::span<const double> a, std::span<const double> b);
Vector subtract(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> v) noexcept;

Vector multiply(const Matrix& a, std::span<const double> x);             // A x
Vector multiply_transposed(const Matrix& a, std::span<const double> y);  // Aᵀ y
Matrix multiply(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix gram_of_rows(const Matrix& a);     // A Aᵀ
Matrix gram_of_columns(const Matrix& a);  // Aᵀ A
double squared_frobenius(const Matrix& a);
double max_abs(const Matrix& a);

inline constexpr double kDefaultRelTol = 1e-10;

struct SymEig {
    Vector eigenvalues;  // descending
    Matrix eigenvectors; // column j pairs with eigenvalues[j]
};

/// Eigendecomposition of a symmetric PSD matrix. Negative eigenvalues whose
/// magnitude is at most clamp_tol * max(1, |λ|max) are clamped to zero.
SymEig sym_eig(const Matrix& w, double clamp_tol = kDefaultRelTol);

/// M†y for symmetric PSD M; eigenvalues ≤ rel_tol·λmax count as zero.
Vector pinv_apply(const Matrix& m, std::span<const double> y,
                  double rel_tol = kDefaultRelTol);

/// Projection of x0 onto {x : Ax = b}: x0 − A†(A x0 − b).
/// Throws Inconsistent when the result misses Ax = b by more than 1e-8·(1+‖b‖).
Vector project_onto_solutions(std::span<const double> x0, const Matrix& a,
                              std::span<const double> b,
                              double rel_tol = kDefaultRelTol);

/// Smallest eigenvalue strictly above rel_tol·λmax. Expects descending input.
double nonzero_min(std::span<const double> eigenvalues,
                   double rel_tol = kDefaultRelTol);

/// Norm of the component of v orthogonal to Range(Aᵀ).
double range_complement_norm(const Matrix& a, std::span<const double> v,
                             double rel_tol = kDefaultRelTol);

}  // namespace shb
