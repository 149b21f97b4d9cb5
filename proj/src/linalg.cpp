#include "shb/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "shb/error.hpp"

namespace shb {

namespace {

void require_same_size(std::span<const double> a, std::span<const double> b,
                       const char* what) {
    if (a.size() != b.size()) {
        throw Error(Errc::DimensionMismatch,
                    std::string(what) + ": lengths " + std::to_string(a.size()) + " and " +
                        std::to_string(b.size()));
    }
}

using EigenRowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), entries_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (entries_.size() != rows * cols) {
        throw Error(Errc::DimensionMismatch,
                    "matrix " + std::to_string(rows) + "x" + std::to_string(cols) + " given " +
                        std::to_string(entries_.size()) + " entries");
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    entries_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw Error(Errc::DimensionMismatch, "ragged matrix literal");
        entries_.insert(entries_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
    Matrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
}

bool Matrix::all_finite() const noexcept { return shb::all_finite(entries_); }

double dot(std::span<const double> a, std::span<const double> b) {
    require_same_size(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double squared_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

double norm(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
    require_same_size(a, b, "squared_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

Vector subtract(std::span<const double> a, std::span<const double> b) {
    require_same_size(a, b, "subtract");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

bool all_finite(std::span<const double> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

Vector multiply(const Matrix& a, std::span<const double> x) {
    if (x.size() != a.cols()) throw Error(Errc::DimensionMismatch, "A x: x has wrong length");
    Vector out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
    return out;
}

Vector multiply_transposed(const Matrix& a, std::span<const double> y) {
    if (y.size() != a.rows()) throw Error(Errc::DimensionMismatch, "Aᵀ y: y has wrong length");
    Vector out(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double yi = y[i];
        if (yi == 0.0) continue;
        const auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) out[j] += yi * r[j];
    }
    return out;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw Error(Errc::DimensionMismatch, "A B: inner dimensions differ");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto o = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const auto br = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) o[j] += aik * br[j];
        }
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Matrix gram_of_rows(const Matrix& a) {
    const std::size_t m = a.rows();
    Matrix g(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            const double v = dot(a.row(i), a.row(j));
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}

Matrix gram_of_columns(const Matrix& a) {
    const std::size_t d = a.cols();
    Matrix g(d, d);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto row = a.row(r);
        for (std::size_t i = 0; i < d; ++i) {
            const double ri = row[i];
            if (ri == 0.0) continue;
            for (std::size_t j = i; j < d; ++j) g(i, j) += ri * row[j];
        }
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
    return g;
}

double squared_frobenius(const Matrix& a) { return squared_norm(a.entries()); }

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double x : a.entries()) m = std::max(m, std::abs(x));
    return m;
}

SymEig sym_eig(const Matrix& w, double clamp_tol) {
    if (w.rows() != w.cols()) {
        throw Error(Errc::NonSquare, "sym_eig needs a square matrix, got " +
                                         std::to_string(w.rows()) + "x" + std::to_string(w.cols()));
    }
    const std::size_t n = w.rows();
    if (n == 0) return {};

    const double scale = std::max(1.0, max_abs(w));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(w(i, j) - w(j, i)) > 1e-12 * scale) {
                throw Error(Errc::AsymmetryExceedsTolerance,
                            "entries (" + std::to_string(i) + "," + std::to_string(j) +
                                ") differ from their transpose");
            }
        }
    }

    const Eigen::Map<const EigenRowMatrix> view(w.entries().data(), n, n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(view);
    if (solver.info() != Eigen::Success) {
        throw Error(Errc::NoConvergence, "symmetric eigensolver hit its iteration cap");
    }

    // Eigen sorts ascending; reverse into descending order.
    SymEig out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n, n);
    const auto& values = solver.eigenvalues();
    const auto& vectors = solver.eigenvectors();
    const double top = std::max(std::abs(values(0)), std::abs(values(n - 1)));
    const double cutoff = clamp_tol * std::max(1.0, top);
    for (std::size_t j = 0; j < n; ++j) {
        const auto src = static_cast<Eigen::Index>(n - 1 - j);
        double lambda = values(src);
        if (lambda < 0.0 && -lambda <= cutoff) lambda = 0.0;
        out.eigenvalues[j] = lambda;
        for (std::size_t i = 0; i < n; ++i)
            out.eigenvectors(i, j) = vectors(static_cast<Eigen::Index>(i), src);
    }
    return out;
}

Vector pinv_apply(const Matrix& m, std::span<const double> y, double rel_tol) {
    if (m.rows() != m.cols()) throw Error(Errc::NonSquare, "pinv_apply needs a square matrix");
    if (y.size() != m.rows()) {
        throw Error(Errc::DimensionMismatch, "pinv_apply: y has length " +
                                                 std::to_string(y.size()) + ", matrix has " +
                                                 std::to_string(m.rows()) + " rows");
    }
    const std::size_t n = m.rows();
    Vector out(n, 0.0);
    if (n == 0) return out;

    const SymEig eig = sym_eig(m);
    const double lmax = eig.eigenvalues.front();
    if (lmax <= 0.0) return out;
    const double cutoff = rel_tol * lmax;
    for (std::size_t j = 0; j < n; ++j) {
        const double lambda = eig.eigenvalues[j];
        if (lambda <= cutoff) break;
        double c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += eig.eigenvectors(i, j) * y[i];
        c /= lambda;
        for (std::size_t i = 0; i < n; ++i) out[i] += c * eig.eigenvectors(i, j);
    }
    return out;
}

namespace {

// A†r through whichever Gram matrix is smaller: Aᵀ(AAᵀ)†r or (AᵀA)†Aᵀr.
Vector apply_pseudo_inverse(const Matrix& a, std::span<const double> r, double rel_tol) {
    if (a.rows() <= a.cols()) {
        return multiply_transposed(a, pinv_apply(gram_of_rows(a), r, rel_tol));
    }
    return pinv_apply(gram_of_columns(a), multiply_transposed(a, r), rel_tol);
}

}  // namespace

Vector project_onto_solutions(std::span<const double> x0, const Matrix& a,
                              std::span<const double> b, double rel_tol) {
    if (x0.size() != a.cols() || b.size() != a.rows()) {
        throw Error(Errc::DimensionMismatch, "project_onto_solutions: incompatible shapes");
    }
    Vector x(x0.begin(), x0.end());
    // One refinement pass; every correction lies in Range(Aᵀ).
    for (int pass = 0; pass < 2; ++pass) {
        const Vector r = subtract(multiply(a, x), b);
        const Vector c = apply_pseudo_inverse(a, r, rel_tol);
        for (std::size_t j = 0; j < x.size(); ++j) x[j] -= c[j];
    }
    const double residual = norm(subtract(multiply(a, x), b));
    const double allowed = 1e-8 * (1.0 + norm(b));
    if (!(residual <= allowed)) {
        throw Error(Errc::Inconsistent, "Ax = b has no solution (residual " +
                                            std::to_string(residual) + ")");
    }
    return x;
}

double nonzero_min(std::span<const double> eigenvalues, double rel_tol) {
    if (eigenvalues.empty() || eigenvalues.front() <= 0.0) {
        throw Error(Errc::AllZero, "no nonzero eigenvalue");
    }
    const double cutoff = rel_tol * eigenvalues.front();
    double smallest = eigenvalues.front();
    for (double lambda : eigenvalues) {
        if (lambda > cutoff) smallest = std::min(smallest, lambda);
    }
    return smallest;
}

double range_complement_norm(const Matrix& a, std::span<const double> v, double rel_tol) {
    if (v.size() != a.cols()) throw Error(Errc::DimensionMismatch, "range_complement_norm");
    const Vector av = multiply(a, v);
    const Vector in_range = apply_pseudo_inverse(a, av, rel_tol);
    return norm(subtract(v, in_range));
}

}  // namespace shb
