#include "shb/sketch.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "shb/error.hpp"

namespace shb {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::size_t parse_count(std::string_view text, std::string_view what) {
    std::size_t value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || value == 0) {
        throw Error(Errc::InvalidArgument,
                    "bad " + std::string(what) + " '" + std::string(text) + "'");
    }
    return value;
}

// Rows of A selected by `indices`, as a |C| × d matrix.
Matrix select_rows(const Matrix& a, std::span<const std::size_t> indices) {
    Matrix out(indices.size(), a.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto src = a.row(indices[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

// SᵀA for a dense sketch S (m × τ).
Matrix sketch_rows(const Matrix& s, const Matrix& a) { return multiply(transpose(s), a); }

// Bᵀ (BBᵀ)† y for B = SᵀA and y = Sᵀ(Ax − b).
Vector sketched_gradient(const Matrix& sa, std::span<const double> sketched_residual) {
    return multiply_transposed(sa, pinv_apply(gram_of_rows(sa), sketched_residual));
}

// Adds weight · I_C (A_C A_Cᵀ)† I_Cᵀ into `acc` (m × m).
void accumulate_block_h(const Matrix& a, std::span<const std::size_t> block, double weight,
                        Matrix& acc) {
    const Matrix g = gram_of_rows(select_rows(a, block));
    const std::size_t t = block.size();
    Vector unit(t, 0.0);
    for (std::size_t c = 0; c < t; ++c) {
        std::fill(unit.begin(), unit.end(), 0.0);
        unit[c] = 1.0;
        const Vector col = pinv_apply(g, unit);
        for (std::size_t r = 0; r < t; ++r) acc(block[r], block[c]) += weight * col[r];
    }
}

// Adds weight · S (SᵀAAᵀS)† Sᵀ into `acc` (m × m).
void accumulate_gaussian_h(const Matrix& a, const Matrix& s, double weight, Matrix& acc) {
    const Matrix g = gram_of_rows(sketch_rows(s, a));
    const std::size_t t = s.cols();
    // P = G† (τ × τ), then S P Sᵀ.
    Matrix p(t, t);
    Vector unit(t, 0.0);
    for (std::size_t c = 0; c < t; ++c) {
        std::fill(unit.begin(), unit.end(), 0.0);
        unit[c] = 1.0;
        const Vector col = pinv_apply(g, unit);
        for (std::size_t r = 0; r < t; ++r) p(r, c) = col[r];
    }
    const Matrix sp = multiply(s, p);
    const std::size_t m = s.rows();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            acc(i, j) += weight * dot(sp.row(i), s.row(j));
        }
    }
}

void symmetrize(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = i + 1; j < m.cols(); ++j) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = v;
            m(j, i) = v;
        }
    }
}

// Visits every τ-subset of {0..m-1} in lexicographic order.
template <class Fn>
void for_each_subset(std::size_t m, std::size_t tau, Fn&& fn) {
    std::vector<std::size_t> idx(tau);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    while (true) {
        fn(std::span<const std::size_t>(idx));
        std::size_t i = tau;
        while (i > 0 && idx[i - 1] == m - tau + (i - 1)) --i;
        if (i == 0) return;
        ++idx[i - 1];
        for (std::size_t j = i; j < tau; ++j) idx[j] = idx[j - 1] + 1;
    }
}

}  // namespace

SketchDistribution::SketchDistribution(Variant v) : variant_(std::move(v)) {
    if (const auto* uc = std::get_if<UnitCoordinate>(&variant_)) {
        cumulative_.resize(uc->probabilities.size());
        std::partial_sum(uc->probabilities.begin(), uc->probabilities.end(),
                         cumulative_.begin());
    }
}

SketchDistribution SketchDistribution::row_norm(const Matrix& a) {
    Vector p(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) p[i] = squared_norm(a.row(i));
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    if (!(total > 0.0)) throw Error(Errc::AllZero, "every row of A is zero");
    for (double& x : p) x /= total;
    return SketchDistribution(UnitCoordinate{std::move(p)});
}

SketchDistribution SketchDistribution::unit_coordinate(Vector probabilities) {
    if (probabilities.empty()) throw Error(Errc::InvalidArgument, "no probabilities");
    double total = 0.0;
    for (double p : probabilities) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw Error(Errc::InvalidArgument, "probabilities must be finite and nonnegative");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw Error(Errc::InvalidArgument, "probabilities sum to " + std::to_string(total));
    }
    return SketchDistribution(UnitCoordinate{std::move(probabilities)});
}

SketchDistribution SketchDistribution::block_row(std::size_t block_size) {
    if (block_size == 0) throw Error(Errc::InvalidArgument, "block size must be at least 1");
    return SketchDistribution(BlockRow{block_size});
}

SketchDistribution SketchDistribution::gaussian(std::size_t width) {
    if (width == 0) throw Error(Errc::InvalidArgument, "sketch width must be at least 1");
    return SketchDistribution(GaussianSketch{width});
}

SketchDistribution SketchDistribution::parse(std::string_view text, const Matrix& a) {
    if (text == "row") return row_norm(a);
    const auto colon = text.find(':');
    const auto kind = text.substr(0, colon);
    if (colon != std::string_view::npos) {
        const auto arg = text.substr(colon + 1);
        if (kind == "block") return block_row(parse_count(arg, "block size"));
        if (kind == "gaussian") return gaussian(parse_count(arg, "sketch width"));
    }
    throw Error(Errc::InvalidArgument,
                "unknown sketch '" + std::string(text) + "' (row | block:<n> | gaussian:<n>)");
}

std::string SketchDistribution::describe() const {
    return std::visit(Overloaded{
                          [](const UnitCoordinate&) { return std::string("row"); },
                          [](const BlockRow& b) { return "block:" + std::to_string(b.block_size); },
                          [](const GaussianSketch& g) {
                              return "gaussian:" + std::to_string(g.width);
                          },
                      },
                      variant_);
}

void SketchDistribution::validate(const Matrix& a) const {
    const std::size_t m = a.rows();
    std::visit(Overloaded{
                   [&](const UnitCoordinate& uc) {
                       if (uc.probabilities.size() != m) {
                           throw Error(Errc::DimensionMismatch,
                                       "probability vector length differs from row count");
                       }
                       for (std::size_t i = 0; i < m; ++i) {
                           if (uc.probabilities[i] > 0.0 && squared_norm(a.row(i)) == 0.0) {
                               throw Error(Errc::ZeroRow, "row " + std::to_string(i) +
                                                              " is zero but has probability");
                           }
                       }
                   },
                   [&](const BlockRow& b) {
                       if (b.block_size > m) {
                           throw Error(Errc::InvalidArgument, "block size exceeds row count");
                       }
                   },
                   [&](const GaussianSketch& g) {
                       if (g.width > m) {
                           throw Error(Errc::InvalidArgument, "sketch width exceeds row count");
                       }
                   },
               },
               variant_);
}

SketchSample draw(const SketchDistribution& dist, std::size_t rows, RandomStream& rng) {
    return std::visit(
        Overloaded{
            [&](const UnitCoordinate&) -> SketchSample {
                const auto cum = dist.cumulative();
                const double target = rng.uniform() * cum.back();
                auto it = std::upper_bound(cum.begin(), cum.end(), target);
                if (it == cum.end()) {
                    // target rounded onto the total; take the last row with mass.
                    it = std::lower_bound(cum.begin(), cum.end(), cum.back());
                }
                return RowSample{static_cast<std::size_t>(it - cum.begin())};
            },
            [&](const BlockRow& b) -> SketchSample {
                // Partial Fisher–Yates over the row indices.
                std::vector<std::size_t> pool(rows);
                std::iota(pool.begin(), pool.end(), std::size_t{0});
                for (std::size_t i = 0; i < b.block_size; ++i) {
                    const std::size_t j = i + rng.uniform_index(rows - i);
                    std::swap(pool[i], pool[j]);
                }
                pool.resize(b.block_size);
                std::sort(pool.begin(), pool.end());
                return BlockSample{std::move(pool)};
            },
            [&](const GaussianSketch& g) -> SketchSample {
                Matrix s(rows, g.width);
                for (double& x : s.entries()) x = rng.normal();
                return GaussianSample{std::move(s)};
            },
        },
        dist.variant());
}

void row_gradient(std::span<const double> row, double rhs, double row_norm_sq,
                  std::span<const double> x, std::span<double> out) {
    if (row_norm_sq == 0.0) throw Error(Errc::ZeroRow, "sampled a zero row");
    const double coef = (dot(row, x) - rhs) / row_norm_sq;
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = coef * row[j];
}

Vector stoch_grad(const Matrix& a, std::span<const double> b, std::span<const double> x,
                  const SketchSample& sample) {
    if (x.size() != a.cols() || b.size() != a.rows()) {
        throw Error(Errc::DimensionMismatch, "stoch_grad: incompatible shapes");
    }
    return std::visit(
        Overloaded{
            [&](const RowSample& s) {
                if (s.index >= a.rows()) throw Error(Errc::OutOfRange, "row index out of range");
                Vector g(a.cols());
                const auto row = a.row(s.index);
                row_gradient(row, b[s.index], squared_norm(row), x, g);
                return g;
            },
            [&](const BlockSample& s) {
                const Matrix ac = select_rows(a, s.indices);
                Vector r(s.indices.size());
                for (std::size_t t = 0; t < s.indices.size(); ++t) {
                    r[t] = dot(ac.row(t), x) - b[s.indices[t]];
                }
                return sketched_gradient(ac, r);
            },
            [&](const GaussianSample& s) {
                if (s.s.rows() != a.rows()) {
                    throw Error(Errc::DimensionMismatch, "sketch has wrong row count");
                }
                const Matrix sa = sketch_rows(s.s, a);
                const Vector r = subtract(multiply(a, x), b);
                return sketched_gradient(sa, multiply_transposed(s.s, r));
            },
        },
        sample);
}

Vector ExpectedH::apply(std::span<const double> y) const {
    if (y.size() != size) throw Error(Errc::DimensionMismatch, "E[H] y: wrong length");
    if (!is_diagonal) return multiply(dense, y);
    Vector out(size);
    for (std::size_t i = 0; i < size; ++i) out[i] = diag[i] * y[i];
    return out;
}

Matrix ExpectedH::to_dense() const { return is_diagonal ? Matrix::diagonal(diag) : dense; }

Vector ExpectedH::eigenvalues() const {
    if (!is_diagonal) return sym_eig(dense).eigenvalues;
    Vector v = diag;
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
}

std::size_t count_subsets(std::size_t m, std::size_t tau, std::size_t max) {
    if (tau > m) return 0;
    tau = std::min(tau, m - tau);
    // C(m, i) = C(m, i-1) · (m - i + 1) / i stays integral at each step.
    std::size_t c = 1;
    for (std::size_t i = 1; i <= tau; ++i) {
        const double next = static_cast<double>(c) * static_cast<double>(m - tau + i) /
                            static_cast<double>(i);
        if (next > static_cast<double>(max)) return max + 1;
        c = c * (m - tau + i) / i;
    }
    return c;
}

ExpectedH expected_H(const SketchDistribution& dist, const Matrix& a, std::size_t mc_samples,
                     std::uint64_t seed) {
    if (squared_frobenius(a) == 0.0) throw Error(Errc::AllZero, "A is zero");
    dist.validate(a);
    const std::size_t m = a.rows();

    ExpectedH out;
    out.size = m;
    std::visit(
        Overloaded{
            [&](const UnitCoordinate& uc) {
                out.is_diagonal = true;
                out.diag.assign(m, 0.0);
                for (std::size_t i = 0; i < m; ++i) {
                    const double p = uc.probabilities[i];
                    if (p > 0.0) out.diag[i] = p / squared_norm(a.row(i));
                }
            },
            [&](const BlockRow& b) {
                out.dense = Matrix(m, m);
                const std::size_t total = count_subsets(m, b.block_size, kMaxEnumeratedSubsets);
                if (total <= kMaxEnumeratedSubsets) {
                    const double w = 1.0 / static_cast<double>(total);
                    for_each_subset(m, b.block_size, [&](std::span<const std::size_t> block) {
                        accumulate_block_h(a, block, w, out.dense);
                    });
                } else {
                    if (mc_samples == 0) throw Error(Errc::InvalidArgument, "mc_samples is zero");
                    auto rng = RandomStream::derive(seed, kExpectationStream);
                    const double w = 1.0 / static_cast<double>(mc_samples);
                    for (std::size_t s = 0; s < mc_samples; ++s) {
                        const auto sample = std::get<BlockSample>(draw(dist, m, rng));
                        accumulate_block_h(a, sample.indices, w, out.dense);
                    }
                    out.estimated = true;
                    out.samples = mc_samples;
                }
                symmetrize(out.dense);
            },
            [&](const GaussianSketch&) {
                if (mc_samples == 0) throw Error(Errc::InvalidArgument, "mc_samples is zero");
                out.dense = Matrix(m, m);
                auto rng = RandomStream::derive(seed, kExpectationStream);
                const double w = 1.0 / static_cast<double>(mc_samples);
                for (std::size_t s = 0; s < mc_samples; ++s) {
                    const auto sample = std::get<GaussianSample>(draw(dist, m, rng));
                    accumulate_gaussian_h(a, sample.s, w, out.dense);
                }
                symmetrize(out.dense);
                out.estimated = true;
                out.samples = mc_samples;
            },
        },
        dist.variant());
    return out;
}

Matrix hessian(const Matrix& a, const ExpectedH& eh) {
    if (eh.size != a.rows()) throw Error(Errc::DimensionMismatch, "E[H] does not match A");
    Matrix w;
    if (eh.is_diagonal) {
        const std::size_t d = a.cols();
        w = Matrix(d, d);
        for (std::size_t r = 0; r < a.rows(); ++r) {
            const double h = eh.diag[r];
            if (h == 0.0) continue;
            const auto row = a.row(r);
            for (std::size_t i = 0; i < d; ++i) {
                const double hi = h * row[i];
                if (hi == 0.0) continue;
                for (std::size_t j = i; j < d; ++j) w(i, j) += hi * row[j];
            }
        }
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < i; ++j) w(i, j) = w(j, i);
    } else {
        w = multiply(transpose(a), multiply(eh.dense, a));
        symmetrize(w);
    }
    return w;
}

SpectrumInfo hessian_spectrum(const Matrix& a, const SketchDistribution& dist,
                              std::size_t mc_samples, std::uint64_t seed, double rel_tol) {
    return hessian_spectrum(a, expected_H(dist, a, mc_samples, seed), rel_tol);
}

SpectrumInfo hessian_spectrum(const Matrix& a, ExpectedH expected_h, double rel_tol) {
    SpectrumInfo info;
    info.expected_h = std::move(expected_h);
    SymEig eig = sym_eig(hessian(a, info.expected_h));
    // Round-off can push eigenvalues of W marginally outside [0, 1].
    for (double& lambda : eig.eigenvalues) {
        lambda = std::max(lambda, 0.0);
        if (lambda > 1.0 && lambda <= 1.0 + 1e-8) lambda = 1.0;
    }
    info.eigenvalues = std::move(eig.eigenvalues);
    info.lambda_max = info.eigenvalues.front();
    info.lambda_min_plus = nonzero_min(info.eigenvalues, rel_tol);
    const double cutoff = rel_tol * info.lambda_max;
    info.rank = static_cast<std::size_t>(
        std::count_if(info.eigenvalues.begin(), info.eigenvalues.end(),
                      [&](double l) { return l > cutoff; }));
    const Vector h_eigs = info.expected_h.eigenvalues();
    info.exact = h_eigs.back() > rel_tol * h_eigs.front();
    return info;
}

double f_value(const Matrix& a, std::span<const double> b, std::span<const double> x,
               const ExpectedH& eh) {
    if (x.size() != a.cols() || b.size() != a.rows() || eh.size != a.rows()) {
        throw Error(Errc::DimensionMismatch, "f_value: incompatible shapes");
    }
    const Vector r = subtract(multiply(a, x), b);
    if (eh.is_diagonal) {
        double s = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) s += eh.diag[i] * r[i] * r[i];
        return 0.5 * s;
    }
    return std::max(0.0, 0.5 * dot(r, eh.apply(r)));
}

}  // namespace shb
