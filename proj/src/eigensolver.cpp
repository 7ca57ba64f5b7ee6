#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "semiwave/errors.hpp"
#include "semiwave/hamiltonian.hpp"

namespace semiwave {

namespace {

std::atomic<std::uint64_t> next_decomposition_id{1};

constexpr double kDegeneracyTol = 1e-10;
constexpr double kArgmaxSlack = 1e-9;
constexpr double kSeparableTol = 1e-12;

// First index whose magnitude is within kArgmaxSlack of the maximum.
Eigen::Index leading_index(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double top = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) >= top * (1.0 - kArgmaxSlack)) return i;
    }
    return 0;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    if (v[leading_index(v)] < 0.0) v = -v;
}

struct Candidate {
    double lambda;
    std::size_t leading;
    std::size_t source;
};

// Sorts ascending, groups near-equal eigenvalues into blocks, orders each
// block by leading index and flattens its eigenvalues to the block mean.
std::vector<Candidate> canonical_order(std::vector<Candidate> c) {
    std::sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
        return a.lambda != b.lambda ? a.lambda < b.lambda : a.source < b.source;
    });
    double scale = 1.0;
    for (const auto& x : c) scale = std::max(scale, std::abs(x.lambda));
    const double tol = kDegeneracyTol * scale;
    std::size_t begin = 0;
    while (begin < c.size()) {
        std::size_t end = begin + 1;
        while (end < c.size() && c[end].lambda - c[end - 1].lambda <= tol) ++end;
        if (end - begin > 1) {
            std::sort(c.begin() + static_cast<std::ptrdiff_t>(begin), c.begin() + static_cast<std::ptrdiff_t>(end),
                      [](const Candidate& a, const Candidate& b) {
                          return a.leading != b.leading ? a.leading < b.leading : a.source < b.source;
                      });
            CompensatedSum mean;
            for (std::size_t k = begin; k < end; ++k) mean.add(c[k].lambda);
            const double value = mean.value() / static_cast<double>(end - begin);
            for (std::size_t k = begin; k < end; ++k) c[k].lambda = value;
        }
        begin = end;
    }
    return c;
}

SpectralDecomposition finish_dense(const LatticeGrid& grid, const Eigen::VectorXd& values, Eigen::MatrixXd vectors,
                                   std::size_t mode_count, DecompositionMethod method) {
    std::vector<Candidate> c;
    c.reserve(static_cast<std::size_t>(values.size()));
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        fix_sign(vectors.col(k));
        c.push_back({values[k], static_cast<std::size_t>(leading_index(vectors.col(k))), static_cast<std::size_t>(k)});
    }
    c = canonical_order(std::move(c));
    std::vector<double> lambdas(mode_count);
    Eigen::MatrixXd kept(vectors.rows(), static_cast<Eigen::Index>(mode_count));
    for (std::size_t k = 0; k < mode_count; ++k) {
        lambdas[k] = c[k].lambda;
        kept.col(static_cast<Eigen::Index>(k)) = vectors.col(static_cast<Eigen::Index>(c[k].source));
    }
    return SpectralDecomposition(grid, std::move(lambdas), std::move(kept), method);
}

SpectralDecomposition dense_decompose(const HamiltonianMatrix& h, std::size_t mode_count) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h.dense());
    if (solver.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed", 0.0);
    return finish_dense(h.grid(), solver.eigenvalues(), solver.eigenvectors(), mode_count,
                        DecompositionMethod::dense);
}

// Per-axis potentials g_j with V(m) = sum_j g_j(m_j), or empty if V does not split.
std::vector<std::vector<double>> split_potential(const LatticeGrid& grid, const std::vector<double>& v) {
    const int dim = grid.dim();
    const int r = grid.radius();
    const std::size_t side = grid.side();
    MultiIndex origin{0, 0, 0};
    const double v0 = v[grid.flat_index(origin)];
    std::vector<std::vector<double>> parts(static_cast<std::size_t>(dim), std::vector<double>(side));
    for (int axis = 0; axis < dim; ++axis) {
        for (int m = -r; m <= r; ++m) {
            MultiIndex idx{0, 0, 0};
            idx[axis] = m;
            parts[axis][static_cast<std::size_t>(m + r)] = v[grid.flat_index(idx)] - (axis == 0 ? 0.0 : v0);
        }
    }
    double scale = 1.0;
    for (double x : v) scale = std::max(scale, std::abs(x));
    for (std::size_t i = 0; i < grid.site_count(); ++i) {
        const MultiIndex m = grid.multi_index(i);
        double sum = 0.0;
        for (int axis = 0; axis < dim; ++axis) sum += parts[axis][static_cast<std::size_t>(m[axis] + r)];
        if (std::abs(sum - v[i]) > kSeparableTol * scale) return {};
    }
    return parts;
}

SpectralDecomposition product_decompose(const HamiltonianMatrix& h, const std::vector<std::vector<double>>& parts,
                                        std::size_t mode_count) {
    const LatticeGrid& grid = h.grid();
    const int dim = grid.dim();
    const auto side = static_cast<Eigen::Index>(grid.side());
    const double inv_h2 = 1.0 / (grid.step() * grid.step());

    std::vector<Eigen::VectorXd> axis_values;
    std::vector<Eigen::MatrixXd> axis_vectors;
    std::vector<std::vector<std::size_t>> axis_leading;
    for (int axis = 0; axis < dim; ++axis) {
        Eigen::VectorXd diag(side);
        for (Eigen::Index i = 0; i < side; ++i) diag[i] = 2.0 * inv_h2 + parts[axis][static_cast<std::size_t>(i)];
        Eigen::VectorXd sub = Eigen::VectorXd::Constant(side - 1, -inv_h2);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
        solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
        if (solver.info() != Eigen::Success) throw ConvergenceError("tridiagonal eigensolver failed", 0.0);
        Eigen::MatrixXd vectors = solver.eigenvectors();
        std::vector<std::size_t> leading(static_cast<std::size_t>(side));
        for (Eigen::Index k = 0; k < side; ++k) {
            fix_sign(vectors.col(k));
            leading[static_cast<std::size_t>(k)] = static_cast<std::size_t>(leading_index(vectors.col(k)));
        }
        axis_values.push_back(solver.eigenvalues());
        axis_vectors.push_back(std::move(vectors));
        axis_leading.push_back(std::move(leading));
    }

    // Enumerate every product mode in the same row-major order as the sites.
    const std::size_t total = grid.site_count();
    std::vector<Candidate> c;
    c.reserve(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
        const MultiIndex m = grid.multi_index(flat);
        double lambda = 0.0;
        MultiIndex lead{0, 0, 0};
        for (int axis = 0; axis < dim; ++axis) {
            const auto i = static_cast<std::size_t>(m[axis] + grid.radius());
            lambda += axis_values[axis][static_cast<Eigen::Index>(i)];
            lead[axis] = static_cast<int>(axis_leading[axis][i]) - grid.radius();
        }
        c.push_back({lambda, grid.flat_index(lead), flat});
    }
    c = canonical_order(std::move(c));

    std::vector<double> lambdas(mode_count);
    std::vector<MultiIndex> modes(mode_count);
    for (std::size_t k = 0; k < mode_count; ++k) {
        lambdas[k] = c[k].lambda;
        MultiIndex m = grid.multi_index(c[k].source);
        for (int axis = 0; axis < dim; ++axis) m[axis] += grid.radius();
        modes[k] = m;
    }
    return SpectralDecomposition(grid, std::move(lambdas), std::move(axis_vectors), std::move(modes));
}

// Block Krylov iteration on (H + I)^-1 with full reorthogonalisation and
// Rayleigh-Ritz extraction against H itself.
SpectralDecomposition lanczos_decompose(const HamiltonianMatrix& h, std::size_t mode_count,
                                        const DecompositionOptions& options) {
    const auto n = static_cast<Eigen::Index>(h.size());
    const auto m = static_cast<Eigen::Index>(mode_count);
    const Eigen::Index b = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(options.block_size), 1, n);
    const Eigen::Index budget =
        options.max_krylov > 0 ? std::min<Eigen::Index>(static_cast<Eigen::Index>(options.max_krylov), n)
                               : std::min<Eigen::Index>(n, std::max<Eigen::Index>(6 * m + 60, 150));
    if (budget < m) throw ConfigurationError("Krylov budget is smaller than the requested mode count");

    Eigen::SparseMatrix<double> shifted = h.matrix();
    for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += 1.0;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor(shifted);
    if (factor.info() != Eigen::Success) throw ConvergenceError("shifted factorisation failed", 0.0);

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal;
    auto random_vector = [&] {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
        return v;
    };

    Eigen::MatrixXd q(n, budget), hq(n, budget), t = Eigen::MatrixXd::Zero(budget, budget);
    Eigen::Index k = 0;
    auto append = [&](Eigen::VectorXd v) {
        const double original = v.norm();
        if (!(original > 0.0)) return false;
        for (int pass = 0; pass < 2 && k > 0; ++pass) v -= q.leftCols(k) * (q.leftCols(k).transpose() * v);
        const double norm = v.norm();
        if (!(norm > 1e-10 * original)) return false;
        q.col(k) = v / norm;
        hq.col(k) = h.matrix() * q.col(k);
        t.col(k).head(k + 1) = q.leftCols(k + 1).transpose() * hq.col(k);
        t.row(k).head(k) = t.col(k).head(k).transpose();
        ++k;
        return true;
    };
    auto append_or_random = [&](const Eigen::VectorXd& v) {
        if (append(v)) return;
        for (int attempt = 0; attempt < 8 && k < budget; ++attempt) {
            if (append(random_vector())) return;
        }
    };

    for (Eigen::Index j = 0; j < b && k < budget; ++j) append_or_random(random_vector());
    Eigen::Index block_start = 0, block_len = k;
    Eigen::Index next_check = std::max<Eigen::Index>(m, b);
    double worst = std::numeric_limits<double>::infinity();

    while (true) {
        if (k >= next_check || k == budget) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> rr(t.topLeftCorner(k, k));
            const Eigen::MatrixXd z = rr.eigenvectors().leftCols(m);
            const Eigen::VectorXd theta = rr.eigenvalues().head(m);
            const Eigen::MatrixXd y = q.leftCols(k) * z;
            const Eigen::MatrixXd residual = hq.leftCols(k) * z - y * theta.asDiagonal();
            worst = 0.0;
            for (Eigen::Index j = 0; j < m; ++j) {
                worst = std::max(worst, residual.col(j).norm() / std::max(1.0, std::abs(theta[j])));
            }
            if (worst <= options.tol_eig) {
                return finish_dense(h.grid(), theta, y, mode_count, DecompositionMethod::lanczos);
            }
            next_check = k + std::max<Eigen::Index>(b, k / 4);
        }
        if (k >= budget) {
            throw ConvergenceError("Krylov budget of " + std::to_string(budget) +
                                       " vectors exhausted before convergence",
                                   worst);
        }
        const Eigen::MatrixXd w = factor.solve(q.middleCols(block_start, block_len));
        const Eigen::Index start = k;
        for (Eigen::Index j = 0; j < w.cols() && k < budget; ++j) append_or_random(w.col(j));
        if (k == start) append_or_random(random_vector());
        if (k == start) throw ConvergenceError("Krylov space stopped growing", worst);
        block_start = start;
        block_len = k - start;
    }
}

}  // namespace

std::string to_string(DecompositionMethod method) {
    switch (method) {
        case DecompositionMethod::automatic: return "automatic";
        case DecompositionMethod::dense: return "dense";
        case DecompositionMethod::product: return "product";
        case DecompositionMethod::lanczos: return "lanczos";
    }
    return "unknown";
}

SpectralDecomposition::SpectralDecomposition(LatticeGrid grid, std::vector<double> eigenvalues,
                                             Eigen::MatrixXd vectors, DecompositionMethod method)
    : grid_(grid),
      eigenvalues_(std::move(eigenvalues)),
      method_(method),
      id_(next_decomposition_id++),
      vectors_(std::move(vectors)) {
    if (static_cast<std::size_t>(vectors_.cols()) != eigenvalues_.size() ||
        static_cast<std::size_t>(vectors_.rows()) != grid_.site_count()) {
        throw DomainError("eigenvector matrix shape does not match the grid and mode count");
    }
}

SpectralDecomposition::SpectralDecomposition(LatticeGrid grid, std::vector<double> eigenvalues,
                                             std::vector<Eigen::MatrixXd> axis_vectors,
                                             std::vector<MultiIndex> axis_modes)
    : grid_(grid),
      eigenvalues_(std::move(eigenvalues)),
      method_(DecompositionMethod::product),
      id_(next_decomposition_id++),
      axis_vectors_(std::move(axis_vectors)),
      axis_modes_(std::move(axis_modes)) {
    if (axis_vectors_.size() != static_cast<std::size_t>(grid_.dim()) || axis_modes_.size() != eigenvalues_.size()) {
        throw DomainError("product decomposition factors do not match the grid");
    }
    product_offsets_.reserve(axis_modes_.size());
    for (const MultiIndex& mode : axis_modes_) {
        std::size_t flat = 0;
        for (int axis = 0; axis < grid_.dim(); ++axis) flat = flat * grid_.side() + static_cast<std::size_t>(mode[axis]);
        product_offsets_.push_back(flat);
    }
}

double SpectralDecomposition::bracket(std::size_t mode) const { return std::sqrt(1.0 + eigenvalues_[mode]); }

Eigen::VectorXd SpectralDecomposition::eigenvector_values(std::size_t mode) const {
    if (mode >= mode_count()) throw DomainError("mode index out of range");
    if (method_ != DecompositionMethod::product) return vectors_.col(static_cast<Eigen::Index>(mode));
    const MultiIndex& modes = axis_modes_[mode];
    Eigen::VectorXd out(static_cast<Eigen::Index>(grid_.site_count()));
    for (std::size_t i = 0; i < grid_.site_count(); ++i) {
        const MultiIndex m = grid_.multi_index(i);
        double value = 1.0;
        for (int axis = 0; axis < grid_.dim(); ++axis) {
            value *= axis_vectors_[axis](m[axis] + grid_.radius(), modes[axis]);
        }
        out[static_cast<Eigen::Index>(i)] = value;
    }
    return out;
}

LatticeFunction SpectralDecomposition::eigenvector(std::size_t mode) const {
    return LatticeFunction(grid_, eigenvector_values(mode).cast<Complex>());
}

Eigen::VectorXcd SpectralDecomposition::product_transform(Eigen::VectorXcd tensor, bool transpose) const {
    const auto side = static_cast<Eigen::Index>(grid_.side());
    const int dim = grid_.dim();
    Eigen::VectorXcd out(tensor.size());
    for (int axis = 0; axis < dim; ++axis) {
        Eigen::Index outer = 1, inner = 1;
        for (int j = 0; j < axis; ++j) outer *= side;
        for (int j = axis + 1; j < dim; ++j) inner *= side;
        const Eigen::MatrixXcd factor = transpose ? Eigen::MatrixXcd(axis_vectors_[axis].transpose().cast<Complex>())
                                                  : Eigen::MatrixXcd(axis_vectors_[axis].cast<Complex>());
        for (Eigen::Index o = 0; o < outer; ++o) {
            Eigen::Map<const Eigen::MatrixXcd> in(tensor.data() + o * side * inner, inner, side);
            Eigen::Map<Eigen::MatrixXcd> res(out.data() + o * side * inner, inner, side);
            res.noalias() = in * factor;
        }
        tensor.swap(out);
    }
    return tensor;
}

Eigen::VectorXcd SpectralDecomposition::analyse(const Eigen::VectorXcd& f) const {
    if (static_cast<std::size_t>(f.size()) != grid_.site_count()) {
        throw DomainError("analysed vector does not match the grid");
    }
    const auto m = static_cast<Eigen::Index>(mode_count());
    Eigen::VectorXcd coefficients(m);
    if (method_ != DecompositionMethod::product) {
        coefficients.real() = vectors_.transpose() * f.real();
        coefficients.imag() = vectors_.transpose() * f.imag();
        return coefficients;
    }
    const Eigen::VectorXcd full = product_transform(f, false);
    for (Eigen::Index k = 0; k < m; ++k) {
        coefficients[k] = full[static_cast<Eigen::Index>(product_offsets_[static_cast<std::size_t>(k)])];
    }
    return coefficients;
}

Eigen::VectorXcd SpectralDecomposition::synthesise(const Eigen::VectorXcd& coefficients) const {
    if (static_cast<std::size_t>(coefficients.size()) != mode_count()) {
        throw DomainError("coefficient vector does not match the mode count");
    }
    if (method_ != DecompositionMethod::product) {
        Eigen::VectorXcd out(vectors_.rows());
        out.real() = vectors_ * coefficients.real();
        out.imag() = vectors_ * coefficients.imag();
        return out;
    }
    Eigen::VectorXcd full = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(grid_.site_count()));
    for (std::size_t k = 0; k < mode_count(); ++k) {
        full[static_cast<Eigen::Index>(product_offsets_[k])] = coefficients[static_cast<Eigen::Index>(k)];
    }
    return product_transform(std::move(full), true);
}

SpectralDecomposition spectral_decompose(const HamiltonianMatrix& hamiltonian, std::size_t mode_count,
                                         const DecompositionOptions& options) {
    const std::size_t n = hamiltonian.size();
    if (mode_count < 1 || mode_count > n) {
        throw DomainError("mode count must lie in [1, " + std::to_string(n) + "] (got " +
                          std::to_string(mode_count) + ")");
    }
    if (!(options.tol_eig > 0.0)) throw ConfigurationError("eigen tolerance must be positive");

    switch (options.method) {
        case DecompositionMethod::dense:
            return dense_decompose(hamiltonian, mode_count);
        case DecompositionMethod::lanczos:
            return lanczos_decompose(hamiltonian, mode_count, options);
        case DecompositionMethod::product: {
            const auto parts = split_potential(hamiltonian.grid(), hamiltonian.potential());
            if (parts.empty()) {
                throw ConfigurationError("product decomposition requires a potential that splits by axis");
            }
            return product_decompose(hamiltonian, parts, mode_count);
        }
        case DecompositionMethod::automatic:
            break;
    }
    const auto parts = split_potential(hamiltonian.grid(), hamiltonian.potential());
    if (!parts.empty()) return product_decompose(hamiltonian, parts, mode_count);
    if (n <= options.dense_limit || mode_count == n) return dense_decompose(hamiltonian, mode_count);
    return lanczos_decompose(hamiltonian, mode_count, options);
}

}  // namespace semiwave
