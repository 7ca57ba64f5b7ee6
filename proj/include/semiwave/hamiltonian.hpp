#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "semiwave/lattice.hpp"

namespace semiwave {

enum class PotentialKind { zero, harmonic, power, anharmonic_2d, regularised_coulomb, table };

/**
 * Catalogue of non-negative lattice potentials V(k), evaluated at the physical
 * coordinates k = hbar * m.
 *
 *   zero                 V = 0
 *   harmonic             V = |k|^2
 *   power                V = |k|^alpha, alpha > 0
 *   anharmonic_2d        V = k1^2 k2^2 (dim 2 only)
 *   regularised_coulomb  V = 1 / (|k|^2 + delta^2), bounded; contrast case only
 *   table                explicit per-site values
 */
struct PotentialSpec {
    PotentialKind kind = PotentialKind::zero;
    double alpha = 2.0;
    double delta = 1.0;
    std::vector<double> table;

    static PotentialSpec zero() { return {}; }
    static PotentialSpec harmonic() { return {PotentialKind::harmonic, 2.0, 1.0, {}}; }
    static PotentialSpec power(double alpha) { return {PotentialKind::power, alpha, 1.0, {}}; }
    static PotentialSpec anharmonic_2d() { return {PotentialKind::anharmonic_2d, 2.0, 1.0, {}}; }
    static PotentialSpec regularised_coulomb(double delta) {
        return {PotentialKind::regularised_coulomb, 2.0, delta, {}};
    }
    static PotentialSpec from_table(std::vector<double> values) {
        return {PotentialKind::table, 2.0, 1.0, std::move(values)};
    }

    /// |V(k)| -> infinity along every coordinate axis.
    bool confining() const;
    std::string name() const;

    /// Continuum value V(x); unavailable for table potentials.
    double value_at(const Point& x, int dim) const;
};

PotentialKind parse_potential_kind(const std::string& name);

/// Pointwise V(k) on the grid; real and non-negative.
LatticeFunction evaluate_potential(const PotentialSpec& spec, const LatticeGrid& grid);

/**
 * Sparse symmetric matrix of H = -hbar^-2 L_hbar + V on the Dirichlet box:
 * off-diagonals -hbar^-2 on nearest-neighbour pairs, diagonal 2n hbar^-2 + V(k).
 */
class HamiltonianMatrix {
public:
    HamiltonianMatrix(LatticeGrid grid, std::vector<double> potential, Eigen::SparseMatrix<double> matrix);

    const LatticeGrid& grid() const { return grid_; }
    const std::vector<double>& potential() const { return potential_; }
    const Eigen::SparseMatrix<double>& matrix() const { return matrix_; }
    std::size_t size() const { return grid_.site_count(); }

    LatticeFunction apply(const LatticeFunction& f) const;
    Eigen::MatrixXd dense() const;

    /// Upper end of the union of Gershgorin discs; bounds the spectral radius.
    double gershgorin_upper() const;
    /// Lower end of the union of Gershgorin discs.
    double gershgorin_lower() const;

private:
    LatticeGrid grid_;
    std::vector<double> potential_;
    Eigen::SparseMatrix<double> matrix_;
};

HamiltonianMatrix assemble_hamiltonian(const LatticeGrid& grid, const LatticeFunction& potential);

enum class DecompositionMethod { automatic, dense, product, lanczos };

std::string to_string(DecompositionMethod method);

struct DecompositionOptions {
    DecompositionMethod method = DecompositionMethod::automatic;
    std::uint64_t seed = 20240611;
    double tol_eig = 1e-8;
    std::size_t dense_limit = 2000;
    std::size_t block_size = 6;
    std::size_t max_krylov = 0;  // 0 picks a budget from the mode count
};

/**
 * Lowest eigenpairs of a HamiltonianMatrix: eigenvalues ascending, orthonormal
 * real eigenvectors under the unweighted lattice inner product.
 *
 * Two storage layouts exist. The dense layout keeps an N x M column matrix.
 * The product layout is used when the potential splits as a sum of per-axis
 * terms: then H is a Kronecker sum and each eigenvector is a tensor product of
 * 1D eigenvectors, so only the 1D factors are stored and transforms are
 * applied axis by axis.
 *
 * Within a degenerate block, vectors are ordered by the flat index of their
 * largest-magnitude entry, and that entry is positive.
 */
class SpectralDecomposition {
public:
    SpectralDecomposition(LatticeGrid grid, std::vector<double> eigenvalues, Eigen::MatrixXd vectors,
                          DecompositionMethod method);
    SpectralDecomposition(LatticeGrid grid, std::vector<double> eigenvalues,
                          std::vector<Eigen::MatrixXd> axis_vectors, std::vector<MultiIndex> axis_modes);

    const LatticeGrid& grid() const { return grid_; }
    std::size_t mode_count() const { return eigenvalues_.size(); }
    bool is_full() const { return mode_count() == grid_.site_count(); }
    DecompositionMethod method() const { return method_; }
    std::uint64_t id() const { return id_; }

    std::span<const double> eigenvalues() const { return eigenvalues_; }
    double eigenvalue(std::size_t mode) const { return eigenvalues_[mode]; }
    /// <xi> = (1 + lambda_xi)^(1/2)
    double bracket(std::size_t mode) const;

    Eigen::VectorXd eigenvector_values(std::size_t mode) const;
    LatticeFunction eigenvector(std::size_t mode) const;

    /// (f, u_xi) for every retained mode.
    Eigen::VectorXcd analyse(const Eigen::VectorXcd& f) const;
    /// sum_xi c_xi u_xi
    Eigen::VectorXcd synthesise(const Eigen::VectorXcd& coefficients) const;

private:
    Eigen::VectorXcd product_transform(Eigen::VectorXcd tensor, bool transpose) const;

    LatticeGrid grid_;
    std::vector<double> eigenvalues_;
    DecompositionMethod method_;
    std::uint64_t id_;
    Eigen::MatrixXd vectors_;
    std::vector<Eigen::MatrixXd> axis_vectors_;
    std::vector<MultiIndex> axis_modes_;
    std::vector<std::size_t> product_offsets_;
};

SpectralDecomposition spectral_decompose(const HamiltonianMatrix& hamiltonian, std::size_t mode_count,
                                         const DecompositionOptions& options = {});

struct DecompositionDiagnostics {
    double max_relative_residual = 0.0;  // max ||H u - lambda u|| / max(1, lambda)
    double max_orthogonality_defect = 0.0;
    double min_eigenvalue = 0.0;
};

DecompositionDiagnostics diagnose(const HamiltonianMatrix& hamiltonian, const SpectralDecomposition& decomp,
                                  bool check_orthogonality = true);

struct GrowthRow {
    std::size_t rank = 0;
    double lambda = 0.0;
    double gap = 0.0;  // lambda_{rank} - lambda_{rank-1}; 0 for rank 0
};

struct GrowthReport {
    std::vector<GrowthRow> rows;
    double min_gap = 0.0;
    double max_gap = 0.0;
    double mean_gap = 0.0;
    double last_decile_mean_gap = 0.0;
    bool monotone = true;
    bool strictly_increasing = true;
    bool confinement_consistent = false;
};

GrowthReport eigenvalue_growth_report(const SpectralDecomposition& decomp);

}  // namespace semiwave
