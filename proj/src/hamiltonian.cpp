#include "semiwave/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "semiwave/errors.hpp"

namespace semiwave {

bool PotentialSpec::confining() const {
    switch (kind) {
        case PotentialKind::harmonic:
        case PotentialKind::power:
            return true;
        // V = k1^2 k2^2 vanishes on both coordinate axes.
        case PotentialKind::anharmonic_2d:
        case PotentialKind::zero:
        case PotentialKind::regularised_coulomb:
        case PotentialKind::table:
            return false;
    }
    return false;
}

std::string PotentialSpec::name() const {
    switch (kind) {
        case PotentialKind::zero: return "zero";
        case PotentialKind::harmonic: return "harmonic";
        case PotentialKind::power: return "power";
        case PotentialKind::anharmonic_2d: return "anharmonic-2d";
        case PotentialKind::regularised_coulomb: return "regularised-coulomb";
        case PotentialKind::table: return "table";
    }
    return "unknown";
}

PotentialKind parse_potential_kind(const std::string& name) {
    if (name == "zero") return PotentialKind::zero;
    if (name == "harmonic") return PotentialKind::harmonic;
    if (name == "power") return PotentialKind::power;
    if (name == "anharmonic-2d") return PotentialKind::anharmonic_2d;
    if (name == "regularised-coulomb") return PotentialKind::regularised_coulomb;
    if (name == "table") return PotentialKind::table;
    throw DomainError("unknown potential kind '" + name + "'");
}

double PotentialSpec::value_at(const Point& x, int dim) const {
    double r2 = 0.0;
    for (int j = 0; j < dim; ++j) r2 += x[j] * x[j];
    switch (kind) {
        case PotentialKind::zero: return 0.0;
        case PotentialKind::harmonic: return r2;
        case PotentialKind::power: return std::pow(std::sqrt(r2), alpha);
        case PotentialKind::anharmonic_2d: return x[0] * x[0] * x[1] * x[1];
        case PotentialKind::regularised_coulomb: return 1.0 / (r2 + delta * delta);
        case PotentialKind::table: break;
    }
    throw DomainError("table potentials have no continuum value");
}

LatticeFunction evaluate_potential(const PotentialSpec& spec, const LatticeGrid& grid) {
    const int dim = grid.dim();
    LatticeFunction out(grid);
    switch (spec.kind) {
        case PotentialKind::power:
            if (!(spec.alpha > 0.0)) throw DomainError("power potential needs alpha > 0");
            break;
        case PotentialKind::regularised_coulomb:
            if (!(spec.delta > 0.0)) throw DomainError("regularised coulomb potential needs delta > 0");
            break;
        case PotentialKind::anharmonic_2d:
            if (dim != 2) throw DomainError("anharmonic-2d potential requires a 2D grid");
            break;
        case PotentialKind::table:
            if (spec.table.size() != grid.site_count()) {
                throw DomainError("potential table has " + std::to_string(spec.table.size()) +
                                  " entries, grid has " + std::to_string(grid.site_count()) + " sites");
            }
            for (std::size_t i = 0; i < spec.table.size(); ++i) {
                if (!std::isfinite(spec.table[i]) || spec.table[i] < 0.0) {
                    throw DomainError("potential table entry " + std::to_string(i) +
                                      " is negative or non-finite (V >= 0 required)");
                }
                out[i] = spec.table[i];
            }
            return out;
        default:
            break;
    }
    for (std::size_t i = 0; i < grid.site_count(); ++i) out[i] = spec.value_at(grid.coordinates(i), dim);
    return out;
}

HamiltonianMatrix::HamiltonianMatrix(LatticeGrid grid, std::vector<double> potential,
                                     Eigen::SparseMatrix<double> matrix)
    : grid_(grid), potential_(std::move(potential)), matrix_(std::move(matrix)) {}

LatticeFunction HamiltonianMatrix::apply(const LatticeFunction& f) const {
    if (!(f.grid() == grid_)) throw DomainError("Hamiltonian applied to a function on another grid");
    Eigen::VectorXcd out(f.values().size());
    out.real() = matrix_ * f.values().real();
    out.imag() = matrix_ * f.values().imag();
    return LatticeFunction(grid_, std::move(out));
}

Eigen::MatrixXd HamiltonianMatrix::dense() const { return Eigen::MatrixXd(matrix_); }

double HamiltonianMatrix::gershgorin_upper() const {
    double upper = 0.0;
    for (int col = 0; col < matrix_.outerSize(); ++col) {
        double diag = 0.0, off = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(matrix_, col); it; ++it) {
            if (it.row() == it.col()) diag = it.value();
            else off += std::abs(it.value());
        }
        upper = std::max(upper, diag + off);
    }
    return upper;
}

double HamiltonianMatrix::gershgorin_lower() const {
    double lower = std::numeric_limits<double>::infinity();
    for (int col = 0; col < matrix_.outerSize(); ++col) {
        double diag = 0.0, off = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(matrix_, col); it; ++it) {
            if (it.row() == it.col()) diag = it.value();
            else off += std::abs(it.value());
        }
        lower = std::min(lower, diag - off);
    }
    return lower;
}

HamiltonianMatrix assemble_hamiltonian(const LatticeGrid& grid, const LatticeFunction& potential) {
    if (!(potential.grid() == grid)) throw DomainError("potential lives on a different grid");
    const std::size_t n = grid.site_count();
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Complex value = potential[i];
        if (value.imag() != 0.0 || !(value.real() >= 0.0)) {
            throw DomainError("potential must be real and non-negative at every site");
        }
        v[i] = value.real();
    }
    const double inv_h2 = 1.0 / (grid.step() * grid.step());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(n * (2 * static_cast<std::size_t>(grid.dim()) + 1));
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<int>(i);
        triplets.emplace_back(row, row, 2.0 * grid.dim() * inv_h2 + v[i]);
        for (int axis = 0; axis < grid.dim(); ++axis) {
            for (int dir : {-1, +1}) {
                if (auto j = grid.neighbour(i, axis, dir)) {
                    triplets.emplace_back(row, static_cast<int>(*j), -inv_h2);
                }
            }
        }
    }
    Eigen::SparseMatrix<double> matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    matrix.setFromTriplets(triplets.begin(), triplets.end());
    matrix.makeCompressed();
    return HamiltonianMatrix(grid, std::move(v), std::move(matrix));
}

DecompositionDiagnostics diagnose(const HamiltonianMatrix& hamiltonian, const SpectralDecomposition& decomp,
                                  bool check_orthogonality) {
    DecompositionDiagnostics d;
    const std::size_t m = decomp.mode_count();
    d.min_eigenvalue = m > 0 ? decomp.eigenvalue(0) : 0.0;
    Eigen::MatrixXd vectors(static_cast<Eigen::Index>(hamiltonian.size()), static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < m; ++k) {
        const Eigen::VectorXd u = decomp.eigenvector_values(k);
        vectors.col(static_cast<Eigen::Index>(k)) = u;
        const double lambda = decomp.eigenvalue(k);
        const double residual = (hamiltonian.matrix() * u - lambda * u).norm() / std::max(1.0, std::abs(lambda));
        d.max_relative_residual = std::max(d.max_relative_residual, residual);
        d.min_eigenvalue = std::min(d.min_eigenvalue, lambda);
    }
    if (check_orthogonality) {
        const Eigen::MatrixXd gram = vectors.transpose() * vectors;
        d.max_orthogonality_defect =
            (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
    }
    return d;
}

GrowthReport eigenvalue_growth_report(const SpectralDecomposition& decomp) {
    const std::size_t m = decomp.mode_count();
    if (m < 10) {
        throw DomainError("eigenvalue growth report: need >= 10 modes (got " + std::to_string(m) + ")");
    }
    GrowthReport report;
    report.min_gap = std::numeric_limits<double>::infinity();
    report.max_gap = -std::numeric_limits<double>::infinity();
    CompensatedSum gap_sum;
    for (std::size_t k = 0; k < m; ++k) {
        GrowthRow row{k, decomp.eigenvalue(k), 0.0};
        if (k > 0) {
            row.gap = decomp.eigenvalue(k) - decomp.eigenvalue(k - 1);
            report.min_gap = std::min(report.min_gap, row.gap);
            report.max_gap = std::max(report.max_gap, row.gap);
            gap_sum.add(row.gap);
            if (row.gap < 0.0) report.monotone = false;
            if (!(row.gap > 0.0)) report.strictly_increasing = false;
        }
        report.rows.push_back(row);
    }
    report.mean_gap = gap_sum.value() / static_cast<double>(m - 1);
    const std::size_t decile = std::max<std::size_t>(1, (m - 1) / 10);
    CompensatedSum tail;
    for (std::size_t k = m - decile; k < m; ++k) tail.add(report.rows[k].gap);
    report.last_decile_mean_gap = tail.value() / static_cast<double>(decile);
    report.confinement_consistent = report.monotone && report.last_decile_mean_gap > 0.0;
    return report;
}

}  // namespace semiwave
