#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "semiwave/propagator.hpp"
#include "semiwave/veryweak.hpp"

namespace semiwave {

/// Normalised Hermite functions, the eigenfunctions of -d^2/dx^2 + x^2 with eigenvalues 2j + 1.
namespace hermite {
/// h_0(x) .. h_{count-1}(x) by the three-term recurrence with exponent tracking.
std::vector<double> values(double x, std::size_t count);
double value(std::size_t j, double x);
inline double eigenvalue(std::size_t j) { return 2.0 * static_cast<double>(j) + 1.0; }
/// max |-h_j'' + x^2 h_j - (2j+1) h_j| over xs, with h_j'' from a fourth-order difference of spacing step.
double ode_residual(std::size_t j, std::span<const double> xs, double step = 5e-3);
}  // namespace hermite

using SpatialFunction = std::function<double(double)>;

struct HermiteExpansion {
    std::vector<double> coefficients;
    double tail = 0.0;  // L2 norm of f - sum c_j h_j on the quadrature grid
};

/// Coefficients (f, h_j) for j < cap by the trapezoid rule on [-half_width, half_width].
HermiteExpansion hermite_expand(const SpatialFunction& f, std::size_t cap, double half_width = 12.0,
                                std::size_t points = 4801);

/// 1D problem stated on the real line; the lattice side sees the data restricted to its sites.
struct ContinuumProblem {
    PotentialSpec potential = PotentialSpec::harmonic();
    CoefficientFunctions coeffs = CoefficientFunctions::constant(1.0, 0.0);
    SpatialFunction u0;            // empty means zero
    SpatialFunction u1;
    TimeFunction source_time;      // separable source g(t) h(x); both or neither
    SpatialFunction source_space;
    double horizon = 1.0;
    double dt = 5e-3;
    double half_width = 8.0;       // lattice box [-L, L]
};

struct ContinuumReference {
    enum class Kind { hermite_1d, fine_lattice };
    Kind kind = Kind::hermite_1d;
    std::size_t mode_cap = 48;
    double tail_tolerance = 1e-8;
    double hbar_ref = 0.0125;  // fine-lattice spacing
};

std::string to_string(ContinuumReference::Kind kind);

/// Continuum solution sampled at the sites of a target grid on the propagator time grid.
struct ContinuumSolution {
    std::vector<double> times;
    Eigen::MatrixXcd v;   // sample x site
    Eigen::MatrixXcd vt;  // sample x site
    double tail = 0.0;    // worst data expansion tail (hermite-1d)
};

/// Lattice restriction of a problem: grid radius round(L / hbar).
LatticeGrid restriction_grid(const ContinuumProblem& problem, double hbar);
CauchyData restrict_data(const ContinuumProblem& problem, const LatticeGrid& grid);

ContinuumSolution continuum_solve(const ContinuumReference& ref, const ContinuumProblem& problem,
                                  const LatticeGrid& target, int threads = 1);

/// Smooth test function with its analytic Laplacian.
struct SmoothFunction {
    std::function<double(const Point&)> value;
    std::function<double(const Point&)> laplacian;
};

/**
 * hbar^-2 L_hbar phi - sum_j d_j^2 phi at the lattice sites, with phi evaluated
 * off-grid where needed. The one-site boundary ring is set to zero. The
 * potential cancels between the lattice and continuum operators and is not an input.
 */
LatticeFunction defect_apply(const SmoothFunction& phi, const LatticeGrid& grid);

struct DefectRow {
    double hbar = 0.0;
    std::size_t sites = 0;
    double raw_norm = 0.0;     // unweighted lattice H^s norm of the masked defect
    double scaled_norm = 0.0;  // hbar^(n/2) raw_norm, the lattice quadrature of the continuum norm
};

struct DefectReport {
    std::vector<DefectRow> rows;
    double s = 0.0;
    double fitted_order = 0.0;  // log-log slope of scaled_norm against hbar
    double raw_order = 0.0;
};

/// Needs at least three hbar values. s > 0 uses the Sobolev weights of H_{hbar,V}.
DefectReport defect_report(const SmoothFunction& phi, int dim, std::span<const double> hbars,
                           const PotentialSpec& potential, double s = 0.0, double half_width = 8.0, int threads = 1);

struct ConvergenceConfig {
    std::vector<double> hbars{0.4, 0.2, 0.1, 0.05};
    double s = 5.0;
    ContinuumReference reference;
    int threads = 1;
};

struct ConvergenceRow {
    double hbar = 0.0;
    std::size_t sites = 0;
    double sup_error_1ps = 0.0;  // sup_t ||v - u||_{H^{1+s}}
    double sup_error_s = 0.0;    // sup_t ||v_t - u_t||_{H^s}
    double sup_error = 0.0;      // sup_t of the sum
    double data_tail = 0.0;
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    double s = 0.0;
    double fitted_order = 0.0;  // recorded, not asserted
    bool strictly_decreasing = false;
    bool passed = false;
    std::vector<std::string> warnings;
};

ConvergenceReport semiclassical_convergence(const ContinuumProblem& problem, const ConvergenceConfig& config);

struct VeryWeakConvergenceReport {
    std::vector<double> epsilons;
    std::vector<ConvergenceReport> columns;  // one per epsilon
    bool passed = false;
};

/// Runs the convergence experiment once per epsilon with the mollified coefficients (a_eps, q_eps).
VeryWeakConvergenceReport veryweak_semiclassical(const ContinuumProblem& problem, const RegularisedNet& a,
                                                 const RegularisedNet& q, std::span<const double> epsilons,
                                                 const ConvergenceConfig& config);

}  // namespace semiwave
