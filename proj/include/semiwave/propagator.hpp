#pragma once

#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "semiwave/hamiltonian.hpp"
#include "semiwave/lattice.hpp"
#include "semiwave/spectral.hpp"

namespace semiwave {

using TimeFunction = std::function<double(double)>;

/// Time-dependent coefficients of u_tt + a(t) H u + q(t) u = f. When a_prime
/// is empty it is replaced by a central difference with spacing dt.
struct CoefficientFunctions {
    TimeFunction a;
    TimeFunction a_prime;
    TimeFunction q;

    static CoefficientFunctions constant(double a, double q = 0.0);
};

struct CoefficientBounds {
    double a0 = 0.0;      // inf a
    double a1 = 0.0;      // sup a
    double a_sup = 0.0;   // sup |a|
    double da_sup = 0.0;  // sup |a'|
    double q_sup = 0.0;   // sup |q|
};

struct EnergyConstants {
    double c0 = 0.0;
    double c1 = 0.0;
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double c_t = 0.0;
};

EnergyConstants energy_constants(const CoefficientBounds& bounds, double horizon);

/**
 * Coefficients sampled on the integrator stage grid: index 2k is t_k = k h and
 * index 2k + 1 is the midpoint t_k + h/2, for k = 0..steps.
 */
struct StageGrid {
    double horizon = 0.0;
    std::size_t steps = 0;
    double h = 0.0;
    std::vector<double> a;
    std::vector<double> q;

    double time(std::size_t stage) const { return 0.5 * h * static_cast<double>(stage); }
    std::size_t stage_count() const { return 2 * steps + 1; }
};

/// Steps K = ceil(T / dt) with effective step T / K. T = 0 yields a single sample.
StageGrid sample_stages(const CoefficientFunctions& coeffs, double horizon, double dt);

/// Grid sup/inf of the coefficients over the stage grid; a' analytic or by central difference.
CoefficientBounds coefficient_bounds(const CoefficientFunctions& coeffs, const StageGrid& stages);

/// Source term f(t, k): zero, separable g(t) h(k), or a general callback.
class Source {
public:
    enum class Kind { zero, separable, general };

    static Source zero() { return Source(); }
    static Source separable(TimeFunction g, LatticeFunction h);
    static Source general(std::function<LatticeFunction(double)> f);

    Kind kind() const { return kind_; }
    const TimeFunction& time_factor() const { return g_; }
    const LatticeFunction& space_factor() const { return *h_; }
    LatticeFunction at(double t, const LatticeGrid& grid) const;

private:
    Kind kind_ = Kind::zero;
    TimeFunction g_;
    std::shared_ptr<const LatticeFunction> h_;
    std::function<LatticeFunction(double)> f_;
};

struct CauchyData {
    LatticeFunction u0;
    LatticeFunction u1;
    Source f;
};

/// Per-mode initial values and source coefficients at every stage time.
struct ModeProblem {
    Eigen::VectorXcd u0_hat;
    Eigen::VectorXcd u1_hat;
    Eigen::MatrixXcd f_hat;  // stage x mode; empty when the source is zero

    /// U(0, xi) = (i <xi> u0^, u1^)
    std::pair<Complex, Complex> initial_state(const SpectralDecomposition& decomp, std::size_t mode) const;
};

ModeProblem transform_problem(const SpectralDecomposition& decomp, const CauchyData& data, const StageGrid& stages,
                              int threads = 1);

/// Closed-form solution of u'' + a lambda u = 0.
std::pair<Complex, Complex> exact_constant_mode(double a, double lambda, Complex u0, Complex u1, double t);

struct ModeTrajectory {
    std::vector<Complex> u;
    std::vector<Complex> ut;
};

/**
 * Classical four-stage Runge-Kutta on U' = i<xi> A U + i<xi>^-1 Q U + F with
 * U = (i<xi> u^, u^_t). f_stage holds f^ at every stage time, or is empty.
 */
ModeTrajectory integrate_mode(double lambda, const StageGrid& stages, std::span<const Complex> f_stage, Complex u0,
                              Complex u1);

struct PropagationConfig {
    double horizon = 1.0;
    double dt = 1e-3;
    double s = 0.0;
    int threads = 1;
};

/// Largest step allowed by 0.5 / (sqrt(sup|a|) <xi_max>).
double stability_limit(const SpectralDecomposition& decomp, const StageGrid& stages);

struct TrajectorySolution {
    std::shared_ptr<const SpectralDecomposition> decomp;
    StageGrid stages;
    double s = 0.0;
    std::vector<double> times;
    Eigen::MatrixXcd u_hat;   // sample x mode
    Eigen::MatrixXcd ut_hat;  // sample x mode
    Eigen::MatrixXcd f_hat;   // sample x mode; empty for a zero source
    std::vector<double> norm_1ps;  // ||u(t)||_{H^{1+s}}
    std::vector<double> norm_s;    // ||u_t(t)||_{H^s}

    std::size_t sample_count() const { return times.size(); }
    std::size_t mode_count() const { return static_cast<std::size_t>(u_hat.cols()); }
    LatticeFunction u_at(std::size_t sample) const;
    LatticeFunction ut_at(std::size_t sample) const;
};

TrajectorySolution propagate(std::shared_ptr<const SpectralDecomposition> decomp, const CoefficientFunctions& coeffs,
                             const CauchyData& data, const PropagationConfig& config);

/// Recomputes the norm traces after the per-mode states were modified.
void refresh_norms(TrajectorySolution& solution);

/// (int_0^T ||u(t)||^2_{H^{1+s}} dt)^(1/2) by the trapezoid rule on the sample grid.
double l2_time_norm(const TrajectorySolution& solution);
/// Same norm of the difference of two solutions on one decomposition and time grid.
double l2_time_difference(const TrajectorySolution& a, const TrajectorySolution& b);

/// Multiplies the state at the middle sample by sqrt(factor), so its energy scales by factor.
void inject_energy_fault(TrajectorySolution& solution, double factor);

struct SlackRecord {
    double worst = 0.0;  // relative slack (rhs - lhs) / rhs, minimum over samples
    std::size_t sample = 0;
    std::size_t mode = 0;
    std::size_t violations = 0;
};

struct EnergyBoundReport {
    CoefficientBounds bounds;
    EnergyConstants constants;
    double symmetriser_defect = 0.0;
    SlackRecord sandwich;
    SlackRecord gronwall;
    SlackRecord aggregate;
    std::vector<double> aggregate_lhs;  // ||u||^2_{H^{1+s}} + ||u_t||^2_{H^s} per sample
    double aggregate_rhs = 0.0;         // C_T (data + int_0^T ||f||^2_{H^s})
    double tolerance = 1e-7;
    bool passed = false;
};

EnergyBoundReport verify_energy_estimate(const TrajectorySolution& solution, const CoefficientFunctions& coeffs,
                                         double tolerance = 1e-7);

struct ClassicalConfig {
    PropagationConfig propagation;
    std::size_t mode_count = 0;  // 0 = full decomposition
    DecompositionOptions decomposition;
};

struct ClassicalSolution {
    std::shared_ptr<const SpectralDecomposition> decomp;
    TrajectorySolution trajectory;
    EnergyBoundReport energy;
};

ClassicalSolution classical_solve(const LatticeGrid& grid, const PotentialSpec& potential,
                                  const CoefficientFunctions& coeffs, const CauchyData& data,
                                  const ClassicalConfig& config);

/// Solve on an existing decomposition (shared across repeated runs).
ClassicalSolution classical_solve(std::shared_ptr<const SpectralDecomposition> decomp,
                                  const CoefficientFunctions& coeffs, const CauchyData& data,
                                  const PropagationConfig& config);

}  // namespace semiwave
