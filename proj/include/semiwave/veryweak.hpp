#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semiwave/propagator.hpp"

namespace semiwave {

/// Standard bump psi(t) = c exp(-1 / (1 - t^2)) on (-1, 1), normalised to unit mass.
namespace bump {
double normalisation();
double value(double t);
/// d^m psi / dt^m for m = 0..3.
double derivative(double t, int order);
/// int_{-1}^{x} psi
double cdf(double x);
}  // namespace bump

struct Mollifier {
    enum class Scale { log, power };
    Scale scale = Scale::log;
    double power = 1.0;

    /// omega(eps) = 1 / log(1/eps) or eps^p.
    double omega(double eps) const;
    /// psi_omega^(m)(t) = omega^(-1-m) psi^(m)(t / omega)
    static double kernel(double t, double omega, int order = 0);
};

struct DistributionTerm {
    enum class Kind { constant, smooth, dirac, dirac_derivative, heaviside };
    Kind kind = Kind::constant;
    double value = 0.0;  // constant c, dirac strength, or heaviside jump
    double t0 = 0.0;
    int order = 0;       // dirac derivative order, at most 2
    TimeFunction g;      // smooth part
    TimeFunction g_prime;
};

/// Finite sum of catalogue terms in the time variable.
struct DistributionSpec {
    std::vector<DistributionTerm> terms;

    DistributionSpec& constant(double c);
    DistributionSpec& smooth(TimeFunction g, TimeFunction g_prime);
    DistributionSpec& dirac(double t0, double strength);
    DistributionSpec& dirac_derivative(double t0, double strength, int order);
    DistributionSpec& heaviside(double t0, double jump);

    bool empty() const { return terms.empty(); }
    bool singular() const;
    /// Point terms must sit in [0, T]; dirac derivative order must be 0..2.
    void validate(double horizon) const;
    /// Sum of the constant, smooth and heaviside terms (heaviside right-continuous).
    double regular_part(double t) const;
};

struct PositivityCertificate {
    bool valid = false;
    double a0 = 0.0;  // minimum of the regular part on the sample grid
    std::string reason;
};

/// Regular part >= a0 > 0 on [0, T] (sampled, including both sides of each jump),
/// non-negative dirac strengths, no dirac derivatives.
PositivityCertificate certify_positive(const DistributionSpec& a, double horizon, std::size_t samples = 2001);

/// (a * psi_omega)(t) and its t-derivative.
std::pair<double, double> mollify(const DistributionSpec& dist, const Mollifier& moll, double eps, double t);

struct RegularisedNet {
    DistributionSpec base;
    Mollifier mollifier;

    std::pair<double, double> evaluate(double eps, double t) const { return mollify(base, mollifier, eps, t); }
    TimeFunction value_function(double eps) const;
    TimeFunction derivative_function(double eps) const;
};

/// Default grid {2^-1, ..., 2^-8}.
std::vector<double> default_epsilon_grid();

enum class NetClass { negligible, moderate, not_moderate };
std::string to_string(NetClass c);

struct ModerationReport {
    std::vector<double> epsilons;
    std::vector<std::vector<double>> norms;  // norms[k][i] = sup |d^k a_eps_i|
    std::vector<double> slopes;              // per derivative order, against log(1/eps), three smallest eps
    double fit_residual = 0.0;               // rms residual of the full-grid fit, worst order
    NetClass classification = NetClass::moderate;
    double order = 0.0;                      // N when moderate, q when negligible
};

/// Classifies an eps-net from sampled norms of its derivatives of order 0..m.
ModerationReport fit_moderateness(std::span<const double> epsilons, const std::vector<std::vector<double>>& norms);
ModerationReport fit_moderateness(std::span<const double> epsilons, std::span<const double> norms);

/// sup over the sample grid of |a_eps| and |a_eps'| for every eps.
ModerationReport net_moderateness(const RegularisedNet& net, std::span<const double> epsilons, double horizon,
                                  std::size_t samples = 4001);

/// Time factor f(t) = g(t) of a separable source g(t) h(k); h may be absent.
struct SourceNet {
    RegularisedNet net;
    std::optional<LatticeFunction> profile;
};

struct NetConfig {
    double horizon = 1.0;
    double dt = 1e-3;
    double s = 0.0;
    std::vector<double> epsilons = default_epsilon_grid();
    int threads = 1;
    bool keep_solutions = false;
};

struct NetRow {
    double epsilon = 0.0;
    double omega = 0.0;
    double sup_a = 0.0;
    double sup_da = 0.0;
    double sup_q = 0.0;
    double sol_norm = 0.0;  // ||u_eps||_{L^2([0,T]; H^{1+s})}
};

struct VeryWeakSolution {
    std::vector<NetRow> rows;
    std::vector<TrajectorySolution> solutions;  // filled when keep_solutions is set
    ModerationReport solution_fit;
};

/// Regularised coefficients for one eps as propagator inputs.
CoefficientFunctions regularised_coefficients(const RegularisedNet& a, const RegularisedNet& q, double eps);

VeryWeakSolution solve_regularised_net(std::shared_ptr<const SpectralDecomposition> decomp, const RegularisedNet& a,
                                       const RegularisedNet& q, const SourceNet& f, const LatticeFunction& u0,
                                       const LatticeFunction& u1, const NetConfig& config);

struct UniquenessConfig {
    double order = 3.0;              // q*, perturbations scale as eps^q*
    double amplitude = 1.0;
    bool scale_with_epsilon = true;  // false gives a fixed, non-negligible perturbation
    bool allow_non_negligible = false;
};

struct UniquenessReport {
    std::vector<double> epsilons;
    std::vector<double> differences;  // ||u_eps - u~_eps||_{L^2 H^{1+s}}
    double slope = 0.0;               // full-grid log-log slope against eps
    double required_slope = 0.0;      // q* - 0.5
    bool passed = false;
};

/// Solves the base and perturbed nets and fits the decay of their difference.
/// The perturbation adds amplitude * eps^q* times (1 + sin t)/2 to a, cos t to q,
/// and sin t * u0 to the source.
UniquenessReport uniqueness_experiment(std::shared_ptr<const SpectralDecomposition> decomp, const RegularisedNet& a,
                                       const RegularisedNet& q, const SourceNet& f, const LatticeFunction& u0,
                                       const LatticeFunction& u1, const NetConfig& config,
                                       const UniquenessConfig& perturbation);

struct ConsistencyReport {
    std::vector<double> epsilons;
    std::vector<double> errors;  // ||u_eps - u||_{L^2 H^{1+s}}
    bool monotone = false;           // non-increasing up to 5% noise
    bool strictly_decreasing = false;
    double tolerance = 0.0;
    bool passed = false;
};

/// Regular smooth coefficients: compares the mollified family against the classical solution.
ConsistencyReport consistency_experiment(std::shared_ptr<const SpectralDecomposition> decomp,
                                         const CoefficientFunctions& coeffs, const Mollifier& mollifier,
                                         const CauchyData& data, const NetConfig& config, double tolerance);

}  // namespace semiwave
