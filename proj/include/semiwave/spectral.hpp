#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "semiwave/hamiltonian.hpp"
#include "semiwave/lattice.hpp"

namespace semiwave {

/// f^(xi) = (f, u_xi) for every retained mode, tagged with the decomposition
/// that produced it.
struct SpectralCoefficients {
    std::uint64_t decomposition_id = 0;
    Eigen::VectorXcd values;

    std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

SpectralCoefficients make_coefficients(const SpectralDecomposition& decomp, Eigen::VectorXcd values);

SpectralCoefficients forward_transform(const SpectralDecomposition& decomp, const LatticeFunction& f);
LatticeFunction inverse_transform(const SpectralDecomposition& decomp, const SpectralCoefficients& coeffs);

/// (H f)^(xi) = lambda_xi f^(xi)
SpectralCoefficients apply_symbol(const SpectralDecomposition& decomp, const SpectralCoefficients& coeffs);

/// (1 + lambda_xi)^s per mode, ascending xi.
std::vector<double> sobolev_weights(const SpectralDecomposition& decomp, double s);

/// (sum_xi (1 + lambda_xi)^s |f^(xi)|^2)^(1/2), summed in ascending xi.
double sobolev_norm(const SpectralDecomposition& decomp, const SpectralCoefficients& coeffs, double s);
double sobolev_norm(const SpectralDecomposition& decomp, const LatticeFunction& f, double s);

/// Same sum without the square root, for callers that combine norms.
double sobolev_norm_squared(std::span<const double> weights, const Eigen::VectorXcd& coefficients);

struct SobolevReport {
    double norm = 0.0;
    /// ||f||^2 - sum_xi |f^(xi)|^2, clamped at zero; exactly 0 for full decompositions.
    double tail_weight = 0.0;
    bool truncated = false;
};

SobolevReport sobolev_report(const SpectralDecomposition& decomp, const LatticeFunction& f, double s);

}  // namespace semiwave
