#include "semiwave/spectral.hpp"

#include <cmath>

#include "semiwave/errors.hpp"

namespace semiwave {

namespace {

void require_match(const SpectralDecomposition& decomp, const SpectralCoefficients& coeffs) {
    if (coeffs.decomposition_id != decomp.id() || coeffs.size() != decomp.mode_count()) {
        throw DomainError("spectral coefficients belong to a different decomposition");
    }
}

}  // namespace

SpectralCoefficients make_coefficients(const SpectralDecomposition& decomp, Eigen::VectorXcd values) {
    if (static_cast<std::size_t>(values.size()) != decomp.mode_count()) {
        throw DomainError("coefficient count " + std::to_string(values.size()) + " does not match mode count " +
                          std::to_string(decomp.mode_count()));
    }
    if (!values.allFinite()) throw DomainError("spectral coefficients must be finite");
    return {decomp.id(), std::move(values)};
}

SpectralCoefficients forward_transform(const SpectralDecomposition& decomp, const LatticeFunction& f) {
    if (!(f.grid() == decomp.grid())) throw DomainError("function and decomposition live on different grids");
    return {decomp.id(), decomp.analyse(f.values())};
}

LatticeFunction inverse_transform(const SpectralDecomposition& decomp, const SpectralCoefficients& coeffs) {
    require_match(decomp, coeffs);
    return LatticeFunction(decomp.grid(), decomp.synthesise(coeffs.values));
}

SpectralCoefficients apply_symbol(const SpectralDecomposition& decomp, const SpectralCoefficients& coeffs) {
    require_match(decomp, coeffs);
    SpectralCoefficients out = coeffs;
    for (std::size_t k = 0; k < decomp.mode_count(); ++k) {
        out.values[static_cast<Eigen::Index>(k)] *= decomp.eigenvalue(k);
    }
    return out;
}

std::vector<double> sobolev_weights(const SpectralDecomposition& decomp, double s) {
    if (!std::isfinite(s)) throw DomainError("Sobolev index must be finite");
    std::vector<double> w(decomp.mode_count());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::pow(1.0 + decomp.eigenvalue(k), s);
    return w;
}

double sobolev_norm_squared(std::span<const double> weights, const Eigen::VectorXcd& coefficients) {
    CompensatedSum acc;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        acc.add(weights[k] * std::norm(coefficients[static_cast<Eigen::Index>(k)]));
    }
    return acc.value();
}

double sobolev_norm(const SpectralDecomposition& decomp, const SpectralCoefficients& coeffs, double s) {
    require_match(decomp, coeffs);
    return std::sqrt(sobolev_norm_squared(sobolev_weights(decomp, s), coeffs.values));
}

double sobolev_norm(const SpectralDecomposition& decomp, const LatticeFunction& f, double s) {
    return sobolev_norm(decomp, forward_transform(decomp, f), s);
}

SobolevReport sobolev_report(const SpectralDecomposition& decomp, const LatticeFunction& f, double s) {
    const SpectralCoefficients c = forward_transform(decomp, f);
    SobolevReport r;
    r.norm = sobolev_norm(decomp, c, s);
    r.truncated = !decomp.is_full();
    if (r.truncated) {
        const double total = l2_norm(f);
        const std::vector<double> ones(decomp.mode_count(), 1.0);
        r.tail_weight = std::max(0.0, total * total - sobolev_norm_squared(ones, c.values));
    }
    return r;
}

}  // namespace semiwave
