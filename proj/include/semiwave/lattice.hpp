#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>

#include <Eigen/Core>

#include "semiwave/numerics.hpp"

namespace semiwave {

inline constexpr std::size_t kDefaultSiteBudget = 100000;
inline constexpr int kMaxDim = 3;

using MultiIndex = std::array<int, kMaxDim>;
using Point = std::array<double, kMaxDim>;

/**
 * Truncated lattice hbar * Z^n restricted to the box |m_j| <= radius.
 *
 * Sites are flat-indexed row-major over the multi-index m (first axis
 * slowest). Coordinates are always formed as step * m so no rounding
 * accumulates across the grid. Unused trailing entries of MultiIndex/Point
 * are zero.
 */
class LatticeGrid {
public:
    static LatticeGrid build(int dim, double step, int radius,
                             std::size_t site_budget = kDefaultSiteBudget);

    int dim() const { return dim_; }
    double step() const { return step_; }
    int radius() const { return radius_; }
    std::size_t side() const { return side_; }
    std::size_t site_count() const { return site_count_; }

    MultiIndex multi_index(std::size_t flat) const;
    std::size_t flat_index(const MultiIndex& m) const;
    bool contains(const MultiIndex& m) const;

    double coordinate(std::size_t flat, int axis) const;
    Point coordinates(std::size_t flat) const;

    /// Flat index of the site m + direction * e_axis, or nullopt outside the box.
    std::optional<std::size_t> neighbour(std::size_t flat, int axis, int direction) const;

    /// True when the site touches the box boundary on some axis.
    bool on_boundary(std::size_t flat) const;

    bool operator==(const LatticeGrid& other) const {
        return dim_ == other.dim_ && step_ == other.step_ && radius_ == other.radius_;
    }

private:
    LatticeGrid(int dim, double step, int radius);

    int dim_ = 1;
    double step_ = 1.0;
    int radius_ = 1;
    std::size_t side_ = 3;
    std::size_t site_count_ = 3;
};

/// Complex scalar field on a LatticeGrid, flat-indexed.
class LatticeFunction {
public:
    explicit LatticeFunction(const LatticeGrid& grid);
    LatticeFunction(const LatticeGrid& grid, Eigen::VectorXcd values);

    static LatticeFunction from_function(const LatticeGrid& grid,
                                         const std::function<Complex(const Point&)>& f);
    static LatticeFunction delta(const LatticeGrid& grid, const MultiIndex& site);

    const LatticeGrid& grid() const { return grid_; }
    const Eigen::VectorXcd& values() const { return values_; }
    Eigen::VectorXcd& values() { return values_; }
    std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

    Complex operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
    Complex& operator[](std::size_t i) { return values_[static_cast<Eigen::Index>(i)]; }

private:
    LatticeGrid grid_;
    Eigen::VectorXcd values_;
};

/// L_hbar f(k) = sum_j (f(k + hbar v_j) + f(k - hbar v_j)) - 2n f(k), with
/// neighbours outside the box contributing zero. No 1/hbar^2 factor.
LatticeFunction apply_discrete_laplacian(const LatticeFunction& f);

/// (f, g) = sum_k f(k) conj(g(k)); unweighted, compensated.
Complex inner_product(const LatticeFunction& f, const LatticeFunction& g);

double l2_norm(const LatticeFunction& f);

}  // namespace semiwave
