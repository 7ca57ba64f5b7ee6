#include "semiwave/lattice.hpp"

#include <cmath>
#include <string>

#include "semiwave/errors.hpp"

namespace semiwave {

LatticeGrid::LatticeGrid(int dim, double step, int radius)
    : dim_(dim), step_(step), radius_(radius), side_(static_cast<std::size_t>(2 * radius + 1)) {
    site_count_ = 1;
    for (int j = 0; j < dim_; ++j) site_count_ *= side_;
}

LatticeGrid LatticeGrid::build(int dim, double step, int radius, std::size_t site_budget) {
    if (dim < 1 || dim > kMaxDim) {
        throw DomainError("lattice dimension must be 1, 2 or 3 (got " + std::to_string(dim) + ")");
    }
    if (!(step > 0.0) || !std::isfinite(step)) {
        throw DomainError("lattice step must be positive and finite");
    }
    if (radius < 1) {
        throw DomainError("lattice radius must be at least 1");
    }
    const double side = 2.0 * radius + 1.0;
    const double sites = std::pow(side, dim);
    if (sites > static_cast<double>(site_budget)) {
        throw SizeError("lattice with " + std::to_string(static_cast<long long>(sites)) +
                        " sites exceeds the site budget of " + std::to_string(site_budget));
    }
    return LatticeGrid(dim, step, radius);
}

MultiIndex LatticeGrid::multi_index(std::size_t flat) const {
    MultiIndex m{0, 0, 0};
    for (int j = dim_ - 1; j >= 0; --j) {
        m[j] = static_cast<int>(flat % side_) - radius_;
        flat /= side_;
    }
    return m;
}

std::size_t LatticeGrid::flat_index(const MultiIndex& m) const {
    std::size_t flat = 0;
    for (int j = 0; j < dim_; ++j) {
        flat = flat * side_ + static_cast<std::size_t>(m[j] + radius_);
    }
    return flat;
}

bool LatticeGrid::contains(const MultiIndex& m) const {
    for (int j = 0; j < dim_; ++j) {
        if (m[j] < -radius_ || m[j] > radius_) return false;
    }
    return true;
}

double LatticeGrid::coordinate(std::size_t flat, int axis) const {
    return step_ * static_cast<double>(multi_index(flat)[axis]);
}

Point LatticeGrid::coordinates(std::size_t flat) const {
    const MultiIndex m = multi_index(flat);
    Point x{0.0, 0.0, 0.0};
    for (int j = 0; j < dim_; ++j) x[j] = step_ * static_cast<double>(m[j]);
    return x;
}

std::optional<std::size_t> LatticeGrid::neighbour(std::size_t flat, int axis, int direction) const {
    MultiIndex m = multi_index(flat);
    m[axis] += direction;
    if (m[axis] < -radius_ || m[axis] > radius_) return std::nullopt;
    return flat_index(m);
}

bool LatticeGrid::on_boundary(std::size_t flat) const {
    const MultiIndex m = multi_index(flat);
    for (int j = 0; j < dim_; ++j) {
        if (m[j] == -radius_ || m[j] == radius_) return true;
    }
    return false;
}

LatticeFunction::LatticeFunction(const LatticeGrid& grid)
    : grid_(grid), values_(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(grid.site_count()))) {}

LatticeFunction::LatticeFunction(const LatticeGrid& grid, Eigen::VectorXcd values)
    : grid_(grid), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != grid_.site_count()) {
        throw DomainError("lattice function length " + std::to_string(values_.size()) +
                          " does not match site count " + std::to_string(grid_.site_count()));
    }
    if (!values_.allFinite()) {
        throw DomainError("lattice function has non-finite entries");
    }
}

LatticeFunction LatticeFunction::from_function(const LatticeGrid& grid,
                                               const std::function<Complex(const Point&)>& f) {
    LatticeFunction out(grid);
    for (std::size_t i = 0; i < grid.site_count(); ++i) out[i] = f(grid.coordinates(i));
    if (!out.values().allFinite()) throw DomainError("sampled lattice function is not finite");
    return out;
}

LatticeFunction LatticeFunction::delta(const LatticeGrid& grid, const MultiIndex& site) {
    if (!grid.contains(site)) throw DomainError("delta site lies outside the lattice box");
    LatticeFunction out(grid);
    out[grid.flat_index(site)] = 1.0;
    return out;
}

LatticeFunction apply_discrete_laplacian(const LatticeFunction& f) {
    const LatticeGrid& grid = f.grid();
    const int n = grid.dim();
    LatticeFunction out(grid);
    for (std::size_t i = 0; i < grid.site_count(); ++i) {
        Complex acc = -2.0 * n * f[i];
        for (int axis = 0; axis < n; ++axis) {
            if (auto up = grid.neighbour(i, axis, +1)) acc += f[*up];
            if (auto down = grid.neighbour(i, axis, -1)) acc += f[*down];
        }
        out[i] = acc;
    }
    return out;
}

Complex inner_product(const LatticeFunction& f, const LatticeFunction& g) {
    if (!(f.grid() == g.grid())) throw DomainError("inner product of functions on different grids");
    CompensatedComplexSum acc;
    for (std::size_t i = 0; i < f.size(); ++i) acc.add(f[i] * std::conj(g[i]));
    return acc.value();
}

double l2_norm(const LatticeFunction& f) {
    CompensatedSum acc;
    for (std::size_t i = 0; i < f.size(); ++i) acc.add(std::norm(f[i]));
    return std::sqrt(acc.value());
}

}  // namespace semiwave
