#include "semiwave/semiclassical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "semiwave/errors.hpp"

namespace semiwave {

namespace hermite {

std::vector<double> values(double x, std::size_t count) {
    std::vector<double> out(count, 0.0);
    if (count == 0) return out;
    // h_j(x) = p_j exp(expo); p_j is rescaled whenever it grows large so that
    // neither the Gaussian factor nor the polynomial part leaves the double range.
    double expo = -0.5 * x * x;
    auto emit = [&](std::size_t j, double p) {
        out[j] = p == 0.0 ? 0.0 : std::copysign(std::exp(std::log(std::abs(p)) + expo), p);
    };
    double prev = 0.0;
    double cur = 1.0 / std::sqrt(std::sqrt(std::numbers::pi));
    emit(0, cur);
    for (std::size_t j = 0; j + 1 < count; ++j) {
        const double jd = static_cast<double>(j);
        const double next = std::sqrt(2.0 / (jd + 1.0)) * x * cur - std::sqrt(jd / (jd + 1.0)) * prev;
        prev = cur;
        cur = next;
        if (std::abs(cur) > 1e100) {
            prev *= 1e-100;
            cur *= 1e-100;
            expo += 100.0 * std::numbers::ln10;
        }
        emit(j + 1, cur);
    }
    return out;
}

double value(std::size_t j, double x) { return values(x, j + 1)[j]; }

double ode_residual(std::size_t j, std::span<const double> xs, double step) {
    double worst = 0.0;
    for (double x : xs) {
        const double f = value(j, x);
        const double d2 = (-value(j, x + 2 * step) + 16.0 * value(j, x + step) - 30.0 * f + 16.0 * value(j, x - step) -
                           value(j, x - 2 * step)) /
                          (12.0 * step * step);
        worst = std::max(worst, std::abs(-d2 + x * x * f - eigenvalue(j) * f));
    }
    return worst;
}

}  // namespace hermite

HermiteExpansion hermite_expand(const SpatialFunction& f, std::size_t cap, double half_width, std::size_t points) {
    if (points < 3 || !(half_width > 0.0)) throw DomainError("hermite_expand needs a non-trivial quadrature grid");
    HermiteExpansion out;
    out.coefficients.assign(cap, 0.0);
    if (!f) return out;
    const double dx = 2.0 * half_width / static_cast<double>(points - 1);
    std::vector<double> xs(points), fx(points);
    std::vector<std::vector<double>> basis(points);
    for (std::size_t i = 0; i < points; ++i) {
        xs[i] = -half_width + dx * static_cast<double>(i);
        fx[i] = f(xs[i]);
        basis[i] = hermite::values(xs[i], cap);
    }
    for (std::size_t j = 0; j < cap; ++j) {
        CompensatedSum acc;
        for (std::size_t i = 0; i < points; ++i) {
            const double w = (i == 0 || i + 1 == points) ? 0.5 * dx : dx;
            acc.add(w * fx[i] * basis[i][j]);
        }
        out.coefficients[j] = acc.value();
    }
    std::vector<double> r2(points);
    for (std::size_t i = 0; i < points; ++i) {
        CompensatedSum acc;
        acc.add(fx[i]);
        for (std::size_t j = 0; j < cap; ++j) acc.add(-out.coefficients[j] * basis[i][j]);
        r2[i] = acc.value() * acc.value();
    }
    out.tail = std::sqrt(trapezoid(xs, r2));
    return out;
}

std::string to_string(ContinuumReference::Kind kind) {
    return kind == ContinuumReference::Kind::hermite_1d ? "hermite-1d" : "fine-lattice";
}

LatticeGrid restriction_grid(const ContinuumProblem& problem, double hbar) {
    if (!(hbar > 0.0) || !std::isfinite(hbar)) throw DomainError("hbar must be positive");
    if (!(problem.half_width > 0.0)) throw DomainError("box half-width must be positive");
    const int radius = static_cast<int>(std::lround(problem.half_width / hbar));
    if (radius < 1) throw DomainError("box half-width is below one lattice step");
    return LatticeGrid::build(1, hbar, radius);
}

namespace {

LatticeFunction restrict_function(const SpatialFunction& f, const LatticeGrid& grid) {
    if (!f) return LatticeFunction(grid);
    return LatticeFunction::from_function(grid, [&](const Point& x) { return Complex(f(x[0]), 0.0); });
}

void check_source(const ContinuumProblem& p) {
    if (static_cast<bool>(p.source_time) != static_cast<bool>(p.source_space)) {
        throw ConfigurationError("a separable source needs both its time and space factor");
    }
}

std::vector<double> sample_times(const StageGrid& st) {
    std::vector<double> t(st.steps + 1);
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = k == st.steps ? st.horizon : st.time(2 * k);
    return t;
}

ContinuumSolution hermite_solve(const ContinuumReference& ref, const ContinuumProblem& p, const LatticeGrid& target,
                                int threads) {
    if (p.potential.kind != PotentialKind::harmonic) {
        throw ConfigurationError("the hermite-1d reference needs the harmonic potential");
    }
    if (target.dim() != 1) throw ConfigurationError("the hermite-1d reference is one-dimensional");
    const std::size_t J = ref.mode_cap;
    if (J == 0) throw ConfigurationError("Hermite mode cap must be positive");

    const HermiteExpansion e0 = hermite_expand(p.u0, J);
    const HermiteExpansion e1 = hermite_expand(p.u1, J);
    const HermiteExpansion ef = hermite_expand(p.source_space, J);
    const double tail = std::max({e0.tail, e1.tail, ef.tail});
    if (tail > ref.tail_tolerance) {
        throw AccuracyError("data Hermite tail " + std::to_string(tail) + " exceeds " +
                            std::to_string(ref.tail_tolerance) + " with " + std::to_string(J) + " modes");
    }

    const StageGrid st = sample_stages(p.coeffs, p.horizon, p.dt);
    const std::size_t samples = st.steps + 1;
    Eigen::MatrixXcd vh(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(J));
    Eigen::MatrixXcd vth(vh.rows(), vh.cols());
    parallel_for(J, threads, [&](std::size_t j) {
        std::vector<Complex> f_stage;
        if (p.source_time) {
            f_stage.resize(st.stage_count());
            for (std::size_t i = 0; i < f_stage.size(); ++i) f_stage[i] = p.source_time(st.time(i)) * ef.coefficients[j];
        }
        const ModeTrajectory tr = integrate_mode(hermite::eigenvalue(j), st, f_stage, e0.coefficients[j],
                                                 e1.coefficients[j]);
        for (std::size_t k = 0; k < samples; ++k) {
            vh(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = tr.u[k];
            vth(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = tr.ut[k];
        }
    });

    Eigen::MatrixXd basis(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(target.site_count()));
    for (std::size_t i = 0; i < target.site_count(); ++i) {
        const std::vector<double> h = hermite::values(target.coordinate(i, 0), J);
        for (std::size_t j = 0; j < J; ++j) basis(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = h[j];
    }
    ContinuumSolution out;
    out.times = sample_times(st);
    out.v = vh * basis.cast<Complex>();
    out.vt = vth * basis.cast<Complex>();
    out.tail = tail;
    return out;
}

ContinuumSolution fine_solve(const ContinuumReference& ref, const ContinuumProblem& p, const LatticeGrid& target,
                             int threads) {
    if (target.dim() != 1) throw ConfigurationError("the fine-lattice reference is one-dimensional here");
    if (!(ref.hbar_ref > 0.0)) throw ConfigurationError("fine-lattice spacing must be positive");
    const double ratio = target.step() / ref.hbar_ref;
    const long r = std::lround(ratio);
    if (r < 1 || std::abs(ratio - static_cast<double>(r)) > 1e-9 * ratio) {
        throw ConfigurationError("hbar / hbar_ref must be a positive integer");
    }
    const LatticeGrid fine = LatticeGrid::build(1, ref.hbar_ref, target.radius() * static_cast<int>(r));
    const auto h = assemble_hamiltonian(fine, evaluate_potential(p.potential, fine));
    auto decomp = std::make_shared<const SpectralDecomposition>(spectral_decompose(h, fine.site_count()));
    const TrajectorySolution sol =
        propagate(decomp, p.coeffs, restrict_data(p, fine), {p.horizon, p.dt, 0.0, threads});

    // Coarse site m sits at fine site m r.
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(decomp->mode_count()),
                         static_cast<Eigen::Index>(target.site_count()));
    for (std::size_t mode = 0; mode < decomp->mode_count(); ++mode) {
        const Eigen::VectorXd ev = decomp->eigenvector_values(mode);
        for (std::size_t i = 0; i < target.site_count(); ++i) {
            MultiIndex m = target.multi_index(i);
            m[0] *= static_cast<int>(r);
            rows(static_cast<Eigen::Index>(mode), static_cast<Eigen::Index>(i)) = ev[static_cast<Eigen::Index>(fine.flat_index(m))];
        }
    }
    ContinuumSolution out;
    out.times = sol.times;
    out.v = sol.u_hat * rows.cast<Complex>();
    out.vt = sol.ut_hat * rows.cast<Complex>();
    return out;
}

}  // namespace

CauchyData restrict_data(const ContinuumProblem& problem, const LatticeGrid& grid) {
    check_source(problem);
    CauchyData d{restrict_function(problem.u0, grid), restrict_function(problem.u1, grid), Source::zero()};
    if (problem.source_time) d.f = Source::separable(problem.source_time, restrict_function(problem.source_space, grid));
    return d;
}

ContinuumSolution continuum_solve(const ContinuumReference& ref, const ContinuumProblem& problem,
                                  const LatticeGrid& target, int threads) {
    check_source(problem);
    return ref.kind == ContinuumReference::Kind::hermite_1d ? hermite_solve(ref, problem, target, threads)
                                                            : fine_solve(ref, problem, target, threads);
}

LatticeFunction defect_apply(const SmoothFunction& phi, const LatticeGrid& grid) {
    if (!phi.value || !phi.laplacian) throw ConfigurationError("defect needs a function and its Laplacian");
    LatticeFunction out(grid);
    const double h = grid.step();
    for (std::size_t i = 0; i < grid.site_count(); ++i) {
        if (grid.on_boundary(i)) continue;
        const Point x = grid.coordinates(i);
        const double centre = phi.value(x);
        double lap = 0.0;
        for (int axis = 0; axis < grid.dim(); ++axis) {
            Point xp = x, xm = x;
            xp[static_cast<std::size_t>(axis)] += h;
            xm[static_cast<std::size_t>(axis)] -= h;
            lap += (phi.value(xp) - centre) + (phi.value(xm) - centre);
        }
        out[i] = Complex(lap / (h * h) - phi.laplacian(x), 0.0);
    }
    return out;
}

DefectReport defect_report(const SmoothFunction& phi, int dim, std::span<const double> hbars,
                           const PotentialSpec& potential, double s, double half_width, int threads) {
    if (hbars.size() < 3) throw ConfigurationError("defect order needs at least three hbar values");
    if (!std::isfinite(s)) throw DomainError("Sobolev index must be finite");
    DefectReport rep;
    rep.s = s;
    rep.rows.resize(hbars.size());
    parallel_for(hbars.size(), threads, [&](std::size_t c) {
        const double hbar = hbars[c];
        if (!(hbar > 0.0)) throw DomainError("hbar must be positive");
        const int radius = static_cast<int>(std::lround(half_width / hbar));
        if (radius < 2) throw DomainError("box too small for an interior site");
        const LatticeGrid grid = LatticeGrid::build(dim, hbar, radius);
        const LatticeFunction d = defect_apply(phi, grid);
        DefectRow row;
        row.hbar = hbar;
        row.sites = grid.site_count();
        if (s == 0.0) {
            row.raw_norm = l2_norm(d);
        } else {
            const auto h = assemble_hamiltonian(grid, evaluate_potential(potential, grid));
            const SpectralDecomposition decomp = spectral_decompose(h, grid.site_count());
            row.raw_norm = sobolev_norm(decomp, d, s);
        }
        row.scaled_norm = std::pow(hbar, 0.5 * dim) * row.raw_norm;
        rep.rows[c] = row;
    });
    std::vector<double> hs, raw, scaled;
    bool positive = true;
    for (const auto& r : rep.rows) {
        hs.push_back(r.hbar);
        raw.push_back(r.raw_norm);
        scaled.push_back(r.scaled_norm);
        positive = positive && r.raw_norm > 0.0;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.fitted_order = positive ? log_log_slope(hs, scaled) : nan;
    rep.raw_order = positive ? log_log_slope(hs, raw) : nan;
    return rep;
}

namespace {

ConvergenceRow convergence_cell(const ContinuumProblem& p, const ConvergenceConfig& cfg, double hbar) {
    const LatticeGrid grid = restriction_grid(p, hbar);
    const auto h = assemble_hamiltonian(grid, evaluate_potential(p.potential, grid));
    auto decomp = std::make_shared<const SpectralDecomposition>(spectral_decompose(h, grid.site_count()));
    const TrajectorySolution u = propagate(decomp, p.coeffs, restrict_data(p, grid), {p.horizon, p.dt, cfg.s, 1});
    const ContinuumSolution v = continuum_solve(cfg.reference, p, grid, 1);

    const std::vector<double> w1 = sobolev_weights(*decomp, 1.0 + cfg.s);
    const std::vector<double> ws = sobolev_weights(*decomp, cfg.s);
    ConvergenceRow row;
    row.hbar = hbar;
    row.sites = grid.site_count();
    row.data_tail = v.tail;
    for (std::size_t k = 0; k < u.sample_count(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        const Eigen::VectorXcd d0 = decomp->analyse(v.v.row(r).transpose()) - u.u_hat.row(r).transpose();
        const Eigen::VectorXcd d1 = decomp->analyse(v.vt.row(r).transpose()) - u.ut_hat.row(r).transpose();
        const double e1 = std::sqrt(sobolev_norm_squared(w1, d0));
        const double es = std::sqrt(sobolev_norm_squared(ws, d1));
        row.sup_error_1ps = std::max(row.sup_error_1ps, e1);
        row.sup_error_s = std::max(row.sup_error_s, es);
        row.sup_error = std::max(row.sup_error, e1 + es);
    }
    return row;
}

}  // namespace

ConvergenceReport semiclassical_convergence(const ContinuumProblem& problem, const ConvergenceConfig& config) {
    if (config.hbars.empty()) throw ConfigurationError("hbar grid is empty");
    if (!std::isfinite(config.s) || config.s < 0.0) throw ConfigurationError("Sobolev index s must be >= 0");
    check_source(problem);
    ConvergenceReport rep;
    rep.s = config.s;
    const int n = 1;
    if (config.s <= 4.0 + 0.5 * n) {
        rep.warnings.push_back("s = " + std::to_string(config.s) + " does not exceed 4 + n/2; convergence is not covered");
    }
    if (!problem.potential.confining()) {
        rep.warnings.push_back("potential " + problem.potential.name() + " is not confining");
    }

    std::vector<double> hbars = config.hbars;
    std::sort(hbars.begin(), hbars.end(), std::greater<>());
    rep.rows.resize(hbars.size());
    parallel_for(hbars.size(), config.threads,
                 [&](std::size_t c) { rep.rows[c] = convergence_cell(problem, config, hbars[c]); });

    rep.strictly_decreasing = true;
    bool positive = rep.rows.front().sup_error > 0.0;
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        rep.strictly_decreasing = rep.strictly_decreasing && rep.rows[i].sup_error < rep.rows[i - 1].sup_error;
        positive = positive && rep.rows[i].sup_error > 0.0;
    }
    if (rep.rows.size() >= 2 && positive) {
        std::vector<double> hs, es;
        for (const auto& r : rep.rows) {
            hs.push_back(r.hbar);
            es.push_back(r.sup_error);
        }
        rep.fitted_order = log_log_slope(hs, es);
    } else {
        rep.fitted_order = std::numeric_limits<double>::quiet_NaN();
    }
    rep.passed = rep.strictly_decreasing;
    return rep;
}

VeryWeakConvergenceReport veryweak_semiclassical(const ContinuumProblem& problem, const RegularisedNet& a,
                                                 const RegularisedNet& q, std::span<const double> epsilons,
                                                 const ConvergenceConfig& config) {
    if (config.hbars.empty()) throw ConfigurationError("hbar grid is empty");
    if (epsilons.empty()) throw ConfigurationError("epsilon grid is empty");
    a.base.validate(problem.horizon);
    q.base.validate(problem.horizon);
    const PositivityCertificate cert = certify_positive(a.base, problem.horizon);
    if (!cert.valid) throw CertificateError("coefficient a has no positivity certificate: " + cert.reason);
    for (double eps : epsilons) {
        if (!(eps > 0.0 && eps < 1.0)) throw ConfigurationError("epsilon values must lie in (0, 1)");
        if (a.base.singular() && problem.dt > a.mollifier.omega(eps) / 20.0) {
            throw ConfigurationError("time step does not resolve the mollifier at eps = " + std::to_string(eps));
        }
    }

    VeryWeakConvergenceReport rep;
    rep.passed = true;
    for (double eps : epsilons) {
        ContinuumProblem p = problem;
        p.coeffs = regularised_coefficients(a, q, eps);
        rep.epsilons.push_back(eps);
        rep.columns.push_back(semiclassical_convergence(p, config));
        rep.passed = rep.passed && rep.columns.back().passed;
    }
    return rep;
}

}  // namespace semiwave
