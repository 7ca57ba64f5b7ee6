#include "semiwave/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "semiwave/errors.hpp"

namespace semiwave {

namespace {

constexpr Complex kI{0.0, 1.0};

double relative_slack(double lhs, double rhs) {
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    if (scale == 0.0) return 0.0;
    return (rhs - lhs) / scale;
}

void record(SlackRecord& r, double slack, std::size_t sample, std::size_t mode, double tolerance) {
    if (slack < r.worst) {
        r.worst = slack;
        r.sample = sample;
        r.mode = mode;
    }
    if (slack < -tolerance) ++r.violations;
}

}  // namespace

CoefficientFunctions CoefficientFunctions::constant(double a, double q) {
    return {[a](double) { return a; }, [](double) { return 0.0; }, [q](double) { return q; }};
}

EnergyConstants energy_constants(const CoefficientBounds& b, double horizon) {
    EnergyConstants c;
    c.c0 = std::min(b.a0, 1.0);
    c.c1 = std::max(b.a1, 1.0);
    c.kappa1 = (1.0 + b.da_sup + b.q_sup + 2.0 * b.a_sup) / c.c0;
    c.kappa2 = 1.0 + b.a_sup;
    c.c_t = (1.0 + b.a_sup) * std::exp(c.kappa1 * horizon) / c.c0;
    return c;
}

StageGrid sample_stages(const CoefficientFunctions& coeffs, double horizon, double dt) {
    if (!coeffs.a || !coeffs.q) throw ConfigurationError("coefficients a and q must both be provided");
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ConfigurationError("final time T must be >= 0");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigurationError("time step must be positive");
    StageGrid g;
    g.horizon = horizon;
    g.steps = horizon == 0.0 ? 0 : static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9));
    g.steps = std::max<std::size_t>(g.steps, horizon == 0.0 ? 0 : 1);
    g.h = g.steps == 0 ? dt : horizon / static_cast<double>(g.steps);
    g.a.resize(g.stage_count());
    g.q.resize(g.stage_count());
    for (std::size_t i = 0; i < g.stage_count(); ++i) {
        const double t = i == g.stage_count() - 1 ? horizon : g.time(i);
        g.a[i] = coeffs.a(t);
        g.q[i] = coeffs.q(t);
        if (!std::isfinite(g.a[i]) || !std::isfinite(g.q[i])) {
            throw DomainError("coefficients are not finite at t = " + std::to_string(t));
        }
        if (!(g.a[i] > 0.0)) {
            throw DomainError("a(t) must be positive; a(" + std::to_string(t) + ") = " + std::to_string(g.a[i]));
        }
    }
    return g;
}

CoefficientBounds coefficient_bounds(const CoefficientFunctions& coeffs, const StageGrid& stages) {
    CoefficientBounds b;
    b.a0 = std::numeric_limits<double>::infinity();
    b.a1 = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < stages.stage_count(); ++i) {
        const double t = stages.time(i);
        b.a0 = std::min(b.a0, stages.a[i]);
        b.a1 = std::max(b.a1, stages.a[i]);
        b.a_sup = std::max(b.a_sup, std::abs(stages.a[i]));
        b.q_sup = std::max(b.q_sup, std::abs(stages.q[i]));
        const double da = coeffs.a_prime ? coeffs.a_prime(t)
                                         : (coeffs.a(t + stages.h) - coeffs.a(t - stages.h)) / (2.0 * stages.h);
        b.da_sup = std::max(b.da_sup, std::abs(da));
    }
    return b;
}

Source Source::separable(TimeFunction g, LatticeFunction h) {
    Source s;
    s.kind_ = Kind::separable;
    s.g_ = std::move(g);
    s.h_ = std::make_shared<const LatticeFunction>(std::move(h));
    return s;
}

Source Source::general(std::function<LatticeFunction(double)> f) {
    Source s;
    s.kind_ = Kind::general;
    s.f_ = std::move(f);
    return s;
}

LatticeFunction Source::at(double t, const LatticeGrid& grid) const {
    switch (kind_) {
        case Kind::zero:
            return LatticeFunction(grid);
        case Kind::separable: {
            if (!(h_->grid() == grid)) throw DomainError("source lives on a different grid");
            return LatticeFunction(grid, g_(t) * h_->values());
        }
        case Kind::general: {
            LatticeFunction f = f_(t);
            if (!(f.grid() == grid)) throw DomainError("source lives on a different grid");
            return f;
        }
    }
    return LatticeFunction(grid);
}

std::pair<Complex, Complex> ModeProblem::initial_state(const SpectralDecomposition& decomp, std::size_t mode) const {
    const auto k = static_cast<Eigen::Index>(mode);
    return {kI * decomp.bracket(mode) * u0_hat[k], u1_hat[k]};
}

ModeProblem transform_problem(const SpectralDecomposition& decomp, const CauchyData& data, const StageGrid& stages,
                              int threads) {
    if (!(data.u0.grid() == decomp.grid()) || !(data.u1.grid() == decomp.grid())) {
        throw DomainError("Cauchy data and decomposition live on different grids");
    }
    ModeProblem p;
    p.u0_hat = decomp.analyse(data.u0.values());
    p.u1_hat = decomp.analyse(data.u1.values());
    const auto stage_count = static_cast<Eigen::Index>(stages.stage_count());
    const auto m = static_cast<Eigen::Index>(decomp.mode_count());
    switch (data.f.kind()) {
        case Source::Kind::zero:
            break;
        case Source::Kind::separable: {
            if (!(data.f.space_factor().grid() == decomp.grid())) {
                throw DomainError("source lives on a different grid");
            }
            const Eigen::VectorXcd h_hat = decomp.analyse(data.f.space_factor().values());
            p.f_hat.resize(stage_count, m);
            for (Eigen::Index i = 0; i < stage_count; ++i) {
                const double g = data.f.time_factor()(stages.time(static_cast<std::size_t>(i)));
                if (!std::isfinite(g)) throw DomainError("source time factor is not finite");
                p.f_hat.row(i) = g * h_hat.transpose();
            }
            break;
        }
        case Source::Kind::general: {
            p.f_hat.resize(stage_count, m);
            parallel_for(stages.stage_count(), threads, [&](std::size_t i) {
                const LatticeFunction f = data.f.at(stages.time(i), decomp.grid());
                p.f_hat.row(static_cast<Eigen::Index>(i)) = decomp.analyse(f.values()).transpose();
            });
            break;
        }
    }
    return p;
}

std::pair<Complex, Complex> exact_constant_mode(double a, double lambda, Complex u0, Complex u1, double t) {
    if (!(a > 0.0)) throw DomainError("exact_constant_mode needs a > 0");
    if (!(lambda >= 0.0)) throw DomainError("exact_constant_mode needs lambda >= 0");
    if (lambda == 0.0) return {u0 + u1 * t, u1};
    const double w = std::sqrt(a * lambda);
    const double c = std::cos(w * t), s = std::sin(w * t);
    return {u0 * c + u1 * s / w, -u0 * w * s + u1 * c};
}

ModeTrajectory integrate_mode(double lambda, const StageGrid& stages, std::span<const Complex> f_stage, Complex u0,
                              Complex u1) {
    const double b = std::sqrt(1.0 + lambda);
    const double h = stages.h;
    const bool forced = !f_stage.empty();
    if (forced && f_stage.size() != stages.stage_count()) {
        throw DomainError("source samples do not match the stage grid");
    }
    auto rhs = [&](std::size_t stage, Complex v1, Complex v2, Complex& d1, Complex& d2) {
        const double a = stages.a[stage];
        const double q = stages.q[stage];
        d1 = kI * b * v2;
        d2 = kI * b * a * v1 + kI * (q - a) / b * v1 + (forced ? f_stage[stage] : Complex{});
    };
    ModeTrajectory out;
    out.u.resize(stages.steps + 1);
    out.ut.resize(stages.steps + 1);
    out.u[0] = u0;
    out.ut[0] = u1;
    Complex w1 = kI * b * u0, w2 = u1;
    for (std::size_t k = 0; k < stages.steps; ++k) {
        Complex k11, k12, k21, k22, k31, k32, k41, k42;
        rhs(2 * k, w1, w2, k11, k12);
        rhs(2 * k + 1, w1 + 0.5 * h * k11, w2 + 0.5 * h * k12, k21, k22);
        rhs(2 * k + 1, w1 + 0.5 * h * k21, w2 + 0.5 * h * k22, k31, k32);
        rhs(2 * k + 2, w1 + h * k31, w2 + h * k32, k41, k42);
        w1 += h / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41);
        w2 += h / 6.0 * (k12 + 2.0 * k22 + 2.0 * k32 + k42);
        out.u[k + 1] = w1 / (kI * b);
        out.ut[k + 1] = w2;
    }
    return out;
}

double stability_limit(const SpectralDecomposition& decomp, const StageGrid& stages) {
    double a_sup = 0.0;
    for (double a : stages.a) a_sup = std::max(a_sup, std::abs(a));
    return 0.5 / (std::sqrt(a_sup) * decomp.bracket(decomp.mode_count() - 1));
}

LatticeFunction TrajectorySolution::u_at(std::size_t sample) const {
    return LatticeFunction(decomp->grid(), decomp->synthesise(u_hat.row(static_cast<Eigen::Index>(sample)).transpose()));
}

LatticeFunction TrajectorySolution::ut_at(std::size_t sample) const {
    return LatticeFunction(decomp->grid(),
                           decomp->synthesise(ut_hat.row(static_cast<Eigen::Index>(sample)).transpose()));
}

void refresh_norms(TrajectorySolution& solution) {
    const std::vector<double> w1 = sobolev_weights(*solution.decomp, 1.0 + solution.s);
    const std::vector<double> ws = sobolev_weights(*solution.decomp, solution.s);
    solution.norm_1ps.assign(solution.sample_count(), 0.0);
    solution.norm_s.assign(solution.sample_count(), 0.0);
    for (std::size_t k = 0; k < solution.sample_count(); ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        solution.norm_1ps[k] = std::sqrt(sobolev_norm_squared(w1, solution.u_hat.row(row).transpose()));
        solution.norm_s[k] = std::sqrt(sobolev_norm_squared(ws, solution.ut_hat.row(row).transpose()));
    }
}

TrajectorySolution propagate(std::shared_ptr<const SpectralDecomposition> decomp, const CoefficientFunctions& coeffs,
                             const CauchyData& data, const PropagationConfig& config) {
    if (!decomp) throw ConfigurationError("propagate needs a spectral decomposition");
    if (!std::isfinite(config.s)) throw ConfigurationError("Sobolev index s must be finite");
    TrajectorySolution sol;
    sol.decomp = decomp;
    sol.s = config.s;
    sol.stages = sample_stages(coeffs, config.horizon, config.dt);
    const StageGrid& st = sol.stages;
    const double limit = stability_limit(*decomp, st);
    if (st.steps > 0 && st.h > limit * (1.0 + 1e-12)) {
        throw ConfigurationError("time step " + std::to_string(st.h) + " exceeds the stability bound " +
                                 std::to_string(limit) + " = 0.5 / (sqrt(sup a) <xi_max>)");
    }
    const ModeProblem problem = transform_problem(*decomp, data, st, config.threads);

    const std::size_t samples = st.steps + 1;
    const std::size_t m = decomp->mode_count();
    sol.times.resize(samples);
    for (std::size_t k = 0; k < samples; ++k) sol.times[k] = k == st.steps ? st.horizon : st.time(2 * k);
    sol.u_hat.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(m));
    sol.ut_hat.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(m));

    parallel_for(m, config.threads, [&](std::size_t mode) {
        const auto col = static_cast<Eigen::Index>(mode);
        std::vector<Complex> f_stage;
        if (problem.f_hat.size() > 0) {
            f_stage.resize(st.stage_count());
            for (std::size_t i = 0; i < f_stage.size(); ++i) f_stage[i] = problem.f_hat(static_cast<Eigen::Index>(i), col);
        }
        const ModeTrajectory traj =
            integrate_mode(decomp->eigenvalue(mode), st, f_stage, problem.u0_hat[col], problem.u1_hat[col]);
        for (std::size_t k = 0; k < samples; ++k) {
            if (!std::isfinite(traj.u[k].real()) || !std::isfinite(traj.u[k].imag()) ||
                !std::isfinite(traj.ut[k].real()) || !std::isfinite(traj.ut[k].imag())) {
                throw DivergenceError("non-finite state in mode " + std::to_string(mode) + " at t = " +
                                          std::to_string(sol.times[k]),
                                      mode);
            }
            sol.u_hat(static_cast<Eigen::Index>(k), col) = traj.u[k];
            sol.ut_hat(static_cast<Eigen::Index>(k), col) = traj.ut[k];
        }
    });

    if (problem.f_hat.size() > 0) {
        sol.f_hat.resize(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(m));
        for (std::size_t k = 0; k < samples; ++k) {
            sol.f_hat.row(static_cast<Eigen::Index>(k)) = problem.f_hat.row(static_cast<Eigen::Index>(2 * k));
        }
    }
    refresh_norms(sol);
    return sol;
}

double l2_time_norm(const TrajectorySolution& solution) {
    std::vector<double> sq(solution.sample_count());
    for (std::size_t k = 0; k < sq.size(); ++k) sq[k] = solution.norm_1ps[k] * solution.norm_1ps[k];
    return std::sqrt(trapezoid(solution.times, sq));
}

double l2_time_difference(const TrajectorySolution& a, const TrajectorySolution& b) {
    if (a.decomp->id() != b.decomp->id() || a.times != b.times) {
        throw DomainError("solutions must share a decomposition and a time grid");
    }
    const std::vector<double> w = sobolev_weights(*a.decomp, 1.0 + a.s);
    std::vector<double> sq(a.sample_count());
    for (std::size_t k = 0; k < sq.size(); ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        sq[k] = sobolev_norm_squared(w, (a.u_hat.row(row) - b.u_hat.row(row)).transpose());
    }
    return std::sqrt(trapezoid(a.times, sq));
}

void inject_energy_fault(TrajectorySolution& solution, double factor) {
    if (!(factor > 0.0)) throw DomainError("fault factor must be positive");
    const auto mid = static_cast<Eigen::Index>(solution.sample_count() / 2);
    const double scale = std::sqrt(factor);
    solution.u_hat.row(mid) *= scale;
    solution.ut_hat.row(mid) *= scale;
    refresh_norms(solution);
}

EnergyBoundReport verify_energy_estimate(const TrajectorySolution& solution, const CoefficientFunctions& coeffs,
                                         double tolerance) {
    const SpectralDecomposition& decomp = *solution.decomp;
    const StageGrid& st = solution.stages;
    EnergyBoundReport r;
    r.tolerance = tolerance;
    r.bounds = coefficient_bounds(coeffs, st);
    r.constants = energy_constants(r.bounds, st.horizon);
    const EnergyConstants& c = r.constants;

    for (double a : st.a) {
        Eigen::Matrix2d s_mat{{a, 0.0}, {0.0, 1.0}};
        Eigen::Matrix2d a_mat{{0.0, 1.0}, {a, 0.0}};
        r.symmetriser_defect =
            std::max(r.symmetriser_defect, (s_mat * a_mat - a_mat.transpose() * s_mat).cwiseAbs().maxCoeff());
    }

    const std::size_t samples = solution.sample_count();
    const std::size_t m = decomp.mode_count();
    const bool forced = solution.f_hat.size() > 0;
    const std::vector<double> ws = sobolev_weights(decomp, solution.s);

    // Per-mode energies and |U|^2 at every sample.
    Eigen::MatrixXd energy(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(m));
    Eigen::MatrixXd usq(static_cast<Eigen::Index>(samples), static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < samples; ++k) {
        const double a = st.a[2 * k];
        for (std::size_t j = 0; j < m; ++j) {
            const auto row = static_cast<Eigen::Index>(k), col = static_cast<Eigen::Index>(j);
            const double u1 = (1.0 + decomp.eigenvalue(j)) * std::norm(solution.u_hat(row, col));
            const double u2 = std::norm(solution.ut_hat(row, col));
            energy(row, col) = a * u1 + u2;
            usq(row, col) = u1 + u2;
        }
    }

    for (std::size_t k = 0; k < samples; ++k) {
        for (std::size_t j = 0; j < m; ++j) {
            const auto row = static_cast<Eigen::Index>(k), col = static_cast<Eigen::Index>(j);
            record(r.sandwich, relative_slack(c.c0 * usq(row, col), energy(row, col)), k, j, tolerance);
            record(r.sandwich, relative_slack(energy(row, col), c.c1 * usq(row, col)), k, j, tolerance);
        }
    }

    for (std::size_t j = 0; j < m; ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        CompensatedSum forcing;
        for (std::size_t k = 0; k < samples; ++k) {
            const auto row = static_cast<Eigen::Index>(k);
            if (forced && k > 0) {
                const double dt = solution.times[k] - solution.times[k - 1];
                forcing.add(0.5 * dt * (std::norm(solution.f_hat(row, col)) + std::norm(solution.f_hat(row - 1, col))));
            }
            const double rhs = std::exp(c.kappa1 * solution.times[k]) * (energy(0, col) + c.kappa2 * forcing.value());
            record(r.gronwall, relative_slack(energy(row, col), rhs), k, j, tolerance);
        }
    }

    std::vector<double> source_norm(samples, 0.0);
    r.aggregate_lhs.assign(samples, 0.0);
    for (std::size_t k = 0; k < samples; ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        CompensatedSum lhs;
        for (std::size_t j = 0; j < m; ++j) lhs.add(ws[j] * usq(row, static_cast<Eigen::Index>(j)));
        r.aggregate_lhs[k] = lhs.value();
        if (forced) source_norm[k] = sobolev_norm_squared(ws, solution.f_hat.row(row).transpose());
    }
    r.aggregate_rhs = c.c_t * (r.aggregate_lhs[0] + trapezoid(solution.times, source_norm));
    for (std::size_t k = 0; k < samples; ++k) {
        record(r.aggregate, relative_slack(r.aggregate_lhs[k], r.aggregate_rhs), k, 0, tolerance);
    }

    r.passed = r.sandwich.worst >= -tolerance && r.gronwall.worst >= -tolerance &&
               r.aggregate.worst >= -tolerance && r.symmetriser_defect <= 1e-14;
    return r;
}

ClassicalSolution classical_solve(std::shared_ptr<const SpectralDecomposition> decomp,
                                  const CoefficientFunctions& coeffs, const CauchyData& data,
                                  const PropagationConfig& config) {
    ClassicalSolution out;
    out.decomp = decomp;
    out.trajectory = propagate(decomp, coeffs, data, config);
    out.energy = verify_energy_estimate(out.trajectory, coeffs);
    return out;
}

ClassicalSolution classical_solve(const LatticeGrid& grid, const PotentialSpec& potential,
                                  const CoefficientFunctions& coeffs, const CauchyData& data,
                                  const ClassicalConfig& config) {
    const HamiltonianMatrix h = assemble_hamiltonian(grid, evaluate_potential(potential, grid));
    const std::size_t modes = config.mode_count == 0 ? grid.site_count() : config.mode_count;
    auto decomp = std::make_shared<const SpectralDecomposition>(spectral_decompose(h, modes, config.decomposition));
    return classical_solve(std::move(decomp), coeffs, data, config.propagation);
}

}  // namespace semiwave
