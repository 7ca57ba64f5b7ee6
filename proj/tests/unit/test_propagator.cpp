#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "semiwave/errors.hpp"
#include "semiwave/propagator.hpp"

using namespace semiwave;

namespace {

std::shared_ptr<const SpectralDecomposition> harmonic_1d(double step, int radius) {
    const auto g = LatticeGrid::build(1, step, radius);
    const auto h = assemble_hamiltonian(g, evaluate_potential(PotentialSpec::harmonic(), g));
    return std::make_shared<const SpectralDecomposition>(spectral_decompose(h, g.site_count()));
}

CauchyData mode_data(const SpectralDecomposition& d, std::size_t mode, Complex c0, Complex c1) {
    return {LatticeFunction(d.grid(), c0 * d.eigenvector(mode).values()),
            LatticeFunction(d.grid(), c1 * d.eigenvector(mode).values()), Source::zero()};
}

double max_mode_error(double dt) {
    const double a = 4.0, lambda = 25.0;
    const auto st = sample_stages(CoefficientFunctions::constant(a), 1.0, dt);
    const auto traj = integrate_mode(lambda, st, {}, 1.0, 0.5);
    double err = 0.0;
    for (std::size_t k = 0; k <= st.steps; ++k) {
        const auto [u, ut] = exact_constant_mode(a, lambda, 1.0, 0.5, st.time(2 * k));
        err = std::max(err, std::abs(traj.u[k] - u));
    }
    return err;
}

}  // namespace

TEST_CASE("exact constant mode examples") {
    auto [u, ut] = exact_constant_mode(1.0, 0.0, 1.0, 2.0, 3.0);
    CHECK(u == Complex(7.0));
    CHECK(ut == Complex(2.0));
    CHECK(std::abs(exact_constant_mode(4.0, 1.0, 1.0, 0.0, std::numbers::pi / 2).first + 1.0) < 1e-15);
    const double pi = std::numbers::pi;
    CHECK(std::abs(exact_constant_mode(1.0, pi * pi, 0.0, pi, 1.0).first) < 1e-15);
    CHECK_THROWS_AS(exact_constant_mode(0.0, 1.0, 1.0, 0.0, 1.0), DomainError);
    CHECK_THROWS_AS(exact_constant_mode(1.0, -1.0, 1.0, 0.0, 1.0), DomainError);
}

TEST_CASE("transform problem examples") {
    const auto d = harmonic_1d(0.5, 10);
    const auto st = sample_stages(CoefficientFunctions::constant(1.0), 1.0, 0.01);
    auto p = transform_problem(*d, mode_data(*d, 3, 1.0, 0.0), st);
    auto [w1, w2] = p.initial_state(*d, 3);
    CHECK(std::abs(w1 - Complex(0, d->bracket(3))) < 1e-13);
    CHECK(std::abs(w2) < 1e-13);
    for (std::size_t k = 0; k < d->mode_count(); ++k) {
        if (k != 3) CHECK(std::abs(p.u0_hat[static_cast<Eigen::Index>(k)]) < 1e-13);
    }
    CHECK(p.f_hat.size() == 0);

    p = transform_problem(*d, mode_data(*d, 2, 0.0, 1.0), st);
    std::tie(w1, w2) = p.initial_state(*d, 2);
    CHECK(std::abs(w1) < 1e-13);
    CHECK(std::abs(w2 - 1.0) < 1e-13);
}

TEST_CASE("propagation matches the closed form") {
    const auto d = harmonic_1d(0.25, 16);
    PropagationConfig cfg;
    cfg.horizon = 1.0;
    cfg.dt = 1e-3;
    const std::size_t mode = 2;
    const auto sol = propagate(d, CoefficientFunctions::constant(1.0), mode_data(*d, mode, 1.0, 0.0), cfg);
    const auto [u, ut] = exact_constant_mode(1.0, d->eigenvalue(mode), 1.0, 0.0, 1.0);
    const Complex got = sol.u_hat(static_cast<Eigen::Index>(sol.sample_count() - 1), static_cast<Eigen::Index>(mode));
    CHECK(std::abs(got - u) <= 1e-6 * std::abs(u));
    CHECK(std::abs(sol.u_hat(0, 2) - 1.0) < 1e-13);
    CHECK(sol.times.back() == 1.0);
}

TEST_CASE("initial samples reproduce the data exactly") {
    const auto d = harmonic_1d(0.5, 8);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    LatticeFunction u0(d->grid()), u1(d->grid());
    for (std::size_t i = 0; i < u0.size(); ++i) {
        u0[i] = Complex(n(rng), n(rng));
        u1[i] = Complex(n(rng), n(rng));
    }
    PropagationConfig cfg;
    cfg.horizon = 0.5;
    cfg.dt = 0.01;
    const auto sol = propagate(d, CoefficientFunctions::constant(1.0), {u0, u1, Source::zero()}, cfg);
    CHECK((sol.u_hat.row(0).transpose() - d->analyse(u0.values())).norm() == 0.0);
    CHECK((sol.ut_hat.row(0).transpose() - d->analyse(u1.values())).norm() == 0.0);
}

TEST_CASE("manufactured solution") {
    CoefficientFunctions c{[](double) { return 1.0; }, [](double) { return 0.0; }, [](double t) { return 1.0 + t; }};
    const auto st = sample_stages(c, 1.0, 1e-3);
    std::vector<Complex> f(st.stage_count());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = st.time(i) * std::cos(st.time(i));
    const auto traj = integrate_mode(0.0, st, f, 1.0, 0.0);
    for (std::size_t k = 0; k <= st.steps; ++k) {
        const double t = st.time(2 * k);
        CHECK(std::abs(traj.u[k] - std::cos(t)) < 1e-6);
        CHECK(std::abs(traj.ut[k] + std::sin(t)) < 1e-6);
    }
}

TEST_CASE("zero data gives a zero trajectory") {
    const auto d = harmonic_1d(0.5, 8);
    PropagationConfig cfg;
    cfg.dt = 0.01;
    const auto sol = propagate(d, CoefficientFunctions::constant(2.0, 0.3),
                               {LatticeFunction(d->grid()), LatticeFunction(d->grid()), Source::zero()}, cfg);
    CHECK(sol.u_hat.isZero(0.0));
    CHECK(sol.ut_hat.isZero(0.0));
}

TEST_CASE("fourth order convergence") {
    std::vector<double> dts{1e-2, 5e-3, 2.5e-3, 1.25e-3}, errs;
    for (double dt : dts) errs.push_back(max_mode_error(dt));
    CHECK(std::abs(log_log_slope(dts, errs) - 4.0) <= 0.3);
}

TEST_CASE("linearity") {
    const auto d = harmonic_1d(0.5, 8);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    auto rnd = [&] {
        LatticeFunction f(d->grid());
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = Complex(n(rng), n(rng));
        return f;
    };
    CoefficientFunctions c{[](double t) { return 2.0 + std::sin(t); }, {}, [](double t) { return std::cos(t); }};
    PropagationConfig cfg;
    cfg.dt = 0.005;
    const auto a0 = rnd(), a1 = rnd(), b0 = rnd(), b1 = rnd(), h1 = rnd(), h2 = rnd();
    const auto ga = [](double t) { return std::sin(3 * t); };
    const auto gb = [](double t) { return t * t; };
    const Complex alpha(0.7, -0.2), beta(-1.3, 0.4);
    const auto sa = propagate(d, c, {a0, a1, Source::separable(ga, h1)}, cfg);
    const auto sb = propagate(d, c, {b0, b1, Source::separable(gb, h2)}, cfg);
    auto combo = [&](const LatticeFunction& x, const LatticeFunction& y) {
        return LatticeFunction(d->grid(), alpha * x.values() + beta * y.values());
    };
    const auto grid = d->grid();
    const Source mixed = Source::general([&, grid](double t) {
        return LatticeFunction(grid, alpha * ga(t) * h1.values() + beta * gb(t) * h2.values());
    });
    const auto sc = propagate(d, c, {combo(a0, b0), combo(a1, b1), mixed}, cfg);
    const Eigen::MatrixXcd expected = alpha * sa.u_hat + beta * sb.u_hat;
    CHECK((sc.u_hat - expected).cwiseAbs().maxCoeff() <= 1e-10 * expected.cwiseAbs().maxCoeff());
}

TEST_CASE("time reversal") {
    const double a = 1.5, lambda = 9.0, horizon = 1.0;
    const auto st = sample_stages(CoefficientFunctions::constant(a), horizon, 1e-3);
    const auto fwd = integrate_mode(lambda, st, {}, Complex(0.3, 0.1), Complex(-0.2, 0.5));
    const auto back = integrate_mode(lambda, st, {}, fwd.u.back(), -fwd.ut.back());
    CHECK(std::abs(back.u.back() - Complex(0.3, 0.1)) < 1e-5);
    CHECK(std::abs(back.ut.back() + Complex(-0.2, 0.5)) < 1e-5);
}

TEST_CASE("stability bound and divergence") {
    const auto d = harmonic_1d(0.25, 16);
    PropagationConfig cfg;
    cfg.dt = 0.1;
    CHECK_THROWS_AS(propagate(d, CoefficientFunctions::constant(1.0), mode_data(*d, 0, 1.0, 0.0), cfg),
                    ConfigurationError);
    cfg.dt = 1e-3;
    cfg.horizon = 0.1;
    try {
        (void)propagate(d, CoefficientFunctions::constant(1.0, 1e300), mode_data(*d, 0, 1.0, 0.0), cfg);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(e.mode() == 0);
    }
    CoefficientFunctions bad{[](double t) { return t - 0.5; }, {}, [](double) { return 0.0; }};
    CHECK_THROWS_AS(propagate(d, bad, mode_data(*d, 0, 1.0, 0.0), cfg), DomainError);
}

TEST_CASE("energy estimate holds for constant coefficients") {
    const auto d = harmonic_1d(0.25, 16);
    PropagationConfig cfg;
    cfg.dt = 0.005;
    const auto c = CoefficientFunctions::constant(1.0);
    const auto sol = propagate(d, c, mode_data(*d, 1, 1.0, 0.5), cfg);
    const auto r = verify_energy_estimate(sol, c);
    CHECK(r.passed);
    CHECK(r.sandwich.worst >= 0.0 - 1e-15);
    CHECK(r.gronwall.worst >= 0.0);
    CHECK(r.aggregate.worst >= 0.0);
    CHECK(r.symmetriser_defect == 0.0);
    CHECK(r.constants.c_t == doctest::Approx(2.0 * std::exp(3.0)));
}

TEST_CASE("energy estimate holds for smooth variable coefficients") {
    const auto d = harmonic_1d(0.25, 16);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n;
    LatticeFunction u0(d->grid()), u1(d->grid()), h(d->grid());
    for (std::size_t i = 0; i < u0.size(); ++i) {
        const double x = d->grid().coordinate(i, 0);
        u0[i] = std::exp(-x * x) * Complex(n(rng), n(rng));
        u1[i] = std::exp(-x * x) * Complex(n(rng), n(rng));
        h[i] = std::exp(-0.5 * x * x);
    }
    CoefficientFunctions c{[](double t) { return 2.0 + std::sin(t); }, [](double t) { return std::cos(t); },
                           [](double t) { return std::cos(t); }};
    PropagationConfig cfg;
    cfg.dt = 0.005;
    cfg.s = 1.0;
    const auto sol = propagate(d, c, {u0, u1, Source::separable([](double t) { return std::sin(2 * t); }, h)}, cfg);
    const auto r = verify_energy_estimate(sol, c);
    CHECK(r.passed);
    CHECK(r.gronwall.violations == 0);
}

TEST_CASE("fault injection is reported") {
    const auto d = harmonic_1d(0.25, 16);
    PropagationConfig cfg;
    cfg.dt = 0.005;
    cfg.horizon = 0.2;
    const auto c = CoefficientFunctions::constant(1.0);
    auto sol = propagate(d, c, mode_data(*d, 1, 1.0, 0.5), cfg);
    CHECK(verify_energy_estimate(sol, c).passed);
    inject_energy_fault(sol, 2.0);
    const auto r = verify_energy_estimate(sol, c);
    CHECK_FALSE(r.passed);
    CHECK(r.gronwall.violations > 0);
    CHECK(r.gronwall.sample == sol.sample_count() / 2);
}

TEST_CASE("classical solve") {
    const auto g = LatticeGrid::build(1, 0.5, 6);
    const auto h = assemble_hamiltonian(g, evaluate_potential(PotentialSpec::zero(), g));
    const auto d = std::make_shared<const SpectralDecomposition>(spectral_decompose(h, g.site_count()));
    ClassicalConfig cfg;
    cfg.propagation.dt = 1e-3;
    cfg.propagation.horizon = 1.0;
    const double a = 1.3;
    const auto sol = classical_solve(g, PotentialSpec::zero(), CoefficientFunctions::constant(a),
                                     mode_data(*d, 0, 1.0, 0.0), cfg);
    const double w = std::sqrt(a * d->eigenvalue(0));
    for (std::size_t k = 0; k < sol.trajectory.sample_count(); k += 100) {
        const auto u = sol.trajectory.u_at(k);
        const Eigen::VectorXcd expected = std::cos(w * sol.trajectory.times[k]) * d->eigenvector(0).values();
        CHECK((u.values() - expected).cwiseAbs().maxCoeff() <= 1e-6);
    }
    CHECK(sol.energy.passed);

    // Harmonic potential, u1 = 0, f = 0: the H^{1+s} trace stays below C_T ||u0||.
    const auto gh = LatticeGrid::build(1, 0.25, 16);
    LatticeFunction u0 = LatticeFunction::from_function(gh, [](const Point& x) { return std::exp(-x[0] * x[0]); });
    cfg.propagation.dt = 0.005;
    const auto hs = classical_solve(gh, PotentialSpec::harmonic(), CoefficientFunctions::constant(1.0),
                                    {u0, LatticeFunction(gh), Source::zero()}, cfg);
    for (double n : hs.trajectory.norm_1ps) CHECK(n <= hs.energy.constants.c_t * hs.trajectory.norm_1ps[0]);

    const auto zero = classical_solve(gh, PotentialSpec::harmonic(), CoefficientFunctions::constant(1.0),
                                      {LatticeFunction(gh), LatticeFunction(gh), Source::zero()}, cfg);
    CHECK(zero.trajectory.u_hat.isZero(0.0));
}

TEST_CASE("parallel propagation is bitwise deterministic") {
    const auto d = harmonic_1d(0.25, 16);
    const auto u0 = LatticeFunction::from_function(d->grid(), [](const Point& x) { return std::exp(-x[0] * x[0]); });
    CoefficientFunctions c{[](double t) { return 2.0 + std::sin(t); }, {}, [](double t) { return std::cos(t); }};
    PropagationConfig cfg;
    cfg.dt = 0.005;
    const auto one = propagate(d, c, {u0, u0, Source::zero()}, cfg);
    cfg.threads = 8;
    const auto many = propagate(d, c, {u0, u0, Source::zero()}, cfg);
    CHECK((one.u_hat.array() == many.u_hat.array()).all());
    CHECK(one.norm_1ps == many.norm_1ps);
}
