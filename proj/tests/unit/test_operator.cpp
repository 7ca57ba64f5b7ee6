#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "semiwave/errors.hpp"
#include "semiwave/hamiltonian.hpp"

using namespace semiwave;

namespace {

HamiltonianMatrix build(const LatticeGrid& g, const PotentialSpec& v) {
    return assemble_hamiltonian(g, evaluate_potential(v, g));
}

LatticeFunction random_function(const LatticeGrid& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    LatticeFunction f(g);
    for (std::size_t i = 0; i < g.site_count(); ++i) f[i] = Complex(n(rng), n(rng));
    return f;
}

// First entry within a relative 1e-9 of the largest magnitude; mirror-symmetric
// eigenvectors tie up to rounding.
Eigen::Index leading(const Eigen::VectorXd& u) {
    const double top = u.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (std::abs(u[i]) >= top * (1.0 - 1e-9)) return i;
    }
    return -1;
}

}  // namespace

TEST_CASE("potential catalogue values") {
    const auto g = LatticeGrid::build(1, 0.5, 4);
    CHECK(evaluate_potential(PotentialSpec::harmonic(), g)[g.flat_index({2, 0, 0})] == Complex(1.0));
    const auto g4 = LatticeGrid::build(1, 1.0, 4);
    CHECK(std::abs(evaluate_potential(PotentialSpec::power(0.5), g4)[g4.flat_index({4, 0, 0})] - 2.0) < 1e-15);
    CHECK(evaluate_potential(PotentialSpec::zero(), g).values().isZero());

    const auto g2 = LatticeGrid::build(2, 0.5, 2);
    const auto an = evaluate_potential(PotentialSpec::anharmonic_2d(), g2);
    CHECK(an[g2.flat_index({2, 1, 0})] == Complex(0.25));
    CHECK(an[g2.flat_index({2, 0, 0})] == Complex(0.0));
    CHECK_THROWS_AS(evaluate_potential(PotentialSpec::anharmonic_2d(), g), DomainError);

    const auto rc = evaluate_potential(PotentialSpec::regularised_coulomb(1.0), g);
    CHECK(rc[g.flat_index({0, 0, 0})] == Complex(1.0));

    CHECK_THROWS_AS(evaluate_potential(PotentialSpec::from_table({1, 2, -1, 0, 0, 0, 0, 0, 0}), g), DomainError);
    CHECK_THROWS_AS(evaluate_potential(PotentialSpec::from_table({1, 2}), g), DomainError);
    CHECK_THROWS_AS(evaluate_potential(PotentialSpec::power(-1.0), g), DomainError);
    CHECK_THROWS_AS(evaluate_potential(PotentialSpec::regularised_coulomb(0.0), g), DomainError);

    CHECK(PotentialSpec::harmonic().confining());
    CHECK(PotentialSpec::power(0.5).confining());
    CHECK_FALSE(PotentialSpec::regularised_coulomb(1.0).confining());
    CHECK_FALSE(PotentialSpec::zero().confining());
    CHECK(parse_potential_kind("anharmonic-2d") == PotentialKind::anharmonic_2d);
    CHECK_THROWS_AS(parse_potential_kind("morse"), DomainError);
}

TEST_CASE("assembly examples") {
    const auto g = LatticeGrid::build(1, 1.0, 1);
    const Eigen::MatrixXd m = build(g, PotentialSpec::zero()).dense();
    Eigen::Matrix3d expected{{2, -1, 0}, {-1, 2, -1}, {0, -1, 2}};
    CHECK((m - expected).cwiseAbs().maxCoeff() == 0.0);

    const auto gh = LatticeGrid::build(1, 0.5, 3);
    const Eigen::MatrixXd mh = build(gh, PotentialSpec::zero()).dense();
    CHECK(mh(2, 2) == 8.0);
    CHECK(mh(2, 3) == -4.0);
    CHECK(mh(2, 4) == 0.0);
}

TEST_CASE("matrix action equals stencil plus potential") {
    for (int dim = 1; dim <= 3; ++dim) {
        const auto g = LatticeGrid::build(dim, 0.3, 3);
        const auto v = evaluate_potential(PotentialSpec::harmonic(), g);
        const auto h = assemble_hamiltonian(g, v);
        const auto f = random_function(g, 5 + dim);
        const double scale = 1.0 / (0.3 * 0.3);
        const Eigen::VectorXcd expected =
            -scale * apply_discrete_laplacian(f).values() + v.values().cwiseProduct(f.values());
        CHECK((h.apply(f).values() - expected).norm() <= 1e-12 * expected.norm());
        const Eigen::MatrixXd d = h.dense();
        CHECK((d - d.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(h.gershgorin_lower() >= -1e-14 * h.gershgorin_upper());

        // Self-adjointness surrogate.
        const auto g1 = random_function(g, 99 + dim);
        const Complex lhs = inner_product(h.apply(f), g1), rhs = inner_product(f, h.apply(g1));
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(lhs));
    }
}

TEST_CASE("free Dirichlet spectrum matches closed form") {
    const auto g = LatticeGrid::build(1, 1.0, 2);
    const auto h = build(g, PotentialSpec::zero());
    for (auto method : {DecompositionMethod::dense, DecompositionMethod::product, DecompositionMethod::automatic}) {
        DecompositionOptions opt;
        opt.method = method;
        const auto d = spectral_decompose(h, 5, opt);
        for (int j = 1; j <= 5; ++j) {
            const double exact = 2.0 - 2.0 * std::cos(j * std::numbers::pi / 6.0);
            CHECK(std::abs(d.eigenvalue(j - 1) - exact) <= 1e-12 * exact);
        }
        const auto diag = diagnose(h, d);
        CHECK(diag.max_relative_residual <= 1e-12);
        CHECK(diag.max_orthogonality_defect <= 1e-12);
    }
}

TEST_CASE("harmonic oscillator low spectrum") {
    const auto g = LatticeGrid::build(1, 0.05, 160);
    const auto d = spectral_decompose(build(g, PotentialSpec::harmonic()), 60);
    for (int j = 0; j < 5; ++j) CHECK(std::abs(d.eigenvalue(j) - (2 * j + 1)) <= 0.01 * (2 * j + 1));
    const auto report = eigenvalue_growth_report(d);
    CHECK(report.strictly_increasing);
    CHECK(report.confinement_consistent);
    double low_gap = 0.0;
    for (int j = 1; j <= 10; ++j) low_gap += report.rows[j].gap;
    CHECK(std::abs(low_gap / 10.0 - 2.0) < 0.05);
}

TEST_CASE("free spectrum gaps shrink at the band edge") {
    const auto g = LatticeGrid::build(1, 1.0, 20);
    const auto d = spectral_decompose(build(g, PotentialSpec::zero()), g.site_count());
    const auto report = eigenvalue_growth_report(d);
    const std::size_t m = report.rows.size();
    CHECK(report.rows[m - 1].gap < report.rows[m / 2].gap);
    CHECK_THROWS_AS(eigenvalue_growth_report(spectral_decompose(build(g, PotentialSpec::zero()), 1)), DomainError);
}

TEST_CASE("mode count validation") {
    const auto g = LatticeGrid::build(1, 1.0, 2);
    const auto h = build(g, PotentialSpec::zero());
    CHECK_THROWS_AS(spectral_decompose(h, 0), DomainError);
    CHECK_THROWS_AS(spectral_decompose(h, 6), DomainError);
    const auto g2 = LatticeGrid::build(2, 0.5, 3);
    DecompositionOptions opt;
    opt.method = DecompositionMethod::product;
    CHECK_THROWS_AS(spectral_decompose(build(g2, PotentialSpec::anharmonic_2d()), 4, opt), ConfigurationError);
}

TEST_CASE("iterative solver agrees with dense diagonalisation") {
    struct Case {
        int dim;
        double step;
        int radius;
        PotentialSpec v;
    };
    const Case cases[] = {{1, 0.2, 90, PotentialSpec::harmonic()},
                          {2, 0.4, 6, PotentialSpec::anharmonic_2d()},
                          {2, 0.5, 5, PotentialSpec::regularised_coulomb(0.7)},
                          {3, 0.6, 2, PotentialSpec::power(1.5)}};
    for (const auto& c : cases) {
        const auto g = LatticeGrid::build(c.dim, c.step, c.radius);
        REQUIRE(g.site_count() <= 200);
        const auto h = build(g, c.v);
        DecompositionOptions dense, lanczos;
        dense.method = DecompositionMethod::dense;
        lanczos.method = DecompositionMethod::lanczos;
        const std::size_t m = 12;
        const auto a = spectral_decompose(h, m, dense);
        const auto b = spectral_decompose(h, m, lanczos);
        for (std::size_t k = 0; k < m; ++k) {
            CHECK(std::abs(a.eigenvalue(k) - b.eigenvalue(k)) <= 1e-8 * std::max(1.0, a.eigenvalue(k)));
        }
        const auto diag = diagnose(h, b);
        CHECK(diag.max_relative_residual <= 1e-8);
        CHECK(diag.max_orthogonality_defect <= 1e-10);
        CHECK(diag.min_eigenvalue >= -1e-8);
    }
}

TEST_CASE("product decomposition agrees with dense diagonalisation") {
    const auto g = LatticeGrid::build(3, 0.5, 2);
    const auto h = build(g, PotentialSpec::harmonic());
    DecompositionOptions dense;
    dense.method = DecompositionMethod::dense;
    const auto a = spectral_decompose(h, g.site_count(), dense);
    const auto b = spectral_decompose(h, g.site_count());
    CHECK(b.method() == DecompositionMethod::product);
    for (std::size_t k = 0; k < g.site_count(); ++k) {
        CHECK(std::abs(a.eigenvalue(k) - b.eigenvalue(k)) <= 1e-10 * std::max(1.0, a.eigenvalue(k)));
    }
    const auto diag = diagnose(h, b);
    CHECK(diag.max_relative_residual <= 1e-10);
    CHECK(diag.max_orthogonality_defect <= 1e-10);

    // Transforms through the tensor path match explicit eigenvectors.
    const auto f = random_function(g, 3);
    const Eigen::VectorXcd c = b.analyse(f.values());
    for (std::size_t k = 0; k < g.site_count(); k += 17) {
        const Complex direct = inner_product(f, b.eigenvector(k));
        CHECK(std::abs(c[static_cast<Eigen::Index>(k)] - direct) <= 1e-12 * f.values().norm());
    }
}

TEST_CASE("degenerate blocks are canonical") {
    const auto g = LatticeGrid::build(2, 0.5, 4);
    const auto h = build(g, PotentialSpec::harmonic());
    const auto d = spectral_decompose(h, 30);
    std::size_t blocks = 0;
    for (std::size_t k = 0; k + 1 < d.mode_count(); ++k) {
        const Eigen::VectorXd u = d.eigenvector_values(k);
        const Eigen::Index arg = leading(u);
        CHECK(u[arg] > 0.0);
        if (d.eigenvalue(k) == d.eigenvalue(k + 1)) {
            ++blocks;
            CHECK(arg <= leading(d.eigenvector_values(k + 1)));
        }
    }
    CHECK(blocks > 0);
    for (std::size_t k = 0; k + 1 < d.mode_count(); ++k) CHECK(d.eigenvalue(k) <= d.eigenvalue(k + 1));

    // Same input, same output.
    const auto d2 = spectral_decompose(h, 30);
    for (std::size_t k = 0; k < 30; ++k) CHECK((d.eigenvector_values(k) - d2.eigenvector_values(k)).norm() == 0.0);
    CHECK(d.id() != d2.id());
}

TEST_CASE("variational monotonicity") {
    const auto g = LatticeGrid::build(2, 0.5, 4);
    const auto v = evaluate_potential(PotentialSpec::anharmonic_2d(), g);
    LatticeFunction bigger = v;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (std::size_t i = 0; i < g.site_count(); ++i) bigger[i] += u(rng);
    const auto a = spectral_decompose(assemble_hamiltonian(g, v), g.site_count());
    const auto b = spectral_decompose(assemble_hamiltonian(g, bigger), g.site_count());
    for (std::size_t k = 0; k < g.site_count(); ++k) CHECK(b.eigenvalue(k) >= a.eigenvalue(k) - 1e-10);
}

TEST_CASE("Bessel and Parseval") {
    const auto g = LatticeGrid::build(1, 0.3, 20);
    const auto h = build(g, PotentialSpec::harmonic());
    const auto f = random_function(g, 8);
    const double total = f.values().squaredNorm();
    const auto part = spectral_decompose(h, 10);
    CHECK(part.analyse(f.values()).squaredNorm() <= total);
    const auto full = spectral_decompose(h, g.site_count());
    CHECK(std::abs(full.analyse(f.values()).squaredNorm() - total) <= 1e-12 * total);
}

TEST_CASE("Krylov budget exhaustion reports the residual") {
    const auto g = LatticeGrid::build(2, 0.4, 6);
    const auto h = build(g, PotentialSpec::anharmonic_2d());
    DecompositionOptions opt;
    opt.method = DecompositionMethod::lanczos;
    opt.max_krylov = 12;
    opt.block_size = 2;
    try {
        (void)spectral_decompose(h, 10, opt);
        FAIL("expected a convergence error");
    } catch (const ConvergenceError& e) {
        CHECK(e.worst_residual() > opt.tol_eig);
    }
}
