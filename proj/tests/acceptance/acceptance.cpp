// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero if any criterion fails.
// Usage: acceptance [criterion numbers...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "semiwave/io.hpp"
#include "semiwave/runner.hpp"
#include "semiwave/semiclassical.hpp"
#include "semiwave/spectral.hpp"
#include "semiwave/veryweak.hpp"

using namespace semiwave;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path work_dir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "semiwave-acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::shared_ptr<const SpectralDecomposition> decompose(int dim, double hbar, int radius, const PotentialSpec& v,
                                                       DecompositionMethod method = DecompositionMethod::automatic) {
    const LatticeGrid g = LatticeGrid::build(dim, hbar, radius);
    DecompositionOptions o;
    o.method = method;
    return std::make_shared<const SpectralDecomposition>(
        spectral_decompose(assemble_hamiltonian(g, evaluate_potential(v, g)), g.site_count(), o));
}

Outcome spectrum_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = decompose(1, 1.0, 2, PotentialSpec::zero(), DecompositionMethod::dense);
    double worst = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
        const double exact = 2.0 - 2.0 * std::cos(static_cast<double>(j + 1) * M_PI / 6.0);
        worst = std::max(worst, std::abs(d->eigenvalue(j) - exact) / exact);
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-8 && t < 1.0,
            "max relative error " + fmt(worst) + " (tol 1e-8), " + fmt(t) + " s (limit 1 s)"};
}

Outcome confinement_spectrum() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto d = decompose(1, 0.05, 160, PotentialSpec::harmonic());
    double worst = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
        const double target = 2.0 * static_cast<double>(j) + 1.0;
        worst = std::max(worst, std::abs(d->eigenvalue(j) - target) / target);
    }
    bool increasing = true;
    for (std::size_t j = 1; j <= 50; ++j) increasing = increasing && d->eigenvalue(j) > d->eigenvalue(j - 1);
    const double t = seconds_since(t0);
    return {worst <= 0.01 && increasing && t < 30.0,
            "lowest five within " + fmt(100 * worst) + "% of 1,3,5,7,9 (tol 1%), strictly increasing to mode 50: " +
                (increasing ? "yes" : "no") + ", " + fmt(t) + " s (limit 30 s)"};
}

Outcome plancherel() {
    const auto d = decompose(3, 0.5, 10, PotentialSpec::harmonic());
    std::mt19937_64 rng(20240611);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        LatticeFunction f(d->grid());
        for (std::size_t k = 0; k < f.size(); ++k) f[k] = Complex(normal(rng), normal(rng));
        const SpectralCoefficients c = forward_transform(*d, f);
        const double n2 = l2_norm(f) * l2_norm(f);
        double c2 = 0.0;
        for (Eigen::Index k = 0; k < c.values.size(); ++k) c2 += std::norm(c.values[k]);
        const LatticeFunction back = inverse_transform(*d, c);
        const double round_trip = (back.values() - f.values()).norm() / f.values().norm();
        worst = std::max({worst, std::abs(c2 - n2) / n2, round_trip});
    }
    return {worst <= 1e-10, "21^3 sites via " + to_string(d->method()) + ", worst relative identity error " +
                                fmt(worst) + " over 100 functions (tol 1e-10)"};
}

Outcome propagator_order() {
    const double a = 4.0, lambda = 25.0, T = 1.0;
    std::vector<double> steps{1e-2, 5e-3, 2.5e-3, 1.25e-3}, errors;
    const auto [u_exact, ut_exact] = exact_constant_mode(a, lambda, 1.0, 0.5, T);
    for (double dt : steps) {
        const StageGrid st = sample_stages(CoefficientFunctions::constant(a, 0.0), T, dt);
        const ModeTrajectory tr = integrate_mode(lambda, st, {}, 1.0, 0.5);
        errors.push_back(std::abs(tr.u.back() - u_exact) + std::abs(tr.ut.back() - ut_exact));
    }
    const double slope = log_log_slope(steps, errors);
    return {std::abs(slope - 4.0) <= 0.3,
            "fitted order " + fmt(slope) + " (target 4 +- 0.3), errors " + fmt(errors.front()) + " .. " + fmt(errors.back())};
}

/// Randomised smooth energy-check configs; a >= 0.5 everywhere.
std::vector<Json> energy_instances() {
    std::mt19937_64 rng(977);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Json> out;
    for (int i = 0; i < 20; ++i) {
        const int dim = i % 2 == 0 ? 1 : 2;
        const double a0 = 1.0 + 1.5 * u(rng);
        const double amp = (a0 - 0.5) * u(rng);
        const double T = 0.5 + u(rng);
        Json cfg{{"command", "energy-check"},
                 {"grid", {{"dim", dim}, {"hbar", dim == 1 ? 0.25 : 0.5}, {"radius", dim == 1 ? 16 : 6}}},
                 {"potential", {{"kind", "harmonic"}}},
                 {"coefficients",
                  {{"a",
                    {{{"type", "constant"}, {"value", a0}},
                     {{"type", "sin"}, {"amplitude", amp}, {"frequency", 0.5 + 3.0 * u(rng)}, {"phase", 6.0 * u(rng)}}}},
                   {"q",
                    {{{"type", "constant"}, {"value", u(rng) - 0.5}},
                     {{"type", "cos"}, {"amplitude", 2.0 * u(rng) - 1.0}, {"frequency", 3.0 * u(rng)}}}}}},
                 {"data",
                  {{"u0",
                    {{{"type", "gaussian"},
                      {"weight", 2.0 * u(rng) - 1.0},
                      {"center", std::vector<double>(static_cast<std::size_t>(dim), 2.0 * u(rng) - 1.0)},
                      {"width", 0.5 + u(rng)}},
                     {{"type", "eigenmode"}, {"mode", static_cast<int>(10 * u(rng))}, {"weight", u(rng)}}}},
                   {"u1", {{{"type", "gaussian"}, {"weight", u(rng)}, {"width", 0.5 + u(rng)}}}},
                   {"source",
                    {{"time", {{{"type", "polynomial"}, {"coefficients", {u(rng), 2.0 * u(rng) - 1.0, u(rng)}}}}},
                     {"space", {{{"type", "gaussian"}, {"width", 0.5 + u(rng)}}}}}}}},
                 {"solver", {{"T", T}, {"dt", 0.005}, {"s", 0.5 * static_cast<double>(i % 3)}}},
                 {"output", {{"formats", {"csv", "json"}}}}};
        out.push_back(cfg);
    }
    return out;
}

RunResult run_config(Json cfg, const fs::path& out, int threads) {
    cfg["output"]["directory"] = out.string();
    ExperimentConfig c = parse_config(cfg);
    Overrides o;
    o.threads = threads;
    apply_overrides(c, {}, o);
    return run(c);
}

Outcome energy_machinery() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto instances = energy_instances();
    int passed = 0;
    double worst = std::numeric_limits<double>::infinity();
    double sym = 0.0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const RunResult r = run_config(instances[i], work_dir() / ("energy-1-" + std::to_string(i)), 1);
        const Json& e = r.summary["energy"];
        worst = std::min({worst, e["sandwich"]["worst"].get<double>(), e["gronwall"]["worst"].get<double>(),
                          e["aggregate"]["worst"].get<double>()});
        sym = std::max(sym, e["symmetriser_defect"].get<double>());
        passed += r.property_passed ? 1 : 0;
    }
    const double t = seconds_since(t0);
    return {passed == 20 && worst >= -1e-7 && t < 120.0,
            std::to_string(passed) + "/20 instances pass, most negative relative slack (0 if none) " + fmt(worst) +
                " (tol -1e-7), symmetriser defect " + fmt(sym) + ", " + fmt(t) + " s (limit 120 s)"};
}

struct VeryWeakSetup {
    std::shared_ptr<const SpectralDecomposition> decomp = decompose(1, 0.25, 16, PotentialSpec::harmonic());
    Mollifier mollifier;
    RegularisedNet a{DistributionSpec{}.constant(1.0).dirac(0.5, 1.0), mollifier};
    RegularisedNet q{DistributionSpec{}, mollifier};
    NetConfig config = [] {
        NetConfig c;
        c.horizon = 1.0;
        c.dt = 0.005;
        return c;
    }();
    LatticeFunction u0 = decomp->eigenvector(0);
    LatticeFunction u1 = LatticeFunction(decomp->grid());
};

Outcome veryweak_existence() {
    VeryWeakSetup s;
    const VeryWeakSolution sol = solve_regularised_net(s.decomp, s.a, s.q, {}, s.u0, s.u1, s.config);
    bool finite = sol.rows.size() == 8;
    for (const auto& r : sol.rows) finite = finite && std::isfinite(r.sol_norm) && r.sol_norm > 0.0;
    const ModerationReport a_fit = net_moderateness(s.a, s.config.epsilons, s.config.horizon);
    const bool moderate = sol.solution_fit.classification == NetClass::moderate;
    return {finite && moderate,
            std::to_string(sol.rows.size()) + "/8 solves finite, solution net " +
                to_string(sol.solution_fit.classification) + " (N = " + fmt(sol.solution_fit.order) +
                "), coefficient net " + to_string(a_fit.classification) + " (N = " + fmt(a_fit.order) + ")"};
}

Outcome veryweak_uniqueness() {
    VeryWeakSetup s;
    const UniquenessReport r = uniqueness_experiment(s.decomp, s.a, s.q, {}, s.u0, s.u1, s.config, {});
    UniquenessConfig control;
    control.scale_with_epsilon = false;
    control.amplitude = 0.1;
    control.allow_non_negligible = true;
    const UniquenessReport c = uniqueness_experiment(s.decomp, s.a, s.q, {}, s.u0, s.u1, s.config, control);
    const bool ok = r.passed && r.slope >= 2.5 && c.slope <= 0.5 && !c.passed;
    return {ok, "eps^3 perturbation slope " + fmt(r.slope) + " (need >= 2.5); control slope " + fmt(c.slope) +
                    " (need <= 0.5), control verdict " + (c.passed ? "PASS" : "FAIL (designed)")};
}

Outcome veryweak_consistency() {
    VeryWeakSetup s;
    const CoefficientFunctions coeffs{[](double t) { return 2.0 + std::sin(t); }, [](double t) { return std::cos(t); },
                                      [](double t) { return std::cos(t); }};
    const LatticeFunction profile = LatticeFunction::from_function(
        s.decomp->grid(), [](const Point& x) { return Complex(std::exp(-x[0] * x[0]), 0.0); });
    const CauchyData data{s.u0, s.u1, Source::separable([](double t) { return std::sin(t); }, profile)};
    const ConsistencyReport r = consistency_experiment(s.decomp, coeffs, s.mollifier, data, s.config, 1e-3);
    const double last = r.errors.back();
    return {r.strictly_decreasing && last <= 1e-3,
            std::string("errors strictly decreasing: ") + (r.strictly_decreasing ? "yes" : "no") + ", " +
                fmt(r.errors.front()) + " at eps=2^-1 down to " + fmt(last) + " at eps=2^-8 (tol 1e-3)"};
}

Outcome defect_identity() {
    const SmoothFunction quad{[](const Point& x) { return x[0] * x[0]; }, [](const Point&) { return 2.0; }};
    const SmoothFunction quart{[](const Point& x) { return std::pow(x[0], 4); },
                               [](const Point& x) { return 12.0 * x[0] * x[0]; }};
    double zero_dev = 0.0, quart_dev = 0.0;
    for (double h : {0.5, 0.25, 0.125}) {
        const LatticeGrid g = LatticeGrid::build(1, h, static_cast<int>(2.0 / h));
        const LatticeFunction d2 = defect_apply(quad, g), d4 = defect_apply(quart, g);
        for (std::size_t i = 0; i < g.site_count(); ++i) {
            if (g.on_boundary(i)) continue;
            zero_dev = std::max(zero_dev, std::abs(d2[i]));
            quart_dev = std::max(quart_dev, std::abs(d4[i] - Complex(2 * h * h, 0.0)));
        }
    }
    const SmoothFunction gauss{[](const Point& x) { return std::exp(-x[0] * x[0]); },
                               [](const Point& x) { return (4 * x[0] * x[0] - 2) * std::exp(-x[0] * x[0]); }};
    const std::vector<double> hs{0.4, 0.2, 0.1, 0.05};
    const DefectReport r = defect_report(gauss, 1, hs, PotentialSpec::harmonic());
    const bool ok = zero_dev <= 1e-12 && quart_dev <= 1e-12 && std::abs(r.fitted_order - 2.0) <= 0.2;
    return {ok, "x^2 max interior defect " + fmt(zero_dev) + ", x^4 max deviation from 2 hbar^2 " + fmt(quart_dev) +
                    " (tol 1e-12), gaussian order " + fmt(r.fitted_order) + " (target 2 +- 0.2; unscaled lattice norm " +
                    fmt(r.raw_order) + ")"};
}

Json semiclassical_config() {
    return {{"command", "semiclassical"},
            {"grid", {{"hbars", {0.4, 0.2, 0.1, 0.05}}, {"half_width", 8.0}}},
            {"potential", {{"kind", "harmonic"}}},
            {"data", {{"u0", {{{"type", "hermite"}, {"order", 0}}, {{"type", "hermite"}, {"order", 2}, {"weight", 0.3}}}}}},
            {"solver", {{"T", 1.0}, {"dt", 1e-3}, {"s", 5.0}}}};
}

Outcome semiclassical_limit() {
    const auto t0 = std::chrono::steady_clock::now();
    const RunResult r = run_config(semiclassical_config(), work_dir() / "semiclassical-1", 1);
    std::string errs;
    for (const auto& row : r.summary["rows"]) errs += (errs.empty() ? "" : ", ") + fmt(row["sup_error"].get<double>());
    const double t = seconds_since(t0);
    const bool dec = r.summary["strictly_decreasing"].get<bool>();
    return {dec && t < 300.0, "sup errors over hbar 0.4..0.05: " + errs + "; strictly decreasing: " +
                                  (dec ? "yes" : "no") + ", fitted order " +
                                  fmt(r.summary["fitted_order"].get<double>()) + " (recorded), " + fmt(t) +
                                  " s (limit 300 s)"};
}

Outcome veryweak_semiclassical_limit() {
    Json cfg = semiclassical_config();
    cfg["command"] = "veryweak-semiclassical";
    cfg["coefficients"] = {{"a", {{{"type", "constant"}, {"value", 1.0}}, {{"type", "dirac"}, {"t0", 0.5}, {"strength", 1.0}}}}};
    cfg["solver"]["epsilons"] = {0.25, 0.0625};
    const RunResult r = run_config(cfg, work_dir() / "veryweak-semiclassical", 1);
    std::string detail;
    bool ok = true;
    for (const auto& col : r.summary["columns"]) {
        std::string errs;
        for (const auto& row : col["rows"]) errs += (errs.empty() ? "" : ", ") + fmt(row["sup_error"].get<double>());
        const bool dec = col["strictly_decreasing"].get<bool>();
        ok = ok && dec;
        detail += (detail.empty() ? "" : "; ") + std::string("eps ") + fmt(col["epsilon"].get<double>()) + ": " + errs +
                  (dec ? " decreasing" : " NOT decreasing");
    }
    return {ok && r.summary["columns"].size() == 2, detail};
}

Outcome determinism() {
    const auto instances = energy_instances();
    int identical = 0, compared = 0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const fs::path one = work_dir() / ("energy-1-" + std::to_string(i));
        if (!fs::exists(one / "energy.csv")) run_config(instances[i], one, 1);
        const fs::path eight = work_dir() / ("energy-8-" + std::to_string(i));
        run_config(instances[i], eight, 8);
        ++compared;
        identical += slurp(one / "energy.csv") == slurp(eight / "energy.csv") ? 1 : 0;
    }
    const fs::path s1 = work_dir() / "semiclassical-1";
    if (!fs::exists(s1 / "convergence.csv")) run_config(semiclassical_config(), s1, 1);
    const fs::path s8 = work_dir() / "semiclassical-8";
    run_config(semiclassical_config(), s8, 8);
    ++compared;
    identical += slurp(s1 / "convergence.csv") == slurp(s8 / "convergence.csv") ? 1 : 0;
    return {identical == compared, std::to_string(identical) + "/" + std::to_string(compared) +
                                       " CSV pairs byte-identical between 1 and 8 threads"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"spectrum oracle", spectrum_oracle},
        {"confinement spectrum", confinement_spectrum},
        {"Plancherel and round trip", plancherel},
        {"propagator order", propagator_order},
        {"energy machinery", energy_machinery},
        {"very weak existence", veryweak_existence},
        {"uniqueness", veryweak_uniqueness},
        {"consistency", veryweak_consistency},
        {"defect identity", defect_identity},
        {"semiclassical limit", semiclassical_limit},
        {"very weak semiclassical limit", veryweak_semiclassical_limit},
        {"determinism", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("criterion %2d %s: %s: %s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
