#include "semiwave/veryweak.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "semiwave/errors.hpp"

namespace semiwave {

namespace {

constexpr double kQuadTol = 1e-12;

template <typename F>
double integrate(F&& f, double lo, double hi) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 20, kQuadTol);
}

// exp(-1/(1-t^2)) underflows to zero once 1 - t^2 < 1/745.
constexpr double kBumpCutoff = 1.0 / 745.0;

}  // namespace

namespace bump {

double normalisation() {
    static const double c = [] {
        boost::math::quadrature::tanh_sinh<double> ts;
        const double mass = ts.integrate([](double t) { return std::exp(-1.0 / (1.0 - t * t)); }, -1.0, 1.0);
        return 1.0 / mass;
    }();
    return c;
}

double value(double t) { return derivative(t, 0); }

double derivative(double t, int order) {
    if (order < 0 || order > 3) throw DomainError("bump derivatives are available up to order 3");
    const double s = 1.0 - t * t;
    if (s <= kBumpCutoff) return 0.0;
    const double psi = normalisation() * std::exp(-1.0 / s);
    const double g1 = -2.0 * t / (s * s);
    const double g2 = -2.0 * (1.0 + 3.0 * t * t) / (s * s * s);
    const double g3 = -24.0 * t * (1.0 + t * t) / (s * s * s * s);
    switch (order) {
        case 0: return psi;
        case 1: return psi * g1;
        case 2: return psi * (g1 * g1 + g2);
        default: return psi * (g1 * g1 * g1 + 3.0 * g1 * g2 + g3);
    }
}

double cdf(double x) {
    if (x <= -1.0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (x > 0.0) return 1.0 - cdf(-x);
    return integrate([](double t) { return value(t); }, -1.0, x);
}

}  // namespace bump

double Mollifier::omega(double eps) const {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("epsilon must lie in (0, 1)");
    if (scale == Scale::log) return 1.0 / std::log(1.0 / eps);
    if (!(power > 0.0)) throw DomainError("power-law mollifier scale needs p > 0");
    return std::pow(eps, power);
}

double Mollifier::kernel(double t, double omega, int order) {
    return std::pow(omega, -1.0 - order) * bump::derivative(t / omega, order);
}

DistributionSpec& DistributionSpec::constant(double c) {
    terms.push_back({DistributionTerm::Kind::constant, c, 0.0, 0, {}, {}});
    return *this;
}

DistributionSpec& DistributionSpec::smooth(TimeFunction g, TimeFunction g_prime) {
    terms.push_back({DistributionTerm::Kind::smooth, 0.0, 0.0, 0, std::move(g), std::move(g_prime)});
    return *this;
}

DistributionSpec& DistributionSpec::dirac(double t0, double strength) {
    terms.push_back({DistributionTerm::Kind::dirac, strength, t0, 0, {}, {}});
    return *this;
}

DistributionSpec& DistributionSpec::dirac_derivative(double t0, double strength, int order) {
    terms.push_back({DistributionTerm::Kind::dirac_derivative, strength, t0, order, {}, {}});
    return *this;
}

DistributionSpec& DistributionSpec::heaviside(double t0, double jump) {
    terms.push_back({DistributionTerm::Kind::heaviside, jump, t0, 0, {}, {}});
    return *this;
}

bool DistributionSpec::singular() const {
    return std::any_of(terms.begin(), terms.end(), [](const DistributionTerm& t) {
        return t.kind == DistributionTerm::Kind::dirac || t.kind == DistributionTerm::Kind::dirac_derivative;
    });
}

void DistributionSpec::validate(double horizon) const {
    for (const auto& t : terms) {
        switch (t.kind) {
            case DistributionTerm::Kind::smooth:
                if (!t.g) throw DomainError("smooth term needs a function");
                break;
            case DistributionTerm::Kind::dirac_derivative:
                if (t.order < 0 || t.order > 2) throw DomainError("dirac derivative order must be 0, 1 or 2");
                [[fallthrough]];
            case DistributionTerm::Kind::dirac:
            case DistributionTerm::Kind::heaviside:
                if (!(t.t0 >= 0.0 && t.t0 <= horizon)) {
                    throw DomainError("point term at t0 = " + std::to_string(t.t0) + " lies outside [0, T]");
                }
                break;
            case DistributionTerm::Kind::constant:
                break;
        }
        if (!std::isfinite(t.value)) throw DomainError("distribution term has a non-finite weight");
    }
}

namespace {

double regular_part_at(const DistributionSpec& d, double t, bool left_limit) {
    double v = 0.0;
    for (const auto& term : d.terms) {
        switch (term.kind) {
            case DistributionTerm::Kind::constant: v += term.value; break;
            case DistributionTerm::Kind::smooth: v += term.g(t); break;
            case DistributionTerm::Kind::heaviside:
                if (left_limit ? t > term.t0 : t >= term.t0) v += term.value;
                break;
            default: break;
        }
    }
    return v;
}

}  // namespace

double DistributionSpec::regular_part(double t) const { return regular_part_at(*this, t, false); }

PositivityCertificate certify_positive(const DistributionSpec& a, double horizon, std::size_t samples) {
    PositivityCertificate c;
    for (const auto& t : a.terms) {
        if (t.kind == DistributionTerm::Kind::dirac_derivative) {
            c.reason = "dirac derivatives are not positive distributions";
            return c;
        }
        if (t.kind == DistributionTerm::Kind::dirac && t.value < 0.0) {
            c.reason = "dirac strength " + std::to_string(t.value) + " is negative";
            return c;
        }
    }
    samples = std::max<std::size_t>(samples, 2);
    c.a0 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < samples; ++i) {
        const double t = horizon * static_cast<double>(i) / static_cast<double>(samples - 1);
        c.a0 = std::min(c.a0, regular_part_at(a, t, false));
    }
    for (const auto& t : a.terms) {
        if (t.kind == DistributionTerm::Kind::heaviside) {
            c.a0 = std::min({c.a0, regular_part_at(a, t.t0, true), regular_part_at(a, t.t0, false)});
        }
    }
    if (!(c.a0 > 0.0)) {
        c.reason = "regular part reaches " + std::to_string(c.a0) + " <= 0 on [0, T]";
        return c;
    }
    c.valid = true;
    return c;
}

std::pair<double, double> mollify(const DistributionSpec& dist, const Mollifier& moll, double eps, double t) {
    const double w = moll.omega(eps);
    double value = 0.0, deriv = 0.0;
    for (const auto& term : dist.terms) {
        const double x = t - term.t0;
        switch (term.kind) {
            case DistributionTerm::Kind::constant:
                value += term.value;
                break;
            case DistributionTerm::Kind::smooth: {
                const auto& g = term.g;
                value += integrate([&](double s) { return g(t - w * s) * bump::value(s); }, -1.0, 1.0);
                if (term.g_prime) {
                    const auto& gp = term.g_prime;
                    deriv += integrate([&](double s) { return gp(t - w * s) * bump::value(s); }, -1.0, 1.0);
                } else {
                    deriv += integrate([&](double s) { return g(t - w * s) * bump::derivative(s, 1); }, -1.0, 1.0) / w;
                }
                break;
            }
            case DistributionTerm::Kind::dirac:
                value += term.value * Mollifier::kernel(x, w, 0);
                deriv += term.value * Mollifier::kernel(x, w, 1);
                break;
            case DistributionTerm::Kind::dirac_derivative:
                if (term.order < 0 || term.order > 2) throw DomainError("dirac derivative order must be 0, 1 or 2");
                value += term.value * Mollifier::kernel(x, w, term.order);
                deriv += term.value * Mollifier::kernel(x, w, term.order + 1);
                break;
            case DistributionTerm::Kind::heaviside:
                value += term.value * bump::cdf(x / w);
                deriv += term.value * Mollifier::kernel(x, w, 0);
                break;
        }
    }
    return {value, deriv};
}

TimeFunction RegularisedNet::value_function(double eps) const {
    return [base = base, moll = mollifier, eps](double t) { return mollify(base, moll, eps, t).first; };
}

TimeFunction RegularisedNet::derivative_function(double eps) const {
    return [base = base, moll = mollifier, eps](double t) { return mollify(base, moll, eps, t).second; };
}

std::vector<double> default_epsilon_grid() {
    std::vector<double> g;
    for (int k = 1; k <= 8; ++k) g.push_back(std::ldexp(1.0, -k));
    return g;
}

std::string to_string(NetClass c) {
    switch (c) {
        case NetClass::negligible: return "negligible";
        case NetClass::moderate: return "moderate";
        case NetClass::not_moderate: return "not-moderate";
    }
    return "unknown";
}

ModerationReport fit_moderateness(std::span<const double> epsilons, const std::vector<std::vector<double>>& norms) {
    const std::size_t n = epsilons.size();
    if (n < 5) throw ConfigurationError("moderateness fit needs at least 5 epsilon values (got " + std::to_string(n) + ")");
    if (norms.empty()) throw ConfigurationError("moderateness fit needs at least one norm sequence");
    double lo = 1.0, hi = 0.0;
    for (double e : epsilons) {
        if (!(e > 0.0 && e <= 1.0)) throw ConfigurationError("epsilon values must lie in (0, 1]");
        lo = std::min(lo, e);
        hi = std::max(hi, e);
    }
    if (std::log10(hi / lo) < 2.0 - 1e-9) throw ConfigurationError("epsilon grid must span at least two decades");
    for (const auto& row : norms) {
        if (row.size() != n) throw ConfigurationError("norm table does not match the epsilon grid");
    }

    ModerationReport r;
    r.epsilons.assign(epsilons.begin(), epsilons.end());
    r.norms = norms;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return epsilons[a] < epsilons[b]; });

    bool all_zero = true;
    for (const auto& row : norms) {
        for (double v : row) {
            if (!std::isfinite(v)) {
                r.classification = NetClass::not_moderate;
                r.order = std::numeric_limits<double>::infinity();
                r.slopes.assign(norms.size(), std::numeric_limits<double>::quiet_NaN());
                return r;
            }
            if (v != 0.0) all_zero = false;
        }
    }
    if (all_zero) {
        r.classification = NetClass::negligible;
        r.order = std::numeric_limits<double>::infinity();
        r.slopes.assign(norms.size(), -std::numeric_limits<double>::infinity());
        return r;
    }

    std::vector<double> intercepts;
    for (const auto& row : norms) {
        std::vector<double> x, y, fx, fy;
        for (std::size_t j = 0; j < 3; ++j) {
            const std::size_t i = order[j];
            if (row[i] > 0.0) {
                x.push_back(std::log(1.0 / epsilons[i]));
                y.push_back(std::log(row[i]));
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (row[i] > 0.0) {
                fx.push_back(std::log(1.0 / epsilons[i]));
                fy.push_back(std::log(row[i]));
            }
        }
        if (x.size() < 2) {
            r.slopes.push_back(-std::numeric_limits<double>::infinity());
            intercepts.push_back(0.0);
        } else {
            const LinearFit fit = fit_line(x, y);
            r.slopes.push_back(fit.slope);
            intercepts.push_back(fit.intercept);
        }
        if (fx.size() >= 2) r.fit_residual = std::max(r.fit_residual, fit_line(fx, fy).rms_residual);
    }

    // Negligible: every order decays and stays under 10 c eps^q on the whole grid.
    bool decays = std::all_of(r.slopes.begin(), r.slopes.end(), [](double s) { return s <= -0.5; });
    if (decays) {
        double q = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < norms.size(); ++k) {
            if (!std::isfinite(r.slopes[k])) continue;
            const double qk = -r.slopes[k];
            q = std::min(q, qk);
            const double c = std::exp(intercepts[k]);
            for (std::size_t i = 0; i < n; ++i) {
                if (norms[k][i] > 10.0 * c * std::pow(epsilons[i], qk)) decays = false;
            }
        }
        if (decays) {
            r.classification = NetClass::negligible;
            r.order = q;
            return r;
        }
    }

    double growth = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < norms.size(); ++k) {
        if (std::isfinite(r.slopes[k])) growth = std::max(growth, r.slopes[k] - static_cast<double>(k));
    }
    if (growth > 20.0) {
        r.classification = NetClass::not_moderate;
        r.order = growth;
        return r;
    }
    double big_n = std::abs(growth - std::round(growth)) <= 0.1 ? std::round(growth) : std::ceil(growth);
    big_n = std::max(big_n, 0.0);
    if (big_n == 0.0) {
        // Sub-polynomial growth (e.g. log(1/eps)) is classified conservatively as N = 1.
        const auto& row = norms.front();
        bool growing = true;
        for (std::size_t j = 1; j < n; ++j) {
            if (!(row[order[j - 1]] > row[order[j]])) growing = false;
        }
        if (growing && row[order[0]] > 1.01 * row[order[n - 1]]) big_n = 1.0;
    }
    r.classification = NetClass::moderate;
    r.order = big_n;
    return r;
}

ModerationReport fit_moderateness(std::span<const double> epsilons, std::span<const double> norms) {
    return fit_moderateness(epsilons, std::vector<std::vector<double>>{{norms.begin(), norms.end()}});
}

namespace {

std::vector<double> net_sample_times(const DistributionSpec& d, double horizon, std::size_t samples) {
    std::set<double> times;
    samples = std::max<std::size_t>(samples, 2);
    for (std::size_t i = 0; i < samples; ++i) {
        times.insert(horizon * static_cast<double>(i) / static_cast<double>(samples - 1));
    }
    for (const auto& t : d.terms) {
        if (t.kind != DistributionTerm::Kind::constant && t.kind != DistributionTerm::Kind::smooth) times.insert(t.t0);
    }
    return {times.begin(), times.end()};
}

}  // namespace

ModerationReport net_moderateness(const RegularisedNet& net, std::span<const double> epsilons, double horizon,
                                  std::size_t samples) {
    const std::vector<double> times = net_sample_times(net.base, horizon, samples);
    std::vector<std::vector<double>> norms(2, std::vector<double>(epsilons.size(), 0.0));
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        for (double t : times) {
            const auto [v, d] = net.evaluate(epsilons[i], t);
            norms[0][i] = std::max(norms[0][i], std::abs(v));
            norms[1][i] = std::max(norms[1][i], std::abs(d));
        }
    }
    return fit_moderateness(epsilons, norms);
}

CoefficientFunctions regularised_coefficients(const RegularisedNet& a, const RegularisedNet& q, double eps) {
    return {a.value_function(eps), a.derivative_function(eps), q.value_function(eps)};
}

namespace {

void check_eps_grid(const std::vector<double>& eps, const Mollifier& moll, double dt, double horizon) {
    if (eps.empty()) throw ConfigurationError("epsilon grid is empty");
    double smallest = 1.0;
    for (double e : eps) {
        if (!(e > 0.0 && e < 1.0)) throw ConfigurationError("epsilon values must lie in (0, 1)");
        smallest = std::min(smallest, e);
    }
    const double w = moll.omega(smallest);
    // The bump must be resolved: dt <= omega(eps_min) / 20.
    const double step = horizon > 0.0 ? horizon / std::ceil(horizon / dt - 1e-9) : dt;
    if (step > w / 20.0 * (1.0 + 1e-12)) {
        throw ConfigurationError("time step " + std::to_string(step) + " does not resolve the mollifier: need dt <= " +
                                 std::to_string(w / 20.0) + " = omega(eps_min) / 20");
    }
}

Source regularised_source(const SourceNet& f, double eps) {
    if (f.net.base.empty()) return Source::zero();
    if (!f.profile) throw ConfigurationError("source net needs a spatial profile");
    return Source::separable(f.net.value_function(eps), *f.profile);
}

void check_positive(const CoefficientFunctions& c, double eps, const PropagationConfig& cfg) {
    const StageGrid probe = [&] {
        try {
            return sample_stages(c, cfg.horizon, cfg.dt);
        } catch (const DomainError& e) {
            throw CertificateError("regularised a is not positive at eps = " + std::to_string(eps) + ": " + e.what());
        }
    }();
    (void)probe;
}

struct EpsRun {
    TrajectorySolution solution;
    NetRow row;
};

EpsRun run_eps(const std::shared_ptr<const SpectralDecomposition>& decomp, const CoefficientFunctions& c,
               const Source& source, const LatticeFunction& u0, const LatticeFunction& u1, const NetConfig& config,
               double eps, double omega) {
    PropagationConfig pc{config.horizon, config.dt, config.s, 1};
    check_positive(c, eps, pc);
    EpsRun out;
    out.solution = propagate(decomp, c, {u0, u1, source}, pc);
    out.row.epsilon = eps;
    out.row.omega = omega;
    const StageGrid& st = out.solution.stages;
    for (std::size_t i = 0; i < st.stage_count(); ++i) {
        out.row.sup_a = std::max(out.row.sup_a, std::abs(st.a[i]));
        out.row.sup_q = std::max(out.row.sup_q, std::abs(st.q[i]));
        out.row.sup_da = std::max(out.row.sup_da, std::abs(c.a_prime(st.time(i))));
    }
    out.row.sol_norm = l2_time_norm(out.solution);
    return out;
}

void validate_nets(const RegularisedNet& a, const RegularisedNet& q, const SourceNet& f, double horizon) {
    a.base.validate(horizon);
    q.base.validate(horizon);
    f.net.base.validate(horizon);
    const PositivityCertificate cert = certify_positive(a.base, horizon);
    if (!cert.valid) throw CertificateError("coefficient a has no positivity certificate: " + cert.reason);
}

}  // namespace

VeryWeakSolution solve_regularised_net(std::shared_ptr<const SpectralDecomposition> decomp, const RegularisedNet& a,
                                       const RegularisedNet& q, const SourceNet& f, const LatticeFunction& u0,
                                       const LatticeFunction& u1, const NetConfig& config) {
    validate_nets(a, q, f, config.horizon);
    check_eps_grid(config.epsilons, a.mollifier, config.dt, config.horizon);
    const std::size_t n = config.epsilons.size();
    std::vector<EpsRun> runs(n);
    parallel_for(n, config.threads, [&](std::size_t i) {
        const double eps = config.epsilons[i];
        runs[i] = run_eps(decomp, regularised_coefficients(a, q, eps), regularised_source(f, eps), u0, u1, config, eps,
                          a.mollifier.omega(eps));
    });
    VeryWeakSolution out;
    std::vector<double> norms;
    for (auto& r : runs) {
        out.rows.push_back(r.row);
        norms.push_back(r.row.sol_norm);
        if (config.keep_solutions) out.solutions.push_back(std::move(r.solution));
    }
    out.solution_fit = fit_moderateness(config.epsilons, norms);
    return out;
}

UniquenessReport uniqueness_experiment(std::shared_ptr<const SpectralDecomposition> decomp, const RegularisedNet& a,
                                       const RegularisedNet& q, const SourceNet& f, const LatticeFunction& u0,
                                       const LatticeFunction& u1, const NetConfig& config,
                                       const UniquenessConfig& perturbation) {
    const bool negligible = perturbation.scale_with_epsilon && perturbation.order >= 1.0;
    if (!negligible && !perturbation.allow_non_negligible) {
        throw ConfigurationError("perturbation is not negligible: it must scale as eps^q* with q* >= 1");
    }
    if (config.epsilons.size() < 2) throw ConfigurationError("uniqueness experiment needs at least 2 epsilon values");
    validate_nets(a, q, f, config.horizon);
    check_eps_grid(config.epsilons, a.mollifier, config.dt, config.horizon);

    const std::size_t n = config.epsilons.size();
    UniquenessReport report;
    report.epsilons = config.epsilons;
    report.differences.assign(n, 0.0);
    report.required_slope = perturbation.order - 0.5;
    parallel_for(n, config.threads, [&](std::size_t i) {
        const double eps = config.epsilons[i];
        const double omega = a.mollifier.omega(eps);
        const double size =
            perturbation.amplitude * (perturbation.scale_with_epsilon ? std::pow(eps, perturbation.order) : 1.0);
        const CoefficientFunctions base = regularised_coefficients(a, q, eps);
        const Source base_source = regularised_source(f, eps);
        CoefficientFunctions pert{
            [fa = base.a, size](double t) { return fa(t) + size * 0.5 * (1.0 + std::sin(t)); },
            [fd = base.a_prime, size](double t) { return fd(t) + size * 0.5 * std::cos(t); },
            [fq = base.q, size](double t) { return fq(t) + size * std::cos(t); }};
        const LatticeGrid grid = decomp->grid();
        const Source pert_source = Source::general([base_source, grid, u0, size](double t) {
            LatticeFunction out = base_source.at(t, grid);
            out.values() += size * std::sin(t) * u0.values();
            return out;
        });
        const EpsRun lhs = run_eps(decomp, base, base_source, u0, u1, config, eps, omega);
        const EpsRun rhs = run_eps(decomp, pert, pert_source, u0, u1, config, eps, omega);
        report.differences[i] = l2_time_difference(lhs.solution, rhs.solution);
    });

    std::vector<double> x, y;
    for (std::size_t i = 0; i < n; ++i) {
        if (report.differences[i] > 0.0) {
            x.push_back(config.epsilons[i]);
            y.push_back(report.differences[i]);
        }
    }
    if (x.empty()) {
        report.slope = std::numeric_limits<double>::infinity();
    } else if (x.size() == 1) {
        report.slope = 0.0;
    } else {
        report.slope = log_log_slope(x, y);
    }
    report.passed = report.slope >= report.required_slope;
    return report;
}

ConsistencyReport consistency_experiment(std::shared_ptr<const SpectralDecomposition> decomp,
                                         const CoefficientFunctions& coeffs, const Mollifier& mollifier,
                                         const CauchyData& data, const NetConfig& config, double tolerance) {
    if (config.epsilons.size() < 2) throw ConfigurationError("consistency experiment needs at least 2 epsilon values");
    check_eps_grid(config.epsilons, mollifier, config.dt, config.horizon);
    if (data.f.kind() == Source::Kind::general) {
        throw ConfigurationError("consistency experiment needs a zero or separable source");
    }
    RegularisedNet a{DistributionSpec{}.smooth(coeffs.a, coeffs.a_prime), mollifier};
    RegularisedNet q{DistributionSpec{}.smooth(coeffs.q, {}), mollifier};
    SourceNet f;
    if (data.f.kind() == Source::Kind::separable) {
        f.net = RegularisedNet{DistributionSpec{}.smooth(data.f.time_factor(), {}), mollifier};
        f.profile = data.f.space_factor();
    }
    validate_nets(a, q, f, config.horizon);

    const PropagationConfig pc{config.horizon, config.dt, config.s, config.threads};
    const TrajectorySolution reference = propagate(decomp, coeffs, data, pc);

    const std::size_t n = config.epsilons.size();
    ConsistencyReport report;
    report.epsilons = config.epsilons;
    report.errors.assign(n, 0.0);
    report.tolerance = tolerance;
    parallel_for(n, config.threads, [&](std::size_t i) {
        const double eps = config.epsilons[i];
        const EpsRun run = run_eps(decomp, regularised_coefficients(a, q, eps), regularised_source(f, eps), data.u0,
                                   data.u1, config, eps, mollifier.omega(eps));
        report.errors[i] = l2_time_difference(run.solution, reference);
    });
    report.monotone = true;
    report.strictly_decreasing = true;
    for (std::size_t i = 1; i < n; ++i) {
        if (report.errors[i] > 1.05 * report.errors[i - 1]) report.monotone = false;
        if (!(report.errors[i] < report.errors[i - 1])) report.strictly_decreasing = false;
    }
    report.passed = report.monotone && report.errors.back() <= tolerance;
    return report;
}

}  // namespace semiwave
