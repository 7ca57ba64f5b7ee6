#include "semiwave/runner.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <functional>
#include <iomanip>
#include <sstream>

#include "semiwave/io.hpp"

#ifndef SEMIWAVE_VERSION
#define SEMIWAVE_VERSION "0.0.0"
#endif

namespace semiwave {

Overrides environment_overrides() {
    Overrides o;
    if (const char* dir = std::getenv("SEMIWAVE_OUT_DIR"); dir && *dir) o.out_dir = dir;
    if (const char* t = std::getenv("SEMIWAVE_THREADS"); t && *t) {
        char* end = nullptr;
        const long v = std::strtol(t, &end, 10);
        if (*end != '\0' || v < 1 || v > 1024) {
            throw ValidationError({"SEMIWAVE_THREADS: expected a positive integer, got '" + std::string(t) + "'"});
        }
        o.threads = static_cast<int>(v);
    }
    return o;
}

void apply_overrides(ExperimentConfig& config, const Overrides& env, const Overrides& cli) {
    for (const Overrides* o : {&env, &cli}) {
        if (o->out_dir) config.output.directory = *o->out_dir;
        if (o->threads) {
            if (*o->threads < 1) throw ValidationError({"threads: must be at least 1"});
            config.threads = *o->threads;
        }
        if (o->seed) config.solver.seed = *o->seed;
    }
    config.echo = to_json(config);
}

namespace {

using Clock = std::chrono::steady_clock;

/// Collects artifacts in memory, then writes them with their digests.
class Artifacts {
public:
    explicit Artifacts(const ExperimentConfig& c) : config_(c), start_(Clock::now()) {}

    template <typename Fn>
    auto timed(const std::string& stage, Fn&& fn) {
        const auto t0 = Clock::now();
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            record(stage, t0);
        } else {
            auto result = fn();
            record(stage, t0);
            return result;
        }
    }

    void csv(const std::string& name, const CsvTable& table) {
        if (config_.output.csv) pending_.emplace_back(name, table.str());
    }

    RunResult finish(Json summary, bool passed, const std::string& verdict) {
        RunResult out;
        out.property_passed = passed;
        out.exit_code = passed ? kExitOk : kExitProperty;
        out.verdict = verdict;
        summary["property_passed"] = passed;
        summary["verdict"] = verdict;
        if (config_.output.json) pending_.emplace_back("summary.json", summary.dump(2) + "\n");
        out.summary = std::move(summary);

        const auto t0 = Clock::now();
        Json files = Json::array();
        for (const auto& [name, bytes] : pending_) {
            const auto path = config_.output.directory / name;
            write_file(path, bytes);
            out.files.push_back(path);
            files.push_back({{"name", name}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
        }
        record("write", t0);

        Json m;
        m["tool"] = "semiwave";
        m["version"] = SEMIWAVE_VERSION;
        m["command"] = to_string(config_.command);
        m["started_utc"] = started_utc_;
        m["wall_clock_seconds"] = std::chrono::duration<double>(Clock::now() - start_).count();
        m["timings"] = timings_;
        m["exit_code"] = out.exit_code;
        m["verdict"] = verdict;
        m["config"] = config_.echo;
        m["files"] = files;
        write_file(config_.output.directory / "manifest.json", m.dump(2) + "\n");
        out.manifest = std::move(m);
        return out;
    }

private:
    void record(const std::string& stage, Clock::time_point t0) {
        timings_.push_back({{"stage", stage}, {"seconds", std::chrono::duration<double>(Clock::now() - t0).count()}});
    }

    static std::string now_utc() {
        const std::time_t t = std::time(nullptr);
        std::tm tm{};
        gmtime_r(&t, &tm);
        std::ostringstream s;
        s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
        return s.str();
    }

    const ExperimentConfig& config_;
    Clock::time_point start_;
    std::string started_utc_ = now_utc();
    Json timings_ = Json::array();
    std::vector<std::pair<std::string, std::string>> pending_;
};

CoefficientFunctions regular_coefficients(const ExperimentConfig& c) {
    return {c.a.function(), c.a.derivative(), c.q.function()};
}

std::shared_ptr<const SpectralDecomposition> decompose(const ExperimentConfig& c) {
    const LatticeGrid grid = LatticeGrid::build(c.grid.dim, c.grid.hbar, c.grid.radius);
    const auto h = assemble_hamiltonian(grid, evaluate_potential(c.potential, grid));
    const std::size_t m = c.solver.mode_cap > 0 ? c.solver.mode_cap : grid.site_count();
    return std::make_shared<const SpectralDecomposition>(spectral_decompose(h, m, c.decomposition_options()));
}

CauchyData lattice_data(const ExperimentConfig& c, const SpectralDecomposition& d) {
    CauchyData data{c.data.u0.restrict(d), c.data.u1.restrict(d), Source::zero()};
    if (!c.data.source_time.terms.empty()) {
        data.f = Source::separable(c.data.source_time.function(), c.data.source_space.restrict(d));
    }
    return data;
}

NetConfig net_config(const ExperimentConfig& c) {
    NetConfig n;
    n.horizon = c.solver.horizon;
    n.dt = c.solver.dt;
    n.s = c.solver.s;
    n.epsilons = c.solver.epsilons;
    n.threads = c.threads;
    return n;
}

SourceNet source_net(const ExperimentConfig& c, const SpectralDecomposition& d) {
    SourceNet f{RegularisedNet{c.data.source_time.distribution(), c.solver.mollifier}, std::nullopt};
    if (!c.data.source_space.empty()) f.profile = c.data.source_space.restrict(d);
    return f;
}

ContinuumProblem continuum_problem(const ExperimentConfig& c) {
    ContinuumProblem p;
    p.potential = c.potential;
    p.coeffs = regular_coefficients(c);
    p.u0 = c.data.u0.function();
    p.u1 = c.data.u1.function();
    if (!c.data.source_time.terms.empty()) {
        p.source_time = c.data.source_time.function();
        p.source_space = c.data.source_space.function();
    }
    p.horizon = c.solver.horizon;
    p.dt = c.solver.dt;
    p.half_width = c.grid.half_width;
    return p;
}

ConvergenceConfig convergence_config(const ExperimentConfig& c) {
    ConvergenceConfig cc;
    cc.hbars = c.grid.hbars;
    cc.s = c.solver.s;
    cc.reference = c.solver.reference;
    cc.threads = c.threads;
    return cc;
}

void add_convergence_rows(CsvTable& t, const ConvergenceReport& r, const std::string& eps) {
    for (const auto& row : r.rows) {
        t.add_row({format_double(row.hbar), eps, format_double(row.sup_error_1ps), format_double(row.sup_error_s),
                   format_double(r.fitted_order)});
    }
}

Json convergence_json(const ConvergenceReport& r) {
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"hbar", row.hbar},
                        {"sites", row.sites},
                        {"sup_error_1ps", row.sup_error_1ps},
                        {"sup_error_s", row.sup_error_s},
                        {"sup_error", row.sup_error},
                        {"data_tail", row.data_tail}});
    }
    return {{"s", r.s},
            {"rows", rows},
            {"fitted_order", r.fitted_order},
            {"strictly_decreasing", r.strictly_decreasing},
            {"passed", r.passed},
            {"warnings", r.warnings}};
}

const char* verdict_word(bool ok) { return ok ? "PASS" : "FAIL"; }

RunResult run_spectrum(const ExperimentConfig& c, Artifacts& art) {
    const auto d = art.timed("decompose", [&] { return decompose(c); });
    const auto h = assemble_hamiltonian(d->grid(), evaluate_potential(c.potential, d->grid()));
    const auto diag = art.timed("verify", [&] { return diagnose(h, *d); });
    CsvTable t({"rank", "lambda", "bracket", "gap"});
    for (std::size_t k = 0; k < d->mode_count(); ++k) {
        const double gap = k == 0 ? 0.0 : d->eigenvalue(k) - d->eigenvalue(k - 1);
        t.add_row({std::to_string(k), format_double(d->eigenvalue(k)), format_double(d->bracket(k)), format_double(gap)});
    }
    art.csv("spectrum.csv", t);
    Json s{{"sites", d->grid().site_count()},
           {"modes", d->mode_count()},
           {"method", to_string(d->method())},
           {"max_relative_residual", diag.max_relative_residual},
           {"max_orthogonality_defect", diag.max_orthogonality_defect},
           {"min_eigenvalue", diag.min_eigenvalue}};
    if (d->mode_count() >= 10) {
        const GrowthReport g = eigenvalue_growth_report(*d);
        s["growth"] = {{"monotone", g.monotone},
                       {"strictly_increasing", g.strictly_increasing},
                       {"mean_gap", g.mean_gap},
                       {"last_decile_mean_gap", g.last_decile_mean_gap},
                       {"confinement_consistent", g.confinement_consistent},
                       {"potential_confining", c.potential.confining()}};
    }
    const bool ok = diag.max_relative_residual <= 1e-6 && diag.max_orthogonality_defect <= 1e-8;
    return art.finish(s, ok, std::string("spectrum ") + verdict_word(ok) + ": residual " +
                                 format_double(diag.max_relative_residual));
}

Json energy_json(const EnergyBoundReport& e) {
    auto slack = [](const SlackRecord& r) {
        return Json{{"worst", r.worst}, {"sample", r.sample}, {"mode", r.mode}, {"violations", r.violations}};
    };
    return {{"a0", e.bounds.a0},
            {"a1", e.bounds.a1},
            {"da_sup", e.bounds.da_sup},
            {"q_sup", e.bounds.q_sup},
            {"c0", e.constants.c0},
            {"c1", e.constants.c1},
            {"kappa1", e.constants.kappa1},
            {"kappa2", e.constants.kappa2},
            {"C_T", e.constants.c_t},
            {"symmetriser_defect", e.symmetriser_defect},
            {"sandwich", slack(e.sandwich)},
            {"gronwall", slack(e.gronwall)},
            {"aggregate", slack(e.aggregate)},
            {"aggregate_rhs", e.aggregate_rhs},
            {"tolerance", e.tolerance},
            {"passed", e.passed}};
}

RunResult run_solve(const ExperimentConfig& c, Artifacts& art, bool check_energy) {
    const auto d = art.timed("decompose", [&] { return decompose(c); });
    const CoefficientFunctions coeffs = regular_coefficients(c);
    const PropagationConfig pc{c.solver.horizon, c.solver.dt, c.solver.s, c.threads};
    TrajectorySolution traj = art.timed("propagate", [&] { return propagate(d, coeffs, lattice_data(c, *d), pc); });
    if (check_energy && c.solver.fault_factor > 0.0) inject_energy_fault(traj, c.solver.fault_factor);
    const EnergyBoundReport e =
        art.timed("verify", [&] { return verify_energy_estimate(traj, coeffs, c.solver.energy_tolerance); });

    Json s{{"sites", d->grid().site_count()},
           {"modes", d->mode_count()},
           {"samples", traj.sample_count()},
           {"step", traj.stages.h},
           {"energy", energy_json(e)}};
    if (!check_energy) {
        CsvTable t({"t", "norm_1ps", "norm_s"});
        for (std::size_t k = 0; k < traj.sample_count(); ++k) {
            t.add_row(std::vector<double>{traj.times[k], traj.norm_1ps[k], traj.norm_s[k]});
        }
        art.csv("trajectory.csv", t);
        s["l2_time_norm"] = l2_time_norm(traj);
        return art.finish(s, true, "solve done: " + std::to_string(traj.sample_count()) + " samples");
    }
    CsvTable t({"t", "norm_1ps", "norm_s", "energy_lhs", "energy_rhs"});
    for (std::size_t k = 0; k < traj.sample_count(); ++k) {
        t.add_row(std::vector<double>{traj.times[k], traj.norm_1ps[k], traj.norm_s[k], e.aggregate_lhs[k],
                                      e.aggregate_rhs});
    }
    art.csv("energy.csv", t);
    s["fault_injection"] = c.solver.fault_factor;
    const double worst = std::min({e.sandwich.worst, e.gronwall.worst, e.aggregate.worst});
    return art.finish(s, e.passed,
                      std::string("energy estimate ") + verdict_word(e.passed) + ": worst slack " + format_double(worst));
}

Json moderation_json(const ModerationReport& r) {
    return {{"classification", to_string(r.classification)},
            {"order", r.order},
            {"slopes", r.slopes},
            {"fit_residual", r.fit_residual}};
}

RunResult run_veryweak(const ExperimentConfig& c, Artifacts& art) {
    const auto d = art.timed("decompose", [&] { return decompose(c); });
    const RegularisedNet a{c.a.distribution(), c.solver.mollifier};
    const RegularisedNet q{c.q.distribution(), c.solver.mollifier};
    const VeryWeakSolution sol = art.timed("propagate", [&] {
        return solve_regularised_net(d, a, q, source_net(c, *d), c.data.u0.restrict(*d), c.data.u1.restrict(*d),
                                     net_config(c));
    });
    const ModerationReport a_fit = net_moderateness(a, c.solver.epsilons, c.solver.horizon);
    CsvTable t({"epsilon", "omega", "sup_a", "sup_da", "sup_q", "sol_norm"});
    for (const auto& r : sol.rows) {
        t.add_row(std::vector<double>{r.epsilon, r.omega, r.sup_a, r.sup_da, r.sup_q, r.sol_norm});
    }
    art.csv("net.csv", t);
    const bool ok = sol.solution_fit.classification != NetClass::not_moderate;
    Json s{{"solution", moderation_json(sol.solution_fit)}, {"coefficient_a", moderation_json(a_fit)}};
    return art.finish(s, ok, std::string("very weak existence ") + verdict_word(ok) + ": solution net " +
                                 to_string(sol.solution_fit.classification));
}

RunResult run_uniqueness(const ExperimentConfig& c, Artifacts& art) {
    const auto d = art.timed("decompose", [&] { return decompose(c); });
    const RegularisedNet a{c.a.distribution(), c.solver.mollifier};
    const RegularisedNet q{c.q.distribution(), c.solver.mollifier};
    const UniquenessReport r = art.timed("propagate", [&] {
        return uniqueness_experiment(d, a, q, source_net(c, *d), c.data.u0.restrict(*d), c.data.u1.restrict(*d),
                                     net_config(c), c.solver.perturbation);
    });
    CsvTable t({"epsilon", "difference"});
    for (std::size_t i = 0; i < r.epsilons.size(); ++i) t.add_row(std::vector<double>{r.epsilons[i], r.differences[i]});
    art.csv("uniqueness.csv", t);
    Json s{{"slope", r.slope}, {"required_slope", r.required_slope}, {"passed", r.passed}};
    return art.finish(s, r.passed, std::string("uniqueness ") + verdict_word(r.passed) + ": slope " +
                                       format_double(r.slope) + " vs required " + format_double(r.required_slope));
}

RunResult run_consistency(const ExperimentConfig& c, Artifacts& art) {
    const auto d = art.timed("decompose", [&] { return decompose(c); });
    const ConsistencyReport r = art.timed("propagate", [&] {
        return consistency_experiment(d, regular_coefficients(c), c.solver.mollifier, lattice_data(c, *d),
                                      net_config(c), c.solver.consistency_tolerance);
    });
    CsvTable t({"epsilon", "error"});
    for (std::size_t i = 0; i < r.epsilons.size(); ++i) t.add_row(std::vector<double>{r.epsilons[i], r.errors[i]});
    art.csv("consistency.csv", t);
    Json s{{"monotone", r.monotone},
           {"strictly_decreasing", r.strictly_decreasing},
           {"tolerance", r.tolerance},
           {"final_error", r.errors.empty() ? 0.0 : r.errors.back()},
           {"passed", r.passed}};
    return art.finish(s, r.passed, std::string("consistency ") + verdict_word(r.passed) + ": final error " +
                                       format_double(r.errors.empty() ? 0.0 : r.errors.back()));
}

RunResult run_defect(const ExperimentConfig& c, Artifacts& art) {
    const SmoothFunction phi = c.phi.function(c.grid.dim);
    const DefectReport r = art.timed("defect", [&] {
        return defect_report(phi, c.grid.dim, c.grid.hbars, c.potential, c.solver.s, c.grid.half_width, c.threads);
    });
    CsvTable t({"hbar", "defect_norm", "raw_norm"});
    for (const auto& row : r.rows) t.add_row(std::vector<double>{row.hbar, row.scaled_norm, row.raw_norm});
    art.csv("defect.csv", t);
    Json s{{"fitted_order", r.fitted_order}, {"raw_order", r.raw_order}, {"s", r.s}};
    // Only the Gaussian profile carries a checked rate; polynomial runs are reports.
    bool ok = true;
    std::string verdict = "defect report: order " + format_double(r.fitted_order);
    if (c.phi.kind == DefectBlock::Kind::gaussian) {
        ok = std::abs(r.fitted_order - 2.0) <= 0.2;
        verdict = std::string("defect order ") + verdict_word(ok) + ": " + format_double(r.fitted_order);
    }
    return art.finish(s, ok, verdict);
}

RunResult run_semiclassical(const ExperimentConfig& c, Artifacts& art) {
    const ConvergenceReport r =
        art.timed("propagate", [&] { return semiclassical_convergence(continuum_problem(c), convergence_config(c)); });
    CsvTable t({"hbar", "epsilon_or_blank", "sup_error_1ps", "sup_error_s", "fitted_order"});
    add_convergence_rows(t, r, "");
    art.csv("convergence.csv", t);
    return art.finish(convergence_json(r), r.passed,
                      std::string("semiclassical limit ") + verdict_word(r.passed) + ": fitted order " +
                          format_double(r.fitted_order));
}

RunResult run_veryweak_semiclassical(const ExperimentConfig& c, Artifacts& art) {
    const RegularisedNet a{c.a.distribution(), c.solver.mollifier};
    const RegularisedNet q{c.q.distribution(), c.solver.mollifier};
    const VeryWeakConvergenceReport r = art.timed("propagate", [&] {
        return veryweak_semiclassical(continuum_problem(c), a, q, c.solver.epsilons, convergence_config(c));
    });
    CsvTable t({"hbar", "epsilon_or_blank", "sup_error_1ps", "sup_error_s", "fitted_order"});
    Json cols = Json::array();
    for (std::size_t i = 0; i < r.epsilons.size(); ++i) {
        add_convergence_rows(t, r.columns[i], format_double(r.epsilons[i]));
        Json col = convergence_json(r.columns[i]);
        col["epsilon"] = r.epsilons[i];
        cols.push_back(col);
    }
    art.csv("convergence.csv", t);
    return art.finish(Json{{"columns", cols}, {"passed", r.passed}}, r.passed,
                      std::string("very weak semiclassical limit ") + verdict_word(r.passed));
}

}  // namespace

RunResult run(const ExperimentConfig& config) {
    Artifacts art(config);
    switch (config.command) {
        case Command::spectrum: return run_spectrum(config, art);
        case Command::solve: return run_solve(config, art, false);
        case Command::energy_check: return run_solve(config, art, true);
        case Command::veryweak: return run_veryweak(config, art);
        case Command::uniqueness: return run_uniqueness(config, art);
        case Command::consistency: return run_consistency(config, art);
        case Command::defect: return run_defect(config, art);
        case Command::semiclassical: return run_semiclassical(config, art);
        case Command::veryweak_semiclassical: return run_veryweak_semiclassical(config, art);
    }
    throw Error("unhandled command");
}

int run_cli(const std::string& command, const std::filesystem::path& config_path, const Overrides& cli,
            std::ostream& out, std::ostream& err) {
    try {
        const auto cmd = parse_command(command);
        if (!cmd) {
            err << "error: unknown command '" << command << "'\n";
            return kExitValidation;
        }
        ExperimentConfig config = load_config(config_path);
        if (config.command != *cmd) {
            err << "error: command '" << command << "' does not match the config command '"
                << to_string(config.command) << "'\n";
            return kExitValidation;
        }
        apply_overrides(config, environment_overrides(), cli);
        const RunResult r = run(config);
        out << r.verdict << "\n";
        out << "artifacts: " << config.output.directory.string() << "\n";
        return r.exit_code;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const ValidationError& e) {
        err << e.what() << "\n";
        return kExitValidation;
    } catch (const ConfigurationError& e) {
        err << "configuration error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const CertificateError& e) {
        err << "certificate error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const DomainError& e) {
        err << "domain error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const SizeError& e) {
        err << "size error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const DivergenceError& e) {
        err << "property failure: " << e.what() << "\n";
        return kExitProperty;
    } catch (const AccuracyError& e) {
        err << "property failure: " << e.what() << "\n";
        return kExitProperty;
    } catch (const ConvergenceError& e) {
        err << "property failure: " << e.what() << "\n";
        return kExitProperty;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    } catch (...) {
        err << "internal error\n";
        return kExitInternal;
    }
}

}  // namespace semiwave
