#include "semiwave/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace semiwave {

namespace {

std::string join_messages(const std::vector<std::string>& messages) {
    std::string out = "invalid configuration:";
    for (const auto& m : messages) out += "\n  " + m;
    return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> messages)
    : Error(join_messages(messages)), messages_(std::move(messages)) {}

namespace {

constexpr std::pair<Command, const char*> kCommands[] = {
    {Command::spectrum, "spectrum"},
    {Command::solve, "solve"},
    {Command::energy_check, "energy-check"},
    {Command::veryweak, "veryweak"},
    {Command::uniqueness, "uniqueness"},
    {Command::consistency, "consistency"},
    {Command::defect, "defect"},
    {Command::semiclassical, "semiclassical"},
    {Command::veryweak_semiclassical, "veryweak-semiclassical"},
};

constexpr std::pair<TimeTerm::Kind, const char*> kTimeKinds[] = {
    {TimeTerm::Kind::constant, "constant"}, {TimeTerm::Kind::sin, "sin"},
    {TimeTerm::Kind::cos, "cos"},           {TimeTerm::Kind::polynomial, "polynomial"},
    {TimeTerm::Kind::exp, "exp"},           {TimeTerm::Kind::dirac, "dirac"},
    {TimeTerm::Kind::dirac_derivative, "dirac-derivative"}, {TimeTerm::Kind::heaviside, "heaviside"},
};

constexpr std::pair<SpaceTerm::Kind, const char*> kSpaceKinds[] = {
    {SpaceTerm::Kind::eigenmode, "eigenmode"},
    {SpaceTerm::Kind::gaussian, "gaussian"},
    {SpaceTerm::Kind::hermite, "hermite"},
};

template <typename E, std::size_t N>
const char* name_of(const std::pair<E, const char*> (&table)[N], E value) {
    for (const auto& [k, n] : table) {
        if (k == value) return n;
    }
    return "unknown";
}

bool is_veryweak(Command c) {
    return c == Command::veryweak || c == Command::uniqueness || c == Command::veryweak_semiclassical;
}

bool is_continuum(Command c) { return c == Command::semiclassical || c == Command::veryweak_semiclassical; }

/// Collects every problem instead of stopping at the first.
class Reader {
public:
    std::vector<std::string> errors;

    static std::string join(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }

    void fail(const std::string& path, const std::string& msg) {
        errors.push_back((path.empty() ? std::string("config") : path) + ": " + msg);
    }

    bool object(const Json& v, const std::string& path, std::initializer_list<const char*> allowed) {
        if (!v.is_object()) {
            fail(path, "expected an object");
            return false;
        }
        const std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& item : v.items()) {
            if (!ok.count(item.key())) fail(join(path, item.key()), "unknown field");
        }
        return true;
    }

    double number(const Json& obj, const std::string& path, const char* key, double def) {
        if (!obj.contains(key)) return def;
        const Json& v = obj[key];
        if (!v.is_number()) {
            fail(join(path, key), "expected a number");
            return def;
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(join(path, key), "must be finite");
        return x;
    }

    long long integer(const Json& obj, const std::string& path, const char* key, long long def) {
        if (!obj.contains(key)) return def;
        const Json& v = obj[key];
        if (!v.is_number_integer()) {
            fail(join(path, key), "expected an integer");
            return def;
        }
        return v.get<long long>();
    }

    std::string text(const Json& obj, const std::string& path, const char* key, const std::string& def) {
        if (!obj.contains(key)) return def;
        const Json& v = obj[key];
        if (!v.is_string()) {
            fail(join(path, key), "expected a string");
            return def;
        }
        return v.get<std::string>();
    }

    bool boolean(const Json& obj, const std::string& path, const char* key, bool def) {
        if (!obj.contains(key)) return def;
        const Json& v = obj[key];
        if (!v.is_boolean()) {
            fail(join(path, key), "expected true or false");
            return def;
        }
        return v.get<bool>();
    }

    std::vector<double> numbers(const Json& obj, const std::string& path, const char* key, std::vector<double> def) {
        if (!obj.contains(key)) return def;
        const Json& v = obj[key];
        if (!v.is_array()) {
            fail(join(path, key), "expected an array of numbers");
            return def;
        }
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
                fail(join(path, key) + "[" + std::to_string(i) + "]", "expected a finite number");
                continue;
            }
            out.push_back(v[i].get<double>());
        }
        return out;
    }
};

TimeProfile read_time_profile(Reader& r, const Json& v, const std::string& path) {
    TimeProfile p;
    if (!v.is_array()) {
        r.fail(path, "expected an array of terms");
        return p;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string at = path + "[" + std::to_string(i) + "]";
        if (!r.object(v[i], at, {"type", "value", "amplitude", "frequency", "phase", "rate", "coefficients", "t0",
                                 "strength", "jump", "order"})) {
            continue;
        }
        const std::string type = r.text(v[i], at, "type", "");
        TimeTerm t;
        bool known = false;
        for (const auto& [k, n] : kTimeKinds) {
            if (type == n) {
                t.kind = k;
                known = true;
            }
        }
        if (!known) {
            r.fail(at + ".type", "unknown time term '" + type + "'");
            continue;
        }
        switch (t.kind) {
            case TimeTerm::Kind::constant: t.value = r.number(v[i], at, "value", 0.0); break;
            case TimeTerm::Kind::sin:
            case TimeTerm::Kind::cos:
                t.value = r.number(v[i], at, "amplitude", 1.0);
                t.frequency = r.number(v[i], at, "frequency", 1.0);
                t.phase = r.number(v[i], at, "phase", 0.0);
                break;
            case TimeTerm::Kind::exp:
                t.value = r.number(v[i], at, "amplitude", 1.0);
                t.frequency = r.number(v[i], at, "rate", 1.0);
                break;
            case TimeTerm::Kind::polynomial:
                t.coefficients = r.numbers(v[i], at, "coefficients", {});
                if (t.coefficients.empty()) r.fail(at + ".coefficients", "needs at least one coefficient");
                break;
            case TimeTerm::Kind::dirac:
                t.t0 = r.number(v[i], at, "t0", 0.0);
                t.value = r.number(v[i], at, "strength", 1.0);
                break;
            case TimeTerm::Kind::dirac_derivative:
                t.t0 = r.number(v[i], at, "t0", 0.0);
                t.value = r.number(v[i], at, "strength", 1.0);
                t.order = static_cast<int>(r.integer(v[i], at, "order", 1));
                if (t.order < 0 || t.order > 2) r.fail(at + ".order", "derivative order must be 0, 1 or 2");
                break;
            case TimeTerm::Kind::heaviside:
                t.t0 = r.number(v[i], at, "t0", 0.0);
                t.value = r.number(v[i], at, "jump", 1.0);
                break;
        }
        p.terms.push_back(t);
    }
    return p;
}

SpaceProfile read_space_profile(Reader& r, const Json& v, const std::string& path, int dim) {
    SpaceProfile p;
    if (!v.is_array()) {
        r.fail(path, "expected an array of terms");
        return p;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string at = path + "[" + std::to_string(i) + "]";
        if (!r.object(v[i], at, {"type", "weight", "mode", "order", "center", "width"})) continue;
        const std::string type = r.text(v[i], at, "type", "");
        SpaceTerm t;
        bool known = false;
        for (const auto& [k, n] : kSpaceKinds) {
            if (type == n) {
                t.kind = k;
                known = true;
            }
        }
        if (!known) {
            r.fail(at + ".type", "unknown data term '" + type + "'");
            continue;
        }
        t.weight = r.number(v[i], at, "weight", 1.0);
        if (t.kind == SpaceTerm::Kind::eigenmode || t.kind == SpaceTerm::Kind::hermite) {
            const long long idx = r.integer(v[i], at, t.kind == SpaceTerm::Kind::eigenmode ? "mode" : "order", 0);
            if (idx < 0) r.fail(at, "index must be non-negative");
            if (t.kind == SpaceTerm::Kind::hermite && idx > 200) r.fail(at + ".order", "Hermite order must be <= 200");
            if (t.kind == SpaceTerm::Kind::hermite && dim != 1) r.fail(at, "Hermite terms need dim = 1");
            t.index = static_cast<std::size_t>(std::max(0LL, idx));
        } else {
            t.width = r.number(v[i], at, "width", 1.0);
            if (!(t.width > 0.0)) r.fail(at + ".width", "must be positive");
            const std::vector<double> c = r.numbers(v[i], at, "center", {});
            if (static_cast<int>(c.size()) > dim) r.fail(at + ".center", "has more entries than the dimension");
            for (std::size_t j = 0; j < c.size() && j < t.center.size(); ++j) t.center[j] = c[j];
        }
        p.terms.push_back(t);
    }
    return p;
}

double term_value(const TimeTerm& t, double x) {
    switch (t.kind) {
        case TimeTerm::Kind::constant: return t.value;
        case TimeTerm::Kind::sin: return t.value * std::sin(t.frequency * x + t.phase);
        case TimeTerm::Kind::cos: return t.value * std::cos(t.frequency * x + t.phase);
        case TimeTerm::Kind::exp: return t.value * std::exp(t.frequency * x);
        case TimeTerm::Kind::polynomial: {
            double acc = 0.0;
            for (auto it = t.coefficients.rbegin(); it != t.coefficients.rend(); ++it) acc = acc * x + *it;
            return acc;
        }
        default: return 0.0;
    }
}

double term_derivative(const TimeTerm& t, double x) {
    switch (t.kind) {
        case TimeTerm::Kind::sin: return t.value * t.frequency * std::cos(t.frequency * x + t.phase);
        case TimeTerm::Kind::cos: return -t.value * t.frequency * std::sin(t.frequency * x + t.phase);
        case TimeTerm::Kind::exp: return t.value * t.frequency * std::exp(t.frequency * x);
        case TimeTerm::Kind::polynomial: {
            double acc = 0.0;
            for (std::size_t k = t.coefficients.size(); k-- > 1;) acc = acc * x + static_cast<double>(k) * t.coefficients[k];
            return acc;
        }
        default: return 0.0;
    }
}

Json time_profile_json(const TimeProfile& p) {
    Json arr = Json::array();
    for (const auto& t : p.terms) {
        Json j;
        j["type"] = name_of(kTimeKinds, t.kind);
        switch (t.kind) {
            case TimeTerm::Kind::constant: j["value"] = t.value; break;
            case TimeTerm::Kind::sin:
            case TimeTerm::Kind::cos:
                j["amplitude"] = t.value;
                j["frequency"] = t.frequency;
                j["phase"] = t.phase;
                break;
            case TimeTerm::Kind::exp:
                j["amplitude"] = t.value;
                j["rate"] = t.frequency;
                break;
            case TimeTerm::Kind::polynomial: j["coefficients"] = t.coefficients; break;
            case TimeTerm::Kind::dirac:
                j["t0"] = t.t0;
                j["strength"] = t.value;
                break;
            case TimeTerm::Kind::dirac_derivative:
                j["t0"] = t.t0;
                j["strength"] = t.value;
                j["order"] = t.order;
                break;
            case TimeTerm::Kind::heaviside:
                j["t0"] = t.t0;
                j["jump"] = t.value;
                break;
        }
        arr.push_back(j);
    }
    return arr;
}

Json space_profile_json(const SpaceProfile& p, int dim) {
    Json arr = Json::array();
    for (const auto& t : p.terms) {
        Json j;
        j["type"] = name_of(kSpaceKinds, t.kind);
        j["weight"] = t.weight;
        if (t.kind == SpaceTerm::Kind::eigenmode) j["mode"] = t.index;
        if (t.kind == SpaceTerm::Kind::hermite) j["order"] = t.index;
        if (t.kind == SpaceTerm::Kind::gaussian) {
            j["center"] = std::vector<double>(t.center.begin(), t.center.begin() + dim);
            j["width"] = t.width;
        }
        arr.push_back(j);
    }
    return arr;
}

}  // namespace

std::string to_string(Command c) { return name_of(kCommands, c); }

std::optional<Command> parse_command(const std::string& name) {
    for (const auto& [k, n] : kCommands) {
        if (name == n) return k;
    }
    return std::nullopt;
}

bool TimeProfile::singular() const {
    for (const auto& t : terms) {
        if (t.singular()) return true;
    }
    return false;
}

TimeFunction TimeProfile::function() const {
    return [terms = terms](double x) {
        double acc = 0.0;
        for (const auto& t : terms) acc += term_value(t, x);
        return acc;
    };
}

TimeFunction TimeProfile::derivative() const {
    return [terms = terms](double x) {
        double acc = 0.0;
        for (const auto& t : terms) acc += term_derivative(t, x);
        return acc;
    };
}

DistributionSpec TimeProfile::distribution() const {
    DistributionSpec d;
    TimeProfile smooth;
    for (const auto& t : terms) {
        switch (t.kind) {
            case TimeTerm::Kind::constant: d.constant(t.value); break;
            case TimeTerm::Kind::dirac: d.dirac(t.t0, t.value); break;
            case TimeTerm::Kind::dirac_derivative: d.dirac_derivative(t.t0, t.value, t.order); break;
            case TimeTerm::Kind::heaviside: d.heaviside(t.t0, t.value); break;
            default: smooth.terms.push_back(t);
        }
    }
    if (!smooth.terms.empty()) d.smooth(smooth.function(), smooth.derivative());
    return d;
}

bool SpaceProfile::uses_eigenmodes() const {
    for (const auto& t : terms) {
        if (t.kind == SpaceTerm::Kind::eigenmode) return true;
    }
    return false;
}

SpatialFunction SpaceProfile::function() const {
    if (terms.empty()) return {};
    if (uses_eigenmodes()) throw ConfigurationError("eigenmode data has no continuum counterpart");
    return [terms = terms](double x) {
        double acc = 0.0;
        for (const auto& t : terms) {
            if (t.kind == SpaceTerm::Kind::hermite) {
                acc += t.weight * hermite::value(t.index, x);
            } else {
                const double d = (x - t.center[0]) / t.width;
                acc += t.weight * std::exp(-d * d);
            }
        }
        return acc;
    };
}

LatticeFunction SpaceProfile::restrict(const SpectralDecomposition& decomp) const {
    const LatticeGrid& g = decomp.grid();
    LatticeFunction out(g);
    for (const auto& t : terms) {
        if (t.kind == SpaceTerm::Kind::eigenmode) {
            if (t.index >= decomp.mode_count()) throw ConfigurationError("eigenmode index exceeds the mode count");
            out.values() += t.weight * decomp.eigenvector_values(t.index).cast<Complex>();
            continue;
        }
        for (std::size_t i = 0; i < g.site_count(); ++i) {
            const Point x = g.coordinates(i);
            if (t.kind == SpaceTerm::Kind::hermite) {
                out[i] += t.weight * hermite::value(t.index, x[0]);
            } else {
                double r2 = 0.0;
                for (int j = 0; j < g.dim(); ++j) {
                    const double d = (x[static_cast<std::size_t>(j)] - t.center[static_cast<std::size_t>(j)]) / t.width;
                    r2 += d * d;
                }
                out[i] += t.weight * std::exp(-r2);
            }
        }
    }
    return out;
}

SmoothFunction DefectBlock::function(int dim) const {
    if (kind == Kind::monomial) {
        const int d = degree;
        return {[d, dim](const Point& x) {
                    double s = 0.0;
                    for (int j = 0; j < dim; ++j) s += std::pow(x[static_cast<std::size_t>(j)], d);
                    return s;
                },
                [d, dim](const Point& x) {
                    if (d < 2) return 0.0;
                    double s = 0.0;
                    for (int j = 0; j < dim; ++j) s += d * (d - 1) * std::pow(x[static_cast<std::size_t>(j)], d - 2);
                    return s;
                }};
    }
    const double w2 = width * width;
    auto r2 = [dim](const Point& x) {
        double s = 0.0;
        for (int j = 0; j < dim; ++j) s += x[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
        return s;
    };
    return {[=](const Point& x) { return std::exp(-r2(x) / w2); },
            [=](const Point& x) { return (4.0 * r2(x) / (w2 * w2) - 2.0 * dim / w2) * std::exp(-r2(x) / w2); }};
}

DecompositionOptions ExperimentConfig::decomposition_options() const {
    DecompositionOptions o;
    o.method = solver.method;
    o.seed = solver.seed;
    return o;
}

ExperimentConfig parse_config(const Json& doc) {
    Reader r;
    ExperimentConfig c;
    if (!r.object(doc, "", {"command", "grid", "potential", "coefficients", "data", "phi", "solver", "output",
                                  "threads"})) {
        throw ValidationError(r.errors);
    }

    const std::string cmd = r.text(doc, "", "command", "");
    if (cmd.empty()) {
        r.fail("command", "missing");
    } else if (auto parsed = parse_command(cmd)) {
        c.command = *parsed;
    } else {
        r.fail("command", "unknown command '" + cmd + "'");
    }
    const bool continuum = is_continuum(c.command);
    const bool weak = is_veryweak(c.command);

    // grid
    const Json empty = Json::object();
    const Json& grid = doc.contains("grid") ? doc["grid"] : empty;
    if (r.object(grid, "grid", {"dim", "hbar", "radius", "hbars", "half_width"})) {
        c.grid.dim = static_cast<int>(r.integer(grid, "grid", "dim", 1));
        c.grid.hbar = r.number(grid, "grid", "hbar", 1.0);
        c.grid.radius = static_cast<int>(r.integer(grid, "grid", "radius", 1));
        const bool ladder = continuum || c.command == Command::defect;
        c.grid.hbars = r.numbers(grid, "grid", "hbars", ladder ? std::vector<double>{0.4, 0.2, 0.1, 0.05}
                                                                : std::vector<double>{});
        c.grid.half_width = r.number(grid, "grid", "half_width", 8.0);
    }
    if (c.grid.dim < 1 || c.grid.dim > kMaxDim) r.fail("grid.dim", "must be 1, 2 or 3");
    if (!(c.grid.hbar > 0.0)) r.fail("grid.hbar", "must be positive");
    if (c.grid.radius < 1) r.fail("grid.radius", "must be at least 1");
    if (!(c.grid.half_width > 0.0)) r.fail("grid.half_width", "must be positive");
    for (double h : c.grid.hbars) {
        if (!(h > 0.0)) r.fail("grid.hbars", "every hbar must be positive");
    }
    if (continuum && c.grid.dim != 1) r.fail("grid.dim", "continuum comparison is one-dimensional");
    if (continuum && c.grid.hbars.empty()) r.fail("grid.hbars", "hbar grid is empty");
    if (c.command == Command::defect && c.grid.hbars.size() < 3) r.fail("grid.hbars", "needs at least three values");
    std::size_t sites = 0;
    if (c.grid.dim >= 1 && c.grid.dim <= kMaxDim && c.grid.radius >= 1 && !continuum && c.command != Command::defect) {
        const double side = 2.0 * c.grid.radius + 1.0;
        const double total = std::pow(side, c.grid.dim);
        if (total > static_cast<double>(kDefaultSiteBudget)) {
            r.fail("grid", "lattice has " + std::to_string(static_cast<long long>(total)) + " sites, above the budget");
        } else {
            sites = static_cast<std::size_t>(total);
        }
    }

    // potential
    if (doc.contains("potential")) {
        const Json& pot = doc["potential"];
        if (r.object(pot, "potential", {"kind", "alpha", "delta", "table"})) {
            const std::string kind = r.text(pot, "potential", "kind", "zero");
            try {
                c.potential.kind = parse_potential_kind(kind);
            } catch (const DomainError&) {
                r.fail("potential.kind", "unknown potential '" + kind + "'");
            }
            c.potential.alpha = r.number(pot, "potential", "alpha", 2.0);
            c.potential.delta = r.number(pot, "potential", "delta", 1.0);
            c.potential.table = r.numbers(pot, "potential", "table", {});
        }
    } else if (continuum) {
        c.potential = PotentialSpec::harmonic();
    }
    if (!(c.potential.alpha > 0.0)) r.fail("potential.alpha", "must be positive");
    if (!(c.potential.delta > 0.0)) r.fail("potential.delta", "must be positive");
    if (c.potential.kind == PotentialKind::anharmonic_2d && c.grid.dim != 2) {
        r.fail("potential.kind", "anharmonic-2d needs dim = 2");
    }
    if (c.potential.kind == PotentialKind::table) {
        if (continuum || c.command == Command::defect) r.fail("potential.kind", "table potentials need a single grid");
        if (sites != 0 && c.potential.table.size() != sites) {
            r.fail("potential.table", "has " + std::to_string(c.potential.table.size()) + " entries for " +
                                          std::to_string(sites) + " sites");
        }
        for (double v : c.potential.table) {
            if (v < 0.0) {
                r.fail("potential.table", "potential must be non-negative");
                break;
            }
        }
    }

    // solver
    const Json& solver = doc.contains("solver") ? doc["solver"] : empty;
    SolverBlock& s = c.solver;
    if (continuum) s.s = 5.0;
    if (r.object(solver, "solver", {"T", "dt", "s", "mode_cap", "method", "seed", "epsilons", "mollifier",
                                    "energy_tolerance", "fault_injection", "consistency_tolerance", "perturbation",
                                    "reference"})) {
        s.horizon = r.number(solver, "solver", "T", s.horizon);
        s.dt = r.number(solver, "solver", "dt", s.dt);
        s.s = r.number(solver, "solver", "s", s.s);
        const long long cap = r.integer(solver, "solver", "mode_cap", 0);
        if (cap < 0) r.fail("solver.mode_cap", "must be non-negative");
        s.mode_cap = static_cast<std::size_t>(std::max(0LL, cap));
        const std::string method = r.text(solver, "solver", "method", "automatic");
        if (method == "automatic") s.method = DecompositionMethod::automatic;
        else if (method == "dense") s.method = DecompositionMethod::dense;
        else if (method == "product") s.method = DecompositionMethod::product;
        else if (method == "lanczos") s.method = DecompositionMethod::lanczos;
        else r.fail("solver.method", "unknown method '" + method + "'");
        const long long seed = r.integer(solver, "solver", "seed", static_cast<long long>(s.seed));
        if (seed < 0) r.fail("solver.seed", "must be non-negative");
        s.seed = static_cast<std::uint64_t>(std::max(0LL, seed));
        s.epsilons = r.numbers(solver, "solver", "epsilons", s.epsilons);
        if (solver.contains("mollifier") && r.object(solver["mollifier"], "solver.mollifier", {"scale", "power"})) {
            const std::string scale = r.text(solver["mollifier"], "solver.mollifier", "scale", "log");
            if (scale == "log") s.mollifier.scale = Mollifier::Scale::log;
            else if (scale == "power") s.mollifier.scale = Mollifier::Scale::power;
            else r.fail("solver.mollifier.scale", "must be 'log' or 'power'");
            s.mollifier.power = r.number(solver["mollifier"], "solver.mollifier", "power", 1.0);
            if (!(s.mollifier.power > 0.0)) r.fail("solver.mollifier.power", "must be positive");
        }
        s.energy_tolerance = r.number(solver, "solver", "energy_tolerance", s.energy_tolerance);
        s.fault_factor = r.number(solver, "solver", "fault_injection", 0.0);
        s.consistency_tolerance = r.number(solver, "solver", "consistency_tolerance", s.consistency_tolerance);
        if (solver.contains("perturbation") &&
            r.object(solver["perturbation"], "solver.perturbation",
                     {"order", "amplitude", "scale_with_epsilon", "allow_non_negligible"})) {
            const Json& p = solver["perturbation"];
            s.perturbation.order = r.number(p, "solver.perturbation", "order", 3.0);
            s.perturbation.amplitude = r.number(p, "solver.perturbation", "amplitude", 1.0);
            s.perturbation.scale_with_epsilon = r.boolean(p, "solver.perturbation", "scale_with_epsilon", true);
            s.perturbation.allow_non_negligible = r.boolean(p, "solver.perturbation", "allow_non_negligible", false);
        }
        if (solver.contains("reference") &&
            r.object(solver["reference"], "solver.reference", {"kind", "mode_cap", "hbar_ref", "tail_tolerance"})) {
            const Json& ref = solver["reference"];
            const std::string kind = r.text(ref, "solver.reference", "kind", "hermite-1d");
            if (kind == "hermite-1d") s.reference.kind = ContinuumReference::Kind::hermite_1d;
            else if (kind == "fine-lattice") s.reference.kind = ContinuumReference::Kind::fine_lattice;
            else r.fail("solver.reference.kind", "must be 'hermite-1d' or 'fine-lattice'");
            const long long cap2 = r.integer(ref, "solver.reference", "mode_cap", 48);
            if (cap2 < 1 || cap2 > 201) r.fail("solver.reference.mode_cap", "must lie in [1, 201]");
            s.reference.mode_cap = static_cast<std::size_t>(std::clamp(cap2, 1LL, 201LL));
            s.reference.hbar_ref = r.number(ref, "solver.reference", "hbar_ref", s.reference.hbar_ref);
            s.reference.tail_tolerance = r.number(ref, "solver.reference", "tail_tolerance", 1e-8);
        }
    }
    if (!(s.horizon >= 0.0)) r.fail("solver.T", "must be non-negative");
    if (!(s.dt > 0.0)) r.fail("solver.dt", "must be positive");
    if (sites != 0 && s.mode_cap > sites) r.fail("solver.mode_cap", "exceeds the number of lattice sites");
    if (s.fault_factor < 0.0) r.fail("solver.fault_injection", "must be non-negative");
    if (!(s.energy_tolerance >= 0.0)) r.fail("solver.energy_tolerance", "must be non-negative");
    if (!(s.consistency_tolerance > 0.0)) r.fail("solver.consistency_tolerance", "must be positive");
    for (double e : s.epsilons) {
        if (!(e > 0.0 && e < 1.0)) {
            r.fail("solver.epsilons", "every epsilon must lie in (0, 1)");
            break;
        }
    }
    if (c.command == Command::veryweak) {
        double lo = 1.0, hi = 0.0;
        for (double e : s.epsilons) {
            lo = std::min(lo, e);
            hi = std::max(hi, e);
        }
        if (s.epsilons.size() < 5 || !(hi >= 100.0 * lo)) {
            r.fail("solver.epsilons", "moderateness fit needs at least 5 values spanning two decades");
        }
    }
    if ((c.command == Command::uniqueness || c.command == Command::consistency) && s.epsilons.size() < 2) {
        r.fail("solver.epsilons", "needs at least two values");
    }
    if (c.command == Command::veryweak_semiclassical && s.epsilons.empty()) r.fail("solver.epsilons", "is empty");
    if (c.command == Command::uniqueness) {
        const auto& p = s.perturbation;
        if (!(p.order > 0.0)) r.fail("solver.perturbation.order", "must be positive");
        if (!(p.amplitude >= 0.0)) r.fail("solver.perturbation.amplitude", "must be non-negative");
        if ((!p.scale_with_epsilon || p.order < 1.0) && !p.allow_non_negligible) {
            r.fail("solver.perturbation", "perturbation is not negligible; set allow_non_negligible for a control run");
        }
    }
    if (continuum) {
        if (s.reference.kind == ContinuumReference::Kind::hermite_1d && c.potential.kind != PotentialKind::harmonic) {
            r.fail("solver.reference.kind", "hermite-1d needs the harmonic potential");
        }
        if (s.reference.kind == ContinuumReference::Kind::fine_lattice) {
            if (!(s.reference.hbar_ref > 0.0)) {
                r.fail("solver.reference.hbar_ref", "must be positive");
            } else {
                for (double h : c.grid.hbars) {
                    const double ratio = h / s.reference.hbar_ref;
                    if (std::lround(ratio) < 1 || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
                        r.fail("solver.reference.hbar_ref", "hbar / hbar_ref must be a positive integer");
                        break;
                    }
                }
            }
        }
    }

    // coefficients
    c.a.terms = {TimeTerm{}};
    c.a.terms[0].value = 1.0;
    if (doc.contains("coefficients")) {
        const Json& co = doc["coefficients"];
        if (r.object(co, "coefficients", {"a", "q"})) {
            if (co.contains("a")) c.a = read_time_profile(r, co["a"], "coefficients.a");
            if (co.contains("q")) c.q = read_time_profile(r, co["q"], "coefficients.q");
        }
    }
    const bool singular_allowed = weak;
    for (const auto* prof : {&c.a, &c.q}) {
        const std::string name = prof == &c.a ? "coefficients.a" : "coefficients.q";
        if (prof->singular() && !singular_allowed) {
            r.fail(name, "distributional terms need a very weak command");
            continue;
        }
        try {
            prof->distribution().validate(s.horizon);
        } catch (const Error& e) {
            r.fail(name, e.what());
        }
    }
    if (c.command != Command::spectrum && c.command != Command::defect && s.horizon >= 0.0) {
        const PositivityCertificate cert = certify_positive(c.a.distribution(), s.horizon);
        if (!cert.valid) r.fail("coefficients.a", "no positivity certificate: " + cert.reason);
    }
    if (weak && (c.a.singular() || c.q.singular()) && !s.epsilons.empty() && s.dt > 0.0) {
        double lo = 1.0;
        for (double e : s.epsilons) {
            if (e > 0.0 && e < 1.0) lo = std::min(lo, e);
        }
        const double w = s.mollifier.omega(lo);
        if (s.dt > w / 20.0) {
            r.fail("solver.dt", "does not resolve the mollifier: need dt <= omega(eps_min) / 20 = " + std::to_string(w / 20.0));
        }
    }

    // data
    if (doc.contains("data")) {
        const Json& d = doc["data"];
        if (r.object(d, "data", {"u0", "u1", "source"})) {
            if (d.contains("u0")) c.data.u0 = read_space_profile(r, d["u0"], "data.u0", c.grid.dim);
            if (d.contains("u1")) c.data.u1 = read_space_profile(r, d["u1"], "data.u1", c.grid.dim);
            if (d.contains("source") && r.object(d["source"], "data.source", {"time", "space"})) {
                const Json& src = d["source"];
                if (src.contains("time")) c.data.source_time = read_time_profile(r, src["time"], "data.source.time");
                if (src.contains("space")) {
                    c.data.source_space = read_space_profile(r, src["space"], "data.source.space", c.grid.dim);
                }
                if (c.data.source_time.terms.empty() != c.data.source_space.empty()) {
                    r.fail("data.source", "needs both a time and a space profile");
                }
                if (c.data.source_time.singular() && !weak) {
                    r.fail("data.source.time", "distributional terms need a very weak command");
                }
                if (c.command == Command::uniqueness && !c.data.source_time.terms.empty()) {
                    r.fail("data.source", "the uniqueness experiment adds its own source perturbation");
                }
            }
        }
    }
    const std::size_t modes = s.mode_cap > 0 ? s.mode_cap : sites;
    for (const auto* prof : {&c.data.u0, &c.data.u1, &c.data.source_space}) {
        for (const auto& t : prof->terms) {
            if (t.kind != SpaceTerm::Kind::eigenmode) continue;
            if (continuum) {
                r.fail("data", "eigenmode terms have no continuum counterpart");
            } else if (sites != 0 && t.index >= modes) {
                r.fail("data", "eigenmode " + std::to_string(t.index) + " is beyond the " + std::to_string(modes) +
                                   " retained modes");
            }
        }
    }

    // defect test function
    if (doc.contains("phi")) {
        const Json& p = doc["phi"];
        if (r.object(p, "phi", {"kind", "degree", "width"})) {
            const std::string kind = r.text(p, "phi", "kind", "gaussian");
            if (kind == "gaussian") c.phi.kind = DefectBlock::Kind::gaussian;
            else if (kind == "monomial") c.phi.kind = DefectBlock::Kind::monomial;
            else r.fail("phi.kind", "must be 'gaussian' or 'monomial'");
            c.phi.degree = static_cast<int>(r.integer(p, "phi", "degree", 4));
            c.phi.width = r.number(p, "phi", "width", 1.0);
            if (c.phi.degree < 0 || c.phi.degree > 8) r.fail("phi.degree", "must lie in [0, 8]");
            if (!(c.phi.width > 0.0)) r.fail("phi.width", "must be positive");
        }
    }

    // output
    if (doc.contains("output")) {
        const Json& o = doc["output"];
        if (r.object(o, "output", {"directory", "formats"})) {
            const std::string dir = r.text(o, "output", "directory", c.output.directory.string());
            if (dir.empty()) r.fail("output.directory", "must not be empty");
            c.output.directory = dir;
            if (o.contains("formats")) {
                if (!o["formats"].is_array()) {
                    r.fail("output.formats", "expected an array");
                } else {
                    c.output.csv = c.output.json = false;
                    for (const auto& f : o["formats"]) {
                        if (f == "csv") c.output.csv = true;
                        else if (f == "json") c.output.json = true;
                        else r.fail("output.formats", "unknown format " + f.dump());
                    }
                }
            }
        }
    }

    const long long threads = r.integer(doc, "", "threads", 1);
    if (threads < 1) r.fail("threads", "must be at least 1");
    c.threads = static_cast<int>(std::max(1LL, threads));

    if (!r.errors.empty()) throw ValidationError(r.errors);
    c.echo = to_json(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    Json doc;
    try {
        doc = Json::parse(buf.str(), nullptr, true, true);
    } catch (const Json::parse_error& e) {
        throw ParseError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

Json to_json(const ExperimentConfig& c) {
    Json j;
    j["command"] = to_string(c.command);
    j["grid"] = {{"dim", c.grid.dim}, {"hbar", c.grid.hbar}, {"radius", c.grid.radius},
                 {"hbars", c.grid.hbars}, {"half_width", c.grid.half_width}};
    Json pot{{"kind", c.potential.name()}, {"alpha", c.potential.alpha}, {"delta", c.potential.delta}};
    if (c.potential.kind == PotentialKind::table) pot["table"] = c.potential.table;
    j["potential"] = pot;
    j["coefficients"] = {{"a", time_profile_json(c.a)}, {"q", time_profile_json(c.q)}};
    j["data"] = {{"u0", space_profile_json(c.data.u0, c.grid.dim)},
                 {"u1", space_profile_json(c.data.u1, c.grid.dim)},
                 {"source",
                  {{"time", time_profile_json(c.data.source_time)},
                   {"space", space_profile_json(c.data.source_space, c.grid.dim)}}}};
    j["phi"] = {{"kind", c.phi.kind == DefectBlock::Kind::gaussian ? "gaussian" : "monomial"},
                {"degree", c.phi.degree},
                {"width", c.phi.width}};
    const SolverBlock& s = c.solver;
    j["solver"] = {
        {"T", s.horizon},
        {"dt", s.dt},
        {"s", s.s},
        {"mode_cap", s.mode_cap},
        {"method", to_string(s.method)},
        {"seed", s.seed},
        {"epsilons", s.epsilons},
        {"mollifier", {{"scale", s.mollifier.scale == Mollifier::Scale::log ? "log" : "power"}, {"power", s.mollifier.power}}},
        {"energy_tolerance", s.energy_tolerance},
        {"fault_injection", s.fault_factor},
        {"consistency_tolerance", s.consistency_tolerance},
        {"perturbation",
         {{"order", s.perturbation.order},
          {"amplitude", s.perturbation.amplitude},
          {"scale_with_epsilon", s.perturbation.scale_with_epsilon},
          {"allow_non_negligible", s.perturbation.allow_non_negligible}}},
        {"reference",
         {{"kind", to_string(s.reference.kind)},
          {"mode_cap", s.reference.mode_cap},
          {"hbar_ref", s.reference.hbar_ref},
          {"tail_tolerance", s.reference.tail_tolerance}}}};
    Json formats = Json::array();
    if (c.output.csv) formats.push_back("csv");
    if (c.output.json) formats.push_back("json");
    j["output"] = {{"directory", c.output.directory.string()}, {"formats", formats}};
    j["threads"] = c.threads;
    return j;
}

}  // namespace semiwave
