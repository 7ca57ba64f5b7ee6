#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "semiwave/errors.hpp"
#include "semiwave/hamiltonian.hpp"
#include "semiwave/propagator.hpp"
#include "semiwave/semiclassical.hpp"
#include "semiwave/veryweak.hpp"

namespace semiwave {

using Json = nlohmann::ordered_json;

/// Malformed file or JSON syntax.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Every validation problem found in a config, each prefixed by its field path.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> messages);
    const std::vector<std::string>& messages() const { return messages_; }

private:
    std::vector<std::string> messages_;
};

enum class Command {
    spectrum,
    solve,
    energy_check,
    veryweak,
    uniqueness,
    consistency,
    defect,
    semiclassical,
    veryweak_semiclassical
};

std::string to_string(Command c);
std::optional<Command> parse_command(const std::string& name);

/// One term of a coefficient or source time profile.
struct TimeTerm {
    enum class Kind { constant, sin, cos, polynomial, exp, dirac, dirac_derivative, heaviside };
    Kind kind = Kind::constant;
    double value = 0.0;       // constant value, amplitude, dirac strength or jump
    double frequency = 1.0;   // sin, cos; rate for exp
    double phase = 0.0;
    double t0 = 0.0;
    int order = 0;
    std::vector<double> coefficients;  // polynomial, lowest degree first

    bool singular() const { return kind == Kind::dirac || kind == Kind::dirac_derivative || kind == Kind::heaviside; }
};

struct TimeProfile {
    std::vector<TimeTerm> terms;

    bool singular() const;
    /// Sum of the regular terms and its derivative; requires !singular().
    TimeFunction function() const;
    TimeFunction derivative() const;
    DistributionSpec distribution() const;
};

/// One summand of a spatial data field.
struct SpaceTerm {
    enum class Kind { eigenmode, gaussian, hermite };
    Kind kind = Kind::gaussian;
    double weight = 1.0;
    std::size_t index = 0;  // eigenmode or Hermite order
    Point center{};
    double width = 1.0;
};

struct SpaceProfile {
    std::vector<SpaceTerm> terms;

    bool empty() const { return terms.empty(); }
    bool uses_eigenmodes() const;
    /// Continuum evaluation in 1D; eigenmode terms are not allowed.
    SpatialFunction function() const;
    LatticeFunction restrict(const SpectralDecomposition& decomp) const;
};

struct GridBlock {
    int dim = 1;
    double hbar = 1.0;
    int radius = 1;
    std::vector<double> hbars;
    double half_width = 8.0;
};

struct DataBlock {
    SpaceProfile u0;
    SpaceProfile u1;
    TimeProfile source_time;
    SpaceProfile source_space;
};

struct DefectBlock {
    enum class Kind { monomial, gaussian };
    Kind kind = Kind::gaussian;
    int degree = 4;
    double width = 1.0;

    SmoothFunction function(int dim) const;
};

struct SolverBlock {
    double horizon = 1.0;
    double dt = 1e-3;
    double s = 0.0;
    std::size_t mode_cap = 0;  // 0 = full decomposition
    DecompositionMethod method = DecompositionMethod::automatic;
    std::uint64_t seed = 20240611;
    std::vector<double> epsilons = default_epsilon_grid();
    Mollifier mollifier;
    double energy_tolerance = 1e-7;
    double fault_factor = 0.0;  // > 0 injects an energy fault
    double consistency_tolerance = 1e-3;
    UniquenessConfig perturbation;
    ContinuumReference reference;
};

struct OutputBlock {
    std::filesystem::path directory = "semiwave-out";
    bool csv = true;
    bool json = true;
};

struct ExperimentConfig {
    Command command = Command::spectrum;
    GridBlock grid;
    PotentialSpec potential;
    TimeProfile a;
    TimeProfile q;
    DataBlock data;
    DefectBlock phi;
    SolverBlock solver;
    OutputBlock output;
    int threads = 1;
    Json echo;  // resolved config as JSON

    DecompositionOptions decomposition_options() const;
};

/// Parses and validates; throws ValidationError with all problems found.
ExperimentConfig parse_config(const Json& doc);
/// Reads a JSON file; ParseError on I/O or syntax problems.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Resolved config as JSON, including defaults.
Json to_json(const ExperimentConfig& config);

}  // namespace semiwave
