#include <iostream>

#include "CLI11.hpp"
#include "semiwave/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Spectral solver for wave equations with lattice Schrödinger operators"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int threads = 0;
    long long seed = -1;

    for (const char* name : {"spectrum", "solve", "energy-check", "veryweak", "uniqueness", "consistency", "defect",
                             "semiclassical", "veryweak-semiclassical"}) {
        CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
        sub->add_option("--config", config_path, "JSON experiment config")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config and SEMIWAVE_OUT_DIR)");
        sub->add_option("--threads", threads, "worker threads (overrides config and SEMIWAVE_THREADS)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "eigensolver seed")->check(CLI::NonNegativeNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : semiwave::kExitParse;
    }

    semiwave::Overrides cli;
    if (!out_dir.empty()) cli.out_dir = out_dir;
    if (threads > 0) cli.threads = threads;
    if (seed >= 0) cli.seed = static_cast<std::uint64_t>(seed);
    return semiwave::run_cli(app.get_subcommands().front()->get_name(), config_path, cli, std::cout, std::cerr);
}
