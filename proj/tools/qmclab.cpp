#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qmclab/qmclab.hpp"

namespace {

enum exit_code : int { ok = 0, total_failure = 1, config_failure = 2 };

struct Arguments {
    std::string config;
    std::string out;
    std::optional<std::size_t> threads;
    std::optional<std::uint64_t> seed;
};

int report_config_error(const qmclab::config_error& e) {
    for (const auto& issue : e.issues()) std::cerr << "config error: " << issue << '\n';
    return config_failure;
}

int run(const std::string& subcommand, const Arguments& args) {
    qmclab::ExperimentConfig cfg;
    try {
        cfg = qmclab::validate_config(args.config);
    } catch (const qmclab::config_error& e) {
        return report_config_error(e);
    }

    if (subcommand == "validate") {
        if (args.seed) cfg.master_seed = *args.seed;
        std::cout << qmclab::resolved_json(cfg).dump(2) << '\n';
        return ok;
    }

    const auto expected = qmclab::experiment_from_string(subcommand);
    if (!expected || *expected != cfg.experiment) {
        std::cerr << "config error: experiment: config declares \"" << qmclab::to_string(cfg.experiment)
                  << "\" but subcommand is \"" << subcommand << "\"\n";
        return config_failure;
    }

    qmclab::RunOptions options;
    options.threads = args.threads;
    options.seed_override = args.seed;
    if (!args.out.empty()) options.output_dir = args.out;

    try {
        const auto manifest = qmclab::run_experiment(std::move(cfg), options);
        std::cerr << manifest.experiment << ": " << manifest.total_cells - manifest.failed_cells << "/"
                  << manifest.total_cells << " cells ok\n";
        return manifest.total_failure() ? total_failure : ok;
    } catch (const qmclab::config_error& e) {
        return report_config_error(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return total_failure;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transverse-field Ising QMC experiments"};
    app.set_version_flag("--version", std::string(QMCLAB_VERSION));
    app.require_subcommand(1);

    Arguments args;
    const std::map<std::string, std::string> commands = {
        {"exact-check", "ED versus free-fermion ground energies"},
        {"variational", "variational energy of the trial state"},
        {"overlaps", "exact versus shot-estimated trial amplitudes"},
        {"local-energy", "exact versus shot-estimated local energies"},
        {"gfmc-sweep", "GFMC energy error versus measurement budget"},
        {"walker-study", "spin-flip walker overlaps and local energies"},
        {"validate", "resolve a config and print it"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", args.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        auto* out = sub->add_option("--out", args.out, "output directory");
        if (name != "validate") out->required();
        sub->add_option("--threads", args.threads, "worker threads (default: $QMCLAB_THREADS or all cores)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", args.seed, "override master_seed");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_failure;
    }

    std::string name;
    for (auto* sub : app.get_subcommands()) name = sub->get_name();
    std::string kind = name;
    std::replace(kind.begin(), kind.end(), '-', '_');
    return run(name == "validate" ? name : kind, args);
}
