#pragma once

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmclab/config.hpp"
#include "qmclab/csv.hpp"
#include "qmclab/gfmc.hpp"
#include "qmclab/oracle.hpp"
#include "qmclab/parallel.hpp"
#include "qmclab/rng.hpp"
#include "qmclab/sampling.hpp"
#include "qmclab/spectrum.hpp"
#include "qmclab/trial.hpp"
#include "qmclab/walkers.hpp"

#ifndef QMCLAB_VERSION
#define QMCLAB_VERSION "0.1.0"
#endif

namespace qmclab {

struct RunOptions {
    std::optional<std::size_t> threads;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::filesystem::path> output_dir;
};

struct RunManifest {
    std::string experiment;
    std::string config_hash;
    std::string code_version = QMCLAB_VERSION;
    std::string started_at;
    std::string finished_at;
    std::uint64_t master_seed = 0;
    std::size_t threads = 1;
    nlohmann::json seeds = nlohmann::json::array();
    nlohmann::json trials = nlohmann::json::array();
    nlohmann::json failures = nlohmann::json::array();
    std::vector<std::string> artifacts;
    std::size_t total_cells = 0;
    std::size_t failed_cells = 0;

    bool total_failure() const noexcept { return total_cells > 0 && failed_cells == total_cells; }

    nlohmann::json to_json() const {
        return {{"experiment", experiment},
                {"config_hash", config_hash},
                {"code_version", code_version},
                {"started_at", started_at},
                {"finished_at", finished_at},
                {"master_seed", master_seed},
                {"threads", threads},
                {"total_cells", total_cells},
                {"failed_cells", failed_cells},
                {"seeds", seeds},
                {"trials", trials},
                {"failures", failures},
                {"artifacts", artifacts}};
    }
};

namespace detail {

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

class ArtifactFile {
public:
    ArtifactFile(const std::filesystem::path& dir, std::string name, RunManifest& manifest)
        : stream_(dir / name, std::ios::trunc) {
        if (!stream_) throw std::runtime_error("cannot write " + (dir / name).string());
        manifest.artifacts.push_back(std::move(name));
    }
    std::ofstream& stream() { return stream_; }

private:
    std::ofstream stream_;
};

/// Seed stream for the i-th gamma of the grid; cells inside it use cell_index().
inline std::uint64_t gamma_stream(std::uint64_t master, std::size_t gamma_index) {
    return derive_seed(master, gamma_index);
}

struct ShotCell {
    std::size_t gamma_index = 0;
    std::size_t length_index = 0;
    std::size_t budget_index = 0;
    std::size_t replicate = 0;
    std::uint64_t seed = 0;
};

/// Enumerates (gamma, L, M, replicate) cells in output order with their derived seeds.
inline std::vector<ShotCell> shot_cells(const ExperimentConfig& cfg) {
    std::vector<ShotCell> cells;
    const std::size_t n_m = cfg.budgets.size();
    const std::size_t n_r = cfg.replicates;
    for (std::size_t gi = 0; gi < cfg.model.gammas.size(); ++gi) {
        const auto stream = gamma_stream(cfg.master_seed, gi);
        for (std::size_t li = 0; li < cfg.model.lengths.size(); ++li) {
            for (std::size_t mi = 0; mi < n_m; ++mi) {
                for (std::size_t r = 0; r < n_r; ++r) {
                    cells.push_back({gi, li, mi, r, derive_seed(stream, cell_index({li, mi, r}, n_m, n_r))});
                }
            }
        }
    }
    return cells;
}

struct TrialGrid {
    std::vector<std::shared_ptr<const TrialTable>> tables;  // [gamma][L] flattened
    std::vector<std::string> failures;
    std::size_t n_lengths = 0;

    std::size_t index(std::size_t gi, std::size_t li) const { return gi * n_lengths + li; }
};

inline TrialGrid build_trials(const ExperimentConfig& cfg, std::size_t threads, RunManifest& manifest) {
    TrialGrid grid;
    grid.n_lengths = cfg.model.lengths.size();
    const std::size_t n = cfg.model.gammas.size() * grid.n_lengths;
    grid.tables.resize(n);
    grid.failures.resize(n);
    parallel_for(n, threads, [&](std::size_t i) {
        const double gamma = cfg.model.gammas[i / grid.n_lengths];
        const TfimModel model(cfg.model.lengths[i % grid.n_lengths], cfg.model.coupling, gamma);
        try {
            grid.tables[i] = std::make_shared<const TrialTable>(build_trial_table(cfg.trial_for(gamma), model, cfg.ed));
        } catch (const std::exception& e) {
            grid.failures[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < n; ++i) {
        nlohmann::json entry = {{"L", cfg.model.lengths[i % grid.n_lengths]},
                                {"gamma", cfg.model.gammas[i / grid.n_lengths]}};
        if (grid.tables[i]) {
            entry["provenance"] = provenance_json(grid.tables[i]->provenance());
            entry["metadata"] = grid.tables[i]->metadata();
            const auto& meta = grid.tables[i]->metadata();
            // Flags the optimized symmetric trial standing in for an unspecified reference ansatz.
            entry["psi_mc_substitution"] = meta.contains("lambda_source") && meta["lambda_source"] == "optimized";
        } else {
            entry["error"] = grid.failures[i];
        }
        manifest.trials.push_back(entry);
    }
    return grid;
}

inline void record_seeds(const std::vector<ShotCell>& cells, RunManifest& manifest) {
    for (std::size_t c = 0; c < cells.size(); ++c) manifest.seeds.push_back({c, cells[c].seed});
}

inline void run_exact_check(const ExperimentConfig& cfg, std::size_t threads, const std::filesystem::path& dir,
                            RunManifest& manifest) {
    struct Row {
        double ed = 0.0;
        double fermion = 0.0;
        std::string status = "ok";
    };
    const std::size_t n_l = cfg.model.lengths.size();
    const std::size_t n = cfg.model.gammas.size() * n_l;
    std::vector<Row> rows(n);
    parallel_for(n, threads, [&](std::size_t i) {
        const TfimModel model(cfg.model.lengths[i % n_l], cfg.model.coupling, cfg.model.gammas[i / n_l]);
        rows[i].fermion = exact_ground_fermion(model).ground_energy;
        try {
            rows[i].ed = exact_ground_ed(model, cfg.ed).ground_energy;
        } catch (const std::exception& e) {
            rows[i].ed = std::numeric_limits<double>::quiet_NaN();
            rows[i].status = std::string("failed: ") + e.what();
        }
    });
    ArtifactFile file(dir, "exact_check.csv", manifest);
    CsvWriter csv(file.stream(), {"L", "J", "gamma", "ed_energy", "fermion_energy", "abs_diff", "status"});
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = rows[i];
        const double diff = std::abs(r.ed - r.fermion);
        csv.row(cfg.model.lengths[i % n_l], cfg.model.coupling, cfg.model.gammas[i / n_l], r.ed, r.fermion, diff, r.status);
        if (r.status != "ok") {
            ++manifest.failed_cells;
            manifest.failures.push_back({{"cell", i}, {"error", r.status}});
        }
    }
    manifest.total_cells = n;
}

inline void run_variational(const ExperimentConfig& cfg, std::size_t threads, const std::filesystem::path& dir,
                            RunManifest& manifest) {
    const auto grid = build_trials(cfg, threads, manifest);
    const std::size_t n_l = grid.n_lengths;
    const std::size_t n = grid.tables.size();
    ArtifactFile file(dir, "variational.csv", manifest);
    CsvWriter csv(file.stream(),
                  {"L", "J", "gamma", "lambda", "variational_energy", "exact_energy", "ratio", "status"});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < n; ++i) {
        const TfimModel model(cfg.model.lengths[i % n_l], cfg.model.coupling, cfg.model.gammas[i / n_l]);
        const double exact = exact_ground_fermion(model).ground_energy;
        if (!grid.tables[i]) {
            csv.row(model.length, model.coupling, model.field, nan, nan, exact, nan, "failed: " + grid.failures[i]);
            ++manifest.failed_cells;
            manifest.failures.push_back({{"cell", i}, {"error", grid.failures[i]}});
            continue;
        }
        const auto& meta = grid.tables[i]->metadata();
        const double lambda = meta.contains("lambda") ? meta["lambda"].get<double>() : nan;
        const double e = variational_energy(*grid.tables[i], model);
        csv.row(model.length, model.coupling, model.field, lambda, e, exact, e / exact, "ok");
    }
    manifest.total_cells = n;
}

/// Overlap and local-energy panels share one ShotCounts per (gamma, L, M, replicate) cell.
inline void run_shot_panels(const ExperimentConfig& cfg, std::size_t threads, const std::filesystem::path& dir,
                            RunManifest& manifest, bool with_local_energy) {
    const auto grid = build_trials(cfg, threads, manifest);
    const auto cells = shot_cells(cfg);
    record_seeds(cells, manifest);

    std::vector<std::optional<AliasTable>> samplers(grid.tables.size());
    for (std::size_t i = 0; i < grid.tables.size(); ++i) {
        if (grid.tables[i]) samplers[i].emplace(born_probabilities(*grid.tables[i]));
    }

    struct Entry {
        std::size_t rank;
        Bits state;
        double exact;
        double estimate;
        double eloc_exact;
        double eloc_est;
        std::string status;
    };
    std::vector<std::vector<Entry>> results(cells.size());
    std::vector<std::string> failures(cells.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();

    parallel_for(cells.size(), threads, [&](std::size_t c) {
        const auto& cell = cells[c];
        const std::size_t t = grid.index(cell.gamma_index, cell.length_index);
        if (!grid.tables[t]) {
            failures[c] = grid.failures[t];
            return;
        }
        try {
            const TfimModel model(cfg.model.lengths[cell.length_index], cfg.model.coupling,
                                  cfg.model.gammas[cell.gamma_index]);
            auto shots = sample_counts(*samplers[t], model.length,
                                       MeasurementBudget(cfg.budgets[cell.budget_index],
                                                         substream_seed(cell.seed, Substream::shots)));
            const auto oracle = AmplitudeOracle::sampled(grid.tables[t], std::move(shots), cfg.sign_policy);
            const auto exact = AmplitudeOracle::exact(grid.tables[t]);
            const auto ranked = overlap_distribution(oracle, cfg.rank_limit.value_or(grid.tables[t]->dimension()));
            auto& out = results[c];
            out.reserve(ranked.size());
            for (std::size_t r = 0; r < ranked.size(); ++r) {
                Entry e{r, ranked[r].state.bits, ranked[r].exact, ranked[r].estimated, nan, nan, "ok"};
                if (with_local_energy) {
                    try {
                        e.eloc_exact = local_energy(model, exact, ranked[r].state) / model.length;
                    } catch (const undefined_local_energy&) {
                        e.status = "undefined_local_energy";
                    }
                    try {
                        e.eloc_est = local_energy(model, oracle, ranked[r].state) / model.length;
                    } catch (const undefined_local_energy&) {
                        e.status = "undefined_local_energy";
                    }
                }
                out.push_back(std::move(e));
            }
        } catch (const std::exception& e) {
            failures[c] = e.what();
        }
    });

    ArtifactFile file(dir, with_local_energy ? "local_energy.csv" : "overlaps.csv", manifest);
    auto write = [&](auto& csv) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto& cell = cells[c];
            if (!failures[c].empty()) {
                ++manifest.failed_cells;
                manifest.failures.push_back({{"cell", c}, {"error", failures[c]}});
                continue;
            }
            const double gj = cfg.model.gamma_over_j(cell.gamma_index);
            for (const auto& e : results[c]) {
                if (with_local_energy) {
                    csv.row(gj, cfg.model.lengths[cell.length_index], cfg.budgets[cell.budget_index], cell.replicate,
                            e.rank, e.state, e.exact, e.estimate, e.eloc_exact, e.eloc_est, e.status);
                } else {
                    csv.row(gj, cfg.model.lengths[cell.length_index], cfg.budgets[cell.budget_index], cell.replicate,
                            e.rank, e.state, e.exact, e.estimate);
                }
            }
        }
    };
    if (with_local_energy) {
        CsvWriter csv(file.stream(), {"gamma_over_j", "L", "M", "replicate", "rank", "state", "overlap_exact",
                                      "overlap_est", "eloc_exact_per_site", "eloc_est_per_site", "status"});
        write(csv);
    } else {
        CsvWriter csv(file.stream(),
                      {"gamma_over_j", "L", "M", "replicate", "rank", "state", "overlap_exact", "overlap_est"});
        write(csv);
    }
    manifest.total_cells = cells.size();
}

inline void run_gfmc_sweep(const ExperimentConfig& cfg, std::size_t threads, const std::filesystem::path& dir,
                           RunManifest& manifest) {
    ArtifactFile file(dir, "gfmc_sweep.csv", manifest);
    CsvWriter csv(file.stream(), {"gamma_over_j", "L", "M", "replicate", "energy_mean", "energy_stderr",
                                  "exact_energy", "error_per_site"});
    for (std::size_t gi = 0; gi < cfg.model.gammas.size(); ++gi) {
        SweepSpec spec;
        spec.lengths = cfg.model.lengths;
        spec.coupling = cfg.model.coupling;
        spec.gamma_over_j = cfg.model.gamma_over_j(gi);
        spec.trial = cfg.trial_for(cfg.model.gammas[gi]);
        spec.budgets = cfg.budgets;
        spec.runs = cfg.replicates;
        spec.gfmc = cfg.gfmc;
        spec.sign_policy = cfg.sign_policy;
        spec.master_seed = gamma_stream(cfg.master_seed, gi);
        spec.threads = threads;
        spec.ed = cfg.ed;
        const auto table = sweep_measurements(spec);
        for (const auto& row : table.rows) {
            csv.row(row.gamma_over_j, row.length, row.budget, row.replicate, row.energy_mean, row.energy_stderr,
                    row.exact_energy, row.error_per_site);
            if (row.replicate >= 0 && row.status != "ok") {
                manifest.failures.push_back({{"gamma_over_j", row.gamma_over_j},
                                             {"L", row.length},
                                             {"M", row.budget},
                                             {"replicate", row.replicate},
                                             {"error", row.status}});
            }
        }
        for (const auto& s : table.seeds) manifest.seeds.push_back({{"gamma_index", gi}, {"cell", s.cell}, {"seed", s.seed}});
        for (const auto& t : table.trials) manifest.trials.push_back(t);
        manifest.total_cells += table.total_cells;
        manifest.failed_cells += table.failed_cells;
    }
}

inline void write_study_rows(CsvWriter& csv, const std::vector<WalkerStudyRow>& rows) {
    for (const auto& r : rows) {
        csv.row(r.walker_id, r.flip_mask, r.n_flips, r.budget, r.replicate, r.overlap_exact, r.overlap_est,
                r.eloc_exact_per_site, r.eloc_est_per_site, r.status);
    }
}

inline void run_walker_study_experiment(const ExperimentConfig& cfg, std::size_t threads,
                                        const std::filesystem::path& dir, RunManifest& manifest) {
    const TfimModel model(cfg.model.lengths.front(), cfg.model.coupling, cfg.model.gammas.front());
    WalkerStudyConfig study;
    const auto& trial = cfg.trial_for(cfg.model.gammas.front());
    study.base_trial = std::visit(
        [](const auto& s) -> BaseTrialSpec {
            if constexpr (std::is_same_v<std::decay_t<decltype(s)>, ImaginaryTimeFilteredSpec>) {
                throw config_error({"trial: walker_study needs an unfiltered base trial"});
            } else {
                return s;
            }
        },
        trial);
    study.tau = cfg.study.tau;
    study.flip_rule = cfg.study.flip_rule;
    study.budgets = cfg.budgets;
    study.replicates = cfg.replicates;
    study.sign_policy = cfg.sign_policy;
    study.baseline_rank_limit = cfg.study.baseline_rank_limit;
    study.master_seed = gamma_stream(cfg.master_seed, 0);
    study.threads = threads;
    study.ed = cfg.ed;

    const auto table = run_walker_study(model, study);
    {
        ArtifactFile file(dir, "walker_study.csv", manifest);
        CsvWriter csv(file.stream(), {"walker_id", "flip_mask", "n_flips", "M", "replicate", "overlap_exact",
                                      "overlap_est", "eloc_exact_per_site", "eloc_est_per_site", "status"});
        write_study_rows(csv, table.walkers);
    }
    {
        ArtifactFile file(dir, "walker_study_baseline.csv", manifest);
        CsvWriter csv(file.stream(), {"walker_id", "flip_mask", "n_flips", "M", "replicate", "overlap_exact",
                                      "overlap_est", "eloc_exact_per_site", "eloc_est_per_site", "status"});
        write_study_rows(csv, table.baseline);
    }
    for (const auto& s : table.seeds) manifest.seeds.push_back({{"cell", s.cell}, {"seed", s.seed}});
    manifest.trials.push_back(table.metadata);
    for (const auto& f : table.metadata["failures"]) manifest.failures.push_back(f);
    manifest.total_cells = study.budgets.size() * study.replicates;
    manifest.failed_cells = table.failed_cells;
}

}  // namespace detail

/// Runs every cell of the configured experiment and writes its CSVs plus manifest.json
/// into the output directory. CSV bytes depend only on (config, master seed).
inline RunManifest run_experiment(ExperimentConfig cfg, const RunOptions& options = {}) {
    if (options.seed_override) cfg.master_seed = *options.seed_override;
    if (options.output_dir) cfg.output_dir = *options.output_dir;
    const std::size_t threads = resolve_thread_count(options.threads);
    std::filesystem::create_directories(cfg.output_dir);

    RunManifest manifest;
    manifest.experiment = to_string(cfg.experiment);
    manifest.config_hash = config_hash(cfg.source);
    manifest.started_at = detail::utc_timestamp();
    manifest.master_seed = cfg.master_seed;
    manifest.threads = threads;

    switch (cfg.experiment) {
        case ExperimentKind::exact_check: detail::run_exact_check(cfg, threads, cfg.output_dir, manifest); break;
        case ExperimentKind::variational: detail::run_variational(cfg, threads, cfg.output_dir, manifest); break;
        case ExperimentKind::overlaps: detail::run_shot_panels(cfg, threads, cfg.output_dir, manifest, false); break;
        case ExperimentKind::local_energy: detail::run_shot_panels(cfg, threads, cfg.output_dir, manifest, true); break;
        case ExperimentKind::gfmc_sweep: detail::run_gfmc_sweep(cfg, threads, cfg.output_dir, manifest); break;
        case ExperimentKind::walker_study:
            detail::run_walker_study_experiment(cfg, threads, cfg.output_dir, manifest);
            break;
    }

    manifest.finished_at = detail::utc_timestamp();
    manifest.artifacts.push_back("manifest.json");
    std::ofstream out(cfg.output_dir / "manifest.json", std::ios::trunc);
    out << manifest.to_json().dump(2) << '\n';
    return manifest;
}

}  // namespace qmclab
