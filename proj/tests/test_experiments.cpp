#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qmclab/experiments.hpp"

using namespace qmclab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "qmclab_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw std::out_of_range(name);
    }
    double number(std::size_t row, const std::string& name) const { return std::stod(rows[row][column(name)]); }
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

Table read_csv(const fs::path& path) {
    std::ifstream in(path);
    Table t;
    std::string line;
    std::getline(in, line);
    t.header = split(line);
    while (std::getline(in, line)) t.rows.push_back(split(line));
    return t;
}

json model(std::vector<int> lengths, std::vector<double> gammas) {
    return {{"L", lengths}, {"J", 1.0}, {"gamma", gammas}};
}

json base(const std::string& experiment, json m) {
    return {{"schema_version", 1}, {"experiment", experiment}, {"model", std::move(m)}, {"master_seed", 77}};
}

RunManifest run(const json& j, const fs::path& dir, std::size_t threads = 1) {
    RunOptions options;
    options.output_dir = dir;
    options.threads = threads;
    return run_experiment(parse_config(j), options);
}

std::set<std::string> directory_listing(const fs::path& dir) {
    std::set<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) names.insert(entry.path().filename().string());
    return names;
}

void expect_manifest_complete(const fs::path& dir) {
    const auto m = json::parse(slurp(dir / "manifest.json"));
    std::set<std::string> listed;
    for (const auto& a : m["artifacts"]) listed.insert(a.get<std::string>());
    EXPECT_EQ(listed, directory_listing(dir));
    for (const char* key : {"experiment", "config_hash", "code_version", "started_at", "finished_at", "master_seed",
                            "threads", "seeds", "trials", "failures"}) {
        EXPECT_TRUE(m.contains(key)) << key;
    }
}

json small_config(const std::string& kind) {
    if (kind == "exact_check") return base(kind, model({4, 6, 8}, {0.5, 1.0}));
    if (kind == "variational") {
        auto j = base(kind, model({6, 8}, {0.5, 1.0}));
        j["trial_overrides"] = {{{"gamma", 0.5}, {"trial", {{"type", "symmetric_exponential"}, {"lambda", 0.127}}}}};
        return j;
    }
    if (kind == "overlaps" || kind == "local_energy") {
        auto j = base(kind, model({6}, {0.5, 1.0}));
        j["budgets"] = {100, 1000};
        j["replicates"] = 3;
        j["rank_limit"] = 8;
        return j;
    }
    if (kind == "gfmc_sweep") {
        auto j = base(kind, model({4, 6}, {1.0}));
        j["budgets"] = {0, 1000};
        j["replicates"] = 3;
        j["gfmc"] = {{"walkers", 50}, {"total_steps", 200}, {"equilibration_steps", 50}};
        return j;
    }
    auto j = base(kind, model({6}, {1.0}));
    j["budgets"] = {1000, 10000};
    j["replicates"] = 3;
    return j;
}

const std::vector<std::string> kinds = {"exact_check", "variational", "overlaps", "local_energy", "gfmc_sweep",
                                        "walker_study"};

}  // namespace

TEST(Experiments, ExactCheckAgreement) {
    const auto dir = scratch("exact_check");
    const auto m = run(small_config("exact_check"), dir);
    EXPECT_EQ(m.failed_cells, 0u);
    const auto t = read_csv(dir / "exact_check.csv");
    EXPECT_EQ(t.header, (std::vector<std::string>{"L", "J", "gamma", "ed_energy", "fermion_energy", "abs_diff", "status"}));
    ASSERT_EQ(t.rows.size(), 6u);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        EXPECT_LT(t.number(r, "abs_diff"), 1e-9);
        EXPECT_EQ(t.rows[r][t.column("status")], "ok");
    }
}

TEST(Experiments, VariationalRatio) {
    const auto dir = scratch("variational");
    run(small_config("variational"), dir);
    const auto t = read_csv(dir / "variational.csv");
    ASSERT_EQ(t.rows.size(), 4u);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        EXPECT_LE(t.number(r, "ratio"), 1.0 + 1e-12);
        if (t.number(r, "gamma") == 0.5) {
            EXPECT_EQ(t.number(r, "lambda"), 0.127);
            EXPECT_GE(t.number(r, "ratio"), 0.998);
        }
    }
}

TEST(Experiments, OverlapRowsCoverGrid) {
    const auto dir = scratch("overlaps");
    run(small_config("overlaps"), dir);
    const auto t = read_csv(dir / "overlaps.csv");
    EXPECT_EQ(t.rows.size(), 2u * 2u * 3u * 8u);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        EXPECT_GE(t.number(r, "overlap_est"), 0.0);
        EXPECT_GT(t.number(r, "overlap_exact"), 0.0);
    }
}

TEST(Experiments, SweepUnshotTrialIsClose) {
    const auto dir = scratch("gfmc_sweep");
    const auto m = run(small_config("gfmc_sweep"), dir);
    EXPECT_EQ(m.failed_cells, 0u);
    EXPECT_EQ(m.seeds.size(), m.total_cells);
    const auto t = read_csv(dir / "gfmc_sweep.csv");
    EXPECT_FALSE(t.rows.empty());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (t.rows[r][t.column("M")] == "0") {
            EXPECT_LT(std::abs(t.number(r, "error_per_site")), 0.05);
        }
    }
}

TEST(Experiments, WalkerStudyFiles) {
    const auto dir = scratch("walker_study");
    run(small_config("walker_study"), dir);
    EXPECT_TRUE(fs::exists(dir / "walker_study.csv"));
    EXPECT_TRUE(fs::exists(dir / "walker_study_baseline.csv"));
}

class EveryExperiment : public ::testing::TestWithParam<std::string> {};

TEST_P(EveryExperiment, ManifestListsEveryFile) {
    const auto dir = scratch("manifest_" + GetParam());
    const auto m = run(small_config(GetParam()), dir);
    EXPECT_FALSE(m.total_failure());
    expect_manifest_complete(dir);
}

TEST_P(EveryExperiment, CsvsAreByteIdenticalAcrossRerunsAndThreads) {
    const auto a = scratch("det_a_" + GetParam());
    const auto b = scratch("det_b_" + GetParam());
    const auto c = scratch("det_c_" + GetParam());
    run(small_config(GetParam()), a, 1);
    run(small_config(GetParam()), b, 1);
    run(small_config(GetParam()), c, 3);
    std::size_t compared = 0;
    for (const auto& name : directory_listing(a)) {
        if (fs::path(name).extension() != ".csv") continue;
        EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
        EXPECT_EQ(slurp(a / name), slurp(c / name)) << name;
        ++compared;
    }
    EXPECT_GT(compared, 0u);
}

INSTANTIATE_TEST_SUITE_P(Kinds, EveryExperiment, ::testing::ValuesIn(kinds),
                         [](const auto& info) { return info.param; });

TEST(Experiments, SeedOverrideChangesStochasticOutput) {
    const auto a = scratch("seed_a");
    const auto b = scratch("seed_b");
    run(small_config("overlaps"), a);
    RunOptions options;
    options.output_dir = b;
    options.threads = 1;
    options.seed_override = 78;
    const auto m = run_experiment(parse_config(small_config("overlaps")), options);
    EXPECT_EQ(m.master_seed, 78u);
    EXPECT_NE(slurp(a / "overlaps.csv"), slurp(b / "overlaps.csv"));
}

TEST(Experiments, UnsupportedCellsAreRecorded) {
    auto j = base("exact_check", model({6, 14}, {1.0}));
    const auto dir = scratch("large");
    const auto m = run(j, dir);
    EXPECT_EQ(m.total_cells, 2u);
    EXPECT_FALSE(m.total_failure());
}

// CLI

namespace {

int cli(const std::string& args, const std::string& env = "") {
    const std::string command = env + " \"" QMCLAB_CLI_PATH "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const json& j) {
    const auto path = dir / "config.json";
    std::ofstream(path) << j.dump(2);
    return path;
}

}  // namespace

TEST(Cli, SuccessWritesManifest) {
    const auto dir = scratch("cli_ok");
    const auto config = write_config(dir, small_config("exact_check"));
    EXPECT_EQ(cli("exact-check --config " + config.string() + " --out " + (dir / "out").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
    EXPECT_TRUE(fs::exists(dir / "out" / "exact_check.csv"));
}

TEST(Cli, ConfigErrorsExitTwo) {
    const auto dir = scratch("cli_bad");
    auto j = small_config("overlaps");
    j["replicates"] = 0;
    const auto config = write_config(dir, j);
    EXPECT_EQ(cli("overlaps --config " + config.string() + " --out " + (dir / "out").string()), 2);
    EXPECT_EQ(cli("validate --config " + config.string()), 2);
    EXPECT_EQ(cli("overlaps --config /nonexistent.json --out " + (dir / "out").string()), 2);
    EXPECT_EQ(cli("no-such-command"), 2);
}

TEST(Cli, SubcommandMustMatchExperiment) {
    const auto dir = scratch("cli_mismatch");
    const auto config = write_config(dir, small_config("exact_check"));
    EXPECT_EQ(cli("variational --config " + config.string() + " --out " + (dir / "out").string()), 2);
}

TEST(Cli, ValidateSucceeds) {
    const auto dir = scratch("cli_validate");
    const auto config = write_config(dir, small_config("gfmc_sweep"));
    EXPECT_EQ(cli("validate --config " + config.string()), 0);
}

TEST(Cli, TotalFailureExitsOne) {
    const auto dir = scratch("cli_fail");
    const auto config = write_config(dir, base("exact_check", model({14}, {1.0})));
    EXPECT_EQ(cli("exact-check --config " + config.string() + " --out " + (dir / "out").string()), 1);
}

TEST(Cli, ThreadsFromEnvironment) {
    const auto dir = scratch("cli_env");
    const auto config = write_config(dir, small_config("overlaps"));
    EXPECT_EQ(cli("overlaps --config " + config.string() + " --out " + (dir / "a").string(), "QMCLAB_THREADS=2"), 0);
    EXPECT_EQ(cli("overlaps --config " + config.string() + " --out " + (dir / "b").string() + " --threads 1"), 0);
    const auto manifest = json::parse(slurp(dir / "a" / "manifest.json"));
    EXPECT_EQ(manifest["threads"], 2);
    EXPECT_EQ(slurp(dir / "a" / "overlaps.csv"), slurp(dir / "b" / "overlaps.csv"));
}
