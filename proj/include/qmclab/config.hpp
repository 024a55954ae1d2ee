#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qmclab/csv.hpp"
#include "qmclab/errors.hpp"
#include "qmclab/gfmc.hpp"
#include "qmclab/oracle.hpp"
#include "qmclab/spectrum.hpp"
#include "qmclab/trial.hpp"
#include "qmclab/walkers.hpp"

namespace qmclab {

inline constexpr int config_schema_version = 1;

enum class ExperimentKind { exact_check, variational, overlaps, local_energy, gfmc_sweep, walker_study };

inline std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::exact_check: return "exact_check";
        case ExperimentKind::variational: return "variational";
        case ExperimentKind::overlaps: return "overlaps";
        case ExperimentKind::local_energy: return "local_energy";
        case ExperimentKind::gfmc_sweep: return "gfmc_sweep";
        case ExperimentKind::walker_study: return "walker_study";
    }
    return "unknown";
}

inline std::optional<ExperimentKind> experiment_from_string(std::string_view name) {
    for (auto kind : {ExperimentKind::exact_check, ExperimentKind::variational, ExperimentKind::overlaps,
                      ExperimentKind::local_energy, ExperimentKind::gfmc_sweep, ExperimentKind::walker_study}) {
        if (to_string(kind) == name) return kind;
    }
    return std::nullopt;
}

struct ModelGrid {
    std::vector<int> lengths;
    double coupling = 1.0;
    std::vector<double> gammas;  // Gamma in the units of J

    double gamma_over_j(std::size_t i) const { return gammas[i] / coupling; }
};

struct TrialOverride {
    double gamma = 0.0;
    TrialSpec trial;
};

struct StudySettings {
    double tau = 0.05;
    FlipSetRule flip_rule = PrefixFlips{};
    std::optional<std::size_t> baseline_rank_limit;
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::exact_check;
    ModelGrid model;
    TrialSpec trial = SymmetricExponentialSpec{};
    std::vector<TrialOverride> trial_overrides;
    std::vector<std::uint64_t> budgets;
    std::size_t replicates = 16;
    GfmcSettings gfmc;
    StudySettings study;
    std::optional<std::size_t> rank_limit;
    SignPolicy sign_policy = SignPolicy::exact_sign;
    EdOptions ed;
    std::uint64_t master_seed = 1;
    std::filesystem::path output_dir = "out";
    nlohmann::json source = nlohmann::json::object();

    const TrialSpec& trial_for(double gamma) const {
        for (const auto& o : trial_overrides) {
            if (o.gamma == gamma) return o.trial;
        }
        return trial;
    }
};

namespace detail {

/// Walks a JSON document, collecting every problem with its dotted path.
class ConfigReader {
public:
    std::vector<std::string> issues;

    void fail(const std::string& path, const std::string& message) { issues.push_back(path + ": " + message); }

    bool object(const nlohmann::json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
        if (!j.is_object()) {
            fail(path, "must be an object");
            return false;
        }
        const std::set<std::string_view> keys(allowed);
        for (const auto& [key, value] : j.items()) {
            if (!keys.contains(key)) fail(join(path, key), "unknown key");
        }
        return true;
    }

    static std::string join(const std::string& path, std::string_view key) {
        return path.empty() ? std::string(key) : path + "." + std::string(key);
    }

    std::optional<double> number(const nlohmann::json& j, const std::string& path) {
        if (!j.is_number()) {
            fail(path, "must be a number");
            return std::nullopt;
        }
        const double v = j.get<double>();
        if (!std::isfinite(v)) {
            fail(path, "must be finite");
            return std::nullopt;
        }
        return v;
    }

    std::optional<std::int64_t> integer(const nlohmann::json& j, const std::string& path, std::int64_t min) {
        if (!j.is_number_integer()) {
            fail(path, "must be an integer");
            return std::nullopt;
        }
        const auto v = j.get<std::int64_t>();
        if (v < min) {
            fail(path, "must be >= " + std::to_string(min));
            return std::nullopt;
        }
        return v;
    }

    std::optional<std::uint64_t> unsigned_integer(const nlohmann::json& j, const std::string& path) {
        if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
            fail(path, "must be a non-negative integer");
            return std::nullopt;
        }
        return j.get<std::uint64_t>();
    }

    std::optional<std::string> string(const nlohmann::json& j, const std::string& path) {
        if (!j.is_string()) {
            fail(path, "must be a string");
            return std::nullopt;
        }
        return j.get<std::string>();
    }

    template <class T, class F>
    std::vector<T> scalar_or_list(const nlohmann::json& j, const std::string& path, F&& parse) {
        std::vector<T> out;
        if (j.is_array()) {
            if (j.empty()) fail(path, "must not be empty");
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (auto v = parse(j[i], path + "[" + std::to_string(i) + "]")) out.push_back(static_cast<T>(*v));
            }
        } else if (auto v = parse(j, path)) {
            out.push_back(static_cast<T>(*v));
        }
        return out;
    }

    std::optional<BaseTrialSpec> base_trial(const nlohmann::json& j, const std::string& path) {
        auto spec = trial(j, path, false);
        if (!spec) return std::nullopt;
        return std::visit(
            [](const auto& s) -> std::optional<BaseTrialSpec> {
                if constexpr (std::is_same_v<std::decay_t<decltype(s)>, ImaginaryTimeFilteredSpec>) {
                    return std::nullopt;
                } else {
                    return BaseTrialSpec{s};
                }
            },
            *spec);
    }

    std::optional<TrialSpec> trial(const nlohmann::json& j, const std::string& path, bool allow_filter = true) {
        if (!j.is_object() || !j.contains("type")) {
            fail(path, "must be an object with a \"type\" key");
            return std::nullopt;
        }
        const auto type = string(j["type"], join(path, "type"));
        if (!type) return std::nullopt;
        if (*type == "symmetric_exponential") {
            object(j, path, {"type", "lambda"});
            SymmetricExponentialSpec spec;
            if (j.contains("lambda")) {
                const auto lambda = number(j["lambda"], join(path, "lambda"));
                if (lambda && *lambda < 0.0) fail(join(path, "lambda"), "must be >= 0");
                spec.lambda = lambda;
            }
            return spec;
        }
        if (*type == "exact_ground") {
            object(j, path, {"type"});
            return ExactGroundSpec{};
        }
        if (*type == "table_file") {
            object(j, path, {"type", "path"});
            if (!j.contains("path")) {
                fail(join(path, "path"), "required");
                return std::nullopt;
            }
            const auto file = string(j["path"], join(path, "path"));
            if (!file) return std::nullopt;
            return TableFileSpec{*file};
        }
        if (*type == "imaginary_time_filtered") {
            if (!allow_filter) {
                fail(path, "imaginary_time_filtered cannot be nested or used as a base trial");
                return std::nullopt;
            }
            object(j, path, {"type", "tau", "base"});
            if (!j.contains("tau") || !j.contains("base")) {
                fail(path, "requires \"tau\" and \"base\"");
                return std::nullopt;
            }
            const auto tau = number(j["tau"], join(path, "tau"));
            if (tau && *tau < 0.0) fail(join(path, "tau"), "must be >= 0");
            auto base = base_trial(j["base"], join(path, "base"));
            if (!tau || !base) return std::nullopt;
            return ImaginaryTimeFilteredSpec{*base, *tau};
        }
        fail(join(path, "type"), "unknown trial type \"" + *type + "\"");
        return std::nullopt;
    }
};

}  // namespace detail

/// Default M grid: exact oracle (M = 0) and decades 10^3 .. 10^6.
inline std::vector<std::uint64_t> default_budgets(ExperimentKind kind) {
    if (kind == ExperimentKind::gfmc_sweep) return {0, 1'000, 10'000, 100'000, 1'000'000};
    return {1'000, 10'000, 100'000, 1'000'000};
}

/// Resolves a parsed JSON config, applying defaults. Throws config_error listing every problem.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
    detail::ConfigReader reader;
    ExperimentConfig cfg;
    cfg.source = j;
    if (!reader.object(j, "", {"schema_version", "experiment", "model", "trial", "trial_overrides", "budgets",
                               "replicates", "gfmc", "study", "rank_limit", "sign_policy", "allow_large_ed",
                               "master_seed", "output_dir"})) {
        throw config_error(reader.issues);
    }

    if (!j.contains("schema_version")) {
        reader.fail("schema_version", "required");
    } else if (auto v = reader.integer(j["schema_version"], "schema_version", 0); v && *v != config_schema_version) {
        reader.fail("schema_version", "unsupported version " + std::to_string(*v));
    }

    bool kind_known = false;
    if (!j.contains("experiment")) {
        reader.fail("experiment", "required");
    } else if (auto name = reader.string(j["experiment"], "experiment")) {
        if (auto kind = experiment_from_string(*name)) {
            cfg.experiment = *kind;
            kind_known = true;
        } else {
            reader.fail("experiment", "unknown experiment \"" + *name + "\"");
        }
    }

    if (j.contains("allow_large_ed")) {
        if (j["allow_large_ed"].is_boolean()) {
            cfg.ed.allow_large = j["allow_large_ed"].get<bool>();
        } else {
            reader.fail("allow_large_ed", "must be a boolean");
        }
    }

    if (!j.contains("model")) {
        reader.fail("model", "required");
    } else if (reader.object(j["model"], "model", {"L", "J", "gamma"})) {
        const auto& m = j["model"];
        if (!m.contains("L")) {
            reader.fail("model.L", "required");
        } else {
            cfg.model.lengths = reader.scalar_or_list<int>(m["L"], "model.L", [&](const auto& v, const std::string& p) {
                auto l = reader.integer(v, p, 2);
                if (l && *l > max_encodable_sites) {
                    reader.fail(p, "must be <= " + std::to_string(max_encodable_sites));
                    return std::optional<std::int64_t>{};
                }
                return l;
            });
        }
        if (m.contains("J")) {
            if (auto v = reader.number(m["J"], "model.J")) {
                if (*v <= 0.0) reader.fail("model.J", "must be > 0");
                cfg.model.coupling = *v;
            }
        }
        if (!m.contains("gamma")) {
            reader.fail("model.gamma", "required");
        } else {
            cfg.model.gammas =
                reader.scalar_or_list<double>(m["gamma"], "model.gamma", [&](const auto& v, const std::string& p) {
                    auto g = reader.number(v, p);
                    if (g && *g < 0.0) {
                        reader.fail(p, "must be >= 0");
                        return std::optional<double>{};
                    }
                    return g;
                });
        }
    }

    if (j.contains("trial")) {
        if (auto t = reader.trial(j["trial"], "trial")) cfg.trial = *t;
    }
    if (j.contains("trial_overrides")) {
        const auto& list = j["trial_overrides"];
        if (!list.is_array()) {
            reader.fail("trial_overrides", "must be an array");
        } else {
            for (std::size_t i = 0; i < list.size(); ++i) {
                const std::string p = "trial_overrides[" + std::to_string(i) + "]";
                if (!reader.object(list[i], p, {"gamma", "trial"})) continue;
                if (!list[i].contains("gamma") || !list[i].contains("trial")) {
                    reader.fail(p, "requires \"gamma\" and \"trial\"");
                    continue;
                }
                auto g = reader.number(list[i]["gamma"], p + ".gamma");
                auto t = reader.trial(list[i]["trial"], p + ".trial");
                if (g && t) cfg.trial_overrides.push_back({*g, *t});
            }
        }
    }

    if (kind_known) cfg.budgets = default_budgets(cfg.experiment);
    if (j.contains("budgets")) {
        cfg.budgets = reader.scalar_or_list<std::uint64_t>(
            j["budgets"], "budgets", [&](const auto& v, const std::string& p) { return reader.unsigned_integer(v, p); });
        if (kind_known && cfg.experiment != ExperimentKind::gfmc_sweep) {
            for (std::size_t i = 0; i < cfg.budgets.size(); ++i) {
                if (cfg.budgets[i] == 0) {
                    reader.fail("budgets[" + std::to_string(i) + "]",
                                "M = 0 (exact oracle) is only meaningful for gfmc_sweep; exact values are emitted "
                                "alongside every estimate");
                }
            }
        }
    }

    if (kind_known) cfg.replicates = cfg.experiment == ExperimentKind::gfmc_sweep ? 128 : 16;
    if (j.contains("replicates")) {
        if (auto r = reader.integer(j["replicates"], "replicates", 1)) cfg.replicates = static_cast<std::size_t>(*r);
    }

    if (j.contains("rank_limit")) {
        if (auto r = reader.integer(j["rank_limit"], "rank_limit", 1)) cfg.rank_limit = static_cast<std::size_t>(*r);
    }

    if (j.contains("sign_policy")) {
        if (auto s = reader.string(j["sign_policy"], "sign_policy")) {
            if (*s == "exact_sign") {
                cfg.sign_policy = SignPolicy::exact_sign;
            } else if (*s == "assume_positive") {
                cfg.sign_policy = SignPolicy::assume_positive;
            } else {
                reader.fail("sign_policy", "must be \"exact_sign\" or \"assume_positive\"");
            }
        }
    }

    if (j.contains("master_seed")) {
        if (auto s = reader.unsigned_integer(j["master_seed"], "master_seed")) cfg.master_seed = *s;
    }
    if (j.contains("output_dir")) {
        if (auto s = reader.string(j["output_dir"], "output_dir")) cfg.output_dir = *s;
    }

    if (j.contains("gfmc")) {
        if (kind_known && cfg.experiment != ExperimentKind::gfmc_sweep) {
            reader.fail("gfmc", "section is only used by gfmc_sweep");
        } else if (reader.object(j["gfmc"], "gfmc",
                                 {"walkers", "total_steps", "equilibration_steps", "reconfigure_every", "shift"})) {
            const auto& g = j["gfmc"];
            if (g.contains("walkers")) {
                if (auto v = reader.integer(g["walkers"], "gfmc.walkers", 1)) cfg.gfmc.walkers = *v;
            }
            if (g.contains("total_steps")) {
                if (auto v = reader.integer(g["total_steps"], "gfmc.total_steps", 2)) cfg.gfmc.total_steps = *v;
            }
            if (g.contains("equilibration_steps")) {
                if (auto v = reader.integer(g["equilibration_steps"], "gfmc.equilibration_steps", 1)) {
                    cfg.gfmc.equilibration_steps = *v;
                }
            }
            if (g.contains("reconfigure_every")) {
                if (auto v = reader.integer(g["reconfigure_every"], "gfmc.reconfigure_every", 1)) {
                    cfg.gfmc.reconfigure_every = *v;
                }
            }
            if (g.contains("shift") && !g["shift"].is_null()) cfg.gfmc.shift = reader.number(g["shift"], "gfmc.shift");
        }
    }
    if (cfg.gfmc.equilibration_steps >= cfg.gfmc.total_steps) {
        reader.fail("gfmc.equilibration_steps", "must be < gfmc.total_steps");
    }

    if (j.contains("study")) {
        if (kind_known && cfg.experiment != ExperimentKind::walker_study) {
            reader.fail("study", "section is only used by walker_study");
        } else if (reader.object(j["study"], "study", {"tau", "flip_rule", "baseline_rank_limit"})) {
            const auto& s = j["study"];
            if (s.contains("tau")) {
                if (auto v = reader.number(s["tau"], "study.tau")) {
                    if (*v < 0.0) reader.fail("study.tau", "must be >= 0");
                    cfg.study.tau = *v;
                }
            }
            if (s.contains("baseline_rank_limit")) {
                if (auto v = reader.integer(s["baseline_rank_limit"], "study.baseline_rank_limit", 1)) {
                    cfg.study.baseline_rank_limit = static_cast<std::size_t>(*v);
                }
            }
            if (s.contains("flip_rule")) {
                const auto& rule = s["flip_rule"];
                if (rule.is_string() && rule.get<std::string>() == "prefix") {
                    cfg.study.flip_rule = PrefixFlips{};
                } else if (rule.is_object() && reader.object(rule, "study.flip_rule", {"random_subsets"}) &&
                           rule.contains("random_subsets") &&
                           reader.object(rule["random_subsets"], "study.flip_rule.random_subsets",
                                         {"per_cardinality", "seed"})) {
                    const auto& r = rule["random_subsets"];
                    RandomSubsetFlips random;
                    if (r.contains("per_cardinality")) {
                        if (auto v = reader.integer(r["per_cardinality"], "study.flip_rule.random_subsets.per_cardinality", 1)) {
                            random.per_cardinality = static_cast<std::size_t>(*v);
                        }
                    }
                    if (r.contains("seed")) {
                        if (auto v = reader.unsigned_integer(r["seed"], "study.flip_rule.random_subsets.seed")) {
                            random.seed = *v;
                        }
                    }
                    cfg.study.flip_rule = random;
                } else {
                    reader.fail("study.flip_rule", "must be \"prefix\" or {\"random_subsets\": {...}}");
                }
            }
        }
    }

    // Cross-field checks.
    if (kind_known) {
        for (std::size_t i = 0; i < cfg.model.lengths.size(); ++i) {
            if (cfg.model.lengths[i] > cfg.ed.hard_max_sites) {
                reader.fail("model.L[" + std::to_string(i) + "]",
                            "dense routines support L <= " + std::to_string(cfg.ed.hard_max_sites));
            }
        }
        if (cfg.experiment == ExperimentKind::walker_study) {
            if (cfg.model.lengths.size() != 1) reader.fail("model.L", "walker_study needs a single L");
            if (cfg.model.gammas.size() != 1) reader.fail("model.gamma", "walker_study needs a single gamma");
            if (std::holds_alternative<ImaginaryTimeFilteredSpec>(cfg.trial)) {
                reader.fail("trial", "walker_study takes the unfiltered base trial; set study.tau for the filter");
            }
        }
        if (cfg.experiment == ExperimentKind::gfmc_sweep) {
            for (const auto& l : cfg.model.lengths) {
                for (const auto& g : cfg.model.gammas) {
                    const TfimModel probe(l, cfg.model.coupling, g);
                    const auto params = cfg.gfmc.params_for(probe, 0);
                    if (!(params.shift > max_diagonal_energy(probe) + probe.field * probe.length)) {
                        reader.fail("gfmc.shift", "too small for L = " + std::to_string(l));
                    }
                }
            }
        }
    }
    for (const auto& o : cfg.trial_overrides) {
        bool found = false;
        for (double g : cfg.model.gammas) found = found || g == o.gamma;
        if (!found) reader.fail("trial_overrides", "gamma " + format_double(o.gamma) + " is not in model.gamma");
    }

    if (!reader.issues.empty()) throw config_error(reader.issues);
    return cfg;
}

inline ExperimentConfig validate_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error({path.string() + ": cannot open"});
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error({path.string() + ": " + e.what()});
    }
    return parse_config(j);
}

/// 64-bit FNV-1a of the canonical (key-sorted) JSON text.
inline std::string config_hash(const nlohmann::json& source) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : source.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex;
    out.width(16);
    out.fill('0');
    out << h;
    return out.str();
}

inline nlohmann::json to_json(const GfmcSettings& g, const ModelGrid& model) {
    nlohmann::json j = {{"walkers", g.walkers},
                        {"total_steps", g.total_steps},
                        {"equilibration_steps", g.equilibration_steps},
                        {"reconfigure_every", g.reconfigure_every}};
    if (g.shift) {
        j["shift"] = *g.shift;
    } else {
        nlohmann::json values = nlohmann::json::array();
        for (int l : model.lengths) {
            for (double gamma : model.gammas) {
                values.push_back({{"L", l}, {"gamma", gamma}, {"shift", default_shift(TfimModel(l, model.coupling, gamma))}});
            }
        }
        j["shift"] = {{"rule", "L*(J+gamma)+1"}, {"values", values}};
    }
    return j;
}

/// Fully resolved config with every default spelled out.
inline nlohmann::json resolved_json(const ExperimentConfig& cfg) {
    nlohmann::json j = {{"schema_version", config_schema_version},
                        {"experiment", to_string(cfg.experiment)},
                        {"model", {{"L", cfg.model.lengths}, {"J", cfg.model.coupling}, {"gamma", cfg.model.gammas}}},
                        {"trial", provenance_json(cfg.trial)},
                        {"budgets", cfg.budgets},
                        {"replicates", cfg.replicates},
                        {"sign_policy", cfg.sign_policy == SignPolicy::exact_sign ? "exact_sign" : "assume_positive"},
                        {"allow_large_ed", cfg.ed.allow_large},
                        {"master_seed", cfg.master_seed},
                        {"output_dir", cfg.output_dir.string()}};
    if (!cfg.trial_overrides.empty()) {
        nlohmann::json overrides = nlohmann::json::array();
        for (const auto& o : cfg.trial_overrides) overrides.push_back({{"gamma", o.gamma}, {"trial", provenance_json(o.trial)}});
        j["trial_overrides"] = overrides;
    }
    if (cfg.rank_limit) j["rank_limit"] = *cfg.rank_limit;
    if (cfg.experiment == ExperimentKind::gfmc_sweep) j["gfmc"] = to_json(cfg.gfmc, cfg.model);
    if (cfg.experiment == ExperimentKind::walker_study) {
        nlohmann::json study = {{"tau", cfg.study.tau}};
        if (const auto* r = std::get_if<RandomSubsetFlips>(&cfg.study.flip_rule)) {
            study["flip_rule"] = {{"random_subsets", {{"per_cardinality", r->per_cardinality}, {"seed", r->seed}}}};
        } else {
            study["flip_rule"] = "prefix";
        }
        if (cfg.study.baseline_rank_limit) study["baseline_rank_limit"] = *cfg.study.baseline_rank_limit;
        j["study"] = study;
    }
    return j;
}

}  // namespace qmclab
