#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qmclab/errors.hpp"
#include "qmclab/model.hpp"
#include "qmclab/oracle.hpp"
#include "qmclab/parallel.hpp"
#include "qmclab/rng.hpp"
#include "qmclab/sampling.hpp"
#include "qmclab/spectrum.hpp"
#include "qmclab/stats.hpp"
#include "qmclab/trial.hpp"

namespace qmclab {

/// Lambda = L (J + Gamma) + 1, above the spectral radius bound of H.
inline double default_shift(const TfimModel& model) {
    return model.length * (model.coupling + model.field) + 1.0;
}

/// Discrete-time GFMC with projector (shift * 1 - H).
struct GfmcParams {
    double shift = 0.0;
    std::size_t walkers = 400;
    std::size_t total_steps = 2000;
    std::size_t equilibration_steps = 500;
    std::size_t reconfigure_every = 1;
    std::uint64_t seed = 0;

    static GfmcParams defaults(const TfimModel& model) {
        GfmcParams p;
        p.shift = default_shift(model);
        return p;
    }
};

inline void validate(const GfmcParams& params, const TfimModel& model) {
    const double bound = max_diagonal_energy(model) + model.field * model.length;
    if (!(params.shift > bound)) {
        throw std::invalid_argument("GfmcParams: shift " + std::to_string(params.shift) + " must exceed " +
                                    std::to_string(bound));
    }
    if (params.walkers < 1) throw std::invalid_argument("GfmcParams: need at least one walker");
    if (!(params.equilibration_steps > 0 && params.equilibration_steps < params.total_steps)) {
        throw std::invalid_argument("GfmcParams: need 0 < equilibration_steps < total_steps");
    }
    if (params.reconfigure_every < 1) throw std::invalid_argument("GfmcParams: reconfigure_every must be >= 1");
}

struct Walker {
    SpinConfiguration state;
    double weight = 1.0;
};

using Population = std::vector<Walker>;

struct GfmcResult {
    std::vector<double> energy_series;  // one mixed estimate per generation
    double energy_mean = 0.0;
    double energy_stderr = 0.0;
    double exact_reference = 0.0;
    double error_per_site = 0.0;
};

namespace detail {

inline double local_energy(const TfimModel& model, std::span<const double> estimates, Bits x) {
    const double here = estimates[x];
    if (here == 0.0) throw undefined_local_energy("local energy undefined: zero trial estimate at state " +
                                                  std::to_string(x));
    double flips = 0.0;
    for (int k = 0; k < model.length; ++k) flips += estimates[x ^ (Bits{1} << k)];
    return diagonal_energy(model, x) - model.field * flips / here;
}

/// Draws x' from p(x'|x) = estimate(x') (shift - H)_{x'x} / (estimate(x) b(x)).
/// Every term is checked for sign before the draw, not only the one selected.
inline Bits propagate(const TfimModel& model, std::span<const double> estimates, double shift, Bits x, double b,
                      Rng& rng) {
    const double stay = shift - diagonal_energy(model, x);
    const double ratio = model.field / estimates[x];
    if (stay < 0.0) throw sign_problem_error("negative diagonal transition weight");
    for (int k = 0; k < model.length; ++k) {
        if (ratio * estimates[x ^ (Bits{1} << k)] < 0.0) {
            throw sign_problem_error("negative transition probability to state " +
                                     std::to_string(x ^ (Bits{1} << k)));
        }
    }
    double r = uniform01(rng) * b;
    if (r < stay) return x;
    r -= stay;
    Bits last = x;
    for (int k = 0; k < model.length; ++k) {
        const Bits y = x ^ (Bits{1} << k);
        const double term = ratio * estimates[y];
        if (term > 0.0) {
            last = y;
            if (r < term) return y;
            r -= term;
        }
    }
    return last;  // rounding remainder
}

/// Systematic (comb) resampling: n teeth at (u + j) W / n over the cumulative weights.
inline std::vector<std::size_t> comb_indices(std::span<const double> weights, std::size_t n, Rng& rng) {
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw population_collapse("negative or NaN walker weight");
        total += w;
    }
    if (!(total > 0.0) || !std::isfinite(total)) throw population_collapse("total walker weight is zero or infinite");
    std::vector<std::size_t> picks;
    picks.reserve(n);
    const double spacing = total / static_cast<double>(n);
    const double u = uniform01(rng);
    std::size_t i = 0;
    double cumulative = weights[0];
    for (std::size_t j = 0; j < n; ++j) {
        const double tooth = (u + static_cast<double>(j)) * spacing;
        while (tooth >= cumulative && i + 1 < weights.size()) cumulative += weights[++i];
        picks.push_back(i);
    }
    return picks;
}

}  // namespace detail

/// E_L(x) = diag(x) - Gamma sum_{x'} estimate(x') / estimate(x).
inline double local_energy(const TfimModel& model, const AmplitudeOracle& oracle, const SpinConfiguration& x) {
    detail::require_sites(model, x);
    if (oracle.sites() != model.length) throw std::invalid_argument("local_energy: oracle/model length mismatch");
    return detail::local_energy(model, oracle.estimates(), x.bits);
}

/// Transition probabilities out of x, stay move first, then flips by site. Zero entries omitted.
inline std::vector<std::pair<Bits, double>> transition_probabilities(const TfimModel& model,
                                                                     const AmplitudeOracle& oracle, double shift,
                                                                     const SpinConfiguration& x) {
    const auto est = oracle.estimates();
    const double b = shift - detail::local_energy(model, est, x.bits);
    if (!(b > 0.0)) throw shift_too_small("b(x) <= 0");
    std::vector<std::pair<Bits, double>> out;
    out.emplace_back(x.bits, (shift - diagonal_energy(model, x.bits)) / b);
    for (int k = 0; k < model.length; ++k) {
        const Bits y = x.bits ^ (Bits{1} << k);
        const double p = model.field * est[y] / est[x.bits] / b;
        if (p != 0.0) out.emplace_back(y, p);
    }
    return out;
}

/// Population with walkers drawn from |estimate|^2, i.e. proportional to counts for a sampled oracle.
inline Population initial_population(const AmplitudeOracle& oracle, std::size_t walkers, Rng& rng) {
    const auto est = oracle.estimates();
    std::vector<double> weights(est.size());
    for (std::size_t x = 0; x < est.size(); ++x) weights[x] = est[x] * est[x];
    const AliasTable sampler(weights);
    Population out;
    out.reserve(walkers);
    for (std::size_t i = 0; i < walkers; ++i) out.push_back({SpinConfiguration(sampler.sample(rng), oracle.sites()), 1.0});
    return out;
}

/// One projection step: weight *= b(x), then move x -> x' with the importance-sampled kernel.
inline Population gfmc_step(const TfimModel& model, const AmplitudeOracle& oracle, const GfmcParams& params,
                            const Population& population, Rng& rng) {
    const auto est = oracle.estimates();
    Population out;
    out.reserve(population.size());
    for (const auto& w : population) {
        detail::require_sites(model, w.state);
        const double b = params.shift - detail::local_energy(model, est, w.state.bits);
        if (!(b > 0.0)) throw shift_too_small("b(x) = " + std::to_string(b) + " at state " + std::to_string(w.state.bits));
        const Bits next = detail::propagate(model, est, params.shift, w.state.bits, b, rng);
        out.push_back({SpinConfiguration(next, model.length), w.weight * b});
    }
    return out;
}

/// Resamples the population to the same size with unit weights.
inline Population reconfigure(const Population& population, Rng& rng) {
    if (population.empty()) throw population_collapse("empty population");
    std::vector<double> weights(population.size());
    for (std::size_t i = 0; i < population.size(); ++i) weights[i] = population[i].weight;
    const auto picks = detail::comb_indices(weights, population.size(), rng);
    Population out;
    out.reserve(picks.size());
    for (std::size_t i : picks) out.push_back({population[i].state, 1.0});
    return out;
}

/// Full run. The mixed estimate of each generation uses the weights after the step and before
/// reconfiguration; the reported mean covers the generations after equilibration.
inline GfmcResult run_gfmc(const TfimModel& model, const AmplitudeOracle& oracle, const GfmcParams& params,
                           double exact_reference) {
    validate(params, model);
    if (oracle.sites() != model.length) throw std::invalid_argument("run_gfmc: oracle/model length mismatch");
    const auto est = oracle.estimates();
    Rng rng(params.seed);

    const Population start = initial_population(oracle, params.walkers, rng);
    const std::size_t n = start.size();
    std::vector<Bits> states(n);
    std::vector<double> weights(n, 1.0);
    std::vector<double> e_local(n);
    for (std::size_t i = 0; i < n; ++i) {
        states[i] = start[i].state.bits;
        e_local[i] = detail::local_energy(model, est, states[i]);
    }

    GfmcResult result;
    result.energy_series.reserve(params.total_steps);
    std::vector<Bits> next_states(n);
    std::vector<double> next_local(n);
    for (std::size_t t = 0; t < params.total_steps; ++t) {
        double weighted = 0.0;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double b = params.shift - e_local[i];
            if (!(b > 0.0)) throw shift_too_small("b(x) <= 0 during run");
            weights[i] *= b;
            states[i] = detail::propagate(model, est, params.shift, states[i], b, rng);
            e_local[i] = detail::local_energy(model, est, states[i]);
            weighted += weights[i] * e_local[i];
            total += weights[i];
        }
        if (!(total > 0.0) || !std::isfinite(total)) throw population_collapse("walker weights vanished or overflowed");
        result.energy_series.push_back(weighted / total);

        if ((t + 1) % params.reconfigure_every == 0) {
            const auto picks = detail::comb_indices(weights, n, rng);
            for (std::size_t j = 0; j < n; ++j) {
                next_states[j] = states[picks[j]];
                next_local[j] = e_local[picks[j]];
            }
            states.swap(next_states);
            e_local.swap(next_local);
            std::fill(weights.begin(), weights.end(), 1.0);
        } else {
            // Global rescaling leaves every ratio estimator unchanged.
            const double scale = total / static_cast<double>(n);
            for (double& w : weights) w /= scale;
        }
    }

    const auto tail = std::span<const double>(result.energy_series).subspan(params.equilibration_steps);
    result.energy_mean = stats::mean(tail);
    result.energy_stderr = stats::blocked_standard_error(tail);
    result.exact_reference = exact_reference;
    result.error_per_site = (result.energy_mean - exact_reference) / model.length;
    return result;
}

struct ExactOracleKind {};
struct SampledOracleKind {
    std::uint64_t shots = 1;
    std::uint64_t seed = 0;
    SignPolicy policy = SignPolicy::exact_sign;
};
using OracleKind = std::variant<ExactOracleKind, SampledOracleKind>;

inline AmplitudeOracle make_oracle(std::shared_ptr<const TrialTable> table, const OracleKind& kind) {
    if (const auto* sampled = std::get_if<SampledOracleKind>(&kind)) {
        auto shots = sample_counts(*table, MeasurementBudget(sampled->shots, sampled->seed));
        return AmplitudeOracle::sampled(std::move(table), std::move(shots), sampled->policy);
    }
    return AmplitudeOracle::exact(std::move(table));
}

/// Builds the trial and oracle, then runs against the free-fermion ground energy.
inline GfmcResult run_gfmc(const TfimModel& model, const TrialSpec& trial, const OracleKind& kind,
                           const GfmcParams& params) {
    auto table = std::make_shared<const TrialTable>(build_trial_table(trial, model));
    const auto oracle = make_oracle(std::move(table), kind);
    return run_gfmc(model, oracle, params, exact_ground_fermion(model).ground_energy);
}

/// Per-cell GFMC settings; the shift defaults to default_shift(model) for each L.
struct GfmcSettings {
    std::size_t walkers = 400;
    std::size_t total_steps = 2000;
    std::size_t equilibration_steps = 500;
    std::size_t reconfigure_every = 1;
    std::optional<double> shift;

    GfmcParams params_for(const TfimModel& model, std::uint64_t seed) const {
        return {shift.value_or(default_shift(model)), walkers, total_steps, equilibration_steps, reconfigure_every,
                seed};
    }
};

struct SweepSpec {
    std::vector<int> lengths;
    double coupling = 1.0;
    double gamma_over_j = 1.0;
    TrialSpec trial = SymmetricExponentialSpec{};
    std::vector<std::uint64_t> budgets;  // 0 selects the exact oracle
    std::size_t runs = 128;
    GfmcSettings gfmc;
    SignPolicy sign_policy = SignPolicy::exact_sign;
    std::uint64_t master_seed = 0;
    std::size_t threads = 1;
    EdOptions ed;
};

/// One CSV row; replicate = -1 marks the per-cell aggregate over successful replicates.
struct SweepRow {
    double gamma_over_j = 0.0;
    int length = 0;
    std::uint64_t budget = 0;
    long replicate = 0;
    double energy_mean = 0.0;
    double energy_stderr = 0.0;
    double exact_energy = 0.0;
    double error_per_site = 0.0;
    std::string status = "ok";
};

struct SeedRecord {
    std::uint64_t cell = 0;
    std::uint64_t seed = 0;
};

struct SweepTable {
    std::vector<SweepRow> rows;
    std::vector<SeedRecord> seeds;
    nlohmann::json trials = nlohmann::json::array();
    std::size_t failed_cells = 0;
    std::size_t total_cells = 0;
};

/// Full factorial sweep over (L, M, replicate). Every cell owns an RNG seeded from
/// derive_seed(master_seed, cell index); results are merged in cell order.
inline SweepTable sweep_measurements(const SweepSpec& spec) {
    if (spec.lengths.empty()) throw std::invalid_argument("sweep: empty L list");
    if (spec.budgets.empty()) throw std::invalid_argument("sweep: empty M list");
    if (spec.runs < 1) throw std::invalid_argument("sweep: runs must be >= 1");
    const double gamma = spec.gamma_over_j * spec.coupling;
    const std::size_t n_l = spec.lengths.size();
    const std::size_t n_m = spec.budgets.size();
    const std::size_t n_r = spec.runs;

    struct LengthContext {
        std::optional<TfimModel> model;
        std::shared_ptr<const TrialTable> table;
        std::optional<AliasTable> sampler;
        double exact = 0.0;
        std::string failure;
    };
    std::vector<LengthContext> contexts(n_l);
    SweepTable out;
    for (std::size_t li = 0; li < n_l; ++li) {
        auto& ctx = contexts[li];
        try {
            ctx.model.emplace(spec.lengths[li], spec.coupling, gamma);
            ctx.table = std::make_shared<const TrialTable>(build_trial_table(spec.trial, *ctx.model, spec.ed));
            ctx.sampler.emplace(born_probabilities(*ctx.table));
            ctx.exact = exact_ground_fermion(*ctx.model).ground_energy;
            out.trials.push_back({{"L", spec.lengths[li]},
                                  {"gamma_over_j", spec.gamma_over_j},
                                  {"provenance", provenance_json(ctx.table->provenance())},
                                  {"metadata", ctx.table->metadata()}});
        } catch (const std::exception& e) {
            ctx.failure = e.what();
            out.trials.push_back({{"L", spec.lengths[li]}, {"gamma_over_j", spec.gamma_over_j}, {"error", e.what()}});
        }
    }

    const std::size_t n_cells = n_l * n_m * n_r;
    std::vector<std::optional<GfmcResult>> results(n_cells);
    std::vector<std::string> failures(n_cells);
    out.seeds.resize(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) out.seeds[c] = {c, derive_seed(spec.master_seed, c)};

    parallel_for(n_cells, spec.threads, [&](std::size_t c) {
        const std::size_t li = c / (n_m * n_r);
        const std::size_t mi = (c / n_r) % n_m;
        const auto& ctx = contexts[li];
        if (!ctx.failure.empty()) {
            failures[c] = ctx.failure;
            return;
        }
        const std::uint64_t cell_seed = out.seeds[c].seed;
        try {
            const auto params = spec.gfmc.params_for(*ctx.model, substream_seed(cell_seed, Substream::propagation));
            const std::uint64_t m = spec.budgets[mi];
            if (m == 0) {
                results[c] = run_gfmc(*ctx.model, AmplitudeOracle::exact(ctx.table), params, ctx.exact);
            } else {
                auto shots = sample_counts(*ctx.sampler, ctx.model->length,
                                           MeasurementBudget(m, substream_seed(cell_seed, Substream::shots)));
                const auto oracle = AmplitudeOracle::sampled(ctx.table, std::move(shots), spec.sign_policy);
                results[c] = run_gfmc(*ctx.model, oracle, params, ctx.exact);
            }
        } catch (const std::exception& e) {
            failures[c] = e.what();
        }
    });

    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.total_cells = n_cells;
    for (std::size_t li = 0; li < n_l; ++li) {
        for (std::size_t mi = 0; mi < n_m; ++mi) {
            std::vector<double> means;
            std::vector<double> errors;
            for (std::size_t r = 0; r < n_r; ++r) {
                const std::size_t c = (li * n_m + mi) * n_r + r;
                SweepRow row{spec.gamma_over_j, spec.lengths[li], spec.budgets[mi], static_cast<long>(r),
                             nan, nan, contexts[li].exact, nan, "ok"};
                if (results[c]) {
                    row.energy_mean = results[c]->energy_mean;
                    row.energy_stderr = results[c]->energy_stderr;
                    row.error_per_site = results[c]->error_per_site;
                    means.push_back(row.energy_mean);
                    errors.push_back(row.error_per_site);
                } else {
                    row.status = "failed: " + failures[c];
                    ++out.failed_cells;
                }
                out.rows.push_back(std::move(row));
            }
            SweepRow agg{spec.gamma_over_j, spec.lengths[li], spec.budgets[mi], -1,
                         stats::mean(means), stats::standard_error(means), contexts[li].exact,
                         stats::mean(errors), means.empty() ? "failed" : "ok"};
            out.rows.push_back(std::move(agg));
        }
    }
    return out;
}

}  // namespace qmclab
