#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qmclab/gfmc.hpp"
#include "qmclab/model.hpp"
#include "qmclab/oracle.hpp"
#include "qmclab/parallel.hpp"
#include "qmclab/rng.hpp"
#include "qmclab/sampling.hpp"
#include "qmclab/trial.hpp"

namespace qmclab {

/// X_S |base>: the base state with the spins in flip_mask flipped. Amplitudes are read
/// through the permutation x -> x XOR S, nothing is stored per walker.
struct NonOrthogonalWalker {
    Bits flip_mask = 0;
    std::shared_ptr<const TrialTable> base;

    double amplitude(Bits x) const noexcept { return (*base)[x ^ flip_mask]; }

    std::vector<double> dense() const {
        std::vector<double> v(base->dimension());
        for (std::size_t x = 0; x < v.size(); ++x) v[x] = amplitude(x);
        return v;
    }
};

inline double walker_amplitude(const NonOrthogonalWalker& w, const SpinConfiguration& x) {
    if (x.sites != w.base->sites()) throw std::invalid_argument("walker_amplitude: length mismatch");
    return w.amplitude(x.bits);
}

namespace detail {

inline void require_same_length(const AmplitudeOracle& oracle, const NonOrthogonalWalker& w) {
    if (!w.base) throw std::invalid_argument("walker has no base table");
    if (oracle.sites() != w.base->sites()) throw std::invalid_argument("oracle and walker lengths differ");
}

/// Sum over the oracle's support of estimate(x) * v(x).
inline double contract(const AmplitudeOracle& oracle, std::span<const double> v) {
    if (const auto* shots = oracle.shots()) {
        double s = 0.0;
        for (const auto& [x, n] : shots->counts) s += oracle[x] * v[x];
        return s;
    }
    return dot(oracle.estimates(), v);
}

}  // namespace detail

/// <Psi_T|X_S|base> with the oracle supplying Psi_T.
inline double walker_overlap(const AmplitudeOracle& oracle, const NonOrthogonalWalker& w) {
    detail::require_same_length(oracle, w);
    return detail::contract(oracle, w.dense());
}

/// Walker vector and H applied to it, reused across replicates and budgets.
struct PreparedWalker {
    NonOrthogonalWalker walker;
    std::vector<double> vector;
    std::vector<double> h_vector;

    PreparedWalker(const TfimModel& model, NonOrthogonalWalker w)
        : walker(std::move(w)), vector(walker.dense()), h_vector(apply_hamiltonian(model, vector)) {}
};

/// Local energy per site <Psi_T|H|phi> / <Psi_T|phi> / L.
inline double walker_local_energy(const TfimModel& model, const AmplitudeOracle& oracle, const PreparedWalker& w) {
    detail::require_same_length(oracle, w.walker);
    if (oracle.sites() != model.length) throw std::invalid_argument("walker_local_energy: model length mismatch");
    const double denominator = detail::contract(oracle, w.vector);
    if (denominator == 0.0) throw undefined_local_energy("walker overlap with the trial estimate is zero");
    return detail::contract(oracle, w.h_vector) / denominator / model.length;
}

inline double walker_local_energy(const TfimModel& model, const AmplitudeOracle& oracle,
                                  const NonOrthogonalWalker& w) {
    detail::require_same_length(oracle, w);
    return walker_local_energy(model, oracle, PreparedWalker(model, w));
}

struct PrefixFlips {};
struct RandomSubsetFlips {
    std::size_t per_cardinality = 1;
    std::uint64_t seed = 0;
};
using FlipSetRule = std::variant<PrefixFlips, RandomSubsetFlips>;

/// Prefix rule: masks flipping sites 0..k-1 for k = 1..L.
/// Random rule: per_cardinality distinct random k-subsets for each k (fewer if C(L, k) is smaller).
inline std::vector<Bits> generate_flip_masks(int length, const FlipSetRule& rule) {
    std::vector<Bits> masks;
    if (std::holds_alternative<PrefixFlips>(rule)) {
        for (int k = 1; k <= length; ++k) masks.push_back(site_mask(k));
        return masks;
    }
    const auto& random = std::get<RandomSubsetFlips>(rule);
    Rng rng(random.seed);
    std::vector<int> sites(static_cast<std::size_t>(length));
    for (int k = 1; k <= length; ++k) {
        // C(L, k) bounds how many distinct subsets exist.
        double choose = 1.0;
        for (int i = 0; i < k; ++i) choose = choose * (length - i) / (i + 1);
        const std::size_t want = static_cast<std::size_t>(std::min<double>(random.per_cardinality, std::round(choose)));
        std::vector<Bits> picked;
        while (picked.size() < want) {
            std::iota(sites.begin(), sites.end(), 0);
            for (int i = 0; i < k; ++i) {
                const auto j = i + static_cast<int>(rng() % static_cast<std::uint64_t>(length - i));
                std::swap(sites[i], sites[j]);
            }
            Bits mask = 0;
            for (int i = 0; i < k; ++i) mask |= Bits{1} << sites[i];
            if (std::find(picked.begin(), picked.end(), mask) == picked.end()) picked.push_back(mask);
        }
        std::sort(picked.begin(), picked.end());
        masks.insert(masks.end(), picked.begin(), picked.end());
    }
    return masks;
}

struct WalkerStudyConfig {
    BaseTrialSpec base_trial = SymmetricExponentialSpec{};  // Psi_MC
    double tau = 0.05;
    FlipSetRule flip_rule = PrefixFlips{};
    std::vector<std::uint64_t> budgets;
    std::size_t replicates = 16;
    SignPolicy sign_policy = SignPolicy::exact_sign;
    /// Basis states in the product-state baseline panel, ranked by |Psi_MC|; all of them when unset.
    std::optional<std::size_t> baseline_rank_limit;
    std::uint64_t master_seed = 0;
    std::size_t threads = 1;
    EdOptions ed;
};

inline void validate(const WalkerStudyConfig& config) {
    if (!(config.tau >= 0.0)) throw std::invalid_argument("walker study: tau must be >= 0");
    if (config.replicates < 1) throw std::invalid_argument("walker study: replicates must be >= 1");
    if (config.budgets.empty()) throw std::invalid_argument("walker study: empty M grid");
    for (auto m : config.budgets) {
        if (m < 1) throw std::invalid_argument("walker study: every M must be >= 1");
    }
}

/// One CSV row. For baseline rows the walker is the basis state X_S|up...up>, so flip_mask
/// is the set of down spins and walker_id is the rank by exact |Psi_MC|.
struct WalkerStudyRow {
    std::size_t walker_id = 0;
    Bits flip_mask = 0;
    int n_flips = 0;
    std::uint64_t budget = 0;
    std::size_t replicate = 0;
    double overlap_exact = 0.0;
    double overlap_est = 0.0;
    double eloc_exact_per_site = 0.0;
    double eloc_est_per_site = 0.0;
    std::string status = "ok";
};

struct WalkerStudyTable {
    std::vector<WalkerStudyRow> walkers;   // spin-flip walkers under e^{-tau H} Psi_MC
    std::vector<WalkerStudyRow> baseline;  // basis-state walkers under Psi_MC
    std::vector<SeedRecord> seeds;
    nlohmann::json metadata = nlohmann::json::object();
    std::size_t failed_cells = 0;
};

namespace detail {

template <class F>
void evaluate_local_energy(F&& f, double& out, std::string& status) {
    try {
        out = f();
    } catch (const undefined_local_energy&) {
        out = std::numeric_limits<double>::quiet_NaN();
        status = "undefined_local_energy";
    }
}

}  // namespace detail

/// Static evaluation of overlaps and local energies for the spin-flip walkers and the
/// basis-state baseline, for every (M, replicate) cell.
inline WalkerStudyTable run_walker_study(const TfimModel& model, const WalkerStudyConfig& config) {
    validate(config);
    const int L = model.length;
    auto psi_mc = std::make_shared<const TrialTable>(build_trial_table(to_trial_spec(config.base_trial), model, config.ed));
    auto psi_t = std::make_shared<const TrialTable>(
        build_trial_table(ImaginaryTimeFilteredSpec{config.base_trial, config.tau}, model, config.ed));

    std::vector<PreparedWalker> walkers;
    for (Bits mask : generate_flip_masks(L, config.flip_rule)) walkers.emplace_back(model, NonOrthogonalWalker{mask, psi_mc});

    const auto exact_t = AmplitudeOracle::exact(psi_t);
    const auto exact_mc = AmplitudeOracle::exact(psi_mc);
    struct Reference {
        double overlap = 0.0;
        double eloc = 0.0;
        std::string status = "ok";
    };
    std::vector<Reference> walker_ref(walkers.size());
    for (std::size_t i = 0; i < walkers.size(); ++i) {
        walker_ref[i].overlap = detail::contract(exact_t, walkers[i].vector);
        detail::evaluate_local_energy([&] { return walker_local_energy(model, exact_t, walkers[i]); },
                                      walker_ref[i].eloc, walker_ref[i].status);
    }

    const std::size_t n_base = std::min(config.baseline_rank_limit.value_or(psi_mc->dimension()), psi_mc->dimension());
    const auto ranked = overlap_distribution(exact_mc, n_base);
    std::vector<Reference> base_ref(n_base);
    for (std::size_t r = 0; r < n_base; ++r) {
        base_ref[r].overlap = ranked[r].exact;
        detail::evaluate_local_energy([&] { return local_energy(model, exact_mc, ranked[r].state) / L; },
                                      base_ref[r].eloc, base_ref[r].status);
    }

    const AliasTable sampler_t(born_probabilities(*psi_t));
    const AliasTable sampler_mc(born_probabilities(*psi_mc));
    const std::size_t n_m = config.budgets.size();
    const std::size_t n_r = config.replicates;
    const std::size_t n_cells = n_m * n_r;

    WalkerStudyTable out;
    out.seeds.resize(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) out.seeds[c] = {c, derive_seed(config.master_seed, c)};
    std::vector<std::vector<WalkerStudyRow>> walker_rows(n_cells);
    std::vector<std::vector<WalkerStudyRow>> base_rows(n_cells);
    std::vector<std::string> failures(n_cells);

    parallel_for(n_cells, config.threads, [&](std::size_t c) {
        const std::size_t mi = c / n_r;
        const std::size_t r = c % n_r;
        const std::uint64_t m = config.budgets[mi];
        try {
            const auto oracle_t = AmplitudeOracle::sampled(
                psi_t, sample_counts(sampler_t, L, MeasurementBudget(m, substream_seed(out.seeds[c].seed, Substream::shots))),
                config.sign_policy);
            const auto oracle_mc = AmplitudeOracle::sampled(
                psi_mc,
                sample_counts(sampler_mc, L,
                              MeasurementBudget(m, substream_seed(out.seeds[c].seed, Substream::baseline_shots))),
                config.sign_policy);
            auto& rows = walker_rows[c];
            for (std::size_t i = 0; i < walkers.size(); ++i) {
                WalkerStudyRow row{i, walkers[i].walker.flip_mask, std::popcount(walkers[i].walker.flip_mask), m, r,
                                   walker_ref[i].overlap, detail::contract(oracle_t, walkers[i].vector),
                                   walker_ref[i].eloc, 0.0, walker_ref[i].status};
                detail::evaluate_local_energy([&] { return walker_local_energy(model, oracle_t, walkers[i]); },
                                              row.eloc_est_per_site, row.status);
                rows.push_back(std::move(row));
            }
            auto& brows = base_rows[c];
            for (std::size_t k = 0; k < n_base; ++k) {
                const Bits x = ranked[k].state.bits;
                const Bits mask = x ^ site_mask(L);
                WalkerStudyRow row{k, mask, std::popcount(mask), m, r, base_ref[k].overlap, oracle_mc[x],
                                   base_ref[k].eloc, 0.0, base_ref[k].status};
                detail::evaluate_local_energy([&] { return local_energy(model, oracle_mc, ranked[k].state) / L; },
                                              row.eloc_est_per_site, row.status);
                brows.push_back(std::move(row));
            }
        } catch (const std::exception& e) {
            failures[c] = e.what();
        }
    });

    for (std::size_t c = 0; c < n_cells; ++c) {
        if (!failures[c].empty()) ++out.failed_cells;
        out.walkers.insert(out.walkers.end(), walker_rows[c].begin(), walker_rows[c].end());
        out.baseline.insert(out.baseline.end(), base_rows[c].begin(), base_rows[c].end());
    }
    out.metadata = {{"L", L},
                    {"J", model.coupling},
                    {"gamma", model.field},
                    {"tau", config.tau},
                    {"psi_mc", {{"provenance", provenance_json(psi_mc->provenance())}, {"metadata", psi_mc->metadata()}}},
                    {"psi_t", {{"provenance", provenance_json(psi_t->provenance())}}},
                    {"walkers", walkers.size()},
                    {"baseline_states", n_base}};
    auto& failed = out.metadata["failures"] = nlohmann::json::array();
    for (std::size_t c = 0; c < n_cells; ++c) {
        if (!failures[c].empty()) failed.push_back({{"cell", c}, {"error", failures[c]}});
    }
    return out;
}

}  // namespace qmclab
