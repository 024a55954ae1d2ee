#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qmclab/errors.hpp"
#include "qmclab/rng.hpp"
#include "qmclab/spin.hpp"
#include "qmclab/trial.hpp"

namespace qmclab {

/// Walker/Vose alias table for O(1) categorical draws.
class AliasTable {
public:
    explicit AliasTable(std::span<const double> weights) : probability_(weights.size()), alias_(weights.size()) {
        const std::size_t n = weights.size();
        if (n == 0) throw std::invalid_argument("AliasTable: no categories");
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("AliasTable: weights must be finite, >= 0");
            total += w;
        }
        if (!(total > 0.0)) throw std::invalid_argument("AliasTable: weights sum to zero");

        std::vector<double> scaled(n);
        std::vector<std::size_t> small;
        std::vector<std::size_t> large;
        for (std::size_t i = 0; i < n; ++i) {
            scaled[i] = weights[i] * static_cast<double>(n) / total;
            (scaled[i] < 1.0 ? small : large).push_back(i);
        }
        while (!small.empty() && !large.empty()) {
            const std::size_t s = small.back();
            small.pop_back();
            const std::size_t l = large.back();
            probability_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        // Leftovers carry probability one up to rounding.
        for (std::size_t i : large) {
            probability_[i] = 1.0;
            alias_[i] = i;
        }
        for (std::size_t i : small) {
            probability_[i] = weights[i] > 0.0 ? 1.0 : 0.0;
            alias_[i] = weights[i] > 0.0 ? i : first_positive(weights);
        }
    }

    std::size_t size() const noexcept { return probability_.size(); }

    std::size_t sample(Rng& rng) const {
        const double u = uniform01(rng) * static_cast<double>(probability_.size());
        const auto column = std::min(static_cast<std::size_t>(u), probability_.size() - 1);
        return (u - static_cast<double>(column)) < probability_[column] ? column : alias_[column];
    }

private:
    static std::size_t first_positive(std::span<const double> weights) {
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] > 0.0) return i;
        }
        return 0;
    }

    std::vector<double> probability_;
    std::vector<std::size_t> alias_;
};

struct MeasurementBudget {
    std::uint64_t shots = 1;  // M
    std::uint64_t seed = 0;

    MeasurementBudget(std::uint64_t m, std::uint64_t s) : shots(m), seed(s) {
        if (m < 1) throw std::invalid_argument("MeasurementBudget: M must be >= 1");
    }
};

/// Histogram of M computational-basis measurements.
struct ShotCounts {
    int sites = 2;
    std::uint64_t total = 0;
    std::uint64_t seed = 0;
    std::map<Bits, std::uint64_t> counts;

    std::uint64_t count(Bits x) const {
        const auto it = counts.find(x);
        return it == counts.end() ? 0 : it->second;
    }
};

/// Born-rule probabilities |psi(x)|^2 of a table.
inline std::vector<double> born_probabilities(const TrialTable& table) {
    std::vector<double> p(table.dimension());
    for (std::size_t x = 0; x < p.size(); ++x) p[x] = table[x] * table[x];
    return p;
}

inline ShotCounts sample_counts(const AliasTable& sampler, int sites, const MeasurementBudget& budget) {
    if (sampler.size() != basis_dimension(sites)) throw std::invalid_argument("sample_counts: sampler size mismatch");
    Rng rng(budget.seed);
    std::vector<std::uint64_t> dense(sampler.size(), 0);
    for (std::uint64_t i = 0; i < budget.shots; ++i) ++dense[sampler.sample(rng)];
    ShotCounts out{sites, budget.shots, budget.seed, {}};
    for (std::size_t x = 0; x < dense.size(); ++x) {
        if (dense[x] != 0) out.counts.emplace_hint(out.counts.end(), static_cast<Bits>(x), dense[x]);
    }
    return out;
}

/// M independent draws from |table(x)|^2; deterministic in budget.seed.
inline ShotCounts sample_counts(const TrialTable& table, const MeasurementBudget& budget) {
    const auto p = born_probabilities(table);
    return sample_counts(AliasTable(p), table.sites(), budget);
}

inline nlohmann::json to_json(const ShotCounts& shots) {
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [x, n] : shots.counts) counts[std::to_string(x)] = n;
    return {{"M", shots.total}, {"seed", shots.seed}, {"L", shots.sites}, {"counts", std::move(counts)}};
}

inline ShotCounts shot_counts_from_json(const nlohmann::json& j) {
    try {
        ShotCounts out;
        out.sites = j.at("L").get<int>();
        out.total = j.at("M").get<std::uint64_t>();
        out.seed = j.at("seed").get<std::uint64_t>();
        if (out.sites < 2 || out.sites > max_encodable_sites) throw format_error("shot counts: L out of range");
        std::uint64_t sum = 0;
        for (const auto& [key, value] : j.at("counts").items()) {
            std::size_t used = 0;
            const Bits x = std::stoull(key, &used);
            if (used != key.size() || x > site_mask(out.sites)) throw format_error("shot counts: bad state key " + key);
            const auto n = value.get<std::uint64_t>();
            sum += n;
            if (n != 0) out.counts.emplace(x, n);
        }
        if (sum != out.total) throw format_error("shot counts: counts do not sum to M");
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("shot counts: ") + e.what());
    } catch (const std::logic_error& e) {
        throw format_error(std::string("shot counts: ") + e.what());
    }
}

}  // namespace qmclab
