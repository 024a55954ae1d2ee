#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "qmclab/sampling.hpp"
#include "qmclab/trial.hpp"

namespace qmclab {

/// Where sampled estimates take their sign from. Shots only ever reveal magnitudes.
enum class SignPolicy { exact_sign, assume_positive };

/// Trial-amplitude access: either the exact table or the shot-frequency estimate
/// sign(x) * sqrt(n_x / M) built from one ShotCounts.
class AmplitudeOracle {
public:
    static AmplitudeOracle exact(std::shared_ptr<const TrialTable> table) {
        if (!table) throw std::invalid_argument("AmplitudeOracle: null table");
        return AmplitudeOracle(std::move(table));
    }

    static AmplitudeOracle sampled(std::shared_ptr<const TrialTable> table, ShotCounts shots, SignPolicy policy) {
        if (!table) throw std::invalid_argument("AmplitudeOracle: null table");
        if (shots.sites != table->sites()) throw std::invalid_argument("AmplitudeOracle: shot/table length mismatch");
        if (shots.total < 1) throw std::invalid_argument("AmplitudeOracle: empty shot record");
        return AmplitudeOracle(std::move(table), std::move(shots), policy);
    }

    bool is_exact() const noexcept { return !shots_.has_value(); }
    /// M, or nothing for the exact (M = infinity) oracle.
    std::optional<std::uint64_t> budget() const noexcept {
        return shots_ ? std::optional<std::uint64_t>(shots_->total) : std::nullopt;
    }
    int sites() const noexcept { return table_->sites(); }
    const TrialTable& table() const noexcept { return *table_; }
    const std::shared_ptr<const TrialTable>& table_ptr() const noexcept { return table_; }
    const ShotCounts* shots() const noexcept { return shots_ ? &*shots_ : nullptr; }
    SignPolicy sign_policy() const noexcept { return policy_; }

    /// Dense estimates indexed by basis state.
    std::span<const double> estimates() const noexcept {
        return shots_ ? std::span<const double>(estimates_) : table_->amplitudes();
    }
    double operator[](Bits x) const noexcept { return shots_ ? estimates_[x] : (*table_)[x]; }

private:
    explicit AmplitudeOracle(std::shared_ptr<const TrialTable> table) : table_(std::move(table)) {}

    AmplitudeOracle(std::shared_ptr<const TrialTable> table, ShotCounts shots, SignPolicy policy)
        : table_(std::move(table)), shots_(std::move(shots)), policy_(policy), estimates_(table_->dimension(), 0.0) {
        const double m = static_cast<double>(shots_->total);
        for (const auto& [x, n] : shots_->counts) {
            if (x >= estimates_.size()) throw std::invalid_argument("AmplitudeOracle: shot key out of range");
            const double magnitude = std::sqrt(static_cast<double>(n) / m);
            const bool negative = policy_ == SignPolicy::exact_sign && std::signbit((*table_)[x]);
            estimates_[x] = negative ? -magnitude : magnitude;
        }
    }

    std::shared_ptr<const TrialTable> table_;
    std::optional<ShotCounts> shots_;
    SignPolicy policy_ = SignPolicy::exact_sign;
    std::vector<double> estimates_;
};

inline double estimated_amplitude(const AmplitudeOracle& oracle, const SpinConfiguration& x) {
    if (x.sites != oracle.sites()) throw std::invalid_argument("estimated_amplitude: configuration length mismatch");
    return oracle[x.bits];
}

struct OverlapEntry {
    SpinConfiguration state;
    double exact = 0.0;
    double estimated = 0.0;
};

/// Basis states ordered by descending exact |psi_T(x)| (ties by state index), truncated to rank_limit.
inline std::vector<OverlapEntry> overlap_distribution(const AmplitudeOracle& oracle, std::size_t rank_limit) {
    const auto& table = oracle.table();
    std::vector<Bits> order(table.dimension());
    for (std::size_t x = 0; x < order.size(); ++x) order[x] = x;
    const std::size_t keep = std::min(rank_limit, order.size());
    auto by_magnitude = [&](Bits a, Bits b) {
        const double ma = std::abs(table[a]);
        const double mb = std::abs(table[b]);
        return ma != mb ? ma > mb : a < b;
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), by_magnitude);
    std::vector<OverlapEntry> out;
    out.reserve(keep);
    for (std::size_t r = 0; r < keep; ++r) {
        const Bits x = order[r];
        out.push_back({SpinConfiguration(x, table.sites()), table[x], oracle[x]});
    }
    return out;
}

}  // namespace qmclab
