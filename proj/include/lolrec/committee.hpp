#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "lolrec/errors.hpp"
#include "lolrec/local_regression.hpp"
#include "lolrec/market_data.hpp"

namespace lolrec {

enum class Voting { average, median, mode };

inline const char* to_string(Voting v) {
    switch (v) {
        case Voting::average: return "average";
        case Voting::median: return "median";
        case Voting::mode: return "mode";
    }
    return "?";
}

inline Voting voting_from_string(std::string_view name) {
    if (name == "average") return Voting::average;
    if (name == "median") return Voting::median;
    if (name == "mode") return Voting::mode;
    throw error("unknown voting function '" + std::string(name) + "' (average|median|mode)");
}

/// The ensemble C(K, W, V) for one asset: one expert per (k, w) pair in
/// K x W, aggregated by the voting function V.
struct CommitteeSpec {
    std::vector<int> k_values;
    std::vector<int> w_values;
    Voting voting = Voting::average;
    double ridge = 0.01;

    std::size_t size() const { return k_values.size() * w_values.size(); }
    int max_window() const { return *std::max_element(w_values.begin(), w_values.end()); }

    void validate() const {
        if (k_values.empty() || w_values.empty())
            throw error("CommitteeSpec: K and W must be non-empty");
        auto check = [](const std::vector<int>& values, const char* name) {
            for (std::size_t i = 0; i < values.size(); ++i) {
                if (values[i] < 1)
                    throw error(std::string("CommitteeSpec: ") + name + " values must be >= 1");
                for (std::size_t j = i + 1; j < values.size(); ++j)
                    if (values[i] == values[j])
                        throw error(std::string("CommitteeSpec: duplicate value in ") + name);
            }
        };
        check(k_values, "K");
        check(w_values, "W");
        if (!(ridge >= 0.0)) throw error("CommitteeSpec: ridge must be >= 0");
    }
};

/// Histogram bin width for mode voting: 1% steps in price-relative space.
inline constexpr double mode_bin_width = 0.01;

namespace detail {

/// Bin index for value v under edges at integer multiples of `width`,
/// half-open [j*width, (j+1)*width). The floor result is corrected against
/// the computed edges so values landing exactly on an edge go up.
inline long long histogram_bin(double v, double width) {
    auto j = static_cast<long long>(std::floor(v / width));
    if (static_cast<double>(j + 1) * width <= v) ++j;
    else if (static_cast<double>(j) * width > v) --j;
    return j;
}

inline double median_of_sorted(std::span<const double> sorted) {
    const std::size_t n = sorted.size();
    return (n % 2 == 1) ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
}

} // namespace detail

/// Midpoint of the most populated fixed-width bin. Ties go to the bin whose
/// midpoint is closest to the median of the values, then to the lower bin.
inline double histogram_mode(std::span<const double> values, double bin_width) {
    if (values.empty()) throw error("histogram_mode: no values");
    if (!(bin_width > 0.0)) throw error("histogram_mode: bin width must be > 0");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double median = detail::median_of_sorted(sorted);

    long long best_bin = 0;
    std::size_t best_count = 0;
    double best_dist = 0.0;
    std::size_t r = 0;
    while (r < sorted.size()) {
        const long long bin = detail::histogram_bin(sorted[r], bin_width);
        std::size_t count = 1;
        while (r + count < sorted.size() &&
               detail::histogram_bin(sorted[r + count], bin_width) == bin)
            ++count;
        const double midpoint = (static_cast<double>(bin) + 0.5) * bin_width;
        const double dist = std::abs(midpoint - median);
        if (count > best_count || (count == best_count && dist < best_dist)) {
            best_bin = bin;
            best_count = count;
            best_dist = dist;
        }
        r += count;
    }
    return (static_cast<double>(best_bin) + 0.5) * bin_width;
}

/// Aggregate expert estimates into the committee's estimate v_ij.
/// Average is the evenly weighted mean, median the middle order statistic
/// (mean of the two middles for even counts), mode the histogram mode above.
/// Estimates are sorted internally, so the result does not depend on input
/// order. A single estimate is returned as-is by every voting function.
inline double vote(std::span<const double> estimates, Voting voting) {
    if (estimates.empty()) throw error("vote: empty estimate list");
    for (double e : estimates)
        if (!std::isfinite(e)) throw error("vote: non-finite estimate");
    if (estimates.size() == 1) return estimates[0];

    std::vector<double> sorted(estimates.begin(), estimates.end());
    std::sort(sorted.begin(), sorted.end());
    switch (voting) {
        case Voting::average: {
            double sum = 0.0;
            for (double e : sorted) sum += e;
            return sum / static_cast<double>(sorted.size());
        }
        case Voting::median:
            return detail::median_of_sorted(sorted);
        case Voting::mode:
            return histogram_mode(sorted, mode_bin_width);
    }
    throw error("vote: bad voting enum");
}

/// Accumulated wealth of the hypothetical strategy that holds the asset only
/// when its committee predicts growth, otherwise cash.
struct CommitteeState {
    double wealth = 1.0;
    std::string asset;
};

/// Per-period wealth factor: the realized relative when the committee
/// predicted a positive return, 1 (cash) otherwise. A prediction of exactly
/// 1.0 means no growth and stays in cash.
inline double committee_wealth_factor(double voted_estimate, double realized_relative) {
    return voted_estimate > 1.0 ? realized_relative : 1.0;
}

inline CommitteeState update_committee_wealth(CommitteeState state, double voted_estimate,
                                              double realized_relative) {
    if (realized_relative < 0.0 || !std::isfinite(realized_relative))
        throw error("update_committee_wealth: realized relative must be >= 0 and finite");
    state.wealth *= committee_wealth_factor(voted_estimate, realized_relative);
    return state;
}

/// Windowed training sets for one asset, one per window size in the
/// committee. Built once per asset; each period then trains on a row prefix.
struct AssetWindows {
    AssetWindows(std::span<const double> series, const CommitteeSpec& spec) {
        per_window.reserve(spec.w_values.size());
        for (int w : spec.w_values) per_window.push_back(windowize(series, w));
    }
    std::vector<WindowedSet> per_window;   // aligned with spec.w_values
};

/// All |K| x |W| expert estimates for period i, in (w outer, k inner) order.
/// One distance scan per window size is shared across the k values: the k
/// nearest neighbours are a prefix of the max(K) nearest, so each expert sees
/// exactly what a standalone expert_predict call would.
inline std::vector<double> committee_estimates(const AssetWindows& windows, std::size_t i,
                                               const CommitteeSpec& spec) {
    spec.validate();
    const int k_max = *std::max_element(spec.k_values.begin(), spec.k_values.end());
    std::vector<double> estimates;
    estimates.reserve(spec.size());
    for (std::size_t wi = 0; wi < spec.w_values.size(); ++wi) {
        const WindowedSet& train = windows.per_window[wi];
        const auto w = train.width;
        if (i < w + 1 || i - w >= train.rows())
            throw error("committee_estimates: period " + std::to_string(i) +
                        " outside the trainable range for w=" + std::to_string(w));
        const std::size_t limit = i - w;        // rows with label index < i
        // row `limit` holds the query window (series[i-1..i-w]) and is itself
        // excluded from training
        const auto query = train.predictor_row(limit);
        const auto neighbors = knn_select(query, train, k_max, limit);
        for (int k : spec.k_values) {
            const std::size_t kk = std::min(static_cast<std::size_t>(k), neighbors.size());
            estimates.push_back(knn_fit_predict(
                train, std::span(neighbors.data(), kk), spec.ridge, query));
        }
    }
    return estimates;
}

/// Convenience: windowize, run every expert, vote. Equals
/// vote(committee_estimates(...), spec.voting) on the same history prefix.
inline double committee_estimate(std::span<const double> series, std::size_t i,
                                 const CommitteeSpec& spec) {
    AssetWindows windows(series, spec);
    return vote(committee_estimates(windows, i, spec), spec.voting);
}

/// Committee outputs for a whole market: voted[i][j] is asset j's committee
/// estimate for period i, absent during warm-up (i < first_period).
struct EstimatePanel {
    std::size_t first_period = 0;  // max(W) + 1
    std::vector<std::vector<std::optional<double>>> voted;   // periods x assets

    std::size_t periods() const { return voted.size(); }
    std::size_t assets() const { return voted.empty() ? 0 : voted[0].size(); }
};

/// Evaluate every asset's committee over every estimable period. Assets fan
/// out across `threads` workers; each estimate lands in a preassigned slot,
/// so results are identical for any thread count. When `estimate_dump` is
/// given, every raw expert estimate is recorded (ordered by asset, period,
/// then w-major expert order).
inline EstimatePanel build_estimate_panel(const MarketMatrix& market, const CommitteeSpec& spec,
                                          int threads = 1,
                                          std::vector<ExpertEstimate>* estimate_dump = nullptr) {
    spec.validate();
    const std::size_t T = market.periods();
    const std::size_t d = market.assets();
    const auto first = static_cast<std::size_t>(spec.max_window()) + 1;
    if (T < first + 1)
        throw error("market too short: " + std::to_string(T) + " periods, need at least max(W)+2 = " +
                    std::to_string(first + 1));

    EstimatePanel panel;
    panel.first_period = first;
    panel.voted.assign(T, std::vector<std::optional<double>>(d));

    std::vector<std::vector<ExpertEstimate>> dump_per_asset(estimate_dump ? d : 0);

    auto evaluate_asset = [&](std::size_t j) {
        const std::vector<double> series = market.asset_series(j);
        const AssetWindows windows(series, spec);
        std::vector<ExpertEstimate>* dump = estimate_dump ? &dump_per_asset[j] : nullptr;
        for (std::size_t i = first; i < T; ++i) {
            const auto estimates = committee_estimates(windows, i, spec);
            panel.voted[i][j] = vote(estimates, spec.voting);
            if (dump) {
                std::size_t e = 0;
                for (int w : spec.w_values)
                    for (int k : spec.k_values)
                        dump->push_back({estimates[e++], market.tickers[j], i,
                                         ExpertSpec{k, w, spec.ridge}});
            }
        }
    };

    const int n_workers = std::clamp(threads, 1, static_cast<int>(d));
    if (n_workers <= 1) {
        for (std::size_t j = 0; j < d; ++j) evaluate_asset(j);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&] {
            try {
                for (std::size_t j = next.fetch_add(1); j < d; j = next.fetch_add(1))
                    evaluate_asset(j);
            } catch (...) {
                std::scoped_lock lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    if (estimate_dump)
        for (auto& rows : dump_per_asset)
            estimate_dump->insert(estimate_dump->end(), rows.begin(), rows.end());
    return panel;
}

/// d wealth series of length periods+1, each starting at 1. Independent of
/// the selection parameter m, so one computation serves a whole m-sweep.
inline std::vector<std::vector<double>> committee_wealth_series(const MarketMatrix& market,
                                                                const EstimatePanel& panel) {
    const std::size_t T = market.periods();
    const std::size_t d = market.assets();
    if (panel.periods() != T || panel.assets() != d)
        throw error("committee_wealth_series: panel does not match market dimensions");
    std::vector<std::vector<double>> wealth(d, std::vector<double>(T + 1, 1.0));
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t i = 0; i < T; ++i) {
            const auto& voted = panel.voted[i][j];
            const double factor =
                voted ? committee_wealth_factor(*voted, market.relatives[i][j]) : 1.0;
            wealth[j][i + 1] = wealth[j][i] * factor;
        }
    return wealth;
}

} // namespace lolrec
