#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lolrec/committee.hpp"
#include "lolrec/errors.hpp"
#include "lolrec/market_data.hpp"

namespace lolrec {

/// Capital allocation for one period: d non-negative asset weights plus a
/// cash component, summing to 1. Cash is all-or-nothing: either the capital
/// is fully invested or it all rests in cash for the period.
struct PortfolioVector {
    std::vector<double> weights;
    double cash = 0.0;

    static PortfolioVector uniform(std::size_t d) {
        PortfolioVector b;
        b.weights.assign(d, 1.0 / static_cast<double>(d));
        return b;
    }
    static PortfolioVector all_cash(std::size_t d) {
        PortfolioVector b;
        b.weights.assign(d, 0.0);
        b.cash = 1.0;
        return b;
    }
};

/// Step 3: estimates below 1.0 promise no growth and are zeroed; absent
/// estimates (warm-up) count as zero. Exactly 1.0 passes through.
inline std::vector<double> truncate_estimates(std::span<const std::optional<double>> voted) {
    std::vector<double> out(voted.size(), 0.0);
    for (std::size_t j = 0; j < voted.size(); ++j)
        if (voted[j] && *voted[j] >= 1.0) out[j] = *voted[j];
    return out;
}

inline std::vector<double> truncate_estimates(std::span<const double> voted) {
    std::vector<double> out(voted.size(), 0.0);
    for (std::size_t j = 0; j < voted.size(); ++j)
        if (voted[j] >= 1.0) out[j] = voted[j];
    return out;
}

/// Step 4: indices of the up-to-m largest strictly positive truncated
/// estimates, ties to the lower asset index. Fewer than m positives give a
/// smaller set; none give the empty set (which later triggers the cash
/// fallback). Returned indices are sorted ascending.
inline std::vector<std::size_t> select_top_m(std::span<const double> truncated, int m) {
    if (m < 1) throw error("select_top_m: m must be >= 1");
    std::vector<std::size_t> positive;
    for (std::size_t j = 0; j < truncated.size(); ++j)
        if (truncated[j] > 0.0) positive.push_back(j);
    const std::size_t take = std::min(positive.size(), static_cast<std::size_t>(m));
    std::partial_sort(positive.begin(), positive.begin() + take, positive.end(),
                      [&](std::size_t a, std::size_t b) {
                          return truncated[a] > truncated[b] ||
                                 (truncated[a] == truncated[b] && a < b);
                      });
    positive.resize(take);
    std::sort(positive.begin(), positive.end());
    return positive;
}

/// Step 5: weight each selected asset by estimate x committee wealth,
/// normalized by the sum. An empty selection (or all-zero products) means no
/// estimate offers growth, so the capital rests in cash with return 1.0.
inline PortfolioVector compute_weights(std::span<const double> truncated,
                                       std::span<const std::size_t> selected,
                                       std::span<const double> committee_wealth) {
    if (committee_wealth.size() != truncated.size())
        throw error("compute_weights: committee wealth size mismatch");
    PortfolioVector b;
    b.weights.assign(truncated.size(), 0.0);
    long double total = 0.0L;
    for (std::size_t j : selected) {
        if (j >= truncated.size()) throw error("compute_weights: selected index out of range");
        b.weights[j] = truncated[j] * committee_wealth[j];
        total += b.weights[j];
    }
    const auto sum = static_cast<double>(total);
    if (sum > 0.0) {
        for (std::size_t j : selected) b.weights[j] /= sum;
        b.cash = 0.0;
    } else {
        std::fill(b.weights.begin(), b.weights.end(), 0.0);
        b.cash = 1.0;
    }
    return b;
}

/// Period growth factor of a portfolio: cash earns exactly 1.0, invested
/// weight j earns the realized relative x_j. Accumulated in extended
/// precision so a uniform portfolio on a flat market returns exactly 1.
inline double portfolio_return(const PortfolioVector& b, std::span<const double> market_vector) {
    if (b.weights.size() != market_vector.size())
        throw error("portfolio_return: dimension mismatch (" + std::to_string(b.weights.size()) +
                    " weights vs " + std::to_string(market_vector.size()) + " relatives)");
    long double acc = b.cash;
    for (std::size_t j = 0; j < market_vector.size(); ++j)
        acc += static_cast<long double>(b.weights[j]) * market_vector[j];
    return static_cast<double>(acc);
}

/// Everything one backtest produces. wealth[0] = 1 and
/// wealth[i+1] = wealth[i] * (return of period i).
struct BacktestLedger {
    std::vector<double> wealth;                        // periods + 1
    std::vector<PortfolioVector> portfolio_history;    // one per period
    std::vector<std::vector<double>> committee_wealth; // d series, periods + 1 each
    std::vector<std::size_t> selection_counts;         // per asset
    std::vector<double> average_weights;               // per asset, mean over all periods
    std::size_t first_algorithmic_period = 0;          // before this: uniform warm-up

    double final_wealth() const { return wealth.back(); }
    std::size_t periods() const { return portfolio_history.size(); }
};

/// The per-period strategy loop over a prebuilt estimate panel and committee
/// wealth trajectories (both independent of m, so an m-sweep reuses them).
/// Until every window size has a training row the strategy holds the
/// uniform portfolio; from panel.first_period on it runs truncate ->
/// select-top-m -> wealth-weighted normalization with cash fallback.
inline BacktestLedger run_backtest(const MarketMatrix& market, const EstimatePanel& panel,
                                   const std::vector<std::vector<double>>& committee_wealth,
                                   int m) {
    if (m < 1) throw error("run_backtest: m must be >= 1");
    const std::size_t T = market.periods();
    const std::size_t d = market.assets();
    if (panel.periods() != T || panel.assets() != d)
        throw error("run_backtest: estimate panel does not match market dimensions");
    if (committee_wealth.size() != d)
        throw error("run_backtest: committee wealth series count mismatch");
    for (const auto& series : committee_wealth)
        if (series.size() != T + 1)
            throw error("run_backtest: committee wealth series length mismatch");

    BacktestLedger ledger;
    ledger.first_algorithmic_period = panel.first_period;
    ledger.committee_wealth = committee_wealth;
    ledger.selection_counts.assign(d, 0);
    ledger.average_weights.assign(d, 0.0);
    ledger.wealth.reserve(T + 1);
    ledger.wealth.push_back(1.0);
    ledger.portfolio_history.reserve(T);

    std::vector<double> wealth_row(d);
    for (std::size_t i = 0; i < T; ++i) {
        PortfolioVector b;
        if (i < panel.first_period) {
            b = PortfolioVector::uniform(d);
        } else {
            const auto truncated = truncate_estimates(std::span(panel.voted[i]));
            const auto selected = select_top_m(truncated, m);
            for (std::size_t j = 0; j < d; ++j) wealth_row[j] = committee_wealth[j][i];
            b = compute_weights(truncated, selected, wealth_row);
            for (std::size_t j : selected) ++ledger.selection_counts[j];
        }
        const double r = portfolio_return(b, market.relatives[i]);
        ledger.wealth.push_back(ledger.wealth.back() * r);
        ledger.portfolio_history.push_back(std::move(b));
    }
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0;
        for (const auto& b : ledger.portfolio_history) sum += b.weights[j];
        ledger.average_weights[j] = sum / static_cast<double>(T);
    }
    return ledger;
}

/// Full backtest: build committees for every asset, derive their wealth
/// trajectories, then fold the per-period algorithm. Deterministic for any
/// thread count.
inline BacktestLedger run_backtest(const MarketMatrix& market, const CommitteeSpec& spec, int m,
                                   int threads = 1) {
    const EstimatePanel panel = build_estimate_panel(market, spec, threads);
    const auto wealth = committee_wealth_series(market, panel);
    return run_backtest(market, panel, wealth, m);
}

} // namespace lolrec
