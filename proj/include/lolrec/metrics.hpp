#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lolrec/errors.hpp"
#include "lolrec/market_data.hpp"
#include "lolrec/portfolio.hpp"

namespace lolrec {

/// Average annual yield. Gross is the per-year growth factor S^(1/N); net
/// subtracts the principal. Reports carry both because the two conventions
/// are easy to confuse (a gross 2.762 is a net +176.2%).
struct AayResult {
    double gross;   // final_wealth^(1/years)
    double net;     // gross - 1
};

inline AayResult aay(double final_wealth, double years) {
    if (!(final_wealth > 0.0)) throw error("aay: final wealth must be > 0");
    if (!(years > 0.0)) throw error("aay: years must be > 0");
    const double gross = std::pow(final_wealth, 1.0 / years);
    return {gross, gross - 1.0};
}

struct PeriodReturnStats {
    double worst;        // min(S_i / S_{i-1}) - 1, a signed fraction
    double stddev;       // population std of the per-period returns
    double mean;
    double min_capital;  // min over the whole wealth series, S_0 included
};

inline PeriodReturnStats period_return_stats(std::span<const double> wealth) {
    if (wealth.size() < 2) throw error("period_return_stats: need at least 2 wealth points");
    const std::size_t n = wealth.size() - 1;
    std::vector<double> returns(n);
    double min_capital = wealth[0];
    for (std::size_t i = 0; i < n; ++i) {
        returns[i] = wealth[i + 1] / wealth[i];
        min_capital = std::min(min_capital, wealth[i + 1]);
    }
    double sum = 0.0;
    double worst = returns[0];
    for (double r : returns) {
        sum += r;
        worst = std::min(worst, r);
    }
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (double r : returns) sq += (r - mean) * (r - mean);
    const double stddev = std::sqrt(sq / static_cast<double>(n));
    return {worst - 1.0, stddev, mean, min_capital};
}

struct PerformanceReport {
    double final_wealth;
    double aay_gross;
    double aay_net;
    double min_capital;
    double worst_period_return;
    double std_period_returns;
    double mean_period_return;
    double years;
};

/// years = periods / years_divisor (252 trading days per year for daily
/// data). A non-positive final wealth leaves the AAY fields NaN.
inline PerformanceReport make_performance_report(std::span<const double> wealth,
                                                 double years_divisor) {
    if (!(years_divisor > 0.0)) throw error("make_performance_report: years divisor must be > 0");
    const auto stats = period_return_stats(wealth);
    const double years = static_cast<double>(wealth.size() - 1) / years_divisor;
    const double final_wealth = wealth.back();
    double gross = std::numeric_limits<double>::quiet_NaN();
    double net = std::numeric_limits<double>::quiet_NaN();
    if (final_wealth > 0.0) {
        const auto yield = aay(final_wealth, years);
        gross = yield.gross;
        net = yield.net;
    }
    return {final_wealth, gross,      net,        stats.min_capital,
            stats.worst, stats.stddev, stats.mean, years};
}

/// One row of the per-committee comparison table.
struct CommitteeReportRow {
    std::string ticker;
    double committee_wealth;      // S_C at the end of the run
    double buy_and_hold_wealth;   // product of all the asset's relatives
    double relative_performance;  // S_C / S_BNH
    double average_weight;
    std::size_t times_selected;
};

inline std::vector<CommitteeReportRow> committee_report(const BacktestLedger& ledger,
                                                        const MarketMatrix& market) {
    const std::size_t d = market.assets();
    if (ledger.committee_wealth.size() != d || ledger.average_weights.size() != d)
        throw error("committee_report: ledger does not match market dimensions");
    std::vector<CommitteeReportRow> rows;
    rows.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
        double bnh = 1.0;
        for (std::size_t i = 0; i < market.periods(); ++i) bnh *= market.relatives[i][j];
        const double sc = ledger.committee_wealth[j].back();
        rows.push_back({market.tickers[j], sc, bnh, sc / bnh, ledger.average_weights[j],
                        ledger.selection_counts[j]});
    }
    return rows;
}

} // namespace lolrec
