#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lolrec/committee.hpp"
#include "lolrec/errors.hpp"
#include "lolrec/market_data.hpp"
#include "lolrec/metrics.hpp"
#include "lolrec/portfolio.hpp"

namespace lolrec {

// ---------------------------------------------------------------------------
// benchmarks
// ---------------------------------------------------------------------------

/// Uniform portfolio rebalanced back to 1/d every period.
inline BacktestLedger run_equal_weight_benchmark(const MarketMatrix& market) {
    const std::size_t T = market.periods();
    const std::size_t d = market.assets();
    if (T == 0 || d == 0) throw error("equal-weight benchmark: empty market");

    BacktestLedger ledger;
    ledger.committee_wealth.assign(d, std::vector<double>(T + 1, 1.0));
    ledger.selection_counts.assign(d, 0);
    ledger.average_weights.assign(d, 1.0 / static_cast<double>(d));
    ledger.wealth.reserve(T + 1);
    ledger.wealth.push_back(1.0);
    ledger.portfolio_history.reserve(T);
    for (std::size_t i = 0; i < T; ++i) {
        PortfolioVector b = PortfolioVector::uniform(d);
        const double r = portfolio_return(b, market.relatives[i]);
        ledger.wealth.push_back(ledger.wealth.back() * r);
        ledger.portfolio_history.push_back(std::move(b));
    }
    return ledger;
}

/// Initial allocation held without rebalancing: each position compounds on
/// its own and the weights drift with the market. Empty weights0 = uniform.
inline BacktestLedger run_buy_and_hold_benchmark(const MarketMatrix& market,
                                                 std::span<const double> weights0 = {}) {
    const std::size_t T = market.periods();
    const std::size_t d = market.assets();
    if (T == 0 || d == 0) throw error("buy-and-hold benchmark: empty market");

    std::vector<double> position(d);
    if (weights0.empty()) {
        position.assign(d, 1.0 / static_cast<double>(d));
    } else {
        if (weights0.size() != d) throw error("buy-and-hold benchmark: weights0 size mismatch");
        long double sum = 0.0L;
        for (double w : weights0) {
            if (w < 0.0) throw error("buy-and-hold benchmark: negative initial weight");
            sum += w;
        }
        if (std::abs(static_cast<double>(sum) - 1.0) > 1e-9)
            throw error("buy-and-hold benchmark: initial weights must sum to 1");
        std::copy(weights0.begin(), weights0.end(), position.begin());
    }

    BacktestLedger ledger;
    ledger.committee_wealth.assign(d, std::vector<double>(T + 1, 1.0));
    ledger.selection_counts.assign(d, 0);
    ledger.average_weights.assign(d, 0.0);
    ledger.wealth.reserve(T + 1);
    ledger.wealth.push_back(1.0);
    ledger.portfolio_history.reserve(T);

    for (std::size_t i = 0; i < T; ++i) {
        long double total = 0.0L;
        for (double p : position) total += p;
        const auto value = static_cast<double>(total);
        PortfolioVector b;
        if (value > 0.0) {
            b.weights.resize(d);
            for (std::size_t j = 0; j < d; ++j) b.weights[j] = position[j] / value;
        } else {
            b = PortfolioVector::all_cash(d);   // everything went to zero
        }
        const double r = portfolio_return(b, market.relatives[i]);
        ledger.wealth.push_back(ledger.wealth.back() * r);
        ledger.portfolio_history.push_back(std::move(b));
        for (std::size_t j = 0; j < d; ++j) position[j] *= market.relatives[i][j];
    }
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0;
        for (const auto& b : ledger.portfolio_history) sum += b.weights[j];
        ledger.average_weights[j] = sum / static_cast<double>(T);
    }
    return ledger;
}

// ---------------------------------------------------------------------------
// m-sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    int m;
    double final_wealth;
    double std_period_returns;
};

/// One backtest per m over a shared estimate panel and committee wealth
/// trajectories; only the selection and weighting steps depend on m.
inline std::vector<SweepRow> sweep_m(const MarketMatrix& market, const EstimatePanel& panel,
                                     const std::vector<std::vector<double>>& committee_wealth,
                                     std::vector<int> m_values) {
    if (m_values.empty()) throw error("sweep_m: no m values");
    std::sort(m_values.begin(), m_values.end());
    m_values.erase(std::unique(m_values.begin(), m_values.end()), m_values.end());
    std::vector<SweepRow> rows;
    rows.reserve(m_values.size());
    for (int m : m_values) {
        const auto ledger = run_backtest(market, panel, committee_wealth, m);
        const auto stats = period_return_stats(ledger.wealth);
        rows.push_back({m, ledger.final_wealth(), stats.stddev});
    }
    return rows;
}

inline std::vector<SweepRow> sweep_m(const MarketMatrix& market, const CommitteeSpec& spec,
                                     std::vector<int> m_values, int threads = 1) {
    const EstimatePanel panel = build_estimate_panel(market, spec, threads);
    const auto wealth = committee_wealth_series(market, panel);
    return sweep_m(market, panel, wealth, std::move(m_values));
}

// ---------------------------------------------------------------------------
// config and flag-value parsing
// ---------------------------------------------------------------------------

/// Integer set syntax: "4", "1..5" (inclusive), "1,2,7", or a mix like
/// "1..3,8". Returns a sorted, deduplicated set.
inline std::vector<int> parse_int_set(std::string_view text) {
    std::vector<int> values;
    auto parse_int = [&](std::string_view token) {
        int v = 0;
        auto t = detail::trim(token);
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc{} || ptr != t.data() + t.size())
            throw error("bad integer '" + std::string(token) + "' in set '" + std::string(text) + "'");
        return v;
    };
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t comma = text.find(',', start);
        if (comma == std::string_view::npos) comma = text.size();
        std::string_view token = text.substr(start, comma - start);
        if (detail::trim(token).empty())
            throw error("empty entry in integer set '" + std::string(text) + "'");
        if (auto dots = token.find(".."); dots != std::string_view::npos) {
            const int lo = parse_int(token.substr(0, dots));
            const int hi = parse_int(token.substr(dots + 2));
            if (lo > hi)
                throw error("descending range '" + std::string(token) + "'");
            for (int v = lo; v <= hi; ++v) values.push_back(v);
        } else {
            values.push_back(parse_int(token));
        }
        start = comma + 1;
    }
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    return values;
}

enum class DataKind { prices, relatives };

struct RunConfig {
    std::filesystem::path data_path;
    DataKind data_kind = DataKind::prices;
    DateRange date_range;
    std::vector<int> k_values{1, 2, 3};
    std::vector<int> w_values{1, 2, 3};
    Voting voting = Voting::average;
    int m = 10;
    std::vector<int> sweep;                 // empty = no sweep
    double years_divisor = 252.0;
    std::filesystem::path output_dir = ".";
    int threads = 1;
    double initial_capital = 1.0;
    bool benchmark_equal = true;
    bool benchmark_bnh = true;
    bool dump_estimates = false;

    CommitteeSpec committee() const { return {k_values, w_values, voting}; }

    void validate() const {
        if (data_path.empty()) throw error("RunConfig: no data path");
        committee().validate();
        if (m < 1) throw error("RunConfig: m must be >= 1");
        for (int v : sweep)
            if (v < 1) throw error("RunConfig: sweep m values must be >= 1");
        if (!(years_divisor > 0.0)) throw error("RunConfig: years divisor must be > 0");
        if (threads < 1) throw error("RunConfig: threads must be >= 1");
        if (!(initial_capital > 0.0)) throw error("RunConfig: initial capital must be > 0");
    }
};

// ---------------------------------------------------------------------------
// output files
// ---------------------------------------------------------------------------

/// Shortest decimal that round-trips the exact double, so identical runs
/// produce byte-identical files.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error("cannot write '" + path.string() + "'");
    return out;
}

} // namespace detail

/// wealth.csv: one row per completed period count (row 0 = starting capital,
/// no date). Wealth columns are scaled by the initial capital.
inline void write_wealth_csv(const std::filesystem::path& path, const MarketMatrix& market,
                             const BacktestLedger& strategy, const BacktestLedger* equal,
                             const BacktestLedger* bnh, double initial_capital = 1.0) {
    auto out = detail::open_output(path);
    out << "period,date,S_lolrec";
    if (equal) out << ",S_equal";
    if (bnh) out << ",S_bnh";
    out << "\n";
    for (std::size_t i = 0; i < strategy.wealth.size(); ++i) {
        out << i << "," << (i == 0 ? "" : market.dates[i - 1]) << ","
            << format_double(strategy.wealth[i] * initial_capital);
        if (equal) out << "," << format_double(equal->wealth[i] * initial_capital);
        if (bnh) out << "," << format_double(bnh->wealth[i] * initial_capital);
        out << "\n";
    }
}

/// weights.csv: the portfolio vector used in each trading period, dated by
/// the period's end date.
inline void write_weights_csv(const std::filesystem::path& path, const MarketMatrix& market,
                              const BacktestLedger& ledger) {
    auto out = detail::open_output(path);
    out << "period,date,cash";
    for (const auto& t : market.tickers) out << "," << t;
    out << "\n";
    for (std::size_t i = 0; i < ledger.portfolio_history.size(); ++i) {
        const auto& b = ledger.portfolio_history[i];
        out << i << "," << market.dates[i] << "," << format_double(b.cash);
        for (double w : b.weights) out << "," << format_double(w);
        out << "\n";
    }
}

/// committee_wealth.csv: every committee's wealth trajectory, one column per
/// ticker; row i is the wealth after i completed periods.
inline void write_committee_wealth_csv(const std::filesystem::path& path,
                                       const MarketMatrix& market, const BacktestLedger& ledger) {
    auto out = detail::open_output(path);
    out << "period,date";
    for (const auto& t : market.tickers) out << "," << t;
    out << "\n";
    const std::size_t n = ledger.wealth.size();
    for (std::size_t i = 0; i < n; ++i) {
        out << i << "," << (i == 0 ? "" : market.dates[i - 1]);
        for (const auto& series : ledger.committee_wealth) out << "," << format_double(series[i]);
        out << "\n";
    }
}

inline void write_committees_csv(const std::filesystem::path& path,
                                 std::span<const CommitteeReportRow> rows) {
    auto out = detail::open_output(path);
    out << "ticker,committee_wealth,buy_and_hold_wealth,relative_performance,"
           "average_weight,times_selected\n";
    for (const auto& row : rows)
        out << row.ticker << "," << format_double(row.committee_wealth) << ","
            << format_double(row.buy_and_hold_wealth) << ","
            << format_double(row.relative_performance) << ","
            << format_double(row.average_weight) << "," << row.times_selected << "\n";
}

inline void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows) {
    auto out = detail::open_output(path);
    out << "m,final_wealth,std_period_returns\n";
    for (const auto& row : rows)
        out << row.m << "," << format_double(row.final_wealth) << ","
            << format_double(row.std_period_returns) << "\n";
}

inline void write_estimates_csv(const std::filesystem::path& path,
                                std::span<const ExpertEstimate> estimates) {
    auto out = detail::open_output(path);
    out << "period,ticker,k,w,estimate\n";
    for (const auto& e : estimates)
        out << e.period << "," << e.asset << "," << e.spec.k << "," << e.spec.w << ","
            << format_double(e.value) << "\n";
}

namespace detail {

inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline std::string percent1(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f%%", v * 100.0);
    return buf;
}

} // namespace detail

/// report.csv: the same summary as report.txt, machine-readable and in full
/// double precision.
inline void write_report_csv(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, PerformanceReport>>& columns) {
    auto out = detail::open_output(path);
    out << "metric";
    for (const auto& [name, report] : columns) out << "," << name;
    out << "\n";
    const std::vector<std::pair<std::string, double PerformanceReport::*>> fields = {
        {"final_wealth", &PerformanceReport::final_wealth},
        {"aay_gross", &PerformanceReport::aay_gross},
        {"aay_net", &PerformanceReport::aay_net},
        {"min_capital", &PerformanceReport::min_capital},
        {"worst_period_return", &PerformanceReport::worst_period_return},
        {"std_period_returns", &PerformanceReport::std_period_returns},
        {"mean_period_return", &PerformanceReport::mean_period_return},
        {"years", &PerformanceReport::years}};
    for (const auto& [label, member] : fields) {
        out << label;
        for (const auto& [name, report] : columns) out << "," << format_double(report.*member);
        out << "\n";
    }
}

/// report.txt: aligned per-strategy summary table. AAY appears in both the
/// gross (growth factor per year) and net (rate of return) conventions.
inline void write_report_txt(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, PerformanceReport>>& columns) {
    auto out = detail::open_output(path);
    const std::vector<std::string> labels = {
        "Final wealth",           "AAY gross (S^(1/N))",   "AAY net (gross - 1)",
        "Minimum of capital",     "Worst 1-period return", "Std of 1-period returns",
        "Mean 1-period return",   "Years (N)"};
    auto cell = [](const PerformanceReport& r, std::size_t metric) -> std::string {
        switch (metric) {
            case 0: return detail::fixed6(r.final_wealth);
            case 1: return detail::fixed6(r.aay_gross) + " (" + detail::percent1(r.aay_gross) + ")";
            case 2: return detail::fixed6(r.aay_net) + " (" + detail::percent1(r.aay_net) + ")";
            case 3: return detail::fixed6(r.min_capital);
            case 4: return detail::percent1(r.worst_period_return);
            case 5: return detail::fixed6(r.std_period_returns);
            case 6: return detail::fixed6(r.mean_period_return);
            default: return detail::fixed6(r.years);
        }
    };

    std::size_t label_width = 0;
    for (const auto& l : labels) label_width = std::max(label_width, l.size());
    std::vector<std::size_t> col_width(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        col_width[c] = columns[c].first.size();
        for (std::size_t metric = 0; metric < labels.size(); ++metric)
            col_width[c] = std::max(col_width[c], cell(columns[c].second, metric).size());
    }

    auto pad = [&out](const std::string& s, std::size_t width) {
        out << s << std::string(width - s.size() + 2, ' ');
    };
    pad("", label_width);
    for (std::size_t c = 0; c < columns.size(); ++c) pad(columns[c].first, col_width[c]);
    out << "\n";
    for (std::size_t metric = 0; metric < labels.size(); ++metric) {
        pad(labels[metric], label_width);
        for (std::size_t c = 0; c < columns.size(); ++c)
            pad(cell(columns[c].second, metric), col_width[c]);
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// top-level run
// ---------------------------------------------------------------------------

/// Load the data, run the configured strategy plus benchmarks, and write all
/// outputs into config.output_dir. Returns 0 on success; errors propagate as
/// exceptions for the CLI to report.
inline int run(const RunConfig& config, std::ostream& log = std::cout) {
    config.validate();

    const MarketMatrix market = config.data_kind == DataKind::prices
        ? to_market_matrix(load_price_table(config.data_path, config.date_range))
        : load_relatives(config.data_path, config.date_range);
    log << "loaded " << config.data_path.string() << ": " << market.assets() << " assets, "
        << market.periods() << " periods\n";

    const CommitteeSpec spec = config.committee();
    std::vector<ExpertEstimate> dump;
    const EstimatePanel panel =
        build_estimate_panel(market, spec, config.threads, config.dump_estimates ? &dump : nullptr);
    const auto committee_wealth = committee_wealth_series(market, panel);

    const BacktestLedger strategy = run_backtest(market, panel, committee_wealth, config.m);
    std::optional<BacktestLedger> equal, bnh;
    if (config.benchmark_equal) equal = run_equal_weight_benchmark(market);
    if (config.benchmark_bnh) bnh = run_buy_and_hold_benchmark(market);

    std::filesystem::create_directories(config.output_dir);
    auto in_dir = [&](const char* name) { return config.output_dir / name; };

    write_wealth_csv(in_dir("wealth.csv"), market, strategy, equal ? &*equal : nullptr,
                     bnh ? &*bnh : nullptr, config.initial_capital);
    write_weights_csv(in_dir("weights.csv"), market, strategy);
    write_committees_csv(in_dir("committees.csv"), committee_report(strategy, market));
    write_committee_wealth_csv(in_dir("committee_wealth.csv"), market, strategy);

    std::vector<std::pair<std::string, PerformanceReport>> report_columns;
    auto scaled_report = [&](const BacktestLedger& ledger) {
        auto report = make_performance_report(ledger.wealth, config.years_divisor);
        report.final_wealth *= config.initial_capital;
        report.min_capital *= config.initial_capital;
        return report;
    };
    report_columns.emplace_back("LOLREC(m=" + std::to_string(config.m) + ")",
                                scaled_report(strategy));
    if (equal) report_columns.emplace_back("EqualWeight", scaled_report(*equal));
    if (bnh) report_columns.emplace_back("BuyAndHold", scaled_report(*bnh));
    write_report_txt(in_dir("report.txt"), report_columns);
    write_report_csv(in_dir("report.csv"), report_columns);

    if (!config.sweep.empty())
        write_sweep_csv(in_dir("sweep.csv"), sweep_m(market, panel, committee_wealth, config.sweep));
    if (config.dump_estimates) write_estimates_csv(in_dir("estimates.csv"), dump);

    log << "LOLREC(m=" << config.m << ", " << spec.size() << " experts, " << to_string(config.voting)
        << " voting): final wealth " << detail::fixed6(strategy.final_wealth() * config.initial_capital)
        << ", AAY gross " << detail::fixed6(report_columns[0].second.aay_gross) << ", net "
        << detail::percent1(report_columns[0].second.aay_net) << "\n";
    if (equal)
        log << "equal-weight benchmark: final wealth "
            << detail::fixed6(equal->final_wealth() * config.initial_capital) << "\n";
    if (bnh)
        log << "buy-and-hold benchmark: final wealth "
            << detail::fixed6(bnh->final_wealth() * config.initial_capital) << "\n";
    log << "outputs in " << config.output_dir.string() << "\n";
    return 0;
}

} // namespace lolrec
