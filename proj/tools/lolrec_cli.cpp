// Backtest CLI: load a price (or relatives) CSV, run the committee strategy
// against the benchmarks, and write the result files into --output.

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "lolrec/lolrec.hpp"

int main(int argc, char** argv) {
    CLI::App app{"local linear regression ensemble committee backtester"};

    std::string data, data_kind = "prices", k = "1..3", w = "1..3", voting = "average";
    std::string m = "10", sweep, benchmarks = "equal,bnh", from, to;
    lolrec::RunConfig config;

    app.add_option("--data", data, "input CSV: date column plus one column per ticker")->required();
    app.add_option("--data-kind", data_kind, "prices|relatives (default prices)")
        ->check(CLI::IsMember({"prices", "relatives"}));
    app.add_option("--k", k, "neighbour counts, e.g. 1..10 or 1,3,5 (default 1..3)");
    app.add_option("--w", w, "window sizes, e.g. 1..5 (default 1..3)");
    app.add_option("--voting", voting, "average|median|mode (default average)")
        ->check(CLI::IsMember({"average", "median", "mode"}));
    app.add_option("--m", m, "number of assets to select; a range here runs a sweep (default 10)");
    app.add_option("--sweep-m", sweep, "m values to sweep, e.g. 1..50; writes sweep.csv");
    app.add_option("--years-divisor", config.years_divisor,
                   "trading periods per year for AAY (default 252)");
    app.add_option("--output", config.output_dir, "output directory (default .)");
    app.add_option("--threads", config.threads, "worker threads; results identical for any count");
    app.add_option("--initial-capital", config.initial_capital, "starting capital (default 1)");
    app.add_option("--benchmarks", benchmarks, "comma list of equal,bnh or none (default both)");
    app.add_option("--from", from, "first date to include (YYYY-MM-DD)");
    app.add_option("--to", to, "last date to include (YYYY-MM-DD)");
    app.add_flag("--dump-estimates", config.dump_estimates,
                 "also write every raw expert estimate to estimates.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        config.data_path = data;
        config.data_kind = data_kind == "prices" ? lolrec::DataKind::prices
                                                 : lolrec::DataKind::relatives;
        config.k_values = lolrec::parse_int_set(k);
        config.w_values = lolrec::parse_int_set(w);
        config.voting = lolrec::voting_from_string(voting);
        if (!from.empty()) config.date_range.from = from;
        if (!to.empty()) config.date_range.to = to;

        const auto m_values = lolrec::parse_int_set(m);
        config.m = m_values.front();
        if (m_values.size() > 1) config.sweep = m_values;
        if (!sweep.empty()) config.sweep = lolrec::parse_int_set(sweep);

        config.benchmark_equal = config.benchmark_bnh = false;
        if (benchmarks != "none") {
            std::size_t start = 0;
            while (start <= benchmarks.size()) {
                std::size_t comma = benchmarks.find(',', start);
                if (comma == std::string::npos) comma = benchmarks.size();
                const std::string name = benchmarks.substr(start, comma - start);
                if (name == "equal") config.benchmark_equal = true;
                else if (name == "bnh") config.benchmark_bnh = true;
                else if (!name.empty()) throw lolrec::error("unknown benchmark '" + name + "'");
                start = comma + 1;
            }
        }

        return lolrec::run(config);
    } catch (const lolrec::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 2;
    }
}
