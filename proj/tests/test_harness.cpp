#include <catch2/catch_amalgamated.hpp>

#include <charconv>
#include <filesystem>
#include <string>
#include <vector>

#include "lolrec/harness.hpp"
#include "test_util.hpp"

using namespace lolrec;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("equal-weight benchmark rebalances to uniform every period") {
    SECTION("one period, two assets: the mean of the relatives") {
        const auto market = testutil::make_market({{1.2, 0.8}});
        const auto ledger = run_equal_weight_benchmark(market);
        REQUIRE(ledger.wealth.size() == 2);
        CHECK(ledger.wealth[1] == 1.0);
    }
    SECTION("a constant market ends at exactly 1") {
        for (std::size_t d : {1u, 3u, 4u}) {
            const auto ledger = run_equal_weight_benchmark(testutil::constant_market(25, d, 1.0));
            CHECK(ledger.final_wealth() == 1.0);
        }
    }
    SECTION("wealth recursion holds") {
        testutil::Rng rng(17);
        const auto market = testutil::random_market(rng, 40, 5);
        const auto ledger = run_equal_weight_benchmark(market);
        double product = 1.0;
        for (std::size_t i = 0; i < 40; ++i)
            product *= portfolio_return(ledger.portfolio_history[i], market.relatives[i]);
        CHECK_THAT(ledger.final_wealth(), WithinRel(product, 1e-12));
    }
}

TEST_CASE("buy-and-hold benchmark lets positions drift") {
    SECTION("a single asset compounds its own relatives") {
        testutil::Rng rng(23);
        const auto market = testutil::random_market(rng, 30, 1);
        const auto ledger = run_buy_and_hold_benchmark(market);
        double product = 1.0;
        for (std::size_t i = 0; i < 30; ++i) product *= market.relatives[i][0];
        CHECK_THAT(ledger.final_wealth(), WithinRel(product, 1e-12));
    }
    SECTION("drift distinguishes it from rebalancing") {
        // two assets, relatives (2, 0.5) twice: buy-and-hold (4 + 0.25)/2,
        // equal-weight 1.25^2
        const auto market = testutil::make_market({{2.0, 0.5}, {2.0, 0.5}});
        const auto bnh = run_buy_and_hold_benchmark(market);
        const auto equal = run_equal_weight_benchmark(market);
        CHECK_THAT(bnh.final_wealth(), WithinRel(2.125, 1e-12));
        CHECK_THAT(equal.final_wealth(), WithinRel(1.5625, 1e-12));
    }
    SECTION("an explicit initial allocation") {
        const auto market = testutil::make_market({{2.0, 1.0}});
        const auto ledger = run_buy_and_hold_benchmark(market, std::vector{1.0, 0.0});
        CHECK(ledger.final_wealth() == 2.0);
    }
    SECTION("constant market ends at exactly 1") {
        const auto ledger = run_buy_and_hold_benchmark(testutil::constant_market(20, 3, 1.0));
        CHECK(ledger.final_wealth() == 1.0);
    }
    SECTION("initial weights are validated") {
        const auto market = testutil::make_market({{1.0, 1.0}});
        CHECK_THROWS_AS(run_buy_and_hold_benchmark(market, std::vector{0.5}), error);
        CHECK_THROWS_AS(run_buy_and_hold_benchmark(market, std::vector{0.9, 0.3}), error);
        CHECK_THROWS_AS(run_buy_and_hold_benchmark(market, std::vector{1.5, -0.5}), error);
    }
}

TEST_CASE("sweep_m reuses one estimate panel across m values") {
    testutil::Rng rng(3333);
    const auto market = testutil::random_market(rng, 60, 4);
    const CommitteeSpec spec{{1, 2}, {1, 2}, Voting::average};

    SECTION("a singleton sweep equals the plain backtest") {
        const auto rows = sweep_m(market, spec, {3});
        REQUIRE(rows.size() == 1);
        const auto ledger = run_backtest(market, spec, 3);
        CHECK(testutil::bit_equal(rows[0].final_wealth, ledger.final_wealth()));
        CHECK(testutil::bit_equal(rows[0].std_period_returns,
                                  period_return_stats(ledger.wealth).stddev));
    }
    SECTION("rows come back sorted and deduplicated") {
        const auto rows = sweep_m(market, spec, {4, 1, 4, 2});
        REQUIRE(rows.size() == 3);
        CHECK(rows[0].m == 1);
        CHECK(rows[1].m == 2);
        CHECK(rows[2].m == 4);
    }
    SECTION("m at and beyond the asset count are identical") {
        const auto rows = sweep_m(market, spec, {4, 8, 14});
        REQUIRE(rows.size() == 3);
        CHECK(testutil::bit_equal(rows[0].final_wealth, rows[1].final_wealth));
        CHECK(testutil::bit_equal(rows[0].final_wealth, rows[2].final_wealth));
        CHECK(testutil::bit_equal(rows[0].std_period_returns, rows[2].std_period_returns));
    }
    SECTION("no m values is an error") {
        CHECK_THROWS_AS(sweep_m(market, spec, {}), error);
    }
}

TEST_CASE("parse_int_set understands ranges and lists") {
    CHECK(parse_int_set("4") == std::vector<int>{4});
    CHECK(parse_int_set("1..5") == std::vector<int>{1, 2, 3, 4, 5});
    CHECK(parse_int_set("1,2,7") == std::vector<int>{1, 2, 7});
    CHECK(parse_int_set("1..3,8") == std::vector<int>{1, 2, 3, 8});
    CHECK(parse_int_set("5,1..3,2") == std::vector<int>{1, 2, 3, 5});

    CHECK_THROWS_AS(parse_int_set(""), error);
    CHECK_THROWS_AS(parse_int_set("a..b"), error);
    CHECK_THROWS_AS(parse_int_set("5..1"), error);
    CHECK_THROWS_AS(parse_int_set("1,,3"), error);
    CHECK_THROWS_AS(parse_int_set("1.5"), error);
}

TEST_CASE("format_double round-trips exactly") {
    for (double v : {0.1, 1.0 / 3.0, 1.4378, 5.09e9, 1e-300, 0.0, -17.25}) {
        const auto text = format_double(v);
        double parsed = 0.0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), parsed);
        REQUIRE(ec == std::errc{});
        CHECK(testutil::bit_equal(parsed, v));
    }
    CHECK(format_double(1.0) == "1");
}

namespace {

RunConfig smoke_config(const std::filesystem::path& out) {
    RunConfig config;
    auto dir = testutil::scratch_dir("harness");
    config.data_path = testutil::write_file(dir / "prices.csv", testutil::prices_csv(40, 3));
    config.k_values = {1, 2};
    config.w_values = {1, 2};
    config.voting = Voting::average;
    config.m = 2;
    config.output_dir = out;
    return config;
}

} // namespace

TEST_CASE("run() writes the full output set") {
    std::ostringstream log;
    auto out = testutil::scratch_dir("harness_out_a");
    auto config = smoke_config(out);
    config.sweep = {1, 2, 3};
    config.dump_estimates = true;
    REQUIRE(lolrec::run(config, log) == 0);

    CHECK(std::filesystem::exists(out / "wealth.csv"));
    CHECK(std::filesystem::exists(out / "weights.csv"));
    CHECK(std::filesystem::exists(out / "committees.csv"));
    CHECK(std::filesystem::exists(out / "committee_wealth.csv"));
    CHECK(std::filesystem::exists(out / "report.txt"));
    CHECK(std::filesystem::exists(out / "report.csv"));
    CHECK(std::filesystem::exists(out / "sweep.csv"));
    CHECK(std::filesystem::exists(out / "estimates.csv"));

    const auto committee_wealth = testutil::read_file(out / "committee_wealth.csv");
    CHECK_THAT(committee_wealth, ContainsSubstring("period,date,T0,T1,T2"));
    CHECK(std::count(committee_wealth.begin(), committee_wealth.end(), '\n') == 1 + 40);

    const auto report_csv = testutil::read_file(out / "report.csv");
    CHECK_THAT(report_csv, ContainsSubstring("metric,LOLREC(m=2),EqualWeight,BuyAndHold"));
    CHECK_THAT(report_csv, ContainsSubstring("aay_gross,"));
    CHECK_THAT(report_csv, ContainsSubstring("worst_period_return,"));

    const auto wealth = testutil::read_file(out / "wealth.csv");
    CHECK_THAT(wealth, ContainsSubstring("period,date,S_lolrec,S_equal,S_bnh"));
    // header + initial row + one row per period (40 prices -> 39 periods)
    CHECK(std::count(wealth.begin(), wealth.end(), '\n') == 1 + 39 + 1);

    const auto sweep = testutil::read_file(out / "sweep.csv");
    CHECK_THAT(sweep, ContainsSubstring("m,final_wealth,std_period_returns"));
    CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 4);

    const auto report = testutil::read_file(out / "report.txt");
    CHECK_THAT(report, ContainsSubstring("AAY gross"));
    CHECK_THAT(report, ContainsSubstring("LOLREC(m=2)"));
    CHECK_THAT(report, ContainsSubstring("EqualWeight"));
    CHECK_THAT(report, ContainsSubstring("BuyAndHold"));

    CHECK_THAT(log.str(), ContainsSubstring("final wealth"));
}

TEST_CASE("run() is byte-deterministic, whatever the thread count") {
    auto out1 = testutil::scratch_dir("harness_out_b1");
    auto out2 = testutil::scratch_dir("harness_out_b2");
    auto c1 = smoke_config(out1);
    auto c2 = smoke_config(out2);
    c2.threads = 4;
    std::ostringstream sink;
    REQUIRE(lolrec::run(c1, sink) == 0);
    REQUIRE(lolrec::run(c2, sink) == 0);
    for (const char* name : {"wealth.csv", "weights.csv", "committees.csv",
                             "committee_wealth.csv", "report.txt", "report.csv"})
        CHECK(testutil::read_file(out1 / name) == testutil::read_file(out2 / name));
}

TEST_CASE("run() honors data-kind and benchmark selection") {
    std::ostringstream sink;
    auto dir = testutil::scratch_dir("harness");

    SECTION("relatives input skips the ratio conversion") {
        std::string text = "date,X,Y\n";
        for (int i = 0; i < 25; ++i)
            text += testutil::iso_date(static_cast<std::size_t>(i)) + ",1.01,0.99\n";
        auto out = testutil::scratch_dir("harness_out_c");
        RunConfig config;
        config.data_path = testutil::write_file(dir / "relatives.csv", text);
        config.data_kind = DataKind::relatives;
        config.k_values = {1};
        config.w_values = {1, 2};
        config.m = 1;
        config.output_dir = out;
        REQUIRE(lolrec::run(config, sink) == 0);
        // 25 relatives rows = 25 periods -> 26 wealth rows
        const auto wealth = testutil::read_file(out / "wealth.csv");
        CHECK(std::count(wealth.begin(), wealth.end(), '\n') == 1 + 26);
    }
    SECTION("disabling benchmarks drops their columns") {
        auto out = testutil::scratch_dir("harness_out_d");
        auto config = smoke_config(out);
        config.benchmark_equal = false;
        config.benchmark_bnh = false;
        REQUIRE(lolrec::run(config, sink) == 0);
        const auto wealth = testutil::read_file(out / "wealth.csv");
        CHECK_THAT(wealth, ContainsSubstring("period,date,S_lolrec\n"));
    }
    SECTION("config validation rejects nonsense") {
        auto config = smoke_config(testutil::scratch_dir("harness_out_e"));
        config.m = 0;
        CHECK_THROWS_AS(lolrec::run(config, sink), error);
        config = smoke_config(testutil::scratch_dir("harness_out_e"));
        config.threads = 0;
        CHECK_THROWS_AS(lolrec::run(config, sink), error);
        config = smoke_config(testutil::scratch_dir("harness_out_e"));
        config.years_divisor = -1.0;
        CHECK_THROWS_AS(lolrec::run(config, sink), error);
     }
}
