#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lolrec/errors.hpp"

namespace lolrec {

/// Adjusted closing prices: n trading days x d assets, all strictly positive,
/// dates strictly increasing, no missing cells.
struct PriceTable {
    std::vector<std::string> dates;               // ISO-8601, one per row
    std::vector<std::string> tickers;             // d column names, unique
    std::vector<std::vector<double>> prices;      // n rows x d

    std::size_t rows() const { return prices.size(); }
    std::size_t assets() const { return tickers.size(); }
};

/// Price relatives x[i][j] = prices[i+1][j] / prices[i][j]: the per-period
/// growth factor of capital invested in asset j. Entries are >= 0 and finite;
/// zero means total loss, which the model allows.
struct MarketMatrix {
    std::vector<std::vector<double>> relatives;   // (n-1) rows x d
    std::vector<std::string> tickers;
    std::vector<std::string> dates;               // end date of each period

    std::size_t periods() const { return relatives.size(); }
    std::size_t assets() const { return tickers.size(); }

    /// Copy of one asset's full relative series (column j).
    std::vector<double> asset_series(std::size_t j) const {
        std::vector<double> s;
        s.reserve(relatives.size());
        for (const auto& row : relatives) s.push_back(row[j]);
        return s;
    }
};

/// Inclusive [from, to] filter on ISO-8601 date strings; unset bounds are open.
struct DateRange {
    std::optional<std::string> from;
    std::optional<std::string> to;

    bool contains(std::string_view date) const {
        if (from && date < *from) return false;
        if (to && date > *to) return false;
        return true;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            break;
        }
        cells.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return cells;
}

inline bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

/// Strict YYYY-MM-DD. Lexicographic order on valid dates equals calendar order.
inline bool is_iso_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    if (!all_digits(s.substr(0, 4)) || !all_digits(s.substr(5, 2)) || !all_digits(s.substr(8, 2)))
        return false;
    int month = (s[5] - '0') * 10 + (s[6] - '0');
    int day = (s[8] - '0') * 10 + (s[9] - '0');
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

inline double parse_cell(std::string_view cell, const std::filesystem::path& path,
                         std::size_t line_no, const std::string& column) {
    auto where = [&] {
        std::ostringstream os;
        os << path.string() << ":" << line_no << " column '" << column << "'";
        return os.str();
    };
    if (cell.empty())
        throw data_error("missing cell at " + where());
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size())
        throw data_error("unparseable number '" + std::string(cell) + "' at " + where());
    return value;
}

struct RawTable {
    std::vector<std::string> dates;
    std::vector<std::string> tickers;
    std::vector<std::vector<double>> values;
};

/// Shared reader for both price and relatives files: header `date,T1,T2,...`,
/// one ISO date plus d numeric cells per row, restricted to `range`.
inline RawTable read_csv_table(const std::filesystem::path& path, const DateRange& range) {
    std::ifstream in(path);
    if (!in)
        throw data_error("cannot open '" + path.string() + "'");

    RawTable table;
    std::string line;
    std::size_t line_no = 0;

    // header
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 &&
            static_cast<unsigned char>(line[0]) == 0xEF &&
            static_cast<unsigned char>(line[1]) == 0xBB &&
            static_cast<unsigned char>(line[2]) == 0xBF)
            line.erase(0, 3);   // UTF-8 BOM
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        std::string first(cells[0]);
        std::transform(first.begin(), first.end(), first.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (first != "date")
            throw data_error(path.string() + ":" + std::to_string(line_no) +
                             ": header must start with 'date', got '" + std::string(cells[0]) + "'");
        if (cells.size() < 2)
            throw data_error(path.string() + ": header names no tickers");
        for (std::size_t c = 1; c < cells.size(); ++c) {
            if (cells[c].empty())
                throw data_error(path.string() + ": empty ticker name in header column " + std::to_string(c + 1));
            table.tickers.emplace_back(cells[c]);
        }
        break;
    }
    if (table.tickers.empty())
        throw data_error(path.string() + ": empty file");

    {
        auto sorted = table.tickers;
        std::sort(sorted.begin(), sorted.end());
        auto dup = std::adjacent_find(sorted.begin(), sorted.end());
        if (dup != sorted.end())
            throw data_error(path.string() + ": duplicate ticker '" + *dup + "' in header");
    }

    const std::size_t d = table.tickers.size();
    std::string last_date;   // order is validated on the whole file, filtered or not
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != d + 1)
            throw data_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(d + 1) + " cells, got " + std::to_string(cells.size()));
        std::string date(cells[0]);
        if (!is_iso_date(date))
            throw data_error(path.string() + ":" + std::to_string(line_no) +
                             ": unparseable date '" + date + "' (expected YYYY-MM-DD)");
        if (!last_date.empty() && date <= last_date)
            throw data_error(path.string() + ":" + std::to_string(line_no) + ": date '" + date +
                             "' not after previous row '" + last_date + "'");
        last_date = date;
        if (!range.contains(date)) continue;
        std::vector<double> row(d);
        for (std::size_t c = 0; c < d; ++c)
            row[c] = parse_cell(cells[c + 1], path, line_no, table.tickers[c]);
        table.dates.push_back(std::move(date));
        table.values.push_back(std::move(row));
    }
    if (table.values.empty())
        throw data_error(path.string() + ": no data rows" +
                         (range.from || range.to ? " in the requested date range" : ""));
    return table;
}

} // namespace detail

/// Load a prices CSV (`date,TICKER1,...`). Every price must be strictly
/// positive and finite; rows outside `range` are dropped.
inline PriceTable load_price_table(const std::filesystem::path& path, const DateRange& range = {}) {
    auto raw = detail::read_csv_table(path, range);
    for (std::size_t r = 0; r < raw.values.size(); ++r)
        for (std::size_t c = 0; c < raw.tickers.size(); ++c) {
            double p = raw.values[r][c];
            if (!(p > 0.0) || !std::isfinite(p))
                throw data_error(path.string() + ": non-positive or non-finite price " +
                                 std::to_string(p) + " for '" + raw.tickers[c] + "' on " + raw.dates[r]);
        }
    return PriceTable{std::move(raw.dates), std::move(raw.tickers), std::move(raw.values)};
}

/// Load a pre-computed relatives CSV (same layout). Relatives may be zero but
/// not negative; this is how the published benchmark datasets are distributed.
inline MarketMatrix load_relatives(const std::filesystem::path& path, const DateRange& range = {}) {
    auto raw = detail::read_csv_table(path, range);
    for (std::size_t r = 0; r < raw.values.size(); ++r)
        for (std::size_t c = 0; c < raw.tickers.size(); ++c) {
            double x = raw.values[r][c];
            if (x < 0.0 || !std::isfinite(x))
                throw data_error(path.string() + ": negative or non-finite relative " +
                                 std::to_string(x) + " for '" + raw.tickers[c] + "' on " + raw.dates[r]);
        }
    return MarketMatrix{std::move(raw.values), std::move(raw.tickers), std::move(raw.dates)};
}

/// Ratios of consecutive prices. n rows of prices give n-1 periods; the date
/// attached to each period is the date the period ends on.
inline MarketMatrix to_market_matrix(const PriceTable& table) {
    if (table.rows() < 2)
        throw error("to_market_matrix: need at least 2 price rows, got " + std::to_string(table.rows()));
    MarketMatrix market;
    market.tickers = table.tickers;
    market.dates.assign(table.dates.begin() + 1, table.dates.end());
    market.relatives.reserve(table.rows() - 1);
    const std::size_t d = table.assets();
    for (std::size_t i = 0; i + 1 < table.rows(); ++i) {
        std::vector<double> row(d);
        for (std::size_t j = 0; j < d; ++j)
            row[j] = table.prices[i + 1][j] / table.prices[i][j];
        market.relatives.push_back(std::move(row));
    }
    return market;
}

} // namespace lolrec
