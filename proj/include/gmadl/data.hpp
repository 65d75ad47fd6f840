#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gmadl/dataset.hpp"
#include "gmadl/loss.hpp"

namespace gmadl {

struct PriceSeries {
    std::vector<std::int64_t> timestamps;  // epoch seconds, strictly increasing
    std::vector<double> prices;            // > 0

    std::size_t size() const { return prices.size(); }
    void validate() const;  // throws DataError
};

struct PriceCsvFormat {
    std::string timestamp_column = "timestamp";
    std::string price_column;  // empty: "price", falling back to "close"
    char delimiter = ',';
};

/// Reads a headered CSV. Timestamps may be epoch seconds or ISO-8601
/// (`YYYY-MM-DD`, optionally followed by `THH:MM:SS` and `Z`). Rows that fail
/// to parse or break a series invariant raise DataError naming the line.
PriceSeries load_prices(const std::filesystem::path& path, const PriceCsvFormat& format = {});
PriceSeries parse_prices(std::istream& in, const PriceCsvFormat& format = {});

void write_prices_csv(std::ostream& out, const PriceSeries& prices);

/// Parses an ISO-8601 date or date-time (UTC) or a plain integer into epoch seconds.
std::int64_t parse_timestamp(const std::string& text);

/// R_i = p_i / p_{i-1} - 1, stamped with the later instant.
ReturnSeries simple_returns(const PriceSeries& p);

/// Row i = returns [i, i+lookback), target i = return at i+lookback.
WindowedDataset make_windows(std::span<const double> returns, std::size_t lookback);

/// Affine feature scaling fitted on training returns only.
struct Standardizer {
    double mean = 0.0;
    double stddev = 1.0;

    /// Population mean/std of `returns`; a zero spread falls back to std 1.
    static Standardizer fit(std::span<const double> returns);
    void apply(WindowedDataset& data) const;
    double transform(double x) const { return (x - mean) / stddev; }
};

/// Half-open index interval [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct WalkForwardWindow {
    IndexRange train;
    IndexRange valid;
    IndexRange test;
    friend bool operator==(const WalkForwardWindow&, const WalkForwardWindow&) = default;
};

struct WalkForwardPlan {
    std::vector<WalkForwardWindow> windows;
    std::size_t step = 0;

    /// Throws ValidationError if any ordering or tiling invariant is broken.
    void validate(std::size_t n) const;
};

/// Rolling windows of fixed sizes, advancing by `test` so test ranges tile
/// the series. A tail shorter than `test` is dropped.
WalkForwardPlan walk_forward_plan(std::size_t n, std::size_t train, std::size_t valid,
                                  std::size_t test);

/// Geometric random walk whose returns follow r_t = phi*r_{t-1} + sigma*e_t.
PriceSeries synthetic_ar_prices(std::size_t n, double phi, double sigma, std::uint64_t seed,
                                double start_price = 100.0, std::int64_t start_time = 1577836800,
                                std::int64_t interval_seconds = 86400);

}  // namespace gmadl
