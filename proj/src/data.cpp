#include "gmadl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "gmadl/error.hpp"

namespace gmadl {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n\"");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n\"");
    return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, delim)) {
        out.push_back(trim(field));
    }
    if (!line.empty() && line.back() == delim) {
        out.emplace_back();
    }
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) {
        return false;
    }
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

}  // namespace

WindowedDataset WindowedDataset::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > size()) {
        throw ValidationError("dataset slice out of range");
    }
    WindowedDataset out;
    out.lookback = lookback;
    out.features.assign(features.begin() + static_cast<std::ptrdiff_t>(begin * lookback),
                        features.begin() + static_cast<std::ptrdiff_t>(end * lookback));
    out.targets.assign(targets.begin() + static_cast<std::ptrdiff_t>(begin),
                       targets.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

void PriceSeries::validate() const {
    if (timestamps.size() != prices.size()) {
        throw DataError("price series: timestamps and prices differ in length");
    }
    for (std::size_t i = 0; i < prices.size(); ++i) {
        if (!std::isfinite(prices[i]) || !(prices[i] > 0.0)) {
            throw DataError("price series: non-positive price at index " + std::to_string(i));
        }
        if (i > 0 && timestamps[i] <= timestamps[i - 1]) {
            throw DataError("price series: timestamps not strictly increasing at index " +
                            std::to_string(i));
        }
    }
}

std::int64_t parse_timestamp(const std::string& text) {
    const std::string s = trim(text);
    if (s.empty()) {
        throw DataError("empty timestamp");
    }
    std::int64_t epoch = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), epoch);
    if (ec == std::errc() && ptr == s.data() + s.size()) {
        return epoch;
    }

    std::tm tm{};
    int consumed = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2d%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &consumed) != 3 ||
        consumed != 10) {
        throw DataError("unparseable timestamp '" + s + "'");
    }
    std::size_t pos = 10;
    if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
        int used = 0;
        if (std::sscanf(s.c_str() + pos + 1, "%2d:%2d:%2d%n", &tm.tm_hour, &tm.tm_min, &tm.tm_sec,
                        &used) != 3 ||
            used != 8) {
            throw DataError("unparseable timestamp '" + s + "'");
        }
        pos += 9;
        if (pos < s.size() && s[pos] == 'Z') {
            ++pos;
        }
    }
    if (pos != s.size()) {
        throw DataError("unparseable timestamp '" + s + "'");
    }
    if (tm.tm_mon < 1 || tm.tm_mon > 12 || tm.tm_mday < 1 || tm.tm_mday > 31 || tm.tm_hour > 23 ||
        tm.tm_min > 59 || tm.tm_sec > 60) {
        throw DataError("timestamp out of range '" + s + "'");
    }
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    return static_cast<std::int64_t>(timegm(&tm));
}

PriceSeries parse_prices(std::istream& in, const PriceCsvFormat& format) {
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("price file is empty");
    }
    const auto header = split(line, format.delimiter);
    auto find_column = [&](const std::string& name) -> std::ptrdiff_t {
        for (std::size_t k = 0; k < header.size(); ++k) {
            if (lower(header[k]) == lower(name)) {
                return static_cast<std::ptrdiff_t>(k);
            }
        }
        return -1;
    };

    const std::ptrdiff_t ts_col = find_column(format.timestamp_column);
    if (ts_col < 0) {
        throw DataError("missing timestamp column '" + format.timestamp_column + "'");
    }
    std::ptrdiff_t px_col = -1;
    if (!format.price_column.empty()) {
        px_col = find_column(format.price_column);
    } else {
        px_col = find_column("price");
        if (px_col < 0) {
            px_col = find_column("close");
        }
    }
    if (px_col < 0) {
        throw DataError("missing price column (expected 'price' or 'close')");
    }

    PriceSeries out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split(line, format.delimiter);
        const std::string where = "line " + std::to_string(line_no);
        const auto need = static_cast<std::size_t>(std::max(ts_col, px_col));
        if (fields.size() <= need) {
            throw DataError(where + ": expected at least " + std::to_string(need + 1) + " fields");
        }
        const std::string& px_text = fields[static_cast<std::size_t>(px_col)];
        if (px_text.empty()) {
            throw DataError(where + ": missing price");
        }
        double price = 0.0;
        if (!parse_double(px_text, price) || !std::isfinite(price)) {
            throw DataError(where + ": unparseable price '" + px_text + "'");
        }
        if (!(price > 0.0)) {
            throw DataError(where + ": non-positive price " + px_text);
        }
        std::int64_t ts = 0;
        try {
            ts = parse_timestamp(fields[static_cast<std::size_t>(ts_col)]);
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
        if (!out.timestamps.empty() && ts <= out.timestamps.back()) {
            throw DataError(where + ": timestamp not strictly increasing (duplicate or out of order)");
        }
        out.timestamps.push_back(ts);
        out.prices.push_back(price);
    }
    return out;
}

PriceSeries load_prices(const std::filesystem::path& path, const PriceCsvFormat& format) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open price file " + path.string());
    }
    return parse_prices(in, format);
}

void write_prices_csv(std::ostream& out, const PriceSeries& prices) {
    out << "timestamp,price\n";
    char buf[64];
    for (std::size_t i = 0; i < prices.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.10f", prices.prices[i]);
        out << prices.timestamps[i] << ',' << buf << '\n';
    }
}

ReturnSeries simple_returns(const PriceSeries& p) {
    p.validate();
    if (p.size() < 2) {
        throw ValidationError("simple_returns needs at least 2 prices");
    }
    ReturnSeries r;
    r.values.reserve(p.size() - 1);
    r.timestamps.reserve(p.size() - 1);
    for (std::size_t i = 1; i < p.size(); ++i) {
        r.values.push_back(p.prices[i] / p.prices[i - 1] - 1.0);
        r.timestamps.push_back(p.timestamps[i]);
    }
    return r;
}

WindowedDataset make_windows(std::span<const double> returns, std::size_t lookback) {
    if (lookback < 1) {
        throw ValidationError("lookback must be >= 1");
    }
    if (returns.size() <= lookback) {
        throw ValidationError("need more than " + std::to_string(lookback) + " returns, got " +
                              std::to_string(returns.size()));
    }
    WindowedDataset out;
    out.lookback = lookback;
    const std::size_t count = returns.size() - lookback;
    out.features.reserve(count * lookback);
    out.targets.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.features.insert(out.features.end(), returns.begin() + static_cast<std::ptrdiff_t>(i),
                            returns.begin() + static_cast<std::ptrdiff_t>(i + lookback));
        out.targets.push_back(returns[i + lookback]);
    }
    return out;
}

Standardizer Standardizer::fit(std::span<const double> returns) {
    if (returns.empty()) {
        throw ValidationError("cannot fit a standardizer on no data");
    }
    Standardizer s;
    double sum = 0.0;
    for (double r : returns) {
        sum += r;
    }
    s.mean = sum / static_cast<double>(returns.size());
    double sq = 0.0;
    for (double r : returns) {
        sq += (r - s.mean) * (r - s.mean);
    }
    s.stddev = std::sqrt(sq / static_cast<double>(returns.size()));
    if (!(s.stddev > 0.0)) {
        s.stddev = 1.0;
    }
    return s;
}

void Standardizer::apply(WindowedDataset& data) const {
    for (double& x : data.features) {
        x = transform(x);
    }
}

void WalkForwardPlan::validate(std::size_t n) const {
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const auto& win = windows[w];
        if (win.train.size() == 0 || win.valid.size() == 0 || win.test.size() == 0) {
            throw ValidationError("walk-forward window " + std::to_string(w) + " has an empty part");
        }
        if (win.train.end != win.valid.begin || win.valid.end != win.test.begin ||
            win.train.begin >= win.train.end || win.test.end > n) {
            throw ValidationError("walk-forward window " + std::to_string(w) + " is not contiguous");
        }
        if (w > 0) {
            const auto& prev = windows[w - 1];
            if (win.train.begin != prev.train.begin + step || win.test.begin != prev.test.end) {
                throw ValidationError("walk-forward windows do not advance by step");
            }
        }
    }
}

WalkForwardPlan walk_forward_plan(std::size_t n, std::size_t train, std::size_t valid,
                                  std::size_t test) {
    if (train < 1 || valid < 1 || test < 1) {
        throw ValidationError("walk-forward sizes must all be >= 1");
    }
    if (train + valid + test > n) {
        throw ValidationError("walk-forward sizes " + std::to_string(train) + "+" +
                              std::to_string(valid) + "+" + std::to_string(test) + " exceed " +
                              std::to_string(n) + " observations");
    }
    WalkForwardPlan plan;
    plan.step = test;
    for (std::size_t off = 0; off + train + valid + test <= n; off += test) {
        WalkForwardWindow w;
        w.train = {off, off + train};
        w.valid = {off + train, off + train + valid};
        w.test = {off + train + valid, off + train + valid + test};
        plan.windows.push_back(w);
    }
    return plan;
}

PriceSeries synthetic_ar_prices(std::size_t n, double phi, double sigma, std::uint64_t seed,
                                double start_price, std::int64_t start_time,
                                std::int64_t interval_seconds) {
    if (n < 2) {
        throw ValidationError("synthetic series needs at least 2 prices");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    PriceSeries p;
    p.prices.reserve(n);
    p.timestamps.reserve(n);
    p.prices.push_back(start_price);
    p.timestamps.push_back(start_time);
    double r = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        r = std::clamp(phi * r + noise(rng), -0.5, 0.5);
        p.prices.push_back(p.prices.back() * (1.0 + r));
        p.timestamps.push_back(start_time + static_cast<std::int64_t>(i) * interval_seconds);
    }
    return p;
}

}  // namespace gmadl
