#include "gmadl/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <string>

#include "gmadl/error.hpp"

namespace gmadl {

void SignalPolicy::validate() const {
    if (!std::isfinite(threshold) || threshold < 0.0) {
        throw ValidationError("signal threshold must be finite and >= 0");
    }
}

void CostModel::validate() const {
    if (!std::isfinite(rate) || rate < 0.0 || rate >= 1.0) {
        throw ValidationError("cost rate must lie in [0, 1)");
    }
}

std::vector<int> signals(std::span<const double> rhat, const SignalPolicy& policy) {
    policy.validate();
    std::vector<int> out(rhat.size(), 0);
    for (std::size_t i = 0; i < rhat.size(); ++i) {
        if (!std::isfinite(rhat[i])) {
            throw ValidationError("non-finite forecast at index " + std::to_string(i));
        }
        if (rhat[i] > policy.threshold) {
            out[i] = 1;
        } else if (policy.allow_short && rhat[i] < -policy.threshold) {
            out[i] = -1;
        }
    }
    return out;
}

BacktestReport run_backtest(std::span<const double> r, std::span<const int> positions,
                            const CostModel& cost, std::size_t periods_per_year) {
    cost.validate();
    if (r.size() != positions.size()) {
        throw ValidationError("backtest: " + std::to_string(r.size()) + " returns vs " +
                              std::to_string(positions.size()) + " positions");
    }
    BacktestReport rep;
    rep.positions.assign(positions.begin(), positions.end());
    rep.equity.reserve(r.size() + 1);
    rep.strategy_returns.reserve(r.size());
    rep.equity.push_back(1.0);
    int prev = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const int pos = positions[i];
        if (pos < -1 || pos > 1) {
            throw ValidationError("backtest: position " + std::to_string(pos) + " at index " +
                                  std::to_string(i) + " is not in {-1,0,1}");
        }
        if (!std::isfinite(r[i])) {
            throw ValidationError("backtest: non-finite return at index " + std::to_string(i));
        }
        const int turnover = std::abs(pos - prev);
        if (turnover != 0) {
            ++rep.n_trades;
        }
        const double ret = static_cast<double>(pos) * r[i] - cost.rate * static_cast<double>(turnover);
        rep.strategy_returns.push_back(ret);
        rep.equity.push_back(rep.equity.back() * (1.0 + ret));
        prev = pos;
    }
    if (rep.equity.size() >= 2) {
        rep.metrics = compute_metrics(rep.equity, periods_per_year);
    }
    return rep;
}

PerformanceMetrics compute_metrics(std::span<const double> equity, std::size_t periods_per_year) {
    if (equity.size() < 2) {
        throw ValidationError("metrics need an equity curve of length >= 2");
    }
    if (periods_per_year < 1) {
        throw ValidationError("periods_per_year must be >= 1");
    }
    for (double e : equity) {
        if (!std::isfinite(e)) {
            throw ValidationError("metrics: non-finite equity value");
        }
    }
    PerformanceMetrics m;
    const double ppy = static_cast<double>(periods_per_year);
    const std::size_t n = equity.size() - 1;
    constexpr double kMax = std::numeric_limits<double>::max();

    // Period returns; a curve that reaches zero or below is wiped out.
    std::vector<double> q(n);
    bool ruined = false;
    double log_sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (equity[t] <= 0.0) {
            ruined = true;
            q[t] = 0.0;
            continue;
        }
        q[t] = equity[t + 1] / equity[t] - 1.0;
        if (equity[t + 1] <= 0.0) {
            ruined = true;
        } else {
            log_sum += std::log1p(q[t]);
        }
    }

    if (ruined) {
        m.annualized_return = -1.0;
    } else {
        const double exponent = ppy * log_sum / static_cast<double>(n);
        const double ar = std::expm1(exponent);
        if (std::isfinite(ar)) {
            m.annualized_return = ar;
        } else {
            m.annualized_return = kMax;
            m.clamped = true;
        }
    }

    if (n >= 2) {
        double mean = 0.0;
        for (double x : q) {
            mean += x;
        }
        mean /= static_cast<double>(n);
        double sq = 0.0;
        for (double x : q) {
            sq += (x - mean) * (x - mean);
        }
        m.annualized_std = std::sqrt(sq / static_cast<double>(n - 1)) * std::sqrt(ppy);
    }

    if (m.annualized_std > 0.0) {
        m.information_ratio = m.annualized_return / m.annualized_std;
        if (!std::isfinite(m.information_ratio)) {
            m.information_ratio = std::copysign(kMax, m.annualized_return);
            m.clamped = true;
        }
    } else if (m.annualized_return != 0.0) {
        m.information_ratio = std::copysign(kMax, m.annualized_return);
        m.clamped = true;
    }

    double peak = equity[0];
    for (double e : equity) {
        peak = std::max(peak, e);
        if (peak > 0.0) {
            m.max_drawdown = std::max(m.max_drawdown, (peak - e) / peak);
        }
    }
    m.max_drawdown = std::clamp(m.max_drawdown, 0.0, 1.0);
    return m;
}

void write_equity_csv(std::ostream& out, const BacktestReport& report) {
    out << "t,equity,position\n";
    char buf[64];
    for (std::size_t t = 0; t < report.equity.size(); ++t) {
        const int pos = t == 0 ? 0 : report.positions[t - 1];
        std::snprintf(buf, sizeof(buf), "%.12e", report.equity[t]);
        out << t << ',' << buf << ',' << pos << '\n';
    }
}

}  // namespace gmadl
