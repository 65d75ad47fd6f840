#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace gmadl {

struct SignalPolicy {
    double threshold = 0.0;  // neutral zone half-width on the forecast
    bool allow_short = true;

    void validate() const;
};

/// Proportional cost per unit of turnover |position_i - position_{i-1}|.
struct CostModel {
    double rate = 0.0;

    void validate() const;
};

struct PerformanceMetrics {
    double annualized_return = 0.0;
    double annualized_std = 0.0;
    // Annualized return over annualized std. Stands in for "risk-weighted
    // return"; clamped to +/-max double (with the flag set) instead of inf.
    double information_ratio = 0.0;
    double max_drawdown = 0.0;
    bool clamped = false;
};

struct BacktestReport {
    std::vector<double> equity;  // equity[0] = 1.0, one entry per interval after
    std::vector<int> positions;
    std::vector<double> strategy_returns;
    std::size_t n_trades = 0;
    PerformanceMetrics metrics;
};

/// +1 above threshold, -1 below -threshold when shorts are allowed, else 0.
std::vector<int> signals(std::span<const double> rhat, const SignalPolicy& policy);

/// Period return position_i*R_i - rate*|position_i - position_{i-1}|, entering
/// from flat; equity compounds multiplicatively.
BacktestReport run_backtest(std::span<const double> r, std::span<const int> positions,
                            const CostModel& cost, std::size_t periods_per_year = 252);

/// Standard metrics of an equity curve: annualized geometric return (computed
/// in log space), annualized sample std of period returns, their ratio, and
/// maximum peak-to-trough drawdown.
PerformanceMetrics compute_metrics(std::span<const double> equity, std::size_t periods_per_year);

/// CSV `t,equity,position`; row 0 is the starting point with position 0.
void write_equity_csv(std::ostream& out, const BacktestReport& report);

}  // namespace gmadl
