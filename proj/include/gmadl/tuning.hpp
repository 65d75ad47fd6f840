#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gmadl/backtest.hpp"
#include "gmadl/data.hpp"
#include "gmadl/loss.hpp"
#include "gmadl/models.hpp"

namespace gmadl {

/// Candidate settings. The grid is the cartesian product
/// loss x (a x b, for gmadl only) x model x learning rate x threshold.
struct SearchSpace {
    std::vector<LossKind> loss_kinds{LossKind::gmadl};
    std::vector<double> a_values{1000.0};
    std::vector<double> b_values{1.0};
    std::vector<ModelSpec> model_specs;  // seeds are derived per configuration
    std::vector<double> learning_rates{1e-2};
    std::vector<double> thresholds{0.0};
    std::size_t epochs = 100;
    std::size_t batch_size = 0;
    bool exhaustive = false;
    std::size_t budget = 16;  // distinct draws in random mode

    void validate() const;
    std::size_t grid_size() const;
};

struct TrialConfig {
    LossKind loss = LossKind::gmadl;
    GmadlParams params;  // meaningful for gmadl only
    ModelSpec model;     // seed already derived
    double learning_rate = 1e-2;
    double threshold = 0.0;
    std::size_t grid_index = 0;

    /// Canonical text form; the final tie-breaker compares these.
    std::string key() const;
};

enum class Objective { validation_loss, validation_ir };

std::string_view to_string(Objective o);
Objective parse_objective(std::string_view name);

struct ExperimentSettings {
    Objective objective = Objective::validation_loss;
    std::uint64_t seed = 42;
    CostModel cost;
    bool allow_short = true;
    std::size_t periods_per_year = 252;
    std::size_t threads = 1;
};

struct TrialResult {
    TrialConfig config;
    // Lower is better. validation_loss: the trial's own loss on the valid
    // range; validation_ir: negated information ratio of the valid backtest.
    std::vector<double> window_objectives;
    std::vector<std::size_t> window_trades;
    double aggregate = 0.0;
    std::size_t total_trades = 0;
    // Test-range backtests, present only for windows where this trial won.
    std::vector<std::optional<BacktestReport>> test_reports;
};

struct WindowSelection {
    std::size_t window = 0;
    std::size_t trial = 0;  // index into SearchResult::trials
    std::string key;
    BacktestReport test_report;
};

struct SearchResult {
    std::vector<TrialResult> trials;  // ranked by (aggregate, total_trades, key)
    std::vector<WindowSelection> selections;
    std::vector<double> oos_returns;  // concatenated test-range returns
    BacktestReport out_of_sample;     // stitched test positions, costs across joins
};

std::vector<TrialConfig> enumerate_grid(const SearchSpace& space, std::uint64_t master_seed);

/// Exhaustive grid, or `budget` distinct grid points drawn without
/// replacement. Returned in grid order either way.
std::vector<TrialConfig> draw_trials(const SearchSpace& space, std::uint64_t master_seed);

/// Walk-forward search over `returns`. Plan indices address returns; a
/// sample whose target index is below the model lookback is skipped. Per
/// window, every trial trains on train and is scored on valid; the winner is
/// retrained on train+valid and evaluated once on test.
SearchResult run_search(const ReturnSeries& returns, const WalkForwardPlan& plan,
                        const SearchSpace& space, const ExperimentSettings& settings);

/// Reads the GMADL_THREADS cap, defaulting to hardware concurrency.
std::size_t default_thread_count();

// ---- magnitude-exponent sensitivity ---------------------------------------

/// Scalar feature f and return r with two regimes: `n_small` moves of size
/// `small` whose sign opposes f, and `n_large` moves of size `large` whose
/// sign follows f (or opposes it when `large_correlated` is false).
struct ConflictDataset {
    std::vector<double> r;
    std::vector<double> f;
    std::vector<bool> is_large;
};

ConflictDataset conflict_dataset(std::size_t n_small = 900, double small = 0.001,
                                 std::size_t n_large = 100, double large = 0.05,
                                 bool large_correlated = true);

struct BSensitivityRow {
    double b = 1.0;
    double argmin_w = 0.0;
    double min_loss = 0.0;
    double small_share = 0.0;        // small-regime |term| mass over total, at argmin
    double large_to_small = 0.0;     // large-regime over small-regime |term| mass
};

struct BSensitivityReport {
    double a = 1000.0;
    std::size_t grid_points = 401;
    std::vector<BSensitivityRow> rows;
    bool argmin_positive = false;      // for every b
    bool share_decreasing = false;     // strictly, in the order of rows
};

/// Fits rhat = w*f by exhaustive search over `grid_points` evenly spaced w
/// in [-1, 1], minimizing GMADL for each b.
BSensitivityReport b_sensitivity_experiment(const ConflictDataset& data, double a,
                                            std::span<const double> b_values,
                                            std::size_t grid_points = 401);

}  // namespace gmadl
