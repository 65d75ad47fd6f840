#include "gmadl/tuning.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <set>
#include <vector>

#include "gmadl/error.hpp"
#include "gmadl/serialization.hpp"

namespace gmadl {
namespace {

ReturnSeries ar_returns(std::size_t n, double phi, std::uint64_t seed) {
    return simple_returns(synthetic_ar_prices(n + 1, phi, 0.01, seed));
}

SearchSpace small_space() {
    SearchSpace s;
    s.loss_kinds = {LossKind::gmadl};
    s.a_values = {100.0};
    s.b_values = {1.0};
    s.model_specs = {ModelSpec{ModelKind::linear, 3, 0, 0}};
    s.learning_rates = {0.05};
    s.thresholds = {0.0};
    s.epochs = 30;
    s.exhaustive = true;
    return s;
}

TEST(Grid, SizeAndSeeds) {
    SearchSpace s = small_space();
    s.loss_kinds = {LossKind::mse, LossKind::gmadl};
    s.a_values = {10.0, 1000.0};
    s.b_values = {1.0, 2.0};
    s.thresholds = {0.0, 0.1};
    EXPECT_EQ(s.grid_size(), (1 + 4) * 2u);
    const auto grid = enumerate_grid(s, 7);
    ASSERT_EQ(grid.size(), 10u);
    std::set<std::string> keys;
    std::set<std::uint64_t> seeds;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_EQ(grid[i].grid_index, i);
        keys.insert(grid[i].key());
        seeds.insert(grid[i].model.seed);
    }
    EXPECT_EQ(keys.size(), grid.size());
    EXPECT_EQ(seeds.size(), grid.size());
    EXPECT_EQ(grid[0].key(), "loss=mse;model=linear/3/0;lr=0.050000000000000003;threshold=0");
    EXPECT_NE(enumerate_grid(s, 8)[0].model.seed, grid[0].model.seed);
}

TEST(Grid, ExhaustiveEqualsRandomWithFullBudget) {
    SearchSpace s = small_space();
    s.a_values = {10.0, 1000.0};
    s.thresholds = {0.0, 0.2};
    s.exhaustive = true;
    const auto full = draw_trials(s, 3);
    ASSERT_EQ(full.size(), 4u);
    s.exhaustive = false;
    for (std::size_t budget : {4u, 5u, 100u}) {
        s.budget = budget;
        const auto drawn = draw_trials(s, 3);
        ASSERT_EQ(drawn.size(), 4u);
        for (std::size_t i = 0; i < 4; ++i) {
            EXPECT_EQ(drawn[i].key(), full[i].key());
            EXPECT_EQ(drawn[i].model.seed, full[i].model.seed);
        }
    }
}

TEST(Grid, RandomDrawsAreDistinctAndOrdered) {
    SearchSpace s = small_space();
    s.a_values = {1.0, 10.0, 100.0, 1000.0};
    s.b_values = {1.0, 2.0, 3.0};
    s.exhaustive = false;
    s.budget = 5;
    const auto a = draw_trials(s, 11);
    const auto b = draw_trials(s, 11);
    ASSERT_EQ(a.size(), 5u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].grid_index, b[i].grid_index);
        if (i > 0) {
            EXPECT_LT(a[i - 1].grid_index, a[i].grid_index);
        }
    }
}

TEST(Space, ValidationErrors) {
    SearchSpace s = small_space();
    s.model_specs.clear();
    EXPECT_THROW(s.validate(), ValidationError);
    s = small_space();
    s.a_values = {};
    EXPECT_THROW(s.validate(), ValidationError);
    s = small_space();
    s.b_values = {-1.0};
    EXPECT_THROW(s.validate(), ValidationError);
    s = small_space();
    s.exhaustive = false;
    s.budget = 0;
    EXPECT_THROW(s.validate(), ValidationError);
    s = small_space();
    s.learning_rates = {0.0};
    EXPECT_THROW(s.validate(), ValidationError);
    s = small_space();
    s.loss_kinds = {LossKind::mse};
    s.a_values = {};
    EXPECT_NO_THROW(s.validate());
}

TEST(Space, JsonRoundTrip) {
    SearchSpace s = small_space();
    s.loss_kinds = {LossKind::mae, LossKind::gmadl};
    s.thresholds = {0.0, 0.25};
    const json j = s;
    const SearchSpace back = j.get<SearchSpace>();
    EXPECT_EQ(json(back), j);
    json bad = j;
    bad["loss_kinds"] = json::array({"hinge"});
    EXPECT_THROW(bad.get<SearchSpace>(), ValidationError);
    bad = j;
    bad.erase("model_specs");
    EXPECT_THROW(bad.get<SearchSpace>(), ValidationError);
}

TEST(Objectives, Names) {
    EXPECT_EQ(parse_objective("validation_ir"), Objective::validation_ir);
    EXPECT_EQ(to_string(Objective::validation_loss), "validation_loss");
    EXPECT_THROW(parse_objective("sharpe"), ValidationError);
}

TEST(RunSearch, SingleConfigurationIsAlwaysSelected) {
    const ReturnSeries r = ar_returns(300, 0.3, 1);
    const WalkForwardPlan plan = walk_forward_plan(r.size(), 120, 40, 40);
    const SearchResult res = run_search(r, plan, small_space(), {});
    ASSERT_EQ(res.trials.size(), 1u);
    ASSERT_EQ(res.selections.size(), plan.windows.size());
    for (const auto& sel : res.selections) {
        EXPECT_EQ(sel.trial, 0u);
        EXPECT_EQ(sel.key, res.trials[0].config.key());
    }
    for (const auto& t : res.trials[0].test_reports) {
        EXPECT_TRUE(t.has_value());
    }
}

TEST(RunSearch, DominantConfigurationWinsEveryWindow) {
    // Under validation_loss a gmadl trial scores < 0 while an mse trial scores > 0.
    SearchSpace s = small_space();
    s.loss_kinds = {LossKind::mse, LossKind::gmadl};
    const ReturnSeries r = ar_returns(400, 0.3, 2);
    const WalkForwardPlan plan = walk_forward_plan(r.size(), 120, 40, 40);
    const SearchResult res = run_search(r, plan, s, {});
    ASSERT_EQ(res.trials.size(), 2u);
    for (std::size_t w = 0; w < plan.windows.size(); ++w) {
        const auto& mse_trial = res.trials[1];
        EXPECT_GT(mse_trial.window_objectives[w], 0.0);
        EXPECT_EQ(res.selections[w].trial, 0u);
        EXPECT_EQ(res.trials[0].config.loss, LossKind::gmadl);
        EXPECT_FALSE(mse_trial.test_reports[w].has_value());
    }
}

TEST(RunSearch, TestReportsOnlyForSelectedTrials) {
    SearchSpace s = small_space();
    s.a_values = {10.0, 1000.0};
    s.thresholds = {0.0, 0.3};
    const ReturnSeries r = ar_returns(400, 0.2, 3);
    const WalkForwardPlan plan = walk_forward_plan(r.size(), 150, 50, 50);
    const SearchResult res = run_search(r, plan, s, {Objective::validation_ir});
    for (std::size_t w = 0; w < plan.windows.size(); ++w) {
        std::size_t populated = 0;
        for (std::size_t t = 0; t < res.trials.size(); ++t) {
            if (res.trials[t].test_reports[w]) {
                ++populated;
                EXPECT_EQ(t, res.selections[w].trial);
            }
        }
        EXPECT_EQ(populated, 1u);
    }
}

TEST(RunSearch, DeterministicAcrossThreadCounts) {
    SearchSpace s = small_space();
    s.a_values = {10.0, 1000.0};
    s.model_specs.push_back(ModelSpec{ModelKind::mlp, 3, 4, 0});
    const ReturnSeries r = ar_returns(300, 0.3, 4);
    const WalkForwardPlan plan = walk_forward_plan(r.size(), 120, 40, 40);
    ExperimentSettings one;
    one.seed = 9;
    ExperimentSettings many = one;
    many.threads = 3;
    const json a = run_search(r, plan, s, one);
    const json b = run_search(r, plan, s, one);
    const json c = run_search(r, plan, s, many);
    EXPECT_EQ(a.dump(), b.dump());
    EXPECT_EQ(a.dump(), c.dump());
}

TEST(RunSearch, RankingIsSortedByObjectiveThenTrades) {
    SearchSpace s = small_space();
    s.thresholds = {0.0, 0.2, 0.5, 5.0};
    const ReturnSeries r = ar_returns(300, 0.2, 5);
    const SearchResult res =
        run_search(r, walk_forward_plan(r.size(), 120, 40, 40), s, {Objective::validation_ir});
    for (std::size_t k = 1; k < res.trials.size(); ++k) {
        const auto& p = res.trials[k - 1];
        const auto& q = res.trials[k];
        EXPECT_TRUE(p.aggregate < q.aggregate ||
                    (p.aggregate == q.aggregate && p.total_trades <= q.total_trades));
    }
}

TEST(RunSearch, CorruptingTestDataLeavesEarlierSelectionsUnchanged) {
    SearchSpace s = small_space();
    s.a_values = {10.0, 1000.0};
    s.thresholds = {0.0, 0.5};
    s.model_specs.push_back(ModelSpec{ModelKind::linear, 5, 0, 0});
    const ReturnSeries clean = ar_returns(500, 0.25, 6);
    const WalkForwardPlan plan = walk_forward_plan(clean.size(), 150, 50, 50);
    ASSERT_GE(plan.windows.size(), 3u);
    const ExperimentSettings settings{Objective::validation_ir};
    const SearchResult base = run_search(clean, plan, s, settings);

    for (std::size_t w = 0; w < plan.windows.size(); ++w) {
        ReturnSeries dirty = clean;
        for (std::size_t i = plan.windows[w].test.begin; i < dirty.size(); ++i) {
            dirty.values[i] = -3.0 * dirty.values[i] + 0.01 * static_cast<double>(i % 7);
        }
        const SearchResult probe = run_search(dirty, plan, s, settings);
        for (std::size_t v = 0; v <= w; ++v) {
            EXPECT_EQ(probe.selections[v].key, base.selections[v].key) << "window " << v;
        }
    }
}

TEST(RunSearch, OutOfSampleSegmentIsContiguous) {
    const ReturnSeries r = ar_returns(400, 0.3, 7);
    const WalkForwardPlan plan = walk_forward_plan(r.size(), 120, 40, 40);
    const SearchResult res = run_search(r, plan, small_space(), {});
    const std::size_t first = plan.windows.front().test.begin;
    const std::size_t last = plan.windows.back().test.end;
    ASSERT_EQ(res.oos_returns.size(), last - first);
    for (std::size_t i = 0; i < res.oos_returns.size(); ++i) {
        EXPECT_EQ(res.oos_returns[i], r.values[first + i]);
    }
    EXPECT_EQ(res.out_of_sample.equity.size(), last - first + 1);
}

TEST(RunSearch, Errors) {
    const ReturnSeries r = ar_returns(100, 0.3, 8);
    EXPECT_THROW(run_search(r, WalkForwardPlan{}, small_space(), {}), ValidationError);
    EXPECT_THROW(run_search(r, walk_forward_plan(200, 100, 50, 50), small_space(), {}),
                 ValidationError);
    SearchSpace empty = small_space();
    empty.thresholds.clear();
    EXPECT_THROW(run_search(r, walk_forward_plan(r.size(), 50, 20, 20), empty, {}),
                 ValidationError);
}

TEST(RunSearch, TradesFallAsCostRises) {
    // Persistent signal with thresholds spanning always-in to always-flat.
    SearchSpace s = small_space();
    s.thresholds = {0.0, 0.5, 1.0, 100.0};
    const ReturnSeries r = ar_returns(700, 0.4, 10);
    const WalkForwardPlan plan = walk_forward_plan(r.size(), 300, 100, 100);
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> seen;
    for (double rate : {0.0, 0.001, 0.005, 0.02, 0.1}) {
        ExperimentSettings settings{Objective::validation_ir};
        settings.cost.rate = rate;
        const std::size_t trades = run_search(r, plan, s, settings).out_of_sample.n_trades;
        EXPECT_LE(trades, prev) << "rate " << rate;
        prev = trades;
        seen.push_back(trades);
    }
    EXPECT_GT(seen.front(), seen.back());
}

TEST(BSensitivity, ArgminPositiveAndShareShrinks) {
    const ConflictDataset d = conflict_dataset();
    ASSERT_EQ(d.r.size(), 1000u);
    const std::vector b{1.0, 3.0, 5.0};
    const BSensitivityReport rep = b_sensitivity_experiment(d, 1000.0, b);
    ASSERT_EQ(rep.rows.size(), 3u);
    EXPECT_TRUE(rep.argmin_positive);
    EXPECT_TRUE(rep.share_decreasing);
    EXPECT_LT(rep.rows[2].small_share, 1e-6);
    EXPECT_LT(rep.rows[0].large_to_small, rep.rows[1].large_to_small);
    EXPECT_LT(rep.rows[1].large_to_small, rep.rows[2].large_to_small);
}

TEST(BSensitivity, FlippingLargeCorrelationFlipsArgmin) {
    const std::vector b{1.0, 3.0, 5.0};
    const auto pos = b_sensitivity_experiment(conflict_dataset(), 1000.0, b);
    const auto neg =
        b_sensitivity_experiment(conflict_dataset(900, 0.001, 100, 0.05, false), 1000.0, b);
    for (std::size_t k = 0; k < b.size(); ++k) {
        EXPECT_GT(pos.rows[k].argmin_w, 0.0);
        EXPECT_LT(neg.rows[k].argmin_w, 0.0);
    }
}

TEST(BSensitivity, SmallRegimeAloneFavorsNegativeWeight) {
    const std::vector b{1.0, 3.0};
    const auto rep = b_sensitivity_experiment(conflict_dataset(900, 0.001, 0, 0.05), 1000.0, b);
    for (const auto& row : rep.rows) {
        EXPECT_LT(row.argmin_w, 0.0);
    }
    EXPECT_FALSE(rep.argmin_positive);
    EXPECT_THROW(b_sensitivity_experiment(ConflictDataset{}, 1000.0, b), ValidationError);
}

TEST(BSensitivity, JsonReport) {
    const std::vector b{1.0, 5.0};
    const json j = b_sensitivity_experiment(conflict_dataset(), 1000.0, b);
    EXPECT_EQ(j.at("rows").size(), 2u);
    EXPECT_TRUE(j.at("argmin_positive").get<bool>());
}

}  // namespace
}  // namespace gmadl
