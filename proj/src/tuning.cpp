#include "gmadl/tuning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>
#include <tuple>

#include "gmadl/error.hpp"

namespace gmadl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void require_nonempty(bool ok, const char* what) {
    if (!ok) {
        throw ValidationError(std::string("search space: ") + what + " must be non-empty");
    }
}

// Scores for one trial on one window.
struct WindowScore {
    double objective = 0.0;
    std::size_t trades = 0;
};

// Row range of a lookback-L windowed dataset whose targets fall in `range`.
IndexRange rows_for(const IndexRange& range, std::size_t lookback) {
    const std::size_t lo = std::max(range.begin, lookback);
    if (range.end <= lo) {
        return {0, 0};
    }
    return {lo - lookback, range.end - lookback};
}

TrainConfig train_config_for(const TrialConfig& cfg, const SearchSpace& space) {
    TrainConfig tc;
    tc.loss = cfg.loss;
    tc.params = cfg.params;
    tc.epochs = space.epochs;
    tc.learning_rate = cfg.learning_rate;
    tc.batch_size = space.batch_size;
    return tc;
}

// Standardizes features with statistics of returns[fit.begin, fit.end) and
// trains a fresh model on rows whose targets fall in `fit`.
ModelState fit_model(const std::vector<double>& returns, const IndexRange& fit,
                     const TrialConfig& cfg, const SearchSpace& space, Standardizer& scaler,
                     const WindowedDataset& raw) {
    const IndexRange rows = rows_for(fit, cfg.model.input_dim);
    if (rows.size() == 0) {
        throw ValidationError("walk-forward training range holds no sample for lookback " +
                              std::to_string(cfg.model.input_dim));
    }
    scaler = Standardizer::fit(std::span<const double>(returns).subspan(fit.begin, fit.size()));
    WindowedDataset train_rows = raw.slice(rows.begin, rows.end);
    scaler.apply(train_rows);
    const TrainConfig tc = train_config_for(cfg, space);
    ModelState init = init_model(cfg.model);
    TrainResult res = cfg.loss == LossKind::madl ? train_with_madl_demo(std::move(init), train_rows, tc)
                                                 : train(std::move(init), train_rows, tc);
    return std::move(res.state);
}

std::vector<double> predict_range(const ModelState& state, const Standardizer& scaler,
                                  const WindowedDataset& raw, const IndexRange& rows) {
    WindowedDataset part = raw.slice(rows.begin, rows.end);
    scaler.apply(part);
    return predict(state, part);
}

WindowScore score_trial(const std::vector<double>& returns, const WalkForwardWindow& win,
                        const TrialConfig& cfg, const SearchSpace& space,
                        const ExperimentSettings& settings, const WindowedDataset& raw) {
    Standardizer scaler;
    const ModelState model = fit_model(returns, win.train, cfg, space, scaler, raw);
    const IndexRange rows = rows_for(win.valid, cfg.model.input_dim);
    if (rows.size() == 0) {
        throw ValidationError("walk-forward validation range holds no sample");
    }
    const std::vector<double> preds = predict_range(model, scaler, raw, rows);
    const std::span<const double> targets =
        std::span<const double>(raw.targets).subspan(rows.begin, rows.size());

    const std::vector<int> pos = signals(preds, SignalPolicy{cfg.threshold, settings.allow_short});
    const BacktestReport bt = run_backtest(targets, pos, settings.cost, settings.periods_per_year);

    WindowScore s;
    s.trades = bt.n_trades;
    if (settings.objective == Objective::validation_loss) {
        s.objective = evaluate_loss(cfg.loss, targets, preds, cfg.params);
    } else {
        s.objective = -bt.metrics.information_ratio;
    }
    return s;
}

// Runs fn(i) for i in [0, n) across up to `threads` workers. The first
// exception is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                    next = n;
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

}  // namespace

void SearchSpace::validate() const {
    require_nonempty(!loss_kinds.empty(), "loss_kinds");
    require_nonempty(!model_specs.empty(), "model_specs");
    require_nonempty(!learning_rates.empty(), "learning_rates");
    require_nonempty(!thresholds.empty(), "thresholds");
    if (std::find(loss_kinds.begin(), loss_kinds.end(), LossKind::gmadl) != loss_kinds.end()) {
        require_nonempty(!a_values.empty(), "a_values");
        require_nonempty(!b_values.empty(), "b_values");
        for (double a : a_values) {
            for (double b : b_values) {
                GmadlParams{a, b}.validate();
            }
        }
    }
    for (const auto& m : model_specs) {
        m.validate();
    }
    for (double lr : learning_rates) {
        if (!(lr > 0.0) || !std::isfinite(lr)) {
            throw ValidationError("search space: learning rates must be > 0");
        }
    }
    for (double t : thresholds) {
        SignalPolicy{t, true}.validate();
    }
    if (epochs < 1) {
        throw ValidationError("search space: epochs must be >= 1");
    }
    if (!exhaustive && budget < 1) {
        throw ValidationError("search space: budget must be >= 1 for random search");
    }
}

std::size_t SearchSpace::grid_size() const {
    std::size_t loss_points = 0;
    for (LossKind k : loss_kinds) {
        loss_points += k == LossKind::gmadl ? a_values.size() * b_values.size() : 1;
    }
    return loss_points * model_specs.size() * learning_rates.size() * thresholds.size();
}

std::string TrialConfig::key() const {
    std::string k = "loss=" + std::string(to_string(loss));
    if (loss == LossKind::gmadl) {
        k += ";a=" + fmt_double(params.a) + ";b=" + fmt_double(params.b);
    }
    k += ";model=" + std::string(to_string(model.kind)) + "/" + std::to_string(model.input_dim) +
         "/" + std::to_string(model.hidden_dim);
    k += ";lr=" + fmt_double(learning_rate) + ";threshold=" + fmt_double(threshold);
    return k;
}

std::string_view to_string(Objective o) {
    return o == Objective::validation_loss ? "validation_loss" : "validation_ir";
}

Objective parse_objective(std::string_view name) {
    if (name == "validation_loss") {
        return Objective::validation_loss;
    }
    if (name == "validation_ir") {
        return Objective::validation_ir;
    }
    throw ValidationError("unknown objective '" + std::string(name) + "'");
}

std::vector<TrialConfig> enumerate_grid(const SearchSpace& space, std::uint64_t master_seed) {
    space.validate();
    std::vector<TrialConfig> grid;
    grid.reserve(space.grid_size());
    for (LossKind loss : space.loss_kinds) {
        std::vector<GmadlParams> params;
        if (loss == LossKind::gmadl) {
            for (double a : space.a_values) {
                for (double b : space.b_values) {
                    params.push_back({a, b});
                }
            }
        } else {
            params.push_back({});
        }
        for (const GmadlParams& p : params) {
            for (const ModelSpec& m : space.model_specs) {
                for (double lr : space.learning_rates) {
                    for (double th : space.thresholds) {
                        TrialConfig c;
                        c.loss = loss;
                        c.params = p;
                        c.model = m;
                        c.learning_rate = lr;
                        c.threshold = th;
                        c.grid_index = grid.size();
                        c.model.seed = splitmix64(master_seed ^ splitmix64(c.grid_index));
                        grid.push_back(c);
                    }
                }
            }
        }
    }
    return grid;
}

std::vector<TrialConfig> draw_trials(const SearchSpace& space, std::uint64_t master_seed) {
    std::vector<TrialConfig> grid = enumerate_grid(space, master_seed);
    if (space.exhaustive || space.budget >= grid.size()) {
        return grid;
    }
    std::vector<std::size_t> idx(grid.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(master_seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(space.budget);
    std::sort(idx.begin(), idx.end());
    std::vector<TrialConfig> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) {
        out.push_back(grid[i]);
    }
    return out;
}

std::size_t default_thread_count() {
    if (const char* env = std::getenv("GMADL_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) {
            return static_cast<std::size_t>(v);
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

SearchResult run_search(const ReturnSeries& returns, const WalkForwardPlan& plan,
                        const SearchSpace& space, const ExperimentSettings& settings) {
    returns.validate();
    settings.cost.validate();
    if (plan.windows.empty()) {
        throw ValidationError("walk-forward plan has no windows");
    }
    plan.validate(returns.size());

    const std::vector<TrialConfig> trials = draw_trials(space, settings.seed);
    const std::vector<double>& r = returns.values;

    // One raw (unscaled) dataset per distinct lookback.
    std::vector<std::size_t> lookbacks;
    for (const auto& t : trials) {
        lookbacks.push_back(t.model.input_dim);
    }
    std::sort(lookbacks.begin(), lookbacks.end());
    lookbacks.erase(std::unique(lookbacks.begin(), lookbacks.end()), lookbacks.end());
    std::vector<WindowedDataset> raw_by_lookback;
    for (std::size_t lb : lookbacks) {
        raw_by_lookback.push_back(make_windows(r, lb));
    }
    auto raw_for = [&](std::size_t lb) -> const WindowedDataset& {
        const auto it = std::lower_bound(lookbacks.begin(), lookbacks.end(), lb);
        return raw_by_lookback[static_cast<std::size_t>(it - lookbacks.begin())];
    };

    const std::size_t n_windows = plan.windows.size();
    std::vector<TrialResult> results(trials.size());
    for (std::size_t t = 0; t < trials.size(); ++t) {
        results[t].config = trials[t];
        results[t].window_objectives.assign(n_windows, 0.0);
        results[t].window_trades.assign(n_windows, 0);
        results[t].test_reports.assign(n_windows, std::nullopt);
    }

    SearchResult out;
    std::vector<int> stitched_positions;
    for (std::size_t w = 0; w < n_windows; ++w) {
        const WalkForwardWindow& win = plan.windows[w];
        parallel_for(trials.size(), settings.threads, [&](std::size_t t) {
            const WindowScore s = score_trial(r, win, trials[t], space, settings,
                                              raw_for(trials[t].model.input_dim));
            if (!std::isfinite(s.objective)) {
                throw TrainingError("non-finite validation objective for " + trials[t].key());
            }
            results[t].window_objectives[w] = s.objective;
            results[t].window_trades[w] = s.trades;
        });

        std::size_t best = 0;
        for (std::size_t t = 1; t < trials.size(); ++t) {
            const auto lhs = std::make_tuple(results[t].window_objectives[w],
                                             results[t].window_trades[w], trials[t].key());
            const auto rhs = std::make_tuple(results[best].window_objectives[w],
                                             results[best].window_trades[w], trials[best].key());
            if (lhs < rhs) {
                best = t;
            }
        }

        // Retrain the winner on train+valid; touch the test range exactly once.
        const TrialConfig& cfg = trials[best];
        const WindowedDataset& raw = raw_for(cfg.model.input_dim);
        Standardizer scaler;
        const IndexRange fit{win.train.begin, win.valid.end};
        const ModelState model = fit_model(r, fit, cfg, space, scaler, raw);
        const IndexRange rows = rows_for(win.test, cfg.model.input_dim);
        const std::vector<double> preds = predict_range(model, scaler, raw, rows);
        const std::vector<int> pos = signals(preds, SignalPolicy{cfg.threshold, settings.allow_short});
        const std::span<const double> targets =
            std::span<const double>(raw.targets).subspan(rows.begin, rows.size());
        BacktestReport test_report =
            run_backtest(targets, pos, settings.cost, settings.periods_per_year);

        results[best].test_reports[w] = test_report;
        out.selections.push_back({w, best, cfg.key(), std::move(test_report)});
        stitched_positions.insert(stitched_positions.end(), pos.begin(), pos.end());
        out.oos_returns.insert(out.oos_returns.end(), targets.begin(), targets.end());
    }

    for (auto& res : results) {
        double sum = 0.0;
        for (double v : res.window_objectives) {
            sum += v;
        }
        res.aggregate = sum / static_cast<double>(n_windows);
        res.total_trades = std::accumulate(res.window_trades.begin(), res.window_trades.end(),
                                           std::size_t{0});
    }

    // Rank; remap selection indices to ranked positions.
    std::vector<std::size_t> order(results.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return std::make_tuple(results[x].aggregate, results[x].total_trades, trials[x].key()) <
               std::make_tuple(results[y].aggregate, results[y].total_trades, trials[y].key());
    });
    std::vector<std::size_t> rank_of(results.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        rank_of[order[k]] = k;
        out.trials.push_back(std::move(results[order[k]]));
    }
    for (auto& sel : out.selections) {
        sel.trial = rank_of[sel.trial];
    }

    out.out_of_sample =
        run_backtest(out.oos_returns, stitched_positions, settings.cost, settings.periods_per_year);
    return out;
}

ConflictDataset conflict_dataset(std::size_t n_small, double small, std::size_t n_large,
                                 double large, bool large_correlated) {
    ConflictDataset d;
    d.r.reserve(n_small + n_large);
    d.f.reserve(n_small + n_large);
    for (std::size_t i = 0; i < n_small + n_large; ++i) {
        const double f = (i % 2 == 0) ? 1.0 : -1.0;
        const bool big = i >= n_small;
        double r = 0.0;
        if (big) {
            r = (large_correlated ? 1.0 : -1.0) * large * f;
        } else {
            r = -small * f;
        }
        d.r.push_back(r);
        d.f.push_back(f);
        d.is_large.push_back(big);
    }
    return d;
}

BSensitivityReport b_sensitivity_experiment(const ConflictDataset& data, double a,
                                            std::span<const double> b_values,
                                            std::size_t grid_points) {
    if (data.r.empty() || data.r.size() != data.f.size() || data.r.size() != data.is_large.size()) {
        throw ValidationError("conflict dataset is empty or misaligned");
    }
    if (grid_points < 2) {
        throw ValidationError("b-sensitivity grid needs at least 2 points");
    }
    BSensitivityReport rep;
    rep.a = a;
    rep.grid_points = grid_points;
    const AxisRange w_axis{-1.0, 1.0, grid_points};
    const std::vector<double> ws = w_axis.points();

    std::vector<double> rhat(data.f.size());
    for (double b : b_values) {
        const GmadlParams p{a, b};
        p.validate();
        BSensitivityRow row;
        row.b = b;
        bool first = true;
        for (double w : ws) {
            for (std::size_t i = 0; i < rhat.size(); ++i) {
                rhat[i] = w * data.f[i];
            }
            const double loss = gmadl(data.r, rhat, p);
            if (first || loss < row.min_loss) {
                row.min_loss = loss;
                row.argmin_w = w;
                first = false;
            }
        }
        double small_mass = 0.0;
        double large_mass = 0.0;
        for (std::size_t i = 0; i < data.r.size(); ++i) {
            const double m = std::abs(gmadl_term(data.r[i], row.argmin_w * data.f[i], p));
            (data.is_large[i] ? large_mass : small_mass) += m;
        }
        const double total = small_mass + large_mass;
        row.small_share = total > 0.0 ? small_mass / total : 0.0;
        row.large_to_small = small_mass > 0.0 ? large_mass / small_mass
                                              : std::numeric_limits<double>::infinity();
        rep.rows.push_back(row);
    }

    rep.argmin_positive = std::all_of(rep.rows.begin(), rep.rows.end(),
                                      [](const BSensitivityRow& r) { return r.argmin_w > 0.0; });
    rep.share_decreasing = true;
    for (std::size_t k = 1; k < rep.rows.size(); ++k) {
        if (!(rep.rows[k].small_share < rep.rows[k - 1].small_share)) {
            rep.share_decreasing = false;
        }
    }
    return rep;
}

}  // namespace gmadl
