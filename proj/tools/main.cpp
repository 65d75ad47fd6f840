// gmadl command-line front end.
//
// Exit codes: 0 success, 1 runtime or I/O failure, 2 usage/config/validation
// error, 3 data error.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>

#include "gmadl/backtest.hpp"
#include "gmadl/data.hpp"
#include "gmadl/error.hpp"
#include "gmadl/loss.hpp"
#include "gmadl/models.hpp"
#include "gmadl/serialization.hpp"
#include "gmadl/tuning.hpp"

namespace fs = std::filesystem;
using namespace gmadl;

namespace {

enum ExitCode { kOk = 0, kRuntime = 1, kConfig = 2, kData = 3 };

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct RunOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    bool no_timestamp = false;
};

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out = open_out(path);
    out << text;
    if (!out.flush()) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

fs::path prepare_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    }
    return dir;
}

json read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config '" + path + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return fallback;
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

const json& section(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_object()) {
        throw ConfigError(std::string("config needs an object '") + key + "'");
    }
    return j.at(key);
}

// Data block: {"path", "timestamp_column", "price_column"}. Relative paths
// resolve against the config file's directory.
struct DataSource {
    fs::path path;
    PriceCsvFormat format;

    json to_json() const {
        return {{"path", path.string()},
                {"timestamp_column", format.timestamp_column},
                {"price_column", format.price_column}};
    }
};

DataSource data_source(const json& cfg, const std::string& config_path) {
    const json& d = section(cfg, "data");
    DataSource src;
    src.path = get_or<std::string>(d, "path", "");
    if (src.path.empty()) {
        throw ConfigError("config 'data.path' is required");
    }
    if (src.path.is_relative()) {
        src.path = fs::path(config_path).parent_path() / src.path;
    }
    src.path = src.path.lexically_normal();
    src.format.timestamp_column = get_or<std::string>(d, "timestamp_column", "timestamp");
    src.format.price_column = get_or<std::string>(d, "price_column", "");
    return src;
}

ReturnSeries load_returns(const DataSource& src) {
    if (!fs::exists(src.path)) {
        throw DataError("data file '" + src.path.string() + "' does not exist");
    }
    const ReturnSeries r = simple_returns(load_prices(src.path, src.format));
    try {
        r.validate();
    } catch (const ValidationError& e) {
        throw DataError(e.what());
    }
    return r;
}

void print_summary(std::optional<double> final_loss, const BacktestReport& rep) {
    if (final_loss) {
        std::printf("final_loss=%.6e ", *final_loss);
    }
    std::printf("terminal_equity=%.6f ir=%.4f max_dd=%.4f n_trades=%zu\n", rep.equity.back(),
                rep.metrics.information_ratio, rep.metrics.max_drawdown, rep.n_trades);
}

json summary_json(std::optional<double> final_loss, const BacktestReport& rep,
                  const RunOptions& opt) {
    json s;
    if (!opt.no_timestamp) {
        s["generated_at"] = utc_now();
    }
    if (final_loss) {
        s["final_loss"] = *final_loss;
    }
    s["terminal_equity"] = rep.equity.back();
    s["n_trades"] = rep.n_trades;
    s["metrics"] = rep.metrics;
    return s;
}

void write_equity(const fs::path& path, const BacktestReport& rep) {
    std::ofstream out = open_out(path);
    write_equity_csv(out, rep);
    if (!out.flush()) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

// Shared backtest settings.
struct TradeSettings {
    SignalPolicy signal;
    CostModel cost;
    std::size_t periods_per_year = 252;

    json to_json() const {
        return {{"signal", signal},
                {"cost_rate", cost.rate},
                {"periods_per_year", periods_per_year}};
    }
};

TradeSettings trade_settings(const json& cfg) {
    TradeSettings t;
    if (cfg.contains("signal")) {
        t.signal = cfg.at("signal").get<SignalPolicy>();
    }
    t.cost.rate = get_or<double>(cfg, "cost_rate", 0.0);
    t.cost.validate();
    t.periods_per_year = get_or<std::size_t>(cfg, "periods_per_year", 252);
    if (t.periods_per_year < 1) {
        throw ConfigError("periods_per_year must be >= 1");
    }
    return t;
}

struct Fitted {
    ModelState state;
    Standardizer scaler;
    double final_loss = 0.0;
    std::vector<double> loss_history;
};

// Fits a model on rows whose targets lie in returns[0, fit_end).
Fitted fit(const ReturnSeries& r, std::size_t fit_end, ModelSpec spec, const TrainConfig& tc) {
    const std::size_t lb = spec.input_dim;
    if (fit_end <= lb) {
        throw ValidationError("not enough returns for lookback " + std::to_string(lb));
    }
    Fitted f;
    f.scaler = Standardizer::fit(std::span<const double>(r.values).first(fit_end));
    WindowedDataset d = make_windows(std::span<const double>(r.values).first(fit_end), lb);
    f.scaler.apply(d);
    TrainResult res = tc.loss == LossKind::madl ? train_with_madl_demo(init_model(spec), d, tc)
                                                : train(init_model(spec), d, tc);
    f.state = std::move(res.state);
    f.loss_history = std::move(res.loss_history);
    f.final_loss = f.loss_history.empty() ? evaluate_loss(tc.loss, d.targets, predict(f.state, d), tc.params)
                                          : f.loss_history.back();
    return f;
}

// Backtests predictions for targets in returns[begin, end).
BacktestReport evaluate(const ReturnSeries& r, std::size_t begin, std::size_t end,
                        const ModelState& state, const Standardizer& scaler,
                        const TradeSettings& ts) {
    const std::size_t lb = state.spec.input_dim;
    begin = std::max(begin, lb);
    if (end <= begin) {
        throw ValidationError("evaluation range holds no sample");
    }
    WindowedDataset all = make_windows(r.values, lb);
    WindowedDataset part = all.slice(begin - lb, end - lb);
    scaler.apply(part);
    const std::vector<double> preds = predict(state, part);
    return run_backtest(part.targets, signals(preds, ts.signal), ts.cost, ts.periods_per_year);
}

ModelSpec model_spec(const json& cfg, std::uint64_t seed) {
    json m = section(cfg, "model");
    m["seed"] = seed;
    return m.get<ModelSpec>();
}

int cmd_train(const RunOptions& opt) {
    const json cfg = read_config(opt.config_path);
    const std::uint64_t seed = opt.seed.value_or(get_or<std::uint64_t>(cfg, "seed", 42));
    const DataSource src = data_source(cfg, opt.config_path);
    const ModelSpec spec = model_spec(cfg, seed);
    const TrainConfig tc = cfg.contains("train") ? cfg.at("train").get<TrainConfig>() : TrainConfig{};
    const TradeSettings ts = trade_settings(cfg);

    const fs::path out = prepare_out_dir(opt.out_dir);
    write_json(out / "config.resolved.json", {{"command", "train"},
                                              {"seed", seed},
                                              {"data", src.to_json()},
                                              {"model", spec},
                                              {"train", tc},
                                              {"backtest", ts.to_json()}});

    const ReturnSeries r = load_returns(src);
    const Fitted f = fit(r, r.size(), spec, tc);
    const BacktestReport rep = evaluate(r, 0, r.size(), f.state, f.scaler, ts);

    write_json(out / "model.json", {{"model", f.state}, {"standardizer", f.scaler}});
    {
        std::ofstream h = open_out(out / "loss_history.csv");
        h << "epoch,loss\n";
        char line[64];
        for (std::size_t e = 0; e < f.loss_history.size(); ++e) {
            std::snprintf(line, sizeof(line), "%zu,%.12e\n", e + 1, f.loss_history[e]);
            h << line;
        }
    }
    write_equity(out / "equity.csv", rep);
    json summary = summary_json(f.final_loss, rep, opt);
    summary["in_sample"] = true;
    write_json(out / "summary.json", summary);
    print_summary(f.final_loss, rep);
    return kOk;
}

// Either replays a checkpoint over the whole series, or trains on the first
// train_fraction of returns and trades the remainder.
int cmd_backtest(const RunOptions& opt) {
    const json cfg = read_config(opt.config_path);
    const std::uint64_t seed = opt.seed.value_or(get_or<std::uint64_t>(cfg, "seed", 42));
    const DataSource src = data_source(cfg, opt.config_path);
    const TradeSettings ts = trade_settings(cfg);

    json resolved{{"command", "backtest"}, {"seed", seed}, {"data", src.to_json()},
                  {"backtest", ts.to_json()}};
    std::optional<fs::path> checkpoint;
    ModelSpec spec;
    TrainConfig tc;
    double train_fraction = 0.0;
    if (cfg.contains("checkpoint")) {
        checkpoint = fs::path(get_or<std::string>(cfg, "checkpoint", ""));
        if (checkpoint->is_relative()) {
            checkpoint = (fs::path(opt.config_path).parent_path() / *checkpoint).lexically_normal();
        }
        resolved["checkpoint"] = checkpoint->string();
    } else {
        spec = model_spec(cfg, seed);
        tc = cfg.contains("train") ? cfg.at("train").get<TrainConfig>() : TrainConfig{};
        train_fraction = get_or<double>(cfg, "train_fraction", 0.7);
        if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
            throw ConfigError("train_fraction must lie in (0, 1)");
        }
        resolved["model"] = spec;
        resolved["train"] = tc;
        resolved["train_fraction"] = train_fraction;
    }

    const fs::path out = prepare_out_dir(opt.out_dir);
    write_json(out / "config.resolved.json", resolved);

    const ReturnSeries r = load_returns(src);
    BacktestReport rep;
    std::optional<double> final_loss;
    if (checkpoint) {
        const json ck = read_config(checkpoint->string());
        const ModelState state = section(ck, "model").get<ModelState>();
        const Standardizer scaler = section(ck, "standardizer").get<Standardizer>();
        rep = evaluate(r, 0, r.size(), state, scaler, ts);
    } else {
        const auto split = static_cast<std::size_t>(train_fraction * static_cast<double>(r.size()));
        const Fitted f = fit(r, split, spec, tc);
        final_loss = f.final_loss;
        rep = evaluate(r, split, r.size(), f.state, f.scaler, ts);
    }

    write_equity(out / "equity.csv", rep);
    json report = summary_json(final_loss, rep, opt);
    report["report"] = rep;
    write_json(out / "backtest.json", report);
    print_summary(final_loss, rep);
    return kOk;
}

int cmd_walkforward(const RunOptions& opt) {
    const json cfg = read_config(opt.config_path);
    const DataSource src = data_source(cfg, opt.config_path);
    const json& plan_cfg = section(cfg, "plan");
    const auto train_n = get_or<std::size_t>(plan_cfg, "train", 0);
    const auto valid_n = get_or<std::size_t>(plan_cfg, "valid", 0);
    const auto test_n = get_or<std::size_t>(plan_cfg, "test", 0);
    const SearchSpace space = section(cfg, "search").get<SearchSpace>();

    ExperimentSettings settings;
    settings.objective = parse_objective(get_or<std::string>(cfg, "objective", "validation_loss"));
    settings.seed = opt.seed.value_or(get_or<std::uint64_t>(cfg, "seed", 42));
    settings.cost.rate = get_or<double>(cfg, "cost_rate", 0.0);
    settings.cost.validate();
    settings.allow_short = get_or<bool>(cfg, "allow_short", true);
    settings.periods_per_year = get_or<std::size_t>(cfg, "periods_per_year", 252);
    settings.threads = opt.threads.value_or(default_thread_count());

    const fs::path out = prepare_out_dir(opt.out_dir);
    write_json(out / "config.resolved.json",
               {{"command", "walkforward"},
                {"seed", settings.seed},
                {"data", src.to_json()},
                {"plan", {{"train", train_n}, {"valid", valid_n}, {"test", test_n}}},
                {"search", space},
                {"objective", std::string(to_string(settings.objective))},
                {"cost_rate", settings.cost.rate},
                {"allow_short", settings.allow_short},
                {"periods_per_year", settings.periods_per_year}});

    const ReturnSeries r = load_returns(src);
    const WalkForwardPlan plan = walk_forward_plan(r.size(), train_n, valid_n, test_n);
    const SearchResult res = run_search(r, plan, space, settings);

    write_json(out / "trials.json", {{"plan", plan}, {"result", res}});
    write_equity(out / "equity.csv", res.out_of_sample);
    json summary = summary_json(std::nullopt, res.out_of_sample, opt);
    json picks = json::array();
    for (const auto& sel : res.selections) {
        picks.push_back(sel.key);
    }
    summary["selections"] = picks;
    write_json(out / "summary.json", summary);
    print_summary(std::nullopt, res.out_of_sample);
    return kOk;
}

struct SurfaceOptions {
    std::string loss;
    std::optional<double> a;
    std::optional<double> b;
    double r_min = -0.1;
    double r_max = 0.1;
    double rhat_min = -0.1;
    double rhat_max = 0.1;
    std::size_t n = 101;
    std::string out;
};

int cmd_surface(const SurfaceOptions& o) {
    const LossKind kind = parse_loss_kind(o.loss);
    std::optional<GmadlParams> params;
    if (kind == LossKind::gmadl) {
        params = GmadlParams{*o.a, *o.b};
    }
    const SurfaceGrid grid =
        surface_grid(kind, params, {o.r_min, o.r_max, o.n}, {o.rhat_min, o.rhat_max, o.n});
    std::ofstream out = open_out(o.out);
    write_surface_csv(out, grid);
    if (!out.flush()) {
        throw IoError("failed writing '" + o.out + "'");
    }
    std::printf("wrote %zu rows to %s\n", grid.z.size(), o.out.c_str());
    return kOk;
}

struct SynthOptions {
    std::size_t n = 2000;
    double phi = 0.3;
    double sigma = 0.01;
    std::uint64_t seed = 42;
    std::string out;
};

int cmd_synth(const SynthOptions& o) {
    const PriceSeries p = synthetic_ar_prices(o.n, o.phi, o.sigma, o.seed);
    std::ofstream out = open_out(o.out);
    write_prices_csv(out, p);
    if (!out.flush()) {
        throw IoError("failed writing '" + o.out + "'");
    }
    std::printf("wrote %zu prices to %s\n", p.size(), o.out.c_str());
    return kOk;
}

void add_run_options(CLI::App* cmd, RunOptions& opt) {
    cmd->add_option("config", opt.config_path, "JSON experiment config")->required();
    cmd->add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--seed", opt.seed, "Master seed (overrides config)");
    cmd->add_option("--threads", opt.threads, "Worker threads for trials")->check(CLI::PositiveNumber);
    cmd->add_flag("--no-timestamp", opt.no_timestamp, "Omit generated_at from reports");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gmadl: directional-loss training, backtesting and walk-forward search"};
    app.require_subcommand(1);

    SurfaceOptions surf;
    CLI::App* surface = app.add_subcommand("surface", "Write a loss surface grid as CSV");
    surface->add_option("--loss", surf.loss, "madl or gmadl")
        ->required()
        ->check(CLI::IsMember({"madl", "gmadl"}));
    surface->add_option("--a", surf.a, "Slope parameter a (gmadl)");
    surface->add_option("--b", surf.b, "Magnitude exponent b (gmadl)");
    surface->add_option("--r-min", surf.r_min)->capture_default_str();
    surface->add_option("--r-max", surf.r_max)->capture_default_str();
    surface->add_option("--rhat-min", surf.rhat_min)->capture_default_str();
    surface->add_option("--rhat-max", surf.rhat_max)->capture_default_str();
    surface->add_option("--n", surf.n, "Points per axis")->capture_default_str();
    surface->add_option("--out", surf.out, "Output CSV path")->required();

    RunOptions train_opt;
    RunOptions backtest_opt;
    RunOptions wf_opt;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a model on a price series");
    CLI::App* backtest_cmd = app.add_subcommand("backtest", "Backtest model signals");
    CLI::App* wf_cmd = app.add_subcommand("walkforward", "Walk-forward hyperparameter search");
    add_run_options(train_cmd, train_opt);
    add_run_options(backtest_cmd, backtest_opt);
    add_run_options(wf_cmd, wf_opt);

    SynthOptions synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic AR(1) price CSV");
    synth_cmd->add_option("--n", synth.n, "Number of prices")->capture_default_str();
    synth_cmd->add_option("--phi", synth.phi, "AR(1) coefficient of returns")->capture_default_str();
    synth_cmd->add_option("--sigma", synth.sigma, "Innovation scale")->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
    synth_cmd->add_option("--out", synth.out, "Output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (surface->parsed()) {
            if (surf.loss == "gmadl" && (!surf.a || !surf.b)) {
                std::cerr << "surface: --loss gmadl requires both --a and --b\n\n"
                          << surface->help();
                return kConfig;
            }
            return cmd_surface(surf);
        }
        if (train_cmd->parsed()) {
            return cmd_train(train_opt);
        }
        if (backtest_cmd->parsed()) {
            return cmd_backtest(backtest_opt);
        }
        if (wf_cmd->parsed()) {
            return cmd_walkforward(wf_opt);
        }
        if (synth_cmd->parsed()) {
            return cmd_synth(synth);
        }
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kConfig;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kRuntime;
}
