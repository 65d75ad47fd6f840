#include "gmadl/serialization.hpp"

#include <string>

#include "gmadl/error.hpp"

namespace gmadl {

namespace {

// Wraps nlohmann lookups so type errors surface as ValidationError.
template <typename T>
T field(const json& j, const char* key) {
    if (!j.contains(key)) {
        throw ValidationError(std::string("missing field '") + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad field '") + key + "': " + e.what());
    }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return fallback;
    }
    return field<T>(j, key);
}

}  // namespace

void to_json(json& j, const GmadlParams& p) { j = json{{"a", p.a}, {"b", p.b}}; }

void from_json(const json& j, GmadlParams& p) {
    p.a = field<double>(j, "a");
    p.b = field<double>(j, "b");
    p.validate();
}

void to_json(json& j, const GradCheckReport& r) {
    j = json{{"max_rel_error", r.max_rel_error},
             {"max_abs_error", r.max_abs_error},
             {"num_points", r.num_points},
             {"worst_point", {{"index", r.worst_index}, {"r", r.worst_r}, {"rhat", r.worst_rhat}}}};
}

void to_json(json& j, const ModelSpec& s) {
    j = json{{"kind", std::string(to_string(s.kind))},
             {"input_dim", s.input_dim},
             {"hidden_dim", s.hidden_dim},
             {"seed", s.seed}};
}

void from_json(const json& j, ModelSpec& s) {
    s.kind = parse_model_kind(field<std::string>(j, "kind"));
    s.input_dim = field<std::size_t>(j, "input_dim");
    s.hidden_dim = field_or<std::size_t>(j, "hidden_dim", 0);
    s.seed = field_or<std::uint64_t>(j, "seed", 0);
    s.validate();
}

void to_json(json& j, const ModelState& s) {
    j = json{{"spec", s.spec},
             {"weights", s.weights},
             {"optimizer", {{"m", s.optimizer.m}, {"v", s.optimizer.v}, {"step", s.optimizer.step}}}};
}

void from_json(const json& j, ModelState& s) {
    s.spec = field<ModelSpec>(j, "spec");
    s.weights = field<std::vector<double>>(j, "weights");
    if (s.weights.size() != s.spec.weight_count()) {
        throw ValidationError("checkpoint has " + std::to_string(s.weights.size()) +
                              " weights, layout requires " + std::to_string(s.spec.weight_count()));
    }
    s.optimizer = {};
    if (j.contains("optimizer")) {
        const json& o = j.at("optimizer");
        s.optimizer.m = field<std::vector<double>>(o, "m");
        s.optimizer.v = field<std::vector<double>>(o, "v");
        s.optimizer.step = field<std::uint64_t>(o, "step");
        if (s.optimizer.m.size() != s.weights.size() || s.optimizer.v.size() != s.weights.size()) {
            throw ValidationError("checkpoint optimizer moments do not match weight count");
        }
    } else {
        s.optimizer.m.assign(s.weights.size(), 0.0);
        s.optimizer.v.assign(s.weights.size(), 0.0);
    }
}

void to_json(json& j, const TrainConfig& c) {
    j = json{{"loss", std::string(to_string(c.loss))},
             {"a", c.params.a},
             {"b", c.params.b},
             {"epochs", c.epochs},
             {"learning_rate", c.learning_rate},
             {"batch_size", c.batch_size},
             {"grad_clip", c.grad_clip ? json(*c.grad_clip) : json(nullptr)}};
}

void from_json(const json& j, TrainConfig& c) {
    c.loss = parse_loss_kind(field_or<std::string>(j, "loss", "gmadl"));
    c.params.a = field_or<double>(j, "a", c.params.a);
    c.params.b = field_or<double>(j, "b", c.params.b);
    c.epochs = field_or<std::size_t>(j, "epochs", c.epochs);
    c.learning_rate = field_or<double>(j, "learning_rate", c.learning_rate);
    c.batch_size = field_or<std::size_t>(j, "batch_size", 0);
    if (j.contains("grad_clip") && !j.at("grad_clip").is_null()) {
        c.grad_clip = field<double>(j, "grad_clip");
    }
    c.validate();
}

void to_json(json& j, const Standardizer& s) { j = json{{"mean", s.mean}, {"std", s.stddev}}; }

void from_json(const json& j, Standardizer& s) {
    s.mean = field<double>(j, "mean");
    s.stddev = field<double>(j, "std");
    if (!(s.stddev > 0.0)) {
        throw ValidationError("standardizer std must be > 0");
    }
}

void to_json(json& j, const IndexRange& r) { j = json::array({r.begin, r.end}); }

void to_json(json& j, const WalkForwardPlan& p) {
    json windows = json::array();
    for (const auto& w : p.windows) {
        windows.push_back({{"train", w.train}, {"valid", w.valid}, {"test", w.test}});
    }
    j = json{{"step", p.step}, {"windows", windows}};
}

void to_json(json& j, const SignalPolicy& p) {
    j = json{{"threshold", p.threshold}, {"allow_short", p.allow_short}};
}

void from_json(const json& j, SignalPolicy& p) {
    p.threshold = field_or<double>(j, "threshold", 0.0);
    p.allow_short = field_or<bool>(j, "allow_short", true);
    p.validate();
}

void to_json(json& j, const PerformanceMetrics& m) {
    j = json{{"annualized_return", m.annualized_return},
             {"annualized_std", m.annualized_std},
             {"information_ratio", m.information_ratio},
             {"max_drawdown", m.max_drawdown},
             {"clamped", m.clamped},
             {"risk_weighted_return_proxy", "information_ratio"}};
}

void to_json(json& j, const BacktestReport& r) {
    j = json{{"terminal_equity", r.equity.empty() ? 1.0 : r.equity.back()},
             {"n_trades", r.n_trades},
             {"n_periods", r.positions.size()},
             {"metrics", r.metrics},
             {"equity", r.equity},
             {"positions", r.positions}};
}

void to_json(json& j, const SearchSpace& s) {
    json losses = json::array();
    for (LossKind k : s.loss_kinds) {
        losses.push_back(std::string(to_string(k)));
    }
    j = json{{"loss_kinds", losses},
             {"a_values", s.a_values},
             {"b_values", s.b_values},
             {"model_specs", s.model_specs},
             {"learning_rates", s.learning_rates},
             {"thresholds", s.thresholds},
             {"epochs", s.epochs},
             {"batch_size", s.batch_size},
             {"exhaustive", s.exhaustive},
             {"budget", s.budget}};
}

void from_json(const json& j, SearchSpace& s) {
    s = SearchSpace{};
    s.loss_kinds.clear();
    for (const auto& name : field<std::vector<std::string>>(j, "loss_kinds")) {
        s.loss_kinds.push_back(parse_loss_kind(name));
    }
    s.a_values = field_or<std::vector<double>>(j, "a_values", s.a_values);
    s.b_values = field_or<std::vector<double>>(j, "b_values", s.b_values);
    if (!j.contains("model_specs") || !j.at("model_specs").is_array()) {
        throw ValidationError("missing array field 'model_specs'");
    }
    for (const auto& m : j.at("model_specs")) {
        s.model_specs.push_back(m.get<ModelSpec>());
    }
    s.learning_rates = field_or<std::vector<double>>(j, "learning_rates", s.learning_rates);
    s.thresholds = field_or<std::vector<double>>(j, "thresholds", s.thresholds);
    s.epochs = field_or<std::size_t>(j, "epochs", s.epochs);
    s.batch_size = field_or<std::size_t>(j, "batch_size", s.batch_size);
    s.exhaustive = field_or<bool>(j, "exhaustive", s.exhaustive);
    s.budget = field_or<std::size_t>(j, "budget", s.budget);
    s.validate();
}

void to_json(json& j, const TrialConfig& c) {
    j = json{{"key", c.key()},
             {"loss", std::string(to_string(c.loss))},
             {"model", c.model},
             {"learning_rate", c.learning_rate},
             {"threshold", c.threshold},
             {"grid_index", c.grid_index}};
    if (c.loss == LossKind::gmadl) {
        j["params"] = c.params;
    }
}

void to_json(json& j, const TrialResult& r) {
    json tests = json::array();
    for (const auto& t : r.test_reports) {
        if (t) {
            tests.push_back({{"terminal_equity", t->equity.back()},
                             {"n_trades", t->n_trades},
                             {"metrics", t->metrics}});
        } else {
            tests.push_back(nullptr);
        }
    }
    j = json{{"config", r.config},
             {"window_objectives", r.window_objectives},
             {"window_trades", r.window_trades},
             {"aggregate_objective", r.aggregate},
             {"total_validation_trades", r.total_trades},
             {"test_reports", tests}};
}

void to_json(json& j, const SearchResult& r) {
    json selections = json::array();
    for (const auto& s : r.selections) {
        selections.push_back({{"window", s.window},
                              {"trial_rank", s.trial},
                              {"key", s.key},
                              {"test_terminal_equity", s.test_report.equity.back()},
                              {"test_n_trades", s.test_report.n_trades}});
    }
    j = json{{"trials", r.trials}, {"selections", selections}, {"out_of_sample", r.out_of_sample}};
}

void to_json(json& j, const BSensitivityReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"b", row.b},
                        {"argmin_w", row.argmin_w},
                        {"min_loss", row.min_loss},
                        {"small_share", row.small_share},
                        {"large_to_small", row.large_to_small}});
    }
    j = json{{"a", r.a},
             {"grid_points", r.grid_points},
             {"rows", rows},
             {"argmin_positive", r.argmin_positive},
             {"share_decreasing", r.share_decreasing}};
}

}  // namespace gmadl
