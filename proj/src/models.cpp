#include "gmadl/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "gmadl/error.hpp"
#include "gmadl/gradients.hpp"

namespace gmadl {

namespace {

constexpr std::size_t kGates = 4;
constexpr std::size_t kForgetGate = 1;
constexpr std::size_t kCellGate = 2;

// Offsets into the flat weight vector; see the layout table in models.hpp.
struct Layout {
    std::size_t I = 0;
    std::size_t H = 0;

    // mlp
    std::size_t mlp_w1() const { return 0; }
    std::size_t mlp_b1() const { return H * I; }
    std::size_t mlp_out() const { return H * I + H; }

    // rnn
    std::size_t rnn_wx() const { return 0; }
    std::size_t rnn_wh() const { return H; }
    std::size_t rnn_bh() const { return H + H * H; }
    std::size_t rnn_out() const { return 2 * H + H * H; }

    // lstm
    std::size_t gate_block() const { return H + H * H + H; }
    std::size_t lstm_w(std::size_t g) const { return g * gate_block(); }
    std::size_t lstm_u(std::size_t g) const { return g * gate_block() + H; }
    std::size_t lstm_b(std::size_t g) const { return g * gate_block() + H + H * H; }
    std::size_t lstm_out() const { return kGates * gate_block(); }
};

Layout layout_of(const ModelSpec& spec) { return Layout{spec.input_dim, spec.hidden_dim}; }

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        s += a[k] * b[k];
    }
    return s;
}

// ---- linear --------------------------------------------------------------

double linear_forward(const Layout& L, std::span<const double> w, std::span<const double> x) {
    return dot(w.data(), x.data(), L.I) + w[L.I];
}

void linear_backward(const Layout& L, std::span<const double> x, double dy,
                     std::span<double> g) {
    for (std::size_t k = 0; k < L.I; ++k) {
        g[k] += dy * x[k];
    }
    g[L.I] += dy;
}

// ---- mlp -----------------------------------------------------------------

double mlp_forward(const Layout& L, std::span<const double> w, std::span<const double> x,
                   std::vector<double>& hidden) {
    hidden.resize(L.H);
    for (std::size_t j = 0; j < L.H; ++j) {
        const double z = dot(&w[L.mlp_w1() + j * L.I], x.data(), L.I) + w[L.mlp_b1() + j];
        hidden[j] = std::tanh(z);
    }
    return dot(&w[L.mlp_out()], hidden.data(), L.H) + w[L.mlp_out() + L.H];
}

void mlp_backward(const Layout& L, std::span<const double> w, std::span<const double> x,
                  const std::vector<double>& hidden, double dy, std::span<double> g) {
    for (std::size_t j = 0; j < L.H; ++j) {
        g[L.mlp_out() + j] += dy * hidden[j];
        const double dz = dy * w[L.mlp_out() + j] * (1.0 - hidden[j] * hidden[j]);
        for (std::size_t k = 0; k < L.I; ++k) {
            g[L.mlp_w1() + j * L.I + k] += dz * x[k];
        }
        g[L.mlp_b1() + j] += dz;
    }
    g[L.mlp_out() + L.H] += dy;
}

// ---- rnn -----------------------------------------------------------------

// states[t] is the hidden vector after consuming t inputs; states[0] = 0.
double rnn_forward(const Layout& L, std::span<const double> w, std::span<const double> x,
                   std::vector<std::vector<double>>& states) {
    const std::size_t T = x.size();
    states.assign(T + 1, std::vector<double>(L.H, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
        const auto& prev = states[t];
        auto& next = states[t + 1];
        for (std::size_t j = 0; j < L.H; ++j) {
            const double z = w[L.rnn_wx() + j] * x[t] + dot(&w[L.rnn_wh() + j * L.H], prev.data(), L.H) +
                             w[L.rnn_bh() + j];
            next[j] = std::tanh(z);
        }
    }
    return dot(&w[L.rnn_out()], states[T].data(), L.H) + w[L.rnn_out() + L.H];
}

void rnn_backward(const Layout& L, std::span<const double> w, std::span<const double> x,
                  const std::vector<std::vector<double>>& states, double dy, std::span<double> g) {
    const std::size_t T = x.size();
    std::vector<double> dh(L.H);
    std::vector<double> da(L.H);
    for (std::size_t j = 0; j < L.H; ++j) {
        g[L.rnn_out() + j] += dy * states[T][j];
        dh[j] = dy * w[L.rnn_out() + j];
    }
    g[L.rnn_out() + L.H] += dy;

    for (std::size_t t = T; t-- > 0;) {
        const auto& h = states[t + 1];
        const auto& prev = states[t];
        for (std::size_t j = 0; j < L.H; ++j) {
            da[j] = dh[j] * (1.0 - h[j] * h[j]);
            g[L.rnn_wx() + j] += da[j] * x[t];
            for (std::size_t k = 0; k < L.H; ++k) {
                g[L.rnn_wh() + j * L.H + k] += da[j] * prev[k];
            }
            g[L.rnn_bh() + j] += da[j];
        }
        for (std::size_t k = 0; k < L.H; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < L.H; ++j) {
                s += w[L.rnn_wh() + j * L.H + k] * da[j];
            }
            dh[k] = s;
        }
    }
}

// ---- lstm ----------------------------------------------------------------

struct LstmTrace {
    // Per step t (1-based in h/c, 0-based in gates): gate activations
    // [gate][t][j], hidden h[t][j], cell c[t][j]; h[0] = c[0] = 0.
    std::vector<std::vector<std::vector<double>>> gates;
    std::vector<std::vector<double>> h;
    std::vector<std::vector<double>> c;
};

double lstm_forward(const Layout& L, std::span<const double> w, std::span<const double> x,
                    LstmTrace& tr) {
    const std::size_t T = x.size();
    tr.gates.assign(kGates, std::vector<std::vector<double>>(T, std::vector<double>(L.H)));
    tr.h.assign(T + 1, std::vector<double>(L.H, 0.0));
    tr.c.assign(T + 1, std::vector<double>(L.H, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
        const auto& hprev = tr.h[t];
        for (std::size_t gi = 0; gi < kGates; ++gi) {
            for (std::size_t j = 0; j < L.H; ++j) {
                const double z = w[L.lstm_w(gi) + j] * x[t] +
                                 dot(&w[L.lstm_u(gi) + j * L.H], hprev.data(), L.H) +
                                 w[L.lstm_b(gi) + j];
                tr.gates[gi][t][j] = gi == kCellGate ? std::tanh(z) : sigmoid(z);
            }
        }
        for (std::size_t j = 0; j < L.H; ++j) {
            const double in = tr.gates[0][t][j];
            const double fg = tr.gates[1][t][j];
            const double cg = tr.gates[2][t][j];
            const double og = tr.gates[3][t][j];
            tr.c[t + 1][j] = fg * tr.c[t][j] + in * cg;
            tr.h[t + 1][j] = og * std::tanh(tr.c[t + 1][j]);
        }
    }
    return dot(&w[L.lstm_out()], tr.h[T].data(), L.H) + w[L.lstm_out() + L.H];
}

void lstm_backward(const Layout& L, std::span<const double> w, std::span<const double> x,
                   const LstmTrace& tr, double dy, std::span<double> g) {
    const std::size_t T = x.size();
    std::vector<double> dh(L.H);
    std::vector<double> dc(L.H, 0.0);
    std::vector<double> dh_prev(L.H);
    std::vector<std::vector<double>> dz(kGates, std::vector<double>(L.H));

    for (std::size_t j = 0; j < L.H; ++j) {
        g[L.lstm_out() + j] += dy * tr.h[T][j];
        dh[j] = dy * w[L.lstm_out() + j];
    }
    g[L.lstm_out() + L.H] += dy;

    for (std::size_t t = T; t-- > 0;) {
        for (std::size_t j = 0; j < L.H; ++j) {
            const double in = tr.gates[0][t][j];
            const double fg = tr.gates[1][t][j];
            const double cg = tr.gates[2][t][j];
            const double og = tr.gates[3][t][j];
            const double tc = std::tanh(tr.c[t + 1][j]);
            dc[j] += dh[j] * og * (1.0 - tc * tc);
            dz[0][j] = dc[j] * cg * in * (1.0 - in);
            dz[1][j] = dc[j] * tr.c[t][j] * fg * (1.0 - fg);
            dz[2][j] = dc[j] * in * (1.0 - cg * cg);
            dz[3][j] = dh[j] * tc * og * (1.0 - og);
            dc[j] *= fg;
        }
        std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
        const auto& hprev = tr.h[t];
        for (std::size_t gi = 0; gi < kGates; ++gi) {
            for (std::size_t j = 0; j < L.H; ++j) {
                const double d = dz[gi][j];
                g[L.lstm_w(gi) + j] += d * x[t];
                const std::size_t urow = L.lstm_u(gi) + j * L.H;
                for (std::size_t k = 0; k < L.H; ++k) {
                    g[urow + k] += d * hprev[k];
                    dh_prev[k] += w[urow + k] * d;
                }
                g[L.lstm_b(gi) + j] += d;
            }
        }
        dh.swap(dh_prev);
    }
}

// Forward with whatever cache the kind needs, then optionally backward.
class Evaluator {
public:
    Evaluator(const ModelSpec& spec, std::span<const double> weights)
        : spec_(spec), layout_(layout_of(spec)), w_(weights) {}

    double forward(std::span<const double> x) {
        switch (spec_.kind) {
            case ModelKind::linear:
                return linear_forward(layout_, w_, x);
            case ModelKind::mlp:
                return mlp_forward(layout_, w_, x, hidden_);
            case ModelKind::rnn:
                return rnn_forward(layout_, w_, x, states_);
            case ModelKind::lstm:
                return lstm_forward(layout_, w_, x, trace_);
        }
        return 0.0;
    }

    // Must follow forward() on the same x.
    void backward(std::span<const double> x, double dy, std::span<double> g) const {
        switch (spec_.kind) {
            case ModelKind::linear:
                linear_backward(layout_, x, dy, g);
                break;
            case ModelKind::mlp:
                mlp_backward(layout_, w_, x, hidden_, dy, g);
                break;
            case ModelKind::rnn:
                rnn_backward(layout_, w_, x, states_, dy, g);
                break;
            case ModelKind::lstm:
                lstm_backward(layout_, w_, x, trace_, dy, g);
                break;
        }
    }

private:
    const ModelSpec& spec_;
    Layout layout_;
    std::span<const double> w_;
    std::vector<double> hidden_;
    std::vector<std::vector<double>> states_;
    LstmTrace trace_;
};

void check_dims(const ModelSpec& spec, std::span<const double> weights) {
    if (weights.size() != spec.weight_count()) {
        throw ValidationError("weight vector has " + std::to_string(weights.size()) +
                              " entries, layout requires " + std::to_string(spec.weight_count()));
    }
}

void check_window(const ModelSpec& spec, std::size_t len) {
    if (len != spec.input_dim) {
        throw ValidationError("window length " + std::to_string(len) + " != input_dim " +
                              std::to_string(spec.input_dim));
    }
}

enum class Head { analytic, madl_numeric };

// Gradient of the batch loss w.r.t. weights, given indices into `data`.
double batch_gradient(const ModelSpec& spec, std::span<const double> weights,
                      const WindowedDataset& data, std::span<const std::size_t> idx,
                      const TrainConfig& cfg, Head head, std::vector<double>& grad) {
    Evaluator ev(spec, weights);
    std::vector<double> preds(idx.size());
    std::vector<double> targets(idx.size());
    for (std::size_t n = 0; n < idx.size(); ++n) {
        preds[n] = ev.forward(data.row(idx[n]));
        targets[n] = data.targets[idx[n]];
    }

    double loss = 0.0;
    std::vector<double> head_grad;
    if (head == Head::madl_numeric) {
        loss = madl(targets, preds);
        head_grad = madl_numeric_grad(targets, preds, cfg.fd_step);
    } else {
        loss = evaluate_loss(cfg.loss, targets, preds, cfg.params);
        head_grad = loss_grad(cfg.loss, targets, preds, cfg.params);
    }

    grad.assign(weights.size(), 0.0);
    for (std::size_t n = 0; n < idx.size(); ++n) {
        if (head_grad[n] == 0.0) {
            continue;
        }
        ev.forward(data.row(idx[n]));
        ev.backward(data.row(idx[n]), head_grad[n], grad);
    }
    return loss;
}

void clip_global_norm(std::vector<double>& grad, double max_norm) {
    double sq = 0.0;
    for (double g : grad) {
        sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (double& g : grad) {
            g *= scale;
        }
    }
}

void adam_step(ModelState& state, const std::vector<double>& grad, const TrainConfig& cfg) {
    auto& opt = state.optimizer;
    if (opt.m.size() != grad.size()) {
        opt.m.assign(grad.size(), 0.0);
        opt.v.assign(grad.size(), 0.0);
    }
    ++opt.step;
    const double t = static_cast<double>(opt.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t k = 0; k < grad.size(); ++k) {
        opt.m[k] = cfg.beta1 * opt.m[k] + (1.0 - cfg.beta1) * grad[k];
        opt.v[k] = cfg.beta2 * opt.v[k] + (1.0 - cfg.beta2) * grad[k] * grad[k];
        const double mhat = opt.m[k] / c1;
        const double vhat = opt.v[k] / c2;
        state.weights[k] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double full_loss(const ModelState& state, const WindowedDataset& data, const TrainConfig& cfg,
                 Head head) {
    const std::vector<double> preds = predict(state, data);
    if (head == Head::madl_numeric) {
        return madl(data.targets, preds);
    }
    return evaluate_loss(cfg.loss, data.targets, preds, cfg.params);
}

TrainResult train_impl(ModelState state, const WindowedDataset& data, const TrainConfig& cfg,
                       Head head) {
    cfg.validate();
    state.spec.validate();
    check_dims(state.spec, state.weights);
    if (data.empty()) {
        throw ValidationError("training dataset is empty");
    }
    check_window(state.spec, data.lookback);

    std::optional<double> clip = cfg.grad_clip;
    if (!clip && (state.spec.kind == ModelKind::rnn || state.spec.kind == ModelKind::lstm)) {
        clip = kDefaultRecurrentClip;
    }

    const std::size_t n = data.size();
    const std::size_t batch = (cfg.batch_size == 0 || cfg.batch_size >= n) ? n : cfg.batch_size;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(state.spec.seed ^ 0x5DEECE66DULL);

    TrainResult result;
    result.loss_history.reserve(cfg.epochs);
    std::vector<double> grad;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (batch < n) {
            std::shuffle(order.begin(), order.end(), shuffle_rng);
        }
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(n, start + batch);
            const std::span<const std::size_t> idx(order.data() + start, stop - start);
            const double loss = batch_gradient(state.spec, state.weights, data, idx, cfg, head, grad);
            if (!std::isfinite(loss) || !all_finite(grad)) {
                throw TrainingError("non-finite loss or gradient at epoch " + std::to_string(epoch) +
                                    ", batch starting at " + std::to_string(start));
            }
            if (clip) {
                clip_global_norm(grad, *clip);
            }
            adam_step(state, grad, cfg);
            if (!all_finite(state.weights)) {
                throw TrainingError("non-finite weights after update at epoch " +
                                    std::to_string(epoch));
            }
        }
        const double epoch_loss = full_loss(state, data, cfg, head);
        if (!std::isfinite(epoch_loss)) {
            throw TrainingError("non-finite training loss after epoch " + std::to_string(epoch));
        }
        result.loss_history.push_back(epoch_loss);
    }
    result.state = std::move(state);
    return result;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::linear:
            return "linear";
        case ModelKind::mlp:
            return "mlp";
        case ModelKind::rnn:
            return "rnn";
        case ModelKind::lstm:
            return "lstm";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
    if (name == "linear") {
        return ModelKind::linear;
    }
    if (name == "mlp") {
        return ModelKind::mlp;
    }
    if (name == "rnn") {
        return ModelKind::rnn;
    }
    if (name == "lstm") {
        return ModelKind::lstm;
    }
    throw ValidationError("unknown model kind '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
    if (input_dim < 1) {
        throw ValidationError("model spec: input_dim must be >= 1");
    }
    if (kind != ModelKind::linear && hidden_dim < 1) {
        throw ValidationError("model spec: hidden_dim must be >= 1 for " +
                              std::string(to_string(kind)));
    }
}

std::size_t ModelSpec::weight_count() const {
    const std::size_t I = input_dim;
    const std::size_t H = hidden_dim;
    switch (kind) {
        case ModelKind::linear:
            return I + 1;
        case ModelKind::mlp:
            return H * I + H + H + 1;
        case ModelKind::rnn:
            return H + H * H + H + H + 1;
        case ModelKind::lstm:
            return kGates * (H * (1 + H) + H) + H + 1;
    }
    return 0;
}

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw ValidationError("train config: epochs must be >= 1");
    }
    if (!std::isfinite(learning_rate) || !(learning_rate > 0.0)) {
        throw ValidationError("train config: learning_rate must be > 0");
    }
    if (grad_clip && !(*grad_clip > 0.0)) {
        throw ValidationError("train config: grad_clip must be > 0 when set");
    }
    if (!(fd_step > 0.0)) {
        throw ValidationError("train config: fd_step must be > 0");
    }
    if (loss == LossKind::gmadl) {
        params.validate();
    }
}

ModelState init_model(const ModelSpec& spec) {
    spec.validate();
    ModelState state;
    state.spec = spec;
    state.weights.assign(spec.weight_count(), 0.0);
    state.optimizer.m.assign(state.weights.size(), 0.0);
    state.optimizer.v.assign(state.weights.size(), 0.0);

    std::mt19937_64 rng(spec.seed);
    auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in, std::size_t fan_out) {
        const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-s, s);
        for (std::size_t k = 0; k < count; ++k) {
            state.weights[offset + k] = dist(rng);
        }
    };

    const Layout L = layout_of(spec);
    switch (spec.kind) {
        case ModelKind::linear:
            fill(0, L.I, L.I, 1);
            break;
        case ModelKind::mlp:
            fill(L.mlp_w1(), L.H * L.I, L.I, L.H);
            fill(L.mlp_out(), L.H, L.H, 1);
            break;
        case ModelKind::rnn:
            fill(L.rnn_wx(), L.H, 1, L.H);
            fill(L.rnn_wh(), L.H * L.H, L.H, L.H);
            fill(L.rnn_out(), L.H, L.H, 1);
            break;
        case ModelKind::lstm:
            for (std::size_t gi = 0; gi < kGates; ++gi) {
                fill(L.lstm_w(gi), L.H, 1, L.H);
                fill(L.lstm_u(gi), L.H * L.H, L.H, L.H);
            }
            std::fill_n(state.weights.begin() + static_cast<std::ptrdiff_t>(L.lstm_b(kForgetGate)),
                        L.H, 1.0);
            fill(L.lstm_out(), L.H, L.H, 1);
            break;
    }
    return state;
}

double forward(const ModelState& state, std::span<const double> window) {
    check_dims(state.spec, state.weights);
    check_window(state.spec, window.size());
    Evaluator ev(state.spec, state.weights);
    return ev.forward(window);
}

std::vector<double> predict(const ModelState& state, const WindowedDataset& data) {
    check_dims(state.spec, state.weights);
    check_window(state.spec, data.lookback);
    Evaluator ev(state.spec, state.weights);
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        out[i] = ev.forward(data.row(i));
    }
    return out;
}

double loss_and_weight_grad(const ModelSpec& spec, std::span<const double> weights,
                            const WindowedDataset& data, LossKind loss, const GmadlParams& p,
                            std::vector<double>& grad) {
    spec.validate();
    check_dims(spec, weights);
    check_window(spec, data.lookback);
    if (data.empty()) {
        throw ValidationError("dataset is empty");
    }
    TrainConfig cfg;
    cfg.loss = loss;
    cfg.params = p;
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return batch_gradient(spec, weights, data, idx, cfg, Head::analytic, grad);
}

TrainResult train(ModelState state, const WindowedDataset& data, const TrainConfig& cfg) {
    if (cfg.loss == LossKind::madl) {
        throw ValidationError("madl has no analytic gradient; use train_with_madl_demo");
    }
    return train_impl(std::move(state), data, cfg, Head::analytic);
}

TrainResult train_with_madl_demo(ModelState state, const WindowedDataset& data,
                                 const TrainConfig& cfg) {
    return train_impl(std::move(state), data, cfg, Head::madl_numeric);
}

}  // namespace gmadl
