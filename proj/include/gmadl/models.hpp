#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gmadl/dataset.hpp"
#include "gmadl/loss.hpp"

namespace gmadl {

enum class ModelKind { linear, mlp, rnn, lstm };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// Architecture descriptor. Flat weight layouts, per kind (H = hidden_dim,
/// I = input_dim, matrices row-major):
///
///   linear: w[I], bias
///   mlp:    W1[H x I], b1[H], w_out[H], b_out          (tanh hidden layer)
///   rnn:    Wx[H], Wh[H x H], bh[H], w_out[H], b_out   (tanh cell)
///   lstm:   for gate in (input, forget, cell, output): W[H], U[H x H], b[H];
///           then w_out[H], b_out
///
/// RNN and LSTM read the window as a length-I sequence of scalars starting
/// from zero hidden and cell state; the prediction is a linear head on the
/// final hidden state.
struct ModelSpec {
    ModelKind kind = ModelKind::linear;
    std::size_t input_dim = 1;
    std::size_t hidden_dim = 0;
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t weight_count() const;
    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
};

struct ModelState {
    ModelSpec spec;
    std::vector<double> weights;
    AdamState optimizer;
};

struct TrainConfig {
    LossKind loss = LossKind::gmadl;
    GmadlParams params;
    std::size_t epochs = 100;
    double learning_rate = 1e-3;
    std::size_t batch_size = 0;  // 0 means full batch
    // Global-norm clip; when unset, RNN and LSTM clip at kDefaultRecurrentClip.
    std::optional<double> grad_clip;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double fd_step = 1e-6;  // only used by the MADL demonstration loop

    void validate() const;
};

inline constexpr double kDefaultRecurrentClip = 5.0;

struct TrainResult {
    ModelState state;
    std::vector<double> loss_history;  // full-dataset loss after each epoch
};

/// Glorot-uniform weights per layer, zero biases (LSTM forget bias 1.0),
/// zeroed optimizer moments. Deterministic in spec.seed.
ModelState init_model(const ModelSpec& spec);

double forward(const ModelState& state, std::span<const double> window);
std::vector<double> predict(const ModelState& state, const WindowedDataset& data);

/// Loss over `data` and its exact gradient with respect to every weight,
/// chaining the analytic loss gradient through backpropagation (through time
/// for the recurrent kinds). MADL is rejected: it has no analytic gradient.
double loss_and_weight_grad(const ModelSpec& spec, std::span<const double> weights,
                            const WindowedDataset& data, LossKind loss, const GmadlParams& p,
                            std::vector<double>& grad);

/// Adam training on the selected loss.
TrainResult train(ModelState state, const WindowedDataset& data, const TrainConfig& cfg);

/// Same loop with MADL as the loss and its central-difference gradient as the
/// head. Shows that weights stay put whenever no prediction is within
/// cfg.fd_step of zero.
TrainResult train_with_madl_demo(ModelState state, const WindowedDataset& data,
                                 const TrainConfig& cfg);

}  // namespace gmadl
