#include "gmadl/models.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gmadl/error.hpp"
#include "gmadl/serialization.hpp"

namespace gmadl {
namespace {

WindowedDataset random_dataset(std::size_t n, std::size_t lookback, std::uint64_t seed,
                               double target_scale = 0.5) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> t(-target_scale, target_scale);
    WindowedDataset d;
    d.lookback = lookback;
    for (std::size_t i = 0; i < n * lookback; ++i) {
        d.features.push_back(z(rng));
    }
    for (std::size_t i = 0; i < n; ++i) {
        d.targets.push_back(t(rng));
    }
    return d;
}

// Target sign follows the first feature; |target| = 0.01 throughout.
WindowedDataset directional_dataset(std::size_t n, std::size_t lookback, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mag(0.5, 1.5);
    std::normal_distribution<double> z(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    WindowedDataset d;
    d.lookback = lookback;
    for (std::size_t i = 0; i < n; ++i) {
        const double lead = (coin(rng) ? 1.0 : -1.0) * mag(rng);
        d.features.push_back(lead);
        for (std::size_t k = 1; k < lookback; ++k) {
            d.features.push_back(z(rng));
        }
        d.targets.push_back(lead > 0 ? 0.01 : -0.01);
    }
    return d;
}

TEST(ModelSpecTest, WeightCounts) {
    EXPECT_EQ((ModelSpec{ModelKind::linear, 4, 0, 0}.weight_count()), 5u);
    EXPECT_EQ((ModelSpec{ModelKind::lstm, 1, 8, 0}.weight_count()), 329u);
    EXPECT_EQ((ModelSpec{ModelKind::mlp, 3, 2, 0}.weight_count()), 2u * 3 + 2 + 2 + 1);
    EXPECT_EQ((ModelSpec{ModelKind::rnn, 5, 3, 0}.weight_count()), 3u + 9 + 3 + 3 + 1);
}

TEST(ModelSpecTest, Validation) {
    EXPECT_THROW((ModelSpec{ModelKind::linear, 0, 0, 0}.validate()), ValidationError);
    EXPECT_THROW((ModelSpec{ModelKind::lstm, 2, 0, 0}.validate()), ValidationError);
    EXPECT_NO_THROW((ModelSpec{ModelKind::linear, 2, 0, 0}.validate()));
    EXPECT_THROW(parse_model_kind("transformer"), ValidationError);
}

TEST(InitModel, DeterministicAndWellFormed) {
    for (ModelKind kind : {ModelKind::linear, ModelKind::mlp, ModelKind::rnn, ModelKind::lstm}) {
        const ModelSpec spec{kind, 3, 4, 1234};
        const ModelState a = init_model(spec);
        const ModelState b = init_model(spec);
        EXPECT_EQ(a.weights, b.weights);
        EXPECT_EQ(a.weights.size(), spec.weight_count());
        EXPECT_EQ(a.optimizer.step, 0u);
        EXPECT_TRUE(std::all_of(a.optimizer.m.begin(), a.optimizer.m.end(),
                                [](double v) { return v == 0.0; }));
        const ModelState c = init_model(ModelSpec{kind, 3, 4, 4321});
        EXPECT_NE(a.weights, c.weights);
    }
}

TEST(InitModel, GlorotBoundsAndForgetBias) {
    const ModelState s = init_model({ModelKind::lstm, 1, 8, 5});
    const std::size_t gate_block = 8 + 64 + 8;
    for (std::size_t j = 0; j < 8; ++j) {
        EXPECT_EQ(s.weights[gate_block + 8 + 64 + j], 1.0);  // forget bias
        EXPECT_EQ(s.weights[8 + 64 + j], 0.0);               // input bias
    }
    const double s_u = std::sqrt(6.0 / 16.0);
    for (std::size_t k = 8; k < 8 + 64; ++k) {
        EXPECT_LE(std::abs(s.weights[k]), s_u);
    }
    const ModelState lin = init_model({ModelKind::linear, 4, 0, 5});
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_LE(std::abs(lin.weights[k]), std::sqrt(6.0 / 5.0));
    }
    EXPECT_EQ(lin.weights[4], 0.0);
}

TEST(Forward, Examples) {
    ModelState lin = init_model({ModelKind::linear, 4, 0, 1});
    std::fill(lin.weights.begin(), lin.weights.end(), 0.0);
    EXPECT_EQ(forward(lin, std::vector{0.3, -1.0, 2.0, 5.0}), 0.0);
    lin.weights = {1.0, 0.0, 0.0, 0.0, 0.0};
    EXPECT_EQ(forward(lin, std::vector{0.03, 9.0, -4.0, 2.0}), 0.03);

    ModelState lstm = init_model({ModelKind::lstm, 3, 4, 1});
    std::fill(lstm.weights.begin(), lstm.weights.end(), 0.0);
    EXPECT_EQ(forward(lstm, std::vector{0.5, -0.2, 0.9}), 0.0);

    EXPECT_THROW(forward(lin, std::vector{1.0, 2.0}), ValidationError);
}

// Full chain-rule gradient against central differences of the loss of
// predict(); the oracle never touches the backward pass.
TEST(Backprop, MatchesFiniteDifferencesForEveryKind) {
    std::mt19937_64 rng(77);
    const GmadlParams p{5.0, 1.5};
    for (ModelKind kind : {ModelKind::linear, ModelKind::mlp, ModelKind::rnn, ModelKind::lstm}) {
        for (int rep = 0; rep < 5; ++rep) {
            const std::size_t in = 1 + rng() % 4;
            const std::size_t hid = 1 + rng() % 4;
            const std::size_t n = 4 + rng() % 13;
            ModelState s = init_model({kind, in, hid, rng()});
            std::uniform_real_distribution<double> jitter(-0.3, 0.3);
            for (double& w : s.weights) {
                w += jitter(rng);  // move biases off zero
            }
            const WindowedDataset d = random_dataset(n, in, rng());
            for (LossKind loss : {LossKind::gmadl, LossKind::mse}) {
                std::vector<double> grad;
                loss_and_weight_grad(s.spec, s.weights, d, loss, p, grad);
                ASSERT_EQ(grad.size(), s.weights.size());
                const double h = 1e-5;
                for (std::size_t k = 0; k < s.weights.size(); ++k) {
                    ModelState up = s;
                    ModelState down = s;
                    up.weights[k] += h;
                    down.weights[k] -= h;
                    const double fd = (evaluate_loss(loss, d.targets, predict(up, d), p) -
                                       evaluate_loss(loss, d.targets, predict(down, d), p)) /
                                      (2 * h);
                    const double denom = std::max({1e-8, std::abs(fd), std::abs(grad[k])});
                    EXPECT_LE(std::abs(fd - grad[k]) / denom, 1e-4)
                        << to_string(kind) << " loss=" << to_string(loss) << " weight " << k
                        << " analytic=" << grad[k] << " fd=" << fd;
                }
            }
        }
    }
}

TEST(Train, MseRecoversPlantedLinearWeights) {
    const std::vector<double> planted{0.5, -0.25, 0.1, 0.8};
    const double planted_bias = 0.05;
    WindowedDataset d = random_dataset(200, 4, 8);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto row = d.row(i);
        double y = planted_bias;
        for (std::size_t k = 0; k < 4; ++k) {
            y += planted[k] * row[k];
        }
        d.targets[i] = y;
    }
    TrainConfig cfg;
    cfg.loss = LossKind::mse;
    cfg.epochs = 500;
    cfg.learning_rate = 0.05;
    const TrainResult res = train(init_model({ModelKind::linear, 4, 0, 3}), d, cfg);
    EXPECT_LE(res.loss_history.back(), 1e-6);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_NEAR(res.state.weights[k], planted[k], 1e-3);
    }
    EXPECT_NEAR(res.state.weights[4], planted_bias, 1e-3);
}

TEST(Train, GmadlApproachesSaturationFloorOnDirectionalData) {
    const WindowedDataset d = directional_dataset(300, 3, 21);
    TrainConfig cfg;
    cfg.loss = LossKind::gmadl;
    cfg.params = {1000.0, 1.0};
    cfg.epochs = 300;
    cfg.learning_rate = 0.05;
    for (ModelKind kind : {ModelKind::linear, ModelKind::mlp}) {
        const TrainResult res = train(init_model({kind, 3, 4, 9}), d, cfg);
        EXPECT_LE(res.loss_history.back(), -0.0049) << to_string(kind);
    }
}

TEST(Train, RecurrentKindsLearnDirection) {
    const WindowedDataset d = directional_dataset(120, 3, 4);
    TrainConfig cfg;
    cfg.loss = LossKind::gmadl;
    cfg.params = {1000.0, 1.0};
    cfg.epochs = 150;
    cfg.learning_rate = 0.02;
    for (ModelKind kind : {ModelKind::rnn, ModelKind::lstm}) {
        const TrainResult res = train(init_model({kind, 3, 4, 9}), d, cfg);
        EXPECT_LT(res.loss_history.back(), res.loss_history.front()) << to_string(kind);
        EXPECT_LT(res.loss_history.back(), -0.004) << to_string(kind);
    }
}

TEST(Train, DeterministicHistory) {
    const WindowedDataset d = random_dataset(50, 3, 2);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 16;
    const ModelSpec spec{ModelKind::lstm, 3, 3, 5};
    const TrainResult a = train(init_model(spec), d, cfg);
    const TrainResult b = train(init_model(spec), d, cfg);
    EXPECT_EQ(a.loss_history, b.loss_history);
    EXPECT_EQ(a.state.weights, b.state.weights);
}

TEST(Train, GmadlMonotoneOnLinearWithSmallStep) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const WindowedDataset d = directional_dataset(200, 4, seed);
        TrainConfig cfg;
        cfg.loss = LossKind::gmadl;
        cfg.params = {100.0, 1.0};
        cfg.epochs = 200;
        cfg.learning_rate = 1e-3;
        const TrainResult res = train(init_model({ModelKind::linear, 4, 0, seed}), d, cfg);
        for (std::size_t e = 1; e < res.loss_history.size(); ++e) {
            EXPECT_LE(res.loss_history[e], res.loss_history[e - 1]) << "epoch " << e;
        }
    }
}

TEST(Train, Errors) {
    const WindowedDataset d = random_dataset(10, 2, 1);
    const ModelState s = init_model({ModelKind::linear, 2, 0, 1});
    TrainConfig cfg;
    cfg.epochs = 0;
    EXPECT_THROW(train(s, d, cfg), ValidationError);
    cfg.epochs = 1;
    EXPECT_THROW(train(s, WindowedDataset{2, {}, {}}, cfg), ValidationError);
    EXPECT_THROW(train(init_model({ModelKind::linear, 3, 0, 1}), d, cfg), ValidationError);
    cfg.loss = LossKind::madl;
    EXPECT_THROW(train(s, d, cfg), ValidationError);

    WindowedDataset huge{1, {1.0}, {1e200}};
    TrainConfig mse_cfg;
    mse_cfg.loss = LossKind::mse;
    EXPECT_THROW(train(init_model({ModelKind::linear, 1, 0, 1}), huge, mse_cfg), TrainingError);
}

TEST(MadlDemo, WeightsStallWhileGmadlMoves) {
    WindowedDataset d = random_dataset(40, 2, 6, 0.05);
    for (double& f : d.features) {
        f = std::abs(f) + 0.5;  // positive features
    }
    ModelState s = init_model({ModelKind::linear, 2, 0, 1});
    s.weights = {0.3, 0.2, 0.1};  // every prediction >= 0.35 > h
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.learning_rate = 0.01;
    const TrainResult stalled = train_with_madl_demo(s, d, cfg);
    EXPECT_EQ(stalled.state.weights, s.weights);
    ASSERT_EQ(stalled.loss_history.size(), 10u);

    cfg.epochs = 1;
    cfg.loss = LossKind::gmadl;
    cfg.params = {1000.0, 1.0};
    const TrainResult moved = train(s, d, cfg);
    EXPECT_NE(moved.state.weights, s.weights);

    EXPECT_THROW(train_with_madl_demo(s, WindowedDataset{2, {}, {}}, cfg), ValidationError);
}

TEST(ModelStateJson, RoundTripsExactly) {
    std::mt19937_64 rng(1);
    for (ModelKind kind : {ModelKind::linear, ModelKind::mlp, ModelKind::rnn, ModelKind::lstm}) {
        TrainConfig cfg;
        cfg.epochs = 3;
        const TrainResult res = train(init_model({kind, 2, 3, rng()}), random_dataset(8, 2, rng()), cfg);
        const json j = res.state;
        const ModelState back = json::parse(j.dump()).get<ModelState>();
        EXPECT_EQ(back.spec, res.state.spec);
        EXPECT_EQ(back.weights, res.state.weights);
        EXPECT_EQ(back.optimizer.m, res.state.optimizer.m);
        EXPECT_EQ(back.optimizer.step, res.state.optimizer.step);
    }
    json bad = init_model({ModelKind::linear, 2, 0, 1});
    bad["weights"] = {1.0};
    EXPECT_THROW(bad.get<ModelState>(), ValidationError);
}

}  // namespace
}  // namespace gmadl
