#include "floodlens/classifier.hpp"
#include "floodlens/error.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace floodlens;
namespace fs = std::filesystem;

namespace {

std::vector<double> random_input(Rng& rng) {
    std::vector<double> x(512);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    return x;
}

MlpModel zero_model() {
    MlpModel m = mlp_init(0, 0.0);
    for (auto& l : m.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.biases.begin(), l.biases.end(), 0.0);
    }
    return m;
}

// Two disjoint one-hot patterns per class, so the set is linearly separable.
std::vector<LabeledFeature> toy_set(int n) {
    std::vector<LabeledFeature> out;
    for (int i = 0; i < n; ++i) {
        LabeledFeature s;
        s.label = i % 2;
        s.feature.values.assign(512, 0.0);
        const int variant = (i / 2) % 2;
        s.feature.values[s.label ? 40 + variant : 200 + variant] = 1.0;
        s.feature.values[s.label ? 300 + variant : 450 + variant] = 1.0;
        out.push_back(std::move(s));
    }
    return out;
}

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("floodlens_mlp_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ErrorCode load_error(const fs::path& p) {
    try {
        load_model(p);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::EmptyEvaluation;
}

}  // namespace

TEST(Classifier, ArchitectureAndInit) {
    const MlpModel a = mlp_init(42, 0.2);
    const MlpModel b = mlp_init(42, 0.2);
    EXPECT_EQ(a.layer_dims, (std::array<int, 8>{512, 256, 128, 64, 32, 16, 8, 1}));
    ASSERT_EQ(a.layers.size(), 7u);
    for (int l = 0; l < 7; ++l) {
        EXPECT_EQ(a.layers[l].rows, a.layer_dims[l + 1]);
        EXPECT_EQ(a.layers[l].cols, a.layer_dims[l]);
        EXPECT_EQ(a.layers[l].weights, b.layers[l].weights);
        const double bound = std::sqrt(6.0 / a.layer_dims[l]);
        for (double w : a.layers[l].weights) EXPECT_LE(std::abs(w), bound);
        for (double bias : a.layers[l].biases) EXPECT_EQ(bias, 0.0);
    }
    EXPECT_NE(mlp_init(43).layers[0].weights, a.layers[0].weights);
    EXPECT_THROW(mlp_init(1, 1.0), Error);
    EXPECT_THROW(mlp_init(1, -0.1), Error);
}

TEST(Classifier, ZeroModelScoresHalf) {
    Rng rng(1);
    const MlpModel m = zero_model();
    const auto x = random_input(rng);
    EXPECT_DOUBLE_EQ(score(m, x), 0.5);
    const FloodDecision d = predict(m, x);
    EXPECT_DOUBLE_EQ(d.score, 0.5);
    EXPECT_EQ(d.label, FloodLabel::NonFlooded);
}

TEST(Classifier, ForwardMatchesPlainLoops) {
    Rng rng(2);
    for (int i = 0; i < 5; ++i) {
        const MlpModel m = mlp_init(100 + i);
        const auto x = random_input(rng);
        Rng unused(0);
        const ForwardPass p = forward(m, x, false, unused);
        const double z = oracle::mlp_logit(m, x);
        EXPECT_NEAR(p.logit, z, 1e-12 * std::max(1.0, std::abs(z)));
        EXPECT_NEAR(p.score, 1.0 / (1.0 + std::exp(-z)), 1e-12);
        ASSERT_EQ(p.activations.size(), 8u);
        for (int l = 0; l < 8; ++l) EXPECT_EQ(p.activations[l].size(), static_cast<std::size_t>(m.layer_dims[l]));
        EXPECT_EQ(score(m, x), score(m, x));
    }
    EXPECT_THROW(score(mlp_init(1), std::vector<double>(511)), Error);
}

TEST(Classifier, PredictIsStrict) {
    MlpModel m = zero_model();
    m.layers.back().biases[0] = std::log(0.93 / 0.07);
    const std::vector<double> x(512, 0.0);
    const FloodDecision d = predict(m, x);
    EXPECT_NEAR(d.score, 0.93, 1e-12);
    EXPECT_EQ(d.label, FloodLabel::Flooded);
}

TEST(Classifier, StableCrossEntropy) {
    EXPECT_NEAR(bce_from_logit(0.0, 1), std::log(2.0), 1e-15);
    EXPECT_NEAR(bce_from_logit(2.0, 1), std::log1p(std::exp(-2.0)), 1e-15);
    EXPECT_NEAR(bce_from_logit(2.0, 0), 2.0 + std::log1p(std::exp(-2.0)), 1e-15);
    EXPECT_TRUE(std::isfinite(bce_from_logit(800.0, 0)));
    EXPECT_NEAR(bce_from_logit(800.0, 0), 800.0, 1e-9);
    EXPECT_NEAR(bce_from_logit(-800.0, 0), 0.0, 1e-12);
}

TEST(Classifier, DropoutExpectation) {
    Rng rng(9);
    const MlpModel m = mlp_init(5, 0.2);
    const auto x = random_input(rng);
    Rng unused(0);
    const ForwardPass infer = forward(m, x, false, unused);
    std::size_t unit = 0;
    while (infer.activations[1][unit] <= 0.0) ++unit;
    const double v = infer.activations[1][unit];

    Rng drop(77);
    const int n = 10000;
    double sum = 0.0;
    int dropped = 0;
    for (int i = 0; i < n; ++i) {
        const ForwardPass p = forward(m, x, true, drop);
        sum += p.activations[1][unit];
        dropped += p.activations[1][unit] == 0.0;
        const double s = p.dropout_scale[0][unit];
        EXPECT_TRUE(s == 0.0 || std::abs(s - 1.25) < 1e-15);
    }
    const double mean = sum / n;
    const double se = v * std::sqrt(0.2 / 0.8) / std::sqrt(static_cast<double>(n));
    EXPECT_LT(std::abs(mean - v), 3.0 * se);
    EXPECT_GT(dropped, 0);
    // The output never drops.
    EXPECT_TRUE(std::isfinite(forward(m, x, true, drop).score));
}

TEST(Classifier, GradientCheck) {
    Rng rng(3);
    for (int i = 0; i < 4; ++i) {
        const MlpModel m = mlp_init(300 + i, 0.2);
        const auto x = random_input(rng);
        const double err = gradient_check(m, x, i % 2, i);
        EXPECT_LT(err, 1e-4);
        EXPECT_EQ(err, gradient_check(m, x, i % 2, i));
    }
}

TEST(Classifier, ZeroModelBiasGradient) {
    const MlpModel m = zero_model();
    Rng rng(4);
    const auto x = random_input(rng);
    Rng unused(0);
    auto grads = zero_gradients(m);
    backward(m, forward(m, x, false, unused), 1, grads);
    const double analytic = grads.back().biases[0];
    EXPECT_DOUBLE_EQ(analytic, -0.5);

    MlpModel probe = m;
    const double h = 1e-5;
    probe.layers.back().biases[0] = h;
    const double up = sample_loss(probe, x, 1);
    probe.layers.back().biases[0] = -h;
    const double down = sample_loss(probe, x, 1);
    EXPECT_NEAR((up - down) / (2 * h), analytic, 1e-7);
    EXPECT_LT(gradient_check(m, x, 1), 1e-7);
}

TEST(Classifier, TrainsToySet) {
    const auto data = toy_set(20);
    const TrainResult r = train(mlp_init(0), data, TrainConfig{});
    ASSERT_EQ(r.loss_history.size(), 200u);
    EXPECT_LT(r.loss_history.back(), r.loss_history.front());
    int correct = 0;
    for (const auto& s : data) correct += (predict(r.model, s.feature).label == FloodLabel::Flooded) == (s.label == 1);
    EXPECT_EQ(correct, 20);
    EXPECT_TRUE(r.warnings.empty());

    // Held-out samples from the same patterns.
    for (const auto& s : toy_set(8)) {
        EXPECT_EQ(predict(r.model, s.feature).label == FloodLabel::Flooded, s.label == 1);
    }
}

TEST(Classifier, TrainingIsDeterministicAndPure) {
    const auto data = toy_set(12);
    const MlpModel start = mlp_init(4);
    TrainConfig cfg;
    cfg.epochs = 5;
    const TrainResult a = train(start, data, cfg);
    const TrainResult b = train(start, data, cfg);
    EXPECT_EQ(a.loss_history, b.loss_history);
    EXPECT_EQ(a.model.layers[0].weights, b.model.layers[0].weights);
    EXPECT_EQ(start.layers[0].weights, mlp_init(4).layers[0].weights);

    cfg.epochs = 1;
    cfg.learning_rate = 0.0;
    const TrainResult still = train(start, data, cfg);
    for (std::size_t l = 0; l < start.layers.size(); ++l) {
        EXPECT_EQ(still.model.layers[l].weights, start.layers[l].weights);
        EXPECT_EQ(still.model.layers[l].biases, start.layers[l].biases);
    }
}

TEST(Classifier, TrainingErrorsAndWarnings) {
    EXPECT_THROW(train(mlp_init(0), std::vector<LabeledFeature>{}, TrainConfig{}), Error);
    auto data = toy_set(4);
    for (auto& s : data) s.label = 1;
    TrainConfig cfg;
    cfg.epochs = 1;
    const TrainResult r = train(mlp_init(0), data, cfg);
    ASSERT_EQ(r.warnings.size(), 1u);
    cfg.batch_size = 0;
    EXPECT_THROW(train(mlp_init(0), data, cfg), Error);
}

TEST(Classifier, ModelRoundTrip) {
    const fs::path dir = temp_dir("roundtrip");
    const MlpModel m = mlp_init(11, 0.3);
    save_model(dir / "m.bin", m);
    const MlpModel back = load_model(dir / "m.bin");
    EXPECT_EQ(back.dropout_rate, 0.3);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        EXPECT_EQ(back.layers[l].weights, m.layers[l].weights);
        EXPECT_EQ(back.layers[l].biases, m.layers[l].biases);
    }
    Rng rng(6);
    for (int i = 0; i < 10; ++i) {
        const auto x = random_input(rng);
        EXPECT_EQ(score(back, x), score(m, x));
    }
    // Header layout: magic, version 1.
    std::ifstream in(dir / "m.bin", std::ios::binary);
    char head[8];
    in.read(head, 8);
    EXPECT_EQ(std::string(head, 6), std::string("FLMLP\0", 6));
    EXPECT_EQ(head[6], 1);
    EXPECT_EQ(head[7], 0);
}

TEST(Classifier, ModelFileErrors) {
    const fs::path dir = temp_dir("errors");
    save_model(dir / "m.bin", mlp_init(1));
    const auto size = fs::file_size(dir / "m.bin");

    fs::copy_file(dir / "m.bin", dir / "short.bin");
    fs::resize_file(dir / "short.bin", size - 100);
    EXPECT_EQ(load_error(dir / "short.bin"), ErrorCode::FormatError);

    fs::copy_file(dir / "m.bin", dir / "long.bin");
    std::ofstream(dir / "long.bin", std::ios::app | std::ios::binary) << "xx";
    EXPECT_EQ(load_error(dir / "long.bin"), ErrorCode::FormatError);

    std::ofstream(dir / "magic.bin", std::ios::binary) << "NOTAMODEL-------";
    EXPECT_EQ(load_error(dir / "magic.bin"), ErrorCode::FormatError);

    EXPECT_EQ(load_error(dir / "absent.bin"), ErrorCode::IoError);

    // Penultimate width 4 instead of 8.
    MlpModel narrow = mlp_init(1);
    narrow.layers[5].rows = 4;
    narrow.layers[5].weights.resize(4 * 16);
    narrow.layers[5].biases.resize(4);
    narrow.layers[6].cols = 4;
    narrow.layers[6].weights.resize(4);
    save_model(dir / "narrow.bin", narrow);
    EXPECT_EQ(load_error(dir / "narrow.bin"), ErrorCode::ShapeError);
}
