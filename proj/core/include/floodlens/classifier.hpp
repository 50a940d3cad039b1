#pragma once

#include "floodlens/random.hpp"
#include "floodlens/segmentation.hpp"
#include "floodlens/texture.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace floodlens {

/// 512 -> 256 -> ... -> 8 -> 1: seven dense layers, each half the width of the last.
inline constexpr std::array<int, 8> kLayerDims{512, 256, 128, 64, 32, 16, 8, 1};
inline constexpr int kWeightedLayers = static_cast<int>(kLayerDims.size()) - 1;

struct DenseLayer {
    int rows = 0;  ///< outputs
    int cols = 0;  ///< inputs
    std::vector<double> weights;  ///< rows x cols, row-major
    std::vector<double> biases;   ///< rows
};

/// ReLU hidden layers, sigmoid output, inverted dropout after every hidden activation.
struct MlpModel {
    std::array<int, 8> layer_dims = kLayerDims;
    std::vector<DenseLayer> layers;
    double dropout_rate = 0.2;
    std::uint64_t seed = 0;

    std::size_t parameter_count() const noexcept;
};

struct TrainConfig {
    double learning_rate = 0.05;
    int epochs = 200;
    int batch_size = 16;
    double dropout_rate = 0.2;
    std::uint64_t seed = 0;
};

struct LabeledFeature {
    LbpFeature512 feature;
    int label = 0;  ///< 1 = flooded
};

struct ForwardPass {
    double logit = 0.0;
    double score = 0.5;
    /// activations[0] is the input; activations[l + 1] is layer l's output after
    /// ReLU and dropout (the sigmoid score for the last layer).
    std::vector<std::vector<double>> activations;
    /// Affine outputs per layer, before the non-linearity.
    std::vector<std::vector<double>> pre_activations;
    /// Per hidden unit multiplier: 0 for dropped, 1/(1-p) for kept, 1 at inference.
    std::vector<std::vector<double>> dropout_scale;
};

struct FloodDecision {
    double score = 0.5;
    FloodLabel label = FloodLabel::NonFlooded;
};

struct TrainResult {
    MlpModel model;
    std::vector<double> loss_history;
    std::vector<std::string> warnings;
};

/// He-uniform weights (bound sqrt(6 / fan_in)), zero biases. Throws InvalidDropout.
MlpModel mlp_init(std::uint64_t seed, double dropout_rate = 0.2);

/// Throws DimensionMismatch unless x has 512 values. `rng` is only drawn from
/// when train_mode is set and the dropout rate is non-zero.
ForwardPass forward(const MlpModel& model, std::span<const double> x, bool train_mode, Rng& rng);

/// Inference-mode score.
double score(const MlpModel& model, std::span<const double> x);

/// Binary cross-entropy from the logit, computed without overflow.
double bce_from_logit(double logit, int label) noexcept;

/// Inference-mode BCE for one sample.
double sample_loss(const MlpModel& model, std::span<const double> x, int label);

/// Accumulates dLoss/dparam for one cached pass into `grads` (same shapes as
/// model.layers) and returns the sample loss.
double backward(const MlpModel& model, const ForwardPass& pass, int label, std::vector<DenseLayer>& grads);

/// Zero-filled gradient buffers shaped like the model.
std::vector<DenseLayer> zero_gradients(const MlpModel& model);

/// Mini-batch SGD on binary cross-entropy. Shuffles per epoch from cfg.seed.
/// Throws EmptyDataset or InvalidArgument.
TrainResult train(const MlpModel& model, std::span<const LabeledFeature> data, const TrainConfig& cfg);

/// Largest relative error between backprop gradients and central differences
/// (five-point stencil, h = 1e-4) over `samples` parameters drawn with `sample_seed`.
double gradient_check(const MlpModel& model, std::span<const double> x, int label, std::uint64_t sample_seed = 0,
                      int samples = 200);

/// Flooded iff the score is strictly above 0.5.
FloodDecision predict(const MlpModel& model, std::span<const double> x);
inline FloodDecision predict(const MlpModel& model, const LbpFeature512& x) { return predict(model, x.values); }

/// Little-endian binary: "FLMLP\0", u16 version, f64 dropout, u32 layer count,
/// then per layer u32 rows, u32 cols, f64 weights, f64 biases.
void save_model(const std::filesystem::path& path, const MlpModel& model);
/// Throws IoError, FormatError or ShapeError.
MlpModel load_model(const std::filesystem::path& path);

}  // namespace floodlens
