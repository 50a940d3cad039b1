#include "floodlens/classifier.hpp"

#include "floodlens/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

namespace floodlens {

namespace {

constexpr char kMagic[6] = {'F', 'L', 'M', 'L', 'P', '\0'};
constexpr std::uint16_t kFormatVersion = 1;

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// bce(z_up) - bce(z_down) without subtracting two O(1) losses:
// softplus(u) - softplus(d) = log1p(sigmoid(d) * expm1(u - d)).
double loss_difference(double z_up, double z_down, int label) noexcept {
    const double dz = z_up - z_down;
    return std::log1p(sigmoid(z_down) * std::expm1(dz)) - static_cast<double>(label) * dz;
}

void check_input(std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(kLayerDims.front())) {
        throw Error(ErrorCode::DimensionMismatch,
                    "classifier input has " + std::to_string(x.size()) + " values, expected 512");
    }
}

void check_dropout(double p) {
    if (!(p >= 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidDropout, "dropout rate must be in [0,1)");
}

// y = W x + b
void affine(const DenseLayer& layer, const double* in, double* out) noexcept {
    for (int r = 0; r < layer.rows; ++r) {
        const double* w = layer.weights.data() + static_cast<std::size_t>(r) * layer.cols;
        double s = layer.biases[r];
        for (int c = 0; c < layer.cols; ++c) s += w[c] * in[c];
        out[r] = s;
    }
}

// Parameter i of the flattened (weights then biases, layer by layer) vector.
double& parameter_at(MlpModel& model, std::size_t index) {
    for (auto& layer : model.layers) {
        if (index < layer.weights.size()) return layer.weights[index];
        index -= layer.weights.size();
        if (index < layer.biases.size()) return layer.biases[index];
        index -= layer.biases.size();
    }
    throw Error(ErrorCode::InvalidArgument, "parameter index out of range");
}

double gradient_at(const std::vector<DenseLayer>& grads, std::size_t index) {
    for (const auto& layer : grads) {
        if (index < layer.weights.size()) return layer.weights[index];
        index -= layer.weights.size();
        if (index < layer.biases.size()) return layer.biases[index];
        index -= layer.biases.size();
    }
    throw Error(ErrorCode::InvalidArgument, "parameter index out of range");
}

// Little-endian writer / reader.
class ByteWriter {
public:
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    const std::vector<char>& bytes() const noexcept { return bytes_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    std::vector<char> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    double f64() { return std::bit_cast<double>(get(8)); }
    void raw(char* dst, std::size_t n) {
        need(n);
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw Error(ErrorCode::FormatError, "model file is truncated");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::size_t MlpModel::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.biases.size();
    return n;
}

MlpModel mlp_init(std::uint64_t seed, double dropout_rate) {
    check_dropout(dropout_rate);
    MlpModel model;
    model.dropout_rate = dropout_rate;
    model.seed = seed;
    Rng rng(seed);
    for (int l = 0; l < kWeightedLayers; ++l) {
        DenseLayer layer;
        layer.cols = kLayerDims[l];
        layer.rows = kLayerDims[l + 1];
        const double bound = std::sqrt(6.0 / layer.cols);
        layer.weights.resize(static_cast<std::size_t>(layer.rows) * layer.cols);
        for (double& w : layer.weights) w = rng.uniform(-bound, bound);
        layer.biases.assign(static_cast<std::size_t>(layer.rows), 0.0);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

ForwardPass forward(const MlpModel& model, std::span<const double> x, bool train_mode, Rng& rng) {
    check_input(x);
    const bool drop = train_mode && model.dropout_rate > 0.0;
    const double keep_scale = 1.0 / (1.0 - model.dropout_rate);
    const std::size_t n_layers = model.layers.size();

    ForwardPass pass;
    pass.activations.reserve(n_layers + 1);
    pass.pre_activations.resize(n_layers);
    pass.dropout_scale.resize(n_layers);
    pass.activations.emplace_back(x.begin(), x.end());

    for (std::size_t l = 0; l < n_layers; ++l) {
        const DenseLayer& layer = model.layers[l];
        auto& pre = pass.pre_activations[l];
        pre.resize(static_cast<std::size_t>(layer.rows));
        affine(layer, pass.activations.back().data(), pre.data());

        std::vector<double> act(pre.size());
        if (l + 1 == n_layers) {
            pass.logit = pre[0];
            pass.score = sigmoid(pre[0]);
            act[0] = pass.score;
        } else {
            auto& scale = pass.dropout_scale[l];
            scale.assign(pre.size(), 1.0);
            for (std::size_t i = 0; i < pre.size(); ++i) {
                if (drop) scale[i] = rng.uniform() < model.dropout_rate ? 0.0 : keep_scale;
                act[i] = std::max(0.0, pre[i]) * scale[i];
            }
        }
        pass.activations.push_back(std::move(act));
    }
    return pass;
}

double score(const MlpModel& model, std::span<const double> x) {
    Rng unused(0);
    return forward(model, x, false, unused).score;
}

double bce_from_logit(double logit, int label) noexcept {
    // log(1 + e^z) - y z
    const double softplus = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
    return softplus - static_cast<double>(label) * logit;
}

double sample_loss(const MlpModel& model, std::span<const double> x, int label) {
    Rng unused(0);
    return bce_from_logit(forward(model, x, false, unused).logit, label);
}

std::vector<DenseLayer> zero_gradients(const MlpModel& model) {
    std::vector<DenseLayer> g;
    g.reserve(model.layers.size());
    for (const auto& l : model.layers) {
        g.push_back({l.rows, l.cols, std::vector<double>(l.weights.size(), 0.0), std::vector<double>(l.biases.size(), 0.0)});
    }
    return g;
}

double backward(const MlpModel& model, const ForwardPass& pass, int label, std::vector<DenseLayer>& grads) {
    const std::size_t n_layers = model.layers.size();
    // Sigmoid + BCE: dL/dlogit = score - y.
    std::vector<double> delta{pass.score - static_cast<double>(label)};
    for (std::size_t l = n_layers; l-- > 0;) {
        const DenseLayer& layer = model.layers[l];
        DenseLayer& g = grads[l];
        const std::vector<double>& input = pass.activations[l];
        for (int r = 0; r < layer.rows; ++r) {
            const double d = delta[r];
            g.biases[r] += d;
            if (d == 0.0) continue;
            double* gw = g.weights.data() + static_cast<std::size_t>(r) * layer.cols;
            for (int c = 0; c < layer.cols; ++c) gw[c] += d * input[c];
        }
        if (l == 0) break;
        // Back through W, then through dropout and ReLU of layer l-1.
        const auto& pre = pass.pre_activations[l - 1];
        const auto& scale = pass.dropout_scale[l - 1];
        std::vector<double> next(static_cast<std::size_t>(layer.cols), 0.0);
        for (int r = 0; r < layer.rows; ++r) {
            const double d = delta[r];
            if (d == 0.0) continue;
            const double* w = layer.weights.data() + static_cast<std::size_t>(r) * layer.cols;
            for (int c = 0; c < layer.cols; ++c) next[c] += w[c] * d;
        }
        for (std::size_t c = 0; c < next.size(); ++c) next[c] = pre[c] > 0.0 ? next[c] * scale[c] : 0.0;
        delta = std::move(next);
    }
    return bce_from_logit(pass.logit, label);
}

TrainResult train(const MlpModel& model, std::span<const LabeledFeature> data, const TrainConfig& cfg) {
    if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no training samples");
    if (!(cfg.learning_rate >= 0.0) || cfg.epochs < 1 || cfg.batch_size < 1) {
        throw Error(ErrorCode::InvalidArgument, "learning_rate >= 0, epochs >= 1 and batch_size >= 1 are required");
    }
    check_dropout(cfg.dropout_rate);
    for (const auto& s : data) check_input(s.feature.values);

    TrainResult result;
    result.model = model;
    result.model.dropout_rate = cfg.dropout_rate;
    const auto positives = std::count_if(data.begin(), data.end(), [](const LabeledFeature& s) { return s.label == 1; });
    if (positives == 0 || positives == static_cast<std::ptrdiff_t>(data.size())) {
        result.warnings.push_back(std::string("training data contains only ") +
                                  (positives == 0 ? "non-flooded" : "flooded") + " samples");
    }

    Rng order_rng(mix_seed(cfg.seed, 1));
    Rng dropout_rng(mix_seed(cfg.seed, 2));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    MlpModel& m = result.model;
    std::vector<DenseLayer> grads = zero_gradients(m);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            for (auto& g : grads) {
                std::fill(g.weights.begin(), g.weights.end(), 0.0);
                std::fill(g.biases.begin(), g.biases.end(), 0.0);
            }
            for (std::size_t b = start; b < end; ++b) {
                const LabeledFeature& s = data[order[b]];
                const ForwardPass pass = forward(m, s.feature.values, true, dropout_rng);
                epoch_loss += backward(m, pass, s.label, grads);
            }
            const double step = cfg.learning_rate / static_cast<double>(end - start);
            for (std::size_t l = 0; l < m.layers.size(); ++l) {
                auto& layer = m.layers[l];
                for (std::size_t i = 0; i < layer.weights.size(); ++i) layer.weights[i] -= step * grads[l].weights[i];
                for (std::size_t i = 0; i < layer.biases.size(); ++i) layer.biases[i] -= step * grads[l].biases[i];
            }
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(data.size()));
    }
    return result;
}

double gradient_check(const MlpModel& model, std::span<const double> x, int label, std::uint64_t sample_seed,
                      int samples) {
    constexpr double h = 1e-4;
    MlpModel probe = model;
    probe.dropout_rate = 0.0;

    Rng unused(0);
    std::vector<DenseLayer> grads = zero_gradients(probe);
    backward(probe, forward(probe, x, false, unused), label, grads);

    // Partial Fisher-Yates picks distinct parameters.
    const std::size_t total = probe.parameter_count();
    const std::size_t n = std::min(total, static_cast<std::size_t>(std::max(samples, 0)));
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(sample_seed);
    for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.below(total - i)]);

    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double& p = parameter_at(probe, idx[i]);
        const double saved = p;
        auto logit_at = [&](double offset) {
            p = saved + offset;
            return forward(probe, x, false, unused).logit;
        };
        // Five-point stencil: truncation error O(h^4) allows a larger step, which keeps roundoff down.
        const double near = loss_difference(logit_at(h), logit_at(-h), label);
        const double far = loss_difference(logit_at(2.0 * h), logit_at(-2.0 * h), label);
        p = saved;
        const double numeric = (8.0 * near - far) / (12.0 * h);
        const double analytic = gradient_at(grads, idx[i]);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
    return worst;
}

FloodDecision predict(const MlpModel& model, std::span<const double> x) {
    FloodDecision d;
    d.score = score(model, x);
    d.label = d.score > 0.5 ? FloodLabel::Flooded : FloodLabel::NonFlooded;
    return d;
}

void save_model(const std::filesystem::path& path, const MlpModel& model) {
    ByteWriter w;
    w.raw(kMagic, sizeof kMagic);
    w.u16(kFormatVersion);
    w.f64(model.dropout_rate);
    w.u32(static_cast<std::uint32_t>(model.layers.size()));
    for (const auto& layer : model.layers) {
        w.u32(static_cast<std::uint32_t>(layer.rows));
        w.u32(static_cast<std::uint32_t>(layer.cols));
        for (double v : layer.weights) w.f64(v);
        for (double v : layer.biases) w.f64(v);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

MlpModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    ByteReader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

    char magic[sizeof kMagic];
    r.raw(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw Error(ErrorCode::FormatError, path.string() + ": bad magic");
    const std::uint16_t version = r.u16();
    if (version != kFormatVersion) {
        throw Error(ErrorCode::FormatError, path.string() + ": unsupported version " + std::to_string(version));
    }
    MlpModel model;
    model.dropout_rate = r.f64();
    const std::uint32_t count = r.u32();
    for (std::uint32_t l = 0; l < count; ++l) {
        DenseLayer layer;
        layer.rows = static_cast<int>(r.u32());
        layer.cols = static_cast<int>(r.u32());
        const std::size_t weights = static_cast<std::size_t>(layer.rows) * static_cast<std::size_t>(layer.cols);
        if (layer.rows < 0 || layer.cols < 0 || r.remaining() / 8 < weights + static_cast<std::size_t>(layer.rows)) {
            throw Error(ErrorCode::FormatError, "model file is truncated");
        }
        layer.weights.resize(weights);
        for (double& v : layer.weights) v = r.f64();
        layer.biases.resize(static_cast<std::size_t>(layer.rows));
        for (double& v : layer.biases) v = r.f64();
        model.layers.push_back(std::move(layer));
    }
    if (r.remaining() != 0) throw Error(ErrorCode::FormatError, path.string() + ": trailing bytes");

    if (model.layers.size() != static_cast<std::size_t>(kWeightedLayers)) {
        throw Error(ErrorCode::ShapeError, "expected 7 layers, file has " + std::to_string(model.layers.size()));
    }
    for (int l = 0; l < kWeightedLayers; ++l) {
        const DenseLayer& layer = model.layers[l];
        if (layer.cols != kLayerDims[l] || layer.rows != kLayerDims[l + 1]) {
            throw Error(ErrorCode::ShapeError, "layer " + std::to_string(l) + " is " + std::to_string(layer.rows) + "x" +
                                                   std::to_string(layer.cols) + ", expected " +
                                                   std::to_string(kLayerDims[l + 1]) + "x" + std::to_string(kLayerDims[l]));
        }
    }
    if (!(model.dropout_rate >= 0.0 && model.dropout_rate < 1.0)) {
        throw Error(ErrorCode::FormatError, "stored dropout rate out of range");
    }
    return model;
}

}  // namespace floodlens
