#pragma once

#include "floodlens/classifier.hpp"
#include "floodlens/segmentation.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace floodlens {

enum class DatasetLayout { FolderPerClass, ImagePlusMask };
std::string_view to_string(DatasetLayout layout) noexcept;
/// "folder-per-class" or "image-plus-mask". Throws InvalidArgument.
DatasetLayout parse_layout(std::string_view text);

struct ManifestEntry {
    std::filesystem::path image;
    std::optional<FloodLabel> label;
    std::optional<std::filesystem::path> mask;
};

struct DatasetManifest {
    std::string name;
    DatasetLayout layout = DatasetLayout::FolderPerClass;
    std::vector<ManifestEntry> entries;
    /// Mask pixel values that count as water.
    std::vector<int> water_class_values{255};
};

/// Directory names used when scanning a dataset root.
struct LayoutOptions {
    std::string flooded_dir = "flooded";
    std::string normal_dir = "normal";
    std::string image_dir = "images";
    std::string mask_dir = "masks";
    /// Appended to the image stem to form the mask stem (FloodNet uses "_lab").
    std::string mask_suffix;
};

inline constexpr double kWaterLabelThreshold = 0.25;

/// Scans `root`: class subfolders for FolderPerClass, images/ + masks/ paired by
/// stem for ImagePlusMask. Entries are sorted by image path.
/// Throws FileNotFound, EmptyDataset, UnpairedImage or UnknownClassFolder.
DatasetManifest load_manifest(const std::filesystem::path& root, DatasetLayout layout,
                              std::vector<int> water_class_values = {255}, const LayoutOptions& options = {});

/// JSON manifest {name, layout, entries:[{image, label|mask}], water_class_values}.
/// Relative paths resolve against the manifest's directory.
DatasetManifest load_manifest_file(const std::filesystem::path& path);
void save_manifest_file(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Flooded iff the share of water-valued pixels is strictly above `threshold`.
FloodLabel derive_label(std::span<const std::uint8_t> mask, std::span<const int> water_class_values,
                        double threshold = kWaterLabelThreshold);

/// Label for an entry, reading and thresholding its mask if needed.
FloodLabel ground_truth(const ManifestEntry& entry, const DatasetManifest& manifest);

/// Flooded is the positive class.
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    void add(FloodLabel predicted, FloodLabel truth) noexcept;
    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

/// 0/0 ratios are reported as 0 with the matching flag set.
struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_degenerate = false;
    bool recall_degenerate = false;
    bool f1_degenerate = false;
};

/// Throws EmptyEvaluation for an all-zero matrix.
Metrics compute_metrics(const ConfusionMatrix& cm);

/// Harmonic mean 2PR/(P+R); 0 when P+R is 0.
double f1_score(double precision, double recall) noexcept;

struct ImageRecord {
    std::string path;
    FloodLabel truth = FloodLabel::NonFlooded;
    FloodLabel predicted = FloodLabel::NonFlooded;
    /// Water fraction for segmentation, sigmoid score for the MLP.
    double value = 0.0;
    /// Set when the image could not be processed; it is then scored as non-flooded.
    std::optional<std::string> error;
};

struct EvalReport {
    std::string model_id;
    std::string dataset;
    std::string train_dataset;
    std::string test_dataset;
    ConfusionMatrix confusion;
    Metrics metrics;
    std::vector<ImageRecord> per_image;
    std::vector<std::string> warnings;
};

/// Rebuilds the confusion matrix from per-image records.
ConfusionMatrix recount(std::span<const ImageRecord> records);

EvalReport run_segmentation_eval(const DatasetManifest& manifest, const ReferenceSignature& ref,
                                 const SegmentationConfig& config, int threads = 1);

struct SweepRow {
    ColorSpace color_space = ColorSpace::Lab;
    int k = 0;
    ConfusionMatrix confusion;
    Metrics metrics;
};

/// One evaluation per (k, colour space), k-major.
/// Throws InvalidArgument for empty lists and InvalidK for k < 2.
std::vector<SweepRow> sweep_k(const DatasetManifest& manifest, const ReferenceSignature& ref,
                              std::span<const int> k_values, std::span<const ColorSpace> color_spaces,
                              const SegmentationConfig& base, int threads = 1);

/// Radius-1 + radius-2 LBP feature of an image file.
LbpFeature512 image_feature(const std::filesystem::path& path);

/// Scores every manifest image with a trained model.
EvalReport evaluate_model(const MlpModel& model, const DatasetManifest& manifest, int threads = 1,
                          std::string model_id = "mlp");

struct CrossEvalResult {
    EvalReport report;
    TrainResult training;
};

/// Trains on `train_set` from a fresh mlp_init(cfg.seed) model and evaluates on `test_set`.
CrossEvalResult run_cross_eval(const DatasetManifest& train_set, const DatasetManifest& test_set,
                               const TrainConfig& cfg, int threads = 1);

/// The four train/test pairings (a/a, a/b, b/b, b/a).
std::vector<EvalReport> cross_dataset_grid(const DatasetManifest& a, const DatasetManifest& b, const TrainConfig& cfg,
                                           int threads = 1);

/// Report serialisation; output is byte-stable for equal reports.
std::string report_to_json(const EvalReport& report);
std::string report_to_csv(const EvalReport& report);
std::string sweep_to_csv(std::span<const SweepRow> rows);
std::string sweep_to_json(std::span<const SweepRow> rows, std::string_view dataset);

}  // namespace floodlens
