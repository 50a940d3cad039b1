#include "floodlens/evaluation.hpp"

#include "floodlens/error.hpp"
#include "floodlens/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <exception>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace floodlens {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool is_image_file(const fs::path& p) {
    const std::string ext = lower(p.extension().string());
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

void require_entries(const DatasetManifest& m) {
    if (m.entries.empty()) throw Error(ErrorCode::EmptyDataset, "dataset '" + m.name + "' has no images");
}

FloodLabel parse_label(const nlohmann::json& j) {
    if (j.is_number_integer()) return j.get<int>() != 0 ? FloodLabel::Flooded : FloodLabel::NonFlooded;
    const std::string s = lower(j.get<std::string>());
    if (s == "flooded" || s == "flood") return FloodLabel::Flooded;
    if (s == "non-flooded" || s == "normal" || s == "nonflooded") return FloodLabel::NonFlooded;
    throw Error(ErrorCode::FormatError, "unknown label '" + s + "'");
}

// Runs `fn` per index, keeping the first exception (by index) and rethrowing it.
template <typename Fn>
void run_all(std::size_t n, int threads, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    parallel_for(n, threads, [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<FloodLabel> resolve_truths(const DatasetManifest& manifest, int threads) {
    std::vector<FloodLabel> truths(manifest.entries.size());
    run_all(manifest.entries.size(), threads, [&](std::size_t i) { truths[i] = ground_truth(manifest.entries[i], manifest); });
    return truths;
}

EvalReport finish(EvalReport report) {
    std::sort(report.per_image.begin(), report.per_image.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.path < b.path; });
    report.confusion = recount(report.per_image);
    report.metrics = compute_metrics(report.confusion);
    return report;
}

std::string failure_text(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& ex) {
        return ex.what();
    } catch (...) {
        return "unknown failure";
    }
}

nlohmann::json metrics_json(const Metrics& m) {
    return {{"accuracy", m.accuracy},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"degenerate", {{"precision", m.precision_degenerate}, {"recall", m.recall_degenerate}, {"f1", m.f1_degenerate}}}};
}

nlohmann::json confusion_json(const ConfusionMatrix& cm) {
    return {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string format_real(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::string_view to_string(DatasetLayout layout) noexcept {
    return layout == DatasetLayout::FolderPerClass ? "folder-per-class" : "image-plus-mask";
}

DatasetLayout parse_layout(std::string_view text) {
    const std::string s = lower(std::string(text));
    if (s == "folder-per-class" || s == "folder") return DatasetLayout::FolderPerClass;
    if (s == "image-plus-mask" || s == "mask") return DatasetLayout::ImagePlusMask;
    throw Error(ErrorCode::InvalidArgument, "unknown dataset layout '" + std::string(text) + "'");
}

DatasetManifest load_manifest(const fs::path& root, DatasetLayout layout, std::vector<int> water_class_values,
                              const LayoutOptions& options) {
    if (!fs::is_directory(root)) throw Error(ErrorCode::FileNotFound, "dataset root " + root.string());
    DatasetManifest m;
    m.name = root.filename().string();
    if (m.name.empty()) m.name = root.parent_path().filename().string();
    m.layout = layout;
    m.water_class_values = std::move(water_class_values);

    if (layout == DatasetLayout::FolderPerClass) {
        std::vector<fs::path> dirs;
        for (const auto& e : fs::directory_iterator(root)) {
            if (e.is_directory()) dirs.push_back(e.path());
        }
        std::sort(dirs.begin(), dirs.end());
        for (const auto& dir : dirs) {
            const std::string name = dir.filename().string();
            FloodLabel label;
            if (name == options.flooded_dir) {
                label = FloodLabel::Flooded;
            } else if (name == options.normal_dir) {
                label = FloodLabel::NonFlooded;
            } else {
                throw Error(ErrorCode::UnknownClassFolder, "'" + name + "' is neither '" + options.flooded_dir +
                                                               "' nor '" + options.normal_dir + "'");
            }
            for (auto& img : sorted_images(dir)) m.entries.push_back({std::move(img), label, std::nullopt});
        }
    } else {
        const fs::path images = root / options.image_dir;
        const fs::path masks = root / options.mask_dir;
        if (!fs::is_directory(images)) throw Error(ErrorCode::FileNotFound, "image folder " + images.string());
        if (!fs::is_directory(masks)) throw Error(ErrorCode::FileNotFound, "mask folder " + masks.string());
        std::map<std::string, fs::path> by_stem;
        for (auto& p : sorted_images(masks)) by_stem.emplace(p.stem().string(), std::move(p));
        for (auto& img : sorted_images(images)) {
            const std::string stem = img.stem().string();
            const auto it = by_stem.find(stem + options.mask_suffix);
            if (it == by_stem.end()) throw Error(ErrorCode::UnpairedImage, "no mask for image '" + stem + "'");
            m.entries.push_back({std::move(img), std::nullopt, it->second});
        }
    }
    std::sort(m.entries.begin(), m.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.image < b.image; });
    require_entries(m);
    return m;
}

DatasetManifest load_manifest_file(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorCode::FileNotFound, path.string());
    std::ifstream in(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
    }
    const fs::path base = path.parent_path();
    auto resolve = [&](const std::string& p) {
        fs::path q(p);
        return q.is_absolute() ? q : base / q;
    };
    DatasetManifest m;
    try {
        m.name = j.value("name", path.stem().string());
        m.layout = parse_layout(j.value("layout", std::string("folder-per-class")));
        if (j.contains("water_class_values")) m.water_class_values = j.at("water_class_values").get<std::vector<int>>();
        for (const auto& e : j.at("entries")) {
            ManifestEntry entry;
            entry.image = resolve(e.at("image").get<std::string>());
            if (e.contains("label")) entry.label = parse_label(e.at("label"));
            if (e.contains("mask")) entry.mask = resolve(e.at("mask").get<std::string>());
            if (!entry.label && !entry.mask) {
                throw Error(ErrorCode::FormatError, "entry " + entry.image.string() + " has neither label nor mask");
            }
            if (!fs::exists(entry.image)) throw Error(ErrorCode::FileNotFound, entry.image.string());
            if (entry.mask && !fs::exists(*entry.mask)) throw Error(ErrorCode::FileNotFound, entry.mask->string());
            m.entries.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
    }
    require_entries(m);
    return m;
}

void save_manifest_file(const fs::path& path, const DatasetManifest& manifest) {
    const fs::path base = path.parent_path();
    auto rel = [&](const fs::path& p) { return (base.empty() ? p : p.lexically_relative(base)).generic_string(); };
    nlohmann::json j;
    j["name"] = manifest.name;
    j["layout"] = to_string(manifest.layout);
    j["water_class_values"] = manifest.water_class_values;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : manifest.entries) {
        nlohmann::json ej{{"image", rel(e.image)}};
        if (e.label) ej["label"] = to_string(*e.label);
        if (e.mask) ej["mask"] = rel(*e.mask);
        j["entries"].push_back(std::move(ej));
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

FloodLabel derive_label(std::span<const std::uint8_t> mask, std::span<const int> water_class_values, double threshold) {
    if (mask.empty()) return FloodLabel::NonFlooded;
    std::array<bool, 256> is_water{};
    for (int v : water_class_values) {
        if (v >= 0 && v < 256) is_water[static_cast<std::size_t>(v)] = true;
    }
    std::size_t water = 0;
    for (std::uint8_t v : mask) water += is_water[v] ? 1 : 0;
    return static_cast<double>(water) / static_cast<double>(mask.size()) > threshold ? FloodLabel::Flooded
                                                                                      : FloodLabel::NonFlooded;
}

FloodLabel ground_truth(const ManifestEntry& entry, const DatasetManifest& manifest) {
    if (entry.label) return *entry.label;
    if (!entry.mask) throw Error(ErrorCode::FormatError, entry.image.string() + " has no label or mask");
    const GrayImage mask = load_mask(*entry.mask);
    return derive_label(mask.data, manifest.water_class_values);
}

void ConfusionMatrix::add(FloodLabel predicted, FloodLabel truth) noexcept {
    const bool p = predicted == FloodLabel::Flooded;
    const bool t = truth == FloodLabel::Flooded;
    if (p && t) ++tp;
    else if (p) ++fp;
    else if (t) ++fn;
    else ++tn;
}

double f1_score(double precision, double recall) noexcept {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

Metrics compute_metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw Error(ErrorCode::EmptyEvaluation, "no evaluated images");
    Metrics m;
    const auto ratio = [](std::size_t num, std::size_t den, bool& degenerate) {
        degenerate = den == 0;
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    m.precision = ratio(cm.tp, cm.tp + cm.fp, m.precision_degenerate);
    m.recall = ratio(cm.tp, cm.tp + cm.fn, m.recall_degenerate);
    m.f1_degenerate = m.precision + m.recall == 0.0;
    m.f1 = f1_score(m.precision, m.recall);
    m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    return m;
}

ConfusionMatrix recount(std::span<const ImageRecord> records) {
    ConfusionMatrix cm;
    for (const auto& r : records) cm.add(r.predicted, r.truth);
    return cm;
}

EvalReport run_segmentation_eval(const DatasetManifest& manifest, const ReferenceSignature& ref,
                                 const SegmentationConfig& config, int threads) {
    require_entries(manifest);
    if (ref.histograms.empty()) throw Error(ErrorCode::EmptyReference, "reference signature has no histograms");
    if (config.k < 2) throw Error(ErrorCode::InvalidK, "segmentation needs k >= 2");
    const std::vector<FloodLabel> truths = resolve_truths(manifest, threads);

    EvalReport report;
    report.model_id = "kmeans(k=" + std::to_string(config.k) + "," + std::string(to_string(config.color_space)) +
                      (config.use_texture ? ",lbp" : ",color-only") + ")";
    report.dataset = manifest.name;
    report.test_dataset = manifest.name;
    report.per_image.resize(manifest.entries.size());
    parallel_for(manifest.entries.size(), threads, [&](std::size_t i) {
        ImageRecord& rec = report.per_image[i];
        rec.path = manifest.entries[i].image.generic_string();
        rec.truth = truths[i];
        try {
            const SegmentationResult r = segment_and_classify(load_image(manifest.entries[i].image), ref, config);
            rec.predicted = r.decision;
            rec.value = r.water_fraction;
        } catch (...) {
            rec.predicted = FloodLabel::NonFlooded;
            rec.error = failure_text(std::current_exception());
        }
    });
    return finish(std::move(report));
}

std::vector<SweepRow> sweep_k(const DatasetManifest& manifest, const ReferenceSignature& ref,
                              std::span<const int> k_values, std::span<const ColorSpace> color_spaces,
                              const SegmentationConfig& base, int threads) {
    if (k_values.empty()) throw Error(ErrorCode::InvalidArgument, "k sweep needs at least one k");
    if (color_spaces.empty()) throw Error(ErrorCode::InvalidArgument, "k sweep needs at least one colour space");
    for (int k : k_values) {
        if (k < 2) throw Error(ErrorCode::InvalidK, "segmentation needs k >= 2, got " + std::to_string(k));
    }
    std::vector<SweepRow> rows;
    for (int k : k_values) {
        for (ColorSpace cs : color_spaces) {
            SegmentationConfig cfg = base;
            cfg.k = k;
            cfg.color_space = cs;
            const EvalReport r = run_segmentation_eval(manifest, ref, cfg, threads);
            rows.push_back({cs, k, r.confusion, r.metrics});
        }
    }
    return rows;
}

LbpFeature512 image_feature(const fs::path& path) { return lbp_feature_512(rgb_to_gray(load_image(path))); }

EvalReport evaluate_model(const MlpModel& model, const DatasetManifest& manifest, int threads, std::string model_id) {
    require_entries(manifest);
    const std::vector<FloodLabel> truths = resolve_truths(manifest, threads);
    EvalReport report;
    report.model_id = std::move(model_id);
    report.dataset = manifest.name;
    report.test_dataset = manifest.name;
    report.per_image.resize(manifest.entries.size());
    parallel_for(manifest.entries.size(), threads, [&](std::size_t i) {
        ImageRecord& rec = report.per_image[i];
        rec.path = manifest.entries[i].image.generic_string();
        rec.truth = truths[i];
        try {
            const FloodDecision d = predict(model, image_feature(manifest.entries[i].image));
            rec.predicted = d.label;
            rec.value = d.score;
        } catch (...) {
            rec.predicted = FloodLabel::NonFlooded;
            rec.error = failure_text(std::current_exception());
        }
    });
    return finish(std::move(report));
}

CrossEvalResult run_cross_eval(const DatasetManifest& train_set, const DatasetManifest& test_set,
                               const TrainConfig& cfg, int threads) {
    require_entries(train_set);
    require_entries(test_set);
    const std::vector<FloodLabel> truths = resolve_truths(train_set, threads);

    std::vector<std::optional<LabeledFeature>> extracted(train_set.entries.size());
    std::vector<std::string> failures(train_set.entries.size());
    parallel_for(train_set.entries.size(), threads, [&](std::size_t i) {
        try {
            extracted[i] = LabeledFeature{image_feature(train_set.entries[i].image),
                                          truths[i] == FloodLabel::Flooded ? 1 : 0};
        } catch (...) {
            failures[i] = failure_text(std::current_exception());
        }
    });
    std::vector<LabeledFeature> samples;
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < extracted.size(); ++i) {
        if (extracted[i]) {
            samples.push_back(std::move(*extracted[i]));
        } else {
            warnings.push_back("skipped training image " + train_set.entries[i].image.generic_string() + ": " + failures[i]);
        }
    }
    if (samples.empty()) throw Error(ErrorCode::EmptyDataset, "no usable training images in '" + train_set.name + "'");

    CrossEvalResult out;
    out.training = train(mlp_init(cfg.seed, cfg.dropout_rate), samples, cfg);
    out.report = evaluate_model(out.training.model, test_set, threads, "mlp(train=" + train_set.name + ")");
    out.report.train_dataset = train_set.name;
    out.report.test_dataset = test_set.name;
    out.report.warnings = std::move(warnings);
    out.report.warnings.insert(out.report.warnings.end(), out.training.warnings.begin(), out.training.warnings.end());
    return out;
}

std::vector<EvalReport> cross_dataset_grid(const DatasetManifest& a, const DatasetManifest& b, const TrainConfig& cfg,
                                           int threads) {
    std::vector<EvalReport> grid;
    const std::pair<const DatasetManifest*, const DatasetManifest*> order[] = {{&a, &a}, {&a, &b}, {&b, &b}, {&b, &a}};
    for (const auto& [train_set, test_set] : order) grid.push_back(run_cross_eval(*train_set, *test_set, cfg, threads).report);
    return grid;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["model_id"] = report.model_id;
    j["dataset"] = report.dataset;
    j["train_dataset"] = report.train_dataset;
    j["test_dataset"] = report.test_dataset;
    j["confusion"] = confusion_json(report.confusion);
    const nlohmann::json m = metrics_json(report.metrics);
    for (const auto& [key, value] : m.items()) j[key] = value;
    j["per_image"] = nlohmann::json::array();
    for (const auto& r : report.per_image) {
        nlohmann::json rj{{"path", r.path},
                          {"truth", to_string(r.truth)},
                          {"predicted", to_string(r.predicted)},
                          {"value", r.value}};
        rj["error"] = r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr);
        j["per_image"].push_back(std::move(rj));
    }
    j["warnings"] = report.warnings;
    return j.dump(2) + "\n";
}

std::string report_to_csv(const EvalReport& report) {
    std::string out = "path,truth,predicted,score_or_fraction\n";
    for (const auto& r : report.per_image) {
        out += csv_field(r.path) + "," + std::string(to_string(r.truth)) + "," + std::string(to_string(r.predicted)) +
               "," + format_real(r.value) + "\n";
    }
    return out;
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
    std::string out = "colorspace,k,accuracy,precision,recall,f1\n";
    for (const auto& r : rows) {
        out += std::string(to_string(r.color_space)) + "," + std::to_string(r.k) + "," + format_real(r.metrics.accuracy) +
               "," + format_real(r.metrics.precision) + "," + format_real(r.metrics.recall) + "," +
               format_real(r.metrics.f1) + "\n";
    }
    return out;
}

std::string sweep_to_json(std::span<const SweepRow> rows, std::string_view dataset) {
    nlohmann::json j;
    j["dataset"] = dataset;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json rj = metrics_json(r.metrics);
        rj["colorspace"] = to_string(r.color_space);
        rj["k"] = r.k;
        rj["confusion"] = confusion_json(r.confusion);
        j["rows"].push_back(std::move(rj));
    }
    return j.dump(2) + "\n";
}

}  // namespace floodlens
