#include "cli.hpp"

#include "floodlens/classifier.hpp"
#include "floodlens/evaluation.hpp"
#include "floodlens/imaging.hpp"
#include "floodlens/segmentation.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

namespace floodlens::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::InvalidK:
        case ErrorCode::InvalidDropout:
            return kUsageExit;
        case ErrorCode::FileNotFound:
            return 3;
        case ErrorCode::DecodeError:
        case ErrorCode::ImageTooSmall:
            return 4;
        case ErrorCode::FormatError:
        case ErrorCode::ShapeError:
            return 5;
        case ErrorCode::EmptyDataset:
        case ErrorCode::UnpairedImage:
        case ErrorCode::UnknownClassFolder:
        case ErrorCode::EmptyEvaluation:
            return 6;
        case ErrorCode::IoError:
            return 7;
        case ErrorCode::DimensionMismatch:
        case ErrorCode::NotNormalized:
        case ErrorCode::TooFewPoints:
        case ErrorCode::EmptyReference:
        case ErrorCode::EmptyMask:
            return 8;
    }
    return 1;
}

namespace {

struct Common {
    std::string out;
    int threads = 1;
};

struct ManifestArgs {
    std::string manifest;
    std::string layout = "folder-per-class";
    std::vector<int> water_values{255};
    LayoutOptions names;
};

struct SegmentArgs {
    int k = 3;
    std::string colorspace = "lab";
    std::string texture = "on";
    double threshold = kWaterLabelThreshold;
    std::uint64_t seed = 0;
};

struct TrainArgs {
    int epochs = 200;
    double lr = 0.05;
    int batch = 16;
    double dropout = 0.2;
    std::uint64_t seed = 0;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

fs::path prepare_out(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + out + ": " + ec.message());
    return fs::path(out);
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().generic_string(); }

int effective_threads(int flag) {
    if (const char* env = std::getenv("FLOODLENS_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
        throw Error(ErrorCode::InvalidArgument, std::string("FLOODLENS_THREADS must be a positive integer, got '") +
                                                    env + "'");
    }
    if (flag < 1) throw Error(ErrorCode::InvalidArgument, "--threads must be at least 1");
    return flag;
}

// Echo of every effective option; `rerun` turns it back into a command line.
void write_echo(const fs::path& dir, const std::string& command, json options) {
    json j;
    j["command"] = command;
    j["options"] = std::move(options);
    write_text(dir / "config.echo.json", j.dump(2) + "\n");
}

json manifest_echo(const ManifestArgs& m) {
    return {{"manifest", absolute(m.manifest)},
            {"layout", m.layout},
            {"water-values", m.water_values},
            {"flooded-dir", m.names.flooded_dir},
            {"normal-dir", m.names.normal_dir},
            {"mask-suffix", m.names.mask_suffix}};
}

json segment_echo(const SegmentArgs& s) {
    return {{"k", s.k},
            {"colorspace", s.colorspace},
            {"texture", s.texture},
            {"threshold", s.threshold},
            {"seed", s.seed}};
}

json train_echo(const TrainArgs& t) {
    return {{"epochs", t.epochs}, {"lr", t.lr}, {"batch", t.batch}, {"dropout", t.dropout}, {"seed", t.seed}};
}

json merge(json a, const json& b) {
    for (const auto& [key, value] : b.items()) a[key] = value;
    return a;
}

DatasetManifest open_manifest(const ManifestArgs& m) {
    // Absolute paths keep report contents independent of the working directory.
    const fs::path root = absolute(m.manifest);
    if (fs::is_directory(root)) return load_manifest(root, parse_layout(m.layout), m.water_values, m.names);
    return load_manifest_file(root);
}

bool parse_switch(const std::string& text) {
    if (text == "on") return true;
    if (text == "off") return false;
    throw Error(ErrorCode::InvalidArgument, "--texture must be 'on' or 'off', got '" + text + "'");
}

SegmentationConfig segmentation_config(const SegmentArgs& s) {
    SegmentationConfig cfg;
    cfg.k = s.k;
    cfg.seed = s.seed;
    cfg.color_space = parse_color_space(s.colorspace);
    cfg.use_texture = parse_switch(s.texture);
    cfg.decision_threshold = s.threshold;
    return cfg;
}

TrainConfig train_config(const TrainArgs& t) {
    TrainConfig cfg;
    cfg.epochs = t.epochs;
    cfg.learning_rate = t.lr;
    cfg.batch_size = t.batch;
    cfg.dropout_rate = t.dropout;
    cfg.seed = t.seed;
    return cfg;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void add_manifest_options(CLI::App* cmd, ManifestArgs& m) {
    cmd->add_option("--manifest", m.manifest, "Manifest JSON, or a dataset root scanned with --layout")->required();
    cmd->add_option("--layout", m.layout, "Layout for a dataset root: folder-per-class | image-plus-mask");
    cmd->add_option("--water-values", m.water_values, "Mask values counted as water")->delimiter(',');
    cmd->add_option("--flooded-dir", m.names.flooded_dir, "Class folder holding flooded images");
    cmd->add_option("--normal-dir", m.names.normal_dir, "Class folder holding non-flooded images");
    cmd->add_option("--mask-suffix", m.names.mask_suffix, "Mask stem = image stem + suffix");
}

void add_segment_options(CLI::App* cmd, SegmentArgs& s) {
    cmd->add_option("--k", s.k, "Number of clusters");
    cmd->add_option("--colorspace", s.colorspace, "lab | rgb");
    cmd->add_option("--texture", s.texture, "on | off");
    cmd->add_option("--threshold", s.threshold, "Flooded iff water fraction is above this");
    cmd->add_option("--seed", s.seed, "k-means seed");
}

void add_train_options(CLI::App* cmd, TrainArgs& t) {
    cmd->add_option("--epochs", t.epochs);
    cmd->add_option("--lr", t.lr, "SGD learning rate");
    cmd->add_option("--batch", t.batch, "Mini-batch size");
    cmd->add_option("--dropout", t.dropout, "Dropout rate in [0,1)");
    cmd->add_option("--seed", t.seed, "Initialisation, shuffling and dropout seed");
}

void add_common_options(CLI::App* cmd, Common& c) {
    cmd->add_option("--out", c.out, "Output directory")->required();
    cmd->add_option("--threads", c.threads, "Worker threads (FLOODLENS_THREADS overrides)");
}

// Images and masks are either equal-length file lists or two directories paired by stem.
std::vector<std::pair<fs::path, fs::path>> pair_reference_inputs(const std::vector<std::string>& images,
                                                                 const std::vector<std::string>& masks,
                                                                 const std::string& mask_suffix) {
    std::vector<std::pair<fs::path, fs::path>> pairs;
    if (images.size() == 1 && masks.size() == 1 && fs::is_directory(images[0])) {
        if (!fs::is_directory(masks[0])) throw Error(ErrorCode::FileNotFound, masks[0]);
        std::map<std::string, fs::path> by_stem;
        for (const auto& e : fs::directory_iterator(masks[0])) {
            if (e.is_regular_file()) by_stem[e.path().stem().string()] = e.path();
        }
        std::vector<fs::path> imgs;
        for (const auto& e : fs::directory_iterator(images[0])) {
            if (e.is_regular_file()) imgs.push_back(e.path());
        }
        std::sort(imgs.begin(), imgs.end());
        for (const auto& img : imgs) {
            const auto it = by_stem.find(img.stem().string() + mask_suffix);
            if (it == by_stem.end()) throw Error(ErrorCode::UnpairedImage, "no mask for " + img.stem().string());
            pairs.emplace_back(img, it->second);
        }
        if (pairs.empty()) throw Error(ErrorCode::EmptyReference, "no images in " + images[0]);
        return pairs;
    }
    if (images.size() != masks.size()) {
        throw Error(ErrorCode::InvalidArgument, std::to_string(images.size()) + " images but " +
                                                    std::to_string(masks.size()) + " masks");
    }
    for (std::size_t i = 0; i < images.size(); ++i) pairs.emplace_back(images[i], masks[i]);
    return pairs;
}

int cmd_build_reference(const Common& c, const std::vector<std::string>& images, const std::vector<std::string>& masks,
                        const std::vector<int>& water_values, const std::string& mask_suffix) {
    const fs::path out = prepare_out(c.out);
    const std::set<int> water(water_values.begin(), water_values.end());
    std::vector<std::pair<RgbImage, BinaryMask>> samples;
    std::string note;
    for (const auto& [img_path, mask_path] : pair_reference_inputs(images, masks, mask_suffix)) {
        RgbImage img = load_image(img_path);
        const GrayImage mask = load_mask(mask_path);
        if (mask.width != img.width || mask.height != img.height) {
            throw Error(ErrorCode::DimensionMismatch, mask_path.string() + " does not match " + img_path.string());
        }
        const GrayImage inner = crop(mask, 1);
        BinaryMask m;
        m.width = inner.width;
        m.height = inner.height;
        m.values.resize(inner.data.size());
        std::transform(inner.data.begin(), inner.data.end(), m.values.begin(),
                       [&](std::uint8_t v) { return static_cast<std::uint8_t>(water.count(v) ? 1 : 0); });
        if (m.count() == 0) throw Error(ErrorCode::EmptyMask, mask_path.string() + " has no water pixels");
        note += (note.empty() ? "" : ";") + img_path.filename().string();
        samples.emplace_back(std::move(img), std::move(m));
    }
    save_reference(out / "reference.json", build_reference_signature(samples, note));

    std::vector<std::string> abs_images;
    std::vector<std::string> abs_masks;
    for (const auto& p : images) abs_images.push_back(absolute(p));
    for (const auto& p : masks) abs_masks.push_back(absolute(p));
    write_echo(out, "build-reference",
               {{"images", abs_images},
                {"masks", abs_masks},
                {"water-values", water_values},
                {"mask-suffix", mask_suffix},
                {"out", c.out},
                {"threads", c.threads}});
    std::cout << (out / "reference.json").string() << "\n";
    return 0;
}

int cmd_segment(const Common& c, const std::string& input, const std::string& reference, const SegmentArgs& s) {
    const SegmentationConfig cfg = segmentation_config(s);
    const fs::path out = prepare_out(c.out);
    const RgbImage img = load_image(input);
    const ReferenceSignature ref = load_reference(reference);
    const SegmentationResult r = segment_and_classify(img, ref, cfg);
    save_gray_png(out / "mask.png", water_mask(r, img.width, img.height));

    json distances = json::array();
    for (double d : r.segment_distances) distances.push_back(finite_or_null(d));
    json record{{"input", absolute(input)},
                {"k", cfg.k},
                {"colorspace", std::string(to_string(cfg.color_space))},
                {"texture", cfg.use_texture},
                {"feature_dim", r.feature_dim},
                {"seed", cfg.seed},
                {"threshold", cfg.decision_threshold},
                {"water_segment", r.water_segment ? json(*r.water_segment) : json(nullptr)},
                {"segment_distances", distances},
                {"water_fraction", r.water_fraction},
                {"decision", std::string(to_string(r.decision))},
                {"inertia", r.inertia},
                {"iterations", r.iterations}};
    write_text(out / "report.json", record.dump(2) + "\n");
    write_echo(out, "segment",
               merge({{"input", absolute(input)}, {"reference", absolute(reference)}, {"out", c.out},
                      {"threads", c.threads}},
                     segment_echo(s)));
    std::cout << to_string(r.decision) << " " << r.water_fraction << "\n";
    return 0;
}

std::string loss_csv(const std::vector<double>& losses) {
    std::string out = "epoch,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < losses.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, losses[i]);
        out += buf;
    }
    return out;
}

int cmd_train(const Common& c, const ManifestArgs& m, const TrainArgs& t) {
    const TrainConfig cfg = train_config(t);
    const int threads = effective_threads(c.threads);
    const fs::path out = prepare_out(c.out);
    const DatasetManifest manifest = open_manifest(m);
    const CrossEvalResult r = run_cross_eval(manifest, manifest, cfg, threads);
    save_model(out / "model.bin", r.training.model);
    write_text(out / "loss.csv", loss_csv(r.training.loss_history));
    write_text(out / "report.json", report_to_json(r.report));
    write_text(out / "report.csv", report_to_csv(r.report));
    write_echo(out, "train", merge(merge(manifest_echo(m), train_echo(t)), {{"out", c.out}, {"threads", c.threads}}));
    for (const auto& w : r.report.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "training accuracy " << r.report.metrics.accuracy << "\n";
    return 0;
}

int cmd_evaluate(const Common& c, const std::string& mode, const ManifestArgs& m, const std::string& reference,
                 const std::string& model_path, const SegmentArgs& s) {
    const int threads = effective_threads(c.threads);
    EvalReport report;
    json echo = merge(manifest_echo(m), {{"mode", mode}, {"out", c.out}, {"threads", c.threads}});
    if (mode == "segmentation") {
        if (reference.empty()) throw Error(ErrorCode::InvalidArgument, "--mode segmentation needs --reference");
        const SegmentationConfig cfg = segmentation_config(s);
        const fs::path out = prepare_out(c.out);
        const ReferenceSignature ref = load_reference(reference);
        report = run_segmentation_eval(open_manifest(m), ref, cfg, threads);
        echo = merge(merge(echo, segment_echo(s)), {{"reference", absolute(reference)}});
    } else if (mode == "mlp") {
        if (model_path.empty()) throw Error(ErrorCode::InvalidArgument, "--mode mlp needs --model");
        prepare_out(c.out);
        const MlpModel model = load_model(model_path);
        report = evaluate_model(model, open_manifest(m), threads, "mlp:" + fs::path(model_path).filename().string());
        echo["model"] = absolute(model_path);
    } else {
        throw Error(ErrorCode::InvalidArgument, "--mode must be 'segmentation' or 'mlp', got '" + mode + "'");
    }
    const fs::path out(c.out);
    write_text(out / "report.json", report_to_json(report));
    write_text(out / "report.csv", report_to_csv(report));
    write_echo(out, "evaluate", echo);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "accuracy " << report.metrics.accuracy << " precision " << report.metrics.precision << " recall "
              << report.metrics.recall << " f1 " << report.metrics.f1 << "\n";
    return 0;
}

int cmd_sweep(const Common& c, const ManifestArgs& m, const std::string& reference, const std::vector<int>& ks,
              const std::vector<std::string>& spaces, const SegmentArgs& s) {
    const int threads = effective_threads(c.threads);
    if (ks.empty()) throw Error(ErrorCode::InvalidArgument, "--k needs at least one value");
    std::vector<ColorSpace> cs;
    for (const auto& name : spaces) cs.push_back(parse_color_space(name));
    const SegmentationConfig base = segmentation_config(s);
    const fs::path out = prepare_out(c.out);
    const DatasetManifest manifest = open_manifest(m);
    const auto rows = sweep_k(manifest, load_reference(reference), ks, cs, base, threads);
    write_text(out / "report.csv", sweep_to_csv(rows));
    write_text(out / "report.json", sweep_to_json(rows, manifest.name));
    json echo = merge(manifest_echo(m), {{"reference", absolute(reference)},
                                         {"k", ks},
                                         {"colorspaces", spaces},
                                         {"texture", s.texture},
                                         {"threshold", s.threshold},
                                         {"seed", s.seed},
                                         {"out", c.out},
                                         {"threads", c.threads}});
    write_echo(out, "sweep", echo);
    std::cout << sweep_to_csv(rows);
    return 0;
}

int cmd_cross(const Common& c, const ManifestArgs& a, const ManifestArgs& b, const TrainArgs& t) {
    const TrainConfig cfg = train_config(t);
    const int threads = effective_threads(c.threads);
    const fs::path out = prepare_out(c.out);
    const auto reports = cross_dataset_grid(open_manifest(a), open_manifest(b), cfg, threads);
    json rows = json::array();
    std::string csv = "train,test,accuracy,precision,recall,f1\n";
    for (const auto& r : reports) {
        rows.push_back(json::parse(report_to_json(r)));
        char buf[128];
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f\n", r.metrics.accuracy, r.metrics.precision,
                      r.metrics.recall, r.metrics.f1);
        csv += r.train_dataset + "," + r.test_dataset + buf;
    }
    write_text(out / "report.json", json{{"rows", rows}}.dump(2) + "\n");
    write_text(out / "report.csv", csv);
    json echo = merge(train_echo(t), manifest_echo(a));
    const json second = manifest_echo(b);
    for (const auto& [key, value] : second.items()) echo["other-" + key] = value;
    echo["out"] = c.out;
    echo["threads"] = c.threads;
    write_echo(out, "cross", echo);
    std::cout << csv;
    return 0;
}

std::string scalar_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "on" : "off";
    return v.dump();
}

// Rebuilds the argument list recorded in a config echo file.
std::vector<std::string> echo_to_args(const std::string& program, const fs::path& echo_path,
                                      const std::string& out_override) {
    std::ifstream in(echo_path);
    if (!in) throw Error(ErrorCode::FileNotFound, echo_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::FormatError, echo_path.string() + ": " + e.what());
    }
    if (!j.contains("command") || !j.contains("options") || !j["options"].is_object()) {
        throw Error(ErrorCode::FormatError, echo_path.string() + " is not a config echo file");
    }
    std::vector<std::string> args{program, j["command"].get<std::string>()};
    for (const auto& [key, value] : j["options"].items()) {
        args.push_back("--" + key);
        if (key == "out" && !out_override.empty()) {
            args.push_back(out_override);
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& v : value) joined += (joined.empty() ? "" : ",") + scalar_text(v);
            args.push_back(joined);
        } else {
            args.push_back(scalar_text(value));
        }
    }
    return args;
}

int dispatch(const std::vector<std::string>& args, int depth);

int parse_and_run(const std::vector<std::string>& args, int depth) {
    CLI::App app{"Flood detection in aerial images: colour/texture segmentation and an LBP classifier"};
    app.name(args.empty() ? "floodlens" : fs::path(args[0]).filename().string());
    app.require_subcommand(1);

    Common common;
    ManifestArgs manifest;
    ManifestArgs other;
    SegmentArgs seg;
    TrainArgs tr;

    std::vector<std::string> images, masks;
    std::vector<int> water_values{255};
    std::string mask_suffix;
    auto* build = app.add_subcommand("build-reference", "Build a water texture signature from images and masks");
    build->add_option("--images", images, "Image files, or one directory")->required()->delimiter(',');
    build->add_option("--masks", masks, "Mask files in the same order, or one directory")->required()->delimiter(',');
    build->add_option("--water-values", water_values, "Mask values counted as water")->delimiter(',');
    build->add_option("--mask-suffix", mask_suffix, "With directories: mask stem = image stem + suffix");
    add_common_options(build, common);

    std::string input, reference;
    auto* segment = app.add_subcommand("segment", "Segment one image and decide flooded / non-flooded");
    segment->add_option("--input", input, "Image file")->required();
    segment->add_option("--reference", reference, "Signature from build-reference")->required();
    add_segment_options(segment, seg);
    add_common_options(segment, common);

    auto* train_cmd = app.add_subcommand("train", "Train the LBP classifier on a labelled dataset");
    add_manifest_options(train_cmd, manifest);
    add_train_options(train_cmd, tr);
    add_common_options(train_cmd, common);

    std::string mode = "segmentation", model_path;
    auto* evaluate = app.add_subcommand("evaluate", "Score a dataset and write report.json / report.csv");
    evaluate->add_option("--mode", mode, "segmentation | mlp");
    add_manifest_options(evaluate, manifest);
    evaluate->add_option("--reference", reference, "Signature for segmentation mode");
    evaluate->add_option("--model", model_path, "Model file for mlp mode");
    add_segment_options(evaluate, seg);
    add_common_options(evaluate, common);

    std::vector<int> ks{3, 4};
    std::vector<std::string> spaces{"lab", "rgb"};
    auto* sweep = app.add_subcommand("sweep", "Accuracy over k and colour space");
    add_manifest_options(sweep, manifest);
    sweep->add_option("--reference", reference, "Signature from build-reference")->required();
    sweep->add_option("--k", ks, "k values")->delimiter(',');
    sweep->add_option("--colorspaces", spaces, "Colour spaces")->delimiter(',');
    sweep->add_option("--texture", seg.texture, "on | off");
    sweep->add_option("--threshold", seg.threshold);
    sweep->add_option("--seed", seg.seed);
    add_common_options(sweep, common);

    auto* cross = app.add_subcommand("cross", "Train/test the classifier across two datasets (4 pairings)");
    add_manifest_options(cross, manifest);
    cross->add_option("--other-manifest", other.manifest, "Second dataset")->required();
    cross->add_option("--other-layout", other.layout);
    cross->add_option("--other-water-values", other.water_values)->delimiter(',');
    cross->add_option("--other-flooded-dir", other.names.flooded_dir);
    cross->add_option("--other-normal-dir", other.names.normal_dir);
    cross->add_option("--other-mask-suffix", other.names.mask_suffix);
    add_train_options(cross, tr);
    add_common_options(cross, common);

    std::string echo_file, rerun_out;
    auto* rerun = app.add_subcommand("rerun", "Repeat a run from its config.echo.json");
    rerun->add_option("config", echo_file, "config.echo.json")->required();
    rerun->add_option("--out", rerun_out, "Write to a different output directory");

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsageExit;
    }

    if (*build) return cmd_build_reference(common, images, masks, water_values, mask_suffix);
    if (*segment) return cmd_segment(common, input, reference, seg);
    if (*train_cmd) return cmd_train(common, manifest, tr);
    if (*evaluate) return cmd_evaluate(common, mode, manifest, reference, model_path, seg);
    if (*sweep) return cmd_sweep(common, manifest, reference, ks, spaces, seg);
    if (*cross) return cmd_cross(common, manifest, other, tr);
    if (*rerun) {
        if (depth > 0) throw Error(ErrorCode::InvalidArgument, "a config echo cannot name rerun");
        return dispatch(echo_to_args(args.empty() ? "floodlens" : args[0], echo_file, rerun_out), depth + 1);
    }
    return kUsageExit;
}

int dispatch(const std::vector<std::string>& args, int depth) {
    try {
        return parse_and_run(args, depth);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int run(const std::vector<std::string>& args) { return dispatch(args, 0); }

}  // namespace floodlens::cli
