#include "cli.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "fixtures.hpp"
#include "perturbeval/digest.hpp"
#include "perturbeval/error.hpp"
#include "perturbeval/io.hpp"
#include "perturbeval/parallel.hpp"
#include "perturbeval/report.hpp"
#include "perturbeval/run_config.hpp"

namespace perturbeval::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Flag values as given on the command line; unset members leave the
/// config-file value alone.
struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> jobs;

    std::optional<std::string> weights;
    std::optional<std::string> onnx;
    std::optional<std::string> server;
    std::optional<std::string> input_size;
    std::optional<std::string> layout;
    std::vector<double> mean;
    std::vector<double> scale;
    std::optional<std::string> resize;

    std::optional<std::string> image;
    std::optional<std::size_t> n;
    std::optional<std::size_t> w;
    std::optional<std::size_t> h;
    std::optional<double> p;
    std::optional<std::string> normalization;
    std::optional<std::size_t> snapshot_interval;
    std::optional<std::size_t> batch_size;
    bool fixed_crop = false;
    std::optional<std::size_t> target;

    std::optional<double> d_max;
    bool normalized_distance = false;

    std::vector<std::string> baselines;
    std::vector<std::string> saliency;
    std::vector<std::string> labels;
    std::vector<std::string> metrics;
    std::optional<std::size_t> r;
    std::optional<std::string> integration;

    std::optional<std::string> dir;
    std::optional<std::string> glob;
    std::optional<std::size_t> bins;
    std::optional<std::string> levels;
};

struct ToyGenFlags {
    std::string kind;
    std::size_t classes = 10;
    std::string size = "8x8";
    double gain = 4.0;
    double amplitude = 1e-3;
    std::uint64_t seed = 0;
    std::vector<double> mean;
    std::vector<double> scale;
    std::string out = ".";
    std::string name;
};

class UsageError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

ImageShape parse_size(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw UsageError("size must look like HxW, got '" + text + "'");
    try {
        std::size_t used = 0;
        const auto h = std::stoul(text.substr(0, x), &used);
        if (used != x) throw std::invalid_argument(text);
        const auto w = std::stoul(text.substr(x + 1), &used);
        if (used != text.size() - x - 1 || h == 0 || w == 0) throw std::invalid_argument(text);
        return {h, w};
    } catch (const std::logic_error&) {
        throw UsageError("size must look like HxW with positive integers, got '" + text + "'");
    }
}

std::array<double, 3> triple(const std::vector<double>& v, const char* name) {
    if (v.size() != 3) throw UsageError(std::string("--") + name + " takes three values");
    return {v[0], v[1], v[2]};
}

void add_common(CLI::App& sub, Flags& f) {
    sub.add_option("--config", f.config, "TOML run configuration; flags override its values");
    sub.add_option("--seed", f.seed, "master seed (falls back to $PERTURBEVAL_SEED)");
    sub.add_option("--out", f.out, "output directory");
    sub.add_option("--jobs", f.jobs, "worker threads (default: available parallelism)")->check(CLI::PositiveNumber);
    sub.add_option("--weights", f.weights, "toy linear classifier weights (JSON)");
    sub.add_option("--onnx", f.onnx, "ONNX model file");
    sub.add_option("--server", f.server, "subprocess classifier command line");
    sub.add_option("--input-size", f.input_size, "ONNX input size HxW");
    sub.add_option("--layout", f.layout, "ONNX tensor layout")->check(CLI::IsMember({"auto", "nchw", "nhwc"}));
    sub.add_option("--mean", f.mean, "preprocessing mean per channel")->expected(3);
    sub.add_option("--scale", f.scale, "preprocessing scale per channel")->expected(3);
    sub.add_option("--resize", f.resize, "input resize filter")->check(CLI::IsMember({"bilinear", "nearest"}));
}

void add_image(CLI::App& sub, Flags& f) {
    sub.add_option("--image", f.image, "input image (PNG)");
    sub.add_option("--target", f.target, "class to explain (default: top class of the input)");
}

void add_rise(CLI::App& sub, Flags& f) {
    sub.add_option("--baseline", f.baselines, "occlusion baseline: constant:<0-255> | inv | blur:<sigma>");
    sub.add_option("--n", f.n, "number of masks");
    sub.add_option("--w", f.w, "mask cells along the width (also sets --h unless given)");
    sub.add_option("--h", f.h, "mask cells along the height");
    sub.add_option("--p", f.p, "probability that a cell is kept");
    sub.add_option("--normalization", f.normalization, "estimator normalization")
        ->check(CLI::IsMember({"scalar", "empirical"}));
    sub.add_option("--snapshot-interval", f.snapshot_interval, "masks between convergence snapshots");
    sub.add_option("--batch-size", f.batch_size, "masks per classifier call");
    sub.add_flag("--fixed-crop", f.fixed_crop, "disable the random mask shift");
}

void add_metrics(CLI::App& sub, Flags& f, bool with_metric_list) {
    sub.add_option("--saliency", f.saliency, "saliency map (.npy or grayscale .png); give two to compare");
    sub.add_option("--label", f.labels, "name for each saliency map in artifact names");
    sub.add_option("--baseline", f.baselines, "occlusion baselines (default: constant:0, constant:127, constant:255, inv, blur:10)");
    sub.add_option("--r", f.r, "pixels occluded per step")->check(CLI::PositiveNumber);
    sub.add_option("--integration", f.integration, "curve area rule")->check(CLI::IsMember({"mean", "trapezoid"}));
    if (with_metric_list) {
        sub.add_option("--metric", f.metrics, "metrics to run")->check(CLI::IsMember({"morf", "lerf"}));
    }
}

RunConfig resolve(const Flags& f, bool rise_single_baseline) {
    RunConfig cfg;
    if (const char* env = std::getenv("PERTURBEVAL_SEED"); env != nullptr && *env != '\0') {
        try {
            std::size_t used = 0;
            cfg.rise.seed = std::stoull(env, &used);
            if (env[used] != '\0') throw std::invalid_argument(env);
        } catch (const std::logic_error&) {
            throw UsageError(std::string("PERTURBEVAL_SEED is not an unsigned integer: '") + env + "'");
        }
    }
    cfg.jobs = default_jobs();
    if (!f.config.empty()) apply_toml(cfg, f.config);

    if (f.seed) cfg.rise.seed = *f.seed;
    if (f.out) cfg.out_dir = *f.out;
    if (f.jobs) cfg.jobs = *f.jobs;

    const int backends = static_cast<int>(f.weights.has_value()) + static_cast<int>(f.onnx.has_value()) +
                         static_cast<int>(f.server.has_value());
    if (backends > 1) throw UsageError("give only one of --weights, --onnx and --server");
    if (f.weights) {
        cfg.classifier.kind = "toy";
        cfg.classifier.weights = *f.weights;
    }
    if (f.onnx) {
        cfg.classifier.kind = "onnx";
        cfg.classifier.model = *f.onnx;
    }
    if (f.server) {
        cfg.classifier.kind = "subprocess";
        cfg.classifier.command = *f.server;
    }
    if (f.input_size) cfg.classifier.input = parse_size(*f.input_size);
    if (f.layout) cfg.classifier.layout = *f.layout;
    if (!f.mean.empty()) cfg.mean = triple(f.mean, "mean");
    if (!f.scale.empty()) cfg.scale = triple(f.scale, "scale");
    if (f.resize) cfg.resize = *f.resize == "nearest" ? io::ResizeMode::Nearest : io::ResizeMode::Bilinear;

    if (f.image) cfg.image = *f.image;
    if (f.n) cfg.rise.num_masks = *f.n;
    if (f.w) {
        cfg.rise.cells_w = *f.w;
        if (!f.h) cfg.rise.cells_h = *f.w;
    }
    if (f.h) cfg.rise.cells_h = *f.h;
    if (f.p) cfg.rise.p = *f.p;
    if (f.normalization) {
        cfg.rise.normalization =
            *f.normalization == "empirical" ? RiseNormalization::EmpiricalPerPixel : RiseNormalization::Scalar;
    }
    if (f.snapshot_interval) cfg.rise.snapshot_interval = *f.snapshot_interval;
    if (f.batch_size) cfg.rise.batch_size = *f.batch_size;
    if (f.fixed_crop) cfg.rise.random_crop = false;
    if (f.target) cfg.rise.target = *f.target;

    if (f.d_max) cfg.d_max = *f.d_max;
    if (f.normalized_distance) cfg.normalized_distance = true;

    if (rise_single_baseline) {
        if (f.baselines.size() > 1) throw UsageError("RISE takes a single --baseline");
        if (!f.baselines.empty()) cfg.rise.baseline = parse_baseline_spec(f.baselines.front());
    } else if (!f.baselines.empty()) {
        cfg.baselines.clear();
        for (const auto& tag : f.baselines) cfg.baselines.push_back(parse_baseline_spec(tag));
    }
    if (!f.saliency.empty()) cfg.saliency = f.saliency;
    if (!f.metrics.empty()) {
        cfg.metrics.clear();
        for (const auto& m : f.metrics) cfg.metrics.push_back(parse_metric(m));
    }
    if (f.r) cfg.r = *f.r;
    if (f.integration) cfg.integration = *f.integration == "trapezoid" ? Integration::Trapezoid : Integration::MeanOfSamples;

    if (f.dir) cfg.corpus_dir = *f.dir;
    if (f.glob) cfg.corpus_glob = *f.glob;
    if (f.bins) cfg.histogram_bins = *f.bins;
    if (f.levels) cfg.levels = parse_levels(*f.levels);
    return cfg;
}

/// Writes artifacts under the output directory and reports each path.
class Emitter {
public:
    Emitter(const RunConfig& cfg, std::string command, std::ostream& out)
        : dir_(cfg.out_dir), command_(std::move(command)), digest_(run_digest(cfg)), config_(canonical_json(cfg)),
          out_(out) {
        fs::create_directories(dir_);
    }

    const std::string& digest() const { return digest_; }

    /// Stamps the digest, the command and the canonical configuration.
    json stamped(json body) const {
        body["config_digest"] = digest_;
        body["command"] = command_;
        body["config"] = config_;
        return body;
    }

    void json_file(const std::string& name, const json& body) { bytes(name, stamped(body).dump(1) + "\n"); }

    void bytes(const std::string& name, const std::string& data) {
        io::write_file(dir_ / name, data);
        announce(name);
    }

    void npy(const std::string& name, const SaliencyMap& map) {
        io::write_npy(dir_ / name, map);
        announce(name);
    }

    void heatmap(const std::string& name, const SaliencyMap& map) {
        write_heatmap_png(dir_ / name, render_heatmap(map), digest_);
        announce(name);
    }

private:
    void announce(const std::string& name) { out_ << (dir_ / name).string() << '\n'; }

    fs::path dir_;
    std::string command_;
    std::string digest_;
    json config_;
    std::ostream& out_;
};

std::string require_image(const RunConfig& cfg) {
    if (cfg.image.empty()) throw UsageError("--image is required");
    return cfg.image;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

std::vector<std::size_t> snapshot_marks(const RiseConfig& rc) {
    std::vector<std::size_t> marks;
    for (std::size_t k = rc.snapshot_interval; k < rc.num_masks; k += rc.snapshot_interval) marks.push_back(k);
    marks.push_back(rc.num_masks);
    return marks;
}

int cmd_rise(const RunConfig& cfg, std::ostream& out) {
    validate(cfg.rise);
    const auto image_path = require_image(cfg);
    const auto h = make_classifier(cfg);
    const auto x = load_input_image(image_path, *h, cfg.resize);
    Emitter emit(cfg, "rise", out);

    RiseResult result = generate_rise(x, cfg.rise, *h, {cfg.jobs, false});
    result.saliency.meta() = {"rise", emit.digest(), static_cast<long>(result.target)};

    const auto stem = stem_of(image_path);
    const auto tag = file_tag(cfg.rise.baseline);
    const auto npy_name = artifact_name(stem, "rise", tag, "saliency", "npy");
    const auto png_name = artifact_name(stem, "rise", tag, "saliency", "png");
    emit.npy(npy_name, result.saliency);
    emit.heatmap(png_name, result.saliency);
    emit.json_file(artifact_name(stem, "rise", tag, "saliency", "json"),
                   {
                       {"method", "rise"},
                       {"image", image_path},
                       {"baseline", to_tag(cfg.rise.baseline)},
                       {"seed", cfg.rise.seed},
                       {"target", result.target},
                       {"shape", {x.height(), x.width()}},
                       {"snapshots", snapshot_marks(cfg.rise)},
                       {"saliency", npy_name},
                       {"heatmap", png_name},
                   });
    return kExitOk;
}

int cmd_converge(const RunConfig& cfg, std::ostream& out) {
    validate(cfg.rise);
    const auto image_path = require_image(cfg);
    const auto h = make_classifier(cfg);
    const auto x = load_input_image(image_path, *h, cfg.resize);
    const ConvergenceOptions conv{resolve_d_max(cfg, x.shape()), cfg.normalized_distance};
    Emitter emit(cfg, "converge", out);

    auto report = convergence_check(x, cfg.rise, *h, conv, RunOptions{cfg.jobs, false});
    const auto stem = stem_of(image_path);
    const auto tag = file_tag(cfg.rise.baseline);
    json maps = json::array();
    for (std::size_t i = 0; i < report.runs.size(); ++i) {
        auto& run = report.runs[i];
        run.saliency.meta() = {"rise", emit.digest(), static_cast<long>(run.target)};
        const auto name = artifact_name(stem, "rise", tag, "run" + std::to_string(i), "npy");
        emit.npy(name, run.saliency);
        maps.push_back(name);
    }
    json body = to_json(report);
    body["image"] = image_path;
    body["seed"] = cfg.rise.seed;
    body["normalized_distance"] = cfg.normalized_distance;
    body["maps"] = std::move(maps);
    emit.json_file(artifact_name(stem, "rise", tag, "convergence", "json"), body);
    return kExitOk;
}

std::vector<std::string> labels_for(const RunConfig& cfg, const Flags& f) {
    if (!f.labels.empty() && f.labels.size() != cfg.saliency.size()) {
        throw UsageError("give one --label per --saliency");
    }
    std::vector<std::string> labels = f.labels;
    for (std::size_t i = labels.size(); i < cfg.saliency.size(); ++i) labels.push_back("map" + std::to_string(i + 1));
    return labels;
}

json curve_body(const PerturbationCurve& curve, const std::string& label, const std::string& saliency_path,
                Integration rule) {
    json body = to_json(curve);
    const auto primary = primary_score(curve, rule);
    body["method"] = label;
    body["saliency"] = saliency_path;
    body["integration"] = rule == Integration::MeanOfSamples ? "mean" : "trapezoid";
    body["auc"] = auc(curve, rule).value;
    body["aoc"] = aoc(curve, rule).value;
    body["score_kind"] = primary.kind == ScoreKind::AOC ? "AOC" : "AUC";
    body["score"] = primary.value;
    return body;
}

int cmd_metrics(const RunConfig& cfg, const Flags& f, const std::string& command, std::ostream& out) {
    const auto image_path = require_image(cfg);
    if (cfg.saliency.empty() || cfg.saliency.size() > 2) {
        throw UsageError(command + " needs one or two --saliency maps");
    }
    if (command == "compare" && cfg.saliency.size() != 2) throw UsageError("compare needs exactly two --saliency maps");
    std::vector<PerturbationMetric> metrics = cfg.metrics;
    if (command == "morf") metrics = {PerturbationMetric::MoRF};
    if (command == "lerf") metrics = {PerturbationMetric::LeRF};
    if (metrics.empty()) throw UsageError("no metrics selected");

    const auto labels = labels_for(cfg, f);
    const auto h = make_classifier(cfg);
    const auto x = load_input_image(image_path, *h, cfg.resize);
    std::vector<SaliencyMap> maps;
    for (std::size_t i = 0; i < cfg.saliency.size(); ++i) {
        auto s = io::read_saliency(cfg.saliency[i]);
        if (s.shape() != x.shape()) {
            throw DimensionError("saliency map " + cfg.saliency[i] + " is " + to_string(s.shape()) +
                                 " but the input is " + to_string(x.shape()));
        }
        s.meta().method = labels[i];
        maps.push_back(std::move(s));
    }
    const auto specs = cfg.baselines.empty()
                           ? std::vector<BaselineSpec>{ConstantBaseline{0}, ConstantBaseline{127}, ConstantBaseline{255},
                                                       InvPreprocZeroBaseline{}, BlurBaseline{10.0}}
                           : cfg.baselines;
    std::vector<BaselineImage> baselines;
    for (const auto& spec : specs) baselines.push_back(make_baseline(spec, h->preprocessor(), x));
    const ClassId c = cfg.rise.target.value_or(argmax_class(*h, x));
    Emitter emit(cfg, command, out);
    const auto stem = stem_of(image_path);

    const auto write_curve = [&](const PerturbationCurve& curve, std::size_t map) {
        const auto tag = file_tag(curve.baseline);
        const auto metric = to_string(curve.metric);
        emit.bytes(artifact_name(stem, labels[map], tag, metric, "csv"), export_curve(curve, CurveFormat::Csv));
        emit.json_file(artifact_name(stem, labels[map], tag, metric, "json"),
                       curve_body(curve, labels[map], cfg.saliency[map], cfg.integration));
    };

    if (maps.size() == 1) {
        for (const auto& b : baselines) {
            for (auto metric : metrics) {
                write_curve(perturbation_curve(x, b, rank_pixels(maps[0], direction_for(metric)), *h, c, cfg.r, metric),
                            0);
            }
        }
        return kExitOk;
    }

    const auto matrix = compare_saliency(x, maps[0], maps[1], baselines, metrics, *h, c, cfg.r, cfg.integration);
    for (const auto& cell : matrix.cells) {
        write_curve(cell.curve_first, 0);
        write_curve(cell.curve_second, 1);
    }
    json body = to_json(matrix);
    body["image"] = image_path;
    body["saliency"] = cfg.saliency;
    body["r"] = cfg.r;
    body["integration"] = cfg.integration == Integration::MeanOfSamples ? "mean" : "trapezoid";
    const std::string metric_slot = metrics.size() == 1 ? to_string(metrics.front()) : "all";
    emit.json_file(artifact_name(stem, "compare", "all", metric_slot, "json"), body);
    return kExitOk;
}

std::string classifier_stem(const RunConfig& cfg) {
    if (cfg.classifier.kind == "toy") {
        auto stem = stem_of(cfg.classifier.weights);
        if (stem.ends_with(".weights")) stem.resize(stem.size() - 8);
        return stem;
    }
    if (cfg.classifier.kind == "onnx") return stem_of(cfg.classifier.model);
    return "subprocess";
}

std::string format_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int cmd_neutral_sweep(RunConfig cfg, std::ostream& out) {
    if (cfg.levels.empty()) cfg.levels = parse_levels("0..255");
    const auto h = make_classifier(cfg);
    Emitter emit(cfg, "neutral-sweep", out);
    const auto rows = neutral_input_sweep(*h, cfg.levels);

    std::string csv = "gamma,argmax_class,max_prob\n";
    json items = json::array();
    for (const auto& row : rows) {
        csv += std::to_string(row.level) + "," + std::to_string(row.argmax) + "," + format_g17(row.max_prob) + "\n";
        items.push_back({{"gamma", row.level}, {"argmax_class", row.argmax}, {"max_prob", row.max_prob},
                         {"probs", row.probs}});
    }
    const auto stem = classifier_stem(cfg);
    emit.bytes(artifact_name(stem, "neutral-sweep", "constant", "max-prob", "csv"), csv);
    emit.json_file(artifact_name(stem, "neutral-sweep", "constant", "max-prob", "json"),
                   {{"num_classes", h->num_classes()}, {"rows", std::move(items)}});
    return kExitOk;
}

struct CorpusEntry {
    std::string image;
    ClassId target = 0;
    std::array<double, 3> distances{};
    double d_bar = 0.0;
    bool converged = false;
};

int cmd_corpus(const RunConfig& cfg, std::ostream& out) {
    validate(cfg.rise);
    if (cfg.corpus_dir.empty()) throw UsageError("--dir is required");
    if (!fs::is_directory(cfg.corpus_dir)) throw IoError("not a directory: " + cfg.corpus_dir);
    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(cfg.corpus_dir)) {
        if (!entry.is_regular_file()) continue;
        const auto name = entry.path().filename().string();
        if (fnmatch(cfg.corpus_glob.c_str(), name.c_str(), 0) == 0) images.push_back(entry.path());
    }
    std::sort(images.begin(), images.end());
    if (images.empty()) throw DataError("no images in " + cfg.corpus_dir + " match '" + cfg.corpus_glob + "'");

    const auto h = make_classifier(cfg);
    const double d_max = resolve_d_max(cfg, h->input_shape());
    const ConvergenceOptions conv{d_max, cfg.normalized_distance};
    std::vector<CorpusEntry> entries(images.size());
    parallel_for(images.size(), cfg.jobs, [&](std::size_t i) {
        const auto x = load_input_image(images[i], *h, cfg.resize);
        const auto report = convergence_check(x, cfg.rise, *h, conv, RunOptions{1, false});
        entries[i] = CorpusEntry{images[i].filename().string(), report.runs[0].target, report.final_distances, report.d_bar,
                      report.converged};
    });

    std::vector<std::pair<bool, double>> outcomes;
    json per_image = json::array();
    std::string csv = "image,target,d_bar,converged\n";
    for (const auto& e : entries) {
        outcomes.emplace_back(e.converged, e.d_bar);
        per_image.push_back({{"image", e.image}, {"target", e.target}, {"final_distances", e.distances},
                             {"d_bar", e.d_bar}, {"converged", e.converged}});
        csv += e.image + "," + std::to_string(e.target) + "," + format_g17(e.d_bar) + "," +
               (e.converged ? "true" : "false") + "\n";
    }
    const auto summary = corpus_convergence_summary(outcomes);
    const auto hist = histogram(summary.d_bars, cfg.histogram_bins);

    Emitter emit(cfg, "corpus", out);
    const auto stem = fs::path(cfg.corpus_dir).lexically_normal().filename().string();
    const auto base = stem.empty() || stem == "." ? std::string("corpus") : stem;
    const auto tag = file_tag(cfg.rise.baseline);
    emit.bytes(artifact_name(base, "rise", tag, "corpus", "csv"), csv);
    emit.json_file(artifact_name(base, "rise", tag, "corpus", "json"),
                   {
                       {"d_max", d_max},
                       {"summary", to_json(summary)},
                       {"histogram", {{"lo", hist.lo}, {"hi", hist.hi}, {"edges", hist.edges}, {"counts", hist.counts}}},
                       {"threshold", threshold_from_histogram(summary.d_bars, cfg.histogram_bins)},
                       {"images", std::move(per_image)},
                   });
    return kExitOk;
}

int cmd_toy_gen(const ToyGenFlags& f, std::ostream& out) {
    const fs::path dir = f.out;
    fs::create_directories(dir);
    const auto name = f.name.empty() ? f.kind : f.name;
    const auto announce = [&](const fs::path& p) { out << p.string() << '\n'; };
    const auto with_preprocessing = [&](ToyWeights w) {
        if (!f.mean.empty() || !f.scale.empty()) {
            w.preprocessor = Preprocessor(f.mean.empty() ? std::array<double, 3>{0, 0, 0} : triple(f.mean, "mean"),
                                          f.scale.empty() ? std::array<double, 3>{1, 1, 1} : triple(f.scale, "scale"));
        }
        return w;
    };

    if (f.kind == "inversion") {
        auto fx = fixtures::inversion_fixture();
        const auto weights = dir / (name + ".weights.json");
        save_toy_weights(weights, fx.weights);
        announce(weights);
        const auto image = dir / (name + ".png");
        io::write_png(image, fx.image);
        announce(image);
        for (const auto* map : {&fx.first, &fx.second}) {
            const auto path = dir / (name + "." + map->meta().method + ".npy");
            io::write_npy(path, *map);
            announce(path);
        }
        return kExitOk;
    }

    const auto shape = parse_size(f.size);
    ToyWeights w;
    if (f.kind == "uniform") {
        w = fixtures::uniform_weights(f.classes, shape);
    } else if (f.kind == "random") {
        w = fixtures::random_weights(f.classes, shape, f.seed, f.amplitude);
    } else {
        w = fixtures::brightness_weights(f.classes, shape, f.gain);
    }
    const auto path = dir / (name + ".weights.json");
    save_toy_weights(path, with_preprocessing(std::move(w)));
    announce(path);
    return kExitOk;
}

int report_error(std::ostream& err, std::string_view kind, const std::string& message, int status) {
    err << json{{"error", {{"kind", kind}, {"message", message}}}, {"exit", status}}.dump() << '\n';
    return status;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Saliency map generation and perturbation-metric evaluation", "perturbeval"};
    app.require_subcommand(1);
    app.set_help_flag("--help", "print this help and exit");
    app.set_version_flag("--version", "perturbeval 1.0.0");

    Flags f;
    ToyGenFlags tg;
    auto* rise = app.add_subcommand("rise", "RISE saliency map for one image");
    add_common(*rise, f);
    add_image(*rise, f);
    add_rise(*rise, f);

    auto* converge = app.add_subcommand("converge", "three-seed RISE convergence diagnostic");
    add_common(*converge, f);
    add_image(*converge, f);
    add_rise(*converge, f);
    converge->add_option("--d-max", f.d_max, "convergence threshold on pairwise L2 distances");
    converge->add_flag("--normalized-distance", f.normalized_distance, "compare maps after [0, 1] normalization");

    auto* morf = app.add_subcommand("morf", "most-relevant-first occlusion curves");
    auto* lerf = app.add_subcommand("lerf", "least-relevant-first occlusion curves");
    auto* compare = app.add_subcommand("compare", "compare two saliency maps across baselines and metrics");
    for (auto* sub : {morf, lerf, compare}) {
        add_common(*sub, f);
        add_image(*sub, f);
        add_metrics(*sub, f, sub == compare);
    }

    auto* sweep = app.add_subcommand("neutral-sweep", "classify constant gray images");
    add_common(*sweep, f);
    sweep->add_option("--levels", f.levels, "gray levels, e.g. 0..255 or 0,127,255");

    auto* corpus = app.add_subcommand("corpus", "convergence statistics over a directory of images");
    add_common(*corpus, f);
    add_rise(*corpus, f);
    corpus->add_option("--dir", f.dir, "image directory");
    corpus->add_option("--glob", f.glob, "file name pattern");
    corpus->add_option("--bins", f.bins, "histogram bins for the d_bar threshold")->check(CLI::PositiveNumber);
    corpus->add_option("--d-max", f.d_max, "convergence threshold on pairwise L2 distances");
    corpus->add_flag("--normalized-distance", f.normalized_distance, "compare maps after [0, 1] normalization");
    corpus->add_option("--target", f.target, "class to explain (default: top class of each image)");

    auto* toy = app.add_subcommand("toy-gen", "write toy classifier weights and fixtures");
    toy->add_option("--kind", tg.kind, "fixture kind")
        ->required()
        ->check(CLI::IsMember({"uniform", "random", "brightness", "inversion"}));
    toy->add_option("--classes", tg.classes, "number of classes")->check(CLI::PositiveNumber);
    toy->add_option("--size", tg.size, "input size HxW");
    toy->add_option("--gain", tg.gain, "brightness: logit slope per 255 units of mean preprocessed intensity");
    toy->add_option("--amplitude", tg.amplitude, "random: weight range");
    toy->add_option("--seed", tg.seed, "random: weight seed");
    toy->add_option("--mean", tg.mean, "preprocessing mean per channel")->expected(3);
    toy->add_option("--scale", tg.scale, "preprocessing scale per channel")->expected(3);
    toy->add_option("--out", tg.out, "output directory");
    toy->add_option("--name", tg.name, "file name prefix (default: the kind)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << app.version() << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        return report_error(err, "usage", e.what(), kExitUsage);
    }

    try {
        if (*toy) return cmd_toy_gen(tg, out);
        if (*rise) return cmd_rise(resolve(f, true), out);
        if (*converge) return cmd_converge(resolve(f, true), out);
        if (*corpus) return cmd_corpus(resolve(f, true), out);
        if (*sweep) return cmd_neutral_sweep(resolve(f, false), out);
        for (auto* sub : {morf, lerf, compare}) {
            if (*sub) return cmd_metrics(resolve(f, false), f, sub->get_name(), out);
        }
        return report_error(err, "usage", "no subcommand", kExitUsage);
    } catch (const UsageError& e) {
        return report_error(err, "usage", e.what(), kExitUsage);
    } catch (const Error& e) {
        const int status = e.kind() == ErrorKind::Backend   ? kExitBackend
                           : e.kind() == ErrorKind::Parameter ? kExitUsage
                                                              : kExitFailure;
        return report_error(err, to_string(e.kind()), e.what(), status);
    } catch (const std::exception& e) {
        return report_error(err, "internal", e.what(), kExitFailure);
    }
}

int run_command(int argc, const char* const* argv) {
    return run_command(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace perturbeval::cli
