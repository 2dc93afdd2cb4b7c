#include "perturbeval/run_config.hpp"

#include <charconv>
#include <sstream>

#include <toml.hpp>

#include "perturbeval/digest.hpp"
#include "perturbeval/error.hpp"

namespace perturbeval {

namespace {

void reject_unknown(const toml::table& table, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : table) {
        if (!allowed.contains(std::string(key.str()))) {
            throw ParameterError("unknown config key '" + where + std::string(key.str()) + "'");
        }
    }
}

template <typename T>
std::optional<T> get(const toml::table& table, const char* key, const std::string& where) {
    const auto* node = table.get(key);
    if (node == nullptr) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) {
        if (auto v = node->value<double>()) return *v;  // integers convert too
    } else if constexpr (std::is_same_v<T, std::size_t>) {
        if (auto v = node->value<std::int64_t>(); v && *v >= 0) return static_cast<std::size_t>(*v);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (auto v = node->value<std::int64_t>(); v && *v >= 0) return static_cast<std::uint64_t>(*v);
    } else {
        if (auto v = node->value<T>()) return *v;
    }
    throw ParameterError("config key '" + where + key + "' has the wrong type");
}

std::vector<std::string> get_strings(const toml::table& table, const char* key, const std::string& where) {
    std::vector<std::string> out;
    const auto* arr = table.get_as<toml::array>(key);
    if (arr == nullptr) {
        if (table.contains(key)) throw ParameterError("config key '" + where + key + "' must be an array");
        return out;
    }
    for (const auto& el : *arr) {
        auto s = el.value<std::string>();
        if (!s) throw ParameterError("config key '" + where + key + "' must hold strings");
        out.push_back(*s);
    }
    return out;
}

std::optional<std::array<double, 3>> get_triple(const toml::table& table, const char* key, const std::string& where) {
    const auto* arr = table.get_as<toml::array>(key);
    if (arr == nullptr) {
        if (table.contains(key)) throw ParameterError("config key '" + where + key + "' must be an array");
        return std::nullopt;
    }
    if (arr->size() != 3) throw ParameterError("config key '" + where + key + "' needs three values");
    std::array<double, 3> out{};
    for (std::size_t i = 0; i < 3; ++i) {
        auto v = (*arr)[i].value<double>();
        if (!v) throw ParameterError("config key '" + where + key + "' must hold numbers");
        out[i] = *v;
    }
    return out;
}

const toml::table* section(const toml::table& root, const char* name) {
    const auto* node = root.get(name);
    if (node == nullptr) return nullptr;
    const auto* t = node->as_table();
    if (t == nullptr) throw ParameterError(std::string("config section '") + name + "' must be a table");
    return t;
}

RiseNormalization parse_normalization(const std::string& s) {
    if (s == "scalar") return RiseNormalization::Scalar;
    if (s == "empirical") return RiseNormalization::EmpiricalPerPixel;
    throw ParameterError("unknown normalization '" + s + "' (expected scalar or empirical)");
}

Integration parse_integration(const std::string& s) {
    if (s == "mean") return Integration::MeanOfSamples;
    if (s == "trapezoid") return Integration::Trapezoid;
    throw ParameterError("unknown integration rule '" + s + "' (expected mean or trapezoid)");
}

io::ResizeMode parse_resize(const std::string& s) {
    if (s == "bilinear") return io::ResizeMode::Bilinear;
    if (s == "nearest") return io::ResizeMode::Nearest;
    throw ParameterError("unknown resize mode '" + s + "' (expected bilinear or nearest)");
}

void apply_table(RunConfig& cfg, const toml::table& root) {
    reject_unknown(root,
                   {"seed", "classifier", "preprocess", "rise", "convergence", "metrics", "corpus", "sweep", "input",
                    "output"},
                   "");
    if (auto v = get<std::uint64_t>(root, "seed", "")) cfg.rise.seed = *v;

    if (const auto* t = section(root, "classifier")) {
        reject_unknown(*t, {"kind", "weights", "model", "command", "input", "layout"}, "classifier.");
        if (auto v = get<std::string>(*t, "kind", "classifier.")) cfg.classifier.kind = *v;
        if (auto v = get<std::string>(*t, "weights", "classifier.")) cfg.classifier.weights = *v;
        if (auto v = get<std::string>(*t, "model", "classifier.")) cfg.classifier.model = *v;
        if (auto v = get<std::string>(*t, "command", "classifier.")) cfg.classifier.command = *v;
        if (auto v = get<std::string>(*t, "layout", "classifier.")) cfg.classifier.layout = *v;
        if (const auto* arr = t->get_as<toml::array>("input")) {
            if (arr->size() != 2) throw ParameterError("classifier.input needs [height, width]");
            const auto h = (*arr)[0].value<std::int64_t>();
            const auto w = (*arr)[1].value<std::int64_t>();
            if (!h || !w || *h <= 0 || *w <= 0) throw ParameterError("classifier.input must be positive integers");
            cfg.classifier.input = ImageShape{static_cast<std::size_t>(*h), static_cast<std::size_t>(*w)};
        }
    }
    if (const auto* t = section(root, "preprocess")) {
        reject_unknown(*t, {"mean", "scale"}, "preprocess.");
        if (auto v = get_triple(*t, "mean", "preprocess.")) cfg.mean = v;
        if (auto v = get_triple(*t, "scale", "preprocess.")) cfg.scale = v;
    }
    if (const auto* t = section(root, "rise")) {
        reject_unknown(*t,
                       {"n", "w", "h", "p", "baseline", "normalization", "snapshot_interval", "batch_size",
                        "random_crop", "target"},
                       "rise.");
        auto& r = cfg.rise;
        if (auto v = get<std::size_t>(*t, "n", "rise.")) r.num_masks = *v;
        if (auto v = get<std::size_t>(*t, "w", "rise.")) {
            r.cells_w = *v;
            if (!t->contains("h")) r.cells_h = *v;
        }
        if (auto v = get<std::size_t>(*t, "h", "rise.")) r.cells_h = *v;
        if (auto v = get<double>(*t, "p", "rise.")) r.p = *v;
        if (auto v = get<std::string>(*t, "baseline", "rise.")) r.baseline = parse_baseline_spec(*v);
        if (auto v = get<std::string>(*t, "normalization", "rise.")) r.normalization = parse_normalization(*v);
        if (auto v = get<std::size_t>(*t, "snapshot_interval", "rise.")) r.snapshot_interval = *v;
        if (auto v = get<std::size_t>(*t, "batch_size", "rise.")) r.batch_size = *v;
        if (auto v = get<bool>(*t, "random_crop", "rise.")) r.random_crop = *v;
        if (auto v = get<std::size_t>(*t, "target", "rise.")) r.target = *v;
    }
    if (const auto* t = section(root, "convergence")) {
        reject_unknown(*t, {"d_max", "normalized_distance"}, "convergence.");
        if (auto v = get<double>(*t, "d_max", "convergence.")) cfg.d_max = *v;
        if (auto v = get<bool>(*t, "normalized_distance", "convergence.")) cfg.normalized_distance = *v;
    }
    if (const auto* t = section(root, "metrics")) {
        reject_unknown(*t, {"r", "baselines", "integration", "metrics"}, "metrics.");
        if (auto v = get<std::size_t>(*t, "r", "metrics.")) cfg.r = *v;
        if (auto v = get<std::string>(*t, "integration", "metrics.")) cfg.integration = parse_integration(*v);
        if (t->contains("baselines")) {
            cfg.baselines.clear();
            for (const auto& s : get_strings(*t, "baselines", "metrics.")) cfg.baselines.push_back(parse_baseline_spec(s));
        }
        if (t->contains("metrics")) {
            cfg.metrics.clear();
            for (const auto& s : get_strings(*t, "metrics", "metrics.")) cfg.metrics.push_back(parse_metric(s));
        }
    }
    if (const auto* t = section(root, "corpus")) {
        reject_unknown(*t, {"dir", "glob", "bins"}, "corpus.");
        if (auto v = get<std::string>(*t, "dir", "corpus.")) cfg.corpus_dir = *v;
        if (auto v = get<std::string>(*t, "glob", "corpus.")) cfg.corpus_glob = *v;
        if (auto v = get<std::size_t>(*t, "bins", "corpus.")) cfg.histogram_bins = *v;
    }
    if (const auto* t = section(root, "sweep")) {
        reject_unknown(*t, {"levels"}, "sweep.");
        if (auto v = get<std::string>(*t, "levels", "sweep.")) cfg.levels = parse_levels(*v);
    }
    if (const auto* t = section(root, "input")) {
        reject_unknown(*t, {"image", "saliency", "resize"}, "input.");
        if (auto v = get<std::string>(*t, "image", "input.")) cfg.image = *v;
        if (t->contains("saliency")) cfg.saliency = get_strings(*t, "saliency", "input.");
        if (auto v = get<std::string>(*t, "resize", "input.")) cfg.resize = parse_resize(*v);
    }
    if (const auto* t = section(root, "output")) {
        reject_unknown(*t, {"dir"}, "output.");
        if (auto v = get<std::string>(*t, "dir", "output.")) cfg.out_dir = *v;
    }
}

}  // namespace

void apply_toml_string(RunConfig& cfg, const std::string& text) {
    try {
        apply_table(cfg, toml::parse(text));
    } catch (const toml::parse_error& e) {
        std::ostringstream ss;
        ss << "config parse error: " << e.description() << " at " << e.source().begin;
        throw ParameterError(ss.str());
    }
}

void apply_toml(RunConfig& cfg, const std::filesystem::path& path) {
    apply_toml_string(cfg, io::read_file(path));
}

nlohmann::json canonical_json(const RunConfig& cfg) {
    nlohmann::json baselines = nlohmann::json::array();
    for (const auto& b : cfg.baselines) baselines.push_back(to_tag(b));
    nlohmann::json metrics = nlohmann::json::array();
    for (auto m : cfg.metrics) metrics.push_back(to_string(m));
    nlohmann::json classifier{
        {"kind", cfg.classifier.kind},
        {"weights", cfg.classifier.weights},
        {"model", cfg.classifier.model},
        {"command", cfg.classifier.command},
        {"layout", cfg.classifier.layout},
        {"input", cfg.classifier.input ? nlohmann::json{cfg.classifier.input->height, cfg.classifier.input->width}
                                       : nlohmann::json(nullptr)},
    };
    return {
        {"classifier", std::move(classifier)},
        {"mean", cfg.mean ? nlohmann::json(*cfg.mean) : nlohmann::json(nullptr)},
        {"scale", cfg.scale ? nlohmann::json(*cfg.scale) : nlohmann::json(nullptr)},
        {"rise", to_json(cfg.rise)},
        {"d_max", cfg.d_max ? nlohmann::json(*cfg.d_max) : nlohmann::json(nullptr)},
        {"normalized_distance", cfg.normalized_distance},
        {"baselines", std::move(baselines)},
        {"r", cfg.r},
        {"integration", cfg.integration == Integration::MeanOfSamples ? "mean" : "trapezoid"},
        {"metrics", std::move(metrics)},
        {"image", cfg.image},
        {"saliency", cfg.saliency},
        {"corpus_dir", cfg.corpus_dir},
        {"corpus_glob", cfg.corpus_glob},
        {"histogram_bins", cfg.histogram_bins},
        {"levels", cfg.levels},
        {"resize", cfg.resize == io::ResizeMode::Bilinear ? "bilinear" : "nearest"},
    };
}

std::string run_digest(const RunConfig& cfg) { return config_digest(canonical_json(cfg)); }

std::set<int> parse_levels(const std::string& text) {
    std::set<int> out;
    const auto parse_int = [&](std::string_view s) {
        int v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
            throw ParameterError("bad gray level '" + std::string(s) + "' in '" + text + "'");
        }
        if (v < 0 || v > 255) throw ParameterError("gray levels must lie in [0, 255]");
        return v;
    };
    std::string_view rest = text;
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto item = rest.substr(0, comma);
        const auto dots = item.find("..");
        if (dots == std::string_view::npos) {
            out.insert(parse_int(item));
        } else {
            const int lo = parse_int(item.substr(0, dots));
            const int hi = parse_int(item.substr(dots + 2));
            if (lo > hi) throw ParameterError("empty level range '" + std::string(item) + "'");
            for (int v = lo; v <= hi; ++v) out.insert(v);
        }
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    if (out.empty()) throw ParameterError("no gray levels given");
    return out;
}

ClassifierHandle make_classifier(const RunConfig& cfg) {
    const auto& spec = cfg.classifier;
    const auto preprocessor = [&](const Preprocessor& fallback) {
        return Preprocessor(cfg.mean.value_or(fallback.mean()), cfg.scale.value_or(fallback.scale()));
    };
    if (spec.kind == "toy") {
        if (spec.weights.empty()) throw ParameterError("toy classifier needs a weights file");
        ToyWeights w = load_toy_weights(spec.weights);
        w.preprocessor = preprocessor(w.preprocessor);
        return make_toy_linear_classifier(std::move(w));
    }
    if (spec.kind == "onnx") {
        if (spec.model.empty()) throw ParameterError("onnx classifier needs a model path");
        if (!spec.input) throw ParameterError("onnx classifier needs an input shape");
        OnnxLayout layout = OnnxLayout::Auto;
        if (spec.layout == "nchw") {
            layout = OnnxLayout::Nchw;
        } else if (spec.layout == "nhwc") {
            layout = OnnxLayout::Nhwc;
        } else if (spec.layout != "auto") {
            throw ParameterError("unknown ONNX layout '" + spec.layout + "'");
        }
        return make_onnx_classifier(spec.model, *spec.input, preprocessor(Preprocessor{}), layout);
    }
    if (spec.kind == "subprocess") {
        if (spec.command.empty()) throw ParameterError("subprocess classifier needs a command");
        return make_subprocess_classifier(spec.command, preprocessor(Preprocessor{}));
    }
    throw ParameterError("unknown classifier kind '" + spec.kind + "' (expected toy, onnx or subprocess)");
}

ImageTensor load_input_image(const std::filesystem::path& path, const Classifier& h, io::ResizeMode mode) {
    return io::resize(io::read_png(path), h.input_shape(), mode);
}

double resolve_d_max(const RunConfig& cfg, ImageShape shape) {
    if (cfg.d_max) {
        if (!(*cfg.d_max > 0.0)) throw ParameterError("d_max must be positive");
        return *cfg.d_max;
    }
    if (shape == ImageShape{224, 224}) return 2000.0;
    throw ParameterError("d_max must be given explicitly for " + to_string(shape) +
                         " inputs (the 2000 default only applies to 224x224 maps)");
}

}  // namespace perturbeval
