#include "perturbeval/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "perturbeval/error.hpp"
#include "perturbeval/io.hpp"

namespace perturbeval {

std::string_view to_string(Backend backend) {
    switch (backend) {
        case Backend::Toy: return "toy";
        case Backend::OnnxFile: return "onnx";
        case Backend::Subprocess: return "subprocess";
    }
    return "unknown";
}

void Classifier::check_shapes(std::span<const ImageTensor> images) const {
    const auto expected = input_shape();
    for (const auto& img : images) {
        if (img.shape() != expected) {
            throw DimensionError("classifier expects " + to_string(expected) + " input, got " + to_string(img.shape()));
        }
    }
}

std::vector<ProbabilityVector> Classifier::predict_preprocessed(std::span<const ImageTensor> images) const {
    check_shapes(images);
    if (images.empty()) return {};
    auto out = predict_body(images);
    if (out.size() != images.size()) {
        throw BackendError("backend returned " + std::to_string(out.size()) + " predictions for " +
                           std::to_string(images.size()) + " images");
    }
    for (const auto& p : out) {
        if (p.num_classes() != num_classes()) {
            throw BackendError("backend returned " + std::to_string(p.num_classes()) + " classes, expected " +
                               std::to_string(num_classes()));
        }
    }
    return out;
}

std::vector<ProbabilityVector> Classifier::predict_batch(std::span<const ImageTensor> images) const {
    check_shapes(images);
    std::vector<ImageTensor> pre;
    pre.reserve(images.size());
    for (const auto& img : images) pre.push_back(preprocess(img, preprocessor()));
    return predict_preprocessed(pre);
}

double class_probability(const Classifier& h, const ImageTensor& x, ClassId c) {
    if (c >= h.num_classes()) {
        throw ParameterError("class " + std::to_string(c) + " out of range for K = " + std::to_string(h.num_classes()));
    }
    return h.predict_batch(std::span(&x, 1))[0][c];
}

ClassId argmax_class(const Classifier& h, const ImageTensor& x) {
    return argmax(h.predict_batch(std::span(&x, 1))[0]);
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.begin(), logits.end());
    if (out.empty()) return out;
    const double hi = *std::max_element(out.begin(), out.end());
    double sum = 0.0;
    for (double& v : out) {
        v = std::exp(v - hi);
        sum += v;
    }
    for (double& v : out) v /= sum;
    return out;
}

ToyLinearClassifier::ToyLinearClassifier(ToyWeights weights) : w_(std::move(weights)) {
    if (w_.num_classes == 0) throw ParameterError("toy classifier needs at least one class");
    if (w_.shape.height == 0 || w_.shape.width == 0) throw ParameterError("toy classifier input shape is empty");
    if (w_.weights.size() != w_.num_classes * w_.features()) {
        throw ParameterError("toy weight matrix has " + std::to_string(w_.weights.size()) + " entries, expected " +
                             std::to_string(w_.num_classes) + " x " + std::to_string(w_.features()));
    }
    if (w_.bias.size() != w_.num_classes) throw ParameterError("toy bias length does not match K");
}

std::vector<double> ToyLinearClassifier::logits(const ImageTensor& z) const {
    const auto features = z.data();
    const std::size_t n = w_.features();
    std::vector<double> out(w_.num_classes);
    for (std::size_t k = 0; k < w_.num_classes; ++k) {
        const double* row = w_.weights.data() + k * n;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += row[i] * features[i];
        out[k] = acc + w_.bias[k];
    }
    return out;
}

std::vector<ProbabilityVector> ToyLinearClassifier::predict_body(std::span<const ImageTensor> preprocessed) const {
    std::vector<ProbabilityVector> out;
    out.reserve(preprocessed.size());
    for (const auto& z : preprocessed) out.push_back({softmax(logits(z))});
    return out;
}

ClassifierHandle make_toy_linear_classifier(ToyWeights weights) {
    return std::make_shared<const ToyLinearClassifier>(std::move(weights));
}

void to_json(nlohmann::json& j, const ToyWeights& w) {
    j = nlohmann::json{
        {"format", "perturbeval-toy-linear"},
        {"K", w.num_classes},
        {"m", w.shape.height},
        {"n", w.shape.width},
        {"mean", w.preprocessor.mean()},
        {"scale", w.preprocessor.scale()},
        {"W", w.weights},
        {"b", w.bias},
    };
}

void from_json(const nlohmann::json& j, ToyWeights& w) {
    try {
        w.num_classes = j.at("K").get<std::size_t>();
        w.shape = {j.at("m").get<std::size_t>(), j.at("n").get<std::size_t>()};
        w.preprocessor = Preprocessor(j.at("mean").get<std::array<double, 3>>(),
                                      j.value("scale", std::array<double, 3>{1.0, 1.0, 1.0}));
        w.weights = j.at("W").get<std::vector<double>>();
        w.bias = j.at("b").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed toy weights: ") + e.what());
    }
}

ToyWeights load_toy_weights(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParameterError("cannot parse toy weights " + path.string() + ": " + e.what());
    }
    return j.get<ToyWeights>();
}

void save_toy_weights(const std::filesystem::path& path, const ToyWeights& w) {
    io::write_file(path, nlohmann::json(w).dump() + "\n");
}

std::vector<SweepRow> neutral_input_sweep(const Classifier& h, const std::set<int>& levels) {
    if (levels.empty()) throw ParameterError("neutral input sweep needs at least one level");
    const auto shape = h.input_shape();
    std::vector<ImageTensor> images;
    images.reserve(levels.size());
    for (int level : levels) {
        if (level < 0 || level > 255) throw ParameterError("gray level must lie in [0, 255]");
        images.emplace_back(shape.height, shape.width, static_cast<double>(level));
    }
    const auto probs = h.predict_batch(images);
    std::vector<SweepRow> rows;
    rows.reserve(levels.size());
    std::size_t i = 0;
    for (int level : levels) {
        const auto& p = probs[i++];
        const ClassId c = argmax(p);
        rows.push_back({level, c, p[c], p.probs});
    }
    return rows;
}

}  // namespace perturbeval
