#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "perturbeval/backends.hpp"
#include "perturbeval/io.hpp"
#include "perturbeval/metrics.hpp"
#include "perturbeval/rise.hpp"

namespace perturbeval {

struct ClassifierSpec {
    std::string kind = "toy";  ///< toy | onnx | subprocess
    std::string weights;       ///< toy weights JSON
    std::string model;         ///< ONNX file
    std::string command;       ///< subprocess command line
    std::optional<ImageShape> input;  ///< required for onnx
    std::string layout = "auto";      ///< onnx: auto | nchw | nhwc
};

/// Everything that determines a run's outputs. `out_dir` and `jobs` are
/// runtime-only and excluded from the digest.
struct RunConfig {
    ClassifierSpec classifier;
    std::optional<std::array<double, 3>> mean;   ///< overrides the classifier's preprocessing
    std::optional<std::array<double, 3>> scale;

    RiseConfig rise;
    std::optional<double> d_max;
    bool normalized_distance = false;

    std::vector<BaselineSpec> baselines;
    std::size_t r = 1;
    Integration integration = Integration::MeanOfSamples;
    std::vector<PerturbationMetric> metrics{PerturbationMetric::MoRF, PerturbationMetric::LeRF};

    std::string image;
    std::vector<std::string> saliency;
    std::string corpus_dir;
    std::string corpus_glob = "*.png";
    std::size_t histogram_bins = 50;
    std::set<int> levels;
    io::ResizeMode resize = io::ResizeMode::Bilinear;

    std::filesystem::path out_dir = ".";
    std::size_t jobs = 1;
};

/// Overlays values from a TOML file. Unknown keys are rejected.
void apply_toml(RunConfig& cfg, const std::filesystem::path& path);
void apply_toml_string(RunConfig& cfg, const std::string& text);

nlohmann::json canonical_json(const RunConfig& cfg);
std::string run_digest(const RunConfig& cfg);

/// Accepts `a..b` (inclusive) and comma-separated lists of both forms.
std::set<int> parse_levels(const std::string& text);

ClassifierHandle make_classifier(const RunConfig& cfg);

/// Reads an input image and resizes it to the classifier's input shape.
ImageTensor load_input_image(const std::filesystem::path& path, const Classifier& h, io::ResizeMode mode);

/// d_max from the config; defaults to 2000 only for 224x224 inputs.
double resolve_d_max(const RunConfig& cfg, ImageShape shape);

}  // namespace perturbeval
