#pragma once

#include <filesystem>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "perturbeval/tensor.hpp"

namespace perturbeval {

enum class Backend { Toy, OnnxFile, Subprocess };

std::string_view to_string(Backend backend);

/// Black-box classifier f = f~ o g.
///
/// Implementations provide the network body f~ on preprocessed images; the
/// base class applies g, checks shapes and validates the returned vectors.
/// Predictions must be deterministic and independent of how requests are
/// batched.
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual std::size_t num_classes() const = 0;
    virtual ImageShape input_shape() const = 0;
    virtual const Preprocessor& preprocessor() const = 0;
    virtual Backend backend() const = 0;

    /// False means callers must not invoke predictions concurrently; the RISE
    /// engine funnels such backends through a single dispatcher.
    virtual bool concurrent_safe() const = 0;

    /// f on raw pixel-unit images. Order-preserving.
    std::vector<ProbabilityVector> predict_batch(std::span<const ImageTensor> images) const;

    /// f~ on images that are already preprocessed.
    std::vector<ProbabilityVector> predict_preprocessed(std::span<const ImageTensor> images) const;

protected:
    virtual std::vector<ProbabilityVector> predict_body(std::span<const ImageTensor> preprocessed) const = 0;

private:
    void check_shapes(std::span<const ImageTensor> images) const;
};

using ClassifierHandle = std::shared_ptr<const Classifier>;

/// f^c(x). Throws ParameterError if c >= K.
double class_probability(const Classifier& h, const ImageTensor& x, ClassId c);

/// c_max = argmax_c f^c(x); ties resolve to the lowest index.
ClassId argmax_class(const Classifier& h, const ImageTensor& x);

/// Weights of a linear-softmax classifier on preprocessed pixels:
/// probs = softmax(W * vec(g(x)) + b), vec in (row, column, channel) order.
struct ToyWeights {
    std::size_t num_classes = 0;
    ImageShape shape;
    Preprocessor preprocessor;
    std::vector<double> weights;  ///< K rows of m*n*3, row-major
    std::vector<double> bias;     ///< K

    std::size_t features() const { return shape.pixels() * 3; }
};

class ToyLinearClassifier final : public Classifier {
public:
    explicit ToyLinearClassifier(ToyWeights weights);

    std::size_t num_classes() const override { return w_.num_classes; }
    ImageShape input_shape() const override { return w_.shape; }
    const Preprocessor& preprocessor() const override { return w_.preprocessor; }
    Backend backend() const override { return Backend::Toy; }
    bool concurrent_safe() const override { return true; }

    const ToyWeights& weights() const { return w_; }

    /// W * vec(z) + b for a preprocessed image z.
    std::vector<double> logits(const ImageTensor& preprocessed) const;

protected:
    std::vector<ProbabilityVector> predict_body(std::span<const ImageTensor> preprocessed) const override;

private:
    ToyWeights w_;
};

/// Throws ParameterError when W or b do not match K and the input shape.
ClassifierHandle make_toy_linear_classifier(ToyWeights weights);

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

void to_json(nlohmann::json& j, const ToyWeights& w);
void from_json(const nlohmann::json& j, ToyWeights& w);

ToyWeights load_toy_weights(const std::filesystem::path& path);
void save_toy_weights(const std::filesystem::path& path, const ToyWeights& w);

struct SweepRow {
    int level = 0;
    ClassId argmax = 0;
    double max_prob = 0.0;
    std::vector<double> probs;
};

/// Classifies every constant gray image {gamma}^{m x n x 3}, rows ascending.
std::vector<SweepRow> neutral_input_sweep(const Classifier& h, const std::set<int>& levels);

}  // namespace perturbeval
