#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace perturbeval {

struct ImageShape {
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t pixels() const { return height * width; }
    friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

std::string to_string(const ImageShape& shape);

/// An RGB image stored row-major as (row, column, channel) with 64-bit reals
/// in raw pixel units. Values are not clamped after arithmetic.
class ImageTensor {
public:
    static constexpr std::size_t kChannels = 3;

    ImageTensor() = default;
    ImageTensor(std::size_t height, std::size_t width, double fill = 0.0);
    ImageTensor(std::size_t height, std::size_t width, std::vector<double> data);

    std::size_t height() const { return shape_.height; }
    std::size_t width() const { return shape_.width; }
    const ImageShape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    double& at(std::size_t row, std::size_t col, std::size_t channel) {
        return data_[(row * shape_.width + col) * kChannels + channel];
    }
    double at(std::size_t row, std::size_t col, std::size_t channel) const {
        return data_[(row * shape_.width + col) * kChannels + channel];
    }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

private:
    ImageShape shape_;
    std::vector<double> data_;
};

/// The mean-shift preprocessing g(x) = (x - mean) * scale, per channel.
class Preprocessor {
public:
    Preprocessor() = default;
    explicit Preprocessor(std::array<double, 3> mean, std::array<double, 3> scale = {1.0, 1.0, 1.0});

    const std::array<double, 3>& mean() const { return mean_; }
    const std::array<double, 3>& scale() const { return scale_; }

    friend bool operator==(const Preprocessor&, const Preprocessor&) = default;

private:
    std::array<double, 3> mean_{0.0, 0.0, 0.0};
    std::array<double, 3> scale_{1.0, 1.0, 1.0};
};

ImageTensor preprocess(const ImageTensor& x, const Preprocessor& g);
ImageTensor inverse_preprocess(const ImageTensor& x, const Preprocessor& g);

struct SaliencyMeta {
    std::string method;
    std::string config_digest;
    long target_class = -1;
};

/// Per-pixel importance field. Raw values are unbounded but always finite.
class SaliencyMap {
public:
    SaliencyMap() = default;
    SaliencyMap(std::size_t height, std::size_t width, double fill = 0.0);
    SaliencyMap(std::size_t height, std::size_t width, std::vector<double> values, SaliencyMeta meta = {});

    std::size_t height() const { return shape_.height; }
    std::size_t width() const { return shape_.width; }
    const ImageShape& shape() const { return shape_; }
    std::size_t size() const { return values_.size(); }

    double& at(std::size_t row, std::size_t col) { return values_[row * shape_.width + col]; }
    double at(std::size_t row, std::size_t col) const { return values_[row * shape_.width + col]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    SaliencyMeta& meta() { return meta_; }
    const SaliencyMeta& meta() const { return meta_; }

    /// Throws DataError if any value is NaN or infinite.
    void check_finite() const;

private:
    ImageShape shape_;
    std::vector<double> values_;
    SaliencyMeta meta_;
};

/// Euclidean distance between raw saliency values.
double saliency_l2_distance(const SaliencyMap& a, const SaliencyMap& b);

/// Affine rescale to [0, 1]. Constant maps become all 0.5.
SaliencyMap normalize_saliency(const SaliencyMap& s);

using ClassId = std::size_t;

struct ProbabilityVector {
    std::vector<double> probs;

    std::size_t num_classes() const { return probs.size(); }
    double operator[](std::size_t c) const { return probs[c]; }
};

/// Smallest class index attaining the maximum probability.
ClassId argmax(const ProbabilityVector& p);

}  // namespace perturbeval
