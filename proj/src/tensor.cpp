#include "perturbeval/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "perturbeval/error.hpp"

namespace perturbeval {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Parameter: return "parameter";
        case ErrorKind::Dimension: return "dimension";
        case ErrorKind::Size: return "size";
        case ErrorKind::Backend: return "backend";
        case ErrorKind::Data: return "data";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

std::string to_string(const ImageShape& shape) {
    return std::to_string(shape.height) + "x" + std::to_string(shape.width);
}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, double fill)
    : ImageTensor(height, width, std::vector<double>(height * width * kChannels, fill)) {}

ImageTensor::ImageTensor(std::size_t height, std::size_t width, std::vector<double> data)
    : shape_{height, width}, data_(std::move(data)) {
    if (height == 0 || width == 0) {
        throw DimensionError("image must have at least one row and one column");
    }
    if (data_.size() != height * width * kChannels) {
        throw DimensionError("image data length " + std::to_string(data_.size()) +
                             " does not match " + to_string(shape_) + "x3");
    }
}

Preprocessor::Preprocessor(std::array<double, 3> mean, std::array<double, 3> scale)
    : mean_(mean), scale_(scale) {
    for (double s : scale_) {
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw ParameterError("preprocessor scale components must be positive and finite");
        }
    }
}

ImageTensor preprocess(const ImageTensor& x, const Preprocessor& g) {
    ImageTensor out = x;
    auto data = out.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t c = i % ImageTensor::kChannels;
        data[i] = (data[i] - g.mean()[c]) * g.scale()[c];
    }
    return out;
}

ImageTensor inverse_preprocess(const ImageTensor& x, const Preprocessor& g) {
    ImageTensor out = x;
    auto data = out.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t c = i % ImageTensor::kChannels;
        data[i] = data[i] / g.scale()[c] + g.mean()[c];
    }
    return out;
}

SaliencyMap::SaliencyMap(std::size_t height, std::size_t width, double fill)
    : SaliencyMap(height, width, std::vector<double>(height * width, fill)) {}

SaliencyMap::SaliencyMap(std::size_t height, std::size_t width, std::vector<double> values,
                         SaliencyMeta meta)
    : shape_{height, width}, values_(std::move(values)), meta_(std::move(meta)) {
    if (height == 0 || width == 0) {
        throw DimensionError("saliency map must have at least one row and one column");
    }
    if (values_.size() != height * width) {
        throw DimensionError("saliency value count " + std::to_string(values_.size()) +
                             " does not match " + to_string(shape_));
    }
}

void SaliencyMap::check_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) throw DataError("saliency map contains a non-finite value");
    }
}

double saliency_l2_distance(const SaliencyMap& a, const SaliencyMap& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("cannot compare saliency maps of shape " + to_string(a.shape()) +
                             " and " + to_string(b.shape()));
    }
    double sum = 0.0;
    const auto va = a.values();
    const auto vb = b.values();
    for (std::size_t i = 0; i < va.size(); ++i) {
        const double d = va[i] - vb[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

SaliencyMap normalize_saliency(const SaliencyMap& s) {
    SaliencyMap out = s;
    auto v = out.values();
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) {
        std::fill(v.begin(), v.end(), 0.5);
        return out;
    }
    const double range = hi - lo;
    for (double& x : v) x = std::clamp((x - lo) / range, 0.0, 1.0);
    return out;
}

ClassId argmax(const ProbabilityVector& p) {
    if (p.probs.empty()) throw ParameterError("argmax of an empty probability vector");
    // max_element returns the first maximum, which is the documented tie-break
    return static_cast<ClassId>(std::distance(
        p.probs.begin(), std::max_element(p.probs.begin(), p.probs.end())));
}

}  // namespace perturbeval
