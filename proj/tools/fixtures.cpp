#include "fixtures.hpp"

#include "perturbeval/error.hpp"
#include "perturbeval/rng.hpp"

namespace perturbeval::fixtures {

namespace {

ToyWeights blank(std::size_t num_classes, ImageShape shape) {
    if (num_classes == 0) throw ParameterError("a classifier needs at least one class");
    if (shape.pixels() == 0) throw ParameterError("input shape must be non-empty");
    ToyWeights w;
    w.num_classes = num_classes;
    w.shape = shape;
    w.weights.assign(num_classes * w.features(), 0.0);
    w.bias.assign(num_classes, 0.0);
    return w;
}

}  // namespace

ToyWeights uniform_weights(std::size_t num_classes, ImageShape shape) { return blank(num_classes, shape); }

ToyWeights random_weights(std::size_t num_classes, ImageShape shape, std::uint64_t seed, double amplitude) {
    ToyWeights w = blank(num_classes, shape);
    PhiloxStream rng(seed, 0);
    for (auto& v : w.weights) v = amplitude * (2.0 * rng.next_double() - 1.0);
    for (auto& v : w.bias) v = amplitude * (2.0 * rng.next_double() - 1.0);
    return w;
}

ToyWeights brightness_weights(std::size_t num_classes, ImageShape shape, double gain) {
    ToyWeights w = blank(num_classes, shape);
    const double features = static_cast<double>(w.features());
    const double centre = 0.5 * static_cast<double>(num_classes - 1);
    for (std::size_t k = 0; k < num_classes; ++k) {
        const double row = gain * (static_cast<double>(k) - centre) / (255.0 * features);
        std::fill_n(w.weights.begin() + static_cast<std::ptrdiff_t>(k * w.features()), w.features(), row);
    }
    return w;
}

InversionFixture inversion_fixture() {
    constexpr std::size_t side = 8;
    constexpr std::size_t half = side / 2;
    InversionFixture f;
    f.weights = blank(2, {side, side});
    f.image = ImageTensor(side, side);
    f.first = SaliencyMap(side, side);
    f.second = SaliencyMap(side, side);
    // 32 pixels x 3 channels per half; a 150-level contrast gives logit 2.35.
    const double unit = 4.0 / (96.0 * 255.0);
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            const bool bright = c < half;
            for (std::size_t ch = 0; ch < ImageTensor::kChannels; ++ch) {
                f.image.at(r, c, ch) = bright ? 200.0 : 50.0;
                f.weights.weights[(r * side + c) * 3 + ch] = bright ? unit : -unit;
            }
            f.first.at(r, c) = bright ? 1.0 : 0.0;
            f.second.at(r, c) = bright ? 0.0 : 1.0;
        }
    }
    f.first.meta().method = "bright-first";
    f.second.meta().method = "dark-first";
    return f;
}

}  // namespace perturbeval::fixtures
