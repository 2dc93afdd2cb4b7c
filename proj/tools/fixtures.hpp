#pragma once

#include <cstdint>

#include "perturbeval/classifier.hpp"
#include "perturbeval/tensor.hpp"

/// Toy classifiers and constructed inputs used by `toy-gen` and the tests.
namespace perturbeval::fixtures {

/// W = 0, b = 0: every input maps to the uniform distribution 1/K.
ToyWeights uniform_weights(std::size_t num_classes, ImageShape shape);

/// Weights and biases uniform in [-amplitude, amplitude], drawn from a Philox
/// stream keyed by `seed`.
ToyWeights random_weights(std::size_t num_classes, ImageShape shape, std::uint64_t seed, double amplitude);

/// logit_k = gain * (k - (K - 1) / 2) * mean(g(x)) / 255. With zero mean
/// preprocessing the last class's probability rises monotonically with the
/// gray level of a constant image.
ToyWeights brightness_weights(std::size_t num_classes, ImageShape shape, double gain);

/// Two-class model on an 8x8 image whose left half is bright (200) and right
/// half dark (50). Class 0 has positive weights on the left half and negative
/// weights on the right half. `first` ranks the bright half first, `second`
/// the dark half. Under MoRF with a black baseline `first` wins; with a white
/// baseline the ranking flips and `second` wins.
struct InversionFixture {
    ToyWeights weights;
    ImageTensor image;
    SaliencyMap first;
    SaliencyMap second;
    ClassId target = 0;
};

InversionFixture inversion_fixture();

}  // namespace perturbeval::fixtures
