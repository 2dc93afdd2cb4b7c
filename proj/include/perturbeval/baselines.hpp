#pragma once

#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "perturbeval/tensor.hpp"

namespace perturbeval {

struct ConstantBaseline {
    int level = 0;  ///< gamma in [0, 255]
    friend auto operator<=>(const ConstantBaseline&, const ConstantBaseline&) = default;
};

/// g^{-1}(0): the image that is all zeros after preprocessing.
struct InvPreprocZeroBaseline {
    friend auto operator<=>(const InvPreprocZeroBaseline&, const InvPreprocZeroBaseline&) = default;
};

struct BlurBaseline {
    double sigma = 10.0;
    friend auto operator<=>(const BlurBaseline&, const BlurBaseline&) = default;
};

using BaselineSpec = std::variant<ConstantBaseline, InvPreprocZeroBaseline, BlurBaseline>;

/// Tagged string form: `constant:127`, `inv`, `blur:10`. The parser also
/// accepts `black`, `gray` and `white` for levels 0, 127 and 255.
std::string to_tag(const BaselineSpec& spec);
BaselineSpec parse_baseline_spec(std::string_view tag);

/// Filesystem-friendly tag: `constant-127`, `inv`, `blur-10`.
std::string file_tag(const BaselineSpec& spec);

void validate(const BaselineSpec& spec);

struct BaselineImage {
    ImageTensor image;
    BaselineSpec spec;
    bool input_dependent = false;
};

BaselineImage constant_baseline(int level, ImageShape shape);
BaselineImage inv_preproc_baseline(const Preprocessor& g, ImageShape shape);

/// Separable Gaussian blur per channel: kernel radius ceil(3 sigma), weights
/// normalized to sum 1, half-sample symmetric padding (edge pixel repeated,
/// `dcba|abcd|dcba`), applied periodically when the radius exceeds the image.
BaselineImage blur_baseline(const ImageTensor& x, double sigma);

/// The normalized 1-D kernel used by blur_baseline, length 2*ceil(3 sigma)+1.
std::vector<double> gaussian_kernel(double sigma);

/// Maps an out-of-range coordinate back into [0, extent) by half-sample
/// symmetric reflection.
std::size_t reflect_index(long long i, std::size_t extent);

/// Builds one image for `spec`, using `x` for input-dependent kinds.
BaselineImage make_baseline(const BaselineSpec& spec, const Preprocessor& g, const ImageTensor& x);

/// The baseline family for the given levels and sigmas: constants ascending,
/// then the zero-after-preprocessing image (if requested), then blurs
/// ascending. Duplicates collapse.
std::vector<BaselineImage> baseline_set(const std::set<int>& levels, const std::set<double>& sigmas,
                                        const Preprocessor& g, const ImageTensor& x, bool include_inv = true);

}  // namespace perturbeval
