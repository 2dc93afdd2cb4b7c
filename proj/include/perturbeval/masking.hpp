#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "perturbeval/tensor.hpp"

namespace perturbeval {

/// Binary low-resolution mask with `rows` x `cols` cells, row-major.
class LowResMask {
public:
    LowResMask() = default;
    LowResMask(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> cells);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::uint8_t at(std::size_t r, std::size_t c) const { return cells_[r * cols_ + c]; }
    std::span<const std::uint8_t> cells() const { return cells_; }
    std::size_t count_on() const;

    friend bool operator==(const LowResMask&, const LowResMask&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> cells_;
};

struct CropOffset {
    std::size_t dy = 0;
    std::size_t dx = 0;

    friend bool operator==(const CropOffset&, const CropOffset&) = default;
};

/// Pixel extent of one low-resolution cell: ceil(m / rows) x ceil(n / cols).
struct CellSize {
    std::size_t sy = 0;
    std::size_t sx = 0;
};

CellSize cell_size(ImageShape image, std::size_t rows, std::size_t cols);

/// Continuous mask in [0, 1] over the image grid.
class UpsampledMask {
public:
    UpsampledMask() = default;
    /// Throws ParameterError if any value lies outside [0, 1].
    UpsampledMask(ImageShape shape, std::vector<double> values, CropOffset offset = {});

    const ImageShape& shape() const { return shape_; }
    double at(std::size_t row, std::size_t col) const { return values_[row * shape_.width + col]; }
    std::span<const double> values() const { return values_; }
    const CropOffset& crop_offset() const { return offset_; }

private:
    ImageShape shape_;
    std::vector<double> values_;
    CropOffset offset_;
};

struct MaskParams {
    std::size_t count = 0;
    std::size_t cells_w = 7;  ///< cells along the image width
    std::size_t cells_h = 7;  ///< cells along the image height
    double p = 0.5;
    std::uint64_t seed = 0;
    ImageShape image;  ///< needed to bound the crop offsets
    bool random_crop = true;

    friend bool operator==(const MaskParams&, const MaskParams&) = default;
};

struct SampledMask {
    LowResMask mask;
    CropOffset offset;

    friend bool operator==(const SampledMask&, const SampledMask&) = default;
};

struct MaskBatch {
    MaskParams params;
    std::vector<SampledMask> masks;
};

/// Throws ParameterError on invalid probability, cell counts or image shape.
void validate(const MaskParams& params);

/// Draws mask `index` from its own Philox substream (stream id = index).
/// Cells are drawn row-major as `u < p` with u uniform in [0, 1), then the
/// row offset and the column offset, each uniform over [0, cell size).
SampledMask sample_mask(const MaskParams& params, std::size_t index);

MaskBatch sample_low_res_masks(const MaskParams& params);

/// Bilinear upsampling of the cell grid followed by an m x n crop.
///
/// The upsampled canvas is (rows+1)*sy by (cols+1)*sx pixels. Cell (i, j)
/// sits on the lattice point (i*sy + sy/2, j*sx + sx/2) (integer division),
/// pixels between lattice points are interpolated and pixels outside the
/// lattice take the value of the nearest edge cell. The output window starts
/// at canvas pixel (dy, dx).
UpsampledMask upsample_and_crop(const LowResMask& mask, ImageShape image, CropOffset offset);

/// Phi(x, a, M) = M (.) x + (1 - M) (.) a, with M broadcast over channels.
ImageTensor apply_baseline(const ImageTensor& x, const ImageTensor& a, const UpsampledMask& mask);

/// All 2^(rows*cols) binary masks in lexicographic order: cell k (row-major)
/// of mask i is bit (rows*cols - 1 - k) of i. Throws SizeError above 20 cells.
std::vector<LowResMask> enumerate_all_masks(std::size_t cells_w, std::size_t cells_h);

inline constexpr std::size_t kMaxEnumerationCells = 20;

/// Binary sidecar for a MaskBatch: only the parameters and seed are stored;
/// the masks are regenerated on load.
std::string encode_mask_batch(const MaskBatch& batch);
MaskBatch decode_mask_batch(const std::string& bytes);

}  // namespace perturbeval
