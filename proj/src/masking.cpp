#include "perturbeval/masking.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "perturbeval/error.hpp"
#include "perturbeval/rng.hpp"

namespace perturbeval {

LowResMask::LowResMask(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> cells)
    : rows_(rows), cols_(cols), cells_(std::move(cells)) {
    if (rows == 0 || cols == 0) throw ParameterError("mask needs at least one cell per axis");
    if (cells_.size() != rows * cols) throw DimensionError("mask cell count does not match its shape");
    for (auto c : cells_) {
        if (c > 1) throw ParameterError("mask cells must be 0 or 1");
    }
}

std::size_t LowResMask::count_on() const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

CellSize cell_size(ImageShape image, std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) throw ParameterError("cell counts must be positive");
    return {(image.height + rows - 1) / rows, (image.width + cols - 1) / cols};
}

UpsampledMask::UpsampledMask(ImageShape shape, std::vector<double> values, CropOffset offset)
    : shape_(shape), values_(std::move(values)), offset_(offset) {
    if (values_.size() != shape_.pixels()) throw DimensionError("mask values do not match " + to_string(shape_));
    for (double v : values_) {
        if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("mask values must lie in [0, 1]");
    }
}

void validate(const MaskParams& params) {
    if (!(params.p >= 0.0 && params.p <= 1.0)) {
        throw ParameterError("mask probability p must lie in [0, 1], got " + std::to_string(params.p));
    }
    if (params.cells_w == 0 || params.cells_h == 0) throw ParameterError("mask cell counts must be positive");
    if (params.image.height == 0 || params.image.width == 0) throw ParameterError("image shape must be non-empty");
}

SampledMask sample_mask(const MaskParams& params, std::size_t index) {
    PhiloxStream rng(params.seed, index);
    std::vector<std::uint8_t> cells(params.cells_h * params.cells_w);
    for (auto& c : cells) c = rng.next_double() < params.p ? 1 : 0;
    CropOffset offset;
    if (params.random_crop) {
        const auto cs = cell_size(params.image, params.cells_h, params.cells_w);
        offset.dy = rng.next_below(cs.sy);
        offset.dx = rng.next_below(cs.sx);
    }
    return {LowResMask(params.cells_h, params.cells_w, std::move(cells)), offset};
}

MaskBatch sample_low_res_masks(const MaskParams& params) {
    validate(params);
    MaskBatch batch{params, {}};
    batch.masks.reserve(params.count);
    for (std::size_t i = 0; i < params.count; ++i) batch.masks.push_back(sample_mask(params, i));
    return batch;
}

namespace {

struct AxisWeight {
    std::size_t lo;
    std::size_t hi;
    double frac;
};

// Interpolation weights along one axis for output pixels [0, extent).
std::vector<AxisWeight> axis_weights(std::size_t extent, std::size_t cells, std::size_t cell, std::size_t offset) {
    std::vector<AxisWeight> out(extent);
    const std::size_t first = cell / 2;
    const std::size_t last = first + (cells - 1) * cell;
    for (std::size_t i = 0; i < extent; ++i) {
        const std::size_t pos = i + offset;
        if (pos <= first) {
            out[i] = {0, 0, 0.0};
        } else if (pos >= last) {
            out[i] = {cells - 1, cells - 1, 0.0};
        } else {
            const std::size_t rel = pos - first;
            const std::size_t lo = rel / cell;
            out[i] = {lo, lo + 1, static_cast<double>(rel % cell) / static_cast<double>(cell)};
        }
    }
    return out;
}

}  // namespace

UpsampledMask upsample_and_crop(const LowResMask& mask, ImageShape image, CropOffset offset) {
    if (image.height == 0 || image.width == 0) throw ParameterError("image shape must be non-empty");
    const auto cs = cell_size(image, mask.rows(), mask.cols());
    if (offset.dy >= cs.sy || offset.dx >= cs.sx) {
        throw ParameterError("crop offset (" + std::to_string(offset.dy) + ", " + std::to_string(offset.dx) +
                             ") outside [0, " + std::to_string(cs.sy) + ") x [0, " + std::to_string(cs.sx) + ")");
    }
    const auto wy = axis_weights(image.height, mask.rows(), cs.sy, offset.dy);
    const auto wx = axis_weights(image.width, mask.cols(), cs.sx, offset.dx);

    std::vector<double> values(image.pixels());
    for (std::size_t r = 0; r < image.height; ++r) {
        const auto& y = wy[r];
        for (std::size_t c = 0; c < image.width; ++c) {
            const auto& x = wx[c];
            // std::lerp is exact at t = 0, t = 1 and for equal endpoints, which
            // keeps constant fields and cell centres exact.
            const double top = std::lerp(double(mask.at(y.lo, x.lo)), double(mask.at(y.lo, x.hi)), x.frac);
            const double bottom = std::lerp(double(mask.at(y.hi, x.lo)), double(mask.at(y.hi, x.hi)), x.frac);
            values[r * image.width + c] = std::clamp(std::lerp(top, bottom, y.frac), 0.0, 1.0);
        }
    }
    return UpsampledMask(image, std::move(values), offset);
}

ImageTensor apply_baseline(const ImageTensor& x, const ImageTensor& a, const UpsampledMask& mask) {
    if (x.shape() != a.shape() || x.shape() != mask.shape()) {
        throw DimensionError("apply_baseline shape mismatch: input " + to_string(x.shape()) + ", baseline " +
                             to_string(a.shape()) + ", mask " + to_string(mask.shape()));
    }
    ImageTensor out(x.height(), x.width());
    auto dst = out.data();
    const auto xs = x.data();
    const auto as = a.data();
    const auto ms = mask.values();
    for (std::size_t px = 0; px < ms.size(); ++px) {
        const double m = ms[px];
        for (std::size_t ch = 0; ch < ImageTensor::kChannels; ++ch) {
            const std::size_t i = px * ImageTensor::kChannels + ch;
            dst[i] = std::lerp(as[i], xs[i], m);
        }
    }
    return out;
}

std::vector<LowResMask> enumerate_all_masks(std::size_t cells_w, std::size_t cells_h) {
    if (cells_w == 0 || cells_h == 0) throw ParameterError("mask cell counts must be positive");
    const std::size_t cells = cells_w * cells_h;
    if (cells > kMaxEnumerationCells) {
        throw SizeError("refusing to enumerate 2^" + std::to_string(cells) + " masks (limit 2^" +
                        std::to_string(kMaxEnumerationCells) + ")");
    }
    const std::size_t total = std::size_t{1} << cells;
    std::vector<LowResMask> out;
    out.reserve(total);
    for (std::size_t index = 0; index < total; ++index) {
        std::vector<std::uint8_t> bits(cells);
        for (std::size_t k = 0; k < cells; ++k) bits[k] = (index >> (cells - 1 - k)) & 1U;
        out.emplace_back(cells_h, cells_w, std::move(bits));
    }
    return out;
}

namespace {

constexpr char kBatchMagic[8] = {'P', 'E', 'M', 'A', 'S', 'K', '0', '1'};

template <typename T>
void put(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw IoError("truncated mask batch sidecar");
    T value;
    std::memcpy(&value, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return value;
}

}  // namespace

// Layout (little-endian): magic[8], count u64, cells_w u64, cells_h u64,
// p f64, seed u64, height u64, width u64, random_crop u8.
std::string encode_mask_batch(const MaskBatch& batch) {
    const auto& p = batch.params;
    std::string out(kBatchMagic, sizeof kBatchMagic);
    put<std::uint64_t>(out, p.count);
    put<std::uint64_t>(out, p.cells_w);
    put<std::uint64_t>(out, p.cells_h);
    put<double>(out, p.p);
    put<std::uint64_t>(out, p.seed);
    put<std::uint64_t>(out, p.image.height);
    put<std::uint64_t>(out, p.image.width);
    put<std::uint8_t>(out, p.random_crop ? 1 : 0);
    return out;
}

MaskBatch decode_mask_batch(const std::string& bytes) {
    if (bytes.size() < sizeof kBatchMagic || std::memcmp(bytes.data(), kBatchMagic, sizeof kBatchMagic) != 0) {
        throw IoError("not a mask batch sidecar");
    }
    std::size_t pos = sizeof kBatchMagic;
    MaskParams p;
    p.count = take<std::uint64_t>(bytes, pos);
    p.cells_w = take<std::uint64_t>(bytes, pos);
    p.cells_h = take<std::uint64_t>(bytes, pos);
    p.p = take<double>(bytes, pos);
    p.seed = take<std::uint64_t>(bytes, pos);
    p.image.height = take<std::uint64_t>(bytes, pos);
    p.image.width = take<std::uint64_t>(bytes, pos);
    p.random_crop = take<std::uint8_t>(bytes, pos) != 0;
    if (pos != bytes.size()) throw IoError("trailing bytes in mask batch sidecar");
    return sample_low_res_masks(p);
}

}  // namespace perturbeval
