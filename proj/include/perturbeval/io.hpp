#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "perturbeval/tensor.hpp"

namespace perturbeval::io {

/// Key/value pairs stored as PNG tEXt chunks.
using PngText = std::map<std::string, std::string>;

/// Reads an 8-bit PNG as RGB. Gray and palette images are expanded, alpha is
/// dropped, 16-bit samples are reduced to 8 bits.
ImageTensor read_png(const std::filesystem::path& path);

/// Writes the image as 8-bit RGB, rounding and clamping each value to [0, 255].
void write_png(const std::filesystem::path& path, const ImageTensor& image, const PngText& text = {});

/// Writes raw 8-bit RGB triplets (height * width * 3 bytes).
void write_png_rgb8(const std::filesystem::path& path, std::size_t height, std::size_t width,
                    const std::vector<std::uint8_t>& rgb, const PngText& text = {});

/// Reads a PNG as a single-channel map with values in [0, 255]. Color images
/// are converted with the Rec. 601 luma weights.
SaliencyMap read_png_gray(const std::filesystem::path& path);

PngText read_png_text(const std::filesystem::path& path);

/// NPY v1.0, little-endian float64, C order, shape (height, width).
std::string encode_npy(const SaliencyMap& map);
SaliencyMap decode_npy(const std::string& bytes);

void write_npy(const std::filesystem::path& path, const SaliencyMap& map);

/// Accepts '<f8' and '<f4' 2-D arrays in C order.
SaliencyMap read_npy(const std::filesystem::path& path);

/// Loads a saliency map from .npy or from a grayscale .png.
SaliencyMap read_saliency(const std::filesystem::path& path);

enum class ResizeMode { Nearest, Bilinear };

ImageTensor resize(const ImageTensor& image, ImageShape target, ResizeMode mode = ResizeMode::Bilinear);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace perturbeval::io
