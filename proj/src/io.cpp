#include "perturbeval/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <regex>
#include <sstream>

#include <opencv2/imgproc.hpp>

#include "perturbeval/error.hpp"

namespace perturbeval::io {

static_assert(std::endian::native == std::endian::little, "NPY codec assumes a little-endian host");

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError("cannot open " + path.string());
    return f;
}

std::vector<std::uint8_t> read_png_rgb8(const std::filesystem::path& path, ImageShape& shape) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw IoError("cannot read PNG " + path.string() + ": " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        std::string message = image.message;
        png_image_free(&image);
        throw IoError("cannot decode PNG " + path.string() + ": " + message);
    }
    shape = {image.height, image.width};
    return buffer;
}

// Returns an empty string on success, otherwise the libpng error. Kept free of
// objects with destructors because libpng reports errors through longjmp.
std::string write_png_raw(std::FILE* fp, std::size_t height, std::size_t width, const std::uint8_t* rgb,
                          png_text* texts, int text_count) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) return "png_create_write_struct failed";
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        return "png_create_info_struct failed";
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return "libpng write error";
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    if (text_count > 0) png_set_text(png, info, texts, text_count);
    png_write_info(png, info);
    for (std::size_t row = 0; row < height; ++row) {
        png_write_row(png, rgb + row * width * 3);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return {};
}

}  // namespace

ImageTensor read_png(const std::filesystem::path& path) {
    ImageShape shape;
    const auto rgb = read_png_rgb8(path, shape);
    std::vector<double> data(rgb.begin(), rgb.end());
    return ImageTensor(shape.height, shape.width, std::move(data));
}

void write_png_rgb8(const std::filesystem::path& path, std::size_t height, std::size_t width,
                    const std::vector<std::uint8_t>& rgb, const PngText& text) {
    if (rgb.size() != height * width * 3) throw DimensionError("RGB buffer does not match image size");
    // libpng wants mutable char pointers; keep the strings alive in these vectors
    std::vector<std::string> keys;
    std::vector<std::string> values;
    for (const auto& [k, v] : text) {
        keys.push_back(k);
        values.push_back(v);
    }
    std::vector<png_text> texts(text.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        texts[i].compression = PNG_TEXT_COMPRESSION_NONE;
        texts[i].key = keys[i].data();
        texts[i].text = values[i].data();
        texts[i].text_length = values[i].size();
    }
    auto fp = open_file(path, "wb");
    const std::string err =
        write_png_raw(fp.get(), height, width, rgb.data(), texts.data(), static_cast<int>(texts.size()));
    if (!err.empty()) throw IoError("cannot write PNG " + path.string() + ": " + err);
}

void write_png(const std::filesystem::path& path, const ImageTensor& image, const PngText& text) {
    std::vector<std::uint8_t> rgb(image.size());
    const auto data = image.data();
    for (std::size_t i = 0; i < rgb.size(); ++i) {
        rgb[i] = static_cast<std::uint8_t>(std::clamp(std::floor(data[i] + 0.5), 0.0, 255.0));
    }
    write_png_rgb8(path, image.height(), image.width(), rgb, text);
}

SaliencyMap read_png_gray(const std::filesystem::path& path) {
    ImageShape shape;
    const auto rgb = read_png_rgb8(path, shape);
    std::vector<double> values(shape.pixels());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double r = rgb[3 * i], g = rgb[3 * i + 1], b = rgb[3 * i + 2];
        values[i] = (r == g && g == b) ? r : 0.299 * r + 0.587 * g + 0.114 * b;
    }
    return SaliencyMap(shape.height, shape.width, std::move(values), {path.stem().string(), "", -1});
}

PngText read_png_text(const std::filesystem::path& path) {
    auto fp = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png == nullptr) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    png_textp texts = nullptr;
    int count = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("cannot read PNG text from " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_get_text(png, info, &texts, &count);
    PngText out;
    for (int i = 0; i < count; ++i) {
        out.emplace(texts[i].key, std::string(texts[i].text, texts[i].text_length));
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

std::string encode_npy(const SaliencyMap& map) {
    std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" +
                         std::to_string(map.height()) + ", " + std::to_string(map.width()) + "), }";
    // magic(6) + version(2) + header length(2) + header + '\n' is padded to 64 bytes
    const std::size_t unpadded = 10 + header.size() + 1;
    header.append((64 - unpadded % 64) % 64, ' ');
    header.push_back('\n');

    std::string out("\x93NUMPY\x01\x00", 8);
    const auto len = static_cast<std::uint16_t>(header.size());
    out.push_back(static_cast<char>(len & 0xff));
    out.push_back(static_cast<char>(len >> 8));
    out += header;
    const auto values = map.values();
    out.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
    return out;
}

SaliencyMap decode_npy(const std::string& bytes) {
    if (bytes.size() < 10 || bytes.compare(0, 6, "\x93NUMPY") != 0) {
        throw IoError("not an NPY file");
    }
    const auto major = static_cast<unsigned char>(bytes[6]);
    std::size_t header_len = 0;
    std::size_t offset = 0;
    if (major == 1) {
        header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
        offset = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12) throw IoError("truncated NPY header");
        for (int i = 3; i >= 0; --i) header_len = (header_len << 8) | static_cast<unsigned char>(bytes[8 + i]);
        offset = 12;
    } else {
        throw IoError("unsupported NPY version " + std::to_string(major));
    }
    if (bytes.size() < offset + header_len) throw IoError("truncated NPY header");
    const std::string header = bytes.substr(offset, header_len);
    offset += header_len;

    std::smatch match;
    if (!std::regex_search(header, match, std::regex(R"('descr'\s*:\s*'([^']+)')"))) {
        throw IoError("NPY header has no descr");
    }
    const std::string descr = match[1];
    if (descr != "<f8" && descr != "<f4") throw IoError("unsupported NPY dtype " + descr);
    if (std::regex_search(header, std::regex(R"('fortran_order'\s*:\s*True)"))) {
        throw IoError("Fortran-ordered NPY arrays are not supported");
    }
    if (!std::regex_search(header, match, std::regex(R"('shape'\s*:\s*\(\s*(\d+)\s*,\s*(\d+)\s*,?\s*\))"))) {
        throw IoError("NPY array must be two-dimensional");
    }
    const std::size_t rows = std::stoul(match[1]);
    const std::size_t cols = std::stoul(match[2]);
    const std::size_t elem = descr == "<f8" ? 8 : 4;
    if (bytes.size() - offset != rows * cols * elem) throw IoError("NPY payload size mismatch");

    std::vector<double> values(rows * cols);
    const char* payload = bytes.data() + offset;
    if (elem == 8) {
        std::memcpy(values.data(), payload, values.size() * 8);
    } else {
        for (std::size_t i = 0; i < values.size(); ++i) {
            float f;
            std::memcpy(&f, payload + 4 * i, 4);
            values[i] = f;
        }
    }
    return SaliencyMap(rows, cols, std::move(values));
}

void write_npy(const std::filesystem::path& path, const SaliencyMap& map) {
    write_file(path, encode_npy(map));
}

SaliencyMap read_npy(const std::filesystem::path& path) {
    SaliencyMap map = decode_npy(read_file(path));
    map.meta().method = path.stem().string();
    return map;
}

SaliencyMap read_saliency(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    SaliencyMap map = ext == ".png" ? read_png_gray(path) : read_npy(path);
    map.check_finite();
    return map;
}

ImageTensor resize(const ImageTensor& image, ImageShape target, ResizeMode mode) {
    if (image.shape() == target) return image;
    if (target.height == 0 || target.width == 0) throw DimensionError("resize target must be non-empty");
    const cv::Mat src(static_cast<int>(image.height()), static_cast<int>(image.width()), CV_64FC3,
                      const_cast<double*>(image.data().data()));
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(static_cast<int>(target.width), static_cast<int>(target.height)), 0, 0,
               mode == ResizeMode::Nearest ? cv::INTER_NEAREST : cv::INTER_LINEAR);
    const auto* begin = dst.ptr<double>(0);
    return ImageTensor(target.height, target.width,
                       std::vector<double>(begin, begin + target.pixels() * ImageTensor::kChannels));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

}  // namespace perturbeval::io
