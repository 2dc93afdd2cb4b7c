#include "perturbeval/baselines.hpp"

#include <charconv>
#include <cmath>

#include "perturbeval/error.hpp"

namespace perturbeval {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};

std::string format_shortest(double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

}  // namespace

std::string to_tag(const BaselineSpec& spec) {
    return std::visit(Overloaded{
                          [](const ConstantBaseline& c) { return "constant:" + std::to_string(c.level); },
                          [](const InvPreprocZeroBaseline&) { return std::string("inv"); },
                          [](const BlurBaseline& b) { return "blur:" + format_shortest(b.sigma); },
                      },
                      spec);
}

std::string file_tag(const BaselineSpec& spec) {
    std::string tag = to_tag(spec);
    for (auto& ch : tag) {
        if (ch == ':') ch = '-';
    }
    return tag;
}

void validate(const BaselineSpec& spec) {
    if (const auto* c = std::get_if<ConstantBaseline>(&spec)) {
        if (c->level < 0 || c->level > 255) {
            throw ParameterError("constant baseline level must lie in [0, 255], got " + std::to_string(c->level));
        }
    } else if (const auto* b = std::get_if<BlurBaseline>(&spec)) {
        if (!(b->sigma > 0.0) || !std::isfinite(b->sigma)) throw ParameterError("blur sigma must be positive");
    }
}

BaselineSpec parse_baseline_spec(std::string_view tag) {
    const auto colon = tag.find(':');
    const auto kind = tag.substr(0, colon);
    const auto arg = colon == std::string_view::npos ? std::string_view{} : tag.substr(colon + 1);
    BaselineSpec spec;
    if (kind == "inv" && colon == std::string_view::npos) {
        spec = InvPreprocZeroBaseline{};
    } else if (tag == "black" || tag == "gray" || tag == "white") {
        spec = ConstantBaseline{tag == "black" ? 0 : tag == "gray" ? 127 : 255};
    } else if (kind == "constant") {
        int level = 0;
        const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), level);
        if (ec != std::errc{} || ptr != arg.data() + arg.size() || arg.empty()) {
            throw ParameterError("bad constant baseline level in '" + std::string(tag) + "'");
        }
        spec = ConstantBaseline{level};
    } else if (kind == "blur") {
        double sigma = 0.0;
        const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), sigma);
        if (ec != std::errc{} || ptr != arg.data() + arg.size() || arg.empty()) {
            throw ParameterError("bad blur sigma in '" + std::string(tag) + "'");
        }
        spec = BlurBaseline{sigma};
    } else {
        throw ParameterError("unknown baseline '" + std::string(tag) + "' (expected constant:<0-255>, black, gray, white, inv, blur:<sigma>)");
    }
    validate(spec);
    return spec;
}

BaselineImage constant_baseline(int level, ImageShape shape) {
    const BaselineSpec spec = ConstantBaseline{level};
    validate(spec);
    return {ImageTensor(shape.height, shape.width, static_cast<double>(level)), spec, false};
}

BaselineImage inv_preproc_baseline(const Preprocessor& g, ImageShape shape) {
    return {inverse_preprocess(ImageTensor(shape.height, shape.width, 0.0), g), InvPreprocZeroBaseline{}, false};
}

std::vector<double> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) throw ParameterError("blur sigma must be positive");
    const auto radius = static_cast<long long>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (long long i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

std::size_t reflect_index(long long i, std::size_t extent) {
    const auto n = static_cast<long long>(extent);
    const long long period = 2 * n;
    long long r = i % period;
    if (r < 0) r += period;
    return static_cast<std::size_t>(r < n ? r : period - 1 - r);
}

BaselineImage blur_baseline(const ImageTensor& x, double sigma) {
    const auto kernel = gaussian_kernel(sigma);
    const auto radius = static_cast<long long>(kernel.size() / 2);
    const std::size_t rows = x.height();
    const std::size_t cols = x.width();
    constexpr std::size_t ch = ImageTensor::kChannels;

    ImageTensor horizontal(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            double acc[ch] = {0.0, 0.0, 0.0};
            for (long long k = -radius; k <= radius; ++k) {
                const std::size_t src = reflect_index(static_cast<long long>(c) + k, cols);
                const double w = kernel[static_cast<std::size_t>(k + radius)];
                for (std::size_t i = 0; i < ch; ++i) acc[i] += w * x.at(r, src, i);
            }
            for (std::size_t i = 0; i < ch; ++i) horizontal.at(r, c, i) = acc[i];
        }
    }
    ImageTensor out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            double acc[ch] = {0.0, 0.0, 0.0};
            for (long long k = -radius; k <= radius; ++k) {
                const std::size_t src = reflect_index(static_cast<long long>(r) + k, rows);
                const double w = kernel[static_cast<std::size_t>(k + radius)];
                for (std::size_t i = 0; i < ch; ++i) acc[i] += w * horizontal.at(src, c, i);
            }
            for (std::size_t i = 0; i < ch; ++i) out.at(r, c, i) = acc[i];
        }
    }
    return {std::move(out), BlurBaseline{sigma}, true};
}

BaselineImage make_baseline(const BaselineSpec& spec, const Preprocessor& g, const ImageTensor& x) {
    validate(spec);
    return std::visit(Overloaded{
                          [&](const ConstantBaseline& c) { return constant_baseline(c.level, x.shape()); },
                          [&](const InvPreprocZeroBaseline&) { return inv_preproc_baseline(g, x.shape()); },
                          [&](const BlurBaseline& b) { return blur_baseline(x, b.sigma); },
                      },
                      spec);
}

std::vector<BaselineImage> baseline_set(const std::set<int>& levels, const std::set<double>& sigmas,
                                        const Preprocessor& g, const ImageTensor& x, bool include_inv) {
    if (levels.empty() && sigmas.empty() && !include_inv) {
        throw ParameterError("baseline set is empty: give at least one level, sigma, or the inv baseline");
    }
    std::vector<BaselineImage> out;
    for (int level : levels) out.push_back(constant_baseline(level, x.shape()));
    if (include_inv) out.push_back(inv_preproc_baseline(g, x.shape()));
    for (double sigma : sigmas) out.push_back(blur_baseline(x, sigma));
    return out;
}

}  // namespace perturbeval
