#include "perturbeval/protocol.hpp"

#include <openssl/evp.h>

#include <cstring>

#include <nlohmann/json.hpp>

#include "perturbeval/error.hpp"

namespace perturbeval::protocol {

using nlohmann::json;

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) throw BackendError("base64 payload length is not a multiple of 4");
    std::vector<std::uint8_t> out(3 * (text.size() / 4));
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) throw BackendError("invalid base64 payload");
    // EVP_DecodeBlock keeps the zero bytes produced by '=' padding
    std::size_t padding = 0;
    if (!text.empty() && text.back() == '=') ++padding;
    if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
    out.resize(static_cast<std::size_t>(n) - padding);
    return out;
}

namespace {

std::string encode_image(const ImageTensor& image) {
    const auto data = image.data();
    std::vector<std::uint8_t> bytes(data.size() * sizeof(float));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto f = static_cast<float>(data[i]);
        std::memcpy(bytes.data() + i * sizeof(float), &f, sizeof(float));
    }
    return base64_encode(bytes);
}

ImageTensor decode_image(const std::string& text, ImageShape shape) {
    const auto bytes = base64_decode(text);
    const std::size_t count = shape.pixels() * ImageTensor::kChannels;
    if (bytes.size() != count * sizeof(float)) {
        throw BackendError("image payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                           std::to_string(count * sizeof(float)));
    }
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        float f;
        std::memcpy(&f, bytes.data() + i * sizeof(float), sizeof(float));
        values[i] = f;
    }
    return ImageTensor(shape.height, shape.width, std::move(values));
}

json parse(const std::string& line, const char* what) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw BackendError(std::string("malformed ") + what + ": " + e.what());
    }
}

}  // namespace

std::string encode_handshake(const Handshake& h) {
    return json{{"K", h.num_classes}, {"m", h.shape.height}, {"n", h.shape.width}}.dump();
}

Handshake decode_handshake(const std::string& line) {
    const json j = parse(line, "handshake");
    try {
        Handshake h{j.at("K").get<std::size_t>(), {j.at("m").get<std::size_t>(), j.at("n").get<std::size_t>()}};
        if (h.num_classes == 0 || h.shape.pixels() == 0) throw BackendError("handshake declares an empty model");
        return h;
    } catch (const json::exception& e) {
        throw BackendError(std::string("malformed handshake: ") + e.what());
    }
}

std::string encode_request(const Request& r) {
    json images = json::array();
    for (const auto& img : r.images) images.push_back(encode_image(img));
    return json{{"id", r.id}, {"images", std::move(images)}}.dump();
}

Request decode_request(const std::string& line, ImageShape shape) {
    const json j = parse(line, "request");
    try {
        Request r;
        r.id = j.at("id").get<std::int64_t>();
        for (const auto& img : j.at("images")) r.images.push_back(decode_image(img.get<std::string>(), shape));
        return r;
    } catch (const json::exception& e) {
        throw BackendError(std::string("malformed request: ") + e.what());
    }
}

std::string encode_response(const Response& r) {
    json j{{"id", r.id}};
    if (!r.error.empty()) {
        j["error"] = r.error;
    } else {
        json probs = json::array();
        for (const auto& p : r.probs) probs.push_back(p.probs);
        j["probs"] = std::move(probs);
    }
    return j.dump();
}

Response decode_response(const std::string& line) {
    const json j = parse(line, "response");
    try {
        Response r;
        r.id = j.at("id").get<std::int64_t>();
        if (j.contains("error")) {
            r.error = j.at("error").get<std::string>();
            if (r.error.empty()) r.error = "unspecified backend error";
            return r;
        }
        for (const auto& p : j.at("probs")) r.probs.push_back({p.get<std::vector<double>>()});
        return r;
    } catch (const json::exception& e) {
        throw BackendError(std::string("malformed response: ") + e.what());
    }
}

}  // namespace perturbeval::protocol
