#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "perturbeval/tensor.hpp"

/// Line-delimited JSON protocol spoken with subprocess classifiers.
///
///   server -> client, once:  {"K": <int>, "m": <int>, "n": <int>}
///   client -> server:        {"id": <int>, "images": ["<base64>", ...]}
///   server -> client:        {"id": <int>, "probs": [[<K floats>], ...]}
///                        or  {"id": <int>, "error": "<message>"}
///
/// Each image is base64 of m*n*3 little-endian float32 values, row-major
/// (row, column, channel), holding the *preprocessed* image g(x). The server
/// therefore implements the network body only.
namespace perturbeval::protocol {

struct Handshake {
    std::size_t num_classes = 0;
    ImageShape shape;
};

struct Request {
    std::int64_t id = 0;
    std::vector<ImageTensor> images;
};

struct Response {
    std::int64_t id = 0;
    std::vector<ProbabilityVector> probs;
    std::string error;  ///< non-empty when the server reported a failure
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

std::string encode_handshake(const Handshake& h);
Handshake decode_handshake(const std::string& line);

std::string encode_request(const Request& r);
/// `shape` comes from the handshake; images of any other size are rejected.
Request decode_request(const std::string& line, ImageShape shape);

std::string encode_response(const Response& r);
Response decode_response(const std::string& line);

}  // namespace perturbeval::protocol
