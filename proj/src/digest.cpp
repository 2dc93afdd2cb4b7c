#include "perturbeval/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>

#include "perturbeval/error.hpp"

namespace perturbeval {

std::string sha256_hex(const std::string& bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorKind::Data, "SHA-256 computation failed");
    }
    std::string hex;
    hex.reserve(2 * len);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", md[i]);
        hex += buf;
    }
    return hex;
}

std::string config_digest(const nlohmann::json& canonical) {
    return sha256_hex(canonical.dump()).substr(0, 16);
}

}  // namespace perturbeval
