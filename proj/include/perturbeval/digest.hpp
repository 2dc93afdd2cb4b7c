#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace perturbeval {

std::string sha256_hex(const std::string& bytes);

/// SHA-256 of the compact JSON dump (object keys are sorted by nlohmann::json),
/// truncated to 16 hex digits.
std::string config_digest(const nlohmann::json& canonical);

}  // namespace perturbeval
