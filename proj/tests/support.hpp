#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "perturbeval/classifier.hpp"
#include "perturbeval/tensor.hpp"

namespace testing {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::filesystem::path data_dir();
std::filesystem::path cli_path();
std::filesystem::path server_path();

/// Runs a shell command and returns its exit status.
int run_shell(const std::string& command);

std::string quote(const std::filesystem::path& p);

perturbeval::ImageTensor random_image(std::size_t h, std::size_t w, std::mt19937_64& rng, double lo = 0.0,
                                      double hi = 255.0);

/// Integer-valued pixels, like a decoded PNG.
perturbeval::ImageTensor random_pixels(std::size_t h, std::size_t w, std::mt19937_64& rng);

perturbeval::SaliencyMap random_saliency(std::size_t h, std::size_t w, std::mt19937_64& rng);

perturbeval::ToyWeights random_toy(std::size_t classes, perturbeval::ImageShape shape, std::mt19937_64& rng,
                                   double amplitude, perturbeval::Preprocessor g = {});

}  // namespace testing
