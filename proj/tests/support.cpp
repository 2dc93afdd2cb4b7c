#include "support.hpp"

#include <cstdlib>
#include <stdexcept>
#include <sys/wait.h>

namespace testing {

TempDir::TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "perturbeval-test-XXXXXX").string();
    if (mkdtemp(pattern.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::filesystem::path data_dir() { return PERTURBEVAL_TEST_DATA; }
std::filesystem::path cli_path() { return PERTURBEVAL_CLI; }
std::filesystem::path server_path() { return PERTURBEVAL_SERVER; }

int run_shell(const std::string& command) {
    const int status = std::system(command.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
}

std::string quote(const std::filesystem::path& p) {
    std::string out = "'";
    for (char ch : p.string()) {
        if (ch == '\'') {
            out += "'\\''";
        } else {
            out += ch;
        }
    }
    return out + "'";
}

perturbeval::ImageTensor random_image(std::size_t h, std::size_t w, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    perturbeval::ImageTensor x(h, w);
    for (auto& v : x.data()) v = u(rng);
    return x;
}

perturbeval::ImageTensor random_pixels(std::size_t h, std::size_t w, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> u(0, 255);
    perturbeval::ImageTensor x(h, w);
    for (auto& v : x.data()) v = u(rng);
    return x;
}

perturbeval::SaliencyMap random_saliency(std::size_t h, std::size_t w, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    perturbeval::SaliencyMap s(h, w);
    for (auto& v : s.values()) v = u(rng);
    return s;
}

perturbeval::ToyWeights random_toy(std::size_t classes, perturbeval::ImageShape shape, std::mt19937_64& rng,
                                   double amplitude, perturbeval::Preprocessor g) {
    std::uniform_real_distribution<double> u(-amplitude, amplitude);
    perturbeval::ToyWeights w;
    w.num_classes = classes;
    w.shape = shape;
    w.preprocessor = g;
    w.weights.resize(classes * w.features());
    for (auto& v : w.weights) v = u(rng);
    w.bias.resize(classes);
    for (auto& v : w.bias) v = u(rng);
    return w;
}

}  // namespace testing
