// Serves a toy linear classifier over the subprocess protocol on stdin/stdout.
//
//   toy-classifier-server <weights.json> [--fail-after N] [--exit-after N]
//
// --fail-after answers every request after the first N with an error reply;
// --exit-after terminates without replying once N requests have been served.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "perturbeval/classifier.hpp"
#include "perturbeval/protocol.hpp"

namespace pe = perturbeval;

int main(int argc, char** argv) {
    std::optional<std::string> weights_path;
    long fail_after = -1;
    long exit_after = -1;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if ((arg == "--fail-after" || arg == "--exit-after") && i + 1 < argc) {
            (arg == "--fail-after" ? fail_after : exit_after) = std::atol(argv[++i]);
        } else if (!weights_path) {
            weights_path = arg;
        } else {
            std::cerr << "unexpected argument " << arg << '\n';
            return 2;
        }
    }
    if (!weights_path) {
        std::cerr << "usage: toy-classifier-server <weights.json> [--fail-after N] [--exit-after N]\n";
        return 2;
    }

    try {
        const auto h = pe::make_toy_linear_classifier(pe::load_toy_weights(*weights_path));
        std::cout << pe::protocol::encode_handshake({h->num_classes(), h->input_shape()}) << '\n' << std::flush;

        long served = 0;
        std::string line;
        while (std::getline(std::cin, line)) {
            if (exit_after >= 0 && served >= exit_after) return 1;
            const auto request = pe::protocol::decode_request(line, h->input_shape());
            pe::protocol::Response response{request.id, {}, {}};
            if (fail_after >= 0 && served >= fail_after) {
                response.error = "injected failure";
            } else {
                response.probs = h->predict_preprocessed(request.images);
            }
            ++served;
            std::cout << pe::protocol::encode_response(response) << '\n' << std::flush;
        }
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
    return 0;
}
