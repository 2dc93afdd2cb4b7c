#pragma once

#include <filesystem>
#include <string>

#include "perturbeval/classifier.hpp"

namespace perturbeval {

/// Spawns `command` through /bin/sh and talks to it with the line-delimited
/// JSON protocol in protocol.hpp. The handshake supplies K and the input
/// shape. Requests are serialized; the handle reports concurrent_safe() ==
/// false. Any I/O or protocol failure raises BackendError.
ClassifierHandle make_subprocess_classifier(const std::string& command, const Preprocessor& g);

enum class OnnxLayout { Auto, Nchw, Nhwc };

/// Loads an ONNX model with OpenCV's dnn module. The model consumes one
/// preprocessed float32 image tensor (1x3xmxn or 1xmxnx3) and produces K
/// scores. Auto layout probes NCHW first and falls back to NHWC. Outputs that
/// are not already a probability vector go through a softmax.
ClassifierHandle make_onnx_classifier(const std::filesystem::path& model, ImageShape shape, const Preprocessor& g,
                                      OnnxLayout layout = OnnxLayout::Auto);

}  // namespace perturbeval
