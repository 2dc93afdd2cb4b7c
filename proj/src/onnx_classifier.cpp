#include <cmath>
#include <mutex>
#include <numeric>

#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>

#include "perturbeval/backends.hpp"
#include "perturbeval/error.hpp"

namespace perturbeval {

namespace {

class OnnxClassifier final : public Classifier {
public:
    OnnxClassifier(const std::filesystem::path& model, ImageShape shape, const Preprocessor& g, OnnxLayout layout)
        : shape_(shape), g_(g) {
        if (shape.pixels() == 0) throw ParameterError("ONNX classifier input shape is empty");
        try {
            net_ = cv::dnn::readNetFromONNX(model.string());
        } catch (const cv::Exception& e) {
            throw BackendError("cannot load ONNX model " + model.string() + ": " + e.what());
        }
        if (net_.empty()) throw BackendError("ONNX model " + model.string() + " is empty");
        net_.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
        net_.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);

        const ImageTensor probe(shape.height, shape.width, 0.0);
        const auto try_layout = [&](OnnxLayout l) -> bool {
            try {
                layout_ = l;
                num_classes_ = raw_forward(probe).size();
                return num_classes_ > 0;
            } catch (const cv::Exception&) {
                return false;
            }
        };
        bool ok = false;
        if (layout == OnnxLayout::Auto) {
            ok = try_layout(OnnxLayout::Nchw) || try_layout(OnnxLayout::Nhwc);
        } else {
            ok = try_layout(layout);
        }
        if (!ok) {
            throw BackendError("ONNX model " + model.string() + " does not accept a " + to_string(shape) +
                               " RGB input in NCHW or NHWC layout");
        }
    }

    std::size_t num_classes() const override { return num_classes_; }
    ImageShape input_shape() const override { return shape_; }
    const Preprocessor& preprocessor() const override { return g_; }
    Backend backend() const override { return Backend::OnnxFile; }
    bool concurrent_safe() const override { return false; }

    OnnxLayout layout() const { return layout_; }

protected:
    std::vector<ProbabilityVector> predict_body(std::span<const ImageTensor> preprocessed) const override {
        std::lock_guard lock(mutex_);
        std::vector<ProbabilityVector> out;
        out.reserve(preprocessed.size());
        for (const auto& z : preprocessed) {
            std::vector<double> scores;
            try {
                scores = raw_forward(z);
            } catch (const cv::Exception& e) {
                throw BackendError(std::string("ONNX inference failed: ") + e.what());
            }
            out.push_back({to_probabilities(std::move(scores))});
        }
        return out;
    }

private:
    // One image per forward pass so results never depend on batch composition.
    std::vector<double> raw_forward(const ImageTensor& z) const {
        const int m = static_cast<int>(shape_.height);
        const int n = static_cast<int>(shape_.width);
        cv::Mat blob;
        if (layout_ == OnnxLayout::Nhwc) {
            const int dims[4] = {1, m, n, 3};
            blob.create(4, dims, CV_32F);
            auto* dst = blob.ptr<float>();
            const auto src = z.data();
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]);
        } else {
            const int dims[4] = {1, 3, m, n};
            blob.create(4, dims, CV_32F);
            auto* dst = blob.ptr<float>();
            const std::size_t plane = shape_.pixels();
            for (std::size_t r = 0; r < shape_.height; ++r) {
                for (std::size_t c = 0; c < shape_.width; ++c) {
                    for (std::size_t ch = 0; ch < 3; ++ch) {
                        dst[ch * plane + r * shape_.width + c] = static_cast<float>(z.at(r, c, ch));
                    }
                }
            }
        }
        net_.setInput(blob);
        const cv::Mat result = net_.forward();
        const cv::Mat flat = result.reshape(1, 1);
        std::vector<double> scores(flat.total());
        for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = flat.at<float>(0, static_cast<int>(i));
        return scores;
    }

    static std::vector<double> to_probabilities(std::vector<double> scores) {
        bool in_range = true;
        for (double s : scores) {
            if (!std::isfinite(s)) return scores;  // surfaced as a data error by callers
            in_range = in_range && s >= 0.0 && s <= 1.0;
        }
        const double sum = std::accumulate(scores.begin(), scores.end(), 0.0);
        if (in_range && std::abs(sum - 1.0) <= 1e-3) return scores;
        return softmax(scores);
    }

    ImageShape shape_;
    Preprocessor g_;
    OnnxLayout layout_ = OnnxLayout::Nchw;
    std::size_t num_classes_ = 0;
    mutable cv::dnn::Net net_;
    mutable std::mutex mutex_;
};

}  // namespace

ClassifierHandle make_onnx_classifier(const std::filesystem::path& model, ImageShape shape, const Preprocessor& g,
                                      OnnxLayout layout) {
    return std::make_shared<const OnnxClassifier>(model, shape, g, layout);
}

}  // namespace perturbeval
