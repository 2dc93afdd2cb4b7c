#include <doctest.h>

#include <opencv2/imgproc.hpp>

#include <sstream>

#include "perturbeval/io.hpp"
#include "perturbeval/report.hpp"
#include "support.hpp"

using namespace perturbeval;

TEST_CASE("inferno table endpoints") {
    const auto& t = inferno_table();
    CHECK(t[0] == Rgb8{0, 0, 4});
    CHECK(t[128] == Rgb8{188, 55, 84});
    CHECK(t[255] == Rgb8{252, 255, 164});
}

TEST_CASE("inferno table agrees with OpenCV's colormap") {
    cv::Mat ramp(1, 256, CV_8UC1);
    for (int i = 0; i < 256; ++i) ramp.at<std::uint8_t>(0, i) = static_cast<std::uint8_t>(i);
    cv::Mat bgr;
    cv::applyColorMap(ramp, bgr, cv::COLORMAP_INFERNO);
    const auto& t = inferno_table();
    for (int i = 0; i < 256; ++i) {
        const auto px = bgr.at<cv::Vec3b>(0, i);
        CHECK(t[i] == Rgb8{px[2], px[1], px[0]});
    }
}

TEST_CASE("quantization rounds half up and clamps") {
    CHECK(quantize_unit(0.0) == 0);
    CHECK(quantize_unit(1.0) == 255);
    CHECK(quantize_unit(0.5) == 128);
    CHECK(quantize_unit(1.0 / 255.0 * 0.49) == 0);
    CHECK(quantize_unit(-3.0) == 0);
    CHECK(quantize_unit(7.0) == 255);
}

TEST_CASE("heatmap rendering") {
    const auto flat = render_heatmap(SaliencyMap(3, 2, 9.0));
    CHECK(flat.width == 2);
    CHECK(flat.height == 3);
    for (auto idx : flat.indices) CHECK(idx == 128);

    std::mt19937_64 rng(61);
    const auto s = testing::random_saliency(10, 10, rng);
    const auto r = render_heatmap(s);
    const auto n = normalize_saliency(s);
    const auto& t = inferno_table();
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(r.indices[i] == quantize_unit(n.values()[i]));
        const Rgb8 px{r.rgb[3 * i], r.rgb[3 * i + 1], r.rgb[3 * i + 2]};
        CHECK(px == t[r.indices[i]]);
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (s.values()[i] < s.values()[j]) CHECK(r.indices[i] <= r.indices[j]);
        }
    }

    const auto ramp = render_heatmap(SaliencyMap(1, 2, {0.0, 1.0}));
    CHECK(ramp.indices == std::vector<std::uint8_t>{0, 255});
}

TEST_CASE("heatmap PNG carries the digest") {
    testing::TempDir dir;
    const auto r = render_heatmap(SaliencyMap(2, 2, {0.0, 0.25, 0.5, 1.0}));
    write_heatmap_png(dir / "h.png", r, "0123456789abcdef");
    CHECK(io::read_png_text(dir / "h.png").at("perturbeval:config-digest") == "0123456789abcdef");
    const auto img = io::read_png(dir / "h.png");
    const auto& t = inferno_table();
    CHECK(img.at(1, 1, 0) == t[255][0]);
    CHECK(img.at(0, 0, 2) == t[0][2]);
}

TEST_CASE("curve export") {
    PerturbationCurve c;
    c.alphas = {0.0, 1.0};
    c.scores = {0.1, 1.0 / 3.0};
    c.metric = PerturbationMetric::LeRF;
    c.baseline = BlurBaseline{10};
    c.target = 4;
    c.pixels_per_step = 3;
    const auto csv = export_curve(c, CurveFormat::Csv);
    CHECK(csv == "alpha,score\n0,0.10000000000000001\n1,0.33333333333333331\n");

    const auto back = curve_from_json(nlohmann::json::parse(export_curve(c, CurveFormat::Json)));
    CHECK(back.alphas == c.alphas);
    CHECK(back.scores == c.scores);
    CHECK(back.metric == c.metric);
    CHECK(back.baseline == c.baseline);
    CHECK(back.target == 4);
    CHECK(back.pixels_per_step == 3);
}

TEST_CASE("corpus summaries") {
    std::vector<std::pair<bool, double>> outcomes;
    for (int i = 0; i < 1000; ++i) outcomes.emplace_back(i < 389, 1000.0 + i);
    const auto s = corpus_convergence_summary(outcomes);
    CHECK(s.total == 1000);
    CHECK(s.converged == 389);
    CHECK(s.fraction == 0.389);
    CHECK(s.d_bars.size() == 1000);

    using Outcomes = std::vector<std::pair<bool, double>>;
    CHECK(corpus_convergence_summary(Outcomes{{true, 1.0}, {true, 2.0}}).fraction == 1.0);
    CHECK(corpus_convergence_summary(Outcomes{{false, 1.0}}).fraction == 0.0);
    CHECK_THROWS(corpus_convergence_summary(std::vector<std::pair<bool, double>>{}));

    const auto j = to_json(s);
    CHECK(j["converged"] == 389);
    CHECK(j["total"] == 1000);
}

TEST_CASE("convergence report JSON") {
    ConvergenceReport r;
    r.seeds = {1, 2, 3};
    r.traces = {{0, 1, {{64, 2.0}, {128, 1.0}}}, {0, 2, {}}, {1, 2, {}}};
    r.final_distances = {1.0, 2.0, 3.0};
    r.d_bar = 2.0;
    r.d_max = 2.5;
    r.converged = false;
    const auto j = to_json(r);
    CHECK(j["traces"][0]["masks"] == nlohmann::json{64, 128});
    CHECK(j["traces"][0]["distance"] == nlohmann::json{2.0, 1.0});
    CHECK(j["runs"][2]["seed"] == 3);
    CHECK(j["converged"] == false);
    CHECK(j["d_bar"] == 2.0);
}

TEST_CASE("artifact names") {
    CHECK(artifact_name("cat", "rise", "inv", "saliency", "npy") == "cat.rise.inv.saliency.npy");
}
