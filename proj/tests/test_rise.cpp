#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "perturbeval/error.hpp"
#include "perturbeval/rise.hpp"
#include "support.hpp"

using namespace perturbeval;

namespace {

RiseConfig small_config(std::size_t n, std::size_t cells, std::uint64_t seed) {
    RiseConfig cfg;
    cfg.num_masks = n;
    cfg.cells_w = cells;
    cfg.cells_h = cells;
    cfg.seed = seed;
    cfg.snapshot_interval = 64;
    return cfg;
}

class NanClassifier final : public Classifier {
public:
    std::size_t num_classes() const override { return 2; }
    ImageShape input_shape() const override { return {4, 4}; }
    const Preprocessor& preprocessor() const override { return g_; }
    Backend backend() const override { return Backend::Toy; }
    bool concurrent_safe() const override { return true; }

protected:
    std::vector<ProbabilityVector> predict_body(std::span<const ImageTensor> xs) const override {
        return std::vector<ProbabilityVector>(xs.size(), {{std::numeric_limits<double>::quiet_NaN(), 0.5}});
    }

private:
    Preprocessor g_;
};

}  // namespace

TEST_CASE("exact RISE expectation matches brute-force enumeration") {
    std::mt19937_64 rng(41);
    const Preprocessor g({100, 110, 120}, {0.02, 0.02, 0.02});
    const auto h = make_toy_linear_classifier(testing::random_toy(3, {8, 8}, rng, 0.05, g));
    const auto x = testing::random_pixels(8, 8, rng);
    for (double p : {0.5, 0.3}) {
        RiseConfig cfg = small_config(1, 2, 0);
        cfg.p = p;
        cfg.target = 1;
        const auto exact = generate_rise_exact(x, cfg, *h, 2);
        const auto a = inverse_preprocess(ImageTensor(8, 8, 0.0), g);
        const auto ref = oracle::rise_expectation(x, a, 2, 2, p, *h, 1);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            CHECK(exact.values()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("RISE output is independent of the worker count") {
    std::mt19937_64 rng(42);
    const auto h = make_toy_linear_classifier(testing::random_toy(4, {16, 16}, rng, 0.01));
    const auto x = testing::random_pixels(16, 16, rng);
    auto cfg = small_config(1000, 3, 5);
    cfg.batch_size = 7;
    const auto one = generate_rise(x, cfg, *h, {1, true});
    const auto many = generate_rise(x, cfg, *h, {6, true});
    CHECK(one.target == many.target);
    CHECK(std::vector<double>(one.saliency.values().begin(), one.saliency.values().end()) ==
          std::vector<double>(many.saliency.values().begin(), many.saliency.values().end()));
    REQUIRE(one.snapshots.size() == many.snapshots.size());
    for (std::size_t i = 0; i < one.snapshots.size(); ++i) {
        CHECK(one.snapshots[i].masks == many.snapshots[i].masks);
        CHECK(saliency_l2_distance(one.snapshots[i].map, many.snapshots[i].map) == 0.0);
    }
}

TEST_CASE("snapshots fall on interval boundaries and at N") {
    std::mt19937_64 rng(43);
    const auto h = make_toy_linear_classifier(testing::random_toy(2, {8, 8}, rng, 0.01));
    const auto x = testing::random_pixels(8, 8, rng);
    auto cfg = small_config(300, 2, 1);
    cfg.snapshot_interval = 128;
    const auto result = generate_rise(x, cfg, *h, {2, true});
    REQUIRE(result.snapshots.size() == 3);
    CHECK(result.snapshots[0].masks == 128);
    CHECK(result.snapshots[1].masks == 256);
    CHECK(result.snapshots[2].masks == 300);
    CHECK(saliency_l2_distance(result.snapshots.back().map, result.saliency) == 0.0);

    RiseEngine engine(x, cfg, *h, 1);
    CHECK(engine.advance() == 128);
    CHECK(engine.advance() == 256);
    CHECK(engine.advance() == 300);
    CHECK(engine.done());
    CHECK(saliency_l2_distance(engine.current(), result.saliency) == 0.0);

    const auto finals_only = generate_rise(x, cfg, *h, {1, false});
    CHECK(finals_only.snapshots.size() == 1);
}

TEST_CASE("constant classifier gives a flat map under per-pixel normalization") {
    const auto h = make_toy_linear_classifier(fixtures::uniform_weights(4, {12, 12}));
    std::mt19937_64 rng(44);
    const auto x = testing::random_pixels(12, 12, rng);
    auto cfg = small_config(200, 3, 2);
    cfg.normalization = RiseNormalization::EmpiricalPerPixel;
    const auto s = generate_rise(x, cfg, *h).saliency;
    for (double v : s.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

    cfg.normalization = RiseNormalization::Scalar;
    cfg.p = 0.0;
    for (double v : generate_rise(x, cfg, *h).saliency.values()) CHECK(v == 0.0);
}

TEST_CASE("seeds determine the masks") {
    std::mt19937_64 rng(45);
    const auto h = make_toy_linear_classifier(testing::random_toy(3, {8, 8}, rng, 0.02));
    const auto x = testing::random_pixels(8, 8, rng);
    const auto a = generate_rise(x, small_config(100, 2, 9), *h).saliency;
    const auto b = generate_rise(x, small_config(100, 2, 9), *h).saliency;
    const auto c = generate_rise(x, small_config(100, 2, 10), *h).saliency;
    CHECK(saliency_l2_distance(a, b) == 0.0);
    CHECK(saliency_l2_distance(a, c) > 0.0);
    CHECK(a.meta().method == "rise");
    CHECK(a.meta().config_digest.size() == 16);
}

TEST_CASE("configuration validation") {
    const auto h = make_toy_linear_classifier(fixtures::uniform_weights(2, {4, 4}));
    const ImageTensor x(4, 4);
    auto cfg = small_config(0, 2, 0);
    CHECK_THROWS_AS(generate_rise(x, cfg, *h), ParameterError);
    cfg = small_config(10, 2, 0);
    cfg.p = -0.1;
    CHECK_THROWS_AS(generate_rise(x, cfg, *h), ParameterError);
    cfg = small_config(10, 2, 0);
    cfg.target = 5;
    CHECK_THROWS_AS(generate_rise(x, cfg, *h), ParameterError);
    cfg = small_config(10, 2, 0);
    CHECK_THROWS_AS(generate_rise(ImageTensor(5, 4), cfg, *h), DimensionError);
    CHECK_THROWS_AS(generate_rise_exact(x, small_config(1, 5, 0), *h), SizeError);

    NanClassifier nan;
    CHECK_THROWS_AS(generate_rise(x, cfg, nan), DataError);
}

TEST_CASE("config JSON round trip") {
    RiseConfig cfg = small_config(500, 4, 77);
    cfg.cells_h = 3;
    cfg.p = 0.3;
    cfg.baseline = BlurBaseline{2.5};
    cfg.normalization = RiseNormalization::EmpiricalPerPixel;
    cfg.random_crop = false;
    cfg.target = 3;
    const auto back = rise_config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));
    CHECK(back.seed == 77);
    CHECK(back.target == std::optional<ClassId>(3));
}

TEST_CASE("convergence report") {
    std::mt19937_64 rng(46);
    const auto h = make_toy_linear_classifier(testing::random_toy(3, {8, 8}, rng, 0.05));
    const auto x = testing::random_pixels(8, 8, rng);
    auto cfg = small_config(256, 2, 3);

    const auto same = convergence_check(x, cfg, *h, {1.0, false}, {3, 3, 3});
    for (double d : same.final_distances) CHECK(d == 0.0);
    CHECK(same.d_bar == 0.0);
    CHECK(same.converged);

    const auto diff = convergence_check(x, cfg, *h, {1e-9, false});
    CHECK(diff.seeds == std::array<std::uint64_t, 3>{3, 4, 5});
    CHECK_FALSE(diff.converged);
    REQUIRE(diff.traces.size() == 3);
    CHECK(diff.traces[2].run_a == 1);
    CHECK(diff.traces[2].run_b == 2);
    for (const auto& t : diff.traces) {
        REQUIRE(t.points.size() == 4);
        CHECK(t.points.front().masks == 64);
        CHECK(t.points.back().masks == 256);
    }
    CHECK(diff.traces[0].points.back().distance == diff.final_distances[0]);
    CHECK(diff.d_bar ==
          doctest::Approx((diff.final_distances[0] + diff.final_distances[1] + diff.final_distances[2]) / 3.0));
    CHECK(diff.final_distances[0] == saliency_l2_distance(diff.runs[0].saliency, diff.runs[1].saliency));

    const auto loose = convergence_check(x, cfg, *h, {1e9, false});
    CHECK(loose.converged);

    const auto normalized = convergence_check(x, cfg, *h, {1e9, true});
    CHECK(normalized.final_distances[0] ==
          doctest::Approx(saliency_l2_distance(normalize_saliency(normalized.runs[0].saliency),
                                               normalize_saliency(normalized.runs[1].saliency))));
    CHECK_THROWS_AS(convergence_check(x, cfg, *h, {0.0, false}), ParameterError);
}

TEST_CASE("histogram threshold") {
    const std::vector<double> values{0.0, 1.5, 2.5, 2.6, 2.9, 4.0};
    const auto hist = histogram(values, 4);
    CHECK(hist.edges == std::vector<double>{0.0, 1.0, 2.0, 3.0, 4.0});
    CHECK(hist.counts == std::vector<std::size_t>{1, 1, 3, 1});
    CHECK(threshold_from_histogram(values, 4) == 3.0);

    CHECK(threshold_from_histogram({0.0, 0.5, 3.5, 4.0}, 4) == 1.0);
    CHECK(threshold_from_histogram({2.5, 2.5, 2.5}, 10) == 2.5);
    CHECK(threshold_from_histogram({7.0}, 3) == 7.0);
    CHECK_THROWS_AS(histogram({}, 4), ParameterError);
    CHECK_THROWS_AS(histogram({1.0}, 0), ParameterError);
}
