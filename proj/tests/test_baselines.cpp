#include <doctest.h>

#include <numeric>

#include "oracles.hpp"
#include "perturbeval/baselines.hpp"
#include "perturbeval/error.hpp"
#include "support.hpp"

using namespace perturbeval;

TEST_CASE("baseline tags") {
    CHECK(to_tag(ConstantBaseline{127}) == "constant:127");
    CHECK(to_tag(InvPreprocZeroBaseline{}) == "inv");
    CHECK(to_tag(BlurBaseline{10.0}) == "blur:10");
    CHECK(to_tag(BlurBaseline{2.5}) == "blur:2.5");
    CHECK(file_tag(ConstantBaseline{0}) == "constant-0");
    for (const std::string tag : {"constant:0", "constant:255", "inv", "blur:10", "blur:0.5"}) {
        CHECK(to_tag(parse_baseline_spec(tag)) == tag);
    }
    CHECK(std::get<ConstantBaseline>(parse_baseline_spec("black")).level == 0);
    CHECK(std::get<ConstantBaseline>(parse_baseline_spec("white")).level == 255);
    CHECK_THROWS_AS(parse_baseline_spec("constant:256"), ParameterError);
    CHECK_THROWS_AS(parse_baseline_spec("blur:0"), ParameterError);
    CHECK_THROWS_AS(parse_baseline_spec("blur:-1"), ParameterError);
    CHECK_THROWS_AS(parse_baseline_spec("noise"), ParameterError);
}

TEST_CASE("constant and zero-after-preprocessing baselines") {
    const auto a = constant_baseline(127, {3, 4});
    for (double v : a.image.data()) CHECK(v == 127.0);
    CHECK_FALSE(a.input_dependent);

    const Preprocessor g({123.675, 116.28, 103.53}, {1 / 58.395, 1 / 57.12, 1 / 57.375});
    const auto inv = inv_preproc_baseline(g, {3, 4});
    CHECK(inv.image.at(2, 3, 0) == 123.675);
    CHECK(inv.image.at(0, 0, 2) == 103.53);
    const auto zero = preprocess(inv.image, g);
    for (double v : zero.data()) CHECK(v == 0.0);
}

TEST_CASE("gaussian kernel") {
    const auto k = gaussian_kernel(1.0);
    CHECK(k.size() == 7);
    CHECK(std::accumulate(k.begin(), k.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(k[3] > k[2]);
    CHECK(k[0] == doctest::Approx(k[6]));
    CHECK(gaussian_kernel(10.0).size() == 61);
}

TEST_CASE("half-sample symmetric reflection") {
    CHECK(reflect_index(-1, 4) == 0);
    CHECK(reflect_index(-2, 4) == 1);
    CHECK(reflect_index(4, 4) == 3);
    CHECK(reflect_index(5, 4) == 2);
    CHECK(reflect_index(8, 4) == 0);
    CHECK(reflect_index(-5, 4) == 3);
    CHECK(reflect_index(-9, 4) == 0);
    CHECK(reflect_index(7, 1) == 0);
}

TEST_CASE("blur matches dense convolution") {
    std::mt19937_64 rng(21);
    for (const auto& [h, w, sigma] : std::vector<std::tuple<std::size_t, std::size_t, double>>{
             {9, 7, 1.0}, {8, 8, 10.0}, {5, 12, 2.5}, {3, 3, 0.4}}) {
        const auto x = testing::random_image(h, w, rng);
        const auto b = blur_baseline(x, sigma);
        CHECK(b.input_dependent);
        const auto ref = oracle::dense_blur(x, sigma);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(b.image.data()[i] == doctest::Approx(ref.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("blur preserves constants and the channel mean") {
    std::mt19937_64 rng(22);
    const auto flat = blur_baseline(ImageTensor(6, 6, 42.0), 3.0);
    for (double v : flat.image.data()) CHECK(v == doctest::Approx(42.0).epsilon(1e-14));

    const auto x = testing::random_image(8, 8, rng);
    const auto b = blur_baseline(x, 10.0);
    for (std::size_t ch = 0; ch < 3; ++ch) {
        double before = 0.0;
        double after = 0.0;
        for (std::size_t r = 0; r < 8; ++r) {
            for (std::size_t c = 0; c < 8; ++c) {
                before += x.at(r, c, ch);
                after += b.image.at(r, c, ch);
            }
        }
        CHECK(after == doctest::Approx(before).epsilon(1e-12));
    }
}

TEST_CASE("baseline family ordering") {
    std::mt19937_64 rng(23);
    const auto x = testing::random_image(4, 4, rng);
    const auto set = baseline_set({255, 0, 127, 0}, {10.0, 1.0}, Preprocessor({1, 2, 3}), x);
    REQUIRE(set.size() == 6);
    CHECK(to_tag(set[0].spec) == "constant:0");
    CHECK(to_tag(set[1].spec) == "constant:127");
    CHECK(to_tag(set[2].spec) == "constant:255");
    CHECK(to_tag(set[3].spec) == "inv");
    CHECK(to_tag(set[4].spec) == "blur:1");
    CHECK(to_tag(set[5].spec) == "blur:10");
    CHECK(baseline_set({0}, {}, Preprocessor{}, x, false).size() == 1);
    CHECK_THROWS_AS(baseline_set({}, {}, Preprocessor{}, x, false), ParameterError);
    CHECK_THROWS_AS(constant_baseline(300, {2, 2}), ParameterError);
}
