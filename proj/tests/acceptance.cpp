// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "perturbeval/backends.hpp"
#include "perturbeval/io.hpp"
#include "perturbeval/metrics.hpp"
#include "perturbeval/parallel.hpp"
#include "perturbeval/report.hpp"
#include "perturbeval/rise.hpp"
#include "support.hpp"

using namespace perturbeval;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

/// Collects failed checks; the first few messages end up in the report line.
class Checker {
public:
    void expect(bool ok, const std::string& what) {
        if (ok) return;
        ++failures_;
        if (failures_ <= 3) messages_ += (messages_.empty() ? "" : "; ") + what;
    }

    Outcome outcome(const std::string& summary) const {
        if (failures_ == 0) return {true, summary};
        return {false, std::to_string(failures_) + " failed check(s): " + messages_};
    }

private:
    std::size_t failures_ = 0;
    std::string messages_;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

const Preprocessor kImageNetLike({123.675, 116.28, 103.53}, {1 / 58.395, 1 / 57.12, 1 / 57.375});

UpsampledMask random_field(ImageShape shape, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(shape.pixels());
    for (auto& m : v) m = u(rng);
    return UpsampledMask(shape, std::move(v));
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

Outcome masking_algebra() {
    Checker check;
    std::mt19937_64 rng(101);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const ImageShape shape{4 + rng() % 13, 4 + rng() % 13};
        const auto x = testing::random_image(shape.height, shape.width, rng);
        const auto a = testing::random_image(shape.height, shape.width, rng);
        const auto m1 = t % 2 == 0 ? random_field(shape, rng)
                                   : upsample_and_crop(LowResMask(2, 3, {1, 0, 1, 1, 0, 0}), shape, {0, 0});
        const auto m2 = random_field(shape, rng);
        const double lambda = std::uniform_real_distribution<double>(0.0, 1.0)(rng);

        const auto phi1 = apply_baseline(x, a, m1);
        const auto phi2 = apply_baseline(x, a, m2);
        const auto ones = apply_baseline(x, a, UpsampledMask(shape, std::vector<double>(shape.pixels(), 1.0)));
        const auto zeros = apply_baseline(x, a, UpsampledMask(shape, std::vector<double>(shape.pixels(), 0.0)));
        const auto same = apply_baseline(x, x, m1);
        std::vector<double> mix(shape.pixels());
        for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = lambda * m1.values()[i] + (1 - lambda) * m2.values()[i];
        const auto phi_mix = apply_baseline(x, a, UpsampledMask(shape, mix));
        ImageTensor blend(shape.height, shape.width);
        for (std::size_t i = 0; i < blend.size(); ++i) {
            blend.data()[i] = lambda * phi1.data()[i] + (1 - lambda) * phi2.data()[i];
        }
        const auto ref = oracle::phi(x, a, std::vector<double>(m1.values().begin(), m1.values().end()));

        const double d1 = max_abs_diff(ones.data(), x.data());
        const double d0 = max_abs_diff(zeros.data(), a.data());
        const double dx = max_abs_diff(same.data(), x.data());
        const double daff = max_abs_diff(phi_mix.data(), blend.data());
        const double dref = max_abs_diff(phi1.data(), ref.data());
        check.expect(d1 <= 1e-12, "Phi(x,a,1) != x");
        check.expect(d0 <= 1e-12, "Phi(x,a,0) != a");
        check.expect(dx <= 1e-12, "Phi(x,x,M) != x");
        check.expect(daff <= 1e-12, "affinity in M violated by " + fmt(daff));
        check.expect(dref <= 1e-12, "differs from the blend formula by " + fmt(dref));
        worst = std::max({worst, d1, d0, dx, daff, dref});
    }
    return check.outcome("200 triples, worst deviation " + fmt(worst));
}

Outcome preprocessing_equivalence() {
    Checker check;
    std::mt19937_64 rng(102);
    const ImageShape shape{32, 32};
    const auto w = testing::random_toy(10, shape, rng, 0.05, kImageNetLike);
    const auto h = make_toy_linear_classifier(w);
    const auto x = testing::random_pixels(shape.height, shape.width, rng);
    const auto a = inv_preproc_baseline(h->preprocessor(), shape);
    const auto gx = preprocess(x, h->preprocessor());
    const ClassId c = argmax_class(*h, x);
    const MaskParams params{1000, 7, 7, 0.5, 102, shape, true};
    double worst = 0.0;
    for (std::size_t i = 0; i < params.count; ++i) {
        const auto sm = sample_mask(params, i);
        const auto q = upsample_and_crop(sm.mask, shape, sm.offset);
        const double lhs = class_probability(*h, apply_baseline(x, a.image, q), c);
        ImageTensor masked = gx;
        for (std::size_t px = 0; px < shape.pixels(); ++px) {
            for (std::size_t ch = 0; ch < 3; ++ch) masked.data()[px * 3 + ch] *= q.values()[px];
        }
        const double rhs = h->predict_preprocessed(std::vector{masked}).front()[c];
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    check.expect(worst <= 1e-9, "max score gap " + fmt(worst));
    return check.outcome("1000 masks, max score gap " + fmt(worst));
}

Outcome rise_vs_enumeration() {
    Checker check;
    std::mt19937_64 rng(103);
    const ImageShape shape{16, 16};
    const auto h = make_toy_linear_classifier(testing::random_toy(3, shape, rng, 0.05, kImageNetLike));
    const auto x = testing::random_pixels(shape.height, shape.width, rng);
    RiseConfig cfg;
    cfg.num_masks = 200000;
    cfg.cells_w = 2;
    cfg.cells_h = 2;
    cfg.p = 0.5;
    cfg.seed = 103;
    cfg.random_crop = false;
    cfg.batch_size = 64;
    cfg.snapshot_interval = 20000;
    const auto exact = generate_rise_exact(x, cfg, *h, default_jobs());
    const ClassId c = argmax_class(*h, x);
    const auto brute = oracle::rise_expectation(x, inv_preproc_baseline(h->preprocessor(), shape).image, 2, 2, 0.5, *h, c);
    const double oracle_gap = max_abs_diff(exact.values(), brute);
    check.expect(oracle_gap <= 1e-12, "exact expectation off the brute-force sum by " + fmt(oracle_gap));

    const auto sampled = generate_rise(x, cfg, *h, RunOptions{default_jobs(), false}).saliency;
    const double linf = max_abs_diff(sampled.values(), exact.values());
    check.expect(linf <= 0.01, "L_inf " + fmt(linf) + " > 0.01");
    return check.outcome("N = 2e5, L_inf " + fmt(linf) + " (exact vs brute force " + fmt(oracle_gap) + ")");
}

Outcome convergence_diagnostic() {
    Checker check;
    std::mt19937_64 rng(104);
    const ImageShape shape{32, 32};
    const auto x = testing::random_pixels(shape.height, shape.width, rng);
    RiseConfig cfg;
    cfg.num_masks = 8192;
    cfg.cells_w = 2;
    cfg.cells_h = 2;
    cfg.seed = 104;
    cfg.snapshot_interval = 128;

    const auto toy = make_toy_linear_classifier(testing::random_toy(5, shape, rng, 0.01));
    const auto same = convergence_check(x, cfg, *toy, ConvergenceOptions{1.0, false},
                                        std::array<std::uint64_t, 3>{7, 7, 7}, RunOptions{default_jobs(), false});
    for (const auto& t : same.traces) {
        for (const auto& p : t.points) check.expect(p.distance == 0.0, "same-seed distance is not exactly 0");
    }
    check.expect(same.converged, "same-seed runs not converged");

    const auto constant = make_toy_linear_classifier(fixtures::uniform_weights(5, shape));
    const double bound = 0.1 * std::sqrt(static_cast<double>(shape.pixels()));
    const auto diff = convergence_check(x, cfg, *constant, ConvergenceOptions{bound, false}, RunOptions{default_jobs(), false});
    double worst = 0.0;
    for (double d : diff.final_distances) worst = std::max(worst, d);
    check.expect(worst < bound, "independent-seed distance " + fmt(worst) + " >= " + fmt(bound));
    check.expect(diff.converged, "constant classifier not converged");
    for (const auto& t : diff.traces) {
        check.expect(t.points.size() == 64, "trace has " + std::to_string(t.points.size()) + " points, expected 64");
        for (std::size_t k = 0; k < t.points.size(); ++k) {
            check.expect(t.points[k].masks == (k + 1) * 128, "trace point off the snapshot grid");
        }
    }
    return check.outcome("same seed: 0 exactly; independent seeds: max " + fmt(worst) + " < " + fmt(bound) +
                         "; 64 trace points per pair");
}

Outcome histogram_threshold() {
    Checker check;
    const double t = threshold_from_histogram({0.0, 1.5, 2.5, 2.6, 2.9, 4.0}, 4);
    check.expect(t == 3.0, "4-bin example gave " + fmt(t));
    const double single = threshold_from_histogram({1234.5, 1234.5, 1234.5}, 50);
    check.expect(single == 1234.5, "degenerate list gave " + fmt(single));
    return check.outcome("4-bin example -> 3.0; constant list -> its value");
}

std::vector<BaselineImage> fixture_baselines(const ImageTensor& x, const Preprocessor& g) {
    return {constant_baseline(0, x.shape()), constant_baseline(255, x.shape()), inv_preproc_baseline(g, x.shape()),
            blur_baseline(x, 10.0)};
}

Outcome curve_oracle() {
    Checker check;
    std::mt19937_64 rng(106);
    double worst = 0.0;
    std::size_t curves = 0;
    for (int instance = 0; instance < 25; ++instance) {
        const auto h = make_toy_linear_classifier(testing::random_toy(4, {8, 8}, rng, 0.05, kImageNetLike));
        const auto x = testing::random_pixels(8, 8, rng);
        const auto s = testing::random_saliency(8, 8, rng);
        const ClassId c = argmax_class(*h, x);
        for (const auto& a : fixture_baselines(x, h->preprocessor())) {
            for (auto metric : {PerturbationMetric::MoRF, PerturbationMetric::LeRF}) {
                const auto curve = perturbation_curve(x, a, rank_pixels(s, direction_for(metric)), *h, c, 1, metric);
                const auto ref = oracle::curve(x, a.image, s, metric == PerturbationMetric::MoRF, *h, c, 1);
                if (curve.scores.size() != ref.size()) {
                    check.expect(false, "curve length mismatch");
                    continue;
                }
                worst = std::max(worst, max_abs_diff(curve.scores, ref));
                check.expect(curve.scores.front() == class_probability(*h, x, c), "s_0 != f(x)");
                check.expect(curve.scores.back() == class_probability(*h, a.image, c), "s_L != f(A)");
                ++curves;
            }
        }
    }
    check.expect(worst <= 1e-12, "max deviation from the oracle " + fmt(worst));
    return check.outcome(std::to_string(curves) + " curves, max deviation " + fmt(worst));
}

Outcome score_identities() {
    Checker check;
    std::mt19937_64 rng(107);
    double worst = 0.0;
    std::size_t curves = 0;
    for (int instance = 0; instance < 10; ++instance) {
        const auto h = make_toy_linear_classifier(testing::random_toy(3, {6, 6}, rng, 0.05, kImageNetLike));
        const auto x = testing::random_pixels(6, 6, rng);
        const auto s = testing::random_saliency(6, 6, rng);
        for (const auto& a : fixture_baselines(x, h->preprocessor())) {
            for (auto metric : {PerturbationMetric::MoRF, PerturbationMetric::LeRF}) {
                for (std::size_t r : {1, 5}) {
                    const auto curve = perturbation_curve(x, a, rank_pixels(s, direction_for(metric)), *h, 0, r, metric);
                    for (auto rule : {Integration::MeanOfSamples, Integration::Trapezoid}) {
                        worst = std::max(worst, std::abs(aoc(curve, rule).value + auc(curve, rule).value -
                                                         curve.scores.front()));
                    }
                    ++curves;
                }
            }
        }
    }
    check.expect(worst <= 1e-12, "AOC + AUC - s_0 reached " + fmt(worst));

    PerturbationCurve flat;
    flat.alphas = {0.0, 0.5, 1.0};
    flat.scores = {0.4, 0.4, 0.4};
    check.expect(aoc(flat).value == 0.0, "flat curve AOC " + fmt(aoc(flat).value));

    PerturbationCurve drop;
    drop.alphas = {0.0, 0.25, 0.5, 0.75, 1.0};
    drop.scores = {1, 0, 0, 0, 0};
    check.expect(std::abs(auc(drop).value - 0.2) <= 1e-12, "(1,0,0,0,0) AUC " + fmt(auc(drop).value));
    check.expect(std::abs(aoc(drop).value - 0.8) <= 1e-12, "(1,0,0,0,0) AOC " + fmt(aoc(drop).value));
    return check.outcome(std::to_string(curves) + " curves, max |AOC + AUC - s_0| " + fmt(worst) +
                         "; flat -> 0; (1,0,0,0,0) -> 0.2 / 0.8");
}

Outcome baseline_inversion() {
    Checker check;
    const auto dir = testing::data_dir() / "inversion";
    const auto h = make_toy_linear_classifier(load_toy_weights(dir / "inversion.weights.json"));
    const auto x = io::read_png(dir / "inversion.png");
    auto first = io::read_npy(dir / "inversion.bright-first.npy");
    auto second = io::read_npy(dir / "inversion.dark-first.npy");
    first.meta().method = "bright-first";
    second.meta().method = "dark-first";
    const ClassId c = argmax_class(*h, x);
    const std::vector<BaselineImage> baselines{constant_baseline(0, x.shape()), constant_baseline(255, x.shape())};
    const auto matrix = compare_saliency(x, first, second, baselines, {PerturbationMetric::MoRF}, *h, c);

    const auto black = matrix.at(ConstantBaseline{0}, PerturbationMetric::MoRF);
    const auto white = matrix.at(ConstantBaseline{255}, PerturbationMetric::MoRF);
    check.expect(black.winner == Winner::First, "A_0 winner is " + to_string(black.winner));
    check.expect(white.winner == Winner::Second, "A_255 winner is " + to_string(white.winner));

    // Brute-force validation of the fixture itself.
    for (const auto* cell : {&black, &white}) {
        const auto& a = cell == &black ? baselines[0] : baselines[1];
        for (const auto* map : {&first, &second}) {
            const auto ref = oracle::curve(x, a.image, *map, true, *h, c, 1);
            double area = 0.0;
            for (double v : ref) area += v;
            const double ref_aoc = ref.front() - area / static_cast<double>(ref.size());
            const double got = map == &first ? cell->score_first.value : cell->score_second.value;
            check.expect(std::abs(ref_aoc - got) <= 1e-12, "matrix AOC disagrees with the brute-force curve");
        }
    }
    return check.outcome("MoRF AOC under A_0: " + fmt(black.score_first.value) + " vs " +
                         fmt(black.score_second.value) + " (map-1 wins); under A_255: " +
                         fmt(white.score_first.value) + " vs " + fmt(white.score_second.value) + " (map-2 wins)");
}

/// Every regular file under `dir`, relative path -> bytes.
std::map<std::string, std::string> snapshot_tree(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = io::read_file(e.path());
    }
    return files;
}

Outcome determinism() {
    Checker check;
    testing::TempDir ws;
    std::mt19937_64 rng(109);
    const ImageShape shape{24, 24};
    save_toy_weights(ws / "model.weights.json", testing::random_toy(6, shape, rng, 0.01, kImageNetLike));
    fs::create_directory(ws / "images");
    for (const auto* name : {"a.png", "b.png", "c.png"}) {
        io::write_png(ws / "images" / name, testing::random_pixels(shape.height, shape.width, rng));
    }
    io::write_npy(ws / "s1.npy", testing::random_saliency(shape.height, shape.width, rng));
    io::write_npy(ws / "s2.npy", testing::random_saliency(shape.height, shape.width, rng));
    {
        std::ofstream toml(ws / "run.toml");
        toml << "seed = 2024\n[rise]\nn = 1024\nw = 3\np = 0.5\nsnapshot_interval = 128\nbatch_size = 8\n"
             << "[convergence]\nd_max = 5.0\n[metrics]\nbaselines = [\"black\", \"inv\", \"blur:10\"]\n";
    }

    const auto cli = testing::quote(testing::cli_path());
    const auto common = " --config " + testing::quote(ws / "run.toml") + " --weights " +
                        testing::quote(ws / "model.weights.json");
    const auto image = " --image " + testing::quote(ws / "images" / "a.png");
    const std::vector<std::string> commands{
        "rise" + common + image,
        "converge" + common + image,
        "compare" + common + image + " --saliency " + testing::quote(ws / "s1.npy") + " --saliency " +
            testing::quote(ws / "s2.npy"),
        "neutral-sweep" + common + " --levels 0..255",
        "corpus" + common + " --dir " + testing::quote(ws / "images"),
    };
    const auto run_all = [&](const std::string& out, int jobs) {
        for (const auto& cmd : commands) {
            const int status = testing::run_shell(cli + " " + cmd + " --out " + testing::quote(ws / out) + " --jobs " +
                                                  std::to_string(jobs) + " > /dev/null");
            check.expect(status == 0, "'" + cmd.substr(0, cmd.find(' ')) + "' exited with " + std::to_string(status));
        }
        return snapshot_tree(ws / out);
    };
    const auto first = run_all("run1", 1);
    const auto second = run_all("run2", 1);
    const auto parallel = run_all("run8", 8);

    std::size_t npy = 0;
    std::size_t json_files = 0;
    check.expect(!first.empty(), "no artifacts written");
    check.expect(first.size() == second.size() && first.size() == parallel.size(), "artifact sets differ");
    for (const auto& [name, bytes] : first) {
        const auto a = second.find(name);
        const auto b = parallel.find(name);
        check.expect(a != second.end() && a->second == bytes, name + " differs between invocations");
        check.expect(b != parallel.end() && b->second == bytes, name + " differs between --jobs 1 and --jobs 8");
        if (name.ends_with(".npy")) ++npy;
        if (name.ends_with(".json")) {
            ++json_files;
            check.expect(nlohmann::json::parse(bytes).contains("config_digest"), name + " lacks the config digest");
        }
    }
    return check.outcome(std::to_string(first.size()) + " artifacts (" + std::to_string(npy) + " NPY, " +
                         std::to_string(json_files) + " JSON) byte-identical across 2 invocations and --jobs 1/8");
}

Outcome neutral_sweep() {
    Checker check;
    std::set<int> levels;
    for (int v = 0; v < 256; ++v) levels.insert(v);

    const std::size_t k = 10;
    const auto uniform = make_toy_linear_classifier(fixtures::uniform_weights(k, {16, 16}));
    double worst = 0.0;
    for (const auto& row : neutral_input_sweep(*uniform, levels)) {
        worst = std::max(worst, std::abs(row.max_prob - 1.0 / static_cast<double>(k)));
    }
    check.expect(worst <= 1e-15, "uniform classifier max prob off 1/K by " + fmt(worst));

    const double gain = 4.0;
    const auto bright = make_toy_linear_classifier(fixtures::brightness_weights(5, {16, 16}, gain));
    const auto rows = neutral_input_sweep(*bright, levels);
    double logit_gap = 0.0;
    bool monotone = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<double> logits(5);
        for (std::size_t c = 0; c < 5; ++c) logits[c] = gain * (static_cast<double>(c) - 2.0) * rows[i].level / 255.0;
        const auto expected = softmax(logits);
        logit_gap = std::max(logit_gap, max_abs_diff(rows[i].probs, expected));
        if (i > 0) monotone = monotone && rows[i].max_prob >= rows[i - 1].max_prob && rows[i].probs[4] > rows[i - 1].probs[4];
    }
    check.expect(monotone, "brightness score column is not monotone");
    check.expect(logit_gap <= 1e-12, "brightness probabilities off the closed form by " + fmt(logit_gap));

    std::string external = "no ONNX ResNet-50 supplied (set PERTURBEVAL_RESNET50_ONNX to exercise it)";
    if (const char* model = std::getenv("PERTURBEVAL_RESNET50_ONNX"); model != nullptr && *model != '\0') {
        const auto net = make_onnx_classifier(model, {224, 224}, kImageNetLike);
        double top = 0.0;
        for (const auto& row : neutral_input_sweep(*net, levels)) top = std::max(top, row.max_prob);
        check.expect(top > 0.20, "ResNet-50 neutral-input max prob " + fmt(top) + " <= 0.20");
        external = "ResNet-50 max prob over gray levels " + fmt(top);
    }
    return check.outcome("uniform: 1/K at all 256 levels; brightness: monotone, closed-form gap " + fmt(logit_gap) +
                         "; " + external);
}

Outcome mask_statistics() {
    Checker check;
    std::ostringstream detail;
    for (double p : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const MaskParams params{10000, 7, 7, p, 111, {224, 224}, true};
        std::size_t on = 0;
        for (std::size_t i = 0; i < params.count; ++i) on += sample_mask(params, i).mask.count_on();
        const double cells = static_cast<double>(params.count * 49);
        const double mean = static_cast<double>(on) / cells;
        const double sigma = std::sqrt(p * (1 - p) / cells);
        const double z = (mean - p) / sigma;
        check.expect(std::abs(z) <= 3.0, "p = " + fmt(p) + ": z = " + fmt(z));
        detail << (detail.tellp() > 0 ? ", " : "") << "p=" << p << " z=" << fmt(z);
    }
    return check.outcome(detail.str());
}

struct Criterion {
    int id;
    const char* title;
    double budget_seconds;  ///< 0: no runtime bound
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "masking algebra", 1.0, masking_algebra},
        {2, "preprocessing equivalence", 5.0, preprocessing_equivalence},
        {3, "RISE estimator vs enumeration", 60.0, rise_vs_enumeration},
        {4, "convergence diagnostic", 60.0, convergence_diagnostic},
        {5, "threshold from histogram", 0.0, histogram_threshold},
        {6, "MoRF/LeRF oracle equivalence", 30.0, curve_oracle},
        {7, "score identities", 0.0, score_identities},
        {8, "baseline inversion fixture", 0.0, baseline_inversion},
        {9, "determinism", 0.0, determinism},
        {10, "neutral-input sweep", 0.0, neutral_sweep},
        {11, "mask statistics", 0.0, mask_statistics},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_seconds > 0 && seconds >= c.budget_seconds) {
            o.pass = false;
            o.detail += " [over the " + fmt(c.budget_seconds) + " s budget]";
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.title << "): " << o.detail
                  << "  [" << fmt(seconds) << " s]" << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
