#include "perturbeval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "perturbeval/error.hpp"

namespace perturbeval {

PixelRanking rank_pixels(const SaliencyMap& s, RankDirection direction) {
    s.check_finite();
    const auto v = s.values();
    PixelRanking ranking{std::vector<std::size_t>(v.size()), direction};
    std::iota(ranking.order.begin(), ranking.order.end(), std::size_t{0});
    if (direction == RankDirection::MostRelevantFirst) {
        std::stable_sort(ranking.order.begin(), ranking.order.end(),
                         [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    } else {
        std::stable_sort(ranking.order.begin(), ranking.order.end(),
                         [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    }
    return ranking;
}

std::string to_string(PerturbationMetric metric) { return metric == PerturbationMetric::MoRF ? "morf" : "lerf"; }

PerturbationMetric parse_metric(const std::string& name) {
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (lower == "morf") return PerturbationMetric::MoRF;
    if (lower == "lerf") return PerturbationMetric::LeRF;
    throw ParameterError("unknown metric '" + name + "' (expected morf or lerf)");
}

RankDirection direction_for(PerturbationMetric metric) {
    return metric == PerturbationMetric::MoRF ? RankDirection::MostRelevantFirst : RankDirection::LeastRelevantFirst;
}

PerturbationCurve perturbation_curve(const ImageTensor& x, const BaselineImage& a, const PixelRanking& ranking,
                                     const Classifier& h, ClassId c, std::size_t r, PerturbationMetric metric) {
    if (r == 0) throw ParameterError("pixels per step r must be positive");
    if (x.shape() != a.image.shape()) throw DimensionError("baseline shape does not match the input");
    if (c >= h.num_classes()) throw ParameterError("target class out of range");
    const std::size_t pixels = x.shape().pixels();
    if (ranking.order.size() != pixels) throw DimensionError("ranking does not cover every pixel");
    {
        std::vector<bool> seen(pixels, false);
        for (auto idx : ranking.order) {
            if (idx >= pixels || seen[idx]) throw ParameterError("ranking is not a permutation of the pixels");
            seen[idx] = true;
        }
    }

    const std::size_t steps = (pixels + r - 1) / r;
    PerturbationCurve curve;
    curve.pixels_per_step = r;
    curve.metric = metric;
    curve.baseline = a.spec;
    curve.target = c;
    curve.alphas.reserve(steps + 1);
    curve.scores.reserve(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) {
        curve.alphas.push_back(
            k == steps ? 1.0 : static_cast<double>(k * r) / static_cast<double>(pixels));
    }

    constexpr std::size_t kBatch = 32;
    constexpr std::size_t ch = ImageTensor::kChannels;
    ImageTensor current = x;
    const auto src = a.image.data();
    std::vector<ImageTensor> batch;
    batch.reserve(kBatch);
    const auto flush = [&] {
        for (const auto& p : h.predict_batch(batch)) {
            const double s = p[c];
            if (!std::isfinite(s)) throw DataError("classifier returned a non-finite score");
            curve.scores.push_back(s);
        }
        batch.clear();
    };
    batch.push_back(current);
    for (std::size_t k = 1; k <= steps; ++k) {
        auto dst = current.data();
        const std::size_t end = std::min(pixels, k * r);
        for (std::size_t i = (k - 1) * r; i < end; ++i) {
            const std::size_t px = ranking.order[i];
            for (std::size_t j = 0; j < ch; ++j) dst[px * ch + j] = src[px * ch + j];
        }
        batch.push_back(current);
        if (batch.size() == kBatch) flush();
    }
    if (!batch.empty()) flush();
    return curve;
}

namespace {

// Area under `f(s_k)` on the alpha axis.
template <class F>
double integrate(const PerturbationCurve& curve, Integration rule, F f) {
    if (curve.scores.empty()) throw ParameterError("empty perturbation curve");
    const auto& s = curve.scores;
    double area = 0.0;
    if (rule == Integration::MeanOfSamples || s.size() == 1) {
        for (double v : s) area += f(v);
        return area / static_cast<double>(s.size());
    }
    for (std::size_t k = 1; k < s.size(); ++k) {
        area += (curve.alphas[k] - curve.alphas[k - 1]) * 0.5 * (f(s[k]) + f(s[k - 1]));
    }
    return area;
}

}  // namespace

MetricScore auc(const PerturbationCurve& curve, Integration rule) {
    return {ScoreKind::AUC, integrate(curve, rule, [](double v) { return v; })};
}

MetricScore aoc(const PerturbationCurve& curve, Integration rule) {
    if (curve.scores.empty()) throw ParameterError("empty perturbation curve");
    const double s0 = curve.scores.front();
    return {ScoreKind::AOC, integrate(curve, rule, [s0](double v) { return s0 - v; })};
}

MetricScore primary_score(const PerturbationCurve& curve, Integration rule) {
    return curve.metric == PerturbationMetric::MoRF ? aoc(curve, rule) : auc(curve, rule);
}

std::string to_string(Winner w) {
    switch (w) {
        case Winner::First: return "first";
        case Winner::Second: return "second";
        case Winner::Tie: return "tie";
    }
    return "tie";
}

const ComparisonCell& ComparisonMatrix::at(const BaselineSpec& baseline, PerturbationMetric metric) const {
    for (const auto& cell : cells) {
        if (cell.baseline == baseline && cell.metric == metric) return cell;
    }
    throw ParameterError("no comparison cell for " + to_tag(baseline) + " / " + to_string(metric));
}

ComparisonMatrix compare_saliency(const ImageTensor& x, const SaliencyMap& first, const SaliencyMap& second,
                                  const std::vector<BaselineImage>& baselines,
                                  const std::vector<PerturbationMetric>& metrics, const Classifier& h, ClassId c,
                                  std::size_t r, Integration rule) {
    if (first.shape() != x.shape() || second.shape() != x.shape()) {
        throw DimensionError("saliency maps must match the input shape " + to_string(x.shape()));
    }
    ComparisonMatrix out{first.meta().method, second.meta().method, c, {}};
    for (const auto& baseline : baselines) {
        for (auto metric : metrics) {
            ComparisonCell cell;
            cell.baseline = baseline.spec;
            cell.metric = metric;
            const auto dir = direction_for(metric);
            cell.curve_first = perturbation_curve(x, baseline, rank_pixels(first, dir), h, c, r, metric);
            cell.curve_second = perturbation_curve(x, baseline, rank_pixels(second, dir), h, c, r, metric);
            cell.score_first = primary_score(cell.curve_first, rule);
            cell.score_second = primary_score(cell.curve_second, rule);
            const double diff = cell.score_first.value - cell.score_second.value;
            cell.winner = std::abs(diff) <= kTieTolerance ? Winner::Tie : (diff > 0 ? Winner::First : Winner::Second);
            out.cells.push_back(std::move(cell));
        }
    }
    return out;
}

nlohmann::json to_json(const ComparisonMatrix& m) {
    nlohmann::json cells = nlohmann::json::object();
    for (const auto& cell : m.cells) {
        const char* kind = cell.score_first.kind == ScoreKind::AOC ? "AOC" : "AUC";
        cells[to_tag(cell.baseline)][to_string(cell.metric)] = {
            {"score_kind", kind},
            {"first", cell.score_first.value},
            {"second", cell.score_second.value},
            {"winner", to_string(cell.winner)},
            {"s0", cell.curve_first.scores.front()},
            {"sL", cell.curve_first.scores.back()},
            {"steps", cell.curve_first.steps()},
        };
    }
    return {{"first", m.name_first}, {"second", m.name_second}, {"target", m.target}, {"cells", std::move(cells)}};
}

}  // namespace perturbeval
