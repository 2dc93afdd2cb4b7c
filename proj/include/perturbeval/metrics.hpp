#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "perturbeval/baselines.hpp"
#include "perturbeval/classifier.hpp"
#include "perturbeval/tensor.hpp"

namespace perturbeval {

enum class RankDirection { MostRelevantFirst, LeastRelevantFirst };

struct PixelRanking {
    std::vector<std::size_t> order;  ///< row-major pixel indices
    RankDirection direction = RankDirection::MostRelevantFirst;
};

/// Stable sort by saliency value; ties keep ascending row-major order.
PixelRanking rank_pixels(const SaliencyMap& s, RankDirection direction);

enum class PerturbationMetric { MoRF, LeRF };

std::string to_string(PerturbationMetric metric);
PerturbationMetric parse_metric(const std::string& name);
RankDirection direction_for(PerturbationMetric metric);

enum class Integration {
    MeanOfSamples,  ///< AUC = mean of s_0..s_L
    Trapezoid,      ///< trapezoidal rule on the alpha grid
};

struct PerturbationCurve {
    std::vector<double> alphas;
    std::vector<double> scores;
    std::size_t pixels_per_step = 1;
    PerturbationMetric metric = PerturbationMetric::MoRF;
    BaselineSpec baseline;
    ClassId target = 0;

    std::size_t steps() const { return scores.empty() ? 0 : scores.size() - 1; }
};

/// Occludes ranked pixels cumulatively, `r` per step, replacing all three
/// channels with the baseline's pixels. Produces L = ceil(m*n / r) + 1
/// points; s_0 is the unperturbed score and the last image equals the
/// baseline exactly. `metric` only labels the curve; the ranking decides the
/// order.
PerturbationCurve perturbation_curve(const ImageTensor& x, const BaselineImage& a, const PixelRanking& ranking,
                                     const Classifier& h, ClassId c, std::size_t r,
                                     PerturbationMetric metric = PerturbationMetric::MoRF);

enum class ScoreKind { AOC, AUC };

struct MetricScore {
    ScoreKind kind = ScoreKind::AUC;
    double value = 0.0;
};

MetricScore auc(const PerturbationCurve& curve, Integration rule = Integration::MeanOfSamples);

/// Area between s_0 and the curve, equal to s_0 - AUC. Higher is better for MoRF.
MetricScore aoc(const PerturbationCurve& curve, Integration rule = Integration::MeanOfSamples);

/// The score that ranks maps for this metric: AOC for MoRF, AUC for LeRF.
MetricScore primary_score(const PerturbationCurve& curve, Integration rule = Integration::MeanOfSamples);

enum class Winner { First, Second, Tie };

std::string to_string(Winner w);

struct ComparisonCell {
    BaselineSpec baseline;
    PerturbationMetric metric = PerturbationMetric::MoRF;
    PerturbationCurve curve_first;
    PerturbationCurve curve_second;
    MetricScore score_first;
    MetricScore score_second;
    Winner winner = Winner::Tie;
};

struct ComparisonMatrix {
    std::string name_first;
    std::string name_second;
    ClassId target = 0;
    std::vector<ComparisonCell> cells;  ///< baseline-major, metrics in given order

    const ComparisonCell& at(const BaselineSpec& baseline, PerturbationMetric metric) const;
};

inline constexpr double kTieTolerance = 1e-9;

/// Every (baseline, metric) cell: both curves, both scores and the winner.
/// Scores within 1e-9 of each other are a tie.
ComparisonMatrix compare_saliency(const ImageTensor& x, const SaliencyMap& first, const SaliencyMap& second,
                                  const std::vector<BaselineImage>& baselines,
                                  const std::vector<PerturbationMetric>& metrics, const Classifier& h, ClassId c,
                                  std::size_t r = 1, Integration rule = Integration::MeanOfSamples);

/// {"<baseline tag>": {"<metric>": {...}}}
nlohmann::json to_json(const ComparisonMatrix& m);

}  // namespace perturbeval
