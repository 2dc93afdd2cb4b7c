#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "perturbeval/metrics.hpp"
#include "perturbeval/rise.hpp"
#include "perturbeval/tensor.hpp"

namespace perturbeval {

using Rgb8 = std::array<std::uint8_t, 3>;

/// The 256-entry inferno colormap (matplotlib's published `_inferno_data`,
/// each channel rounded to 8 bits). Identical to OpenCV's COLORMAP_INFERNO.
const std::array<Rgb8, 256>& inferno_table();

struct HeatmapRender {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> indices;  ///< table index per pixel
    std::vector<std::uint8_t> rgb;      ///< 3 bytes per pixel, row-major
};

/// Index for a normalized value: floor(v * 255 + 0.5) clamped to [0, 255].
std::uint8_t quantize_unit(double v);

/// normalize_saliency, quantize, then look up the inferno table.
HeatmapRender render_heatmap(const SaliencyMap& s);

void write_heatmap_png(const std::filesystem::path& path, const HeatmapRender& render,
                       const std::string& config_digest = {});

enum class CurveFormat { Csv, Json };

/// CSV: header `alpha,score` then one row per point with 17 significant
/// digits. JSON carries every curve field.
std::string export_curve(const PerturbationCurve& curve, CurveFormat format);

nlohmann::json to_json(const PerturbationCurve& curve);
PerturbationCurve curve_from_json(const nlohmann::json& j);

/// Distance traces, final distances, d_bar and the converged flag. The
/// per-run maps are written separately.
nlohmann::json to_json(const ConvergenceReport& report);

struct CorpusSummary {
    std::size_t total = 0;
    std::size_t converged = 0;
    double fraction = 0.0;
    std::vector<double> d_bars;
};

CorpusSummary corpus_convergence_summary(const std::vector<ConvergenceReport>& reports);

/// Same summary from (converged, d_bar) pairs, for corpora too large to keep
/// every report in memory.
CorpusSummary corpus_convergence_summary(const std::vector<std::pair<bool, double>>& outcomes);

nlohmann::json to_json(const CorpusSummary& summary);

/// `<stem>.<method>.<baseline-tag>.<metric>.<ext>`
std::string artifact_name(const std::string& stem, const std::string& method, const std::string& baseline_tag,
                          const std::string& metric, const std::string& ext);

}  // namespace perturbeval
