#include "perturbeval/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "perturbeval/error.hpp"
#include "perturbeval/io.hpp"

namespace perturbeval {

namespace {

constexpr std::array<Rgb8, 256> kInferno = {{
    {0, 0, 4}, {1, 0, 5}, {1, 1, 6}, {1, 1, 8},
    {2, 1, 10}, {2, 2, 12}, {2, 2, 14}, {3, 2, 16},
    {4, 3, 18}, {4, 3, 20}, {5, 4, 23}, {6, 4, 25},
    {7, 5, 27}, {8, 5, 29}, {9, 6, 31}, {10, 7, 34},
    {11, 7, 36}, {12, 8, 38}, {13, 8, 41}, {14, 9, 43},
    {16, 9, 45}, {17, 10, 48}, {18, 10, 50}, {20, 11, 52},
    {21, 11, 55}, {22, 11, 57}, {24, 12, 60}, {25, 12, 62},
    {27, 12, 65}, {28, 12, 67}, {30, 12, 69}, {31, 12, 72},
    {33, 12, 74}, {35, 12, 76}, {36, 12, 79}, {38, 12, 81},
    {40, 11, 83}, {41, 11, 85}, {43, 11, 87}, {45, 11, 89},
    {47, 10, 91}, {49, 10, 92}, {50, 10, 94}, {52, 10, 95},
    {54, 9, 97}, {56, 9, 98}, {57, 9, 99}, {59, 9, 100},
    {61, 9, 101}, {62, 9, 102}, {64, 10, 103}, {66, 10, 104},
    {68, 10, 104}, {69, 10, 105}, {71, 11, 106}, {73, 11, 106},
    {74, 12, 107}, {76, 12, 107}, {77, 13, 108}, {79, 13, 108},
    {81, 14, 108}, {82, 14, 109}, {84, 15, 109}, {85, 15, 109},
    {87, 16, 110}, {89, 16, 110}, {90, 17, 110}, {92, 18, 110},
    {93, 18, 110}, {95, 19, 110}, {97, 19, 110}, {98, 20, 110},
    {100, 21, 110}, {101, 21, 110}, {103, 22, 110}, {105, 22, 110},
    {106, 23, 110}, {108, 24, 110}, {109, 24, 110}, {111, 25, 110},
    {113, 25, 110}, {114, 26, 110}, {116, 26, 110}, {117, 27, 110},
    {119, 28, 109}, {120, 28, 109}, {122, 29, 109}, {124, 29, 109},
    {125, 30, 109}, {127, 30, 108}, {128, 31, 108}, {130, 32, 108},
    {132, 32, 107}, {133, 33, 107}, {135, 33, 107}, {136, 34, 106},
    {138, 34, 106}, {140, 35, 105}, {141, 35, 105}, {143, 36, 105},
    {144, 37, 104}, {146, 37, 104}, {147, 38, 103}, {149, 38, 103},
    {151, 39, 102}, {152, 39, 102}, {154, 40, 101}, {155, 41, 100},
    {157, 41, 100}, {159, 42, 99}, {160, 42, 99}, {162, 43, 98},
    {163, 44, 97}, {165, 44, 96}, {166, 45, 96}, {168, 46, 95},
    {169, 46, 94}, {171, 47, 94}, {173, 48, 93}, {174, 48, 92},
    {176, 49, 91}, {177, 50, 90}, {179, 50, 90}, {180, 51, 89},
    {182, 52, 88}, {183, 53, 87}, {185, 53, 86}, {186, 54, 85},
    {188, 55, 84}, {189, 56, 83}, {191, 57, 82}, {192, 58, 81},
    {193, 58, 80}, {195, 59, 79}, {196, 60, 78}, {198, 61, 77},
    {199, 62, 76}, {200, 63, 75}, {202, 64, 74}, {203, 65, 73},
    {204, 66, 72}, {206, 67, 71}, {207, 68, 70}, {208, 69, 69},
    {210, 70, 68}, {211, 71, 67}, {212, 72, 66}, {213, 74, 65},
    {215, 75, 63}, {216, 76, 62}, {217, 77, 61}, {218, 78, 60},
    {219, 80, 59}, {221, 81, 58}, {222, 82, 56}, {223, 83, 55},
    {224, 85, 54}, {225, 86, 53}, {226, 87, 52}, {227, 89, 51},
    {228, 90, 49}, {229, 92, 48}, {230, 93, 47}, {231, 94, 46},
    {232, 96, 45}, {233, 97, 43}, {234, 99, 42}, {235, 100, 41},
    {235, 102, 40}, {236, 103, 38}, {237, 105, 37}, {238, 106, 36},
    {239, 108, 35}, {239, 110, 33}, {240, 111, 32}, {241, 113, 31},
    {241, 115, 29}, {242, 116, 28}, {243, 118, 27}, {243, 120, 25},
    {244, 121, 24}, {245, 123, 23}, {245, 125, 21}, {246, 126, 20},
    {246, 128, 19}, {247, 130, 18}, {247, 132, 16}, {248, 133, 15},
    {248, 135, 14}, {248, 137, 12}, {249, 139, 11}, {249, 140, 10},
    {249, 142, 9}, {250, 144, 8}, {250, 146, 7}, {250, 148, 7},
    {251, 150, 6}, {251, 151, 6}, {251, 153, 6}, {251, 155, 6},
    {251, 157, 7}, {252, 159, 7}, {252, 161, 8}, {252, 163, 9},
    {252, 165, 10}, {252, 166, 12}, {252, 168, 13}, {252, 170, 15},
    {252, 172, 17}, {252, 174, 18}, {252, 176, 20}, {252, 178, 22},
    {252, 180, 24}, {251, 182, 26}, {251, 184, 29}, {251, 186, 31},
    {251, 188, 33}, {251, 190, 35}, {250, 192, 38}, {250, 194, 40},
    {250, 196, 42}, {250, 198, 45}, {249, 199, 47}, {249, 201, 50},
    {249, 203, 53}, {248, 205, 55}, {248, 207, 58}, {247, 209, 61},
    {247, 211, 64}, {246, 213, 67}, {246, 215, 70}, {245, 217, 73},
    {245, 219, 76}, {244, 221, 79}, {244, 223, 83}, {244, 225, 86},
    {243, 227, 90}, {243, 229, 93}, {242, 230, 97}, {242, 232, 101},
    {242, 234, 105}, {241, 236, 109}, {241, 237, 113}, {241, 239, 117},
    {241, 241, 121}, {242, 242, 125}, {242, 244, 130}, {243, 245, 134},
    {243, 246, 138}, {244, 248, 142}, {245, 249, 146}, {246, 250, 150},
    {248, 251, 154}, {249, 252, 157}, {250, 253, 161}, {252, 255, 164},
}};

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

const std::array<Rgb8, 256>& inferno_table() { return kInferno; }

std::uint8_t quantize_unit(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::floor(v * 255.0 + 0.5), 0.0, 255.0));
}

HeatmapRender render_heatmap(const SaliencyMap& s) {
    s.check_finite();
    const SaliencyMap unit = normalize_saliency(s);
    HeatmapRender out{s.width(), s.height(), {}, {}};
    out.indices.reserve(s.size());
    out.rgb.reserve(3 * s.size());
    for (double v : unit.values()) {
        const std::uint8_t idx = quantize_unit(v);
        out.indices.push_back(idx);
        out.rgb.insert(out.rgb.end(), kInferno[idx].begin(), kInferno[idx].end());
    }
    return out;
}

void write_heatmap_png(const std::filesystem::path& path, const HeatmapRender& render,
                       const std::string& config_digest) {
    io::PngText text;
    if (!config_digest.empty()) text["perturbeval:config-digest"] = config_digest;
    io::write_png_rgb8(path, render.height, render.width, render.rgb, text);
}

nlohmann::json to_json(const PerturbationCurve& curve) {
    return {
        {"metric", to_string(curve.metric)},
        {"baseline", to_tag(curve.baseline)},
        {"target", curve.target},
        {"r", curve.pixels_per_step},
        {"alpha", curve.alphas},
        {"score", curve.scores},
    };
}

PerturbationCurve curve_from_json(const nlohmann::json& j) {
    try {
        PerturbationCurve c;
        c.metric = parse_metric(j.at("metric").get<std::string>());
        c.baseline = parse_baseline_spec(j.at("baseline").get<std::string>());
        c.target = j.at("target").get<ClassId>();
        c.pixels_per_step = j.at("r").get<std::size_t>();
        c.alphas = j.at("alpha").get<std::vector<double>>();
        c.scores = j.at("score").get<std::vector<double>>();
        if (c.alphas.size() != c.scores.size()) throw ParameterError("curve alpha and score lengths differ");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed curve JSON: ") + e.what());
    }
}

std::string export_curve(const PerturbationCurve& curve, CurveFormat format) {
    if (curve.scores.empty()) throw ParameterError("cannot export an empty curve");
    if (format == CurveFormat::Json) return to_json(curve).dump(1) + "\n";
    std::string out = "alpha,score\n";
    for (std::size_t k = 0; k < curve.scores.size(); ++k) {
        out += format_g17(curve.alphas[k]);
        out += ',';
        out += format_g17(curve.scores[k]);
        out += '\n';
    }
    return out;
}

nlohmann::json to_json(const ConvergenceReport& report) {
    nlohmann::json traces = nlohmann::json::array();
    for (const auto& t : report.traces) {
        nlohmann::json masks = nlohmann::json::array();
        nlohmann::json dist = nlohmann::json::array();
        for (const auto& p : t.points) {
            masks.push_back(p.masks);
            dist.push_back(p.distance);
        }
        traces.push_back({{"pair", {t.run_a, t.run_b}}, {"masks", std::move(masks)}, {"distance", std::move(dist)}});
    }
    nlohmann::json runs = nlohmann::json::array();
    for (std::size_t r = 0; r < 3; ++r) {
        runs.push_back({{"seed", report.seeds[r]}, {"target", report.runs[r].target}});
    }
    return {
        {"runs", std::move(runs)},
        {"traces", std::move(traces)},
        {"final_distances", report.final_distances},
        {"d_bar", report.d_bar},
        {"d_max", report.d_max},
        {"converged", report.converged},
        {"rise", to_json(report.runs[0].config)},
    };
}

CorpusSummary corpus_convergence_summary(const std::vector<std::pair<bool, double>>& outcomes) {
    if (outcomes.empty()) throw ParameterError("corpus summary needs at least one report");
    CorpusSummary s;
    s.total = outcomes.size();
    for (const auto& [converged, d_bar] : outcomes) {
        if (converged) ++s.converged;
        s.d_bars.push_back(d_bar);
    }
    s.fraction = static_cast<double>(s.converged) / static_cast<double>(s.total);
    return s;
}

CorpusSummary corpus_convergence_summary(const std::vector<ConvergenceReport>& reports) {
    std::vector<std::pair<bool, double>> outcomes;
    outcomes.reserve(reports.size());
    for (const auto& r : reports) outcomes.emplace_back(r.converged, r.d_bar);
    return corpus_convergence_summary(outcomes);
}

nlohmann::json to_json(const CorpusSummary& s) {
    return {{"total", s.total}, {"converged", s.converged}, {"fraction", s.fraction}, {"d_bars", s.d_bars}};
}

std::string artifact_name(const std::string& stem, const std::string& method, const std::string& baseline_tag,
                          const std::string& metric, const std::string& ext) {
    return stem + "." + method + "." + baseline_tag + "." + metric + "." + ext;
}

}  // namespace perturbeval
