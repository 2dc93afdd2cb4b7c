#include "perturbeval/rise.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include "perturbeval/digest.hpp"
#include "perturbeval/error.hpp"
#include "perturbeval/parallel.hpp"

namespace perturbeval {

void validate(const RiseConfig& cfg) {
    if (cfg.num_masks == 0) throw ParameterError("RISE needs at least one mask");
    if (cfg.snapshot_interval == 0) throw ParameterError("snapshot interval must be at least 1");
    if (cfg.batch_size == 0) throw ParameterError("batch size must be at least 1");
    if (cfg.cells_w == 0 || cfg.cells_h == 0) throw ParameterError("mask cell counts must be positive");
    if (!(cfg.p >= 0.0 && cfg.p <= 1.0)) throw ParameterError("mask probability p must lie in [0, 1]");
    validate(cfg.baseline);
}

nlohmann::json to_json(const RiseConfig& cfg) {
    nlohmann::json j{
        {"N", cfg.num_masks},
        {"cells_w", cfg.cells_w},
        {"cells_h", cfg.cells_h},
        {"p", cfg.p},
        {"seed", cfg.seed},
        {"baseline", to_tag(cfg.baseline)},
        {"normalization", cfg.normalization == RiseNormalization::Scalar ? "scalar" : "empirical"},
        {"snapshot_interval", cfg.snapshot_interval},
        {"random_crop", cfg.random_crop},
        {"batch_size", cfg.batch_size},
    };
    j["target"] = cfg.target ? nlohmann::json(*cfg.target) : nlohmann::json("auto");
    return j;
}

RiseConfig rise_config_from_json(const nlohmann::json& j) {
    RiseConfig cfg;
    try {
        cfg.num_masks = j.at("N").get<std::size_t>();
        cfg.cells_w = j.at("cells_w").get<std::size_t>();
        cfg.cells_h = j.at("cells_h").get<std::size_t>();
        cfg.p = j.at("p").get<double>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.baseline = parse_baseline_spec(j.at("baseline").get<std::string>());
        const auto norm = j.at("normalization").get<std::string>();
        if (norm != "scalar" && norm != "empirical") throw ParameterError("unknown normalization '" + norm + "'");
        cfg.normalization = norm == "scalar" ? RiseNormalization::Scalar : RiseNormalization::EmpiricalPerPixel;
        cfg.snapshot_interval = j.at("snapshot_interval").get<std::size_t>();
        cfg.random_crop = j.at("random_crop").get<bool>();
        cfg.batch_size = j.at("batch_size").get<std::size_t>();
        const auto& t = j.at("target");
        if (t.is_number_unsigned()) cfg.target = t.get<ClassId>();
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("malformed RISE config: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

MaskParams mask_params(const RiseConfig& cfg, ImageShape image) {
    MaskParams p;
    p.count = cfg.num_masks;
    p.cells_w = cfg.cells_w;
    p.cells_h = cfg.cells_h;
    p.p = cfg.p;
    p.seed = cfg.seed;
    p.image = image;
    p.random_crop = cfg.random_crop;
    return p;
}

namespace {

ClassId resolve_target(const RiseConfig& cfg, const Classifier& h, const ImageTensor& x) {
    if (!cfg.target) return argmax_class(h, x);
    if (*cfg.target >= h.num_classes()) {
        throw ParameterError("target class " + std::to_string(*cfg.target) + " out of range for K = " +
                             std::to_string(h.num_classes()));
    }
    return *cfg.target;
}

double checked_score(const ProbabilityVector& p, ClassId c) {
    const double f = p[c];
    if (!std::isfinite(f)) throw DataError("classifier returned a non-finite score for class " + std::to_string(c));
    return f;
}

struct Sums {
    std::vector<double> fq;
    std::vector<double> q;  // only filled for per-pixel normalization
};

// Normalizes accumulated sums over `count` masks.
std::vector<double> normalize_sums(const Sums& sums, std::size_t count, double p, RiseNormalization norm) {
    const double scalar = p * static_cast<double>(count);
    std::vector<double> out(sums.fq.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (norm == RiseNormalization::EmpiricalPerPixel && sums.q[i] >= 1e-9) {
            out[i] = sums.fq[i] / sums.q[i];
        } else {
            out[i] = scalar > 0.0 ? sums.fq[i] / scalar : 0.0;
        }
    }
    return out;
}

}  // namespace

struct RiseEngine::State {
    const ImageTensor* x;
    RiseConfig cfg;
    const Classifier* h;
    std::size_t jobs;
    ClassId target;
    ImageTensor baseline;
    MaskParams params;
    std::vector<std::pair<std::size_t, std::size_t>> segments;
    std::size_t next_segment = 0;
    std::size_t done = 0;
    Sums sums;
    std::mutex dispatch;

    Sums eval_segment(std::size_t begin, std::size_t end) {
        const ImageShape shape = x->shape();
        std::vector<UpsampledMask> masks;
        std::vector<ImageTensor> images;
        masks.reserve(end - begin);
        images.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
            const auto sm = sample_mask(params, i);
            masks.push_back(upsample_and_crop(sm.mask, shape, sm.offset));
            images.push_back(apply_baseline(*x, baseline, masks.back()));
        }
        std::vector<ProbabilityVector> probs;
        if (h->concurrent_safe()) {
            probs = h->predict_batch(images);
        } else {
            std::lock_guard lock(dispatch);
            probs = h->predict_batch(images);
        }
        const bool empirical = cfg.normalization == RiseNormalization::EmpiricalPerPixel;
        Sums out{std::vector<double>(shape.pixels(), 0.0), {}};
        if (empirical) out.q.assign(shape.pixels(), 0.0);
        for (std::size_t k = 0; k < masks.size(); ++k) {
            const double f = checked_score(probs[k], target);
            const auto q = masks[k].values();
            for (std::size_t px = 0; px < q.size(); ++px) out.fq[px] += f * q[px];
            if (empirical) {
                for (std::size_t px = 0; px < q.size(); ++px) out.q[px] += q[px];
            }
        }
        return out;
    }

    void fold(const Sums& seg) {
        for (std::size_t px = 0; px < sums.fq.size(); ++px) sums.fq[px] += seg.fq[px];
        for (std::size_t px = 0; px < sums.q.size(); ++px) sums.q[px] += seg.q[px];
    }
};

RiseEngine::RiseEngine(const ImageTensor& x, const RiseConfig& cfg, const Classifier& h, std::size_t jobs)
    : state_(std::make_unique<State>()) {
    validate(cfg);
    if (x.shape() != h.input_shape()) {
        throw DimensionError("input " + to_string(x.shape()) + " does not match classifier input " +
                             to_string(h.input_shape()));
    }
    auto& s = *state_;
    s.x = &x;
    s.cfg = cfg;
    s.h = &h;
    s.jobs = std::max<std::size_t>(jobs, 1);
    s.target = resolve_target(cfg, h, x);
    s.baseline = make_baseline(cfg.baseline, h.preprocessor(), x).image;
    s.params = mask_params(cfg, x.shape());
    validate(s.params);

    std::set<std::size_t> bounds{cfg.num_masks};
    for (std::size_t b = cfg.batch_size; b < cfg.num_masks; b += cfg.batch_size) bounds.insert(b);
    for (std::size_t b = cfg.snapshot_interval; b < cfg.num_masks; b += cfg.snapshot_interval) bounds.insert(b);
    std::size_t begin = 0;
    for (std::size_t end : bounds) {
        s.segments.emplace_back(begin, end);
        begin = end;
    }
    s.sums.fq.assign(x.shape().pixels(), 0.0);
    if (cfg.normalization == RiseNormalization::EmpiricalPerPixel) s.sums.q.assign(x.shape().pixels(), 0.0);
}

RiseEngine::~RiseEngine() = default;
RiseEngine::RiseEngine(RiseEngine&&) noexcept = default;
RiseEngine& RiseEngine::operator=(RiseEngine&&) noexcept = default;

bool RiseEngine::done() const { return state_->done == state_->cfg.num_masks; }

std::size_t RiseEngine::advance() {
    auto& s = *state_;
    if (done()) return s.done;
    // segments up to and including the next snapshot boundary
    std::size_t last = s.next_segment;
    while (last < s.segments.size()) {
        const std::size_t end = s.segments[last].second;
        ++last;
        if (end % s.cfg.snapshot_interval == 0 || end == s.cfg.num_masks) break;
    }
    const std::size_t wave = 4 * s.jobs;
    while (s.next_segment < last) {
        const std::size_t first = s.next_segment;
        const std::size_t count = std::min(wave, last - first);
        std::vector<Sums> partial(count);
        parallel_for(count, s.jobs, [&](std::size_t k) {
            const auto [b, e] = s.segments[first + k];
            partial[k] = s.eval_segment(b, e);
        });
        for (const auto& seg : partial) s.fold(seg);
        s.next_segment += count;
    }
    s.done = s.segments[last - 1].second;
    return s.done;
}

std::size_t RiseEngine::masks_done() const { return state_->done; }

SaliencyMap RiseEngine::current() const {
    const auto& s = *state_;
    SaliencyMeta meta{"rise", config_digest(to_json(s.cfg)), static_cast<long>(s.target)};
    return SaliencyMap(s.x->height(), s.x->width(), normalize_sums(s.sums, s.done, s.cfg.p, s.cfg.normalization),
                       std::move(meta));
}

ClassId RiseEngine::target() const { return state_->target; }
const RiseConfig& RiseEngine::config() const { return state_->cfg; }

RiseResult generate_rise(const ImageTensor& x, const RiseConfig& cfg, const Classifier& h, const RunOptions& opts) {
    RiseEngine engine(x, cfg, h, opts.jobs);
    RiseResult result;
    result.config = cfg;
    result.target = engine.target();
    while (!engine.done()) {
        const std::size_t n = engine.advance();
        if (opts.keep_snapshots || engine.done()) result.snapshots.push_back({n, engine.current()});
    }
    result.saliency = result.snapshots.back().map;
    return result;
}

SaliencyMap generate_rise_exact(const ImageTensor& x, const RiseConfig& cfg, const Classifier& h, std::size_t jobs) {
    validate(cfg);
    if (x.shape() != h.input_shape()) throw DimensionError("input does not match classifier input shape");
    const auto masks = enumerate_all_masks(cfg.cells_w, cfg.cells_h);
    const ClassId target = resolve_target(cfg, h, x);
    const ImageTensor baseline = make_baseline(cfg.baseline, h.preprocessor(), x).image;
    const std::size_t cells = cfg.cells_w * cfg.cells_h;
    const std::size_t pixels = x.shape().pixels();

    constexpr std::size_t kChunk = 256;
    const std::size_t chunks = (masks.size() + kChunk - 1) / kChunk;
    std::vector<Sums> partial(chunks);
    std::mutex dispatch;
    parallel_for(chunks, jobs, [&](std::size_t k) {
        const std::size_t begin = k * kChunk;
        const std::size_t end = std::min(masks.size(), begin + kChunk);
        std::vector<UpsampledMask> qs;
        std::vector<ImageTensor> images;
        for (std::size_t i = begin; i < end; ++i) {
            qs.push_back(upsample_and_crop(masks[i], x.shape(), {0, 0}));
            images.push_back(apply_baseline(x, baseline, qs.back()));
        }
        std::vector<ProbabilityVector> probs;
        if (h.concurrent_safe()) {
            probs = h.predict_batch(images);
        } else {
            std::lock_guard lock(dispatch);
            probs = h.predict_batch(images);
        }
        Sums out{std::vector<double>(pixels, 0.0), std::vector<double>(pixels, 0.0)};
        for (std::size_t i = begin; i < end; ++i) {
            const std::size_t on = masks[i].count_on();
            const double weight = std::pow(cfg.p, static_cast<double>(on)) *
                                  std::pow(1.0 - cfg.p, static_cast<double>(cells - on));
            const double f = checked_score(probs[i - begin], target);
            const auto q = qs[i - begin].values();
            for (std::size_t px = 0; px < pixels; ++px) {
                out.fq[px] += weight * f * q[px];
                out.q[px] += weight * q[px];
            }
        }
        partial[k] = std::move(out);
    });
    Sums total{std::vector<double>(pixels, 0.0), std::vector<double>(pixels, 0.0)};
    for (const auto& s : partial) {
        for (std::size_t px = 0; px < pixels; ++px) {
            total.fq[px] += s.fq[px];
            total.q[px] += s.q[px];
        }
    }
    // Expectations are per mask, so "count" is 1.
    SaliencyMeta meta{"rise-exact", config_digest(to_json(cfg)), static_cast<long>(target)};
    return SaliencyMap(x.height(), x.width(), normalize_sums(total, 1, cfg.p, cfg.normalization), std::move(meta));
}

std::array<std::uint64_t, 3> derived_seeds(std::uint64_t base) { return {base, base + 1, base + 2}; }

ConvergenceReport convergence_check(const ImageTensor& x, const RiseConfig& cfg, const Classifier& h,
                                    const ConvergenceOptions& conv, const RunOptions& opts) {
    return convergence_check(x, cfg, h, conv, derived_seeds(cfg.seed), opts);
}

ConvergenceReport convergence_check(const ImageTensor& x, const RiseConfig& cfg, const Classifier& h,
                                    const ConvergenceOptions& conv, const std::array<std::uint64_t, 3>& seeds,
                                    const RunOptions& opts) {
    if (!(conv.d_max > 0.0)) throw ParameterError("d_max must be positive");
    ConvergenceReport report;
    report.seeds = seeds;
    report.d_max = conv.d_max;
    report.traces = {{0, 1, {}}, {0, 2, {}}, {1, 2, {}}};

    std::vector<RiseEngine> engines;
    for (std::size_t r = 0; r < 3; ++r) {
        RiseConfig run_cfg = cfg;
        run_cfg.seed = seeds[r];
        engines.emplace_back(x, run_cfg, h, opts.jobs);
        report.runs[r].config = run_cfg;
        report.runs[r].target = engines.back().target();
    }
    const auto distance = [&](const SaliencyMap& a, const SaliencyMap& b) {
        return conv.normalized_distance ? saliency_l2_distance(normalize_saliency(a), normalize_saliency(b))
                                        : saliency_l2_distance(a, b);
    };
    while (!engines[0].done()) {
        std::array<SaliencyMap, 3> maps;
        std::size_t n = 0;
        for (std::size_t r = 0; r < 3; ++r) {
            n = engines[r].advance();
            maps[r] = engines[r].current();
            if (opts.keep_snapshots || engines[r].done()) report.runs[r].snapshots.push_back({n, maps[r]});
        }
        for (auto& trace : report.traces) trace.points.push_back({n, distance(maps[trace.run_a], maps[trace.run_b])});
    }
    double sum = 0.0;
    report.converged = true;
    for (std::size_t k = 0; k < 3; ++k) {
        report.runs[k].saliency = report.runs[k].snapshots.back().map;
        report.final_distances[k] = report.traces[k].points.back().distance;
        sum += report.final_distances[k];
        report.converged = report.converged && report.final_distances[k] < conv.d_max;
    }
    report.d_bar = sum / 3.0;
    return report;
}

Histogram histogram(const std::vector<double>& values, std::size_t bin_count) {
    if (values.empty()) throw ParameterError("histogram of an empty list");
    if (bin_count == 0) throw ParameterError("histogram needs at least one bin");
    for (double v : values) {
        if (!std::isfinite(v)) throw ParameterError("histogram values must be finite");
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    Histogram h{*lo_it, *hi_it, {}, std::vector<std::size_t>(bin_count, 0)};
    if (!(h.hi > h.lo)) {
        h.edges.assign(bin_count + 1, h.lo);
        h.counts[0] = values.size();
        return h;
    }
    const double width = (h.hi - h.lo) / static_cast<double>(bin_count);
    for (std::size_t k = 0; k < bin_count; ++k) h.edges.push_back(h.lo + static_cast<double>(k) * width);
    h.edges.push_back(h.hi);
    for (double v : values) {
        auto k = static_cast<std::size_t>(std::floor((v - h.lo) / width));
        k = std::min(k, bin_count - 1);
        ++h.counts[k];
    }
    return h;
}

double threshold_from_histogram(const std::vector<double>& d_bars, std::size_t bin_count) {
    const Histogram h = histogram(d_bars, bin_count);
    if (!(h.hi > h.lo)) return h.lo;
    const auto modal = std::distance(h.counts.begin(), std::max_element(h.counts.begin(), h.counts.end()));
    return h.edges[static_cast<std::size_t>(modal) + 1];
}

}  // namespace perturbeval
