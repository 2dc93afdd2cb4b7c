#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "perturbeval/baselines.hpp"
#include "perturbeval/classifier.hpp"
#include "perturbeval/masking.hpp"
#include "perturbeval/tensor.hpp"

namespace perturbeval {

enum class RiseNormalization {
    Scalar,             ///< divide by p * N
    EmpiricalPerPixel,  ///< divide by sum_i q(M_i)[u, v], falling back to p * N below 1e-9
};

struct RiseConfig {
    std::size_t num_masks = 16384;
    std::size_t cells_w = 7;
    std::size_t cells_h = 7;
    double p = 0.5;
    std::uint64_t seed = 0;
    BaselineSpec baseline = InvPreprocZeroBaseline{};
    std::optional<ClassId> target;  ///< empty: use argmax_class on the input
    RiseNormalization normalization = RiseNormalization::Scalar;
    std::size_t snapshot_interval = 128;
    bool random_crop = true;
    /// Masks per classifier call. Also fixes the reduction order, so it is
    /// part of the configuration rather than a tuning knob.
    std::size_t batch_size = 16;
};

/// Throws ParameterError if N, snapshot_interval or batch_size is zero, p is
/// outside [0, 1], or the baseline is invalid.
void validate(const RiseConfig& cfg);

nlohmann::json to_json(const RiseConfig& cfg);
RiseConfig rise_config_from_json(const nlohmann::json& j);

MaskParams mask_params(const RiseConfig& cfg, ImageShape image);

struct RunOptions {
    std::size_t jobs = 1;
    /// When false only the final snapshot is kept (distance traces are still
    /// computed by convergence_check).
    bool keep_snapshots = true;
};

struct Snapshot {
    std::size_t masks = 0;
    SaliencyMap map;
};

struct RiseResult {
    SaliencyMap saliency;  ///< raw accumulated map
    std::vector<Snapshot> snapshots;
    RiseConfig config;
    ClassId target = 0;
};

/// Incremental RISE accumulation.
///
/// S[u,v] = (1/norm) * sum_i f^c(Phi(x, A, q(M_i))) * q(M_i)[u,v].
///
/// Masks are processed in fixed segments whose boundaries are the multiples
/// of batch_size and of snapshot_interval. Segments are evaluated in
/// parallel and folded in ascending order, so the result is bit-identical for
/// any worker count.
class RiseEngine {
public:
    RiseEngine(const ImageTensor& x, const RiseConfig& cfg, const Classifier& h, std::size_t jobs = 1);
    ~RiseEngine();
    RiseEngine(RiseEngine&&) noexcept;
    RiseEngine& operator=(RiseEngine&&) noexcept;

    bool done() const;

    /// Accumulates masks up to the next snapshot boundary and returns the
    /// number of masks consumed so far.
    std::size_t advance();

    std::size_t masks_done() const;

    /// The normalized map over the masks consumed so far.
    SaliencyMap current() const;

    ClassId target() const;
    const RiseConfig& config() const;

private:
    struct State;
    std::unique_ptr<State> state_;
};

RiseResult generate_rise(const ImageTensor& x, const RiseConfig& cfg, const Classifier& h, const RunOptions& opts = {});

/// Exact expectation of the RISE estimator over all 2^(w*h) masks with
/// Bernoulli(p) cell weights and crop fixed at (0, 0).
SaliencyMap generate_rise_exact(const ImageTensor& x, const RiseConfig& cfg, const Classifier& h,
                                std::size_t jobs = 1);

struct ConvergenceOptions {
    double d_max = 2000.0;
    /// Measure distances between display-normalized maps instead of raw ones.
    bool normalized_distance = false;
};

struct DistancePoint {
    std::size_t masks = 0;
    double distance = 0.0;
};

struct DistanceTrace {
    std::size_t run_a = 0;
    std::size_t run_b = 0;
    std::vector<DistancePoint> points;
};

struct ConvergenceReport {
    std::array<RiseResult, 3> runs;
    std::array<std::uint64_t, 3> seeds{};
    std::vector<DistanceTrace> traces;  ///< pairs (0,1), (0,2), (1,2)
    std::array<double, 3> final_distances{};
    double d_bar = 0.0;
    double d_max = 0.0;
    bool converged = false;
};

/// Seeds base, base+1, base+2.
std::array<std::uint64_t, 3> derived_seeds(std::uint64_t base);

/// Three RISE runs with derived seeds; converged iff every final pairwise
/// distance is below d_max.
ConvergenceReport convergence_check(const ImageTensor& x, const RiseConfig& cfg, const Classifier& h,
                                    const ConvergenceOptions& conv, const RunOptions& opts = {});

/// As above with explicit per-run seeds (cfg.seed is ignored).
ConvergenceReport convergence_check(const ImageTensor& x, const RiseConfig& cfg, const Classifier& h,
                                    const ConvergenceOptions& conv, const std::array<std::uint64_t, 3>& seeds,
                                    const RunOptions& opts = {});

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> edges;  ///< bin_count + 1 edges
    std::vector<std::size_t> counts;
};

/// Equal-width bins over [min, max]; the maximum falls in the last bin.
Histogram histogram(const std::vector<double>& values, std::size_t bin_count);

/// Upper edge of the modal bin (ties go to the lower bin). A list whose
/// values are all equal returns that value.
double threshold_from_histogram(const std::vector<double>& d_bars, std::size_t bin_count);

}  // namespace perturbeval
