#pragma once

#include "fisens/classifier.hpp"
#include "fisens/influence.hpp"
#include "fisens/manifold.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace fisens {

// ---------------------------------------------------------------------------
// Synthetic outliers: two digits of different classes overlapped by pixel-wise
// max after shifting the second one, labelled with either source class.

struct OutlierSpec {
    std::size_t count = 0;
    int max_shift = 4;
    std::uint64_t seed = 0;
};

struct OutlierProvenance {
    std::size_t id = 0;
    std::size_t source_a = 0;  // dataset positions of the two digits
    std::size_t source_b = 0;
    int shift_row = 0;  // applied to source_b
    int shift_col = 0;
    int label_a = 0;
    int label_b = 0;
};

struct OutlierSet {
    LabeledDataset data;
    std::vector<OutlierProvenance> provenance;
};

// max(a, b shifted by (dr, dc)); vacated pixels of the shifted image are zero.
Vector overlap_shifted(const Vector& a, const Vector& b, const ImageShape& shape, int dr, int dc);

// Outlier ids start at `first_id`. Throws ValidationError if `count` exceeds the
// number of cross-class pairs or the set has fewer than two classes.
OutlierSet simulate_outliers(const LabeledDataset& train, const OutlierSpec& spec, std::size_t first_id);

// Concatenation with ids preserved.
LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b);

// ---------------------------------------------------------------------------
// Batch scoring.

enum class ObjectiveKind { TrueLabel, PredictedLabel };

struct MeasureSet {
    bool fi = true;
    bool jacobian = false;
    bool cook = false;
};

InfluenceRecord score_sample(const ClassifierModel& model, const Eigen::Ref<const Vector>& x, std::size_t id,
                             int label, const PerturbationTarget& target, ObjectiveKind kind,
                             const MeasureSet& measures);

/// One record per sample, ordered as the dataset. Parallel over samples.
std::vector<InfluenceRecord> score_dataset(const ClassifierModel& model, const LabeledDataset& data,
                                           const PerturbationTarget& target, ObjectiveKind kind,
                                           const MeasureSet& measures);

struct LayerSensitivity {
    std::vector<double> per_layer;
    double all_params = 0.0;
};

// FI of every trainable layer and of all parameters, sharing one backward pass.
LayerSensitivity layer_sensitivity(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                                   const Objective& objective);

/// Per sample: one record per layer ("layer:l") followed by one for "params".
/// Parallel over samples.
std::vector<InfluenceRecord> layer_scan(const ClassifierModel& model, const LabeledDataset& data,
                                        ObjectiveKind kind);

// ---------------------------------------------------------------------------
// Ranking evaluation. Larger scores mean more outlier-like.

struct ScoredCurve {
    std::vector<double> thresholds;
    std::vector<double> x;  // false-positive rate (ROC) or recall (PR)
    std::vector<double> y;  // true-positive rate (ROC) or precision (PR)
    double area = 0.0;
};

struct RocPr {
    ScoredCurve roc;  // trapezoidal area
    ScoredCurve pr;   // average precision: Σ (R_i − R_{i−1}) P_i
};

RocPr roc_pr(std::span<const double> scores, const std::vector<bool>& is_outlier);

struct PercentileRow {
    double percentile = 0.0;
    double value = 0.0;
};

// Nearest-rank percentiles: the ⌈q/100 · n⌉-th smallest score (at least the first).
std::vector<PercentileRow> percentile_report(std::span<const double> scores, std::span<const double> percentiles);

// ---------------------------------------------------------------------------
// Pixel-level maps and one-pixel attacks.

enum class ChannelMode {
    PerChannel,  // all channels of the window perturbed together
    Averaged,    // FI per single channel, averaged across channels
};

struct PixelFiMap {
    ImageShape shape;
    ChannelMode mode = ChannelMode::PerChannel;
    std::map<std::size_t, DenseMatrix> by_scale;  // height × width grid per scale
};

/// map[k](r, c) = FI for the k × k patch centred on (r, c). Parallel over pixels.
PixelFiMap pixel_fi_map(const ClassifierModel& model, const Eigen::Ref<const Vector>& image,
                        const ImageShape& shape, const Objective& objective, std::span<const std::size_t> scales,
                        ChannelMode mode);

// Candidate replacement values: fixed ones plus offsets from the current pixel value, clipped to [0,1].
struct ValueGrid {
    std::vector<double> absolute{0.0, 1.0};
    std::vector<double> offsets{-0.5, 0.5};

    // Sorted distinct candidates for a pixel whose channels average to `current`.
    std::vector<double> candidates(double current) const;
};

struct AttackResult {
    Vector attacked;
    std::size_t row = 0;
    std::size_t col = 0;
    double original_value = 0.0;  // channel mean before the attack
    double value = 0.0;           // written to every channel of the pixel
    std::size_t y_pred = 0;       // prediction before the attack
    std::size_t y_pred_after = 0;
    double p_before = 0.0;        // P(y_pred) before and after
    double p_after = 0.0;
    Vector probs_before;
    Vector probs_after;
    std::vector<double> tried;
};

// Best candidate (minimum P(y_pred)) at a fixed pixel; candidates leaving the pixel unchanged are skipped.
AttackResult attack_pixel(const ClassifierModel& model, const Eigen::Ref<const Vector>& image,
                          const ImageShape& shape, std::size_t row, std::size_t col, const ValueGrid& grid);

/// Attacks the argmax (row-major tie-break) of the scale-1 FI map under the
/// predicted-label objective, channel-averaged for multi-channel images.
AttackResult one_pixel_attack(const ClassifierModel& model, const Eigen::Ref<const Vector>& image,
                              const ImageShape& shape, const ValueGrid& grid = {});

// Row-major argmax; the first maximum wins.
std::pair<std::size_t, std::size_t> grid_argmax(const DenseMatrix& grid);

// ---------------------------------------------------------------------------
// Serial versions of the parallel kernels. Results are bit-identical; kept as
// the baseline for tests and the benchmark.
namespace reference {

std::vector<InfluenceRecord> score_dataset(const ClassifierModel& model, const LabeledDataset& data,
                                           const PerturbationTarget& target, ObjectiveKind kind,
                                           const MeasureSet& measures);

std::vector<InfluenceRecord> layer_scan(const ClassifierModel& model, const LabeledDataset& data,
                                        ObjectiveKind kind);

PixelFiMap pixel_fi_map(const ClassifierModel& model, const Eigen::Ref<const Vector>& image,
                        const ImageShape& shape, const Objective& objective, std::span<const std::size_t> scales,
                        ChannelMode mode);

}  // namespace reference

}  // namespace fisens
