#include "fisens/experiments.hpp"

#include "fisens/errors.hpp"
#include "fisens/random.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include <omp.h>

namespace fisens {

namespace {

// Runs body(i) for i in [0, n) on the OpenMP team; the first exception is rethrown.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
    std::exception_ptr error;
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(fisens_parallel_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

template <typename Body>
void serial_for(std::size_t n, Body&& body) {
    for (std::size_t i = 0; i < n; ++i) body(i);
}

Objective objective_for(ObjectiveKind kind, int label) {
    if (kind == ObjectiveKind::PredictedLabel) return CrossEntropyPred{};
    if (label < 0) throw ValidationError("true-label objective needs a labelled sample");
    return CrossEntropyTrue{static_cast<std::size_t>(label)};
}

template <typename Loop>
std::vector<InfluenceRecord> score_dataset_with(Loop&& loop, const ClassifierModel& model,
                                                const LabeledDataset& data, const PerturbationTarget& target,
                                                ObjectiveKind kind, const MeasureSet& measures) {
    std::vector<InfluenceRecord> out(data.size());
    loop(data.size(), [&](std::size_t i) {
        out[i] = score_sample(model, data.images[i], data.ids[i], data.labels[i], target, kind, measures);
    });
    return out;
}

InfluenceRecord layer_record(std::size_t id, int label, const std::string& target, const TargetScores& ts,
                             std::size_t cls) {
    const FiResult r = fi_from_scores(ts, cls);
    InfluenceRecord rec;
    rec.sample_id = id;
    rec.target = target;
    rec.fi = r.value;
    rec.jacobian_norm = ts.scores.row(static_cast<Eigen::Index>(cls)).norm();
    rec.y_true = label;
    rec.y_pred = static_cast<int>(argmax(ts.probs));
    rec.p_pred = ts.probs[rec.y_pred];
    rec.residual_ratio = r.residual_ratio;
    rec.degenerate = r.degenerate;
    return rec;
}

template <typename Loop>
std::vector<InfluenceRecord> layer_scan_with(Loop&& loop, const ClassifierModel& model, const LabeledDataset& data,
                                             ObjectiveKind kind) {
    const std::size_t per_sample = model.layer_count() + 1;
    std::vector<InfluenceRecord> out(data.size() * per_sample);
    loop(data.size(), [&](std::size_t i) {
        const TargetScores all = target_scores(model, data.images[i], AllParams{});
        const std::size_t cls = objective_class(objective_for(kind, data.labels[i]), all.probs);
        for (std::size_t l = 0; l < model.layer_count(); ++l) {
            const TargetScores slice{all.probs,
                                     all.scores.middleCols(static_cast<Eigen::Index>(model.layer_param_offset(l)),
                                                           static_cast<Eigen::Index>(model.layer_param_count(l)))};
            out[i * per_sample + l] =
                layer_record(data.ids[i], data.labels[i], describe(LayerParams{l}), slice, cls);
        }
        out[i * per_sample + model.layer_count()] =
            layer_record(data.ids[i], data.labels[i], describe(AllParams{}), all, cls);
    });
    return out;
}

template <typename Loop>
PixelFiMap pixel_fi_map_with(Loop&& loop, const ClassifierModel& model, const Eigen::Ref<const Vector>& image,
                             const ImageShape& shape, const Objective& objective,
                             std::span<const std::size_t> scales, ChannelMode mode) {
    if (shape.size() != model.input_dim() || static_cast<std::size_t>(image.size()) != shape.size()) {
        throw DimensionError("image shape does not match the model input");
    }
    const LogProbGradients g = logprob_gradients(model, image, true, false);
    const std::size_t cls = objective_class(objective, g.probs);

    PixelFiMap map;
    map.shape = shape;
    map.mode = mode;
    for (const std::size_t k : scales) {
        InputPatch probe{0, 0, k, shape, std::nullopt};
        patch_indices(probe);  // validates the scale before any work
        DenseMatrix grid(static_cast<Eigen::Index>(shape.height), static_cast<Eigen::Index>(shape.width));
        loop(shape.pixels(), [&](std::size_t pixel) {
            InputPatch patch{pixel / shape.width, pixel % shape.width, k, shape, std::nullopt};
            double value = 0.0;
            if (mode == ChannelMode::PerChannel || shape.channels == 1) {
                value = fi_from_scores({g.probs, select_columns(g.input, patch_indices(patch))}, cls).value;
            } else {
                for (std::size_t c = 0; c < shape.channels; ++c) {
                    patch.channel = c;
                    value += fi_from_scores({g.probs, select_columns(g.input, patch_indices(patch))}, cls).value;
                }
                value /= static_cast<double>(shape.channels);
            }
            grid(static_cast<Eigen::Index>(patch.row), static_cast<Eigen::Index>(patch.col)) = value;
        });
        map.by_scale[k] = std::move(grid);
    }
    return map;
}

}  // namespace

Vector overlap_shifted(const Vector& a, const Vector& b, const ImageShape& shape, int dr, int dc) {
    if (static_cast<std::size_t>(a.size()) != shape.size() || static_cast<std::size_t>(b.size()) != shape.size()) {
        throw DimensionError("overlap_shifted: images do not match the shape");
    }
    Vector out = a;
    const auto h = static_cast<int>(shape.height);
    const auto w = static_cast<int>(shape.width);
    for (std::size_t c = 0; c < shape.channels; ++c) {
        for (int r = 0; r < h; ++r) {
            const int sr = r - dr;
            if (sr < 0 || sr >= h) continue;
            for (int col = 0; col < w; ++col) {
                const int sc = col - dc;
                if (sc < 0 || sc >= w) continue;
                const auto dst = static_cast<Eigen::Index>(shape.index(static_cast<std::size_t>(r),
                                                                       static_cast<std::size_t>(col), c));
                const auto src = static_cast<Eigen::Index>(shape.index(static_cast<std::size_t>(sr),
                                                                       static_cast<std::size_t>(sc), c));
                out[dst] = std::max(out[dst], b[src]);
            }
        }
    }
    return out;
}

OutlierSet simulate_outliers(const LabeledDataset& train, const OutlierSpec& spec, std::size_t first_id) {
    if (train.shape.channels != 1) throw ValidationError("simulate_outliers: expects single-channel images");
    if (spec.max_shift < 0) throw ValidationError("simulate_outliers: max_shift must be non-negative");

    std::map<int, std::size_t> per_class;
    for (const int y : train.labels) ++per_class[y];
    if (per_class.size() < 2) throw ValidationError("simulate_outliers: need at least two classes");
    const double n = static_cast<double>(train.size());
    double same = 0.0;
    for (const auto& [y, c] : per_class) same += static_cast<double>(c) * static_cast<double>(c);
    const double pairs = (n * n - same) / 2.0;
    if (static_cast<double>(spec.count) > pairs) {
        throw ValidationError("simulate_outliers: " + std::to_string(spec.count) +
                              " outliers requested but only " + std::to_string(static_cast<long long>(pairs)) +
                              " cross-class pairs exist");
    }

    Rng rng(spec.seed);
    OutlierSet out;
    out.data.shape = train.shape;
    for (std::size_t i = 0; i < spec.count; ++i) {
        OutlierProvenance p;
        p.id = first_id + i;
        p.source_a = static_cast<std::size_t>(rng.below(train.size()));
        do {
            p.source_b = static_cast<std::size_t>(rng.below(train.size()));
        } while (train.labels[p.source_b] == train.labels[p.source_a]);
        p.shift_row = static_cast<int>(rng.between(-spec.max_shift, spec.max_shift));
        p.shift_col = static_cast<int>(rng.between(-spec.max_shift, spec.max_shift));
        p.label_a = train.labels[p.source_a];
        p.label_b = train.labels[p.source_b];
        const int label = rng.below(2) == 0 ? p.label_a : p.label_b;

        out.data.images.push_back(overlap_shifted(train.images[p.source_a], train.images[p.source_b], train.shape,
                                                  p.shift_row, p.shift_col));
        out.data.labels.push_back(label);
        out.data.ids.push_back(p.id);
        out.provenance.push_back(p);
    }
    return out;
}

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b) {
    if (a.size() > 0 && b.size() > 0 && !(a.shape == b.shape)) throw DimensionError("concat: image shapes differ");
    LabeledDataset out = a;
    if (a.size() == 0) out.shape = b.shape;
    out.images.insert(out.images.end(), b.images.begin(), b.images.end());
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    out.ids.insert(out.ids.end(), b.ids.begin(), b.ids.end());
    return out;
}

InfluenceRecord score_sample(const ClassifierModel& model, const Eigen::Ref<const Vector>& x, std::size_t id,
                             int label, const PerturbationTarget& target, ObjectiveKind kind,
                             const MeasureSet& measures) {
    const Objective objective = objective_for(kind, label);
    const TargetScores ts = target_scores(model, x, target);
    const std::size_t cls = objective_class(objective, ts.probs);

    InfluenceRecord rec;
    rec.sample_id = id;
    rec.target = describe(target);
    rec.y_true = label;
    rec.y_pred = static_cast<int>(argmax(ts.probs));
    rec.p_pred = ts.probs[rec.y_pred];
    if (measures.fi) {
        const FiResult r = fi_from_scores(ts, cls);
        rec.fi = r.value;
        rec.residual_ratio = r.residual_ratio;
        rec.degenerate = r.degenerate;
    }
    if (measures.jacobian) rec.jacobian_norm = ts.scores.row(static_cast<Eigen::Index>(cls)).norm();
    if (measures.cook) {
        const Vector grad = -ts.scores.row(static_cast<Eigen::Index>(cls)).transpose();
        rec.cook_max = cook_max(grad, objective_hessian(model, x, target, objective));
    }
    return rec;
}

std::vector<InfluenceRecord> score_dataset(const ClassifierModel& model, const LabeledDataset& data,
                                           const PerturbationTarget& target, ObjectiveKind kind,
                                           const MeasureSet& measures) {
    return score_dataset_with([](std::size_t n, auto&& body) { parallel_for(n, body); }, model, data, target, kind,
                              measures);
}

LayerSensitivity layer_sensitivity(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                                   const Objective& objective) {
    const TargetScores all = target_scores(model, x, AllParams{});
    const std::size_t cls = objective_class(objective, all.probs);
    LayerSensitivity out;
    out.all_params = fi_from_scores(all, cls).value;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        const TargetScores slice{all.probs,
                                 all.scores.middleCols(static_cast<Eigen::Index>(model.layer_param_offset(l)),
                                                       static_cast<Eigen::Index>(model.layer_param_count(l)))};
        out.per_layer.push_back(fi_from_scores(slice, cls).value);
    }
    return out;
}

std::vector<InfluenceRecord> layer_scan(const ClassifierModel& model, const LabeledDataset& data,
                                        ObjectiveKind kind) {
    return layer_scan_with([](std::size_t n, auto&& body) { parallel_for(n, body); }, model, data, kind);
}

RocPr roc_pr(std::span<const double> scores, const std::vector<bool>& is_outlier) {
    if (scores.size() != is_outlier.size()) throw DimensionError("roc_pr: scores and labels differ in length");
    const auto positives = static_cast<std::size_t>(std::count(is_outlier.begin(), is_outlier.end(), true));
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) throw ValidationError("roc_pr: need both outliers and inliers");
    for (const double s : scores) {
        if (!std::isfinite(s)) throw ValidationError("roc_pr: non-finite score");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocPr out;
    out.roc.thresholds.push_back(std::numeric_limits<double>::infinity());
    out.roc.x.push_back(0.0);
    out.roc.y.push_back(0.0);

    const double pos = static_cast<double>(positives);
    const double neg = static_cast<double>(negatives);
    std::size_t tp = 0, fp = 0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        const double threshold = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == threshold; ++i) {
            if (is_outlier[order[i]]) ++tp; else ++fp;
        }
        const double tpr = static_cast<double>(tp) / pos;
        const double fpr = static_cast<double>(fp) / neg;
        out.roc.area += 0.5 * (fpr - out.roc.x.back()) * (tpr + out.roc.y.back());
        out.roc.thresholds.push_back(threshold);
        out.roc.x.push_back(fpr);
        out.roc.y.push_back(tpr);

        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        out.pr.area += (tpr - prev_recall) * precision;
        prev_recall = tpr;
        out.pr.thresholds.push_back(threshold);
        out.pr.x.push_back(tpr);
        out.pr.y.push_back(precision);
    }
    return out;
}

std::vector<PercentileRow> percentile_report(std::span<const double> scores, std::span<const double> percentiles) {
    if (scores.empty()) throw ValidationError("percentile_report: no scores");
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());

    std::vector<PercentileRow> out;
    for (const double q : percentiles) {
        if (!(q >= 0.0 && q <= 100.0)) {
            throw ValidationError("percentile " + std::to_string(q) + " outside [0, 100]");
        }
        const double rank = std::max(1.0, std::ceil(q / 100.0 * n));
        out.push_back({q, sorted[static_cast<std::size_t>(rank) - 1]});
    }
    return out;
}

PixelFiMap pixel_fi_map(const ClassifierModel& model, const Eigen::Ref<const Vector>& image,
                        const ImageShape& shape, const Objective& objective, std::span<const std::size_t> scales,
                        ChannelMode mode) {
    return pixel_fi_map_with([](std::size_t n, auto&& body) { parallel_for(n, body); }, model, image, shape,
                             objective, scales, mode);
}

std::vector<double> ValueGrid::candidates(double current) const {
    std::vector<double> out(absolute.begin(), absolute.end());
    for (const double o : offsets) out.push_back(std::clamp(current + o, 0.0, 1.0));
    for (const double v : out) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("attack values must lie in [0,1]");
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::pair<std::size_t, std::size_t> grid_argmax(const DenseMatrix& grid) {
    Eigen::Index br = 0, bc = 0;
    for (Eigen::Index r = 0; r < grid.rows(); ++r) {
        for (Eigen::Index c = 0; c < grid.cols(); ++c) {
            if (grid(r, c) > grid(br, bc)) {
                br = r;
                bc = c;
            }
        }
    }
    return {static_cast<std::size_t>(br), static_cast<std::size_t>(bc)};
}

AttackResult attack_pixel(const ClassifierModel& model, const Eigen::Ref<const Vector>& image,
                          const ImageShape& shape, std::size_t row, std::size_t col, const ValueGrid& grid) {
    if (static_cast<std::size_t>(image.size()) != shape.size()) throw DimensionError("image does not match shape");
    if (row >= shape.height || col >= shape.width) throw ValidationError("attack pixel outside the image");

    AttackResult out;
    out.row = row;
    out.col = col;
    out.probs_before = forward(model, image);
    out.y_pred = argmax(out.probs_before);
    out.p_before = out.probs_before[static_cast<Eigen::Index>(out.y_pred)];

    double current = 0.0;
    for (std::size_t c = 0; c < shape.channels; ++c) current += image[static_cast<Eigen::Index>(shape.index(row, col, c))];
    current /= static_cast<double>(shape.channels);
    out.original_value = current;

    bool found = false;
    Vector probe = image;
    for (const double v : grid.candidates(current)) {
        bool unchanged = true;
        for (std::size_t c = 0; c < shape.channels; ++c) {
            const auto idx = static_cast<Eigen::Index>(shape.index(row, col, c));
            unchanged = unchanged && image[idx] == v;
            probe[idx] = v;
        }
        if (unchanged) continue;
        out.tried.push_back(v);
        const Vector probs = forward(model, probe);
        const double p = probs[static_cast<Eigen::Index>(out.y_pred)];
        if (!found || p < out.p_after) {
            found = true;
            out.p_after = p;
            out.value = v;
            out.probs_after = probs;
            out.attacked = probe;
        }
    }
    if (!found) throw ValidationError("attack value grid offers no value that changes the pixel");
    out.y_pred_after = argmax(out.probs_after);
    return out;
}

AttackResult one_pixel_attack(const ClassifierModel& model, const Eigen::Ref<const Vector>& image,
                              const ImageShape& shape, const ValueGrid& grid) {
    const std::size_t unit[] = {1};
    const PixelFiMap map = pixel_fi_map(model, image, shape, CrossEntropyPred{}, unit, ChannelMode::Averaged);
    const auto [row, col] = grid_argmax(map.by_scale.at(1));
    return attack_pixel(model, image, shape, row, col, grid);
}

namespace reference {

std::vector<InfluenceRecord> score_dataset(const ClassifierModel& model, const LabeledDataset& data,
                                           const PerturbationTarget& target, ObjectiveKind kind,
                                           const MeasureSet& measures) {
    return score_dataset_with([](std::size_t n, auto&& body) { serial_for(n, body); }, model, data, target, kind,
                              measures);
}

std::vector<InfluenceRecord> layer_scan(const ClassifierModel& model, const LabeledDataset& data,
                                        ObjectiveKind kind) {
    return layer_scan_with([](std::size_t n, auto&& body) { serial_for(n, body); }, model, data, kind);
}

PixelFiMap pixel_fi_map(const ClassifierModel& model, const Eigen::Ref<const Vector>& image,
                        const ImageShape& shape, const Objective& objective, std::span<const std::size_t> scales,
                        ChannelMode mode) {
    return pixel_fi_map_with([](std::size_t n, auto&& body) { serial_for(n, body); }, model, image, shape,
                             objective, scales, mode);
}

}  // namespace reference

}  // namespace fisens
