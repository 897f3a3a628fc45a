#include "fisens/errors.hpp"
#include "fisens/experiments.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <omp.h>

#include <cmath>
#include <set>

using namespace fisens;
using namespace fisens::testing;

namespace {

LabeledDataset random_images(std::size_t n, const ImageShape& shape, std::size_t classes, std::uint64_t seed) {
    Rng rng(seed);
    LabeledDataset d;
    d.shape = shape;
    for (std::size_t i = 0; i < n; ++i) {
        d.images.push_back(random_vector(rng, static_cast<Eigen::Index>(shape.size())));
        d.labels.push_back(static_cast<int>(i % classes));
        d.ids.push_back(100 + i);
    }
    return d;
}

}  // namespace

TEST(Outliers, OverlapIdempotentAndShifted) {
    const ImageShape s{3, 3, 1};
    Rng rng(1);
    const Vector a = random_vector(rng, 9);
    EXPECT_EQ(overlap_shifted(a, a, s, 0, 0), a);
    Vector b = Vector::Zero(9);
    b(0) = 1.0;
    const Vector out = overlap_shifted(Vector::Zero(9), b, s, 1, 2);
    EXPECT_EQ(out(s.index(1, 2)), 1.0);
    EXPECT_EQ(out.sum(), 1.0);
    EXPECT_EQ(overlap_shifted(Vector::Zero(9), b, s, 3, 0).sum(), 0.0);
}

TEST(Outliers, SimulatedSetHonoursSpec) {
    const LabeledDataset train = random_images(40, {6, 6, 1}, 4, 3);
    const OutlierSet set = simulate_outliers(train, {25, 2, 9}, 1000);
    ASSERT_EQ(set.data.size(), 25u);
    ASSERT_EQ(set.provenance.size(), 25u);
    for (std::size_t i = 0; i < 25; ++i) {
        const auto& p = set.provenance[i];
        EXPECT_EQ(set.data.ids[i], 1000 + i);
        EXPECT_EQ(p.id, 1000 + i);
        EXPECT_NE(p.label_a, p.label_b);
        EXPECT_EQ(train.labels[p.source_a], p.label_a);
        EXPECT_EQ(train.labels[p.source_b], p.label_b);
        EXPECT_LE(std::abs(p.shift_row), 2);
        EXPECT_LE(std::abs(p.shift_col), 2);
        EXPECT_TRUE(set.data.labels[i] == p.label_a || set.data.labels[i] == p.label_b);
        EXPECT_GE(set.data.images[i].minCoeff(), 0.0);
        EXPECT_LE(set.data.images[i].maxCoeff(), 1.0);
        EXPECT_EQ(set.data.images[i],
                  overlap_shifted(train.images[p.source_a], train.images[p.source_b], train.shape, p.shift_row,
                                  p.shift_col));
    }
    const OutlierSet again = simulate_outliers(train, {25, 2, 9}, 1000);
    EXPECT_EQ(again.data.images, set.data.images);
    EXPECT_EQ(again.data.labels, set.data.labels);
}

TEST(Outliers, RejectsImpossibleRequests) {
    LabeledDataset one_class = random_images(5, {4, 4, 1}, 1, 2);
    EXPECT_THROW(simulate_outliers(one_class, {1, 1, 1}, 0), ValidationError);
    LabeledDataset two = random_images(4, {4, 4, 1}, 2, 2);  // 2 × 2 cross pairs per ordering
    EXPECT_THROW(simulate_outliers(two, {100, 1, 1}, 0), ValidationError);
}

TEST(ScoreDataset, BatchOfOneAndCounts) {
    const ClassifierModel m = random_model({9, 5, 3}, Activation::Sigmoid, 4);
    const LabeledDataset d = random_images(7, {3, 3, 1}, 3, 5);
    const auto recs = score_dataset(m, d, InputTarget{}, ObjectiveKind::TrueLabel, {true, true, false});
    ASSERT_EQ(recs.size(), 7u);
    for (std::size_t i = 0; i < 7; ++i) {
        EXPECT_EQ(recs[i].sample_id, d.ids[i]);
        EXPECT_EQ(*recs[i].fi,
                  fi(m, d.images[i], InputTarget{}, CrossEntropyTrue{static_cast<std::size_t>(d.labels[i])}).value);
        EXPECT_FALSE(recs[i].cook_max.has_value());
    }
}

TEST(ScoreDataset, BinaryLogisticToySet) {
    const ClassifierModel m = binary_logistic(Vector::Ones(2));
    LabeledDataset d;
    d.shape = {1, 2, 1};
    for (const double s : {0.5, 0.75, 0.9}) {
        d.images.push_back(Vector::Constant(2, 0.5 * std::log(s / (1 - s))));
        d.labels.push_back(0);
        d.ids.push_back(d.ids.size());
    }
    const auto recs = score_dataset(m, d, InputTarget{}, ObjectiveKind::TrueLabel, {});
    EXPECT_NEAR(*recs[0].fi, 1.0, 1e-10);
    EXPECT_NEAR(*recs[1].fi, 1.0 / 3.0, 1e-10);
    EXPECT_NEAR(*recs[2].fi, 1.0 / 9.0, 1e-10);
}

TEST(LayerSensitivity, DominanceAndSingleLayer) {
    const ClassifierModel single = binary_logistic(Vector::Constant(3, 0.4), 0.1);
    const LayerSensitivity s1 = layer_sensitivity(single, Vector::Constant(3, 0.5), CrossEntropyTrue{1});
    ASSERT_EQ(s1.per_layer.size(), 1u);
    EXPECT_EQ(s1.per_layer[0], s1.all_params);

    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ClassifierModel m = random_model({6, 5, 4, 3}, Activation::Sigmoid, seed);
        Rng rng(seed);
        const LayerSensitivity s = layer_sensitivity(m, random_vector(rng, 6), CrossEntropyPred{});
        for (const double v : s.per_layer) EXPECT_LE(v, s.all_params + 1e-8);
    }
}

TEST(LayerScan, LayoutMatchesLayerSensitivity) {
    const ClassifierModel m = random_model({4, 3, 2}, Activation::Sigmoid, 8);
    const LabeledDataset d = random_images(3, {2, 2, 1}, 2, 1);
    const auto recs = layer_scan(m, d, ObjectiveKind::TrueLabel);
    ASSERT_EQ(recs.size(), 9u);
    for (std::size_t i = 0; i < 3; ++i) {
        const LayerSensitivity s =
            layer_sensitivity(m, d.images[i], CrossEntropyTrue{static_cast<std::size_t>(d.labels[i])});
        EXPECT_EQ(recs[3 * i].target, "layer:1");
        EXPECT_EQ(recs[3 * i + 2].target, "params");
        EXPECT_EQ(*recs[3 * i].fi, s.per_layer[0]);
        EXPECT_EQ(*recs[3 * i + 1].fi, s.per_layer[1]);
        EXPECT_EQ(*recs[3 * i + 2].fi, s.all_params);
    }
}

TEST(RocPr, HandExamples) {
    const std::vector<double> scores{0.9, 0.8, 0.7, 0.6};
    EXPECT_NEAR(roc_pr(scores, {true, false, true, false}).roc.area, 0.75, 1e-15);
    const RocPr perfect = roc_pr(scores, {true, true, false, false});
    EXPECT_EQ(perfect.roc.area, 1.0);
    EXPECT_EQ(perfect.pr.area, 1.0);
    EXPECT_EQ(roc_pr(scores, {false, false, true, true}).roc.area, 0.0);
    // AP for (1,0,1,0): 0.5·1 + 0.5·(2/3).
    EXPECT_NEAR(roc_pr(scores, {true, false, true, false}).pr.area, 0.5 + 1.0 / 3.0, 1e-15);
    EXPECT_THROW(roc_pr(scores, {true, true, true, true}), ValidationError);
    EXPECT_THROW(roc_pr(scores, {true, false}), DimensionError);
}

// ROC area equals the Mann-Whitney probability that a positive outranks a negative (ties count half).
TEST(RocPr, MatchesPairCountingOracle) {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> scores;
        std::vector<bool> flags;
        for (int i = 0; i < 60; ++i) {
            scores.push_back(std::round(rng.uniform() * 20.0));
            flags.push_back(rng.uniform() < 0.3);
        }
        flags[0] = true;
        flags[1] = false;
        double wins = 0.0, pairs = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            for (std::size_t j = 0; j < scores.size(); ++j) {
                if (!flags[i] || flags[j]) continue;
                pairs += 1.0;
                wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
            }
        }
        const RocPr c = roc_pr(scores, flags);
        EXPECT_NEAR(c.roc.area, wins / pairs, 1e-12);
        EXPECT_GE(c.pr.area, 0.0);
        EXPECT_LE(c.pr.area, 1.0);
        for (std::size_t i = 1; i < c.roc.x.size(); ++i) {
            EXPECT_GE(c.roc.x[i], c.roc.x[i - 1]);
            EXPECT_GE(c.roc.y[i], c.roc.y[i - 1]);
        }
        for (std::size_t i = 1; i < c.pr.x.size(); ++i) EXPECT_GE(c.pr.x[i], c.pr.x[i - 1]);
    }
}

TEST(Percentiles, NearestRank) {
    const std::vector<double> scores{4, 1, 3, 2};
    const std::vector<double> qs{0, 25, 50, 75, 99, 100};
    const auto rows = percentile_report(scores, qs);
    const std::vector<double> expected{1, 1, 2, 3, 4, 4};
    for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].value, expected[i]);
    const std::vector<double> bad{101};
    EXPECT_THROW(percentile_report(scores, bad), ValidationError);
    EXPECT_THROW(percentile_report(std::vector<double>{}, qs), ValidationError);
}

TEST(PixelFiMap, ScaleOneMatchesSinglePixelTargets) {
    const ImageShape s{4, 3, 1};
    const ClassifierModel m = random_model({12, 6, 3}, Activation::Sigmoid, 2);
    Rng rng(3);
    const Vector img = random_vector(rng, 12);
    const std::size_t scales[] = {1, 3};
    const PixelFiMap map = pixel_fi_map(m, img, s, CrossEntropyPred{}, scales, ChannelMode::PerChannel);
    for (std::size_t k : scales) {
        const DenseMatrix& grid = map.by_scale.at(k);
        ASSERT_EQ(grid.rows(), 4);
        ASSERT_EQ(grid.cols(), 3);
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 3; ++c)
                EXPECT_EQ(grid(r, c), fi(m, img, InputPatch{r, c, k, s, {}}, CrossEntropyPred{}).value);
    }
}

TEST(PixelFiMap, CentreOfThreeByThreeIsWholeInput) {
    const ImageShape s{3, 3, 1};
    const ClassifierModel m = random_model({9, 4, 3}, Activation::Sigmoid, 6);
    const Vector img = Vector::LinSpaced(9, 0.0, 1.0);
    const std::size_t scales[] = {3};
    const PixelFiMap map = pixel_fi_map(m, img, s, CrossEntropyPred{}, scales, ChannelMode::PerChannel);
    EXPECT_LT(relative_error(map.by_scale.at(3)(1, 1), fi(m, img, InputTarget{}, CrossEntropyPred{}).value), 1e-12);
}

TEST(PixelFiMap, InputIgnoringModelGivesZeros) {
    std::vector<Layer> layers = random_model({8, 4, 3}, Activation::Sigmoid, 1).layers();
    layers[0].weights.setZero();
    const ClassifierModel m(layers);
    const std::size_t scales[] = {1, 3, 5, 7};
    const PixelFiMap map =
        pixel_fi_map(m, Vector::Constant(8, 0.5), {2, 4, 1}, CrossEntropyPred{}, scales, ChannelMode::PerChannel);
    EXPECT_EQ(map.by_scale.size(), 4u);
    for (const auto& [k, grid] : map.by_scale) EXPECT_TRUE(grid.isZero(0.0));
}

TEST(PixelFiMap, AveragedModeAveragesChannels) {
    const ImageShape s{2, 2, 3};
    const ClassifierModel m = random_model({12, 5, 3}, Activation::Sigmoid, 7);
    Rng rng(2);
    const Vector img = random_vector(rng, 12);
    const std::size_t scales[] = {1};
    const PixelFiMap map = pixel_fi_map(m, img, s, CrossEntropyPred{}, scales, ChannelMode::Averaged);
    double sum = 0.0;
    for (std::size_t c = 0; c < 3; ++c) sum += fi(m, img, InputPatch{1, 0, 1, s, c}, CrossEntropyPred{}).value;
    EXPECT_NEAR(map.by_scale.at(1)(1, 0), sum / 3.0, 1e-14);
    EXPECT_THROW(
        pixel_fi_map(m, img, s, CrossEntropyPred{}, std::vector<std::size_t>{2}, ChannelMode::Averaged),
        ValidationError);
}

TEST(Attack, ChangesExactlyOnePixelWithinRange) {
    const ImageShape s{4, 4, 1};
    const ClassifierModel m = random_model({16, 6, 3}, Activation::Sigmoid, 11, 2.0);
    Rng rng(6);
    const Vector img = random_vector(rng, 16);
    const AttackResult a = one_pixel_attack(m, img, s);
    EXPECT_EQ(a.attacked.size(), img.size());
    EXPECT_EQ((a.attacked.array() != img.array()).count(), 1);
    EXPECT_GE(a.attacked.minCoeff(), 0.0);
    EXPECT_LE(a.attacked.maxCoeff(), 1.0);
    const std::size_t unit[] = {1};
    const auto grid = pixel_fi_map(m, img, s, CrossEntropyPred{}, unit, ChannelMode::Averaged).by_scale.at(1);
    const auto [r, c] = grid_argmax(grid);
    EXPECT_EQ(a.row, r);
    EXPECT_EQ(a.col, c);
    EXPECT_LE(a.p_after, a.p_before + 1e-15);
    // Best-of selection over the tried candidates.
    for (const double v : a.tried) {
        Vector probe = img;
        probe(static_cast<Eigen::Index>(s.index(r, c))) = v;
        EXPECT_GE(forward(m, probe)(static_cast<Eigen::Index>(a.y_pred)), a.p_after);
    }
}

TEST(Attack, LinearModelArgmaxMatchesDenseOracle) {
    const ImageShape s{3, 4, 1};
    Rng rng(21);
    Layer layer{random_matrix(rng, 3, 12), random_vector(rng, 3, -0.2, 0.2), Activation::Identity};
    const ClassifierModel m({layer});
    const Vector img = random_vector(rng, 12);
    const std::size_t cls = argmax(forward(m, img));
    DenseMatrix oracle(3, 4);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 4; ++c) oracle(r, c) = dense_fi(m, img, InputPatch{r, c, 1, s, {}}, cls);
    const AttackResult a = one_pixel_attack(m, img, s);
    const auto [r, c] = grid_argmax(oracle);
    EXPECT_EQ(a.row, r);
    EXPECT_EQ(a.col, c);
}

TEST(Attack, ValueGridCandidates) {
    const ValueGrid g;
    EXPECT_EQ(g.candidates(0.2), (std::vector<double>{0.0, 0.7, 1.0}));
    EXPECT_EQ(g.candidates(0.5), (std::vector<double>{0.0, 1.0}));
    ValueGrid bad;
    bad.absolute = {1.5};
    EXPECT_THROW(bad.candidates(0.5), ValidationError);
    EXPECT_EQ(grid_argmax(DenseMatrix::Ones(2, 2)), (std::pair<std::size_t, std::size_t>{0, 0}));
}

// Parallel kernels reproduce the serial reference bit for bit at any team size.
TEST(Parallel, MatchesSerialReference) {
    const ImageShape s{5, 5, 1};
    const ClassifierModel m = random_model({25, 8, 6, 4}, Activation::Sigmoid, 13);
    const LabeledDataset d = random_images(40, s, 4, 17);
    const std::size_t scales[] = {1, 3, 5, 7};
    const auto ref_scores = reference::score_dataset(m, d, AllParams{}, ObjectiveKind::TrueLabel, {true, true, false});
    const auto ref_layers = reference::layer_scan(m, d, ObjectiveKind::PredictedLabel);
    const auto ref_map = reference::pixel_fi_map(m, d.images[0], s, CrossEntropyPred{}, scales, ChannelMode::PerChannel);
    const int saved = omp_get_max_threads();
    for (const int threads : {1, 2, 3, 8}) {
        omp_set_num_threads(threads);
        EXPECT_EQ(score_dataset(m, d, AllParams{}, ObjectiveKind::TrueLabel, {true, true, false}), ref_scores);
        EXPECT_EQ(layer_scan(m, d, ObjectiveKind::PredictedLabel), ref_layers);
        const auto map = pixel_fi_map(m, d.images[0], s, CrossEntropyPred{}, scales, ChannelMode::PerChannel);
        for (const std::size_t k : scales) EXPECT_EQ(map.by_scale.at(k), ref_map.by_scale.at(k));
    }
    omp_set_num_threads(saved);
}

TEST(Parallel, ExceptionsPropagate) {
    const ClassifierModel m = random_model({4, 3, 2}, Activation::Sigmoid, 1);
    LabeledDataset d = random_images(10, {2, 2, 1}, 2, 1);
    d.labels[7] = -1;
    EXPECT_THROW(score_dataset(m, d, InputTarget{}, ObjectiveKind::TrueLabel, {}), ValidationError);
}
