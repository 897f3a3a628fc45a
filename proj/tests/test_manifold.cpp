#include "fisens/errors.hpp"
#include "fisens/manifold.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fisens;
using namespace fisens::testing;

namespace {
const double kH = std::sqrt(0.125);  // 0.35355...
}

TEST(BuildL0, BinaryLogisticExample) {
    const DenseMatrix l0 = build_L0(binary_logistic(Vector::Ones(2)), Vector::Zero(2), InputTarget{});
    ASSERT_EQ(l0.rows(), 2);
    ASSERT_EQ(l0.cols(), 2);
    EXPECT_NEAR(l0(0, 0), kH, 1e-15);
    EXPECT_NEAR(l0(1, 0), kH, 1e-15);
    EXPECT_NEAR(l0(0, 1), -kH, 1e-15);
    EXPECT_NEAR(l0(1, 1), -kH, 1e-15);
    EXPECT_TRUE(build_L0(binary_logistic(Vector::Zero(3)), Vector::Ones(3), InputTarget{}).isZero(0.0));
}

TEST(BuildL0, ColumnNormsMatchWeightedScores) {
    const ClassifierModel m = random_model({5, 4, 3}, Activation::Sigmoid, 3);
    Rng rng(9);
    const Vector x = random_vector(rng, 5);
    const DenseMatrix l0 = build_L0(m, x, AllParams{});
    const Vector p = forward(m, x);
    const DenseMatrix s = logprob_grad_params(m, x, AllParams{});
    for (Eigen::Index y = 0; y < 3; ++y) {
        EXPECT_LT(relative_error(l0.col(y).squaredNorm(), p(y) * s.row(y).squaredNorm()), 1e-12);
    }
}

TEST(BuildBasis, Examples) {
    DenseMatrix l(2, 2);
    l << kH, -kH, kH, -kH;
    const PerturbationBasis b = build_basis(l);
    EXPECT_EQ(b.rank, 1u);
    EXPECT_NEAR(b.lambda(0), 0.5, 1e-12);
    EXPECT_EQ(b.dim, 2u);

    DenseMatrix orth = DenseMatrix::Zero(4, 2);
    orth(0, 0) = 2.0;
    orth(2, 1) = 1.0;
    const PerturbationBasis o = build_basis(orth);
    ASSERT_EQ(o.rank, 2u);
    EXPECT_NEAR(o.lambda(0), 4.0, 1e-12);
    EXPECT_NEAR(o.lambda(1), 1.0, 1e-12);
}

// r0 ≤ K, checked over models of varying depth, width and class count.
TEST(BuildBasis, RankNeverExceedsClassCount) {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const std::size_t k = 2 + seed % 9;
        const ClassifierModel m = random_model({12, 6, k}, Activation::Sigmoid, seed);
        Rng rng(seed);
        const Vector x = random_vector(rng, 12);
        for (const PerturbationTarget& t : std::vector<PerturbationTarget>{InputTarget{}, AllParams{}, LayerParams{0}}) {
            const PerturbationBasis b = build_basis(build_L0(m, x, t));
            EXPECT_LE(b.rank, k);
            EXPECT_LE(b.rank, b.dim);
            const auto r = static_cast<Eigen::Index>(b.rank);
            EXPECT_LT((b.U.transpose() * b.U - DenseMatrix::Identity(r, r)).cwiseAbs().maxCoeff(), 1e-10);
        }
    }
}

TEST(GradNu, Examples) {
    DenseMatrix l(2, 2);
    l << kH, -kH, kH, -kH;
    const PerturbationBasis b = build_basis(l);
    const NuGradient g = grad_nu(Vector::Constant(2, -0.5), b);
    ASSERT_EQ(g.coords.size(), 1);
    EXPECT_NEAR(g.coords(0), -1.0, 1e-12);
    EXPECT_LT(g.residual_ratio, 1e-12);
    EXPECT_FALSE(g.residual_warning);

    Vector orth(2);
    orth << 1, -1;
    const NuGradient o = grad_nu(orth, b);
    EXPECT_NEAR(o.coords(0), 0.0, 1e-15);
    EXPECT_NEAR(o.residual_ratio, 1.0, 1e-12);
    EXPECT_TRUE(o.residual_warning);

    const PerturbationBasis empty = build_basis(DenseMatrix::Zero(2, 2));
    EXPECT_EQ(grad_nu(Vector::Ones(2), empty).coords.size(), 0);
    EXPECT_THROW(grad_nu(Vector::Ones(3), b), DimensionError);
}

TEST(NuMetric, IdentityOnRandomInstances) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ClassifierModel m = random_model({8, 5, 4}, Activation::Sigmoid, seed);
        Rng rng(seed + 100);
        const DenseMatrix l0 = build_L0(m, random_vector(rng, 8), AllParams{});
        const PerturbationBasis b = build_basis(l0);
        const auto r = static_cast<Eigen::Index>(b.rank);
        EXPECT_LT((nu_metric(l0, b) - DenseMatrix::Identity(r, r)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Patch, IndicesClipAtBorders) {
    const ImageShape s{4, 5, 1};
    EXPECT_EQ(patch_indices({0, 0, 1, s, {}}), std::vector<std::size_t>{0});
    EXPECT_EQ(patch_indices({0, 0, 3, s, {}}), (std::vector<std::size_t>{0, 1, 5, 6}));
    EXPECT_EQ(patch_indices({2, 2, 3, s, {}}).size(), 9u);
    EXPECT_EQ(patch_indices({3, 4, 7, s, {}}).size(), 4u * 4u);
    EXPECT_THROW(patch_indices({0, 0, 2, s, {}}), ValidationError);
    EXPECT_THROW(patch_indices({4, 0, 1, s, {}}), ValidationError);
}

TEST(Patch, ChannelsArePlanar) {
    const ImageShape s{2, 2, 3};
    EXPECT_EQ(patch_indices({1, 0, 1, s, {}}), (std::vector<std::size_t>{2, 6, 10}));
    EXPECT_EQ(patch_indices({1, 0, 1, s, 1}), std::vector<std::size_t>{6});
    EXPECT_THROW(patch_indices({1, 0, 1, s, 3}), ValidationError);
}

TEST(Describe, Labels) {
    EXPECT_EQ(describe(InputTarget{}), "input");
    EXPECT_EQ(describe(AllParams{}), "params");
    EXPECT_EQ(describe(LayerParams{0}), "layer:1");
    EXPECT_EQ(describe(InputPatch{3, 4, 5, {28, 28, 1}, {}}), "patch:3:4:5");
    EXPECT_EQ(describe(InputPatch{3, 4, 1, {8, 8, 3}, 2}), "patch:3:4:1:c2");
}

TEST(ApplyPerturbation, TouchesOnlyTheTarget) {
    const ClassifierModel m = random_model({4, 3, 2}, Activation::Sigmoid, 1);
    const Vector x = Vector::Constant(4, 0.5);
    {
        const auto [pm, px] = apply_perturbation(m, x, InputTarget{}, Vector::Ones(4));
        EXPECT_TRUE(pm == m);
        EXPECT_EQ(px, Vector::Constant(4, 1.5));
    }
    {
        const auto [pm, px] = apply_perturbation(m, x, LayerParams{1}, Vector::Ones(8));
        EXPECT_EQ(px, x);
        EXPECT_EQ(pm.layer(0).weights, m.layer(0).weights);
        EXPECT_EQ(pm.layer(1).bias, (m.layer(1).bias.array() + 1.0).matrix());
    }
    {
        const InputPatch p{0, 0, 1, {2, 2, 1}, {}};
        const auto [pm, px] = apply_perturbation(m, x, p, Vector::Constant(1, 0.25));
        EXPECT_EQ(px(0), 0.75);
        EXPECT_EQ(px(1), 0.5);
    }
    EXPECT_THROW(apply_perturbation(m, x, InputTarget{}, Vector::Ones(3)), DimensionError);
}
