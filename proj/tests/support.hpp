#pragma once

#include "fisens/classifier.hpp"
#include "fisens/influence.hpp"
#include "fisens/manifold.hpp"
#include "fisens/random.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace fisens::testing {

inline std::filesystem::path data_dir() { return FISENS_TEST_DATA_DIR; }

/// Single linear layer with logits (wᵀx + b, 0); the two-class softmax of
/// this model is the logistic regression P(1) = σ(wᵀx + b).
inline ClassifierModel binary_logistic(const Vector& w, double b = 0.0) {
    Layer layer;
    layer.weights = DenseMatrix::Zero(2, w.size());
    layer.weights.row(0) = w.transpose();
    layer.bias = Vector::Zero(2);
    layer.bias(0) = b;
    layer.activation = Activation::Identity;
    return ClassifierModel({layer});
}

inline Vector random_vector(Rng& rng, Eigen::Index n, double lo = 0.0, double hi = 1.0) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
    return v;
}

inline DenseMatrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0) {
    DenseMatrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
    return m;
}

// Random weights of the given magnitude and random biases, unlike the zero-bias initializer.
inline ClassifierModel random_model(const std::vector<std::size_t>& widths, Activation hidden, std::uint64_t seed,
                                    double scale = 1.0) {
    Rng rng(seed);
    std::vector<Layer> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Layer layer;
        const auto rows = static_cast<Eigen::Index>(widths[l + 1]);
        const auto cols = static_cast<Eigen::Index>(widths[l]);
        layer.weights = random_matrix(rng, rows, cols, -scale, scale);
        layer.bias = random_vector(rng, rows, -0.5, 0.5);
        layer.activation = l + 2 == widths.size() ? Activation::Identity : hidden;
        layers.push_back(std::move(layer));
    }
    return ClassifierModel(std::move(layers));
}

/// FI by brute force: ∇f G⁺ ∇fᵀ with G = L₀L₀ᵀ formed densely and its
/// pseudoinverse taken from a full SVD.
inline double dense_fi(const DenseMatrix& l0, const Vector& grad, double tol = 1e-10) {
    const Eigen::MatrixXd g = l0 * l0.transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector s = svd.singularValues();
    Vector inv = Vector::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > tol * s(0)) inv(i) = 1.0 / s(i);
    const Eigen::MatrixXd pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
    return grad.dot(pinv * grad);
}

inline double dense_fi(const ClassifierModel& model, const Vector& x, const PerturbationTarget& target,
                       std::size_t cls) {
    const TargetScores ts = target_scores(model, x, target);
    const Vector grad = -ts.scores.row(static_cast<Eigen::Index>(cls)).transpose();
    return dense_fi(l0_from_scores(ts), grad);
}

}  // namespace fisens::testing
