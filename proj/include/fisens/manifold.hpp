#pragma once

#include "fisens/classifier.hpp"
#include "fisens/numerics.hpp"

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace fisens {

// Additive perturbation of the whole input vector.
struct InputTarget {};

/// Additive perturbation of the k × k window centred on (row, col), clipped
/// at the image border. With no channel given, every channel of the window
/// is perturbed jointly.
struct InputPatch {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t scale = 1;  // one of 1, 3, 5, 7
    ImageShape shape;
    std::optional<std::size_t> channel;
};

// Which subvector α of (x, θ) receives the perturbation ω = Δα (ω₀ = 0).
using PerturbationTarget = std::variant<InputTarget, AllParams, LayerParams, InputPatch>;

// "input", "params", "layer:<1-based index>" or "patch:<row>:<col>:<scale>[:c<channel>]".
std::string describe(const PerturbationTarget& target);

// Flat input indices covered by a patch. Throws ValidationError for bad scales or centres.
std::vector<std::size_t> patch_indices(const InputPatch& patch);

std::size_t target_dim(const ClassifierModel& model, const PerturbationTarget& target);

/// Prediction probabilities and the K × p matrix of score rows
/// ∂_α log P(y|x,θ) for the selected subvector α.
struct TargetScores {
    Vector probs;
    DenseMatrix scores;
};

TargetScores target_scores(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                           const PerturbationTarget& target);

// Restricts full-input scores (K × input_dim) to a patch.
DenseMatrix select_columns(const DenseMatrix& scores, const std::vector<std::size_t>& columns);

/// p × K factor whose column y is √P(y) · ∂_α log P(y), so that the metric
/// at the unperturbed point is L₀ L₀ᵀ.
DenseMatrix l0_from_scores(const TargetScores& ts);
DenseMatrix build_L0(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                     const PerturbationTarget& target);

struct PerturbationBasis {
    DenseMatrix U;       // p × rank
    Vector lambda;       // rank, positive and non-increasing
    std::size_t rank = 0;
    std::size_t dim = 0;  // p
};

PerturbationBasis build_basis(const Eigen::Ref<const DenseMatrix>& l0, double tol = kDefaultRankTolerance);

inline constexpr double kDefaultResidualThreshold = 1e-6;

/// Objective gradient in ν-coordinates, Λ₀^{-1/2} U₀ᵀ ∇f, with the share of
/// ∇f lying outside the retained subspace.
struct NuGradient {
    Vector coords;
    double residual_ratio = 0.0;  // ‖(I − U₀U₀ᵀ)∇f‖ / ‖∇f‖, 0 when ∇f = 0
    bool residual_warning = false;
};

NuGradient grad_nu(const Eigen::Ref<const Vector>& grad_f, const PerturbationBasis& basis,
                   double residual_threshold = kDefaultResidualThreshold);

// Σ_y P(y) s̃_y s̃_yᵀ for the score rows mapped to ν-coordinates; the identity at ν₀.
DenseMatrix nu_metric(const Eigen::Ref<const DenseMatrix>& l0, const PerturbationBasis& basis);

/// Model and input with Δα = delta applied to the selected subvector.
std::pair<ClassifierModel, Vector> apply_perturbation(const ClassifierModel& model,
                                                      const Eigen::Ref<const Vector>& x,
                                                      const PerturbationTarget& target,
                                                      const Eigen::Ref<const Vector>& delta);

}  // namespace fisens
