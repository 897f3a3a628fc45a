#pragma once

#include "fisens/classifier.hpp"
#include "fisens/manifold.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <variant>

namespace fisens {

// f(ω) = −log P(y = label | x, θ, ω)
struct CrossEntropyTrue {
    std::size_t label = 0;
};
// f(ω) = −log P(y = y_pred | x, θ, ω), y_pred fixed at the unperturbed point.
struct CrossEntropyPred {};

using Objective = std::variant<CrossEntropyTrue, CrossEntropyPred>;

// Class whose log-probability the objective negates; predicted-label ties go to the smallest index.
std::size_t objective_class(const Objective& objective, const Eigen::Ref<const Vector>& probs);

struct FiResult {
    double value = 0.0;
    double residual_ratio = 0.0;
    std::size_t rank = 0;
    bool degenerate = false;        // r0 = 0 while ∇f ≠ 0
    bool residual_warning = false;  // residual_ratio above threshold
};

/// FI = ‖Λ₀^{-1/2} U₀ᵀ ∇f‖² from precomputed scores, with ∇f = −s_c.
FiResult fi_from_scores(const TargetScores& scores, std::size_t cls, double tol = kDefaultRankTolerance);

FiResult fi(const ClassifierModel& model, const Eigen::Ref<const Vector>& x, const PerturbationTarget& target,
            const Objective& objective);

// ∂f/∂α at the unperturbed point.
Vector objective_gradient(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                          const PerturbationTarget& target, const Objective& objective);

double jacobian_norm(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                     const PerturbationTarget& target, const Objective& objective);

inline constexpr std::size_t kMaxHessianDim = 2000;
inline constexpr double kHessianStep = 1e-4;

/// Hessian of f with respect to α by central differences of the analytic
/// gradient, symmetrized. Throws ComputeError when p exceeds kMaxHessianDim.
DenseMatrix objective_hessian(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                              const PerturbationTarget& target, const Objective& objective,
                              double step = kHessianStep);

/// Cook's curvature along η:
///   (1 + ∇f∇fᵀ)^{-1/2} · ηᵀHη / ηᵀ(I + ∇fᵀ∇f)η
double cook_directional(const Eigen::Ref<const Vector>& grad, const Eigen::Ref<const DenseMatrix>& hessian,
                        const Eigen::Ref<const Vector>& eta);

// Maximum over η, from the largest eigenvalue of the pencil (H, I + ∇fᵀ∇f).
double cook_max(const Eigen::Ref<const Vector>& grad, const Eigen::Ref<const DenseMatrix>& hessian);

double cook_directional(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                        const PerturbationTarget& target, const Objective& objective,
                        const Eigen::Ref<const Vector>& eta);
double cook_max(const ClassifierModel& model, const Eigen::Ref<const Vector>& x, const PerturbationTarget& target,
                const Objective& objective);

struct InfluenceRecord {
    std::size_t sample_id = 0;
    std::string target;
    std::optional<double> fi;
    std::optional<double> jacobian_norm;
    std::optional<double> cook_max;
    int y_true = -1;  // -1 when unknown
    int y_pred = -1;
    double p_pred = 0.0;
    double residual_ratio = 0.0;
    bool degenerate = false;

    bool operator==(const InfluenceRecord&) const = default;
};

}  // namespace fisens
