#include "fisens/influence.hpp"

#include "fisens/errors.hpp"

#include <cmath>
#include <string>

namespace fisens {

std::size_t objective_class(const Objective& objective, const Eigen::Ref<const Vector>& probs) {
    if (const auto* t = std::get_if<CrossEntropyTrue>(&objective)) {
        if (t->label >= static_cast<std::size_t>(probs.size())) {
            throw ValidationError("objective label " + std::to_string(t->label) + " outside the class range");
        }
        return t->label;
    }
    return argmax(probs);
}

FiResult fi_from_scores(const TargetScores& scores, std::size_t cls, double tol) {
    const Vector grad_f = -scores.scores.row(static_cast<Eigen::Index>(cls)).transpose();
    const PerturbationBasis basis = build_basis(l0_from_scores(scores), tol);
    const NuGradient g = grad_nu(grad_f, basis);

    FiResult out;
    out.value = g.coords.squaredNorm();
    out.residual_ratio = g.residual_ratio;
    out.residual_warning = g.residual_warning;
    out.rank = basis.rank;
    out.degenerate = basis.rank == 0 && grad_f.squaredNorm() > 0.0;
    return out;
}

FiResult fi(const ClassifierModel& model, const Eigen::Ref<const Vector>& x, const PerturbationTarget& target,
            const Objective& objective) {
    const TargetScores ts = target_scores(model, x, target);
    return fi_from_scores(ts, objective_class(objective, ts.probs));
}

Vector objective_gradient(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                          const PerturbationTarget& target, const Objective& objective) {
    const TargetScores ts = target_scores(model, x, target);
    return -ts.scores.row(static_cast<Eigen::Index>(objective_class(objective, ts.probs))).transpose();
}

double jacobian_norm(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                     const PerturbationTarget& target, const Objective& objective) {
    return objective_gradient(model, x, target, objective).norm();
}

DenseMatrix objective_hessian(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                              const PerturbationTarget& target, const Objective& objective, double step) {
    const std::size_t p = target_dim(model, target);
    if (p > kMaxHessianDim) {
        throw ComputeError("Hessian of dimension " + std::to_string(p) + " exceeds the limit of " +
                           std::to_string(kMaxHessianDim));
    }
    // The objective class is fixed at the unperturbed point.
    const Objective fixed = CrossEntropyTrue{objective_class(objective, forward(model, x))};
    const auto n = static_cast<Eigen::Index>(p);
    DenseMatrix h(n, n);
    Vector delta = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        delta[i] = step;
        const auto [mp, xp] = apply_perturbation(model, x, target, delta);
        const Vector plus = objective_gradient(mp, xp, target, fixed);
        delta[i] = -step;
        const auto [mm, xm] = apply_perturbation(model, x, target, delta);
        const Vector minus = objective_gradient(mm, xm, target, fixed);
        delta[i] = 0.0;
        h.col(i) = (plus - minus) / (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
}

double cook_directional(const Eigen::Ref<const Vector>& grad, const Eigen::Ref<const DenseMatrix>& hessian,
                        const Eigen::Ref<const Vector>& eta) {
    const auto p = grad.size();
    if (hessian.rows() != p || hessian.cols() != p || eta.size() != p) {
        throw DimensionError("cook_directional: gradient, Hessian and direction disagree in size");
    }
    if (eta.squaredNorm() == 0.0) throw ValidationError("cook_directional: direction must be nonzero");
    const double g2 = grad.squaredNorm();
    const double along = grad.dot(eta);
    const double curvature = eta.dot(hessian * eta);
    const double metric = eta.squaredNorm() + along * along;
    return curvature / (metric * std::sqrt(1.0 + g2));
}

double cook_max(const Eigen::Ref<const Vector>& grad, const Eigen::Ref<const DenseMatrix>& hessian) {
    const auto p = grad.size();
    if (hessian.rows() != p || hessian.cols() != p) {
        throw DimensionError("cook_max: gradient and Hessian disagree in size");
    }
    if (p == 0) return 0.0;
    const Eigen::MatrixXd h = 0.5 * (hessian + hessian.transpose());
    const Eigen::MatrixXd metric = Eigen::MatrixXd::Identity(p, p) + grad * grad.transpose();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, metric, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw ComputeError("cook_max: generalized eigensolver failed");
    return solver.eigenvalues().maxCoeff() / std::sqrt(1.0 + grad.squaredNorm());
}

double cook_directional(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                        const PerturbationTarget& target, const Objective& objective,
                        const Eigen::Ref<const Vector>& eta) {
    const DenseMatrix h = objective_hessian(model, x, target, objective);
    return cook_directional(objective_gradient(model, x, target, objective), h, eta);
}

double cook_max(const ClassifierModel& model, const Eigen::Ref<const Vector>& x, const PerturbationTarget& target,
                const Objective& objective) {
    const DenseMatrix h = objective_hessian(model, x, target, objective);
    return cook_max(objective_gradient(model, x, target, objective), h);
}

}  // namespace fisens
