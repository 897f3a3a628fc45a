#include "fisens/manifold.hpp"

#include "fisens/errors.hpp"

#include <algorithm>
#include <cmath>

namespace fisens {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void check_input(const ClassifierModel& model, const Eigen::Ref<const Vector>& x) {
    if (static_cast<std::size_t>(x.size()) != model.input_dim()) {
        throw DimensionError("input has length " + std::to_string(x.size()) + ", model expects " +
                             std::to_string(model.input_dim()));
    }
}

void check_patch_fits(const ClassifierModel& model, const InputPatch& patch) {
    if (patch.shape.size() != model.input_dim()) {
        throw DimensionError("patch image shape does not match the model input dimension");
    }
}

}  // namespace

std::string describe(const PerturbationTarget& target) {
    return std::visit(overloaded{
                          [](const InputTarget&) { return std::string("input"); },
                          [](const AllParams&) { return std::string("params"); },
                          [](const LayerParams& l) { return "layer:" + std::to_string(l.index + 1); },
                          [](const InputPatch& p) {
                              std::string s = "patch:" + std::to_string(p.row) + ":" + std::to_string(p.col) +
                                              ":" + std::to_string(p.scale);
                              if (p.channel) s += ":c" + std::to_string(*p.channel);
                              return s;
                          },
                      },
                      target);
}

std::vector<std::size_t> patch_indices(const InputPatch& patch) {
    const ImageShape& s = patch.shape;
    if (patch.scale != 1 && patch.scale != 3 && patch.scale != 5 && patch.scale != 7) {
        throw ValidationError("patch scale must be one of 1, 3, 5, 7 (got " + std::to_string(patch.scale) + ")");
    }
    if (patch.row >= s.height || patch.col >= s.width) throw ValidationError("patch centre outside the image");
    if (patch.channel && *patch.channel >= s.channels) throw ValidationError("patch channel out of range");

    const std::size_t half = patch.scale / 2;
    const std::size_t r0 = patch.row >= half ? patch.row - half : 0;
    const std::size_t c0 = patch.col >= half ? patch.col - half : 0;
    const std::size_t r1 = std::min(s.height - 1, patch.row + half);
    const std::size_t c1 = std::min(s.width - 1, patch.col + half);

    std::vector<std::size_t> out;
    out.reserve((r1 - r0 + 1) * (c1 - c0 + 1) * s.channels);
    const std::size_t first = patch.channel.value_or(0);
    const std::size_t last = patch.channel ? *patch.channel : s.channels - 1;
    for (std::size_t c = first; c <= last; ++c) {
        for (std::size_t r = r0; r <= r1; ++r) {
            for (std::size_t col = c0; col <= c1; ++col) out.push_back(s.index(r, col, c));
        }
    }
    return out;
}

std::size_t target_dim(const ClassifierModel& model, const PerturbationTarget& target) {
    return std::visit(overloaded{
                          [&](const InputTarget&) { return model.input_dim(); },
                          [&](const AllParams& a) { return param_range(model, a).second; },
                          [&](const LayerParams& l) { return param_range(model, l).second; },
                          [&](const InputPatch& p) {
                              check_patch_fits(model, p);
                              return patch_indices(p).size();
                          },
                      },
                      target);
}

DenseMatrix select_columns(const DenseMatrix& scores, const std::vector<std::size_t>& columns) {
    DenseMatrix out(scores.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        out.col(static_cast<Eigen::Index>(j)) = scores.col(static_cast<Eigen::Index>(columns[j]));
    }
    return out;
}

TargetScores target_scores(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                           const PerturbationTarget& target) {
    check_input(model, x);
    return std::visit(overloaded{
                          [&](const InputTarget&) {
                              auto g = logprob_gradients(model, x, true, false);
                              return TargetScores{std::move(g.probs), std::move(g.input)};
                          },
                          [&](const InputPatch& p) {
                              check_patch_fits(model, p);
                              const auto cols = patch_indices(p);
                              auto g = logprob_gradients(model, x, true, false);
                              return TargetScores{std::move(g.probs), select_columns(g.input, cols)};
                          },
                          [&](const auto& selection) {
                              const auto [offset, count] = param_range(model, selection);
                              auto g = logprob_gradients(model, x, false, true);
                              if (count != model.param_count()) {
                                  g.params = DenseMatrix(g.params.middleCols(static_cast<Eigen::Index>(offset),
                                                                             static_cast<Eigen::Index>(count)));
                              }
                              return TargetScores{std::move(g.probs), std::move(g.params)};
                          },
                      },
                      target);
}

DenseMatrix l0_from_scores(const TargetScores& ts) {
    return ts.scores.transpose() * ts.probs.cwiseSqrt().asDiagonal();
}

DenseMatrix build_L0(const ClassifierModel& model, const Eigen::Ref<const Vector>& x,
                     const PerturbationTarget& target) {
    return l0_from_scores(target_scores(model, x, target));
}

PerturbationBasis build_basis(const Eigen::Ref<const DenseMatrix>& l0, double tol) {
    CompactSvd svd = csvd_tall(l0, tol);
    return PerturbationBasis{std::move(svd.U), std::move(svd.lambda), svd.rank,
                             static_cast<std::size_t>(l0.rows())};
}

NuGradient grad_nu(const Eigen::Ref<const Vector>& grad_f, const PerturbationBasis& basis,
                   double residual_threshold) {
    if (static_cast<std::size_t>(grad_f.size()) != basis.dim) {
        throw DimensionError("gradient has length " + std::to_string(grad_f.size()) + ", basis dimension is " +
                             std::to_string(basis.dim));
    }
    NuGradient out;
    const double norm = grad_f.norm();
    if (basis.rank == 0) {
        out.coords = Vector(0);
        out.residual_ratio = norm > 0.0 ? 1.0 : 0.0;
    } else {
        const Vector projected = basis.U.transpose() * grad_f;
        out.coords = projected.cwiseQuotient(basis.lambda.cwiseSqrt());
        if (norm > 0.0) out.residual_ratio = (grad_f - basis.U * projected).norm() / norm;
    }
    out.residual_warning = out.residual_ratio > residual_threshold;
    return out;
}

DenseMatrix nu_metric(const Eigen::Ref<const DenseMatrix>& l0, const PerturbationBasis& basis) {
    if (static_cast<std::size_t>(l0.rows()) != basis.dim) throw DimensionError("nu_metric: L0 and basis disagree");
    const auto r = static_cast<Eigen::Index>(basis.rank);
    // Columns of L0 are √P(y) s_y, so mapping them maps the weighted score vectors.
    const DenseMatrix mapped = basis.lambda.head(r).cwiseSqrt().cwiseInverse().asDiagonal() *
                               (basis.U.transpose() * l0);
    return mapped * mapped.transpose();
}

std::pair<ClassifierModel, Vector> apply_perturbation(const ClassifierModel& model,
                                                      const Eigen::Ref<const Vector>& x,
                                                      const PerturbationTarget& target,
                                                      const Eigen::Ref<const Vector>& delta) {
    check_input(model, x);
    if (static_cast<std::size_t>(delta.size()) != target_dim(model, target)) {
        throw DimensionError("perturbation length does not match the target dimension");
    }
    ClassifierModel m = model;
    Vector xp = x;
    std::visit(overloaded{
                   [&](const InputTarget&) { xp += delta; },
                   [&](const InputPatch& p) {
                       const auto cols = patch_indices(p);
                       for (std::size_t j = 0; j < cols.size(); ++j) {
                           xp[static_cast<Eigen::Index>(cols[j])] += delta[static_cast<Eigen::Index>(j)];
                       }
                   },
                   [&](const auto& selection) {
                       const auto [offset, count] = param_range(model, selection);
                       Vector theta = model.flatten();
                       theta.segment(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(count)) += delta;
                       m.unflatten(theta);
                   },
               },
               target);
    return {std::move(m), std::move(xp)};
}

}  // namespace fisens
