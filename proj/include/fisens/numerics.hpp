#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace fisens {

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr double kDefaultRankTolerance = 1e-10;

struct EigenResult {
    Vector eigenvalues;        // non-increasing
    DenseMatrix eigenvectors;  // column j pairs with eigenvalues[j]
};

/// Compact factorization L Lᵀ = U diag(lambda) Uᵀ restricted to its positive spectrum.
struct CompactSvd {
    DenseMatrix U;   // p × rank, orthonormal columns
    Vector lambda;   // rank, strictly positive, non-increasing
    std::size_t rank = 0;
};

// Throws ValidationError when any entry is NaN or infinite.
void require_finite(const Eigen::Ref<const DenseMatrix>& m, const char* what);

/// Eigendecomposition of a symmetric matrix. The input is symmetrized by
/// averaging with its transpose before the solve; the asymmetry must not
/// exceed 1e-10 relative to the largest entry.
EigenResult sym_eig(const Eigen::Ref<const DenseMatrix>& a);

/// cSVD of the outer product L Lᵀ for a tall factor L (p × K) computed from
/// the K × K Gram matrix LᵀL, so no p × p array is ever formed.
///
/// Eigenvalues of LᵀL at or below `tol` times the largest one are discarded.
/// Each retained column of U has its largest-magnitude entry made positive.
/// An all-zero L yields rank 0.
CompactSvd csvd_tall(const Eigen::Ref<const DenseMatrix>& l, double tol = kDefaultRankTolerance);

/// Applies the pseudoinverse U diag(1/lambda) Uᵀ to v.
Vector pinv_apply(const DenseMatrix& u, const Vector& lambda, const Eigen::Ref<const Vector>& v);

inline Vector pinv_apply(const CompactSvd& basis, const Eigen::Ref<const Vector>& v) {
    return pinv_apply(basis.U, basis.lambda, v);
}

// max(|a|, |b|, floor) denominator used for every comparative tolerance.
double relative_error(double a, double b, double floor = 1e-12);

}  // namespace fisens
