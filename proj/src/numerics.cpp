#include "fisens/numerics.hpp"

#include "fisens/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fisens {

namespace {

// Largest-magnitude entry of every column made positive (first index wins ties).
template <typename Matrix>
void fix_column_signs(Matrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const double mag = std::abs(m(i, j));
            if (mag > best) {
                best = mag;
                arg = i;
            }
        }
        if (m.rows() > 0 && m(arg, j) < 0.0) m.col(j) *= -1.0;
    }
}

// Modified Gram-Schmidt, applied in place. Columns are assumed numerically independent.
void orthonormalize_columns(Eigen::MatrixXd& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < j; ++i) {
            const double proj = m.col(i).dot(m.col(j));
            m.col(j) -= proj * m.col(i);
        }
        const double norm = m.col(j).norm();
        if (norm > 0.0) m.col(j) /= norm;
    }
}

}  // namespace

void require_finite(const Eigen::Ref<const DenseMatrix>& m, const char* what) {
    if (!m.allFinite()) throw ValidationError(std::string(what) + ": non-finite entry");
}

double relative_error(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

EigenResult sym_eig(const Eigen::Ref<const DenseMatrix>& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("sym_eig: matrix is " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + ", expected square");
    }
    require_finite(a, "sym_eig");
    const auto n = a.rows();
    EigenResult out;
    if (n == 0) return out;

    const double scale = std::max(a.cwiseAbs().maxCoeff(), 1.0);
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw ValidationError("sym_eig: matrix is not symmetric");
    }
    const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    if (solver.info() != Eigen::Success) throw ComputeError("sym_eig: solver did not converge");

    // Eigen returns ascending order.
    out.eigenvalues = solver.eigenvalues().reverse();
    out.eigenvectors = solver.eigenvectors().rowwise().reverse();
    fix_column_signs(out.eigenvectors);
    return out;
}

CompactSvd csvd_tall(const Eigen::Ref<const DenseMatrix>& l, double tol) {
    const auto p = l.rows();
    const auto k = l.cols();
    if (p < 1 || k < 1) throw DimensionError("csvd_tall: empty factor");
    if (!(tol > 0.0 && tol < 1.0)) throw ValidationError("csvd_tall: tolerance must lie in (0,1)");
    require_finite(l, "csvd_tall");

    CompactSvd out;
    out.U.resize(p, 0);
    if (l.isZero(0.0)) return out;

    // Column-major working copy: every step below walks down columns.
    const Eigen::MatrixXd lc = l;
    DenseMatrix gram(k, k);
    gram.noalias() = lc.transpose() * lc;
    const EigenResult eig = sym_eig(gram);
    const double top = eig.eigenvalues[0];
    if (!(top > 0.0)) return out;

    const auto cap = std::min(p, k);
    Eigen::Index rank = 0;
    while (rank < cap && eig.eigenvalues[rank] > tol * top) ++rank;

    out.rank = static_cast<std::size_t>(rank);
    out.lambda = eig.eigenvalues.head(rank);
    // U = L V Λ^{-1/2}; columns are orthonormal in exact arithmetic.
    Eigen::MatrixXd u = lc * eig.eigenvectors.leftCols(rank);
    for (Eigen::Index j = 0; j < rank; ++j) u.col(j) /= std::sqrt(out.lambda[j]);
    orthonormalize_columns(u);
    fix_column_signs(u);
    out.U = u;
    return out;
}

Vector pinv_apply(const DenseMatrix& u, const Vector& lambda, const Eigen::Ref<const Vector>& v) {
    if (u.cols() != lambda.size()) throw DimensionError("pinv_apply: basis and spectrum disagree");
    if (v.size() != u.rows()) {
        throw DimensionError("pinv_apply: vector has length " + std::to_string(v.size()) +
                             ", basis has " + std::to_string(u.rows()) + " rows");
    }
    if (u.cols() == 0) return Vector::Zero(v.size());
    const Vector coords = (u.transpose() * v).cwiseQuotient(lambda);
    return u * coords;
}

}  // namespace fisens
