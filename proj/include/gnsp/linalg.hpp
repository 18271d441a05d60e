#ifndef GNSP_LINALG_HPP
#define GNSP_LINALG_HPP

// Dense kernel shared by every other module. Everything here is a pure
// function of its arguments; the matrix type is a row-major Eigen matrix
// templated on the scalar, with double used throughout the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "gnsp/error.hpp"

namespace gnsp {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using RowVector = RowVectorX<double>;

// Eigenvalues within this fraction of the largest one are treated as exact zeros.
inline constexpr double kEigZeroClamp = 1e-10;
inline constexpr int kJacobiMaxSweeps = 100;
inline constexpr double kJacobiTolerance = 1e-12;

template <typename Derived>
std::string shape_of(const Eigen::MatrixBase<Derived>& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// Eigendecomposition of a symmetric matrix, sorted descending.
template <typename Scalar>
struct EigenSpectrum {
    VectorX<Scalar> values;
    MatrixX<Scalar> vectors;  // column j pairs with values[j]

    Eigen::Index size() const { return values.size(); }
};

template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> matmul(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: cannot multiply " + shape_of(a) + " by " + shape_of(b));
    }
    MatrixX<typename DerivedA::Scalar> out(a.rows(), b.cols());
    out.noalias() = a * b;
    return out;
}

template <typename Derived>
typename Derived::Scalar frobenius_norm(const Eigen::MatrixBase<Derived>& m) {
    return m.norm();
}

template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    MatrixX<Scalar> out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const Scalar shift = logits.row(i).maxCoeff();
        Scalar sum = 0;
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            out(i, j) = std::exp(logits(i, j) - shift);
            sum += out(i, j);
        }
        out.row(i) /= sum;
    }
    return out;
}

template <typename Derived>
MatrixX<typename Derived::Scalar> log_softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    MatrixX<Scalar> out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const Scalar shift = logits.row(i).maxCoeff();
        Scalar sum = 0;
        for (Eigen::Index j = 0; j < logits.cols(); ++j) sum += std::exp(logits(i, j) - shift);
        const Scalar log_norm = shift + std::log(sum);
        out.row(i) = logits.row(i).array() - log_norm;
    }
    return out;
}

// Sum over rows of KL(softmax(p_row) || softmax(q_row)).
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl_rows(const Eigen::MatrixBase<DerivedP>& p_logits,
                                  const Eigen::MatrixBase<DerivedQ>& q_logits) {
    using Scalar = typename DerivedP::Scalar;
    if (p_logits.rows() != q_logits.rows() || p_logits.cols() != q_logits.cols()) {
        throw DimensionError("kl_rows: shape mismatch " + shape_of(p_logits) + " vs " +
                             shape_of(q_logits));
    }
    const MatrixX<Scalar> log_p = log_softmax_rows(p_logits);
    const MatrixX<Scalar> log_q = log_softmax_rows(q_logits);
    Scalar total = 0;
    for (Eigen::Index i = 0; i < log_p.rows(); ++i) {
        Scalar row = 0;
        for (Eigen::Index j = 0; j < log_p.cols(); ++j) {
            row += std::exp(log_p(i, j)) * (log_p(i, j) - log_q(i, j));
        }
        // Rounding can leave a tiny negative residue for identical rows.
        total += std::max(row, Scalar(0));
    }
    return total;
}

template <typename Derived>
MatrixX<typename Derived::Scalar> l2_normalize_rows(const Eigen::MatrixBase<Derived>& m,
                                                    typename Derived::Scalar eps = 1e-12) {
    using Scalar = typename Derived::Scalar;
    MatrixX<Scalar> out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        out.row(i) /= std::max(out.row(i).norm(), eps);
    }
    return out;
}

template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> cosine_sim_matrix(const Eigen::MatrixBase<DerivedA>& a,
                                                     const Eigen::MatrixBase<DerivedB>& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("cosine_sim_matrix: embedding widths differ, " + shape_of(a) +
                             " vs " + shape_of(b));
    }
    return matmul(l2_normalize_rows(a), l2_normalize_rows(b).transpose());
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix. The input is
// symmetrized as (M + M^T)/2 before rotating. Eigenvalues come back sorted
// descending; those within kEigZeroClamp * max|lambda| of zero are set to 0.
// Eigenvector signs are fixed so the largest-magnitude entry is positive.
template <typename Derived>
EigenSpectrum<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    using std::abs;
    using std::sqrt;
    if (m.rows() != m.cols()) {
        throw DimensionError("sym_eig: matrix must be square, got " + shape_of(m));
    }
    const Eigen::Index n = m.rows();
    MatrixX<Scalar> a = (m + m.transpose()) / Scalar(2);
    MatrixX<Scalar> v = MatrixX<Scalar>::Identity(n, n);

    const Scalar scale = a.norm();
    const Scalar tolerance = Scalar(kJacobiTolerance) * scale;
    auto off_diagonal = [&a, n]() {
        Scalar sum = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (i != j) sum += a(i, j) * a(i, j);
        return sqrt(sum);
    };

    Scalar off = off_diagonal();
    int sweep = 0;
    while (off > tolerance) {
        if (sweep == kJacobiMaxSweeps) {
            throw ConvergenceError("sym_eig: no convergence after " +
                                       std::to_string(kJacobiMaxSweeps) +
                                       " sweeps, off-diagonal residual " + std::to_string(off),
                                   off);
        }
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const Scalar apq = a(p, q);
                if (apq == Scalar(0)) continue;
                // Symmetric Schur rotation zeroing a(p, q).
                const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
                const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                                 (abs(theta) + sqrt(theta * theta + Scalar(1)));
                const Scalar c = Scalar(1) / sqrt(t * t + Scalar(1));
                const Scalar s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const Scalar akp = a(k, p);
                    const Scalar akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const Scalar apk = a(p, k);
                    const Scalar aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0;
                a(q, p) = 0;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const Scalar vkp = v(k, p);
                    const Scalar vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
        off = off_diagonal();
        ++sweep;
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&a](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

    EigenSpectrum<Scalar> out{VectorX<Scalar>(n), MatrixX<Scalar>(n, n)};
    Scalar largest = 0;
    for (Eigen::Index i = 0; i < n; ++i) largest = std::max(largest, abs(a(i, i)));
    const Scalar clamp = Scalar(kEigZeroClamp) * largest;
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index src = order[static_cast<std::size_t>(j)];
        const Scalar value = a(src, src);
        out.values(j) = abs(value) <= clamp ? Scalar(0) : value;
        out.vectors.col(j) = v.col(src);
        Eigen::Index pivot = 0;
        out.vectors.col(j).cwiseAbs().maxCoeff(&pivot);
        if (out.vectors(pivot, j) < 0) out.vectors.col(j) *= Scalar(-1);
    }
    return out;
}

}  // namespace gnsp

#endif  // GNSP_LINALG_HPP
