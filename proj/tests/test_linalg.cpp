#include <Eigen/Eigenvalues>
#include <random>

#include "doctest.h"
#include "gnsp/linalg.hpp"
#include "oracles.hpp"

using gnsp::Matrix;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

}  // namespace

TEST_CASE("matmul") {
    CHECK(gnsp::matmul(Matrix::Identity(2, 2), mat({{1, 2}, {3, 4}})) == mat({{1, 2}, {3, 4}}));
    CHECK(gnsp::matmul(mat({{1, 0}}), mat({{0}, {1}})) == mat({{0}}));
    CHECK(gnsp::matmul(mat({{1, 2}, {3, 4}}), mat({{5}, {6}})) == mat({{17}, {39}}));
    CHECK_THROWS_AS(gnsp::matmul(mat({{1, 2}}), mat({{1, 2}})), gnsp::DimensionError);
}

TEST_CASE("sym_eig hand cases") {
    const auto diag = gnsp::sym_eig(Matrix(Eigen::Vector3d(1, 2, 0).asDiagonal()));
    CHECK(diag.values(0) == 2.0);
    CHECK(diag.values(1) == 1.0);
    CHECK(diag.values(2) == 0.0);
    CHECK(diag.vectors.col(0).isApprox(Eigen::Vector3d(0, 1, 0)));
    CHECK(diag.vectors.col(1).isApprox(Eigen::Vector3d(1, 0, 0)));

    const auto rank1 = gnsp::sym_eig(mat({{0.5, 0.5}, {0.5, 0.5}}));
    CHECK(rank1.values(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rank1.values(1) == 0.0);
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(std::abs(rank1.vectors(0, 0)) - r) < 1e-12);
    CHECK(std::abs(rank1.vectors(0, 0) - rank1.vectors(1, 0)) < 1e-12);
    CHECK(std::abs(rank1.vectors(0, 1) + rank1.vectors(1, 1)) < 1e-12);

    const auto zero = gnsp::sym_eig(Matrix::Zero(3, 3));
    CHECK(zero.values.isZero(0.0));
    CHECK((zero.vectors.transpose() * zero.vectors).isIdentity(1e-12));

    CHECK_THROWS_AS(gnsp::sym_eig(Matrix::Zero(2, 3)), gnsp::DimensionError);
}

TEST_CASE("sym_eig agrees with Eigen's self-adjoint solver") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 24);
        const Matrix a = oracle::random_matrix(rng, n + 3, n);
        const Matrix m = a.transpose() * a;
        const auto ours = gnsp::sym_eig(m);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(m);
        const Eigen::VectorXd expected = ref.eigenvalues().reverse();
        CHECK((ours.values - expected).cwiseAbs().maxCoeff() <= 1e-9 * expected(0));
        CHECK((ours.vectors.transpose() * ours.vectors).isIdentity(1e-10));
        const Matrix rebuilt = ours.vectors * ours.values.asDiagonal() * ours.vectors.transpose();
        CHECK((rebuilt - m).norm() <= 1e-10 * m.norm());
        for (Eigen::Index j = 1; j < n; ++j) CHECK(ours.values(j - 1) >= ours.values(j));
    }
}

TEST_CASE("frobenius_norm") {
    CHECK(gnsp::frobenius_norm(Matrix::Identity(2, 2)) == doctest::Approx(1.41421356).epsilon(1e-8));
    CHECK(gnsp::frobenius_norm(mat({{1, 1}, {1, 1}})) == 2.0);
    CHECK(gnsp::frobenius_norm(mat({{3}, {4}})) == 5.0);
}

TEST_CASE("softmax_rows") {
    CHECK(gnsp::softmax_rows(mat({{0, 0}})) == mat({{0.5, 0.5}}));
    CHECK(gnsp::softmax_rows(mat({{1000, 1000}})) == mat({{0.5, 0.5}}));
    const Matrix s = gnsp::softmax_rows(mat({{1, 0}}));
    CHECK(s(0, 0) == doctest::Approx(0.73105858).epsilon(1e-8));
    CHECK(s(0, 1) == doctest::Approx(0.26894142).epsilon(1e-8));
    // Dyadic values keep the shifted exponentials exact.
    const Matrix shifted = gnsp::softmax_rows(Matrix(mat({{0.5, -0.25, 2}}).array() + 4.0));
    CHECK(shifted == gnsp::softmax_rows(mat({{0.5, -0.25, 2}})));
}

TEST_CASE("kl_rows") {
    std::mt19937_64 rng(3);
    const Matrix p = oracle::random_matrix(rng, 4, 5);
    CHECK(gnsp::kl_rows(p, p) == 0.0);
    CHECK(gnsp::kl_rows(mat({{3}}), mat({{-2}})) == 0.0);
    const double swapped = gnsp::kl_rows(mat({{1, 0}, {0, 1}}), mat({{0, 1}, {1, 0}}));
    CHECK(swapped == doctest::Approx(0.92423431).epsilon(1e-8));
    const Matrix q = oracle::random_matrix(rng, 4, 5);
    CHECK(gnsp::kl_rows(p, q) == doctest::Approx(oracle::kl_sum(p, q)).epsilon(1e-12));
    CHECK_THROWS_AS(gnsp::kl_rows(p, mat({{1}})), gnsp::DimensionError);
}

TEST_CASE("l2_normalize_rows") {
    CHECK(gnsp::l2_normalize_rows(mat({{3, 4}})).isApprox(mat({{0.6, 0.8}})));
    CHECK(gnsp::l2_normalize_rows(mat({{1, 0}})) == mat({{1, 0}}));
    CHECK(gnsp::l2_normalize_rows(mat({{0, 0}}), 1e-12) == mat({{0, 0}}));
}

TEST_CASE("cosine_sim_matrix") {
    CHECK(gnsp::cosine_sim_matrix(Matrix::Identity(3, 3), Matrix::Identity(3, 3)) ==
          Matrix::Identity(3, 3));
    CHECK(gnsp::cosine_sim_matrix(mat({{1, 0}}), mat({{0, 1}})) == mat({{0}}));
    CHECK(gnsp::cosine_sim_matrix(mat({{1, 1}}), mat({{1, 0}}))(0, 0) ==
          doctest::Approx(0.70710678).epsilon(1e-8));
    std::mt19937_64 rng(5);
    const Matrix a = oracle::random_matrix(rng, 6, 4), b = oracle::random_matrix(rng, 3, 4);
    CHECK(gnsp::cosine_sim_matrix(a, b).isApprox(oracle::cosine(a, b), 1e-12));
    CHECK_THROWS_AS(gnsp::cosine_sim_matrix(a, mat({{1}})), gnsp::DimensionError);
}
