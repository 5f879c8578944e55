#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "margop/linalg/matrix.hpp"
#include "margop/simd/kernels.hpp"
#include "oracles/random_mdp.hpp"

using namespace margop;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  return Matrix(r, c, fixtures::random_vector(r * c, rng));
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

}  // namespace

TEST(Matrix, ConstructionChecksSize) {
  EXPECT_THROW(Matrix(2, 3, Vec(5)), std::invalid_argument);
  Matrix m(2, 3, Vec{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m(1, 2), 6.0);
  EXPECT_EQ(m.row(1)[0], 4.0);
  EXPECT_EQ(m.column(1), (Vec{2, 5}));
  EXPECT_EQ(m.transposed()(2, 1), 6.0);
}

TEST(Matrix, ProductsMatchEigen) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t r = 1 + trial % 9, c = 1 + (trial * 7) % 13;
    Matrix a = random_matrix(r, c, rng);
    Matrix b = random_matrix(c, 5, rng);
    Vec x = fixtures::random_vector(c, rng);
    Vec z = fixtures::random_vector(r, rng);
    Eigen::VectorXd ex = Eigen::Map<Eigen::VectorXd>(x.data(), x.size());
    Eigen::VectorXd ez = Eigen::Map<Eigen::VectorXd>(z.data(), z.size());
    Eigen::VectorXd y = to_eigen(a) * ex;
    Eigen::VectorXd yt = to_eigen(a).transpose() * ez;
    Eigen::MatrixXd ab = to_eigen(a) * to_eigen(b);
    Vec my = matvec(a, x), myt = matvec_transposed(a, z);
    Matrix mab = matmul(a, b);
    for (std::size_t i = 0; i < r; ++i) EXPECT_NEAR(my[i], y(i), 1e-12);
    for (std::size_t i = 0; i < c; ++i) EXPECT_NEAR(myt[i], yt(i), 1e-12);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(mab(i, j), ab(i, j), 1e-12);
  }
}

TEST(Lu, SolveAndTransposedSolveMatchEigen) {
  std::mt19937_64 rng(5);
  for (std::size_t n : {1u, 2u, 5u, 17u, 40u}) {
    Matrix a = random_matrix(n, n, rng);
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 0.5;
    Vec b = fixtures::random_vector(n, rng);
    LuDecomposition lu(a);
    Eigen::VectorXd eb = Eigen::Map<Eigen::VectorXd>(b.data(), b.size());
    Eigen::VectorXd x = to_eigen(a).fullPivLu().solve(eb);
    Eigen::VectorXd xt = to_eigen(a).transpose().fullPivLu().solve(eb);
    Vec mx = lu.solve(b), mxt = lu.solve_transposed(b);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(mx[i], x(i), 1e-9 * (1 + std::fabs(x(i))));
      EXPECT_NEAR(mxt[i], xt(i), 1e-9 * (1 + std::fabs(xt(i))));
    }
    Matrix inv = lu.inverse();
    Matrix prod = matmul(a, inv);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(prod(i, j), i == j ? 1.0 : 0.0, 1e-9);
  }
}

TEST(Lu, SingularMatrixThrows) {
  Matrix a(3, 3, Vec{1, 2, 3, 2, 4, 6, 1, 0, 1});
  EXPECT_THROW(LuDecomposition{a}, std::runtime_error);
  EXPECT_THROW(LuDecomposition(Matrix(2, 3)), std::invalid_argument);
}

TEST(Lu, ScalarAndVectorBackendsAgree) {
  std::mt19937_64 rng(9);
  Matrix a = random_matrix(30, 30, rng);
  for (std::size_t i = 0; i < 30; ++i) a(i, i) += 3.0;
  Vec b = fixtures::random_vector(30, rng);
  const auto original = simd::active_backend();
  simd::set_backend(simd::Backend::kScalar);
  Vec ref = LuDecomposition(a).solve(b);
  for (auto be : {simd::Backend::kAvx2, simd::Backend::kNeon}) {
    if (!simd::backend_available(be)) continue;
    simd::set_backend(be);
    Vec x = LuDecomposition(a).solve(b);
    for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(x[i], ref[i], 1e-12);
  }
  simd::set_backend(original);
}

TEST(Norms, Basics) {
  Vec v{1.0, -2.5, 0.5};
  EXPECT_DOUBLE_EQ(l1_norm(v), 4.0);
  EXPECT_DOUBLE_EQ(max_abs(v), 2.5);
  EXPECT_DOUBLE_EQ(max_abs_diff(v, Vec{1.0, -2.0, 0.0}), 0.5);
  Matrix m(2, 2, Vec{1, -1, 0.5, 0.25});
  EXPECT_DOUBLE_EQ(max_row_abs_sum(m), 2.0);
  Matrix im = identity_minus(m, 0.5);
  EXPECT_DOUBLE_EQ(im(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(im(0, 1), 0.5);
}
