#include <catch2/catch_amalgamated.hpp>

#include "biotplate/linalg.hpp"

using namespace biotplate;

namespace {

SpMat sparse_from_dense(const Eigen::MatrixXd& D) {
  SpMat A(D.rows(), D.cols());
  std::vector<Eigen::Triplet<double>> t;
  for (long i = 0; i < D.rows(); ++i)
    for (long j = 0; j < D.cols(); ++j)
      if (D(i, j) != 0.0) t.emplace_back(i, j, D(i, j));
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

}  // namespace

TEST_CASE("CG solves an SPD system to the requested tolerance") {
  const int n = 40;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    L(i, i) = 2.0 + 0.01 * i;
    if (i > 0) L(i, i - 1) = -1.0;
  }
  Eigen::MatrixXd D = L * L.transpose();
  SpMat A = sparse_from_dense(D);
  Vec b = Vec::LinSpaced(n, 1.0, 2.0);
  Vec x;
  auto info = solve_spd_cg(A, b, x, 1e-10);
  REQUIRE((A * x - b).norm() / b.norm() <= 1e-10);
  REQUIRE(info.iterations > 0);
}

TEST_CASE("CG detects indefiniteness") {
  Eigen::MatrixXd D(2, 2);
  D << 1.0, 0.0, 0.0, -1.0;
  SpMat A = sparse_from_dense(D);
  Vec b(2);
  b << 1.0, 1.0;
  Vec x;
  REQUIRE_THROWS_AS(solve_spd_cg(A, b, x), solver_error);
}

TEST_CASE("sparse LU handles an indefinite saddle system") {
  Eigen::MatrixXd D(3, 3);
  D << 2.0, 0.0, 1.0, 0.0, 3.0, 1.0, 1.0, 1.0, 0.0;
  SpMat A = sparse_from_dense(D);
  Vec b(3);
  b << 1.0, 2.0, 0.0;
  Vec x = solve_saddle(A, b);
  REQUIRE((A * x - b).norm() <= 1e-10);
}

TEST_CASE("sparse LU reports singular systems") {
  Eigen::MatrixXd D(2, 2);
  D << 1.0, 1.0, 1.0, 1.0;
  SpMat A = sparse_from_dense(D);
  Vec b(2);
  b << 1.0, 0.0;
  bool threw = false;
  try {
    solve_saddle(A, b);
  } catch (const solver_error&) {
    threw = true;
  }
  REQUIRE(threw);
}

TEST_CASE("symmetric eigendecomposition: descending order and reconstruction") {
  Eigen::MatrixXd M(3, 3);
  M << 2.0, 0.5, 0.0, 0.5, 1.0, 0.25, 0.0, 0.25, 0.5;
  auto es = sym_eigendecomposition(M);
  REQUIRE(es.D[0] >= es.D[1]);
  REQUIRE(es.D[1] >= es.D[2]);
  REQUIRE((es.Q.transpose() * es.D.asDiagonal() * es.Q - M).norm() < 1e-12);
  REQUIRE((es.Q * es.Q.transpose() - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-12);
}
