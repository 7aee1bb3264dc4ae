#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ofm/eig_oracle.hpp"
#include "ofm/errors.hpp"
#include "support/oracles.hpp"

using namespace ofm;

TEST_SUITE("eig_oracle") {

TEST_CASE("jacobi textbook cases") {
  Eigen::Matrix3d d = Eigen::Vector3d(3, 1, 2).asDiagonal();
  EigenPairs e = jacobi_eig(d);
  CHECK(e.values == Eigen::Vector3d(1, 2, 3));
  Eigen::Matrix3d perm;
  perm << 0, 0, 1, 1, 0, 0, 0, 1, 0;
  CHECK(e.vectors.cwiseAbs() == perm);

  Eigen::Matrix2d s;
  s << 0, 1, 1, 0;
  EigenPairs f = jacobi_eig(s);
  CHECK(f.values(0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(f.values(1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(std::abs(f.vectors(0, 0)) - 1 / std::sqrt(2.0)) < 1e-15);
  CHECK(f.vectors(0, 0) * f.vectors(1, 0) < 0);
  CHECK(f.vectors(0, 1) * f.vectors(1, 1) > 0);
}

TEST_CASE("jacobi reconstructs random symmetric matrices") {
  Eigen::MatrixXd m = testing::random_matrix(100, 100, 3);
  Eigen::MatrixXd a = m + m.transpose();
  EigenPairs e = jacobi_eig(a);
  const Eigen::MatrixXd& q = e.vectors;
  CHECK((q * e.values.asDiagonal() * q.transpose() - a).norm() < 1e-10 * a.norm());
  CHECK((q.transpose() * q - Eigen::MatrixXd::Identity(100, 100)).norm() < 1e-10);
  CHECK((a * q - q * e.values.asDiagonal()).norm() < 1e-8 * a.norm());
  for (Index i = 1; i < 100; ++i) CHECK(e.values(i - 1) <= e.values(i));
  CHECK((e.values - testing::reference_eigenvalues(a)).norm() < 1e-10 * a.norm());
}

TEST_CASE("jacobi guards") {
  Eigen::MatrixXd asym(2, 2);
  asym << 0, 1, 2, 0;
  CHECK_THROWS_AS(jacobi_eig(asym), OracleError);
  CHECK_THROWS_AS(jacobi_eig(Eigen::MatrixXd::Zero(2, 3)), OracleError);
  CHECK_THROWS_AS(jacobi_eig(Eigen::MatrixXd::Zero(2001, 2001)), OracleError);
}

TEST_CASE("bottom_k on graph operators") {
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (NodeId i = 0; i < 4; ++i) {
    for (NodeId j = i + 1; j < 4; ++j) {
      pairs.emplace_back(i, j);
      pairs.emplace_back(i + 4, j + 4);
    }
  }
  SparseSym two = build_shifted_operator(make_graph(8, pairs));
  EigenPairs b = bottom_k_shifted(two, 2);
  CHECK(b.values(0) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(b.values(1) == doctest::Approx(-2.0).epsilon(1e-12));

  SparseSym path = build_shifted_operator(make_graph(3, {{0, 1}, {1, 2}}));
  EigenPairs p = bottom_k(path, 2);
  CHECK(p.values(0) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(p.values(1) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(bottom_k(path, 3).values.size() == 3);
  CHECK_THROWS_AS(bottom_k(path, 4), ArgumentError);
}

TEST_CASE("orthonormalize") {
  Eigen::MatrixXd x = testing::random_matrix(30, 5, 1);
  Eigen::MatrixXd q = orthonormalize(x);
  CHECK((q.transpose() * q - Eigen::MatrixXd::Identity(5, 5)).norm() < 1e-14);
  // Same span: projecting x onto q loses nothing.
  CHECK((x - q * (q.transpose() * x)).norm() < 1e-12 * x.norm());
  Eigen::MatrixXd dup = x;
  dup.col(3) = dup.col(1);
  CHECK_THROWS_AS(orthonormalize(dup), RankError);
}

TEST_CASE("rayleigh-ritz") {
  Graph g = testing::random_graph(60, 0.1, 2);
  SparseSym a = build_shifted_operator(g);
  EigenPairs all = jacobi_eig(a.to_dense());
  Eigen::MatrixXd u = all.vectors.leftCols(4);
  Eigen::MatrixXd shuffled = u(Eigen::all, std::vector<int>{2, 0, 3, 1});
  EigenPairs r = rayleigh_ritz(a, shuffled);
  CHECK((r.values - all.values.head(4)).norm() < 1e-10);
  EigenPairs rr = rayleigh_ritz(a, u * testing::random_orthogonal(4, 3));
  CHECK((rr.values - all.values.head(4)).norm() < 1e-10);
  CHECK((rr.vectors.transpose() * rr.vectors - Eigen::MatrixXd::Identity(4, 4)).norm() < 1e-10);

  Eigen::MatrixXd dup = testing::random_matrix(60, 3, 1);
  dup.col(2) = dup.col(0);
  CHECK_THROWS_AS(rayleigh_ritz(a, dup), RankError);
}

TEST_CASE("principal angles") {
  Eigen::MatrixXd x = testing::random_matrix(40, 3, 4);
  for (double t : principal_angles(x, x)) CHECK(t < 1e-7);
  for (double t : principal_angles(x, x * testing::random_orthogonal(3, 1))) CHECK(t < 1e-10);

  Eigen::MatrixXd e = Eigen::MatrixXd::Identity(10, 10);
  auto right = principal_angles(e.leftCols(3), e.middleCols(3, 3));
  for (double t : right) CHECK(t == doctest::Approx(std::numbers::pi / 2).epsilon(1e-14));

  // Known angle: span{e0} vs span{cos t e0 + sin t e1}.
  for (double t : {1e-9, 1e-4, 0.3, 1.2}) {
    Eigen::VectorXd a = e.col(0);
    Eigen::VectorXd b = std::cos(t) * e.col(0) + std::sin(t) * e.col(1);
    CHECK(principal_angles(a, b).at(0) == doctest::Approx(t).epsilon(1e-8));
  }
}

TEST_CASE("relative residual") {
  Graph g = testing::random_graph(100, 0.08, 9);
  SparseSym a = build_shifted_operator(g);
  EigenPairs all = jacobi_eig(a.to_dense());
  Eigen::MatrixXd u = all.vectors.leftCols(4);
  CHECK(relative_residual(a, u) < 1e-9);
  Eigen::MatrixXd x = testing::random_matrix(100, 4, 3);
  const double r = relative_residual(a, x);
  CHECK(r > 0.1);
  CHECK(std::abs(relative_residual(a, x * testing::random_orthogonal(4, 8)) - r) < 1e-10);

  // Direct evaluation with B = I - A and a dense eigen-solve of the projection.
  Eigen::MatrixXd b = Eigen::MatrixXd::Identity(100, 100) - a.to_dense();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(100, 4);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(q.transpose() * b * q);
  Eigen::MatrixXd uh = q * small.eigenvectors();
  Eigen::MatrixXd ul = uh * small.eigenvalues().asDiagonal();
  CHECK(r == doctest::Approx((b * uh - ul).norm() / ul.norm()).epsilon(1e-10));
}

TEST_CASE("spectra of constructed operators stay in [-2, 0]") {
  for (std::uint64_t s = 0; s < 15; ++s) {
    Graph g = testing::random_graph(30 + s * 5, 0.05 + 0.02 * static_cast<double>(s % 5), 700 + s);
    EigenPairs e = bottom_k_shifted(build_shifted_operator(g), 1);
    CHECK(e.values(0) >= -2.0 - 1e-9);
  }
}

}  // TEST_SUITE
