#pragma once

#include <vector>

#include <Eigen/Core>

#include "ofm/graph.hpp"
#include "ofm/types.hpp"

namespace ofm {

/// Largest dense problem the oracle accepts.
inline constexpr Index kOracleMaxDim = 2000;

/// Ascending eigenvalues with matching orthonormal eigenvector columns.
struct EigenPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

/// Cyclic Jacobi eigendecomposition of a dense symmetric matrix. Sweeps until
/// the off-diagonal Frobenius norm drops below 1e-12 ||A||_F. Throws
/// OracleError for n > kOracleMaxDim or asymmetry above 1e-12 (relative).
EigenPairs jacobi_eig(const Eigen::MatrixXd& a);

/// k smallest eigenpairs of a sparse operator through the dense oracle.
EigenPairs bottom_k(const SparseSym& a, Index k);

/// Same as bottom_k, and additionally checks that every eigenvalue of a
/// shifted normalized-Laplacian operator lies in [-2 - 1e-9, 1e-9].
EigenPairs bottom_k_shifted(const SparseSym& a, Index k);

/// Modified Gram-Schmidt with one reorthogonalization pass. Throws RankError
/// when a column's remaining norm falls below 1e-12 of its original norm.
Eigen::MatrixXd orthonormalize(const FeatureMatrix& x);

/// Ritz pairs of `a` on span(x), Ritz values ascending.
EigenPairs rayleigh_ritz(const SparseSym& a, const FeatureMatrix& x);

/// Principal angles between span(x) and span(y), ascending, in radians.
/// Small angles come from sines, large ones from cosines, so both ends are
/// accurate.
std::vector<double> principal_angles(const FeatureMatrix& x, const FeatureMatrix& y);

/// ||B U - U Lambda||_F / ||U Lambda||_F where (Lambda, U) are the Ritz pairs
/// of B = I - A = D^{-1/2} S D^{-1/2} + 2I on span(x).
double relative_residual(const SparseSym& a, const FeatureMatrix& x);

}  // namespace ofm
