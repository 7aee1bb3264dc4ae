#include "ofm/eig_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/SVD>

#include "ofm/errors.hpp"
#include "ofm/kernels.hpp"

namespace ofm {

namespace {

constexpr int kMaxSweeps = 100;

EigenPairs sorted_pairs(const Eigen::MatrixXd& diag_source, const Eigen::MatrixXd& vectors) {
  const Index n = diag_source.rows();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) {
    return diag_source(i, i) < diag_source(j, j);
  });
  EigenPairs out;
  out.values.resize(n);
  out.vectors.resize(vectors.rows(), n);
  for (Index c = 0; c < n; ++c) {
    out.values(c) = diag_source(order[static_cast<std::size_t>(c)], order[static_cast<std::size_t>(c)]);
    out.vectors.col(c) = vectors.col(order[static_cast<std::size_t>(c)]);
  }
  return out;
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return {};
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues();
}

}  // namespace

EigenPairs jacobi_eig(const Eigen::MatrixXd& input) {
  const Index n = input.rows();
  if (input.cols() != n) throw OracleError("jacobi_eig needs a square matrix");
  if (n > kOracleMaxDim) {
    throw OracleError("dense oracle limited to n <= " + std::to_string(kOracleMaxDim));
  }
  const double max_abs = n > 0 ? input.cwiseAbs().maxCoeff() : 0.0;
  if (n > 0 && (input - input.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, max_abs)) {
    throw OracleError("jacobi_eig needs a symmetric matrix");
  }

  Eigen::MatrixXd a = 0.5 * (input + input.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double norm = a.norm();
  const double target = 1e-12 * norm;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off2 = 0.0;
    for (Index c = 0; c < n; ++c) {
      for (Index r = 0; r < c; ++r) off2 += 2.0 * a(r, c) * a(r, c);
    }
    if (std::sqrt(off2) <= target) break;

    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        // Skip rotations that cannot change the diagonal in floating point.
        if (std::abs(apq) < 1e-18 * (std::abs(app) + std::abs(aqq)) && sweep > 3) {
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        double* col_p = a.col(p).data();
        double* col_q = a.col(q).data();
        for (Index r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = col_p[r];
          const double arq = col_q[r];
          col_p[r] = c * arp - s * arq;
          col_q[r] = s * arp + c * arq;
        }
        for (Index r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          a(p, r) = col_p[r];
          a(q, r) = col_q[r];
        }
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;

        double* vp = v.col(p).data();
        double* vq = v.col(q).data();
        for (Index r = 0; r < n; ++r) {
          const double x = vp[r];
          const double y = vq[r];
          vp[r] = c * x - s * y;
          vq[r] = s * x + c * y;
        }
      }
    }
  }
  return sorted_pairs(a, v);
}

EigenPairs bottom_k(const SparseSym& a, Index k) {
  if (k < 1 || k > a.n) throw ArgumentError("bottom_k needs 1 <= k <= n");
  if (a.n > kOracleMaxDim) {
    throw OracleError("dense oracle limited to n <= " + std::to_string(kOracleMaxDim));
  }
  EigenPairs all = jacobi_eig(a.to_dense());
  EigenPairs out;
  out.values = all.values.head(k);
  out.vectors = all.vectors.leftCols(k);
  return out;
}

EigenPairs bottom_k_shifted(const SparseSym& a, Index k) {
  EigenPairs all = jacobi_eig(a.to_dense());
  if (all.values.size() > 0 &&
      (all.values.minCoeff() < -2.0 - 1e-9 || all.values.maxCoeff() > 1e-9)) {
    throw OracleError("shifted operator has eigenvalues outside [-2, 0]");
  }
  if (k < 1 || k > a.n) throw ArgumentError("bottom_k needs 1 <= k <= n");
  EigenPairs out;
  out.values = all.values.head(k);
  out.vectors = all.vectors.leftCols(k);
  return out;
}

Eigen::MatrixXd orthonormalize(const FeatureMatrix& x) {
  Eigen::MatrixXd q = x;
  for (Index j = 0; j < q.cols(); ++j) {
    const double original = x.col(j).norm();
    if (original == 0.0) throw RankError("zero column " + std::to_string(j));
    for (int pass = 0; pass < 2; ++pass) {
      for (Index i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
    }
    const double remaining = q.col(j).norm();
    if (remaining < 1e-12 * original) {
      throw RankError("column " + std::to_string(j) + " is linearly dependent on earlier columns");
    }
    q.col(j) /= remaining;
  }
  return q;
}

EigenPairs rayleigh_ritz(const SparseSym& a, const FeatureMatrix& x) {
  if (x.rows() != a.n) throw DimensionError("rayleigh_ritz panel/operator mismatch");
  Eigen::MatrixXd q = orthonormalize(x);
  Eigen::MatrixXd aq = spmm_serial(a, q);
  Eigen::MatrixXd h = q.transpose() * aq;
  h = 0.5 * (h + h.transpose()).eval();
  EigenPairs small = jacobi_eig(h);
  EigenPairs out;
  out.values = small.values;
  out.vectors = q * small.vectors;
  return out;
}

std::vector<double> principal_angles(const FeatureMatrix& x, const FeatureMatrix& y) {
  if (x.rows() != y.rows()) throw DimensionError("principal_angles needs equal row counts");
  Eigen::MatrixXd qx = orthonormalize(x);
  Eigen::MatrixXd qy = orthonormalize(y);
  if (qy.cols() > qx.cols()) std::swap(qx, qy);
  // Now dim span(qy) <= dim span(qx); there are qy.cols() angles.
  Eigen::MatrixXd c = qx.transpose() * qy;
  Eigen::VectorXd cosines = singular_values(c);                 // descending
  Eigen::VectorXd sines = singular_values(qy - qx * c);          // descending
  const Index m = qy.cols();
  std::vector<double> angles(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    const double cs = std::clamp(cosines(i), 0.0, 1.0);
    const double sn = std::clamp(sines(m - 1 - i), 0.0, 1.0);
    angles[static_cast<std::size_t>(i)] = cs * cs >= 0.5 ? std::asin(sn) : std::acos(cs);
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

double relative_residual(const SparseSym& a, const FeatureMatrix& x) {
  SparseSym b = identity_minus(a);
  EigenPairs ritz = rayleigh_ritz(b, x);
  Eigen::MatrixXd u_lambda = ritz.vectors * ritz.values.asDiagonal();
  Eigen::MatrixXd bu = spmm_serial(b, ritz.vectors);
  const double denom = u_lambda.norm();
  if (denom == 0.0) throw RankError("Ritz values vanish; residual undefined");
  return (bu - u_lambda).norm() / denom;
}

}  // namespace ofm
