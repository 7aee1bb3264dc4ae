#include "ofm/kernels.hpp"

#include "ofm/errors.hpp"

namespace ofm {

namespace {

void check_rows(const SparseSym& a, const FeatureMatrix& x) {
  if (a.n != x.rows()) {
    throw DimensionError("operator is " + std::to_string(a.n) + "x" + std::to_string(a.n) +
                         " but the panel has " + std::to_string(x.rows()) + " rows");
  }
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kOfmF1:
      return "ofm-f1";
    case Method::kTriOfmF1:
      return "triofm-f1";
    case Method::kOfmF2:
      return "ofm-f2";
    case Method::kTriOfmF2:
      return "triofm-f2";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
  for (Method m : kAllMethods) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

FeatureMatrix spmm_serial(const SparseSym& a, const FeatureMatrix& x) {
  check_rows(a, x);
  const Index k = x.cols();
  FeatureMatrix y(a.n, k);
  for (Index c = 0; c < k; ++c) {
    const double* xc = x.col(c).data();
    double* yc = y.col(c).data();
    for (Index i = 0; i < a.n; ++i) {
      double s = 0.0;
      for (Index p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) s += a.values[p] * xc[a.col_idx[p]];
      yc[i] = s;
    }
  }
  return y;
}

SmallMatrix triu(const SmallMatrix& m) {
  return m.triangularView<Eigen::Upper>();
}

double objective_from_products(Method method, double a_norm2, const SmallMatrix& xtx,
                               const SmallMatrix& xtax) {
  if (is_f1_family(method)) {
    return a_norm2 + 2.0 * xtax.trace() + xtx.squaredNorm();
  }
  // tr((2I - X^T X) X^T A X) with both factors symmetric.
  return 2.0 * xtax.trace() - xtx.cwiseProduct(xtax).sum();
}

double objective(Method method, const SparseSym& a, const FeatureMatrix& x) {
  check_rows(a, x);
  FeatureMatrix w = spmm_serial(a, x);
  SmallMatrix xtx = x.transpose() * x;
  SmallMatrix xtax = x.transpose() * w;
  return objective_from_products(method, is_f1_family(method) ? a.frobenius_norm_squared() : 0.0,
                                 xtx, xtax);
}

DirectionFactors direction_factors(Method method, const SmallMatrix& xtx,
                                   const SmallMatrix& xtax) {
  DirectionFactors f;
  switch (method) {
    case Method::kOfmF1:
      f.x_factor = xtx;
      break;
    case Method::kTriOfmF1:
      f.x_factor = triu(xtx);
      break;
    case Method::kOfmF2:
      f.x_factor = xtax;
      f.w_factor = xtx;
      break;
    case Method::kTriOfmF2:
      f.x_factor = triu(xtax);
      f.w_factor = triu(xtx);
      break;
  }
  return f;
}

FeatureMatrix combine_direction(Method method, const FeatureMatrix& w,
                                const FeatureMatrix& x_times, const FeatureMatrix& w_times) {
  // The triangular scalars are exactly the OFM ones divided by a power of two,
  // which makes the k = 1 reductions hold bit for bit.
  switch (method) {
    case Method::kOfmF1:
      return 4.0 * (w + x_times);
    case Method::kTriOfmF1:
      return w + x_times;
    case Method::kOfmF2:
      return 4.0 * w - 2.0 * w_times - 2.0 * x_times;
    case Method::kTriOfmF2:
      return 2.0 * w - 1.0 * w_times - 1.0 * x_times;
  }
  return {};
}

FeatureMatrix direction(Method method, const SparseSym& a, const FeatureMatrix& x) {
  check_rows(a, x);
  FeatureMatrix w = spmm_serial(a, x);
  SmallMatrix xtx = x.transpose() * x;
  SmallMatrix xtax;
  if (!is_f1_family(method)) xtax = x.transpose() * w;
  DirectionFactors f = direction_factors(method, xtx, xtax);
  FeatureMatrix x_times = x * f.x_factor;
  FeatureMatrix w_times;
  if (!is_f1_family(method)) w_times = w * f.w_factor;
  return combine_direction(method, w, x_times, w_times);
}

FeatureMatrix grad_f1(const SparseSym& a, const FeatureMatrix& x) {
  return direction(Method::kOfmF1, a, x);
}

FeatureMatrix dir_g1(const SparseSym& a, const FeatureMatrix& x) {
  return direction(Method::kTriOfmF1, a, x);
}

FeatureMatrix grad_f2(const SparseSym& a, const FeatureMatrix& x) {
  return direction(Method::kOfmF2, a, x);
}

FeatureMatrix dir_g2(const SparseSym& a, const FeatureMatrix& x) {
  return direction(Method::kTriOfmF2, a, x);
}

}  // namespace ofm
