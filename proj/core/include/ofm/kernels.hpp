#pragma once

#include "ofm/graph.hpp"
#include "ofm/types.hpp"

namespace ofm {

/// Y = A X with CSR row-wise accumulation in column-index order. Rows are
/// independent, so the result does not depend on how rows are scheduled.
FeatureMatrix spmm_serial(const SparseSym& a, const FeatureMatrix& x);

/// Upper triangle of a square matrix, diagonal included.
SmallMatrix triu(const SmallMatrix& m);

/// f1 = ||A + XX^T||_F^2 for the f1 family, f2 = tr((2I - X^T X) X^T A X)
/// for the f2 family. Evaluated through k x k traces only:
///   f1 = ||A||_F^2 + 2 tr(X^T A X) + ||X^T X||_F^2.
double objective(Method method, const SparseSym& a, const FeatureMatrix& x);

/// Same as objective() from precomputed pieces. `xtax` is X^T A X,
/// `a_norm2` is ||A||_F^2 (ignored for f2).
double objective_from_products(Method method, double a_norm2, const SmallMatrix& xtx,
                               const SmallMatrix& xtax);

/// 4AX + 4X(X^T X).
FeatureMatrix grad_f1(const SparseSym& a, const FeatureMatrix& x);
/// AX + X triu(X^T X).
FeatureMatrix dir_g1(const SparseSym& a, const FeatureMatrix& x);
/// 4AX - 2AX(X^T X) - 2X(X^T A X).
FeatureMatrix grad_f2(const SparseSym& a, const FeatureMatrix& x);
/// 2AX - AX triu(X^T X) - X triu(X^T A X).
FeatureMatrix dir_g2(const SparseSym& a, const FeatureMatrix& x);

/// Dispatches to the update direction of `method`.
FeatureMatrix direction(Method method, const SparseSym& a, const FeatureMatrix& x);

/// k x k factors that turn the panels X and W = AX into a direction.
///
/// f1 family:  G = s (W + X x_factor)
/// f2 family:  G = s_w W - s_p W w_factor - s_p X x_factor
///
/// The scalars depend only on the method (see combine_direction). For the
/// triangular variants the factors are triu() of the Gram matrices.
struct DirectionFactors {
  SmallMatrix x_factor;
  SmallMatrix w_factor;  // empty for the f1 family
};

/// `xtax` may be empty for the f1 family.
DirectionFactors direction_factors(Method method, const SmallMatrix& xtx,
                                   const SmallMatrix& xtax);

/// Assembles G from W = AX and the panel products X x_factor, W w_factor.
/// `w_times` is ignored for the f1 family.
FeatureMatrix combine_direction(Method method, const FeatureMatrix& w,
                                const FeatureMatrix& x_times, const FeatureMatrix& w_times);

}  // namespace ofm
