#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ofm/graph.hpp"
#include "ofm/types.hpp"

namespace ofm {

/// c3 a^3 + c2 a^2 + c1 a + c0.
struct Cubic {
  double c3 = 0.0;
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;

  double operator()(double a) const { return ((c3 * a + c2) * a + c1) * a + c0; }
  double derivative(double a) const { return (3.0 * c3 * a + 2.0 * c2) * a + c1; }
  /// Integral from 0 to a.
  double antiderivative(double a) const {
    return (((0.25 * c3 * a + c2 / 3.0) * a + 0.5 * c1) * a + c0) * a;
  }
  bool is_zero() const { return c3 == 0.0 && c2 == 0.0 && c1 == 0.0 && c0 == 0.0; }
};

struct CubicRoot {
  double value = 0.0;
  int multiplicity = 1;
};

/// Every k x k product the line search needs. With W = AX and U = AV already
/// formed, these come from four Gram products per iteration plus the two
/// cached from the direction evaluation (xtx, xtax). Transposed products
/// (V^T X, V^T A X) are never formed separately.
struct LineProducts {
  SmallMatrix xtx;
  SmallMatrix xtv;
  SmallMatrix vtv;
  SmallMatrix xtax;  // needed by the f2 family only
  SmallMatrix xtav;
  SmallMatrix vtav;
};

/// Forms all products with two serial SpMMs.
LineProducts line_products(const SparseSym& a, const FeatureMatrix& x, const FeatureMatrix& v);

/// Derivative cubic of the objective along V for OFM-f1 / OFM-f2.
///
/// For f1 the coefficients are those of d/da f1(X + aV) divided by 4 (the
/// factor 4 of the gradient is dropped, roots are unchanged). For f2 they are
/// the derivative itself.
Cubic cubic_global(Method method, const LineProducts& p);

/// Throws DegenerateError when v is identically zero.
Cubic cubic_global(Method method, const SparseSym& a, const FeatureMatrix& x,
                   const FeatureMatrix& v);

/// Column cubics of TriOFM: entry i is V_i^T g_i(X + a V_i e_i^T), the column
/// derivative when column i alone moves, expanded in powers of a. Since g_i
/// only involves columns 1..i, this is the derivative of a quartic in a with
/// positive leading coefficient. Column i of V being zero yields the zero
/// cubic.
std::vector<Cubic> cubic_per_column(Method method, const LineProducts& p);

std::vector<Cubic> cubic_per_column(Method method, const SparseSym& a, const FeatureMatrix& x,
                                    const FeatureMatrix& v);

/// All real roots with multiplicities, ascending. Falls back to quadratic and
/// linear formulas when leading coefficients vanish. Simple roots get one
/// Newton polish step. Throws DegenerateError for the zero polynomial.
std::vector<CubicRoot> solve_cubic_real(const Cubic& c);

/// Picks the step among the critical points:
///  - one distinct root: that root;
///  - one simple and one double root: the simple one;
///  - otherwise: the root with the smallest phi, ties to smallest |a| and then
///    smallest a.
/// `roots` must not be empty.
double select_step(std::span<const CubicRoot> roots, const std::function<double(double)>& phi);

struct StepSizes {
  std::vector<double> values;    // size 1 for a global step, k for per-column steps
  std::vector<bool> degenerate;  // same size as values
  bool global = true;

  double at(Index column) const {
    return global ? values.front() : values[static_cast<std::size_t>(column)];
  }
  bool all_degenerate() const;
};

/// Exact line search for `method` from precomputed products. Global methods
/// share one step; triangular ones get a step per column. A degenerate
/// direction (zero column, zero cubic, no real root) gets step 0.
StepSizes exact_line_search(Method method, const LineProducts& p);

}  // namespace ofm
