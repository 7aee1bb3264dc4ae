#include "ofm/linesearch.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "ofm/errors.hpp"
#include "ofm/kernels.hpp"

namespace ofm {

namespace {

// Matrix-valued polynomial in the step a, degree <= 3.
struct MatPoly {
  std::array<SmallMatrix, 4> c;

  static MatPoly zero(Index k) {
    MatPoly p;
    for (auto& m : p.c) m = SmallMatrix::Zero(k, k);
    return p;
  }
};

MatPoly operator+(const MatPoly& x, const MatPoly& y) {
  MatPoly r;
  for (int d = 0; d < 4; ++d) r.c[d] = x.c[d] + y.c[d];
  return r;
}

MatPoly operator-(const MatPoly& x, const MatPoly& y) {
  MatPoly r;
  for (int d = 0; d < 4; ++d) r.c[d] = x.c[d] - y.c[d];
  return r;
}

MatPoly operator*(double s, const MatPoly& x) {
  MatPoly r;
  for (int d = 0; d < 4; ++d) r.c[d] = s * x.c[d];
  return r;
}

// Product truncated at degree 3; callers only multiply factors whose degrees
// sum to at most 3.
MatPoly operator*(const MatPoly& x, const MatPoly& y) {
  MatPoly r = MatPoly::zero(x.c[0].rows());
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; i + j < 4; ++j) {
      if (x.c[i].isZero(0.0) || y.c[j].isZero(0.0)) continue;
      r.c[i + j] += x.c[i] * y.c[j];
    }
  }
  return r;
}

MatPoly triu_poly(const MatPoly& x) {
  MatPoly r;
  for (int d = 0; d < 4; ++d) r.c[d] = triu(x.c[d]);
  return r;
}

// V^T g(X + aV) as a matrix polynomial in a. For OFM-f1 the gradient is taken
// without its factor 4.
MatPoly directional_poly(Method method, const LineProducts& p) {
  const Index k = p.vtv.rows();
  MatPoly vty = MatPoly::zero(k);  // V^T Y
  vty.c[0] = p.xtv.transpose();
  vty.c[1] = p.vtv;
  MatPoly vtay = MatPoly::zero(k);  // V^T A Y
  vtay.c[0] = p.xtav.transpose();
  vtay.c[1] = p.vtav;
  MatPoly yty = MatPoly::zero(k);  // Y^T Y
  yty.c[0] = p.xtx;
  yty.c[1] = p.xtv + p.xtv.transpose();
  yty.c[2] = p.vtv;

  if (is_f1_family(method)) {
    MatPoly gram = method == Method::kTriOfmF1 ? triu_poly(yty) : yty;
    return vtay + vty * gram;
  }

  MatPoly ytay = MatPoly::zero(k);  // Y^T A Y
  ytay.c[0] = p.xtax;
  ytay.c[1] = p.xtav + p.xtav.transpose();
  ytay.c[2] = p.vtav;
  if (method == Method::kOfmF2) {
    return 4.0 * vtay - 2.0 * (vty * ytay) - 2.0 * (vtay * yty);
  }
  return 2.0 * vtay - vtay * triu_poly(yty) - vty * triu_poly(ytay);
}

void check_panels(const SparseSym& a, const FeatureMatrix& x, const FeatureMatrix& v) {
  if (a.n != x.rows() || x.rows() != v.rows() || x.cols() != v.cols()) {
    throw DimensionError("line search panels must match the operator and each other");
  }
}

double cube_root(double x) { return std::cbrt(x); }

double newton_polish(const Cubic& c, double x) {
  double d = c.derivative(x);
  if (d == 0.0 || !std::isfinite(d)) return x;
  double next = x - c(x) / d;
  // Keep the polished value only when it does not make things worse.
  return std::abs(c(next)) <= std::abs(c(x)) ? next : x;
}

}  // namespace

bool StepSizes::all_degenerate() const {
  return std::all_of(degenerate.begin(), degenerate.end(), [](bool b) { return b; });
}

LineProducts line_products(const SparseSym& a, const FeatureMatrix& x, const FeatureMatrix& v) {
  check_panels(a, x, v);
  FeatureMatrix w = spmm_serial(a, x);
  FeatureMatrix u = spmm_serial(a, v);
  LineProducts p;
  p.xtx = x.transpose() * x;
  p.xtv = x.transpose() * v;
  p.vtv = v.transpose() * v;
  p.xtax = x.transpose() * w;
  p.xtav = x.transpose() * u;
  p.vtav = v.transpose() * u;
  return p;
}

Cubic cubic_global(Method method, const LineProducts& p) {
  if (is_triangular(method)) {
    throw ArgumentError("global cubic is defined for OFM-f1 and OFM-f2 only");
  }
  MatPoly poly = directional_poly(method, p);
  return Cubic{poly.c[3].trace(), poly.c[2].trace(), poly.c[1].trace(), poly.c[0].trace()};
}

Cubic cubic_global(Method method, const SparseSym& a, const FeatureMatrix& x,
                   const FeatureMatrix& v) {
  check_panels(a, x, v);
  if (v.isZero(0.0)) throw DegenerateError("search direction is identically zero");
  return cubic_global(method, line_products(a, x, v));
}

std::vector<Cubic> cubic_per_column(Method method, const LineProducts& p) {
  if (!is_triangular(method)) {
    throw ArgumentError("per-column cubics are defined for TriOFM-f1 and TriOFM-f2 only");
  }
  const Index k = p.vtv.rows();
  std::vector<Cubic> out(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) {
    // Only column i moves along the line.
    LineProducts q = p;
    q.xtv.setZero();
    q.xtv.col(i) = p.xtv.col(i);
    q.xtav.setZero();
    q.xtav.col(i) = p.xtav.col(i);
    q.vtv.setZero();
    q.vtv(i, i) = p.vtv(i, i);
    q.vtav.setZero();
    q.vtav(i, i) = p.vtav(i, i);
    MatPoly poly = directional_poly(method, q);
    out[static_cast<std::size_t>(i)] =
        Cubic{poly.c[3](i, i), poly.c[2](i, i), poly.c[1](i, i), poly.c[0](i, i)};
  }
  return out;
}

std::vector<Cubic> cubic_per_column(Method method, const SparseSym& a, const FeatureMatrix& x,
                                    const FeatureMatrix& v) {
  check_panels(a, x, v);
  return cubic_per_column(method, line_products(a, x, v));
}

std::vector<CubicRoot> solve_cubic_real(const Cubic& c) {
  if (c.is_zero()) throw DegenerateError("zero polynomial has no isolated roots");

  std::vector<CubicRoot> roots;
  if (c.c3 == 0.0) {
    if (c.c2 == 0.0) {
      if (c.c1 != 0.0) roots.push_back({-c.c0 / c.c1, 1});
      return roots;
    }
    // c2 a^2 + c1 a + c0 with the cancellation-free quadratic formula.
    const double disc = c.c1 * c.c1 - 4.0 * c.c2 * c.c0;
    const double scale = c.c1 * c.c1 + std::abs(4.0 * c.c2 * c.c0);
    if (std::abs(disc) <= 1e-14 * scale) {
      roots.push_back({-c.c1 / (2.0 * c.c2), 2});
      return roots;
    }
    if (disc < 0.0) return roots;
    const double q = -0.5 * (c.c1 + std::copysign(std::sqrt(disc), c.c1));
    double r1 = q / c.c2;
    double r2 = q != 0.0 ? c.c0 / q : -r1;
    if (r1 > r2) std::swap(r1, r2);
    roots.push_back({r1, 1});
    roots.push_back({r2, 1});
    return roots;
  }

  const double a = c.c2 / c.c3;
  const double b = c.c1 / c.c3;
  const double d = c.c0 / c.c3;
  const double shift = a / 3.0;
  // Depressed cubic t^3 + p t + q with a = t - shift.
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + d;
  const double root_scale = std::max({std::abs(a), std::sqrt(std::abs(b)), std::cbrt(std::abs(d))});

  constexpr double kTol = 1e-12;
  if (std::abs(p) <= kTol * root_scale * root_scale &&
      std::abs(q) <= kTol * root_scale * root_scale * root_scale) {
    roots.push_back({-shift, 3});
    return roots;
  }

  const double half_q = 0.5 * q;
  const double third_p = p / 3.0;
  const double disc = half_q * half_q + third_p * third_p * third_p;
  const double disc_scale = half_q * half_q + std::abs(third_p * third_p * third_p);

  if (std::abs(disc) <= kTol * disc_scale) {
    const double single = 3.0 * q / p - shift;
    const double twice = -1.5 * q / p - shift;
    roots.push_back({newton_polish(c, single), 1});
    roots.push_back({twice, 2});
  } else if (disc > 0.0) {
    const double u = cube_root(-half_q - std::copysign(std::sqrt(disc), q));
    const double t = u - p / (3.0 * u);
    roots.push_back({newton_polish(c, t - shift), 1});
  } else {
    // Three distinct real roots: trigonometric form avoids complex cube roots.
    const double r = 2.0 * std::sqrt(-third_p);
    const double arg = std::clamp(3.0 * q / (2.0 * p) * std::sqrt(-3.0 / p), -1.0, 1.0);
    const double phi = std::acos(arg) / 3.0;
    for (int m = 0; m < 3; ++m) {
      const double t = r * std::cos(phi - 2.0 * std::numbers::pi * m / 3.0);
      roots.push_back({newton_polish(c, t - shift), 1});
    }
  }
  std::sort(roots.begin(), roots.end(),
            [](const CubicRoot& x, const CubicRoot& y) { return x.value < y.value; });
  return roots;
}

double select_step(std::span<const CubicRoot> roots, const std::function<double(double)>& phi) {
  if (roots.empty()) throw ArgumentError("select_step needs at least one root");
  if (roots.size() == 1) return roots.front().value;
  if (roots.size() == 2 && roots[0].multiplicity != roots[1].multiplicity) {
    return roots[0].multiplicity == 1 ? roots[0].value : roots[1].value;
  }
  double best = roots.front().value;
  double best_phi = phi(best);
  for (std::size_t i = 1; i < roots.size(); ++i) {
    const double x = roots[i].value;
    const double fx = phi(x);
    const double tie_tol = 1e-14 * std::max({1.0, std::abs(fx), std::abs(best_phi)});
    if (fx < best_phi - tie_tol) {
      best = x;
      best_phi = fx;
    } else if (std::abs(fx - best_phi) <= tie_tol) {
      if (std::abs(x) < std::abs(best) || (std::abs(x) == std::abs(best) && x < best)) {
        best = x;
        best_phi = fx;
      }
    }
  }
  return best;
}

StepSizes exact_line_search(Method method, const LineProducts& p) {
  auto solve_one = [](const Cubic& cubic, double& step) -> bool {
    if (cubic.is_zero()) return false;
    auto roots = solve_cubic_real(cubic);
    if (roots.empty()) return false;
    step = select_step(roots, [&](double x) { return cubic.antiderivative(x); });
    return std::isfinite(step);
  };

  StepSizes steps;
  steps.global = !is_triangular(method);
  if (steps.global) {
    double step = 0.0;
    bool ok = p.vtv.trace() != 0.0 && solve_one(cubic_global(method, p), step);
    steps.values = {ok ? step : 0.0};
    steps.degenerate = {!ok};
    return steps;
  }
  auto cubics = cubic_per_column(method, p);
  steps.values.resize(cubics.size());
  steps.degenerate.resize(cubics.size());
  for (std::size_t i = 0; i < cubics.size(); ++i) {
    double step = 0.0;
    const auto col = static_cast<Index>(i);
    bool ok = p.vtv(col, col) != 0.0 && solve_one(cubics[i], step);
    steps.values[i] = ok ? step : 0.0;
    steps.degenerate[i] = !ok;
  }
  return steps;
}

}  // namespace ofm
