#include "ofm/driver.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "ofm/kernels.hpp"

namespace ofm {

namespace {

using PanelPair = std::pair<const FeatureMatrix*, const FeatureMatrix*>;

}  // namespace

std::vector<double> betas_from_sums(std::span<const double> numerator,
                                    std::span<const double> denominator, bool clamp) {
  std::vector<double> beta(numerator.size(), 0.0);
  for (std::size_t i = 0; i < numerator.size(); ++i) {
    if (denominator[i] < 1e-300) continue;
    beta[i] = numerator[i] / denominator[i];
    if (clamp && beta[i] < 0.0) beta[i] = 0.0;
  }
  return beta;
}

std::vector<double> momentum_betas(const FeatureMatrix& g_now, const FeatureMatrix& g_prev,
                                   bool clamp) {
  if (g_now.rows() != g_prev.rows() || g_now.cols() != g_prev.cols()) {
    throw DimensionError("momentum_betas needs equally sized panels");
  }
  const auto k = static_cast<std::size_t>(g_now.cols());
  std::vector<double> num(k), den(k);
  for (Index c = 0; c < g_now.cols(); ++c) {
    num[static_cast<std::size_t>(c)] = (g_now.col(c) - g_prev.col(c)).dot(g_now.col(c));
    den[static_cast<std::size_t>(c)] = g_prev.col(c).squaredNorm();
  }
  return betas_from_sums(num, den, clamp);
}

FeatureMatrix random_start(Index n, Index k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  FeatureMatrix x(n, k);
  for (Index c = 0; c < k; ++c) {
    for (Index r = 0; r < n; ++r) x(r, c) = scale * normal(rng);
  }
  return x;
}

FeatureMatrix SerialBackend::spmm(const FeatureMatrix& x) {
  ++spmm_count_;
  return spmm_serial(a_, x);
}

SmallMatrix SerialBackend::gram(const FeatureMatrix& a, const FeatureMatrix& b) {
  return a.transpose() * b;
}

FeatureMatrix SerialBackend::mul_small(const FeatureMatrix& panel, const SmallMatrix& m) {
  return panel * m;
}

std::vector<double> SerialBackend::column_dots(std::span<const PanelPair> pairs) {
  std::vector<double> out;
  for (const auto& [a, b] : pairs) {
    for (Index c = 0; c < a->cols(); ++c) out.push_back(a->col(c).dot(b->col(c)));
  }
  return out;
}

OFMSolver::OFMSolver(Method method, const SparseSym& a, OFMOptions opts,
                     IterationBackend& backend)
    : method_(method), a_(a), opts_(opts), backend_(backend) {
  if (opts_.k < 1) throw ArgumentError("k must be at least 1");
  if (opts_.k > a.n) throw ArgumentError("k must not exceed the operator dimension");
  if (opts_.max_iters < 1) throw ArgumentError("max_iters must be at least 1");
  if (opts_.grad_tol < 0.0 || opts_.abs_tol < 0.0) {
    throw ArgumentError("tolerances must be non-negative");
  }
  a_norm2_ = a.frobenius_norm_squared();
  a_norm_ = std::sqrt(a_norm2_);
}

void OFMSolver::check_finite(const FeatureMatrix& m, const char* what) const {
  if (!m.allFinite()) {
    throw DivergenceError(std::string("non-finite ") + what + " in iteration " +
                              std::to_string(result_.iterations),
                          x_, result_.iterations);
  }
}

OFMSolver::Evaluation OFMSolver::evaluate_direction() {
  Evaluation e;
  e.w = backend_.spmm(x_);
  e.xtx = backend_.gram(x_, x_);
  const bool f2 = !is_f1_family(method_);
  if (f2) e.xtax = backend_.gram(x_, e.w);
  DirectionFactors f = direction_factors(method_, e.xtx, e.xtax);
  FeatureMatrix x_times = backend_.mul_small(x_, f.x_factor);
  FeatureMatrix w_times;
  if (f2) w_times = backend_.mul_small(e.w, f.w_factor);
  e.g = combine_direction(method_, e.w, x_times, w_times);
  backend_.phase_done(method_, IterationPhase::kDirection);
  check_finite(e.g, "direction");
  return e;
}

bool OFMSolver::should_stop(double grad_norm) const {
  if (grad_norm == 0.0) return true;
  if (opts_.abs_tol > 0.0 && grad_norm <= opts_.abs_tol * a_norm_) return true;
  return opts_.grad_tol > 0.0 && grad_norm < opts_.grad_tol * g0_norm_;
}

void OFMSolver::line_search_and_update(const Evaluation& eval) {
  StepSizes steps;
  if (opts_.use_linesearch) {
    FeatureMatrix u = backend_.spmm(v_);
    LineProducts p;
    p.xtx = eval.xtx;
    p.xtax = is_f1_family(method_) ? SmallMatrix::Zero(opts_.k, opts_.k) : eval.xtax;
    p.vtv = backend_.gram(v_, v_);
    p.xtv = backend_.gram(x_, v_);
    p.vtav = backend_.gram(v_, u);
    p.xtav = backend_.gram(x_, u);
    steps = exact_line_search(method_, p);
    backend_.phase_done(method_, IterationPhase::kLineSearch);
  } else {
    steps.global = true;
    steps.values = {opts_.initial_step};
    steps.degenerate = {false};
  }

  FeatureMatrix next = x_;
  for (Index c = 0; c < opts_.k; ++c) next.col(c) += steps.at(c) * v_.col(c);
  backend_.phase_done(method_, IterationPhase::kUpdate);
  check_finite(next, "iterate");
  x_ = std::move(next);
  result_.step_history.push_back(std::move(steps));
  ++result_.iterations;
}

bool OFMSolver::start(FeatureMatrix x0) {
  if (x0.rows() != a_.n || x0.cols() != opts_.k) {
    throw DimensionError("initial iterate must be n x k");
  }
  x_ = std::move(x0);
  check_finite(x_, "initial iterate");
  result_ = OFMResult{};
  finished_ = false;

  Evaluation eval = evaluate_direction();
  const bool f1 = is_f1_family(method_);
  std::vector<PanelPair> pairs = {{&eval.g, &eval.g}};
  if (f1) pairs.push_back({&x_, &eval.w});
  auto sums = backend_.column_dots(pairs);
  const auto k = static_cast<std::size_t>(opts_.k);
  std::vector<double> g_sq(sums.begin(), sums.begin() + static_cast<std::ptrdiff_t>(k));
  const double grad_norm = std::sqrt(std::accumulate(g_sq.begin(), g_sq.end(), 0.0));
  g0_norm_ = grad_norm;

  double obj;
  if (f1) {
    double tr = std::accumulate(sums.begin() + static_cast<std::ptrdiff_t>(k), sums.end(), 0.0);
    obj = a_norm2_ + 2.0 * tr + eval.xtx.squaredNorm();
  } else {
    obj = objective_from_products(method_, a_norm2_, eval.xtx, eval.xtax);
  }
  result_.final_grad_norm = grad_norm;

  if (should_stop(grad_norm)) {
    result_.converged = true;
    finished_ = true;
    return false;
  }
  v_ = -eval.g;
  result_.objective_history.push_back(obj);
  result_.grad_norm_history.push_back(grad_norm);
  line_search_and_update(eval);
  g_prev_ = std::move(eval.g);
  g_prev_sq_ = std::move(g_sq);
  if (result_.iterations >= opts_.max_iters) finished_ = true;
  return !finished_;
}

bool OFMSolver::step() {
  if (finished_ || result_.iterations >= opts_.max_iters) {
    finished_ = true;
    return false;
  }
  Evaluation eval = evaluate_direction();
  const bool f1 = is_f1_family(method_);
  std::vector<PanelPair> pairs = {{&eval.g, &eval.g}, {&g_prev_, &eval.g}};
  if (f1) pairs.push_back({&x_, &eval.w});
  auto sums = backend_.column_dots(pairs);
  const auto k = static_cast<std::size_t>(opts_.k);
  std::vector<double> g_sq(sums.begin(), sums.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<double> num(k);
  for (std::size_t i = 0; i < k; ++i) num[i] = g_sq[i] - sums[k + i];
  const double grad_norm = std::sqrt(std::accumulate(g_sq.begin(), g_sq.end(), 0.0));

  double obj;
  if (f1) {
    double tr = std::accumulate(sums.begin() + static_cast<std::ptrdiff_t>(2 * k), sums.end(), 0.0);
    obj = a_norm2_ + 2.0 * tr + eval.xtx.squaredNorm();
  } else {
    obj = objective_from_products(method_, a_norm2_, eval.xtx, eval.xtax);
  }
  result_.final_grad_norm = grad_norm;

  if (should_stop(grad_norm)) {
    result_.converged = true;
    finished_ = true;
    return false;
  }

  auto beta = betas_from_sums(num, g_prev_sq_, opts_.beta_clamp);
  for (Index c = 0; c < opts_.k; ++c) {
    v_.col(c) = -eval.g.col(c) + beta[static_cast<std::size_t>(c)] * v_.col(c);
  }
  backend_.phase_done(method_, IterationPhase::kMomentum);

  result_.objective_history.push_back(obj);
  result_.grad_norm_history.push_back(grad_norm);
  line_search_and_update(eval);
  g_prev_ = std::move(eval.g);
  g_prev_sq_ = std::move(g_sq);
  if (result_.iterations >= opts_.max_iters) finished_ = true;
  return !finished_;
}

OFMResult OFMSolver::take_result() {
  result_.x = x_;
  return std::move(result_);
}

OFMResult run_ofm(Method method, const SparseSym& a, const OFMOptions& opts,
                  const std::optional<FeatureMatrix>& warm_start) {
  if (warm_start && (warm_start->rows() != a.n || warm_start->cols() != opts.k)) {
    throw DimensionError("warm start must be n x k");
  }
  SerialBackend backend(a);
  OFMSolver solver(method, a, opts, backend);
  FeatureMatrix x0 = warm_start ? *warm_start : random_start(a.n, opts.k, opts.seed);
  if (solver.start(std::move(x0))) {
    while (solver.step()) {
    }
  }
  OFMResult result = solver.take_result();
  if (!result.converged) {
    // Budget exhausted: report the direction norm at the final iterate.
    const double g = direction(method, a, result.x).norm();
    result.final_grad_norm = g;
    const double g0 = result.grad_norm_history.empty() ? g : result.grad_norm_history.front();
    result.converged = g == 0.0 || (opts.abs_tol > 0.0 && g <= opts.abs_tol * a.frobenius_norm()) ||
                       (opts.grad_tol > 0.0 && g < opts.grad_tol * g0);
  }
  return result;
}

}  // namespace ofm
