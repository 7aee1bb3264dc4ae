#pragma once

#include <Eigen/Core>

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace ofm {

using Index = Eigen::Index;

/// Dense N x k iterate (X), search direction (V) or update direction (G).
/// Column-major, so column slices X_i are contiguous.
using FeatureMatrix = Eigen::MatrixXd;

/// Small k x k products such as X^T X.
using SmallMatrix = Eigen::MatrixXd;

enum class Method { kOfmF1, kTriOfmF1, kOfmF2, kTriOfmF2 };

inline constexpr std::array<Method, 4> kAllMethods = {
    Method::kOfmF1, Method::kTriOfmF1, Method::kOfmF2, Method::kTriOfmF2};

/// True for the two methods minimizing ||A + XX^T||_F^2.
constexpr bool is_f1_family(Method m) {
  return m == Method::kOfmF1 || m == Method::kTriOfmF1;
}

/// True for the triangularized update directions (per-column step sizes).
constexpr bool is_triangular(Method m) {
  return m == Method::kTriOfmF1 || m == Method::kTriOfmF2;
}

/// "ofm-f1", "triofm-f1", "ofm-f2", "triofm-f2".
std::string_view method_name(Method m);

std::optional<Method> parse_method(std::string_view name);

}  // namespace ofm
