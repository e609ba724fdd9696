#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "diprl/nn/mlp.hpp"

namespace diprl::nn {

// Denominator floor for the relative error.
inline constexpr double kFiniteDiffFloor = 1e-3;

/// Compares `analytic` against central differences of `loss(params)` and
/// returns the largest relative discrepancy over all parameters.
/// Expects epsilon in [1e-7, 1e-3]. Never throws: a shape mismatch is
/// reported as an infinite discrepancy.
template <class Loss>
double finite_diff_check(const MlpParams& params, Loss&& loss, const GradBuffer& analytic,
                         double epsilon) {
  if (analytic.layers.size() != params.layers.size()) return std::numeric_limits<double>::infinity();
  MlpParams probe = params;
  double worst = 0.0;
  auto visit = [&](double& slot, double expected) {
    const double saved = slot;
    slot = saved + epsilon;
    const double up = loss(static_cast<const MlpParams&>(probe));
    slot = saved - epsilon;
    const double down = loss(static_cast<const MlpParams&>(probe));
    slot = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(numeric), std::abs(expected), kFiniteDiffFloor});
    const double err = std::abs(numeric - expected) / denom;
    worst = std::isnan(err) ? std::numeric_limits<double>::infinity() : std::max(worst, err);
  };
  for (std::size_t i = 0; i < probe.layers.size(); ++i) {
    auto& w = probe.layers[i].weight;
    auto& b = probe.layers[i].bias;
    const auto& gw = analytic.layers[i].weight;
    const auto& gb = analytic.layers[i].bias;
    if (gw.rows() != w.rows() || gw.cols() != w.cols() || gb.size() != b.size())
      return std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) visit(w(r, c), gw(r, c));
    for (Eigen::Index r = 0; r < b.size(); ++r) visit(b(r), gb(r));
  }
  return worst;
}

}  // namespace diprl::nn
