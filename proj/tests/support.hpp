#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "diprl/nn/mlp.hpp"

namespace diprl::test {

using nn::Matrix;
using nn::Vector;

inline nn::MlpParams single_layer(const Matrix& w, const Vector& b) {
  nn::MlpParams p;
  p.layers.push_back({w, b});
  return p;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

/// Smallest |pre-activation| over every relu unit for every input column.
inline double relu_margin(const nn::MlpParams& p, const Matrix& input) {
  double margin = std::numeric_limits<double>::infinity();
  Matrix x = input;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    Matrix z = (p.layers[i].weight * x).colwise() + p.layers[i].bias;
    if (p.activation_after(i) == nn::Activation::relu) margin = std::min(margin, z.cwiseAbs().minCoeff());
    nn::detail::apply_activation(z, p.activation_after(i));
    x = std::move(z);
  }
  return margin;
}

/// Scratch directory unique to one test, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() / ("diprl_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace diprl::test
