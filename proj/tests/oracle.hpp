#pragma once

// Shared fixtures for the test suites. Random test data comes from the
// standard library generator so that it is independent of lipcert's own RNG,
// and reference results come from Eigen.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

#include "lipcert/matrix.hpp"
#include "lipcert/network.hpp"

namespace oracle {

inline Eigen::MatrixXd to_eigen(const lipcert::Matrix& a) {
  Eigen::MatrixXd e(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) e(i, j) = a(i, j);
  return e;
}

inline Eigen::MatrixXd to_eigen(const lipcert::SymMatrix& a) { return to_eigen(a.matrix()); }

inline lipcert::Matrix from_eigen(const Eigen::MatrixXd& e) {
  lipcert::Matrix a(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) a(i, j) = e(i, j);
  return a;
}

inline lipcert::Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  lipcert::Matrix a(rows, cols);
  for (std::size_t k = 0; k < a.size(); ++k) a.data()[k] = nd(gen);
  return a;
}

inline lipcert::Vector uniform_vec(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> ud(lo, hi);
  lipcert::Vector v(n);
  for (double& x : v) x = ud(gen);
  return v;
}

/// G G^T + shift I.
inline lipcert::SymMatrix random_spd(std::size_t n, std::uint64_t seed, double shift = 0.5) {
  const Eigen::MatrixXd g = to_eigen(gaussian(n, n, seed));
  Eigen::MatrixXd s = g * g.transpose() + shift * Eigen::MatrixXd::Identity(n, n);
  return lipcert::SymMatrix(from_eigen(s));
}

inline double sigma_max(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues()(0);
}

inline lipcert::Network identity_network(std::size_t depth, std::size_t width) {
  std::vector<lipcert::LayerWeights> layers;
  for (std::size_t i = 0; i < depth; ++i)
    layers.push_back({lipcert::Matrix::identity(width), lipcert::Vector(width, 0.0)});
  return {std::move(layers), lipcert::ActivationBounds::relu()};
}

inline lipcert::Network scalar_chain(const std::vector<double>& w) {
  std::vector<lipcert::LayerWeights> layers;
  for (double v : w) layers.push_back({lipcert::Matrix{{v}}, lipcert::Vector{0.0}});
  return {std::move(layers), lipcert::ActivationBounds::relu()};
}

inline lipcert::Network from_weights(const std::vector<lipcert::Matrix>& ws) {
  std::vector<lipcert::LayerWeights> layers;
  for (const auto& w : ws) layers.push_back({w, lipcert::Vector(w.rows(), 0.0)});
  return {std::move(layers), lipcert::ActivationBounds::relu()};
}

}  // namespace oracle
