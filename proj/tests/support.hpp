#pragma once

// Hand-rolled generators shared by the property tests.

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "mindtrace/behave.hpp"

namespace testsupport {

inline Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = mindtrace::detail::standard_normal(rng);
  }
  return m;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * mindtrace::detail::unit_uniform(rng);
}

/// Random SPD matrix A A^T + floor I.
inline Eigen::MatrixXd random_spd(Eigen::Index d, std::mt19937_64& rng, double floor = 0.1) {
  const Eigen::MatrixXd a = normal_matrix(d, d, rng);
  return a * a.transpose() + floor * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace testsupport
