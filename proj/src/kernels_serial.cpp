#include "mindtrace/kernels.hpp"

#include <cmath>

namespace mindtrace::kernels::serial {

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         double gamma) {
  Eigen::MatrixXd out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      double d2 = 0.0;
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double diff = a(i, c) - b(j, c);
        d2 += diff * diff;
      }
      out(i, j) = std::exp(-gamma * d2);
    }
  }
  return out;
}

Eigen::MatrixXd linear_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < a.cols(); ++c) s += a(i, c) * b(j, c);
      out(i, j) = s;
    }
  }
  return out;
}

Eigen::MatrixXd scatter(const Eigen::MatrixXd& rows, const Eigen::VectorXd& center) {
  const Eigen::Index d = rows.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index r = 0; r < d; ++r) {
      const double dr = rows(i, r) - center(r);
      for (Eigen::Index c = 0; c < d; ++c) {
        out(r, c) += dr * (rows(i, c) - center(c));
      }
    }
  }
  return out;
}

Eigen::VectorXd column_mean(const Eigen::MatrixXd& rows) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) mean(j) += rows(i, j);
  }
  if (rows.rows() > 0) mean /= static_cast<double>(rows.rows());
  return mean;
}

}  // namespace mindtrace::kernels::serial
