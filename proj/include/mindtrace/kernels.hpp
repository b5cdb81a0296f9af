#pragma once

// Data-parallel numeric kernels. Each kernel has an OpenMP implementation
// and a straightforward serial reference in `kernels::serial` with the same
// contract; the tests compare the two and bench/ times them.

#include <Eigen/Dense>

namespace mindtrace::kernels {

/// K(i, j) = exp(-gamma * |a_i - b_j|^2) over the rows of `a` and `b`.
Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         double gamma);

/// K(i, j) = <a_i, b_j>.
Eigen::MatrixXd linear_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Sum over rows of (x - center)(x - center)^T.
Eigen::MatrixXd scatter(const Eigen::MatrixXd& rows, const Eigen::VectorXd& center);

/// Column means of `rows`.
Eigen::VectorXd column_mean(const Eigen::MatrixXd& rows);

namespace serial {

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         double gamma);
Eigen::MatrixXd linear_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
Eigen::MatrixXd scatter(const Eigen::MatrixXd& rows, const Eigen::VectorXd& center);
Eigen::VectorXd column_mean(const Eigen::MatrixXd& rows);

}  // namespace serial

}  // namespace mindtrace::kernels
