#include "mindtrace/kernels.hpp"

#include <cmath>
#include <vector>

#include <omp.h>

namespace mindtrace::kernels {

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         double gamma) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.rows();
  const Eigen::VectorXd a_norm = a.rowwise().squaredNorm();
  const Eigen::VectorXd b_norm = b.rowwise().squaredNorm();
  // Cross products through Eigen's blocked product; rows are strided in
  // column-major storage, so per-pair dot products would be cache-hostile.
  Eigen::MatrixXd out = a * b.transpose();

#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double d2 = a_norm(i) + b_norm(j) - 2.0 * out(i, j);
      if (d2 < 0.0) d2 = 0.0;
      out(i, j) = std::exp(-gamma * d2);
    }
  }
  return out;
}

Eigen::MatrixXd linear_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.rows();
  Eigen::MatrixXd out(n, m);
  out.noalias() = a * b.transpose();
  return out;
}

Eigen::MatrixXd scatter(const Eigen::MatrixXd& rows, const Eigen::VectorXd& center) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index d = rows.cols();
  const int threads = omp_get_max_threads();
  std::vector<Eigen::MatrixXd> partial(static_cast<std::size_t>(threads),
                                       Eigen::MatrixXd::Zero(d, d));

#pragma omp parallel num_threads(threads)
  {
    Eigen::MatrixXd& local = partial[static_cast<std::size_t>(omp_get_thread_num())];
    Eigen::VectorXd diff(d);
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      diff = rows.row(i).transpose() - center;
      local.selfadjointView<Eigen::Lower>().rankUpdate(diff);
    }
  }

  // Reduce in thread order so the result depends only on the thread count.
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(d, d);
  for (const auto& p : partial) total += p;
  total.triangularView<Eigen::StrictlyUpper>() = total.transpose();
  return total;
}

Eigen::VectorXd column_mean(const Eigen::MatrixXd& rows) {
  const Eigen::Index d = rows.cols();
  Eigen::VectorXd mean(d);

#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < d; ++j) {
    mean(j) = rows.col(j).mean();
  }
  return mean;
}

}  // namespace mindtrace::kernels
