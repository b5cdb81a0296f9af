#include <cmath>

#include <Eigen/Eigenvalues>

#include "mindtrace/behave.hpp"
#include "mindtrace/error.hpp"

namespace mindtrace {

FactorLoadings efa_fit(const Eigen::MatrixXd& data) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (n < 3 || d < 2) throw ValidationError("factor analysis needs at least 3 rows and 2 variables");
  if (!data.allFinite()) throw ValidationError("factor analysis input contains non-finite values");

  const Eigen::RowVectorXd mean = data.colwise().mean();
  Eigen::MatrixXd centred = data.rowwise() - mean;
  for (Eigen::Index c = 0; c < d; ++c) {
    const double sd = std::sqrt(centred.col(c).squaredNorm() / static_cast<double>(n - 1));
    if (!(sd > 0.0)) throw ValidationError("variable " + std::to_string(c) + " is constant");
    centred.col(c) /= sd;
  }
  const Eigen::MatrixXd corr = centred.transpose() * centred / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of the correlation matrix failed");

  FactorLoadings out;
  out.eigenvalues = eig.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();

  // Eigenvalues equal to 1 up to rounding (e.g. uncorrelated variables) are not retained.
  constexpr double kKaiserSlack = 1e-9;
  Eigen::Index k = 0;
  while (k < d && out.eigenvalues(k) > 1.0 + kKaiserSlack) ++k;
  out.loadings.resize(d, k);
  for (Eigen::Index f = 0; f < k; ++f) {
    Eigen::VectorXd col = vectors.col(f) * std::sqrt(out.eigenvalues(f));
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col(arg) < 0.0) col = -col;
    out.loadings.col(f) = col;
  }

  out.assignment.assign(static_cast<std::size_t>(d), -1);
  if (k == 0) {
    out.warnings.emplace_back("no eigenvalue exceeds 1; no factor retained");
    return out;
  }
  for (Eigen::Index v = 0; v < d; ++v) {
    Eigen::Index arg = 0;
    out.loadings.row(v).cwiseAbs().maxCoeff(&arg);
    out.assignment[static_cast<std::size_t>(v)] = static_cast<int>(arg);
  }
  return out;
}

}  // namespace mindtrace
