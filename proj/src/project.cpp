#include "mindtrace/project.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Eigenvalues>

#include "mindtrace/error.hpp"
#include "mindtrace/kernels.hpp"

namespace mindtrace {

namespace {

// Sign convention: the largest-magnitude coefficient of each row is positive.
void fix_row_signs(Eigen::MatrixXd& rows) {
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    Eigen::Index arg = 0;
    rows.row(r).cwiseAbs().maxCoeff(&arg);
    if (rows(r, arg) < 0.0) rows.row(r) *= -1.0;
  }
}

std::map<int, std::vector<Eigen::Index>> group_by_label(std::span<const int> labels) {
  std::map<int, std::vector<Eigen::Index>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    groups[labels[i]].push_back(static_cast<Eigen::Index>(i));
  }
  return groups;
}

Eigen::MatrixXd json_matrix(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(r)].size()) != cols) {
      throw ValidationError("ragged matrix in model file");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    j.push_back(row);
  }
  return j;
}

Eigen::VectorXd json_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> vector_json(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace

// ---------------------------------------------------------------------------
// PCA

Eigen::MatrixXd PcaModel::transform(const Eigen::MatrixXd& samples) const {
  if (samples.cols() != dimension()) throw ValidationError("PCA: dimension mismatch");
  return (samples.rowwise() - mean.transpose()) * components.transpose();
}

Eigen::MatrixXd PcaModel::inverse_transform(const Eigen::MatrixXd& scores) const {
  if (scores.cols() != component_count()) throw ValidationError("PCA: score width mismatch");
  return (scores * components).rowwise() + mean.transpose();
}

Eigen::VectorXd PcaModel::explained_variance_ratio() const {
  if (total_variance <= 0.0) return Eigen::VectorXd::Zero(explained_variance.size());
  return explained_variance / total_variance;
}

PcaModel PcaModel::truncated(Eigen::Index n) const {
  if (n < 1 || n > component_count()) throw ValidationError("PCA: truncation out of range");
  PcaModel m = *this;
  m.components = components.topRows(n);
  m.explained_variance = explained_variance.head(n);
  return m;
}

PcaModel pca_fit(const Eigen::MatrixXd& samples, Eigen::Index n_components) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  if (n < 2) throw ValidationError("PCA needs at least 2 samples");
  if (n_components < 1 || n_components > std::min(d, n - 1)) {
    throw ValidationError("PCA: n_components=" + std::to_string(n_components) +
                          " outside [1, " + std::to_string(std::min(d, n - 1)) + "]");
  }

  PcaModel model;
  model.mean = kernels::column_mean(samples);
  const double denom = static_cast<double>(n - 1);

  Eigen::MatrixXd basis(d, n_components);
  Eigen::VectorXd variance(n_components);
  if (n < d) {
    // Eigen-decompose the n x n Gram matrix of the centred data instead of
    // the d x d covariance; both share the non-zero spectrum.
    const Eigen::MatrixXd centred = samples.rowwise() - model.mean.transpose();
    const Eigen::MatrixXd gram = kernels::linear_gram(centred, centred);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw NumericalError("PCA: eigensolver failed");
    model.total_variance = gram.trace() / denom;
    for (Eigen::Index k = 0; k < n_components; ++k) {
      const Eigen::Index src = n - 1 - k;
      const double lambda = std::max(eig.eigenvalues()(src), 0.0);
      variance(k) = lambda / denom;
      Eigen::VectorXd dir = centred.transpose() * eig.eigenvectors().col(src);
      dir -= basis.leftCols(k) * (basis.leftCols(k).transpose() * dir);
      // Directions beyond the data rank: complete the basis with the first
      // coordinate axis that is not yet spanned.
      for (Eigen::Index axis = 0; dir.norm() <= 1e-10 * std::sqrt(std::max(lambda, 1.0)) && axis < d;
           ++axis) {
        dir = Eigen::VectorXd::Unit(d, axis);
        dir -= basis.leftCols(k) * (basis.leftCols(k).transpose() * dir);
      }
      basis.col(k) = dir.normalized();
    }
  } else {
    const Eigen::MatrixXd cov = kernels::scatter(samples, model.mean) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericalError("PCA: eigensolver failed");
    model.total_variance = cov.trace();
    for (Eigen::Index k = 0; k < n_components; ++k) {
      const Eigen::Index src = d - 1 - k;
      variance(k) = std::max(eig.eigenvalues()(src), 0.0);
      basis.col(k) = eig.eigenvectors().col(src);
    }
  }
  model.components = basis.transpose();
  fix_row_signs(model.components);
  model.explained_variance = variance;
  return model;
}

// ---------------------------------------------------------------------------
// LDA

Eigen::MatrixXd pooled_covariance(const Eigen::MatrixXd& samples, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != samples.rows()) {
    throw ValidationError("label count does not match sample count");
  }
  const auto groups = group_by_label(labels);
  const Eigen::Index d = samples.cols();
  Eigen::MatrixXd within = Eigen::MatrixXd::Zero(d, d);
  for (const auto& [label, idx] : groups) {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(idx.size()), d);
    for (std::size_t i = 0; i < idx.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = samples.row(idx[i]);
    within += kernels::scatter(rows, kernels::column_mean(rows));
  }
  const auto n = samples.rows();
  const auto k = static_cast<Eigen::Index>(groups.size());
  return within / static_cast<double>(n > k ? n - k : n);
}

Eigen::MatrixXd LdaModel::apply(const Eigen::MatrixXd& samples) const {
  if (samples.cols() != dimension()) {
    throw ValidationError("LDA: input dimension " + std::to_string(samples.cols()) +
                          " does not match model dimension " + std::to_string(dimension()));
  }
  return (samples.rowwise() - global_mean.transpose()) * projection.transpose();
}

Eigen::VectorXd LdaModel::apply(const Eigen::VectorXd& sample) const {
  if (sample.size() != dimension()) throw ValidationError("LDA: dimension mismatch");
  return projection * (sample - global_mean);
}

LdaModel lda_fit(const Eigen::MatrixXd& samples, std::span<const int> labels,
                 Eigen::Index n_axes, const LdaOptions& options) {
  if (static_cast<Eigen::Index>(labels.size()) != samples.rows()) {
    throw ValidationError("label count does not match sample count");
  }
  if (options.regularizer < 0.0) throw ValidationError("LDA regularizer must be >= 0");
  const auto groups = group_by_label(labels);
  const auto k = static_cast<Eigen::Index>(groups.size());
  if (k < 2) throw ValidationError("LDA needs at least 2 classes");
  if (n_axes < 1 || n_axes > k - 1) {
    throw ValidationError("LDA: requested " + std::to_string(n_axes) + " axes but at most " +
                          std::to_string(k - 1) + " are available");
  }
  if (options.regularizer == 0.0) {
    for (const auto& [label, idx] : groups) {
      if (idx.size() < 2) {
        throw ValidationError("LDA: class " + std::to_string(label) +
                              " has fewer than 2 samples and no regularizer is set");
      }
    }
  }

  const Eigen::Index d = samples.cols();
  const auto n = static_cast<double>(samples.rows());

  LdaModel model;
  model.regularizer = options.regularizer;
  model.global_mean = kernels::column_mean(samples);
  model.class_means.resize(k, d);
  Eigen::MatrixXd between = Eigen::MatrixXd::Zero(d, d);
  Eigen::Index row = 0;
  for (const auto& [label, idx] : groups) {
    model.classes.push_back(label);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (const auto i : idx) mu += samples.row(i).transpose();
    mu /= static_cast<double>(idx.size());
    model.class_means.row(row++) = mu.transpose();
    const Eigen::VectorXd diff = mu - model.global_mean;
    between.noalias() += (static_cast<double>(idx.size()) / n) * diff * diff.transpose();
  }

  Eigen::MatrixXd within = pooled_covariance(samples, labels);
  double scale = within.trace() / static_cast<double>(d);
  if (scale <= 0.0) scale = 1.0;
  within.diagonal().array() += options.regularizer * scale;

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> eig(between, within);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("LDA: within-class scatter is not positive definite; "
                         "increase the regularizer");
  }
  model.projection.resize(n_axes, d);
  model.fisher_ratios.resize(n_axes);
  for (Eigen::Index a = 0; a < n_axes; ++a) {
    const Eigen::Index src = d - 1 - a;
    model.fisher_ratios(a) = std::max(eig.eigenvalues()(src), 0.0);
    model.projection.row(a) = eig.eigenvectors().col(src).transpose();
  }
  fix_row_signs(model.projection);

  for (Eigen::Index a = 0; a < n_axes; ++a) {
    if (model.fisher_ratios(a) < 1e-12) {
      model.warnings.push_back("LDA axis " + std::to_string(a) +
                               " is degenerate (Fisher ratio ~ 0); class means coincide");
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Persistence

nlohmann::json to_json(const PcaModel& m) {
  return {{"type", "pca"},
          {"mean", vector_json(m.mean)},
          {"components", matrix_json(m.components)},
          {"explained_variance", vector_json(m.explained_variance)},
          {"total_variance", m.total_variance}};
}

nlohmann::json to_json(const LdaModel& m) {
  return {{"type", "lda"},
          {"classes", m.classes},
          {"class_means", matrix_json(m.class_means)},
          {"global_mean", vector_json(m.global_mean)},
          {"projection", matrix_json(m.projection)},
          {"fisher_ratios", vector_json(m.fisher_ratios)},
          {"regularizer", m.regularizer}};
}

PcaModel pca_from_json(const nlohmann::json& j) {
  PcaModel m;
  m.mean = json_vector(j.at("mean"));
  m.components = json_matrix(j.at("components"));
  m.explained_variance = json_vector(j.at("explained_variance"));
  m.total_variance = j.at("total_variance").get<double>();
  if (m.components.cols() != m.mean.size()) throw ValidationError("PCA model: inconsistent sizes");
  return m;
}

LdaModel lda_from_json(const nlohmann::json& j) {
  LdaModel m;
  m.classes = j.at("classes").get<std::vector<int>>();
  m.class_means = json_matrix(j.at("class_means"));
  m.global_mean = json_vector(j.at("global_mean"));
  m.projection = json_matrix(j.at("projection"));
  m.fisher_ratios = json_vector(j.at("fisher_ratios"));
  m.regularizer = j.at("regularizer").get<double>();
  if (m.projection.cols() != m.global_mean.size()) {
    throw ValidationError("LDA model: inconsistent sizes");
  }
  return m;
}

}  // namespace mindtrace
