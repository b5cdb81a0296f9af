#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace mindtrace {

// Sample matrices hold one sample per row.

/// Principal component model: centred, not variance-scaled.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;          // n_c x d, orthonormal rows
  Eigen::VectorXd explained_variance;  // n_c, non-increasing
  double total_variance = 0.0;         // trace of the sample covariance

  Eigen::Index dimension() const { return mean.size(); }
  Eigen::Index component_count() const { return components.rows(); }

  Eigen::MatrixXd transform(const Eigen::MatrixXd& samples) const;
  Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& scores) const;
  Eigen::VectorXd explained_variance_ratio() const;

  /// Model restricted to its leading `n` components.
  PcaModel truncated(Eigen::Index n) const;
};

/// Throws ValidationError unless 2 <= n and 1 <= n_components <= min(d, n - 1).
PcaModel pca_fit(const Eigen::MatrixXd& samples, Eigen::Index n_components);

struct LdaOptions {
  /// Within-class scatter is regularised as S_w + eps * (tr(S_w) / d) * I.
  double regularizer = 1e-6;
};

struct LdaModel {
  std::vector<int> classes;         // ascending
  Eigen::MatrixXd class_means;      // K x d
  Eigen::VectorXd global_mean;      // d
  Eigen::MatrixXd projection;       // p x d
  Eigen::VectorXd fisher_ratios;    // p, non-increasing
  double regularizer = 0.0;
  std::vector<std::string> warnings;

  Eigen::Index dimension() const { return global_mean.size(); }

  /// y = projection * (x - global_mean) for every row.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& samples) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& sample) const;
};

LdaModel lda_fit(const Eigen::MatrixXd& samples, std::span<const int> labels,
                 Eigen::Index n_axes, const LdaOptions& options = {});

/// Within-class covariance pooled over classes (divisor n - K).
Eigen::MatrixXd pooled_covariance(const Eigen::MatrixXd& samples, std::span<const int> labels);

nlohmann::json to_json(const PcaModel& m);
nlohmann::json to_json(const LdaModel& m);
PcaModel pca_from_json(const nlohmann::json& j);
LdaModel lda_from_json(const nlohmann::json& j);

}  // namespace mindtrace
