#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace mindtrace {

using ConfusionMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Mean over classes with non-zero support of (correct / row total).
/// Rows are true classes. Throws ValidationError if K < 2 or all rows are empty.
double balanced_accuracy(const ConfusionMatrix& confusion);

// ---------------------------------------------------------------------------
// Kernel max-margin classifier
// ---------------------------------------------------------------------------

struct KernelSpec {
  enum class Type { Linear, Rbf };
  Type type = Type::Rbf;
  double gamma = 1.0;

  static KernelSpec linear() { return {Type::Linear, 0.0}; }
  static KernelSpec rbf(double gamma) { return {Type::Rbf, gamma}; }

  Eigen::MatrixXd gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const;
};

struct SvmOptions {
  double tolerance = 1e-3;  // KKT violation gap
  std::size_t max_iterations = 1'000'000;
  double diagonal_jitter = 1e-10;
};

/// One binary problem of the one-vs-one decomposition.
struct BinaryMachine {
  int positive_class = 0;  // index into classes
  int negative_class = 0;
  Eigen::MatrixXd support_vectors;  // rows
  Eigen::VectorXd coefficients;     // alpha_i * y_i
  Eigen::VectorXd alphas;
  std::vector<std::size_t> support_indices;  // indices into the training set
  double rho = 0.0;                          // f(x) = sum coef K(sv, x) - rho
  std::size_t iterations = 0;
};

class KernelClassifier {
 public:
  KernelSpec kernel;
  double C = 1.0;
  std::vector<int> classes;  // ascending
  std::vector<BinaryMachine> machines;

  int predict(const Eigen::VectorXd& x) const;
  std::vector<int> predict(const Eigen::MatrixXd& samples) const;

  /// Decision values of every machine (rows: samples, cols: machines).
  Eigen::MatrixXd decision_values(const Eigen::MatrixXd& samples) const;
};

/// One-vs-one SMO training. Throws ValidationError on bad input and
/// NumericalError if a binary problem does not reach the KKT tolerance
/// within the iteration cap.
KernelClassifier svm_fit(const Eigen::MatrixXd& samples, std::span<const int> labels,
                         const KernelSpec& kernel, double C, const SvmOptions& options = {});

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

struct HyperGrid {
  std::vector<std::optional<Eigen::Index>> n_pca;  // nullopt: no reduction
  std::vector<double> C;
  /// gamma = scale / (feature dimension * feature variance)
  std::vector<double> gamma_scale;
  KernelSpec::Type kernel = KernelSpec::Type::Rbf;

  static HyperGrid default_grid();
  std::size_t size() const { return n_pca.size() * C.size() * gamma_scale.size(); }
};

struct HyperChoice {
  std::optional<Eigen::Index> n_pca;
  double C = 1.0;
  double gamma = 1.0;
  double validation_balanced_accuracy = 0.0;
};

struct FoldResult {
  std::vector<std::size_t> test_indices;
  ConfusionMatrix confusion;
  HyperChoice chosen;
};

struct CvOptions {
  std::size_t folds = 10;
  HyperGrid grid = HyperGrid::default_grid();
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;
  SvmOptions svm;
};

struct CvReport {
  std::vector<int> classes;
  std::vector<FoldResult> folds;
  ConfusionMatrix pooled;
  double balanced_accuracy = 0.0;
  std::vector<int> predictions;  // out-of-fold prediction per sample
  std::uint64_t seed = 0;
};

/// Stratified fold id per sample. Each class is shuffled and dealt
/// round-robin, continuing the deal across classes.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::size_t folds,
                                          std::uint64_t seed);

CvReport cross_validate(const Eigen::MatrixXd& samples, std::span<const int> labels,
                        const CvOptions& options);

nlohmann::json to_json(const CvReport& report);

// ---------------------------------------------------------------------------
// Linear decision regions (shared-covariance Gaussian discriminant)
// ---------------------------------------------------------------------------

class LinearRegionClassifier {
 public:
  std::vector<int> classes;  // ascending
  Eigen::MatrixXd means;     // K x p
  Eigen::MatrixXd pooled_covariance;
  Eigen::VectorXd priors;

  Eigen::VectorXd scores(const Eigen::VectorXd& x) const;
  /// argmax of the linear scores; ties go to the lowest class index.
  int predict(const Eigen::VectorXd& x) const;

  struct Cell {
    double x = 0.0;
    double y = 0.0;
    int label = 0;
  };
  /// Region raster over [x0, x1] x [y0, y1] for plotting (2-D models only).
  std::vector<Cell> raster(double x0, double x1, double y0, double y1, std::size_t nx,
                           std::size_t ny) const;

  void set_priors(const Eigen::VectorXd& p);

  /// Recomputes the cached precision matrix; throws ValidationError when the
  /// pooled covariance is not positive definite.
  void finalize();

 private:
  Eigen::MatrixXd precision_;
};

/// Priors are the class frequencies. Throws ValidationError if the pooled
/// covariance is singular after adding `ridge` to its diagonal.
LinearRegionClassifier linear_regions_fit(const Eigen::MatrixXd& points,
                                          std::span<const int> labels, double ridge = 1e-8);
int linear_regions_predict(const LinearRegionClassifier& model, const Eigen::VectorXd& point);

nlohmann::json to_json(const LinearRegionClassifier& m);
LinearRegionClassifier linear_regions_from_json(const nlohmann::json& j);

}  // namespace mindtrace
