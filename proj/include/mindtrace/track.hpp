#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mindtrace/classify.hpp"
#include "mindtrace/corpus.hpp"

namespace mindtrace {

// Statement types s and person categories k share the index order c, e, t.
inline constexpr int kCategoryCount = 3;

// ---------------------------------------------------------------------------
// Category statistics
// ---------------------------------------------------------------------------

struct CategoryTables {
  Eigen::Matrix3d p_s_given_k;  // (s, k); columns sum to one
  Eigen::Matrix3d p_k_given_s;  // (s, k); rows sum to one
  Eigen::Vector3d p_s;
  Eigen::Vector3d p_k;

  /// Human-readable list of violated invariants: stochasticity within
  /// `stochastic_tol`, marginal consistency p_s = p_s_given_k * p_k and Bayes
  /// reconstruction of p_k_given_s within `consistency_tol`.
  std::vector<std::string> violations(double stochastic_tol = 0.005,
                                      double consistency_tol = 0.005) const;

  /// p_k_given_s rebuilt from p_s_given_k and p_k by Bayes' rule.
  Eigen::Matrix3d bayes_p_k_given_s() const;
};

enum class TableVariant {
  Printed,    // as published; column c of p(s|k) sums to 1.151
  Corrected,  // p(s=e | k=c) = 0.017
};

/// Built-in reference statistics for the three-category tracker.
CategoryTables reference_tables(TableVariant variant);

struct Gaussian2 {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();

  double log_density(const Eigen::Vector2d& x) const;
};

struct CategoryGaussians {
  std::array<Gaussian2, 3> z_given_s;  // measurement per statement type; shared covariance
  std::array<Gaussian2, 3> x_given_k;  // mind-state per person category
  std::array<Gaussian2, 3> x_given_s;  // mind-state per statement type

  /// Throws ValidationError unless every covariance is SPD and the
  /// measurement covariances are shared.
  void validate() const;
};

struct CategoryModel {
  CategoryTables tables;
  CategoryGaussians gaussians;
};

struct LabelledPoint {
  std::string person_id;
  int statement_type = 0;  // s
  Eigen::Vector2d z = Eigen::Vector2d::Zero();
};

struct EstimateOptions {
  /// Additive smoothing of the (s, k) counts; 0 keeps empty cells at zero.
  double laplace = 0.0;
  /// Ridge added to fitted covariances, relative to the mean variance of z.
  double covariance_floor = 1e-6;
};

/// Estimates tables and Gaussians from labelled 2-D quote vectors.
/// `person_category` maps every person id to k. Throws ValidationError if a
/// person is missing from the map or a category has no quotes.
CategoryModel estimate_category_model(std::span<const LabelledPoint> points,
                                      const std::map<std::string, int>& person_category,
                                      const EstimateOptions& options = {});

nlohmann::json to_json(const CategoryTables& t);
nlohmann::json to_json(const CategoryModel& m);
/// Throws ValidationError if the loaded tables violate their invariants.
CategoryTables tables_from_json(const nlohmann::json& j, bool validate = true);
CategoryModel category_model_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Mixtures
// ---------------------------------------------------------------------------

struct GaussianMixture {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;

  void validate() const;
};

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Single Gaussian with the mixture's first two moments.
Moments reduce_mixture(const GaussianMixture& mixture);

/// Mixture over z given the mind-state position x: components N(mu_z^s, Sigma_z)
/// weighted by p(x|s) p(s) sum_k p(x|k) p(k), normalised over s. When every
/// weight underflows the weights fall back to p(s) and a warning is appended.
GaussianMixture measurement_mixture(const Eigen::Vector2d& x, const CategoryModel& model,
                                    std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// Filter
// ---------------------------------------------------------------------------

enum class ProcessNoise {
  ContinuousWhiteAcceleration,  // sigma2 * [dt^3/3, dt^2/2; dt^2/2, dt]
  DiscreteWhiteAcceleration,    // sigma2 * [dt^4/4, dt^3/2; dt^3/2, dt^2]
};

/// Nearly-constant-velocity motion in two independent axes; time in years.
struct MotionModel {
  double sigma2 = 0.01;
  double prior_position_variance = 16.0;
  double prior_velocity_variance = 0.09;
  ProcessNoise noise = ProcessNoise::ContinuousWhiteAcceleration;

  Eigen::Matrix4d transition(double dt) const;
  Eigen::Matrix4d process_noise(double dt) const;
  void validate() const;
};

/// State [x1, x1', x2, x2'] with covariance at `time` (years since epoch).
struct StateEstimate {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
  double time = 0.0;

  Eigen::Vector2d position() const { return {mean(0), mean(2)}; }
  Eigen::Vector2d velocity() const { return {mean(1), mean(3)}; }
  Eigen::Matrix2d position_covariance() const;
};

StateEstimate initial_state(const MotionModel& motion, double time,
                            const Eigen::Vector2d& position_mean = Eigen::Vector2d::Zero());

/// Measurement covariance as a function of the (predicted) position.
class MeasurementNoise {
 public:
  virtual ~MeasurementNoise() = default;
  virtual Eigen::Matrix2d covariance_at(const Eigen::Vector2d& position) const = 0;
};

/// R_x from the reduced measurement mixture at the given position.
class StateDependentNoise final : public MeasurementNoise {
 public:
  explicit StateDependentNoise(CategoryModel model) : model_(std::move(model)) {}
  Eigen::Matrix2d covariance_at(const Eigen::Vector2d& position) const override;
  const CategoryModel& model() const { return model_; }

 private:
  CategoryModel model_;
};

class FixedNoise final : public MeasurementNoise {
 public:
  explicit FixedNoise(const Eigen::Matrix2d& r) : r_(r) {}
  Eigen::Matrix2d covariance_at(const Eigen::Vector2d&) const override { return r_; }

 private:
  Eigen::Matrix2d r_;
};

StateEstimate predict_state(const StateEstimate& state, double time, const MotionModel& motion);

/// Predict to `time`, evaluate R at the predicted position, then update with z.
/// Throws ValidationError if `time` precedes the prior and NumericalError if
/// the posterior covariance is not SPD.
StateEstimate kalman_step(const StateEstimate& prior, const Eigen::Vector2d& z, double time,
                          const MotionModel& motion, const MeasurementNoise& noise);
StateEstimate kalman_step(const StateEstimate& prior, const Eigen::Vector2d& z, double time,
                          const MotionModel& motion, const CategoryModel& model);

struct TrackPoint {
  Date date;
  Eigen::Vector2d z = Eigen::Vector2d::Zero();
};

struct TrackStep {
  Date date;
  Eigen::Vector2d z = Eigen::Vector2d::Zero();
  StateEstimate state;
  Eigen::Matrix2d measurement_covariance = Eigen::Matrix2d::Identity();
  std::optional<int> region;
};

using Track = std::vector<TrackStep>;

/// Filters one person's time-ordered measurements. Without `prior` the
/// filter starts from `initial_state` at the first measurement time.
Track track_person(std::span<const TrackPoint> points, const MotionModel& motion,
                   const MeasurementNoise& noise,
                   const std::optional<StateEstimate>& prior = std::nullopt,
                   const LinearRegionClassifier* regions = nullptr);

/// Predict-only propagation of the last state by `horizon` years.
StateEstimate predict_future(const Track& track, double horizon, const MotionModel& motion);

void write_track_csv(std::ostream& out, const Track& track, std::span<const std::string> region_names = {});

}  // namespace mindtrace
