#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Cholesky>

#include "mindtrace/classify.hpp"
#include "mindtrace/error.hpp"

namespace mindtrace {

void LinearRegionClassifier::finalize() {
  Eigen::LLT<Eigen::MatrixXd> llt(pooled_covariance);
  if (llt.info() != Eigen::Success) {
    throw ValidationError("linear regions: pooled covariance is singular");
  }
  precision_ = llt.solve(Eigen::MatrixXd::Identity(pooled_covariance.rows(),
                                                   pooled_covariance.cols()));
}

void LinearRegionClassifier::set_priors(const Eigen::VectorXd& p) {
  if (p.size() != static_cast<Eigen::Index>(classes.size()) || (p.array() <= 0.0).any()) {
    throw ValidationError("linear regions: priors must be positive, one per class");
  }
  priors = p / p.sum();
}

Eigen::VectorXd LinearRegionClassifier::scores(const Eigen::VectorXd& x) const {
  if (x.size() != means.cols()) throw ValidationError("linear regions: dimension mismatch");
  Eigen::VectorXd s(means.rows());
  for (Eigen::Index k = 0; k < means.rows(); ++k) {
    const Eigen::VectorXd w = precision_ * means.row(k).transpose();
    s(k) = w.dot(x) - 0.5 * means.row(k).dot(w) + std::log(priors(k));
  }
  return s;
}

int LinearRegionClassifier::predict(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd s = scores(x);
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < s.size(); ++k) {
    if (s(k) > s(best)) best = k;
  }
  return classes[static_cast<std::size_t>(best)];
}

std::vector<LinearRegionClassifier::Cell> LinearRegionClassifier::raster(
    double x0, double x1, double y0, double y1, std::size_t nx, std::size_t ny) const {
  if (means.cols() != 2) throw ValidationError("linear regions: raster needs a 2-D model");
  if (nx < 2 || ny < 2) throw ValidationError("linear regions: raster needs >= 2 cells per axis");
  std::vector<Cell> cells;
  cells.reserve(nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    const double y = y0 + (y1 - y0) * static_cast<double>(j) / static_cast<double>(ny - 1);
    for (std::size_t i = 0; i < nx; ++i) {
      const double x = x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(nx - 1);
      cells.push_back({x, y, predict(Eigen::Vector2d(x, y))});
    }
  }
  return cells;
}

LinearRegionClassifier linear_regions_fit(const Eigen::MatrixXd& points,
                                          std::span<const int> labels, double ridge) {
  if (static_cast<Eigen::Index>(labels.size()) != points.rows()) {
    throw ValidationError("label count does not match point count");
  }
  std::map<int, std::vector<Eigen::Index>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(static_cast<Eigen::Index>(i));
  if (groups.size() < 2) throw ValidationError("linear regions need at least 2 classes");

  const Eigen::Index d = points.cols();
  const auto k = static_cast<Eigen::Index>(groups.size());
  LinearRegionClassifier m;
  m.means.resize(k, d);
  m.priors.resize(k);
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  Eigen::Index row = 0;
  for (const auto& [label, idx] : groups) {
    m.classes.push_back(label);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (const auto i : idx) mu += points.row(i).transpose();
    mu /= static_cast<double>(idx.size());
    for (const auto i : idx) {
      const Eigen::VectorXd diff = points.row(i).transpose() - mu;
      scatter += diff * diff.transpose();
    }
    m.means.row(row) = mu.transpose();
    m.priors(row) = static_cast<double>(idx.size()) / static_cast<double>(labels.size());
    ++row;
  }
  const Eigen::Index n = points.rows();
  m.pooled_covariance = scatter / static_cast<double>(n > k ? n - k : n);
  m.pooled_covariance.diagonal().array() += ridge;
  m.finalize();
  return m;
}

int linear_regions_predict(const LinearRegionClassifier& model, const Eigen::VectorXd& point) {
  return model.predict(point);
}

nlohmann::json to_json(const LinearRegionClassifier& m) {
  nlohmann::json means = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.means.rows(); ++r) {
    std::vector<double> v;
    for (Eigen::Index c = 0; c < m.means.cols(); ++c) v.push_back(m.means(r, c));
    means.push_back(v);
  }
  nlohmann::json cov = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.pooled_covariance.rows(); ++r) {
    std::vector<double> v;
    for (Eigen::Index c = 0; c < m.pooled_covariance.cols(); ++c) v.push_back(m.pooled_covariance(r, c));
    cov.push_back(v);
  }
  return {{"classes", m.classes},
          {"means", means},
          {"pooled_covariance", cov},
          {"priors", std::vector<double>(m.priors.data(), m.priors.data() + m.priors.size())}};
}

LinearRegionClassifier linear_regions_from_json(const nlohmann::json& j) {
  LinearRegionClassifier m;
  m.classes = j.at("classes").get<std::vector<int>>();
  const auto means = j.at("means").get<std::vector<std::vector<double>>>();
  const auto cov = j.at("pooled_covariance").get<std::vector<std::vector<double>>>();
  const auto priors = j.at("priors").get<std::vector<double>>();
  const auto k = static_cast<Eigen::Index>(means.size());
  const auto d = k == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(means[0].size());
  if (k != static_cast<Eigen::Index>(m.classes.size()) || priors.size() != m.classes.size() ||
      static_cast<Eigen::Index>(cov.size()) != d) {
    throw ValidationError("linear regions: inconsistent model file");
  }
  m.means.resize(k, d);
  m.pooled_covariance.resize(d, d);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) m.means(r, c) = means[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) m.pooled_covariance(r, c) = cov[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  m.priors = Eigen::Map<const Eigen::VectorXd>(priors.data(), k);
  m.finalize();
  return m;
}

}  // namespace mindtrace
