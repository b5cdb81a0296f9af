#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>

#include "mindtrace/error.hpp"
#include "mindtrace/track.hpp"

namespace mindtrace {

namespace {

constexpr const char* kNames = "cet";

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (const double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (const double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

bool is_spd(const Eigen::MatrixXd& m) {
  if (!m.allFinite() || !m.isApprox(m.transpose(), 1e-9)) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

nlohmann::json mat_json(const Eigen::MatrixXd& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row;
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

template <int R, int C>
Eigen::Matrix<double, R, C> json_fixed(const nlohmann::json& j) {
  Eigen::Matrix<double, R, C> m;
  if (static_cast<int>(j.size()) != R) throw ValidationError("matrix has wrong row count");
  for (int r = 0; r < R; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (static_cast<int>(row.size()) != C) throw ValidationError("matrix has wrong column count");
    for (int c = 0; c < C; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Eigen::Vector3d json_vec3(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw ValidationError("expected a 3-vector");
  return {v[0], v[1], v[2]};
}

nlohmann::json gaussian_json(const Gaussian2& g) {
  return {{"mean", {g.mean(0), g.mean(1)}}, {"cov", mat_json(g.cov)}};
}

Gaussian2 gaussian_from_json(const nlohmann::json& j) {
  Gaussian2 g;
  const auto m = j.at("mean").get<std::vector<double>>();
  if (m.size() != 2) throw ValidationError("Gaussian mean must have 2 entries");
  g.mean = {m[0], m[1]};
  g.cov = json_fixed<2, 2>(j.at("cov"));
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tables

Eigen::Matrix3d CategoryTables::bayes_p_k_given_s() const {
  Eigen::Matrix3d out;
  for (int s = 0; s < 3; ++s) {
    Eigen::RowVector3d joint;
    for (int k = 0; k < 3; ++k) joint(k) = p_s_given_k(s, k) * p_k(k);
    const double total = joint.sum();
    out.row(s) = total > 0.0 ? Eigen::RowVector3d(joint / total) : Eigen::RowVector3d(p_k.transpose());
  }
  return out;
}

std::vector<std::string> CategoryTables::violations(double stochastic_tol,
                                                    double consistency_tol) const {
  std::vector<std::string> out;
  auto fmt = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };
  if ((p_s_given_k.array() < 0.0).any() || (p_k_given_s.array() < 0.0).any() ||
      (p_s.array() < 0.0).any() || (p_k.array() < 0.0).any()) {
    out.push_back("negative probability");
  }
  for (int k = 0; k < 3; ++k) {
    const double sum = p_s_given_k.col(k).sum();
    if (std::abs(sum - 1.0) > stochastic_tol) {
      out.push_back(std::string("p(s|k) column ") + kNames[k] + " sums to " + fmt(sum));
    }
  }
  for (int s = 0; s < 3; ++s) {
    const double sum = p_k_given_s.row(s).sum();
    if (std::abs(sum - 1.0) > stochastic_tol) {
      out.push_back(std::string("p(k|s) row ") + kNames[s] + " sums to " + fmt(sum));
    }
  }
  const Eigen::Vector3d marginal = p_s_given_k * p_k;
  for (int s = 0; s < 3; ++s) {
    if (std::abs(marginal(s) - p_s(s)) > consistency_tol) {
      out.push_back(std::string("p(s=") + kNames[s] + ") is " + fmt(p_s(s)) +
                    " but p(s|k) p(k) gives " + fmt(marginal(s)));
    }
  }
  const Eigen::Matrix3d bayes = bayes_p_k_given_s();
  for (int s = 0; s < 3; ++s) {
    for (int k = 0; k < 3; ++k) {
      if (std::abs(bayes(s, k) - p_k_given_s(s, k)) > consistency_tol) {
        out.push_back(std::string("p(k=") + kNames[k] + "|s=" + kNames[s] + ") is " +
                      fmt(p_k_given_s(s, k)) + " but Bayes' rule gives " + fmt(bayes(s, k)));
      }
    }
  }
  return out;
}

CategoryTables reference_tables(TableVariant variant) {
  CategoryTables t;
  // rows s = c, e, t; columns k = c, e, t
  t.p_s_given_k << 0.983, 0.293, 0.356,
                   0.168, 0.707, 0.475,
                   0.0,   0.0,   0.169;
  if (variant == TableVariant::Corrected) t.p_s_given_k(1, 0) = 0.017;
  t.p_k_given_s << 0.926, 0.014, 0.060,
                   0.122, 0.259, 0.620,
                   0.0,   0.0,   1.0;
  t.p_s << 0.863, 0.112, 0.025;
  t.p_k << 0.813, 0.04, 0.146;
  return t;
}

// ---------------------------------------------------------------------------
// Gaussians

double Gaussian2::log_density(const Eigen::Vector2d& x) const {
  Eigen::LLT<Eigen::Matrix2d> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("Gaussian covariance is not SPD");
  const Eigen::Vector2d w = llt.matrixL().solve(x - mean);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (w.squaredNorm() + log_det) - std::log(2.0 * std::numbers::pi);
}

void CategoryGaussians::validate() const {
  for (int i = 0; i < 3; ++i) {
    for (const auto* g : {&z_given_s[static_cast<std::size_t>(i)], &x_given_k[static_cast<std::size_t>(i)],
                          &x_given_s[static_cast<std::size_t>(i)]}) {
      if (!g->mean.allFinite() || !is_spd(g->cov)) {
        throw ValidationError("category Gaussian " + std::string(1, kNames[i]) +
                              " has a non-SPD covariance");
      }
    }
  }
  if (!z_given_s[1].cov.isApprox(z_given_s[0].cov, 1e-12) ||
      !z_given_s[2].cov.isApprox(z_given_s[0].cov, 1e-12)) {
    throw ValidationError("measurement covariances must be shared across statement types");
  }
}

// ---------------------------------------------------------------------------
// Estimation

CategoryModel estimate_category_model(std::span<const LabelledPoint> points,
                                      const std::map<std::string, int>& person_category,
                                      const EstimateOptions& options) {
  if (points.empty()) throw ValidationError("no labelled points");
  if (options.laplace < 0.0) throw ValidationError("laplace smoothing must be >= 0");

  Eigen::Matrix3d counts = Eigen::Matrix3d::Zero();
  std::vector<int> category(points.size());
  std::map<std::string, std::pair<Eigen::Vector2d, int>> person_sum;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (p.statement_type < 0 || p.statement_type > 2) {
      throw ValidationError("statement type out of range for person " + p.person_id);
    }
    const auto it = person_category.find(p.person_id);
    if (it == person_category.end()) {
      throw ValidationError("no category for person " + p.person_id);
    }
    if (it->second < 0 || it->second > 2) throw ValidationError("category out of range");
    category[i] = it->second;
    counts(p.statement_type, it->second) += 1.0;
    auto& acc = person_sum.try_emplace(p.person_id, Eigen::Vector2d::Zero(), 0).first->second;
    acc.first += p.z;
    acc.second += 1;
  }
  for (int k = 0; k < 3; ++k) {
    if (counts.col(k).sum() == 0.0) {
      throw ValidationError(std::string("category ") + kNames[k] + " has no quotes");
    }
  }

  CategoryModel model;
  auto& t = model.tables;
  const double total = counts.sum();
  for (int k = 0; k < 3; ++k) {
    const double n_k = counts.col(k).sum();
    t.p_k(k) = n_k / total;
    for (int s = 0; s < 3; ++s) {
      t.p_s_given_k(s, k) = (counts(s, k) + options.laplace) / (n_k + 3.0 * options.laplace);
    }
  }
  t.p_s = t.p_s_given_k * t.p_k;
  t.p_k_given_s = t.bayes_p_k_given_s();

  // Gaussians over the 2-D vectors.
  const auto n = static_cast<double>(points.size());
  Eigen::Vector2d overall_mean = Eigen::Vector2d::Zero();
  for (const auto& p : points) overall_mean += p.z;
  overall_mean /= n;
  Eigen::Matrix2d overall_cov = Eigen::Matrix2d::Zero();
  for (const auto& p : points) overall_cov += (p.z - overall_mean) * (p.z - overall_mean).transpose();
  overall_cov /= std::max(n - 1.0, 1.0);
  double floor = options.covariance_floor * 0.5 * overall_cov.trace();
  if (!(floor > 0.0)) floor = options.covariance_floor;
  const Eigen::Matrix2d ridge = floor * Eigen::Matrix2d::Identity();

  auto fit = [&](const std::vector<Eigen::Vector2d>& xs, const Eigen::Matrix2d& fallback_cov) {
    Gaussian2 g;
    if (xs.empty()) {
      g.mean = overall_mean;
      g.cov = fallback_cov + ridge;
      return g;
    }
    g.mean = Eigen::Vector2d::Zero();
    for (const auto& x : xs) g.mean += x;
    g.mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) {
      g.cov = fallback_cov + ridge;
      return g;
    }
    g.cov = Eigen::Matrix2d::Zero();
    for (const auto& x : xs) g.cov += (x - g.mean) * (x - g.mean).transpose();
    g.cov /= static_cast<double>(xs.size() - 1);
    g.cov += ridge;
    return g;
  };

  std::array<std::vector<Eigen::Vector2d>, 3> z_by_s;
  std::array<std::vector<Eigen::Vector2d>, 3> z_by_k;
  std::array<std::vector<Eigen::Vector2d>, 3> x_by_s;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    z_by_s[static_cast<std::size_t>(p.statement_type)].push_back(p.z);
    z_by_k[static_cast<std::size_t>(category[i])].push_back(p.z);
    const auto& acc = person_sum.at(p.person_id);
    x_by_s[static_cast<std::size_t>(p.statement_type)].push_back(acc.first / acc.second);
  }

  // Shared measurement covariance pooled over statement types.
  Eigen::Matrix2d pooled = Eigen::Matrix2d::Zero();
  int used = 0;
  for (int s = 0; s < 3; ++s) {
    const auto& zs = z_by_s[static_cast<std::size_t>(s)];
    if (zs.empty()) continue;
    ++used;
    Eigen::Vector2d mu = Eigen::Vector2d::Zero();
    for (const auto& z : zs) mu += z;
    mu /= static_cast<double>(zs.size());
    for (const auto& z : zs) pooled += (z - mu) * (z - mu).transpose();
  }
  pooled /= std::max(n - used, 1.0);
  pooled += ridge;

  auto& g = model.gaussians;
  for (std::size_t s = 0; s < 3; ++s) {
    Gaussian2 zg = fit(z_by_s[s], overall_cov);
    zg.cov = pooled;
    g.z_given_s[s] = zg;
    g.x_given_s[s] = fit(x_by_s[s], overall_cov);
    g.x_given_k[s] = fit(z_by_k[s], overall_cov);
  }
  g.validate();
  return model;
}

// ---------------------------------------------------------------------------
// Persistence

nlohmann::json to_json(const CategoryTables& t) {
  return {{"p_s_given_k", mat_json(t.p_s_given_k)},
          {"p_k_given_s", mat_json(t.p_k_given_s)},
          {"p_s", {t.p_s(0), t.p_s(1), t.p_s(2)}},
          {"p_k", {t.p_k(0), t.p_k(1), t.p_k(2)}}};
}

nlohmann::json to_json(const CategoryModel& m) {
  nlohmann::json g;
  for (const auto& [key, arr] : {std::pair{"z_given_s", &m.gaussians.z_given_s},
                                 std::pair{"x_given_k", &m.gaussians.x_given_k},
                                 std::pair{"x_given_s", &m.gaussians.x_given_s}}) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& gauss : *arr) list.push_back(gaussian_json(gauss));
    g[key] = list;
  }
  return {{"tables", to_json(m.tables)}, {"gaussians", g}};
}

CategoryTables tables_from_json(const nlohmann::json& j, bool validate) {
  CategoryTables t;
  t.p_s_given_k = json_fixed<3, 3>(j.at("p_s_given_k"));
  t.p_k_given_s = json_fixed<3, 3>(j.at("p_k_given_s"));
  t.p_s = json_vec3(j.at("p_s"));
  t.p_k = json_vec3(j.at("p_k"));
  if (validate) {
    const auto problems = t.violations();
    if (!problems.empty()) {
      std::string msg = "category tables fail validation:";
      for (const auto& p : problems) msg += "\n  " + p;
      throw ValidationError(msg);
    }
  }
  return t;
}

CategoryModel category_model_from_json(const nlohmann::json& j) {
  CategoryModel m;
  m.tables = tables_from_json(j.at("tables"), false);
  const auto& g = j.at("gaussians");
  for (std::size_t i = 0; i < 3; ++i) {
    m.gaussians.z_given_s[i] = gaussian_from_json(g.at("z_given_s").at(i));
    m.gaussians.x_given_k[i] = gaussian_from_json(g.at("x_given_k").at(i));
    m.gaussians.x_given_s[i] = gaussian_from_json(g.at("x_given_s").at(i));
  }
  m.gaussians.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Mixtures

void GaussianMixture::validate() const {
  if (weights.empty() || weights.size() != means.size() || weights.size() != covariances.size()) {
    throw ValidationError("mixture: component arrays differ in length");
  }
  double sum = 0.0;
  for (const double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("mixture: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("mixture: weights do not sum to one");
  const auto d = means.front().size();
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (means[i].size() != d || covariances[i].rows() != d || covariances[i].cols() != d) {
      throw ValidationError("mixture: inconsistent component dimensions");
    }
  }
}

Moments reduce_mixture(const GaussianMixture& mixture) {
  mixture.validate();
  const auto d = mixture.means.front().size();
  Moments m;
  m.mean = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < mixture.weights.size(); ++i) m.mean += mixture.weights[i] * mixture.means[i];
  m.covariance = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < mixture.weights.size(); ++i) {
    const Eigen::VectorXd diff = mixture.means[i] - m.mean;
    m.covariance += mixture.weights[i] * (mixture.covariances[i] + diff * diff.transpose());
  }
  m.covariance = 0.5 * (m.covariance + m.covariance.transpose());
  return m;
}

GaussianMixture measurement_mixture(const Eigen::Vector2d& x, const CategoryModel& model,
                                    std::vector<std::string>* warnings) {
  const auto& t = model.tables;
  const auto& g = model.gaussians;

  std::array<double, 3> k_terms{};
  for (int k = 0; k < 3; ++k) {
    k_terms[static_cast<std::size_t>(k)] =
        g.x_given_k[static_cast<std::size_t>(k)].log_density(x) + std::log(t.p_k(k));
  }
  const double k_factor = log_sum_exp(k_terms);

  std::array<double, 3> log_w{};
  for (int s = 0; s < 3; ++s) {
    log_w[static_cast<std::size_t>(s)] =
        g.x_given_s[static_cast<std::size_t>(s)].log_density(x) + std::log(t.p_s(s)) + k_factor;
  }
  const double norm = log_sum_exp(log_w);

  GaussianMixture m;
  if (std::isfinite(norm)) {
    for (int s = 0; s < 3; ++s) m.weights.push_back(std::exp(log_w[static_cast<std::size_t>(s)] - norm));
  } else {
    if (warnings) warnings->push_back("measurement mixture weights underflowed; using p(s)");
    const double ps = t.p_s.sum();
    for (int s = 0; s < 3; ++s) m.weights.push_back(ps > 0.0 ? t.p_s(s) / ps : 1.0 / 3.0);
  }
  double sum = 0.0;
  for (const double w : m.weights) sum += w;
  for (auto& w : m.weights) w /= sum;
  for (std::size_t s = 0; s < 3; ++s) {
    m.means.emplace_back(g.z_given_s[s].mean);
    m.covariances.emplace_back(g.z_given_s[s].cov);
  }
  return m;
}

}  // namespace mindtrace
