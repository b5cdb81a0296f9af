#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <doctest.h>

#include "mindtrace/behave.hpp"
#include "mindtrace/error.hpp"
#include "mindtrace/synthetic.hpp"
#include "support.hpp"

using namespace mindtrace;

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

FeatureLayout small_layout() { return {2, 3, 1}; }

std::vector<BehaveRecord> small_records(std::size_t n, std::uint64_t seed) {
  auto records = synthetic::behave_features(n, small_layout(), 12, seed);
  BnParams truth = BnParams::zeros(small_layout());
  truth.w_motivation << 0.8, -0.4, 0.1;
  truth.w_opportunity << 0.5, 0.5, -0.5, 0.0;
  truth.w_capability << 1.0, 0.2;
  truth.branch_weights << 0.5, 0.3, 0.2;
  synthetic::simulate_votes(records, truth, seed + 1);
  return records;
}

// Log posterior written out per record with no shared code.
double oracle_log_posterior(const Eigen::VectorXd& packed, const std::vector<BehaveRecord>& records,
                            const BnPrior& prior) {
  const BnParams p = BnParams::unpack(packed, small_layout());
  const Eigen::Vector3d alpha = prior.dirichlet();
  double lp = 0.0;
  for (int k = 0; k < 3; ++k) lp += alpha(k) * std::log(p.branch_weights(k));
  const Eigen::Index n_w = packed.size() - 2;
  lp -= 0.5 * packed.head(n_w).squaredNorm() / (prior.weight_sd * prior.weight_sd);
  for (const auto& r : records) {
    auto h = [](const Eigen::VectorXd& w, const Eigen::VectorXd& x) {
      return logistic(w.head(x.size()).dot(x) + w(x.size()));
    };
    const double pb = p.branch_weights(0) * h(p.w_motivation, r.motivation) +
                      p.branch_weights(1) * h(p.w_opportunity, r.opportunity) +
                      p.branch_weights(2) * h(p.w_capability, r.capability);
    lp += prior.likelihood_weight *
          (r.votes_for * std::log(pb) + (r.votes - r.votes_for) * std::log1p(-pb));
  }
  return lp;
}

}  // namespace

TEST_SUITE("behave") {

TEST_CASE("forward pass on a hand example") {
  BehaveRecord r;
  r.motivation = Eigen::VectorXd::Constant(1, 2.0);
  r.opportunity = Eigen::VectorXd::Constant(1, 1.0);
  r.capability = Eigen::VectorXd::Constant(1, -1.0);
  BnParams p = BnParams::zeros({1, 1, 1});
  p.w_motivation << 0.5, -0.25;   // l = 0.75
  p.w_opportunity << -1.0, 0.0;   // l = -1
  p.w_capability << 2.0, 1.0;     // l = -1
  p.branch_weights << 0.6, 0.3, 0.1;
  const double expected = 0.6 / (1 + std::exp(-0.75)) + 0.3 / (1 + std::exp(1.0)) + 0.1 / (1 + std::exp(1.0));
  CHECK(std::abs(bn_forward(p, r) - expected) < 1e-12);
}

TEST_CASE("pack and unpack are inverse; mixing weights stay on the simplex") {
  std::mt19937_64 rng(1);
  const auto layout = small_layout();
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd v = testsupport::normal_matrix(static_cast<Eigen::Index>(layout.parameter_count()), 1, rng) * 3.0;
    const BnParams p = BnParams::unpack(v, layout);
    CHECK(p.branch_weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.branch_weights.minCoeff() > 0.0);
    CHECK((p.pack() - v).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(BnParams::names(layout).size() == layout.parameter_count());
}

TEST_CASE("log posterior matches a per-record oracle; the vectorised class matches both") {
  const auto records = small_records(40, 3);
  BnPrior prior;
  const BnPosterior vectorised(records, prior);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 30; ++i) {
    const Eigen::VectorXd v = testsupport::normal_matrix(static_cast<Eigen::Index>(small_layout().parameter_count()), 1, rng);
    const double oracle = oracle_log_posterior(v, records, prior);
    const double reference = bn_log_posterior(v, records, small_layout(), prior);
    // The oracle omits normalising constants; compare differences to a fixed point.
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(v.size());
    CHECK(reference - bn_log_posterior(zero, records, small_layout(), prior) ==
          doctest::Approx(oracle - oracle_log_posterior(zero, records, prior)).epsilon(1e-10));
    CHECK(std::abs(vectorised(v) - reference) < 1e-9);
  }
}

TEST_CASE("incremental target agrees with full evaluation along a random walk") {
  const auto records = small_records(60, 5);
  BnPosterior target(records, BnPrior{});
  const BnPosterior full(records, BnPrior{});
  std::mt19937_64 rng(2);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(small_layout().parameter_count()));
  target.reset(x);
  for (int step = 0; step < 400; ++step) {
    if (step % 7 == 0) {
      const Eigen::VectorXd y = x + 0.2 * testsupport::normal_matrix(x.size(), 1, rng);
      const double v = target.try_point(y);
      CHECK(std::abs(v - full(y)) < 1e-9);
      if (rng() % 2) {
        target.accept();
        x = y;
      }
      continue;
    }
    const auto j = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(x.size()));
    Eigen::VectorXd y = x;
    y(j) += 0.3 * detail::standard_normal(rng);
    const double v = target.try_coordinate(j, y(j));
    CHECK(std::abs(v - full(y)) < 1e-9);
    if (rng() % 2) {
      target.accept();
      x = y;
    }
  }
}

TEST_CASE("metropolis chain recovers a correlated Gaussian") {
  Eigen::Matrix2d cov;
  cov << 1.0, 0.8,
         0.8, 2.0;
  const Eigen::Vector2d mu(1.0, -2.0);
  const Eigen::Matrix2d precision = cov.inverse();
  auto log_density = [&](const Eigen::VectorXd& x) {
    const Eigen::Vector2d d = x - mu;
    return -0.5 * d.dot(precision * d);
  };
  McmcOptions options;
  options.warmup = 2000;
  options.draws = 20000;
  const ChainResult r = run_metropolis_chain(log_density, Eigen::Vector2d::Zero(), options, 42);
  const Eigen::RowVector2d mean = r.draws.colwise().mean();
  const Eigen::MatrixXd centred = r.draws.rowwise() - mean;
  const Eigen::Matrix2d sample_cov = centred.transpose() * centred / (r.draws.rows() - 1.0);
  CHECK(std::abs(mean(0) - mu(0)) < 0.1);
  CHECK(std::abs(mean(1) - mu(1)) < 0.15);
  CHECK((sample_cov - cov).cwiseAbs().maxCoeff() < 0.2);
  CHECK(r.acceptance > 0.1);
  CHECK(r.acceptance < 0.6);
}

TEST_CASE("split R-hat hand cases") {
  Eigen::MatrixXd same(8, 2);
  same.col(0) << 1, 2, 3, 4, 1, 2, 3, 4;
  same.col(1) = same.col(0);
  CHECK(split_rhat(same) == doctest::Approx(std::sqrt(0.75)).epsilon(1e-12));
  Eigen::MatrixXd apart = same;
  apart.col(1).array() += 100.0;
  CHECK(split_rhat(apart) > 10.0);
  CHECK(split_rhat(Eigen::MatrixXd::Ones(6, 3)) == 1.0);
  CHECK_THROWS_AS(split_rhat(Eigen::MatrixXd::Ones(3, 2)), ValidationError);
}

TEST_CASE("rmse examples") {
  const std::vector<double> p{0.1, 0.5, 0.9};
  const std::vector<double> t{0.0, 0.5, 1.0};
  CHECK(rmse(p, t) == doctest::Approx(std::sqrt(0.02 / 3.0)).epsilon(1e-12));
  CHECK(rmse(p, p) == 0.0);
  CHECK_THROWS_AS(rmse(std::span<const double>{}, std::span<const double>{}), ValidationError);
  CHECK_THROWS_AS(rmse(p, std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("behave csv round trip and record validation") {
  const auto records = small_records(5, 8);
  std::stringstream ss;
  write_behave_csv(ss, records);
  const auto back = load_behave_csv(ss);
  REQUIRE(back.size() == records.size());
  CHECK(back[3].votes_for == records[3].votes_for);
  CHECK(back[3].motivation.isApprox(records[3].motivation, 1e-15));
  CHECK(back[0].layout() == small_layout());

  BehaveRecord bad = records[0];
  bad.votes_for = bad.votes + 1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = records[0];
  bad.opportunity(0) = 0.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  std::istringstream unknown("person_id,m_a,o_a,c_a,n_w,n_v,n_b,extra\np,0,1,0,1,2,1,9\n");
  CHECK_THROWS_AS(load_behave_csv(unknown), ValidationError);
}

TEST_CASE("prior-only fit reproduces the Dirichlet mixing prior") {
  const auto records = small_records(20, 11);
  BnPrior prior;
  prior.likelihood_weight = 0.0;
  McmcOptions options;
  options.chains = 2;
  options.warmup = 1000;
  options.draws = 4000;
  options.seed = 3;
  const PosteriorSamples s = bn_fit(records, prior, options);
  const Eigen::RowVector3d mean = s.branch_weight_draws().colwise().mean();
  const Eigen::Vector3d alpha = prior.dirichlet();
  for (int k = 0; k < 3; ++k) CHECK(std::abs(mean(k) - alpha(k) / alpha.sum()) < 0.04);
  const PosteriorSamples back = posterior_from_json(to_json(s));
  CHECK(back.draws == s.draws);
  CHECK(back.names == s.names);
}

TEST_CASE("posterior prediction interval brackets the mean") {
  const auto records = small_records(30, 12);
  McmcOptions options;
  options.chains = 2;
  options.warmup = 300;
  options.draws = 300;
  const PosteriorSamples s = bn_fit(records, BnPrior{}, options);
  for (const auto& r : records) {
    const Prediction p = bn_predict(s, r);
    CHECK(p.lower <= p.mean);
    CHECK(p.mean <= p.upper);
    CHECK(p.lower >= 0.0);
    CHECK(p.upper <= 1.0);
  }
}


TEST_CASE("forward pass is monotone in a feature with positive weight") {
  std::mt19937_64 rng(60);
  const auto records = small_records(20, 61);
  for (int trial = 0; trial < 50; ++trial) {
    BnParams p = BnParams::unpack(testsupport::normal_matrix(static_cast<Eigen::Index>(small_layout().parameter_count()), 1, rng), small_layout());
    p.w_motivation(0) = std::abs(p.w_motivation(0)) + 0.01;
    BehaveRecord r = records[static_cast<std::size_t>(trial % 20)];
    const double before = bn_forward(p, r);
    r.motivation(0) += 0.1;
    CHECK(bn_forward(p, r) > before);
  }
}

TEST_CASE("data can pull the opportunity weight above its prior mean") {
  const FeatureLayout layout{2, 3, 1};
  auto records = synthetic::behave_features(300, layout, 24, 70);
  BnParams truth = BnParams::zeros(layout);
  truth.w_motivation << 0.5, -0.5, 0.0;
  truth.w_opportunity << 1.5, -1.5, 1.0, 0.0;
  truth.w_capability << 0.5, 0.0;
  truth.branch_weights << 0.25, 0.7, 0.05;
  synthetic::simulate_votes(records, truth, 71);
  McmcOptions options;
  options.chains = 2;
  options.warmup = 1000;
  options.draws = 1000;
  options.seed = 72;
  const BnPrior prior;
  const PosteriorSamples s = bn_fit(records, prior, options);
  const Eigen::Vector3d alpha = prior.dirichlet();
  CHECK(s.branch_weight_draws().col(1).mean() > alpha(1) / alpha.sum());
}

}
