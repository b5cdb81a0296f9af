#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include <doctest.h>

#include "mindtrace/classify.hpp"
#include "mindtrace/error.hpp"
#include "support.hpp"

using namespace mindtrace;

namespace {

struct Blobs {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

Blobs blobs(int per_class, int classes, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Blobs b;
  b.x = testsupport::normal_matrix(per_class * classes, 2, rng) * spread;
  for (int i = 0; i < per_class * classes; ++i) {
    const int k = i % classes;
    b.y.push_back(k);
    b.x(i, 0) += 4.0 * std::cos(2.0 * k);
    b.x(i, 1) += 4.0 * std::sin(2.0 * k);
  }
  return b;
}

}  // namespace

TEST_SUITE("classify") {

TEST_CASE("balanced accuracy hand examples") {
  ConfusionMatrix c(2, 2);
  c << 8, 2,
       1, 9;
  CHECK(balanced_accuracy(c) == doctest::Approx(0.85));
  ConfusionMatrix empty_row(3, 3);
  empty_row << 5, 0, 0,
               0, 0, 0,
               1, 0, 3;
  CHECK(balanced_accuracy(empty_row) == doctest::Approx((1.0 + 0.75) / 2.0));
  ConfusionMatrix one(1, 1);
  one << 3;
  CHECK_THROWS_AS(balanced_accuracy(one), ValidationError);
}

TEST_CASE("smo solution satisfies the dual constraints") {
  const Blobs b = blobs(30, 2, 1.5, 4);
  const double C = 2.0;
  const auto clf = svm_fit(b.x, b.y, KernelSpec::rbf(0.5), C);
  REQUIRE(clf.machines.size() == 1);
  const auto& m = clf.machines[0];
  CHECK(std::abs(m.coefficients.sum()) < 1e-8);
  CHECK(m.alphas.minCoeff() >= -1e-12);
  CHECK(m.alphas.maxCoeff() <= C + 1e-12);
}

TEST_CASE("linear svm on separable points finds the maximum margin") {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0,
       0, 1,
       2, 0,
       2, 1;
  const std::vector<int> y{0, 0, 1, 1};
  const auto clf = svm_fit(x, y, KernelSpec::linear(), 100.0, SvmOptions{1e-6});
  const Eigen::MatrixXd probe = (Eigen::MatrixXd(3, 2) << 0.9, 0.5, 1.1, 0.5, 1.0, 7.0).finished();
  const Eigen::MatrixXd f = clf.decision_values(probe);
  // Boundary x1 = 1 with margin 1 at the training points: f = +-(x1 - 1).
  CHECK(std::abs(f(2, 0)) < 1e-3);
  CHECK(std::abs(std::abs(f(0, 0)) - 0.1) < 1e-3);
  CHECK(clf.predict(Eigen::VectorXd(Eigen::Vector2d(0.2, 0.5))) == 0);
  CHECK(clf.predict(Eigen::VectorXd(Eigen::Vector2d(1.8, 0.5))) == 1);
}

TEST_CASE("stratified folds partition the samples and balance classes") {
  std::vector<int> y;
  for (int i = 0; i < 57; ++i) y.push_back(i % 3 == 0 ? 1 : 0);
  const auto folds = stratified_folds(y, 10, 3);
  REQUIRE(folds.size() == y.size());
  std::vector<int> per_fold(10, 0);
  std::vector<int> ones(10, 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    REQUIRE(folds[i] < 10);
    ++per_fold[folds[i]];
    ones[folds[i]] += y[i];
  }
  CHECK(*std::max_element(per_fold.begin(), per_fold.end()) -
            *std::min_element(per_fold.begin(), per_fold.end()) <= 1);
  CHECK(*std::max_element(ones.begin(), ones.end()) -
            *std::min_element(ones.begin(), ones.end()) <= 1);
  CHECK(stratified_folds(y, 10, 3) == folds);
}

TEST_CASE("cross-validation tests every sample exactly once") {
  const Blobs b = blobs(25, 3, 0.8, 10);
  CvOptions options;
  options.folds = 5;
  options.grid.n_pca = {std::nullopt};
  options.grid.C = {1.0};
  options.grid.gamma_scale = {1.0};
  const CvReport report = cross_validate(b.x, b.y, options);
  std::vector<int> seen(b.y.size(), 0);
  for (const auto& f : report.folds) {
    for (const auto i : f.test_indices) ++seen[i];
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
  CHECK(report.pooled.sum() == static_cast<std::int64_t>(b.y.size()));
  CHECK(report.balanced_accuracy > 0.95);
}

TEST_CASE("linear regions reproduce the shared-covariance discriminant") {
  const Blobs b = blobs(50, 3, 1.0, 12);
  const auto regions = linear_regions_fit(b.x, b.y);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Vector2d p(testsupport::uniform(rng, -6, 6), testsupport::uniform(rng, -6, 6));
    // Oracle: largest Gaussian log posterior with the pooled covariance.
    const Eigen::Matrix2d inv = regions.pooled_covariance.inverse();
    int best = 0;
    double best_score = -1e300;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector2d d = p - regions.means.row(k).transpose();
      const double s = -0.5 * d.dot(inv * d) + std::log(regions.priors(k));
      if (s > best_score) {
        best_score = s;
        best = k;
      }
    }
    CHECK(regions.predict(p) == best);
  }
  const auto back = linear_regions_from_json(to_json(regions));
  CHECK(back.predict(Eigen::Vector2d(1.0, 2.0)) == regions.predict(Eigen::Vector2d(1.0, 2.0)));
}


TEST_CASE("balanced accuracy equals accuracy when classes are balanced") {
  std::mt19937_64 rng(40);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 4);
    const int per = 5 + static_cast<int>(rng() % 20);
    ConfusionMatrix c = ConfusionMatrix::Zero(k, k);
    for (int r = 0; r < k; ++r) {
      for (int i = 0; i < per; ++i) ++c(r, static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(k)));
    }
    const double accuracy = static_cast<double>(c.trace()) / static_cast<double>(c.sum());
    CHECK(std::abs(balanced_accuracy(c) - accuracy) < 1e-12);
  }
}

TEST_CASE("refitting with identical data gives identical predictions") {
  const Blobs b = blobs(20, 3, 1.2, 41);
  const auto first = svm_fit(b.x, b.y, KernelSpec::rbf(0.7), 3.0);
  const auto second = svm_fit(b.x, b.y, KernelSpec::rbf(0.7), 3.0);
  const Blobs probe = blobs(10, 3, 2.0, 42);
  CHECK(first.predict(probe.x) == second.predict(probe.x));
  CHECK(first.decision_values(probe.x) == second.decision_values(probe.x));
}

}
