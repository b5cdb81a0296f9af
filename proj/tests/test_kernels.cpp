#include <random>

#include <doctest.h>

#include "mindtrace/kernels.hpp"
#include "support.hpp"

using namespace mindtrace;

TEST_SUITE("kernels") {

TEST_CASE("parallel kernels agree with the serial reference") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng() % 60);
    const auto m = static_cast<Eigen::Index>(1 + rng() % 40);
    const auto d = static_cast<Eigen::Index>(1 + rng() % 12);
    const Eigen::MatrixXd a = testsupport::normal_matrix(n, d, rng);
    const Eigen::MatrixXd b = testsupport::normal_matrix(m, d, rng);
    const Eigen::VectorXd center = testsupport::normal_matrix(d, 1, rng);
    const double gamma = testsupport::uniform(rng, 0.01, 2.0);

    CHECK((kernels::rbf_gram(a, b, gamma) - kernels::serial::rbf_gram(a, b, gamma)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((kernels::linear_gram(a, b) - kernels::serial::linear_gram(a, b)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((kernels::scatter(a, center) - kernels::serial::scatter(a, center)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((kernels::column_mean(a) - kernels::serial::column_mean(a)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("rbf gram matches the closed form on a hand example") {
  Eigen::MatrixXd a(2, 2);
  a << 0, 0,
       1, 2;
  Eigen::MatrixXd b(1, 2);
  b << 1, 0;
  const Eigen::MatrixXd k = kernels::rbf_gram(a, b, 0.5);
  CHECK(k(0, 0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK(k(1, 0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
}

TEST_CASE("scatter of two points about their mean") {
  Eigen::MatrixXd rows(2, 2);
  rows << 1, 3,
          3, 7;
  const Eigen::MatrixXd s = kernels::scatter(rows, kernels::column_mean(rows));
  CHECK(s(0, 0) == doctest::Approx(2.0));
  CHECK(s(0, 1) == doctest::Approx(4.0));
  CHECK(s(1, 1) == doctest::Approx(8.0));
}

}
