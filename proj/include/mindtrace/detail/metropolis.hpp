#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <random>
#include <utility>

namespace mindtrace {

namespace detail {

// A target that can evaluate single-coordinate changes of its current point
// cheaply. try_* evaluate a candidate; accept() makes the last candidate
// current.
template <typename T>
concept IncrementalTarget = requires(T t, const Eigen::VectorXd& x) {
  { t.reset(x) } -> std::convertible_to<double>;
  { t.try_coordinate(Eigen::Index{}, 0.0) } -> std::convertible_to<double>;
  { t.try_point(x) } -> std::convertible_to<double>;
  t.accept();
};

inline double unit_uniform(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Box-Muller on the explicit uniform above; independent of the standard
// library's normal_distribution implementation.
inline double standard_normal(std::mt19937_64& rng) {
  const double u1 = unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Adapts a plain log-density callable to the incremental target protocol.
template <typename F>
class FunctionTarget {
 public:
  explicit FunctionTarget(F f) : f_(std::move(f)) {}
  double reset(const Eigen::VectorXd& x) {
    x_ = x;
    return f_(x_);
  }
  double try_coordinate(Eigen::Index j, double value) {
    pending_ = x_;
    pending_(j) = value;
    return f_(pending_);
  }
  double try_point(const Eigen::VectorXd& x) {
    pending_ = x;
    return f_(pending_);
  }
  void accept() { std::swap(x_, pending_); }

 private:
  F f_;
  Eigen::VectorXd x_;
  Eigen::VectorXd pending_;
};

template <typename T>
auto as_target(T target) {
  if constexpr (IncrementalTarget<T>) {
    return target;
  } else {
    return FunctionTarget<T>(std::move(target));
  }
}

}  // namespace detail

template <typename Target>
ChainResult run_metropolis_chain(Target target_in, Eigen::VectorXd start,
                                 const McmcOptions& options, std::uint64_t chain_seed) {
  constexpr std::size_t kBatch = 50;
  const Eigen::Index dim = start.size();
  std::mt19937_64 rng(chain_seed);
  auto target = detail::as_target(std::move(target_in));

  Eigen::VectorXd x = std::move(start);
  double current = target.reset(x);

  // Joint proposals shaped by the chain covariance learnt in the second part
  // of warm-up (adaptive Metropolis); shape and scale freeze with the steps.
  const std::size_t learn_from = options.warmup / 3;
  Eigen::VectorXd run_mean = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd run_m2 = Eigen::MatrixXd::Zero(dim, dim);
  std::size_t learnt = 0;
  Eigen::MatrixXd block_chol;
  double log_block_scale = 0.0;
  double block_accepts = 0.0;
  double block_tries = 0.0;
  std::size_t block_accepted_after_warmup = 0;
  std::size_t block_proposals_after_warmup = 0;
  Eigen::VectorXd log_step = Eigen::VectorXd::Constant(dim, std::log(0.5));
  Eigen::VectorXd batch_accepts = Eigen::VectorXd::Zero(dim);
  std::size_t batch_count = 0;
  std::size_t accepted_after_warmup = 0;
  std::size_t proposals_after_warmup = 0;

  const std::size_t thin = std::max<std::size_t>(options.thin, 1);
  ChainResult result;
  result.draws.resize(static_cast<Eigen::Index>(options.draws), dim);
  std::size_t kept = 0;

  const std::size_t total = options.warmup + options.draws * thin;
  for (std::size_t sweep = 0; sweep < total; ++sweep) {
    const bool warming = sweep < options.warmup;
    // Full re-evaluation once per sweep bounds drift in incremental caches.
    current = target.reset(x);
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double value = x(j) + std::exp(log_step(j)) * detail::standard_normal(rng);
      const double proposed = target.try_coordinate(j, value);
      const bool accept =
          std::isfinite(proposed) && std::log(detail::unit_uniform(rng)) < proposed - current;
      if (accept) {
        target.accept();
        x(j) = value;
        current = proposed;
      }
      if (warming) {
        batch_accepts(j) += accept ? 1.0 : 0.0;
      } else {
        ++proposals_after_warmup;
        accepted_after_warmup += accept ? 1 : 0;
      }
    }
    if (options.block_updates && block_chol.size() > 0) {
      Eigen::VectorXd z(dim);
      for (Eigen::Index j = 0; j < dim; ++j) z(j) = detail::standard_normal(rng);
      const Eigen::VectorXd proposal =
          x + std::exp(log_block_scale) * 2.38 / std::sqrt(static_cast<double>(dim)) * (block_chol * z);
      const double proposed = target.try_point(proposal);
      const bool accept =
          std::isfinite(proposed) && std::log(detail::unit_uniform(rng)) < proposed - current;
      if (accept) {
        target.accept();
        x = proposal;
        current = proposed;
      }
      if (warming) {
        block_accepts += accept ? 1.0 : 0.0;
        block_tries += 1.0;
      } else {
        ++block_proposals_after_warmup;
        block_accepted_after_warmup += accept ? 1 : 0;
      }
    }
    if (warming && options.block_updates && sweep >= learn_from) {
      ++learnt;
      const Eigen::VectorXd delta = x - run_mean;
      run_mean += delta / static_cast<double>(learnt);
      run_m2 += delta * (x - run_mean).transpose();
    }
    if (warming && ++batch_count == kBatch) {
      // Batch adaptation: nudge each log step towards the target rate with a
      // shrinking increment; steps are frozen once warm-up ends.
      const double n_batches = static_cast<double>(sweep + 1) / kBatch;
      const double delta = std::min(0.25, 1.0 / std::sqrt(n_batches));
      for (Eigen::Index j = 0; j < dim; ++j) {
        const double rate = batch_accepts(j) / kBatch;
        log_step(j) += rate > options.target_acceptance ? delta : -delta;
      }
      batch_accepts.setZero();
      batch_count = 0;
      if (block_tries > 0.0) {
        log_block_scale += block_accepts / block_tries > options.target_acceptance ? delta : -delta;
        block_accepts = 0.0;
        block_tries = 0.0;
      }
      if (options.block_updates && learnt >= 2 * static_cast<std::size_t>(dim)) {
        Eigen::MatrixXd cov = run_m2 / static_cast<double>(learnt - 1);
        cov.diagonal().array() += 1e-10 + 1e-6 * cov.diagonal().mean();
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() == Eigen::Success) block_chol = llt.matrixL();
      }
    }
    if (!warming && (sweep - options.warmup) % thin == 0) {
      result.draws.row(static_cast<Eigen::Index>(kept++)) = x.transpose();
    }
  }
  result.acceptance = proposals_after_warmup == 0
                          ? 0.0
                          : static_cast<double>(accepted_after_warmup) /
                                static_cast<double>(proposals_after_warmup);
  result.step_sizes = log_step.array().exp();
  result.block_acceptance = block_proposals_after_warmup == 0
                                ? 0.0
                                : static_cast<double>(block_accepted_after_warmup) /
                                      static_cast<double>(block_proposals_after_warmup);
  return result;
}

}  // namespace mindtrace
