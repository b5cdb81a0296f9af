#include <cmath>
#include <exception>
#include <limits>

#include <omp.h>

#include "mindtrace/behave.hpp"
#include "mindtrace/error.hpp"

namespace mindtrace {

namespace {

std::uint64_t chain_seed(std::uint64_t seed, std::size_t chain) {
  // splitmix64 of (seed, chain)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (chain + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

double split_rhat(const Eigen::MatrixXd& chains) {
  const Eigen::Index n_total = chains.rows();
  const Eigen::Index m = chains.cols();
  if (m < 1 || n_total < 4) throw ValidationError("split-R-hat needs at least 4 draws per chain");
  const Eigen::Index n = n_total / 2;
  Eigen::MatrixXd halves(n, 2 * m);
  for (Eigen::Index c = 0; c < m; ++c) {
    halves.col(2 * c) = chains.col(c).head(n);
    halves.col(2 * c + 1) = chains.col(c).segment(n_total - n, n);
  }
  const Eigen::RowVectorXd means = halves.colwise().mean();
  double w = 0.0;
  for (Eigen::Index c = 0; c < halves.cols(); ++c) {
    w += (halves.col(c).array() - means(c)).square().sum() / static_cast<double>(n - 1);
  }
  w /= static_cast<double>(halves.cols());
  const double grand = means.mean();
  const double b_over_n =
      (means.array() - grand).square().sum() / static_cast<double>(halves.cols() - 1);
  if (w <= 0.0) return b_over_n <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = static_cast<double>(n - 1) / static_cast<double>(n) * w + b_over_n;
  return std::sqrt(var_plus / w);
}

Eigen::MatrixXd PosteriorSamples::branch_weight_draws() const {
  Eigen::MatrixXd out(draws.rows(), 3);
  for (Eigen::Index r = 0; r < draws.rows(); ++r) out.row(r) = draw(r).branch_weights.transpose();
  return out;
}

PosteriorSamples bn_fit(std::span<const BehaveRecord> records, const BnPrior& prior,
                        const McmcOptions& options) {
  if (records.empty()) throw ValidationError("no behaviour records");
  if (options.chains < 1 || options.draws < 2) {
    throw ValidationError("MCMC needs at least one chain and two draws");
  }
  const FeatureLayout layout = records.front().layout();
  for (const auto& r : records) {
    r.validate();
    if (r.layout() != layout) {
      throw ValidationError("record '" + r.person_id + "' has a different feature layout");
    }
  }

  const BnPosterior log_density(records, prior);

  // Chains start from jittered zero weights and uniform mixing. Starting at
  // the prior mean of the mixing weights puts them where the capability
  // weight is near zero, a region random-walk chains leave slowly.
  const Eigen::VectorXd centre_packed = BnParams::zeros(layout).pack();
  if (!std::isfinite(log_density(centre_packed))) {
    throw NumericalError("log posterior is not finite at the initial point");
  }

  const auto n_chains = options.chains;
  std::vector<ChainResult> results(n_chains);
  std::vector<std::exception_ptr> errors(n_chains);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t c = 0; c < n_chains; ++c) {
    try {
      const std::uint64_t s = chain_seed(options.seed, c);
      std::mt19937_64 init_rng(s ^ 0xA5A5A5A5A5A5A5A5ULL);
      Eigen::VectorXd start = centre_packed;
      for (Eigen::Index j = 0; j < start.size(); ++j) {
        start(j) += 0.3 * detail::standard_normal(init_rng);
      }
      results[c] = run_metropolis_chain(log_density, start, options, s);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  PosteriorSamples out;
  out.layout = layout;
  out.names = BnParams::names(layout);
  out.seed = options.seed;
  const auto per_chain = static_cast<Eigen::Index>(options.draws);
  const auto dim = static_cast<Eigen::Index>(layout.parameter_count());
  out.draws.resize(per_chain * static_cast<Eigen::Index>(n_chains), dim);
  for (std::size_t c = 0; c < n_chains; ++c) {
    out.draws.middleRows(static_cast<Eigen::Index>(c) * per_chain, per_chain) = results[c].draws;
    out.chain.insert(out.chain.end(), static_cast<std::size_t>(per_chain), static_cast<int>(c));
    out.acceptance.push_back(results[c].acceptance);
  }

  out.rhat.resize(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    Eigen::MatrixXd cols(per_chain, static_cast<Eigen::Index>(n_chains));
    for (std::size_t c = 0; c < n_chains; ++c) {
      cols.col(static_cast<Eigen::Index>(c)) = results[c].draws.col(j);
    }
    out.rhat(j) = split_rhat(cols);
  }
  out.converged = (out.rhat.array() < options.rhat_threshold).all();
  return out;
}

nlohmann::json to_json(const PosteriorSamples& s) {
  nlohmann::json j;
  j["type"] = "bn_posterior";
  j["layout"] = {{"motivation", s.layout.motivation},
                 {"opportunity", s.layout.opportunity},
                 {"capability", s.layout.capability}};
  j["names"] = s.names;
  j["seed"] = s.seed;
  j["converged"] = s.converged;
  j["acceptance"] = s.acceptance;
  j["rhat"] = std::vector<double>(s.rhat.data(), s.rhat.data() + s.rhat.size());
  j["chain"] = s.chain;
  auto& rows = j["draws"] = nlohmann::json::array();
  for (Eigen::Index r = 0; r < s.draws.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(s.draws.cols()));
    for (Eigen::Index c = 0; c < s.draws.cols(); ++c) row[static_cast<std::size_t>(c)] = s.draws(r, c);
    rows.push_back(std::move(row));
  }
  return j;
}

PosteriorSamples posterior_from_json(const nlohmann::json& j) {
  try {
    if (j.at("type").get<std::string>() != "bn_posterior") {
      throw ValidationError("not a BN posterior file");
    }
    PosteriorSamples s;
    const auto& l = j.at("layout");
    s.layout = {l.at("motivation").get<std::size_t>(), l.at("opportunity").get<std::size_t>(),
                l.at("capability").get<std::size_t>()};
    s.names = j.at("names").get<std::vector<std::string>>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.converged = j.at("converged").get<bool>();
    s.acceptance = j.at("acceptance").get<std::vector<double>>();
    const auto rhat = j.at("rhat").get<std::vector<double>>();
    s.rhat = Eigen::Map<const Eigen::VectorXd>(rhat.data(), static_cast<Eigen::Index>(rhat.size()));
    s.chain = j.at("chain").get<std::vector<int>>();
    const auto& rows = j.at("draws");
    const auto dim = static_cast<Eigen::Index>(s.layout.parameter_count());
    s.draws.resize(static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto row = rows[r].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != dim) {
        throw ValidationError("posterior draw " + std::to_string(r) + " has the wrong length");
      }
      for (Eigen::Index c = 0; c < dim; ++c) {
        s.draws(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)];
      }
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed posterior JSON: ") + e.what());
  }
}

}  // namespace mindtrace
