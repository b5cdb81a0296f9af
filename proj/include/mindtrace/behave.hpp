#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace mindtrace {

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// Feature counts of the motivation, opportunity and capability branches.
struct FeatureLayout {
  std::size_t motivation = 13;
  std::size_t opportunity = 27;  // 26 peers + party leader
  std::size_t capability = 3;

  std::size_t parameter_count() const { return motivation + opportunity + capability + 3 + 2; }
  bool operator==(const FeatureLayout&) const = default;
};

struct BehaveRecord {
  std::string person_id;
  Eigen::VectorXd motivation;   // emotions, attitude, subjective norm, personality
  Eigen::VectorXd opportunity;  // binary trust indicators
  Eigen::VectorXd capability;   // topic rates
  double words = 0.0;           // n_w
  int votes = 0;                // n_v
  int votes_for = 0;            // n_b

  FeatureLayout layout() const;
  /// Throws ValidationError on violated record invariants.
  void validate() const;
};

/// Reads behave.csv. Columns prefixed `m_`, `o_` and `c_` are motivation,
/// opportunity and capability features (in column order); `person_id`,
/// `n_w`, `n_v`, `n_b` are required.
std::vector<BehaveRecord> load_behave_csv(const std::filesystem::path& path);
std::vector<BehaveRecord> load_behave_csv(std::istream& in);
void write_behave_csv(std::ostream& out, std::span<const BehaveRecord> records);

// ---------------------------------------------------------------------------
// Expert-specified network
// ---------------------------------------------------------------------------

enum Branch { kMotivation = 0, kOpportunity = 1, kCapability = 2 };

struct BnParams {
  Eigen::VectorXd w_motivation;   // features + bias (last)
  Eigen::VectorXd w_opportunity;
  Eigen::VectorXd w_capability;
  Eigen::Vector3d branch_weights = Eigen::Vector3d::Constant(1.0 / 3.0);  // simplex

  static BnParams zeros(const FeatureLayout& layout);
  FeatureLayout layout() const;

  /// Flat vector: weight vectors of M, O, C then two additive log-ratio
  /// coordinates log(w_M / w_C), log(w_O / w_C) of the mixing simplex.
  Eigen::VectorXd pack() const;
  static BnParams unpack(const Eigen::VectorXd& flat, const FeatureLayout& layout);
  static std::vector<std::string> names(const FeatureLayout& layout);
};

struct BranchOutputs {
  std::array<double, 3> logits{};  // l_i
  std::array<double, 3> hidden{};  // h_i = logistic(l_i)
  double p_vote = 0.0;             // P_b
};

BranchOutputs bn_branches(const BnParams& params, const BehaveRecord& record);

/// P_b = sum_B w^b_B * logistic(w_B . [x_B, 1]).
double bn_forward(const BnParams& params, const BehaveRecord& record);

struct BnPrior {
  std::array<double, 3> alpha_prime = {0.787, 0.039, 0.012};
  double concentration = 10.0;  // kappa
  double weight_sd = 1.0;
  /// Multiplies the log-likelihood; 0 samples the prior.
  double likelihood_weight = 1.0;

  /// Dirichlet parameters kappa * alpha' / sum(alpha').
  Eigen::Vector3d dirichlet() const;
};

struct McmcOptions {
  std::size_t chains = 4;
  std::size_t warmup = 1500;
  std::size_t draws = 1500;
  std::size_t thin = 1;
  std::uint64_t seed = 0;
  double target_acceptance = 0.23;
  double rhat_threshold = 1.1;
  /// Adds one covariance-shaped joint proposal per sweep (shape learnt
  /// during warm-up) to the component-wise updates.
  bool block_updates = true;
};

struct PosteriorSamples {
  FeatureLayout layout;
  std::vector<std::string> names;
  Eigen::MatrixXd draws;       // rows: draws (chains concatenated), cols: packed parameters
  std::vector<int> chain;      // chain id of every draw row
  std::vector<double> acceptance;  // mean acceptance per chain after warm-up
  Eigen::VectorXd rhat;        // split-R-hat per packed parameter
  bool converged = false;
  std::uint64_t seed = 0;

  BnParams draw(Eigen::Index row) const { return BnParams::unpack(draws.row(row).transpose(), layout); }
  /// Posterior draws of the mixing weights (rows: draws).
  Eigen::MatrixXd branch_weight_draws() const;
};

/// Log posterior density of packed parameters (up to a constant).
double bn_log_posterior(const Eigen::VectorXd& packed, std::span<const BehaveRecord> records,
                        const FeatureLayout& layout, const BnPrior& prior);

/// Vectorised equivalent of bn_log_posterior over a fixed record set. Also
/// an incremental sampler target: single-weight changes update one branch's
/// logits in O(records).
class BnPosterior {
 public:
  BnPosterior(std::span<const BehaveRecord> records, const BnPrior& prior);
  const FeatureLayout& layout() const { return layout_; }
  double operator()(const Eigen::VectorXd& packed) const;

  double reset(const Eigen::VectorXd& packed);
  double try_coordinate(Eigen::Index j, double value);
  double try_point(const Eigen::VectorXd& packed);
  void accept();

 private:
  struct State {
    Eigen::VectorXd x;
    std::array<Eigen::ArrayXd, 3> logit;
    std::array<Eigen::ArrayXd, 3> hidden;
    Eigen::ArrayXd p_vote;
    Eigen::Vector3d branch_weights;
    double log_prior = 0.0;
  };
  enum class Pending { None, Weight, Mixing, Full };

  void evaluate_full(const Eigen::VectorXd& packed, State& s) const;
  double log_prior(const Eigen::VectorXd& packed, const Eigen::Vector3d& branch_weights) const;
  double total(const State& s) const;

  FeatureLayout layout_;
  BnPrior prior_;
  std::array<Eigen::MatrixXd, 3> design_;  // features with a trailing column of ones
  Eigen::ArrayXd votes_for_;
  Eigen::ArrayXd votes_against_;
  State current_;
  State pending_;
  Pending pending_kind_ = Pending::None;
  std::size_t pending_branch_ = 0;
};

/// Component-wise random-walk Metropolis-Hastings with per-parameter step
/// sizes adapted during warm-up, plus optional joint block proposals; chains
/// run in parallel.
PosteriorSamples bn_fit(std::span<const BehaveRecord> records, const BnPrior& prior,
                        const McmcOptions& options);

struct Prediction {
  double mean = 0.0;
  double lower = 0.0;  // 5% quantile
  double upper = 0.0;  // 95% quantile
};

Prediction bn_predict(const PosteriorSamples& samples, const BehaveRecord& record);

/// sqrt(mean((p - t)^2)); throws ValidationError on empty or mismatched input.
double rmse(std::span<const double> predictions, std::span<const double> truths);

/// Split-R-hat of `chains` equally long chains stored as columns.
double split_rhat(const Eigen::MatrixXd& chains);

nlohmann::json to_json(const PosteriorSamples& s);
PosteriorSamples posterior_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Generic Metropolis sampler (used by bn_fit; exposed for testing)
// ---------------------------------------------------------------------------

struct ChainResult {
  Eigen::MatrixXd draws;  // rows: kept draws
  double acceptance = 0.0;  // component-wise updates after warm-up
  double block_acceptance = 0.0;
  Eigen::VectorXd step_sizes;
};

/// One chain of component-wise random-walk updates. `target` is either a
/// callable returning the log density of a full parameter vector or an
/// incremental target (see detail::IncrementalTarget).
template <typename Target>
ChainResult run_metropolis_chain(Target target, Eigen::VectorXd start, const McmcOptions& options,
                                 std::uint64_t chain_seed);

// ---------------------------------------------------------------------------
// DAGs and structure learning
// ---------------------------------------------------------------------------

class Dag {
 public:
  Dag() = default;
  explicit Dag(std::vector<std::string> nodes);

  const std::vector<std::string>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;

  bool has_edge(std::size_t from, std::size_t to) const;
  /// Adds from -> to. Throws ValidationError on duplicates, self loops or cycles.
  void add_edge(std::size_t from, std::size_t to);
  void remove_edge(std::size_t from, std::size_t to);
  /// True if adding from -> to would close a directed cycle.
  bool creates_cycle(std::size_t from, std::size_t to) const;

  std::vector<std::size_t> parents(std::size_t node) const;
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
  std::size_t edge_count() const;
  std::vector<std::size_t> topological_order() const;

  /// Per-node BIC contributions, filled by structure learning or scoring.
  std::vector<double> node_scores;

 private:
  bool reachable(std::size_t from, std::size_t to) const;

  std::vector<std::string> nodes_;
  std::vector<std::vector<bool>> adj_;  // adj_[from][to]
};

/// Columns are variables; rows are persons.
struct DataTable {
  std::vector<std::string> names;
  Eigen::MatrixXd values;

  std::optional<std::size_t> index_of(std::string_view name) const;
};

/// Linear-Gaussian BIC contribution of one node given its parents.
double node_bic(const DataTable& data, std::size_t node, std::span<const std::size_t> parents);
double bic_score(const Dag& dag, const DataTable& data);

struct EdgeConstraints {
  std::vector<std::pair<std::string, std::string>> allow;  // must be present
  std::vector<std::pair<std::string, std::string>> deny;   // must be absent
};

struct HcOptions {
  std::size_t max_iterations = 10'000;
  std::size_t restarts = 0;
  std::size_t perturbation_edges = 3;
  std::uint64_t seed = 0;
  EdgeConstraints constraints;
  bool parallel = true;  // score candidate moves with OpenMP
};

struct HcResult {
  Dag dag;
  double score = 0.0;
  std::size_t iterations = 0;
};

/// Greedy add/delete/reverse ascent of the BIC. Converged climbs also try
/// every covered-edge reversal (score-neutral) followed by a further climb.
HcResult hc_search(const DataTable& data, const HcOptions& options = {});

/// Reads `{"nodes": [...], "edges": [[from, to], ...]}`; throws
/// ValidationError naming a cycle if the edges are not acyclic.
Dag import_dag(const std::filesystem::path& path);
Dag dag_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Dag& dag);

/// Linear-Gaussian network fitted by per-node least squares.
struct LinearGaussianBn {
  Dag dag;
  std::vector<double> intercepts;
  std::vector<Eigen::VectorXd> coefficients;  // aligned with dag.parents(node)
  std::vector<double> residual_variances;

  /// Joint Gaussian implied by the network.
  void joint(Eigen::VectorXd& mean, Eigen::MatrixXd& covariance) const;
  /// E[target | every other variable = observed(other)].
  double predict(std::size_t target, const Eigen::VectorXd& observed) const;
};

LinearGaussianBn fit_linear_gaussian(const Dag& dag, const DataTable& data);

// ---------------------------------------------------------------------------
// Exploratory factor analysis
// ---------------------------------------------------------------------------

struct FactorLoadings {
  Eigen::MatrixXd loadings;    // variables x factors
  Eigen::VectorXd eigenvalues;  // descending
  std::vector<int> assignment;  // factor per variable; -1 when no factor is retained
  std::vector<std::string> warnings;

  Eigen::Index factor_count() const { return loadings.cols(); }
};

/// Principal-component extraction of the correlation matrix with the Kaiser
/// criterion (eigenvalue > 1), no rotation.
FactorLoadings efa_fit(const Eigen::MatrixXd& data);

}  // namespace mindtrace

#include "mindtrace/detail/metropolis.hpp"
