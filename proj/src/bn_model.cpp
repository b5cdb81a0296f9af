#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mindtrace/behave.hpp"
#include "mindtrace/error.hpp"

namespace mindtrace {

namespace {

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double branch_logit(const Eigen::VectorXd& w, const Eigen::VectorXd& x) {
  return w.head(x.size()).dot(x) + w(x.size());
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s, std::size_t line, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("behave.csv line " + std::to_string(line) + ": column '" + column +
                          "' is not a number: '" + s + "'");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Records

FeatureLayout BehaveRecord::layout() const {
  return {static_cast<std::size_t>(motivation.size()), static_cast<std::size_t>(opportunity.size()),
          static_cast<std::size_t>(capability.size())};
}

void BehaveRecord::validate() const {
  if (votes < 0 || votes_for < 0 || votes_for > votes) {
    throw ValidationError("record '" + person_id + "': need 0 <= n_b <= n_v");
  }
  for (Eigen::Index i = 0; i < opportunity.size(); ++i) {
    if (opportunity(i) != 0.0 && opportunity(i) != 1.0) {
      throw ValidationError("record '" + person_id + "': trust indicators must be 0 or 1");
    }
  }
  if (!motivation.allFinite() || !capability.allFinite() || !std::isfinite(words)) {
    throw ValidationError("record '" + person_id + "': non-finite feature");
  }
}

std::vector<BehaveRecord> load_behave_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) header = split_csv(trim(line));
  }
  if (header.empty()) return {};

  std::optional<std::size_t> id_col, nw_col, nv_col, nb_col;
  std::vector<std::size_t> m_cols, o_cols, c_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h == "person_id") id_col = c;
    else if (h == "n_w") nw_col = c;
    else if (h == "n_v") nv_col = c;
    else if (h == "n_b") nb_col = c;
    else if (h.rfind("m_", 0) == 0) m_cols.push_back(c);
    else if (h.rfind("o_", 0) == 0) o_cols.push_back(c);
    else if (h.rfind("c_", 0) == 0) c_cols.push_back(c);
    else throw ValidationError("behave.csv: unknown column '" + h + "'");
  }
  if (!id_col || !nw_col || !nv_col || !nb_col) {
    throw ValidationError("behave.csv: person_id, n_w, n_v and n_b columns are required");
  }

  std::vector<BehaveRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(trim(line));
    if (cells.size() != header.size()) {
      throw ValidationError("behave.csv line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells");
    }
    BehaveRecord r;
    r.person_id = cells[*id_col];
    auto fill = [&](const std::vector<std::size_t>& cols) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(cols.size()));
      for (std::size_t i = 0; i < cols.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = parse_double(cells[cols[i]], line_no, header[cols[i]]);
      }
      return v;
    };
    r.motivation = fill(m_cols);
    r.opportunity = fill(o_cols);
    r.capability = fill(c_cols);
    r.words = parse_double(cells[*nw_col], line_no, "n_w");
    const double nv = parse_double(cells[*nv_col], line_no, "n_v");
    const double nb = parse_double(cells[*nb_col], line_no, "n_b");
    if (nv != std::floor(nv) || nb != std::floor(nb)) {
      throw ValidationError("behave.csv line " + std::to_string(line_no) + ": vote counts must be integers");
    }
    r.votes = static_cast<int>(nv);
    r.votes_for = static_cast<int>(nb);
    r.validate();
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<BehaveRecord> load_behave_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  return load_behave_csv(in);
}

void write_behave_csv(std::ostream& out, std::span<const BehaveRecord> records) {
  if (records.empty()) return;
  const auto layout = records.front().layout();
  out << "person_id";
  for (std::size_t i = 0; i < layout.motivation; ++i) out << ",m_" << i;
  for (std::size_t i = 0; i < layout.opportunity; ++i) out << ",o_" << i;
  for (std::size_t i = 0; i < layout.capability; ++i) out << ",c_" << i;
  out << ",n_w,n_v,n_b\n" << std::setprecision(17);
  for (const auto& r : records) {
    out << r.person_id;
    for (Eigen::Index i = 0; i < r.motivation.size(); ++i) out << ',' << r.motivation(i);
    for (Eigen::Index i = 0; i < r.opportunity.size(); ++i) out << ',' << r.opportunity(i);
    for (Eigen::Index i = 0; i < r.capability.size(); ++i) out << ',' << r.capability(i);
    out << ',' << r.words << ',' << r.votes << ',' << r.votes_for << '\n';
  }
}

// ---------------------------------------------------------------------------
// Parameters

BnParams BnParams::zeros(const FeatureLayout& layout) {
  BnParams p;
  p.w_motivation = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.motivation + 1));
  p.w_opportunity = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.opportunity + 1));
  p.w_capability = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.capability + 1));
  return p;
}

FeatureLayout BnParams::layout() const {
  return {static_cast<std::size_t>(w_motivation.size() - 1),
          static_cast<std::size_t>(w_opportunity.size() - 1),
          static_cast<std::size_t>(w_capability.size() - 1)};
}

Eigen::VectorXd BnParams::pack() const {
  const auto n = static_cast<Eigen::Index>(layout().parameter_count());
  Eigen::VectorXd flat(n);
  flat << w_motivation, w_opportunity, w_capability,
      std::log(branch_weights(0) / branch_weights(2)), std::log(branch_weights(1) / branch_weights(2));
  return flat;
}

BnParams BnParams::unpack(const Eigen::VectorXd& flat, const FeatureLayout& layout) {
  if (static_cast<std::size_t>(flat.size()) != layout.parameter_count()) {
    throw ValidationError("packed parameter vector has the wrong length");
  }
  BnParams p;
  Eigen::Index at = 0;
  auto take = [&](std::size_t n) {
    Eigen::VectorXd v = flat.segment(at, static_cast<Eigen::Index>(n));
    at += static_cast<Eigen::Index>(n);
    return v;
  };
  p.w_motivation = take(layout.motivation + 1);
  p.w_opportunity = take(layout.opportunity + 1);
  p.w_capability = take(layout.capability + 1);
  const double e0 = flat(at);
  const double e1 = flat(at + 1);
  const double m = std::max({e0, e1, 0.0});
  Eigen::Vector3d w(std::exp(e0 - m), std::exp(e1 - m), std::exp(-m));
  p.branch_weights = w / w.sum();
  return p;
}

std::vector<std::string> BnParams::names(const FeatureLayout& layout) {
  std::vector<std::string> out;
  auto add = [&](const char* prefix, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(prefix) + "[" + std::to_string(i) + "]");
    out.push_back(std::string(prefix) + "[bias]");
  };
  add("w_M", layout.motivation);
  add("w_O", layout.opportunity);
  add("w_C", layout.capability);
  out.emplace_back("log(wb_M/wb_C)");
  out.emplace_back("log(wb_O/wb_C)");
  return out;
}

Eigen::Vector3d BnPrior::dirichlet() const {
  Eigen::Vector3d a(alpha_prime[0], alpha_prime[1], alpha_prime[2]);
  return concentration * a / a.sum();
}

// ---------------------------------------------------------------------------
// Forward model

BranchOutputs bn_branches(const BnParams& params, const BehaveRecord& record) {
  if (params.layout() != record.layout()) {
    throw ValidationError("record '" + record.person_id + "' does not match the parameter layout");
  }
  BranchOutputs out;
  out.logits[kMotivation] = branch_logit(params.w_motivation, record.motivation);
  out.logits[kOpportunity] = branch_logit(params.w_opportunity, record.opportunity);
  out.logits[kCapability] = branch_logit(params.w_capability, record.capability);
  for (int b = 0; b < 3; ++b) {
    out.hidden[static_cast<std::size_t>(b)] = logistic(out.logits[static_cast<std::size_t>(b)]);
    out.p_vote += params.branch_weights(b) * out.hidden[static_cast<std::size_t>(b)];
  }
  return out;
}

double bn_forward(const BnParams& params, const BehaveRecord& record) {
  return bn_branches(params, record).p_vote;
}

double bn_log_posterior(const Eigen::VectorXd& packed, std::span<const BehaveRecord> records,
                        const FeatureLayout& layout, const BnPrior& prior) {
  const BnParams p = BnParams::unpack(packed, layout);
  const Eigen::Index n_weights = packed.size() - 2;
  const double sd2 = prior.weight_sd * prior.weight_sd;
  double lp = -0.5 * packed.head(n_weights).squaredNorm() / sd2;
  // Dirichlet density on the simplex times the Jacobian of the additive
  // log-ratio map, which is prod_k w_k.
  const Eigen::Vector3d alpha = prior.dirichlet();
  for (int k = 0; k < 3; ++k) lp += alpha(k) * std::log(p.branch_weights(k));

  if (prior.likelihood_weight != 0.0) {
    double ll = 0.0;
    for (const auto& r : records) {
      if (r.votes == 0) continue;
      const double pb = std::clamp(bn_forward(p, r), 1e-300, 1.0 - 1e-16);
      ll += r.votes_for * std::log(pb) + (r.votes - r.votes_for) * std::log1p(-pb);
    }
    lp += prior.likelihood_weight * ll;
  }
  return lp;
}

BnPosterior::BnPosterior(std::span<const BehaveRecord> records, const BnPrior& prior)
    : prior_(prior) {
  if (records.empty()) throw ValidationError("no behaviour records");
  layout_ = records.front().layout();
  const auto n = static_cast<Eigen::Index>(records.size());
  const std::array<std::size_t, 3> widths = {layout_.motivation, layout_.opportunity, layout_.capability};
  for (std::size_t b = 0; b < 3; ++b) {
    design_[b].resize(n, static_cast<Eigen::Index>(widths[b] + 1));
    design_[b].col(static_cast<Eigen::Index>(widths[b])).setOnes();
  }
  votes_for_.resize(n);
  votes_against_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    if (r.layout() != layout_) {
      throw ValidationError("record '" + r.person_id + "' has a different feature layout");
    }
    design_[0].row(i).head(r.motivation.size()) = r.motivation.transpose();
    design_[1].row(i).head(r.opportunity.size()) = r.opportunity.transpose();
    design_[2].row(i).head(r.capability.size()) = r.capability.transpose();
    votes_for_(i) = r.votes_for;
    votes_against_(i) = r.votes - r.votes_for;
  }
}

namespace {

Eigen::ArrayXd logistic(const Eigen::ArrayXd& logit) {
  const Eigen::ArrayXd e = (-logit.abs()).exp();
  return (logit >= 0.0).select(1.0 / (1.0 + e), e / (1.0 + e));
}

Eigen::Vector3d mixing_from(double eta_m, double eta_o) {
  const double m = std::max({eta_m, eta_o, 0.0});
  const Eigen::Vector3d w(std::exp(eta_m - m), std::exp(eta_o - m), std::exp(-m));
  return w / w.sum();
}

}  // namespace

double BnPosterior::log_prior(const Eigen::VectorXd& packed, const Eigen::Vector3d& branch_weights) const {
  const Eigen::Index n_weights = packed.size() - 2;
  const double sd2 = prior_.weight_sd * prior_.weight_sd;
  double lp = -0.5 * packed.head(n_weights).squaredNorm() / sd2;
  const Eigen::Vector3d alpha = prior_.dirichlet();
  for (int k = 0; k < 3; ++k) lp += alpha(k) * std::log(branch_weights(k));
  return lp;
}

void BnPosterior::evaluate_full(const Eigen::VectorXd& packed, State& s) const {
  if (static_cast<std::size_t>(packed.size()) != layout_.parameter_count()) {
    throw ValidationError("packed parameter vector has the wrong length");
  }
  s.x = packed;
  Eigen::Index at = 0;
  s.p_vote = Eigen::ArrayXd::Zero(votes_for_.size());
  s.branch_weights = mixing_from(packed(packed.size() - 2), packed(packed.size() - 1));
  for (std::size_t b = 0; b < 3; ++b) {
    const Eigen::Index w = design_[b].cols();
    s.logit[b] = (design_[b] * packed.segment(at, w)).array();
    s.hidden[b] = logistic(s.logit[b]);
    s.p_vote += s.branch_weights(static_cast<Eigen::Index>(b)) * s.hidden[b];
    at += w;
  }
  s.log_prior = log_prior(packed, s.branch_weights);
}

double BnPosterior::total(const State& s) const {
  if (prior_.likelihood_weight == 0.0) return s.log_prior;
  const Eigen::ArrayXd pb = s.p_vote.max(1e-300).min(1.0 - 1e-16);
  const double ll = (votes_for_ * pb.log() + votes_against_ * (-pb).log1p()).sum();
  return s.log_prior + prior_.likelihood_weight * ll;
}

double BnPosterior::operator()(const Eigen::VectorXd& packed) const {
  State s;
  evaluate_full(packed, s);
  return total(s);
}

double BnPosterior::reset(const Eigen::VectorXd& packed) {
  evaluate_full(packed, current_);
  pending_kind_ = Pending::None;
  return total(current_);
}

double BnPosterior::try_point(const Eigen::VectorXd& packed) {
  evaluate_full(packed, pending_);
  pending_kind_ = Pending::Full;
  return total(pending_);
}

double BnPosterior::try_coordinate(Eigen::Index j, double value) {
  const Eigen::Index n_weights = current_.x.size() - 2;
  pending_.x = current_.x;
  pending_.x(j) = value;
  if (j >= n_weights) {
    pending_kind_ = Pending::Mixing;
    pending_.branch_weights = mixing_from(pending_.x(n_weights), pending_.x(n_weights + 1));
    pending_.p_vote = pending_.branch_weights(0) * current_.hidden[0] +
                      pending_.branch_weights(1) * current_.hidden[1] +
                      pending_.branch_weights(2) * current_.hidden[2];
    pending_.log_prior = log_prior(pending_.x, pending_.branch_weights);
  } else {
    pending_kind_ = Pending::Weight;
    std::size_t b = 0;
    Eigen::Index col = j;
    while (col >= design_[b].cols()) col -= design_[b++].cols();
    pending_branch_ = b;
    const double delta = value - current_.x(j);
    pending_.logit[b] = current_.logit[b] + delta * design_[b].col(col).array();
    pending_.hidden[b] = logistic(pending_.logit[b]);
    pending_.p_vote = current_.p_vote + current_.branch_weights(static_cast<Eigen::Index>(b)) *
                                            (pending_.hidden[b] - current_.hidden[b]);
    const double sd2 = prior_.weight_sd * prior_.weight_sd;
    pending_.log_prior =
        current_.log_prior - 0.5 * (value * value - current_.x(j) * current_.x(j)) / sd2;
  }
  return total(pending_);
}

void BnPosterior::accept() {
  switch (pending_kind_) {
    case Pending::None:
      return;
    case Pending::Full:
      std::swap(current_, pending_);
      break;
    case Pending::Mixing:
      std::swap(current_.branch_weights, pending_.branch_weights);
      break;
    case Pending::Weight:
      std::swap(current_.logit[pending_branch_], pending_.logit[pending_branch_]);
      std::swap(current_.hidden[pending_branch_], pending_.hidden[pending_branch_]);
      break;
  }
  if (pending_kind_ != Pending::Full) {
    std::swap(current_.x, pending_.x);
    std::swap(current_.p_vote, pending_.p_vote);
    std::swap(current_.log_prior, pending_.log_prior);
  }
  pending_kind_ = Pending::None;
}

// ---------------------------------------------------------------------------
// Prediction and error

Prediction bn_predict(const PosteriorSamples& samples, const BehaveRecord& record) {
  if (samples.draws.rows() == 0) throw ValidationError("no posterior draws");
  std::vector<double> values(static_cast<std::size_t>(samples.draws.rows()));
  for (Eigen::Index r = 0; r < samples.draws.rows(); ++r) {
    values[static_cast<std::size_t>(r)] = bn_forward(samples.draw(r), record);
  }
  Prediction out;
  for (const double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  out.lower = quantile(0.05);
  out.upper = quantile(0.95);
  return out;
}

double rmse(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.empty()) throw ValidationError("rmse of empty input");
  if (predictions.size() != truths.size()) throw ValidationError("rmse: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - truths[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(predictions.size()));
}

}  // namespace mindtrace
