#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mindtrace/behave.hpp"
#include "mindtrace/error.hpp"

namespace mindtrace {

double node_bic(const DataTable& data, std::size_t node, std::span<const std::size_t> parents) {
  const Eigen::Index n = data.values.rows();
  const auto p = static_cast<Eigen::Index>(parents.size());
  if (n < 2) throw ValidationError("BIC needs at least two rows");
  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  for (Eigen::Index k = 0; k < p; ++k) {
    design.col(k + 1) = data.values.col(static_cast<Eigen::Index>(parents[static_cast<std::size_t>(k)]));
  }
  const Eigen::VectorXd y = data.values.col(static_cast<Eigen::Index>(node));
  Eigen::MatrixXd gram = design.transpose() * design;
  gram.diagonal().array() += 1e-8;
  const Eigen::VectorXd beta = gram.ldlt().solve(design.transpose() * y);
  const double nd = static_cast<double>(n);
  const double variance = std::max((y - design * beta).squaredNorm() / nd, 1e-300);
  const double log_likelihood = -0.5 * nd * (std::log(2.0 * std::numbers::pi * variance) + 1.0);
  const double params = static_cast<double>(p + 2);  // coefficients, intercept, variance
  return log_likelihood - 0.5 * params * std::log(nd);
}

double bic_score(const Dag& dag, const DataTable& data) {
  double total = 0.0;
  for (std::size_t v = 0; v < dag.size(); ++v) {
    const auto pa = dag.parents(v);
    total += node_bic(data, v, pa);
  }
  return total;
}

namespace {

enum class MoveKind { Add, Delete, Reverse };

struct Move {
  MoveKind kind;
  std::size_t from;
  std::size_t to;
};

struct Search {
  const DataTable& data;
  std::vector<std::vector<bool>> denied;
  std::vector<std::vector<bool>> required;
  bool parallel;

  std::vector<std::size_t> parents_with(const Dag& dag, std::size_t node, std::size_t extra) const {
    auto pa = dag.parents(node);
    pa.insert(std::upper_bound(pa.begin(), pa.end(), extra), extra);
    return pa;
  }
  std::vector<std::size_t> parents_without(const Dag& dag, std::size_t node, std::size_t gone) const {
    auto pa = dag.parents(node);
    pa.erase(std::remove(pa.begin(), pa.end(), gone), pa.end());
    return pa;
  }

  bool legal(const Dag& dag, const Move& m) const {
    switch (m.kind) {
      case MoveKind::Add:
        return !dag.has_edge(m.from, m.to) && !dag.has_edge(m.to, m.from) && !denied[m.from][m.to] &&
               !dag.creates_cycle(m.from, m.to);
      case MoveKind::Delete:
        return dag.has_edge(m.from, m.to) && !required[m.from][m.to];
      case MoveKind::Reverse: {
        if (!dag.has_edge(m.from, m.to) || required[m.from][m.to] || denied[m.to][m.from]) return false;
        Dag trial = dag;
        trial.remove_edge(m.from, m.to);
        return !trial.creates_cycle(m.to, m.from);
      }
    }
    return false;
  }

  std::vector<Move> candidates(const Dag& dag) const {
    std::vector<Move> out;
    for (std::size_t a = 0; a < dag.size(); ++a) {
      for (std::size_t b = 0; b < dag.size(); ++b) {
        if (a == b) continue;
        for (const auto kind : {MoveKind::Add, MoveKind::Delete, MoveKind::Reverse}) {
          const Move m{kind, a, b};
          if (legal(dag, m)) out.push_back(m);
        }
      }
    }
    return out;
  }

  double delta(const Dag& dag, const Move& m) const {
    const auto& s = dag.node_scores;
    switch (m.kind) {
      case MoveKind::Add:
        return node_bic(data, m.to, parents_with(dag, m.to, m.from)) - s[m.to];
      case MoveKind::Delete:
        return node_bic(data, m.to, parents_without(dag, m.to, m.from)) - s[m.to];
      case MoveKind::Reverse:
        return node_bic(data, m.to, parents_without(dag, m.to, m.from)) - s[m.to] +
               node_bic(data, m.from, parents_with(dag, m.from, m.to)) - s[m.from];
    }
    return 0.0;
  }

  void apply(Dag& dag, const Move& m) const {
    switch (m.kind) {
      case MoveKind::Add:
        dag.add_edge(m.from, m.to);
        break;
      case MoveKind::Delete:
        dag.remove_edge(m.from, m.to);
        break;
      case MoveKind::Reverse:
        dag.remove_edge(m.from, m.to);
        dag.add_edge(m.to, m.from);
        break;
    }
    for (const std::size_t v : {m.from, m.to}) {
      const auto pa = dag.parents(v);
      dag.node_scores[v] = node_bic(data, v, pa);
    }
  }

  void rescore(Dag& dag) const {
    dag.node_scores.resize(dag.size());
    for (std::size_t v = 0; v < dag.size(); ++v) {
      const auto pa = dag.parents(v);
      dag.node_scores[v] = node_bic(data, v, pa);
    }
  }

  // Greedy ascent; returns the number of moves applied.
  std::size_t climb(Dag& dag, std::size_t budget) const {
    std::size_t steps = 0;
    while (steps < budget) {
      const auto moves = candidates(dag);
      std::vector<double> gains(moves.size());
      const auto count = static_cast<std::ptrdiff_t>(moves.size());
      if (parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < count; ++i) {
          gains[static_cast<std::size_t>(i)] = delta(dag, moves[static_cast<std::size_t>(i)]);
        }
      } else {
        for (std::ptrdiff_t i = 0; i < count; ++i) {
          gains[static_cast<std::size_t>(i)] = delta(dag, moves[static_cast<std::size_t>(i)]);
        }
      }
      // The first best move in enumeration order wins ties.
      std::size_t best = moves.size();
      double best_gain = 1e-9;
      for (std::size_t i = 0; i < moves.size(); ++i) {
        if (gains[i] > best_gain) {
          best_gain = gains[i];
          best = i;
        }
      }
      if (best == moves.size()) break;
      apply(dag, moves[best]);
      ++steps;
    }
    return steps;
  }

  // Reversing a covered edge (pa(b) = pa(a) + {a}) leaves the BIC unchanged,
  // so greedy ascent cannot cross such plateaus. Try each reversal followed
  // by a climb and keep the first that strictly improves.
  std::size_t climb_and_escape(Dag& dag, std::size_t budget) const {
    std::size_t steps = climb(dag, budget);
    bool improved = true;
    while (improved && steps < budget) {
      improved = false;
      for (const auto& [a, b] : dag.edges()) {
        auto pa = dag.parents(a);
        pa.insert(std::upper_bound(pa.begin(), pa.end(), a), a);
        const Move reverse{MoveKind::Reverse, a, b};
        if (pa != dag.parents(b) || !legal(dag, reverse)) continue;
        Dag trial = dag;
        apply(trial, reverse);
        const std::size_t used = 1 + climb(trial, budget - steps - 1);
        if (total(trial) > total(dag) + 1e-9) {
          dag = std::move(trial);
          steps += used;
          improved = true;
          break;
        }
      }
    }
    return steps;
  }

  static double total(const Dag& dag) {
    double s = 0.0;
    for (const double v : dag.node_scores) s += v;
    return s;
  }
};

std::size_t require_node(const DataTable& data, const std::string& name) {
  const auto i = data.index_of(name);
  if (!i) throw ValidationError("constraint references unknown variable '" + name + "'");
  return *i;
}

}  // namespace

HcResult hc_search(const DataTable& data, const HcOptions& options) {
  const std::size_t d = data.names.size();
  if (static_cast<std::size_t>(data.values.cols()) != d) {
    throw ValidationError("data table has " + std::to_string(data.values.cols()) + " columns but " +
                          std::to_string(d) + " names");
  }
  if (!data.values.allFinite()) throw ValidationError("data table contains non-finite values");

  Search search{data,
                std::vector<std::vector<bool>>(d, std::vector<bool>(d, false)),
                std::vector<std::vector<bool>>(d, std::vector<bool>(d, false)),
                options.parallel};
  for (const auto& [a, b] : options.constraints.deny) {
    search.denied[require_node(data, a)][require_node(data, b)] = true;
  }
  Dag start(data.names);
  for (const auto& [a, b] : options.constraints.allow) {
    const auto ia = require_node(data, a);
    const auto ib = require_node(data, b);
    if (search.denied[ia][ib]) {
      throw ValidationError("edge " + a + " -> " + b + " is both required and forbidden");
    }
    search.required[ia][ib] = true;
    if (!start.has_edge(ia, ib)) start.add_edge(ia, ib);
  }
  search.rescore(start);

  HcResult result;
  result.dag = start;
  result.iterations = search.climb_and_escape(result.dag, options.max_iterations);
  result.score = Search::total(result.dag);

  std::mt19937_64 rng(options.seed);
  for (std::size_t r = 0; r < options.restarts; ++r) {
    Dag trial = result.dag;
    for (std::size_t k = 0; k < options.perturbation_edges; ++k) {
      const auto moves = search.candidates(trial);
      if (moves.empty()) break;
      search.apply(trial, moves[static_cast<std::size_t>(rng() % moves.size())]);
    }
    result.iterations += search.climb_and_escape(trial, options.max_iterations);
    const double s = Search::total(trial);
    if (s > result.score + 1e-9) {
      result.dag = std::move(trial);
      result.score = s;
    }
  }
  return result;
}

}  // namespace mindtrace
