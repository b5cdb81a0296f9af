#include <algorithm>
#include <fstream>
#include <functional>
#include <map>

#include "mindtrace/behave.hpp"
#include "mindtrace/error.hpp"

namespace mindtrace {

Dag::Dag(std::vector<std::string> nodes) : nodes_(std::move(nodes)) {
  std::vector<std::string> sorted = nodes_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("duplicate node name in DAG");
  }
  adj_.assign(nodes_.size(), std::vector<bool>(nodes_.size(), false));
  node_scores.assign(nodes_.size(), 0.0);
}

std::optional<std::size_t> Dag::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i] == name) return i;
  }
  return std::nullopt;
}

bool Dag::has_edge(std::size_t from, std::size_t to) const { return adj_[from][to]; }

bool Dag::reachable(std::size_t from, std::size_t to) const {
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<std::size_t> stack{from};
  seen[from] = true;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (v == to) return true;
    for (std::size_t w = 0; w < nodes_.size(); ++w) {
      if (adj_[v][w] && !seen[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
    }
  }
  return false;
}

bool Dag::creates_cycle(std::size_t from, std::size_t to) const {
  return from == to || reachable(to, from);
}

void Dag::add_edge(std::size_t from, std::size_t to) {
  if (from >= size() || to >= size()) throw ValidationError("edge endpoint out of range");
  if (from == to) throw ValidationError("self loop on '" + nodes_[from] + "'");
  if (adj_[from][to]) {
    throw ValidationError("duplicate edge " + nodes_[from] + " -> " + nodes_[to]);
  }
  if (creates_cycle(from, to)) {
    throw ValidationError("edge " + nodes_[from] + " -> " + nodes_[to] + " creates a cycle");
  }
  adj_[from][to] = true;
}

void Dag::remove_edge(std::size_t from, std::size_t to) { adj_[from][to] = false; }

std::vector<std::size_t> Dag::parents(std::size_t node) const {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < nodes_.size(); ++p) {
    if (adj_[p][node]) out.push_back(p);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> Dag::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < nodes_.size(); ++a) {
    for (std::size_t b = 0; b < nodes_.size(); ++b) {
      if (adj_[a][b]) out.emplace_back(a, b);
    }
  }
  return out;
}

std::size_t Dag::edge_count() const { return edges().size(); }

std::vector<std::size_t> Dag::topological_order() const {
  std::vector<int> indegree(nodes_.size(), 0);
  for (const auto& [a, b] : edges()) ++indegree[b];
  std::vector<std::size_t> order;
  std::vector<bool> done(nodes_.size(), false);
  // Smallest ready index first so the order is deterministic.
  while (order.size() < nodes_.size()) {
    std::size_t next = nodes_.size();
    for (std::size_t v = 0; v < nodes_.size(); ++v) {
      if (!done[v] && indegree[v] == 0) {
        next = v;
        break;
      }
    }
    if (next == nodes_.size()) throw ValidationError("graph has a cycle");
    done[next] = true;
    order.push_back(next);
    for (std::size_t w = 0; w < nodes_.size(); ++w) {
      if (adj_[next][w]) --indegree[w];
    }
  }
  return order;
}

std::optional<std::size_t> DataTable::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Import / export

namespace {

// Directed cycle through the edge list, as node names; empty if acyclic.
std::vector<std::string> find_cycle(const std::vector<std::string>& nodes,
                                    const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  const std::size_t n = nodes.size();
  std::vector<std::vector<std::size_t>> out(n);
  for (const auto& [a, b] : edges) out[a].push_back(b);
  std::vector<int> colour(n, 0);
  std::vector<std::size_t> stack;
  std::vector<std::string> cycle;

  std::function<bool(std::size_t)> visit = [&](std::size_t v) {
    colour[v] = 1;
    stack.push_back(v);
    for (const std::size_t w : out[v]) {
      if (colour[w] == 1) {
        const auto it = std::find(stack.begin(), stack.end(), w);
        for (auto p = it; p != stack.end(); ++p) cycle.push_back(nodes[*p]);
        cycle.push_back(nodes[w]);
        return true;
      }
      if (colour[w] == 0 && visit(w)) return true;
    }
    stack.pop_back();
    colour[v] = 2;
    return false;
  };
  for (std::size_t v = 0; v < n; ++v) {
    if (colour[v] == 0 && visit(v)) break;
  }
  return cycle;
}

}  // namespace

Dag dag_from_json(const nlohmann::json& j) {
  std::vector<std::string> nodes;
  std::vector<std::pair<std::string, std::string>> named;
  try {
    nodes = j.at("nodes").get<std::vector<std::string>>();
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw ValidationError("edge must be [from, to]");
      named.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed DAG JSON: ") + e.what());
  }

  Dag dag(nodes);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& [a, b] : named) {
    const auto ia = dag.index_of(a);
    const auto ib = dag.index_of(b);
    if (!ia || !ib) {
      throw ValidationError("edge " + a + " -> " + b + " references an unknown node");
    }
    edges.emplace_back(*ia, *ib);
  }
  const auto cycle = find_cycle(nodes, edges);
  if (!cycle.empty()) {
    std::string text;
    for (std::size_t i = 0; i < cycle.size(); ++i) text += (i ? " -> " : "") + cycle[i];
    throw ValidationError("DAG contains a cycle: " + text);
  }
  for (const auto& [a, b] : edges) dag.add_edge(a, b);
  return dag;
}

Dag import_dag(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return dag_from_json(j);
}

nlohmann::json to_json(const Dag& dag) {
  nlohmann::json j;
  j["nodes"] = dag.nodes();
  j["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : dag.edges()) j["edges"].push_back({dag.nodes()[a], dag.nodes()[b]});
  if (!dag.node_scores.empty()) j["node_scores"] = dag.node_scores;
  return j;
}

// ---------------------------------------------------------------------------
// Linear-Gaussian parameters

LinearGaussianBn fit_linear_gaussian(const Dag& dag, const DataTable& data) {
  if (data.names.size() != dag.size()) {
    throw ValidationError("data columns do not match the DAG nodes");
  }
  std::vector<std::size_t> column(dag.size());
  for (std::size_t v = 0; v < dag.size(); ++v) {
    const auto c = data.index_of(dag.nodes()[v]);
    if (!c) throw ValidationError("no data column for node '" + dag.nodes()[v] + "'");
    column[v] = *c;
  }
  const Eigen::Index n = data.values.rows();
  LinearGaussianBn bn;
  bn.dag = dag;
  bn.intercepts.resize(dag.size());
  bn.coefficients.resize(dag.size());
  bn.residual_variances.resize(dag.size());
  for (std::size_t v = 0; v < dag.size(); ++v) {
    const auto pa = dag.parents(v);
    const auto p = static_cast<Eigen::Index>(pa.size());
    if (n < p + 2) throw ValidationError("too few rows to fit node '" + dag.nodes()[v] + "'");
    Eigen::MatrixXd design(n, p + 1);
    design.col(0).setOnes();
    for (Eigen::Index k = 0; k < p; ++k) {
      design.col(k + 1) = data.values.col(static_cast<Eigen::Index>(column[pa[static_cast<std::size_t>(k)]]));
    }
    const Eigen::VectorXd y = data.values.col(static_cast<Eigen::Index>(column[v]));
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += 1e-8;
    const Eigen::VectorXd beta = gram.ldlt().solve(design.transpose() * y);
    bn.intercepts[v] = beta(0);
    bn.coefficients[v] = beta.tail(p);
    bn.residual_variances[v] = (y - design * beta).squaredNorm() / static_cast<double>(n);
  }
  return bn;
}

void LinearGaussianBn::joint(Eigen::VectorXd& mean, Eigen::MatrixXd& covariance) const {
  const auto d = static_cast<Eigen::Index>(dag.size());
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd c(d);
  for (std::size_t v = 0; v < dag.size(); ++v) {
    const auto pa = dag.parents(v);
    c(static_cast<Eigen::Index>(v)) = intercepts[v];
    for (std::size_t k = 0; k < pa.size(); ++k) {
      b(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(pa[k])) =
          coefficients[v](static_cast<Eigen::Index>(k));
    }
  }
  // x = c + B x + e  =>  x = (I - B)^{-1} (c + e)
  const Eigen::MatrixXd a = (Eigen::MatrixXd::Identity(d, d) - b).inverse();
  Eigen::VectorXd noise(d);
  for (Eigen::Index v = 0; v < d; ++v) noise(v) = residual_variances[static_cast<std::size_t>(v)];
  mean = a * c;
  covariance = a * noise.asDiagonal() * a.transpose();
}

double LinearGaussianBn::predict(std::size_t target, const Eigen::VectorXd& observed) const {
  const auto d = static_cast<Eigen::Index>(dag.size());
  if (observed.size() != d) throw ValidationError("observation vector has the wrong length");
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  joint(mu, sigma);
  const auto t = static_cast<Eigen::Index>(target);
  std::vector<Eigen::Index> rest;
  for (Eigen::Index v = 0; v < d; ++v) {
    if (v != t) rest.push_back(v);
  }
  const auto r = static_cast<Eigen::Index>(rest.size());
  if (r == 0) return mu(t);
  Eigen::MatrixXd s_oo(r, r);
  Eigen::VectorXd s_to(r);
  Eigen::VectorXd dev(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto oi = rest[static_cast<std::size_t>(i)];
    s_to(i) = sigma(t, oi);
    dev(i) = observed(oi) - mu(oi);
    for (Eigen::Index j = 0; j < r; ++j) s_oo(i, j) = sigma(oi, rest[static_cast<std::size_t>(j)]);
  }
  return mu(t) + s_to.dot(s_oo.ldlt().solve(dev));
}

}  // namespace mindtrace
