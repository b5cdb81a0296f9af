// Writes the bundled synthetic fixtures into a directory:
//   make_fixtures <dir> [seed]

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include "mindtrace/synthetic.hpp"

namespace fs = std::filesystem;
using namespace mindtrace;

namespace {

void write_table(const fs::path& path, const std::vector<std::string>& names, const Eigen::MatrixXd& values) {
  std::ofstream f(path);
  for (std::size_t i = 0; i < names.size(); ++i) f << (i ? "," : "") << names[i];
  f << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) f << (c ? "," : "") << values(r, c);
    f << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_fixtures <dir> [seed]\n";
    return 3;
  }
  const fs::path dir = argv[1];
  const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 7;
  fs::create_directories(dir);

  synthetic::CorpusOptions opts;
  opts.seed = seed;
  const auto corpus = synthetic::demo_corpus(opts);
  {
    std::ofstream f(dir / "quotes.jsonl");
    synthetic::write_quotes_jsonl(f, corpus.quotes);
  }
  {
    std::ofstream f(dir / "persons.jsonl");
    synthetic::write_persons_jsonl(f, corpus.persons);
  }
  {
    std::ofstream f(dir / "votes.csv");
    synthetic::write_votes_csv(f, corpus.votes);
  }

  // Behaviour records from a network whose mixing favours opportunity.
  const FeatureLayout layout;
  auto records = synthetic::behave_features(200, layout, 24, seed + 1);
  BnParams truth = BnParams::zeros(layout);
  std::mt19937_64 rng(seed + 2);
  for (auto* w : {&truth.w_motivation, &truth.w_opportunity, &truth.w_capability}) {
    for (Eigen::Index i = 0; i < w->size(); ++i) w->coeffRef(i) = 0.5 * detail::standard_normal(rng);
  }
  truth.branch_weights = Eigen::Vector3d(0.3, 0.6, 0.1);
  synthetic::simulate_votes(records, truth, seed + 3);
  {
    std::ofstream f(dir / "behave.csv");
    write_behave_csv(f, records);
  }

  // Five-node linear-Gaussian network for structure learning.
  Dag dag({"A", "B", "C", "D", "E"});
  dag.add_edge(0, 1);
  dag.add_edge(1, 2);
  dag.add_edge(0, 3);
  dag.add_edge(3, 4);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(5, 5);
  w(1, 0) = 1.5;
  w(2, 1) = -1.2;
  w(3, 0) = 1.0;
  w(4, 3) = 2.0;
  write_table(dir / "hc_table.csv", dag.nodes(), synthetic::linear_gaussian_sample(dag, w, 2000, seed + 4));

  // Two blocks of three correlated variables for factor analysis.
  Eigen::MatrixXd efa(500, 6);
  for (Eigen::Index r = 0; r < efa.rows(); ++r) {
    const double f1 = detail::standard_normal(rng);
    const double f2 = detail::standard_normal(rng);
    for (Eigen::Index c = 0; c < 3; ++c) efa(r, c) = f1 + 0.3 * detail::standard_normal(rng);
    for (Eigen::Index c = 3; c < 6; ++c) efa(r, c) = f2 + 0.3 * detail::standard_normal(rng);
  }
  write_table(dir / "efa_table.csv", {"happiness", "sadness", "anger", "openness", "extraversion", "agreeableness"},
              efa);
  std::cout << "fixtures written to " << dir << '\n';
  return 0;
}
