#pragma once

// Seeded generators for demo fixtures and tests.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "mindtrace/behave.hpp"
#include "mindtrace/corpus.hpp"

namespace mindtrace::synthetic {

struct CorpusOptions {
  std::size_t centrists = 12;
  std::size_t extremists = 8;
  std::size_t terrorists = 10;
  std::size_t mps = 40;
  std::size_t quotes_per_person = 20;
  std::size_t votes_per_mp = 40;
  double vote_noise = 0.1;
  Date start{2015, 1, 1};
  std::uint64_t seed = 0;
};

struct CorpusFixture {
  std::vector<Person> persons;
  std::vector<Quote> quotes;
  std::vector<VoteRecord> votes;
};

/// Persons of the three categories speak from category-specific vocabularies
/// with statement types drawn from the corrected reference p(s|k). MPs carry
/// Brexit labels and votes with score = -attitude + noise.
CorpusFixture demo_corpus(const CorpusOptions& options);

void write_quotes_jsonl(std::ostream& out, const std::vector<Quote>& quotes);
void write_persons_jsonl(std::ostream& out, const std::vector<Person>& persons);
void write_votes_csv(std::ostream& out, const std::vector<VoteRecord>& votes);

/// Random features of the given layout: standardised motivation and
/// capability scores N(0, 1), trust indicators Bernoulli(0.5).
std::vector<BehaveRecord> behave_features(std::size_t persons, const FeatureLayout& layout,
                                          int votes_per_person, std::uint64_t seed);

/// Draws n_b ~ Binomial(n_v, P_b) for every record under `truth`.
void simulate_votes(std::vector<BehaveRecord>& records, const BnParams& truth, std::uint64_t seed);

/// Rows of a linear-Gaussian DAG sampled in topological order; coefficient
/// (from, to) is `weights(to, from)`, noise standard deviation 1.
Eigen::MatrixXd linear_gaussian_sample(const Dag& dag, const Eigen::MatrixXd& weights,
                                       std::size_t rows, std::uint64_t seed);

}  // namespace mindtrace::synthetic
