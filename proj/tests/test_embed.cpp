#include <sstream>

#include <doctest.h>

#include "mindtrace/embed.hpp"
#include "mindtrace/error.hpp"

using namespace mindtrace;

TEST_SUITE("embed") {

TEST_CASE("tokenizer lowercases and splits on non-alphanumerics") {
  CHECK(tokenize("Hello, World! 2nd-try") ==
        std::vector<std::string>{"hello", "world", "2nd", "try"});
  CHECK(tokenize("  ...  ").empty());
}

TEST_CASE("surrogate embedding is unit length, seeded and case-insensitive") {
  const auto a = surrogate_embed("The quick brown fox", 64, 5);
  const auto b = surrogate_embed("the QUICK brown fox!", 64, 5);
  const auto c = surrogate_embed("the quick brown fox", 64, 6);
  CHECK(a.values.size() == 64);
  CHECK(a.values.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  CHECK(a.source == EmbeddingSource::Surrogate);
  CHECK_THROWS_AS(surrogate_embed("!!!", 64, 0), ValidationError);
  CHECK_THROWS_AS(surrogate_embed("text", 1, 0), ValidationError);
}

TEST_CASE("similar texts are closer than unrelated ones") {
  const auto a = surrogate_embed("violent attack on the government buildings", 256, 1).values;
  const auto b = surrogate_embed("violent attack on the city buildings", 256, 1).values;
  const auto c = surrogate_embed("gardening tips for tomatoes in spring", 256, 1).values;
  CHECK(a.dot(b) > a.dot(c) + 0.3);
}

TEST_CASE("attach_external checks dimensions and ids; embed_missing fills gaps") {
  std::vector<Quote> quotes(2);
  quotes[0] = {"q1", "p", {2019, 1, 1}, "first text", "", {}, {}, {}};
  quotes[1] = {"q2", "p", {2019, 1, 2}, "second text", "", {}, {}, {}};
  const Corpus corpus({{"p", "P", "", {}}}, quotes);

  std::map<std::string, Eigen::VectorXd> vectors{{"q1", Eigen::VectorXd::Ones(4)}};
  const auto attached = attach_external(corpus, vectors, 4);
  CHECK(attached.unembedded == std::vector<std::string>{"q2"});
  CHECK(attached.corpus.find_quote("q1")->embedding.has_value());

  CHECK_THROWS_AS(attach_external(corpus, vectors, 5), ValidationError);
  std::map<std::string, Eigen::VectorXd> stray{{"zz", Eigen::VectorXd::Ones(4)}};
  CHECK_THROWS_AS(attach_external(corpus, stray, 4), ValidationError);

  const Corpus filled = embed_missing(attached.corpus, 4, 0);
  CHECK(*filled.find_quote("q1")->embedding == Eigen::VectorXd::Ones(4));
  REQUIRE(filled.find_quote("q2")->embedding.has_value());
  CHECK(filled.find_quote("q2")->embedding->norm() == doctest::Approx(1.0));
}

TEST_CASE("embeddings round-trip through JSON lines") {
  std::vector<Quote> quotes(1);
  quotes[0] = {"q1", "p", {2019, 1, 1}, "text", "", {}, {}, Eigen::Vector3d(0.25, -1.5, 3.0)};
  const Corpus corpus({{"p", "P", "", {}}}, quotes);
  std::stringstream ss;
  write_embeddings(ss, corpus);
  const auto loaded = load_embeddings(ss);
  REQUIRE(loaded.contains("q1"));
  CHECK(loaded.at("q1") == Eigen::Vector3d(0.25, -1.5, 3.0));
}

}
