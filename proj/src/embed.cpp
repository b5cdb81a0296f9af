#include "mindtrace/embed.hpp"

#include <cctype>
#include <fstream>
#include <iomanip>

#include <json.hpp>

#include "mindtrace/error.hpp"

namespace mindtrace {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a over the token bytes, seeded and finalised with splitmix64 so that
// low bits (used for the bucket) are well mixed.
std::uint64_t seeded_hash(std::string_view token, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
  for (const unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

EmbeddingVector surrogate_embed(std::string_view text, std::size_t d, std::uint64_t seed) {
  if (d < 2) throw ValidationError("embedding dimension must be at least 2");
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw ValidationError("text has no tokens after normalisation");

  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  auto add = [&](std::string_view feature) {
    const std::uint64_t h = seeded_hash(feature, seed);
    const auto index = static_cast<Eigen::Index>(h % d);
    v(index) += (h >> 63) ? -1.0 : 1.0;
  };
  for (const auto& t : tokens) add(t);
  // Bigrams are joined with a byte that cannot occur inside a token.
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) add(tokens[i] + '\x1f' + tokens[i + 1]);

  double norm = v.norm();
  if (norm == 0.0) {
    // Every feature cancelled out; fall back to the unsigned unigram counts.
    for (const auto& t : tokens) v(static_cast<Eigen::Index>(seeded_hash(t, seed) % d)) += 1.0;
    norm = v.norm();
  }
  return {v / norm, EmbeddingSource::Surrogate};
}

AttachResult attach_external(const Corpus& corpus,
                             const std::map<std::string, Eigen::VectorXd>& vectors,
                             std::size_t dim) {
  for (const auto& [id, v] : vectors) {
    if (corpus.find_quote(id) == nullptr) throw ValidationError("unknown quote id: " + id);
    if (static_cast<std::size_t>(v.size()) != dim) {
      throw ValidationError("embedding for quote '" + id + "' has dimension " +
                            std::to_string(v.size()) + ", expected " + std::to_string(dim));
    }
  }
  AttachResult out;
  std::vector<Quote> quotes = corpus.quotes();
  for (auto& q : quotes) {
    const auto it = vectors.find(q.id);
    if (it != vectors.end()) {
      q.embedding = it->second;
    } else if (!q.embedding) {
      out.unembedded.push_back(q.id);
    }
  }
  out.corpus = Corpus(corpus.persons(), std::move(quotes));
  return out;
}

Corpus embed_missing(const Corpus& corpus, std::size_t d, std::uint64_t seed) {
  std::vector<Quote> quotes = corpus.quotes();
  for (auto& q : quotes) {
    if (!q.embedding) q.embedding = surrogate_embed(q.text, d, seed).values;
  }
  return Corpus(corpus.persons(), std::move(quotes));
}

std::map<std::string, Eigen::VectorXd> load_embeddings(std::istream& in) {
  std::map<std::string, Eigen::VectorXd> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw ValidationError("embeddings: malformed JSON at line " + std::to_string(line_no));
    }
    if (!j.contains("quote_id") || !j.contains("vector") || !j["vector"].is_array()) {
      throw ValidationError("embeddings: missing quote_id/vector at line " +
                            std::to_string(line_no));
    }
    const auto& arr = j["vector"];
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t k = 0; k < arr.size(); ++k) v(static_cast<Eigen::Index>(k)) = arr[k].get<double>();
    const auto id = j["quote_id"].get<std::string>();
    if (!out.emplace(id, std::move(v)).second) {
      throw ValidationError("embeddings: duplicate quote id " + id);
    }
  }
  return out;
}

std::map<std::string, Eigen::VectorXd> load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  return load_embeddings(in);
}

void write_embeddings(std::ostream& out, const Corpus& corpus) {
  for (const auto& q : corpus.quotes()) {
    if (!q.embedding) continue;
    nlohmann::json j;
    j["quote_id"] = q.id;
    j["vector"] = std::vector<double>(q.embedding->data(), q.embedding->data() + q.embedding->size());
    out << j.dump() << '\n';
  }
}

}  // namespace mindtrace
