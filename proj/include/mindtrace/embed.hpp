#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mindtrace/corpus.hpp"

namespace mindtrace {

inline constexpr std::size_t kDefaultEmbeddingDim = 512;

enum class EmbeddingSource { External, Surrogate };

struct EmbeddingVector {
  Eigen::VectorXd values;
  EmbeddingSource source = EmbeddingSource::External;
};

/// Lowercased alphanumeric word tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Signed feature hashing of word unigrams and bigrams, L2-normalised.
/// Throws ValidationError if `d < 2` or the text has no tokens.
EmbeddingVector surrogate_embed(std::string_view text, std::size_t d, std::uint64_t seed);

struct AttachResult {
  Corpus corpus;
  std::vector<std::string> unembedded;  // quote ids without a vector
};

/// Returns a copy of `corpus` with the given vectors attached. Every vector
/// must have dimension `dim`; unknown quote ids are rejected.
AttachResult attach_external(const Corpus& corpus,
                             const std::map<std::string, Eigen::VectorXd>& vectors,
                             std::size_t dim = kDefaultEmbeddingDim);

/// Fills every quote lacking an embedding with `surrogate_embed`.
Corpus embed_missing(const Corpus& corpus, std::size_t d, std::uint64_t seed);

/// Reads `{"quote_id": ..., "vector": [...]}` lines.
std::map<std::string, Eigen::VectorXd> load_embeddings(const std::filesystem::path& path);
std::map<std::string, Eigen::VectorXd> load_embeddings(std::istream& in);
void write_embeddings(std::ostream& out, const Corpus& corpus);

}  // namespace mindtrace
