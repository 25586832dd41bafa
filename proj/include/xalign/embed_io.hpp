#pragma once

#include <compare>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xalign/types.hpp"

namespace xalign {

/// Frequency-ordered vocabulary with one 32-bit vector per word.
///
/// Row i holds the vector of words()[i]; row 0 is the most frequent word.
/// Instances are immutable once built, so a loaded space can be shared
/// read-only between threads.
class EmbeddingSpace {
 public:
  EmbeddingSpace() = default;
  /// Validates uniqueness of words, row count, and finiteness.
  EmbeddingSpace(std::vector<std::string> words, MatrixF vectors, std::string lang = {});

  Index size() const { return static_cast<Index>(words_.size()); }
  Index dim() const { return vectors_.cols(); }
  const std::string& lang() const { return lang_; }
  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(Index i) const { return words_[static_cast<std::size_t>(i)]; }
  const MatrixF& vectors() const { return vectors_; }

  std::optional<Index> find(std::string_view word) const;

  /// Rows [0, n) in double precision; n is clamped to size().
  Matrix head(Index n) const;
  /// Selected rows in double precision, in the given order.
  Matrix rows(std::span<const Index> indices) const;

  bool operator==(const EmbeddingSpace& other) const;

 private:
  std::string lang_;
  std::vector<std::string> words_;
  MatrixF vectors_;
  std::unordered_map<std::string, Index> index_;
};

struct LoadOptions {
  Index max_vocab = 200000;
  bool lowercase = false;
  std::string lang;
};

/// Reads the fastText text layout: a "count dim" header, then one
/// "token v1 ... vdim" line per word. Keeps the first `max_vocab` distinct
/// tokens; later duplicates (after lowercasing, if enabled) are skipped.
EmbeddingSpace load_embeddings(const std::filesystem::path& path, const LoadOptions& options = {});

/// Writes the text layout with shortest round-trip float formatting.
void save_embeddings(const EmbeddingSpace& space, const std::filesystem::path& path);

/// Binary cache: "XEMB", version byte, u32 dim, u64 count, count*dim
/// little-endian float32, then each token as u32 length + bytes.
void save_embeddings_binary(const EmbeddingSpace& space, const std::filesystem::path& path);
EmbeddingSpace load_embeddings_binary(const std::filesystem::path& path, std::string lang = {});

enum class Normalization { none, unit, center_then_unit };

Normalization parse_normalization(std::string_view name);
std::string_view to_string(Normalization mode);

/// Throws NumericalError naming the word if a row has zero norm.
EmbeddingSpace normalize(const EmbeddingSpace& space, Normalization mode);

struct WordPair {
  Index src = 0;
  Index tgt = 0;
  auto operator<=>(const WordPair&) const = default;
};

/// Ordered (source, target) index pairs. A source may map to several targets;
/// exact duplicate pairs never appear.
struct Dictionary {
  std::vector<WordPair> pairs;
  std::string src_lang;
  std::string tgt_lang;

  /// Builds a dictionary from pairs, dropping exact duplicates (first kept).
  static Dictionary from_pairs(std::vector<WordPair> pairs, std::string src_lang = {},
                               std::string tgt_lang = {});
  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  /// Distinct source indices in first-appearance order.
  std::vector<Index> unique_sources() const;
};

struct DictionaryLoad {
  Dictionary dictionary;
  std::size_t dropped_pairs = 0;     // pairs with an out-of-vocabulary side
  std::size_t duplicate_pairs = 0;   // exact repeats removed
  /// Source words that appear in the file but have no retained pair.
  std::vector<std::string> oov_sources;
};

/// One whitespace-separated "source target" pair per line; lines starting
/// with '#' and blank lines are skipped.
DictionaryLoad load_dictionary(const std::filesystem::path& path, const EmbeddingSpace& src,
                               const EmbeddingSpace& tgt);

void save_dictionary(const Dictionary& dict, const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                     const std::filesystem::path& path,
                     const std::vector<std::string>& header_comments = {});

}  // namespace xalign
