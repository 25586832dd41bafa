#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xalign/embed_io.hpp"
#include "xalign/linmap.hpp"
#include "xalign/metric.hpp"

namespace xalign {

using Tokens = std::vector<std::string>;

/// Precision at several cutoffs. `queries` is the denominator (unique source
/// words, plus OOV sources when those count as wrong).
struct PrecisionAtK {
  std::vector<Index> ks;
  std::vector<double> precision;
  std::size_t queries = 0;
  std::size_t oov_queries = 0;

  /// Throws UsageError if k was not evaluated.
  double at(Index k) const;
};

struct PrecisionOptions {
  std::vector<Index> ks{1, 5, 10};
  /// Source words of the test file missing from the vocabulary count as
  /// misses (true) or are dropped from the denominator (false).
  bool oov_counts_wrong = true;
};

/// A query is correct at k when any of its gold targets is in its top-k.
/// `oov_sources` is the number of test-file source words with no vector.
PrecisionAtK word_translation_precision(const Dictionary& dict, Translator& translator,
                                        RetrievalMethod method,
                                        const PrecisionOptions& options = {},
                                        std::size_t oov_sources = 0);

PrecisionAtK word_translation_precision(const Dictionary& dict, const MappingMatrix& w,
                                        const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                                        RetrievalMethod method,
                                        const PrecisionOptions& options = {},
                                        const RetrievalOptions& retrieval = {},
                                        std::size_t oov_sources = 0);

/// Two-pass Pearson correlation. Throws NumericalError on zero variance and
/// UsageError on length mismatch or fewer than 2 points.
double pearson(std::span<const double> a, std::span<const double> b);

struct WordSimPair {
  std::string src;
  std::string tgt;
  double score = 0.0;
};

struct WordSimDataset {
  std::string name;
  std::vector<WordSimPair> pairs;
};

/// "word1 word2 score" per line; '#' lines and blank lines are skipped.
WordSimDataset load_wordsim(const std::filesystem::path& path, bool lowercase = false);

struct WordSimResult {
  double pearson = 0.0;
  std::size_t used_pairs = 0;
  std::size_t oov_pairs = 0;
};

/// Correlation between cos(Wx, y) and the human scores over pairs whose two
/// words are both in vocabulary.
WordSimResult wordsim_pearson(const WordSimDataset& ds, const MappingMatrix& w,
                              const EmbeddingSpace& src, const EmbeddingSpace& tgt);

/// Inverse document frequency, log(N / df), from a sentence corpus.
class IdfTable {
 public:
  IdfTable() = default;
  static IdfTable from_corpus(std::span<const Tokens> sentences);
  /// Fixed weights; words absent from the table get `fallback`.
  static IdfTable from_weights(std::unordered_map<std::string, double> weights, double fallback);

  /// Weight of `word`. Words never seen get log(N) and set *unseen.
  double weight(std::string_view word, bool* unseen = nullptr) const;
  std::size_t documents() const { return documents_; }

 private:
  std::unordered_map<std::string, double> weights_;
  double fallback_ = 0.0;
  std::size_t documents_ = 0;
};

struct SentenceVector {
  Vector vector;
  Index used_tokens = 0;
  bool empty = true;  ///< no token had a vector and positive weight
};

/// idf-weighted mean of the in-vocabulary token vectors.
SentenceVector sentence_embedding(std::span<const std::string> tokens,
                                  const EmbeddingSpace& space, const IdfTable& idf);

struct SentenceRetrievalOptions {
  std::vector<Index> ks{1, 5, 10};
  RetrievalMethod method = RetrievalMethod::nn;  ///< nn or csls
  Index csls_k = 10;
};

struct SentenceRetrievalResult {
  PrecisionAtK precision;
  std::size_t empty_sources = 0;
  std::size_t empty_targets = 0;
};

/// Source sentence i is correct at k when target sentence i is in its top-k.
/// With `alignment`, source i's translation is target alignment[i] instead.
SentenceRetrievalResult sentence_retrieval_precision(
    std::span<const Tokens> src_sents, std::span<const Tokens> tgt_sents, const MappingMatrix& w,
    const EmbeddingSpace& src, const EmbeddingSpace& tgt, const IdfTable& src_idf,
    const IdfTable& tgt_idf, const SentenceRetrievalOptions& options = {},
    std::span<const Index> alignment = {});

using TranslationMap = std::unordered_map<std::string, std::string>;

/// Rank-1 translation of the first `limit` source words.
TranslationMap build_translation_map(Translator& translator, const EmbeddingSpace& src,
                                     const EmbeddingSpace& tgt, RetrievalMethod method,
                                     Index limit);

struct WordByWord {
  Tokens tokens;
  std::size_t passthrough = 0;  ///< tokens absent from the map
};

WordByWord word_by_word_translate(std::span<const std::string> sentence, const TranslationMap& map);

struct BleuStats {
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
};

BleuStats bleu_stats(std::span<const Tokens> hypotheses, std::span<const Tokens> references);
double bleu_from_stats(const BleuStats& stats);
/// Corpus BLEU-4 with one reference per hypothesis, no smoothing, in [0, 100].
double corpus_bleu(std::span<const Tokens> hypotheses, std::span<const Tokens> references);

Tokens tokenize(std::string_view line, bool lowercase = false);
/// One whitespace-tokenized sentence per line.
std::vector<Tokens> load_sentences(const std::filesystem::path& path, bool lowercase = false);

/// Drops index-aligned pairs where any source token lacks a vector in `space`.
std::pair<std::vector<Tokens>, std::vector<Tokens>> keep_known_sources(
    std::span<const Tokens> sources, std::span<const Tokens> references,
    const EmbeddingSpace& space);

struct WordTranslationRow {
  std::string direction;
  RetrievalMethod method = RetrievalMethod::nn;
  PrecisionAtK result;
};

struct WordSimRow {
  std::string dataset;
  WordSimResult result;
};

struct SentenceRetrievalRow {
  std::string direction;
  RetrievalMethod method = RetrievalMethod::nn;
  SentenceRetrievalResult result;
};

struct BleuRow {
  std::string direction;
  double score = 0.0;
  std::size_t sentences = 0;
  std::size_t passthrough_tokens = 0;
};

struct EvalReport {
  static constexpr int schema_version = 1;
  std::uint64_t w_fingerprint = 0;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<WordTranslationRow> word_translation;
  std::vector<WordSimRow> wordsim;
  std::vector<SentenceRetrievalRow> sentence_retrieval;
  std::vector<BleuRow> bleu;
};

/// Pretty-printed JSON, keys in a fixed order.
std::string report_json(const EvalReport& report);
/// One row per (method, k), one column per direction.
void write_precision_csv(const std::vector<WordTranslationRow>& rows, std::ostream& out);

}  // namespace xalign
