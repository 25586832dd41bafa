#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "xalign/embed_io.hpp"
#include "xalign/linmap.hpp"
#include "xalign/types.hpp"

namespace xalign {

/// Row-major top-k lists: entry (q, r) is the r-th best key for query q.
struct TopK {
  Index queries = 0;
  Index k = 0;
  std::vector<Index> indices;
  std::vector<double> scores;

  std::span<const Index> indices_of(Index q) const {
    return {indices.data() + q * k, static_cast<std::size_t>(k)};
  }
  std::span<const double> scores_of(Index q) const {
    return {scores.data() + q * k, static_cast<std::size_t>(k)};
  }
};

/// Exact top-k of score(i, j) = scale * <q_i, key_j> - row_bias[i] - col_bias[j]
/// by blocked brute force. Ties go to the lower key index. Both bias vectors
/// are optional (nullptr = zero). Rows are used as given (no normalization).
TopK scored_top_k(const Matrix& queries, const Matrix& keys, Index k, double scale = 1.0,
                  const Vector* row_bias = nullptr, const Vector* col_bias = nullptr);

/// Exact top-k by cosine similarity; ties broken by ascending key index.
TopK knn(const Matrix& queries, const Matrix& keys, Index k);

/// Mean-neighborhood similarities for CSLS.
///
/// r_tgt[i]: mean cosine of mapped source i to its k nearest targets.
/// r_src[j]: mean cosine of target j to its k nearest mapped sources.
struct NeighborhoodStats {
  Vector r_src;
  Vector r_tgt;
  Index k = 10;
  std::uint64_t fingerprint = 0;  ///< of the (mapped source, target) pair it was computed on
};

std::uint64_t pair_fingerprint(const Matrix& mapped_src, const Matrix& tgt);

NeighborhoodStats neighborhood_stats(const Matrix& mapped_src, const Matrix& tgt, Index k = 10);

/// CSLS(s, t) = 2 cos(Wx_s, y_t) - r_T(Wx_s) - r_S(y_t) for every query row
/// of `mapped_src` listed in `query_rows` against every target. Throws
/// UsageError if `stats` was computed on different matrices.
Matrix csls_scores(const Matrix& mapped_src, std::span<const Index> query_rows, const Matrix& tgt,
                   const NeighborhoodStats& stats);

/// Inverted softmax: exp(beta cos(s, t)) normalized over a sample of mapped
/// sources for each target. The sample is rows [0, pool) of `mapped_src`
/// plus any query rows outside that range.
Matrix isf_scores(const Matrix& mapped_src, std::span<const Index> query_rows, const Matrix& tgt,
                  double beta, Index pool);

enum class RetrievalMethod { nn, isf, csls };

RetrievalMethod parse_method(std::string_view name);
std::string_view to_string(RetrievalMethod method);

struct RetrievalOptions {
  Index csls_k = 10;
  double isf_beta = 30.0;
  Index isf_pool = 10000;
  /// Mapped source words considered when computing r_S (most frequent first).
  Index source_rank_cap = 200000;
};

struct RetrievalResult {
  RetrievalMethod method = RetrievalMethod::nn;
  std::vector<Index> queries;
  TopK hits;
  Index source_rank_cap = 0;  ///< metadata: sources used for r_S (csls)
  Index csls_k = 0;

  std::span<const Index> targets_of(std::size_t q) const { return hits.indices_of(static_cast<Index>(q)); }
  std::span<const double> scores_of(std::size_t q) const { return hits.scores_of(static_cast<Index>(q)); }
};

/// Retrieval of target words for mapped source words under NN, ISF, or CSLS.
///
/// Maps and normalizes both spaces once; the CSLS target-side statistics are
/// computed on first use and reused while the (W, spaces) fingerprint holds.
class Translator {
 public:
  Translator(const MappingMatrix& w, const EmbeddingSpace& src, const EmbeddingSpace& tgt,
             RetrievalOptions options = {});

  RetrievalResult translate(std::span<const Index> queries, RetrievalMethod method, Index k_out);

  /// r_S over capped mapped sources (computed lazily, cached).
  const Vector& target_side_stats();
  /// r_T for the given source rows.
  Vector source_side_stats(std::span<const Index> rows) const;

  const Matrix& mapped_source() const { return mapped_; }
  const Matrix& target() const { return target_; }
  const RetrievalOptions& options() const { return options_; }
  std::uint64_t fingerprint() const { return fingerprint_; }

 private:
  RetrievalOptions options_;
  Matrix mapped_;
  Matrix target_;
  std::uint64_t fingerprint_ = 0;
  std::optional<Vector> r_src_;
};

RetrievalResult translate(std::span<const Index> queries, const MappingMatrix& w,
                          const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                          RetrievalMethod method, Index k_out, const RetrievalOptions& options = {});

/// TSV lines "query_word rank target_word score method", rank starting at 1.
void write_retrieval_tsv(const RetrievalResult& result, const EmbeddingSpace& src,
                         const EmbeddingSpace& tgt, std::ostream& out);

/// Number of queries whose rank-1 hit is each key.
std::vector<Index> rank1_in_degree(const TopK& hits, Index n_keys);

}  // namespace xalign
