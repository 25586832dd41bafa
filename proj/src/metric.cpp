#include "xalign/metric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "xalign/error.hpp"

namespace xalign {
namespace {

constexpr Index kBlockRows = 256;

void check_dims(const Matrix& a, const Matrix& b, const char* what) {
  if (a.cols() != b.cols())
    throw UsageError(std::string(what) + ": dimension mismatch (" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.cols()) + ")");
}

// Writes the top-k of one score row into out_idx/out_score.
void select_row(const double* row, Index n, Index k, std::vector<Index>& scratch, Index* out_idx,
                double* out_score) {
  if (k == 1) {
    Index best = 0;
    for (Index j = 1; j < n; ++j)
      if (row[j] > row[best]) best = j;
    out_idx[0] = best;
    out_score[0] = row[best];
    return;
  }
  scratch.resize(static_cast<std::size_t>(n));
  std::iota(scratch.begin(), scratch.end(), Index{0});
  auto better = [row](Index a, Index b) { return row[a] > row[b] || (row[a] == row[b] && a < b); };
  std::partial_sort(scratch.begin(), scratch.begin() + k, scratch.end(), better);
  for (Index r = 0; r < k; ++r) {
    out_idx[r] = scratch[static_cast<std::size_t>(r)];
    out_score[r] = row[scratch[static_cast<std::size_t>(r)]];
  }
}

Vector row_means(const TopK& t) {
  Vector out(t.queries);
  for (Index q = 0; q < t.queries; ++q) {
    double s = 0.0;
    for (double v : t.scores_of(q)) s += v;
    out(q) = s / static_cast<double>(t.k);
  }
  return out;
}

Matrix select_rows(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= m.rows())
      throw UsageError("query row " + std::to_string(rows[i]) + " out of range");
    out.row(static_cast<Index>(i)) = m.row(rows[i]);
  }
  return out;
}

// log sum_{s in sample} exp(beta * <s, t>) for every target row t.
Vector isf_log_normalizers(const Matrix& sample, const Matrix& tgt, double beta) {
  Vector out(tgt.rows());
  for (Index start = 0; start < tgt.rows(); start += kBlockRows) {
    const Index len = std::min(kBlockRows, tgt.rows() - start);
    const Matrix s = beta * (sample * tgt.middleRows(start, len).transpose());  // |S| x len
    for (Index j = 0; j < len; ++j) {
      const double mx = s.col(j).maxCoeff();
      out(start + j) = mx + std::log((s.col(j).array() - mx).exp().sum());
    }
  }
  return out;
}

std::vector<Index> isf_sample_rows(Index n_mapped, std::span<const Index> queries, Index pool) {
  const Index p = std::clamp<Index>(pool, 0, n_mapped);
  std::vector<Index> rows(static_cast<std::size_t>(p));
  std::iota(rows.begin(), rows.end(), Index{0});
  std::vector<Index> extra;
  for (Index q : queries)
    if (q >= p) extra.push_back(q);
  std::sort(extra.begin(), extra.end());
  extra.erase(std::unique(extra.begin(), extra.end()), extra.end());
  rows.insert(rows.end(), extra.begin(), extra.end());
  return rows;
}

}  // namespace

TopK scored_top_k(const Matrix& queries, const Matrix& keys, Index k, double scale,
                  const Vector* row_bias, const Vector* col_bias) {
  check_dims(queries, keys, "scored_top_k");
  if (k < 1 || k > keys.rows())
    throw UsageError("k=" + std::to_string(k) + " out of range for " +
                     std::to_string(keys.rows()) + " keys");
  if (row_bias && row_bias->size() != queries.rows()) throw UsageError("row bias size mismatch");
  if (col_bias && col_bias->size() != keys.rows()) throw UsageError("column bias size mismatch");
  TopK out;
  out.queries = queries.rows();
  out.k = k;
  out.indices.resize(static_cast<std::size_t>(out.queries * k));
  out.scores.resize(static_cast<std::size_t>(out.queries * k));
  std::vector<Index> scratch;
  // Query blocks run in fixed order; each row's result depends only on its own scores.
  for (Index start = 0; start < queries.rows(); start += kBlockRows) {
    const Index len = std::min(kBlockRows, queries.rows() - start);
    Matrix s = queries.middleRows(start, len) * keys.transpose();
    if (scale != 1.0) s *= scale;
    if (col_bias) s.rowwise() -= col_bias->transpose();
    if (row_bias) s.colwise() -= row_bias->segment(start, len);
    for (Index r = 0; r < len; ++r) {
      const Index q = start + r;
      select_row(s.row(r).data(), keys.rows(), k, scratch, out.indices.data() + q * k,
                 out.scores.data() + q * k);
    }
  }
  return out;
}

TopK knn(const Matrix& queries, const Matrix& keys, Index k) {
  check_dims(queries, keys, "knn");
  return scored_top_k(normalized_rows(queries), normalized_rows(keys), k);
}

std::uint64_t pair_fingerprint(const Matrix& mapped_src, const Matrix& tgt) {
  return fingerprint(tgt, fingerprint(mapped_src));
}

NeighborhoodStats neighborhood_stats(const Matrix& mapped_src, const Matrix& tgt, Index k) {
  check_dims(mapped_src, tgt, "neighborhood_stats");
  if (k < 1 || k > tgt.rows() || k > mapped_src.rows())
    throw UsageError("neighborhood size k=" + std::to_string(k) + " exceeds the opposite side (" +
                     std::to_string(mapped_src.rows()) + " sources, " +
                     std::to_string(tgt.rows()) + " targets)");
  const Matrix ms = normalized_rows(mapped_src);
  const Matrix mt = normalized_rows(tgt);
  NeighborhoodStats st;
  st.k = k;
  st.r_tgt = row_means(scored_top_k(ms, mt, k));
  st.r_src = row_means(scored_top_k(mt, ms, k));
  st.fingerprint = pair_fingerprint(mapped_src, tgt);
  return st;
}

Matrix csls_scores(const Matrix& mapped_src, std::span<const Index> query_rows, const Matrix& tgt,
                   const NeighborhoodStats& stats) {
  check_dims(mapped_src, tgt, "csls_scores");
  if (stats.fingerprint != pair_fingerprint(mapped_src, tgt))
    throw UsageError("csls_scores: neighborhood statistics were computed for different vectors");
  const Matrix q = normalized_rows(select_rows(mapped_src, query_rows));
  Matrix s = 2.0 * (q * normalized_rows(tgt).transpose());
  s.rowwise() -= stats.r_src.transpose();
  for (std::size_t i = 0; i < query_rows.size(); ++i)
    s.row(static_cast<Index>(i)).array() -= stats.r_tgt(query_rows[i]);
  return s;
}

Matrix isf_scores(const Matrix& mapped_src, std::span<const Index> query_rows, const Matrix& tgt,
                  double beta, Index pool) {
  check_dims(mapped_src, tgt, "isf_scores");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw UsageError("isf temperature must be positive");
  const Matrix ms = normalized_rows(mapped_src);
  const Matrix mt = normalized_rows(tgt);
  const Matrix sample = select_rows(ms, isf_sample_rows(ms.rows(), query_rows, pool));
  const Vector lse = isf_log_normalizers(sample, mt, beta);
  Matrix s = beta * (select_rows(ms, query_rows) * mt.transpose());
  s.rowwise() -= lse.transpose();
  return s.array().exp().matrix();
}

RetrievalMethod parse_method(std::string_view name) {
  if (name == "nn") return RetrievalMethod::nn;
  if (name == "isf") return RetrievalMethod::isf;
  if (name == "csls") return RetrievalMethod::csls;
  throw UsageError("unknown retrieval method '" + std::string(name) + "' (expected nn, isf, csls)");
}

std::string_view to_string(RetrievalMethod method) {
  switch (method) {
    case RetrievalMethod::nn: return "nn";
    case RetrievalMethod::isf: return "isf";
    case RetrievalMethod::csls: return "csls";
  }
  return "?";
}

Translator::Translator(const MappingMatrix& w, const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                       RetrievalOptions options)
    : options_(options) {
  if (src.dim() != tgt.dim() || src.dim() != w.dim())
    throw UsageError("translator: dimension mismatch (source " + std::to_string(src.dim()) +
                     ", target " + std::to_string(tgt.dim()) + ", map " +
                     std::to_string(w.dim()) + ")");
  mapped_ = normalized_rows(apply_map(w, src.vectors()));
  target_ = normalized_rows(Matrix(tgt.vectors().cast<double>()));
  fingerprint_ = pair_fingerprint(mapped_, target_);
}

const Vector& Translator::target_side_stats() {
  if (!r_src_) {
    const Index cap = std::clamp<Index>(options_.source_rank_cap, 1, mapped_.rows());
    const Index k = options_.csls_k;
    if (k < 1 || k > cap || k > target_.rows())
      throw UsageError("csls_k=" + std::to_string(k) + " exceeds the vocabulary");
    TopK nn = scored_top_k(target_, mapped_.topRows(cap), k);
    r_src_ = row_means(nn);
  }
  return *r_src_;
}

Vector Translator::source_side_stats(std::span<const Index> rows) const {
  const Index k = options_.csls_k;
  if (k < 1 || k > target_.rows()) throw UsageError("csls_k exceeds the target vocabulary");
  return row_means(scored_top_k(select_rows(mapped_, rows), target_, k));
}

RetrievalResult Translator::translate(std::span<const Index> queries, RetrievalMethod method,
                                      Index k_out) {
  if (queries.empty()) throw UsageError("translate: empty query list");
  RetrievalResult out;
  out.method = method;
  out.queries.assign(queries.begin(), queries.end());
  const Matrix q = select_rows(mapped_, queries);
  switch (method) {
    case RetrievalMethod::nn:
      out.hits = scored_top_k(q, target_, k_out);
      break;
    case RetrievalMethod::csls: {
      const Vector& r_src = target_side_stats();
      const Vector r_tgt = source_side_stats(queries);
      out.hits = scored_top_k(q, target_, k_out, 2.0, &r_tgt, &r_src);
      out.source_rank_cap = std::min(options_.source_rank_cap, mapped_.rows());
      out.csls_k = options_.csls_k;
      break;
    }
    case RetrievalMethod::isf: {
      if (!(options_.isf_beta > 0.0)) throw UsageError("isf temperature must be positive");
      const Matrix sample =
          select_rows(mapped_, isf_sample_rows(mapped_.rows(), queries, options_.isf_pool));
      const Vector lse = isf_log_normalizers(sample, target_, options_.isf_beta);
      out.hits = scored_top_k(q, target_, k_out, options_.isf_beta, nullptr, &lse);
      for (double& s : out.hits.scores) s = std::exp(s);
      break;
    }
  }
  return out;
}

RetrievalResult translate(std::span<const Index> queries, const MappingMatrix& w,
                          const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                          RetrievalMethod method, Index k_out, const RetrievalOptions& options) {
  Translator t(w, src, tgt, options);
  return t.translate(queries, method, k_out);
}

void write_retrieval_tsv(const RetrievalResult& result, const EmbeddingSpace& src,
                         const EmbeddingSpace& tgt, std::ostream& out) {
  out << "query_word\trank\ttarget_word\tscore\tmethod\n";
  for (std::size_t q = 0; q < result.queries.size(); ++q) {
    const auto idx = result.targets_of(q);
    const auto sc = result.scores_of(q);
    for (std::size_t r = 0; r < idx.size(); ++r)
      out << src.word(result.queries[q]) << '\t' << (r + 1) << '\t' << tgt.word(idx[r]) << '\t'
          << sc[r] << '\t' << to_string(result.method) << '\n';
  }
}

std::vector<Index> rank1_in_degree(const TopK& hits, Index n_keys) {
  std::vector<Index> deg(static_cast<std::size_t>(n_keys), 0);
  for (Index q = 0; q < hits.queries; ++q) ++deg[static_cast<std::size_t>(hits.indices_of(q)[0])];
  return deg;
}

}  // namespace xalign
