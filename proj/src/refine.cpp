#include "xalign/refine.hpp"

#include <algorithm>

#include "xalign/error.hpp"

namespace xalign {

Dictionary build_dictionary(const MappingMatrix& w, const EmbeddingSpace& src,
                            const EmbeddingSpace& tgt, const RefineParams& params) {
  if (params.dict_rank_cap <= 0) throw UsageError("dict_rank_cap must be positive");
  if (params.metric == RetrievalMethod::isf)
    throw UsageError("dictionary induction supports nn and csls only");
  if (!w.w.allFinite()) throw NumericalError("mapping has non-finite entries");
  const Index ns = std::min(params.dict_rank_cap, src.size());
  const Index nt = std::min(params.dict_rank_cap, tgt.size());
  const Matrix ms = normalized_rows(apply_map(w, src.head(ns)));
  const Matrix mt = normalized_rows(tgt.head(nt));

  TopK forward;
  TopK backward;
  if (params.metric == RetrievalMethod::csls) {
    const NeighborhoodStats st = neighborhood_stats(ms, mt, std::min({params.csls_k, ns, nt}));
    forward = scored_top_k(ms, mt, 1, 2.0, &st.r_tgt, &st.r_src);
    backward = scored_top_k(mt, ms, 1, 2.0, &st.r_src, &st.r_tgt);
  } else {
    forward = scored_top_k(ms, mt, 1);
    backward = scored_top_k(mt, ms, 1);
  }

  Dictionary dict;
  dict.src_lang = src.lang();
  dict.tgt_lang = tgt.lang();
  for (Index s = 0; s < ns; ++s) {
    const Index t = forward.indices_of(s)[0];
    if (params.mutual_nn_only && backward.indices_of(t)[0] != s) continue;
    dict.pairs.push_back({s, t});
  }
  return dict;
}

RefineResult refine(const MappingMatrix& w0, const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                    const RefineParams& params) {
  if (params.n_iterations < 0) throw UsageError("n_iterations must be non-negative");
  RefineResult out;
  out.map = w0;
  for (int it = 0; it < params.n_iterations; ++it) {
    Dictionary dict = build_dictionary(out.map, src, tgt, params);
    if (dict.empty()) {
      out.aborted = true;
      out.diagnostic = "iteration " + std::to_string(it) +
                       " induced an empty dictionary; keeping the previous mapping";
      break;
    }
    const auto [x, y] = gather_pairs(dict, src, tgt);
    FitResult fit = procrustes(x, y);
    fit.map.beta = w0.beta;
    out.map = fit.map;
    out.dictionary_sizes.push_back(dict.size());
    out.last_dictionary = std::move(dict);
  }
  return out;
}

}  // namespace xalign
