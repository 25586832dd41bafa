#pragma once

#include <string>
#include <vector>

#include "xalign/embed_io.hpp"
#include "xalign/linmap.hpp"
#include "xalign/metric.hpp"

namespace xalign {

struct RefineParams {
  Index dict_rank_cap = 10000;   ///< candidates: this many most frequent words per side
  int n_iterations = 5;
  RetrievalMethod metric = RetrievalMethod::csls;  ///< nn or csls
  bool mutual_nn_only = true;
  Index csls_k = 10;
};

/// Induces a seed dictionary from W: for each candidate source s, its best
/// candidate target t; with `mutual_nn_only`, the pair is kept only if s is
/// also the best candidate source for t. At most one pair per source, in
/// source order.
Dictionary build_dictionary(const MappingMatrix& w, const EmbeddingSpace& src,
                            const EmbeddingSpace& tgt, const RefineParams& params = {});

struct RefineResult {
  MappingMatrix map;
  std::vector<std::size_t> dictionary_sizes;  ///< one entry per completed iteration
  Dictionary last_dictionary;
  bool aborted = false;        ///< an iteration produced an empty dictionary
  std::string diagnostic;
};

/// Alternates build_dictionary and procrustes `n_iterations` times.
RefineResult refine(const MappingMatrix& w0, const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                    const RefineParams& params = {});

}  // namespace xalign
