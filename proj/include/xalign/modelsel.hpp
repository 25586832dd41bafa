#pragma once

#include <optional>
#include <span>

#include "xalign/embed_io.hpp"
#include "xalign/linmap.hpp"
#include "xalign/metric.hpp"

namespace xalign {

struct CriterionConfig {
  Index n_queries = 10000;           ///< most frequent source words translated
  RetrievalMethod metric = RetrievalMethod::csls;
  Index csls_k = 10;
  Index source_rank_cap = 200000;    ///< mapped sources used for r_S
};

/// Unsupervised model-selection score: translate the `n_queries` most
/// frequent source words with the configured metric and average the cosine
/// between each mapped source word and its chosen target. In [-1, 1].
double validation_criterion(const MappingMatrix& w, const EmbeddingSpace& src,
                            const EmbeddingSpace& tgt, const CriterionConfig& cfg = {});

/// Spearman rank correlation with average ranks for ties. nullopt when either
/// series is constant (correlation undefined) or shorter than 2.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

struct CriterionAccuracy {
  double criterion = 0.0;
  double precision_at_1 = 0.0;
};

/// Spearman correlation between criterion and P@1 across epochs. Needs at
/// least 5 epochs; nullopt for constant series.
std::optional<double> criterion_accuracy_correlation(std::span<const CriterionAccuracy> history);

}  // namespace xalign
