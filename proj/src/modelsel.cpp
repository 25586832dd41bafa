#include "xalign/modelsel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "xalign/error.hpp"

namespace xalign {
namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double validation_criterion(const MappingMatrix& w, const EmbeddingSpace& src,
                            const EmbeddingSpace& tgt, const CriterionConfig& cfg) {
  const Index nq = std::min(cfg.n_queries, src.size());
  if (nq <= 0) throw UsageError("validation criterion needs at least one query");
  RetrievalOptions opt;
  opt.csls_k = cfg.csls_k;
  opt.source_rank_cap = cfg.source_rank_cap;
  Translator translator(w, src, tgt, opt);
  std::vector<Index> queries(static_cast<std::size_t>(nq));
  std::iota(queries.begin(), queries.end(), Index{0});
  const RetrievalResult res = translator.translate(queries, cfg.metric, 1);
  double sum = 0.0;
  for (Index q = 0; q < nq; ++q) {
    const Index t = res.targets_of(static_cast<std::size_t>(q))[0];
    sum += translator.mapped_source().row(q).dot(translator.target().row(t));
  }
  return sum / static_cast<double>(nq);
}

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("spearman: series differ in length");
  if (a.size() < 2) return std::nullopt;
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

std::optional<double> criterion_accuracy_correlation(std::span<const CriterionAccuracy> history) {
  if (history.size() < 5)
    throw UsageError("criterion/accuracy correlation needs at least 5 epochs, got " +
                     std::to_string(history.size()));
  std::vector<double> c, p;
  for (const auto& h : history) {
    c.push_back(h.criterion);
    p.push_back(h.precision_at_1);
  }
  return spearman(c, p);
}

}  // namespace xalign
