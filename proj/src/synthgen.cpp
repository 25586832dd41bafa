#include "xalign/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xalign/error.hpp"

namespace xalign {
namespace {

Matrix gaussian(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

MatrixF to_float_unit_rows(const Matrix& m) { return normalized_rows(m).cast<float>(); }

std::vector<std::string> word_names(Index n) {
  std::vector<std::string> w(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = "word_" + std::to_string(i);
  return w;
}

// Index drawn proportionally to `cumulative` (last entry is the total).
Index draw_weighted(const std::vector<double>& cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<Index>(static_cast<Index>(it - cumulative.begin()),
                         static_cast<Index>(cumulative.size()) - 1);
}

}  // namespace

void SynthConfig::validate() const {
  if (n_words <= 0 || dim <= 0) throw UsageError("n_words and dim must be positive");
  if (n_words < dim) throw UsageError("n_words must be at least dim");
  if (!(noise_sigma >= 0.0)) throw UsageError("noise_sigma must be non-negative");
  if (hub_count < 0 || hub_count >= n_words) throw UsageError("hub_count must be in [0, n_words)");
  if (clusters < 0) throw UsageError("clusters must be non-negative");
  if (!(cluster_spread >= 0.0)) throw UsageError("cluster_spread must be non-negative");
  if (!(zipf_exponent >= 0.0)) throw UsageError("zipf_exponent must be non-negative");
  if (!(spectrum_decay >= 0.0)) throw UsageError("spectrum_decay must be non-negative");
}

SynthConfig synth_preset(std::string_view name) {
  SynthConfig c;
  if (name == "noiseless") return c;
  if (name == "noisy") {
    c.noise_sigma = 0.2;
    return c;
  }
  if (name == "hubbed") {
    c.n_words = 100;
    c.mean_offset = 2.0;
    c.hub_count = 1;
    return c;
  }
  if (name == "desk") {
    c.clusters = 30;
    c.spectrum_decay = 0.5;
    c.noise_sigma = 0.05;
    return c;
  }
  throw UsageError("unknown synthetic preset '" + std::string(name) +
                   "' (expected noiseless, noisy, hubbed, desk)");
}

Matrix random_orthogonal(Index dim, Rng& rng) {
  const Matrix g = gaussian(dim, dim, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(dim, dim);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < dim; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

HubPlanting plant_hubs(const EmbeddingSpace& space, Index hub_count, Rng& rng, double noise) {
  if (hub_count < 0 || hub_count >= space.size())
    throw UsageError("hub_count must be in [0, n)");
  HubPlanting out;
  if (hub_count == 0) {
    out.space = space;
    return out;
  }
  Matrix v = space.vectors().cast<double>();
  const Vector centroid = v.colwise().mean().transpose();
  // Partial Fisher-Yates for distinct rows.
  std::vector<Index> perm(static_cast<std::size_t>(space.size()));
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index i = 0; i < hub_count; ++i) {
    const auto j = static_cast<std::size_t>(i) +
                   static_cast<std::size_t>(rng.uniform_index(static_cast<std::uint64_t>(space.size() - i)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[j]);
  }
  out.hub_rows.assign(perm.begin(), perm.begin() + hub_count);
  std::sort(out.hub_rows.begin(), out.hub_rows.end());
  for (Index row : out.hub_rows) {
    Vector h = centroid;
    for (Index j = 0; j < h.size(); ++j) h(j) += noise * rng.normal();
    v.row(row) = h.transpose() / h.norm();
  }
  out.space = EmbeddingSpace(space.words(), v.cast<float>(), space.lang());
  return out;
}

SynthPair generate_pair(const SynthConfig& cfg) {
  cfg.validate();
  const Index n = cfg.n_words;
  const Index d = cfg.dim;
  Rng base_rng = Rng::substream(cfg.rng_seed, "synth.base");
  Rng rot_rng = Rng::substream(cfg.rng_seed, "synth.rotation");
  Rng noise_rng = Rng::substream(cfg.rng_seed, "synth.noise");
  Rng hub_rng = Rng::substream(cfg.rng_seed, "synth.hubs");

  Matrix raw(n, d);
  if (cfg.clusters > 0) {
    const Matrix centres = gaussian(cfg.clusters, d, base_rng);
    std::vector<double> cumulative(static_cast<std::size_t>(cfg.clusters));
    double acc = 0.0;
    for (Index k = 0; k < cfg.clusters; ++k) {
      acc += 1.0 / static_cast<double>(k + 1);
      cumulative[static_cast<std::size_t>(k)] = acc;
    }
    const double scale = 1.0 / std::sqrt(1.0 + cfg.cluster_spread * cfg.cluster_spread);
    for (Index i = 0; i < n; ++i) {
      const Index k = draw_weighted(cumulative, base_rng);
      for (Index j = 0; j < d; ++j)
        raw(i, j) = scale * (centres(k, j) + cfg.cluster_spread * base_rng.normal());
    }
  } else {
    raw = gaussian(n, d, base_rng);
  }
  if (cfg.spectrum_decay != 0.0)
    for (Index j = 0; j < d; ++j)
      raw.col(j) *= std::pow(static_cast<double>(j + 1), -cfg.spectrum_decay);
  if (cfg.mean_offset != 0.0) {
    Vector dir(d);
    for (Index j = 0; j < d; ++j) dir(j) = base_rng.normal();
    dir /= dir.norm();
    raw.rowwise() += cfg.mean_offset * dir.transpose();
  }
  const Matrix src = normalized_rows(raw);

  const Matrix r = cfg.rotation == RotationKind::planted ? random_orthogonal(d, rot_rng)
                                                         : Matrix(Matrix::Identity(d, d));
  Matrix tgt = src * r.transpose();
  if (cfg.noise_sigma > 0.0) {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < d; ++j) tgt(i, j) += cfg.noise_sigma * noise_rng.normal();
  }

  SynthPair out{
      EmbeddingSpace(word_names(n), to_float_unit_rows(src), "src"),
      EmbeddingSpace(word_names(n), to_float_unit_rows(tgt), "tgt"),
      {},
      MappingMatrix{r, 0.01},
      {},
      {}};
  if (cfg.hub_count > 0) {
    HubPlanting hp = plant_hubs(out.tgt, cfg.hub_count, hub_rng, cfg.hub_noise);
    out.tgt = std::move(hp.space);
    out.hub_rows = std::move(hp.hub_rows);
  }
  std::vector<WordPair> pairs;
  for (Index i = 0; i < n; ++i)
    if (!std::binary_search(out.hub_rows.begin(), out.hub_rows.end(), i)) pairs.push_back({i, i});
  out.gold = Dictionary::from_pairs(std::move(pairs), "src", "tgt");

  out.frequencies.resize(static_cast<std::size_t>(n));
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double f = std::pow(static_cast<double>(i + 1), -cfg.zipf_exponent);
    out.frequencies[static_cast<std::size_t>(i)] = f;
    total += f;
  }
  for (double& f : out.frequencies) f /= total;
  return out;
}

}  // namespace xalign
