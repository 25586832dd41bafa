#pragma once

#include <string_view>
#include <vector>

#include "xalign/embed_io.hpp"
#include "xalign/linmap.hpp"
#include "xalign/rng.hpp"

namespace xalign {

enum class RotationKind { planted, identity };

struct SynthConfig {
  Index n_words = 2000;
  Index dim = 50;
  std::uint64_t rng_seed = 0;
  double noise_sigma = 0.0;   ///< componentwise Gaussian noise on the target copy
  RotationKind rotation = RotationKind::planted;
  Index hub_count = 0;        ///< target rows resampled near the centroid
  double zipf_exponent = 1.0; ///< shape of the synthetic frequency metadata
  /// Gaussian-mixture components for the source vectors; 0 draws isotropic
  /// vectors. Component weights fall off as 1/k.
  Index clusters = 0;
  double cluster_spread = 0.8;  ///< within-component std relative to the centres
  /// Length of a shared offset direction added before normalization (per
  /// unit-variance component scale); produces the common-direction
  /// anisotropy that makes centroid vectors hubs.
  double mean_offset = 0.0;
  /// Axis j of the source is scaled by (j+1)^-decay before normalization and
  /// rotation; a decaying spectrum gives the covariance a unique eigenbasis.
  double spectrum_decay = 0.0;
  double hub_noise = 0.01;

  void validate() const;
};

/// Named presets used by the CLI and tests: "noiseless", "noisy", "hubbed", "desk".
SynthConfig synth_preset(std::string_view name);

struct SynthPair {
  EmbeddingSpace src;
  EmbeddingSpace tgt;
  Dictionary gold;                 ///< identity pairs (hub rows excluded)
  MappingMatrix planted;           ///< R with tgt ~ normalize(R src + noise)
  std::vector<double> frequencies; ///< Zipf weights by rank, summing to 1
  std::vector<Index> hub_rows;     ///< target rows replaced by hubs
};

/// Unit-normalized source vectors, a random orthogonal R (or identity), and
/// tgt = normalize(R src + noise). Words are "word_<i>" on both sides.
SynthPair generate_pair(const SynthConfig& cfg);

/// Orthogonal factor of a Gaussian matrix's QR decomposition with the
/// triangular factor's diagonal forced positive.
Matrix random_orthogonal(Index dim, Rng& rng);

struct HubPlanting {
  EmbeddingSpace space;
  std::vector<Index> hub_rows;  ///< ascending
};

/// Replaces `hub_count` distinct random rows by normalize(centroid + noise).
HubPlanting plant_hubs(const EmbeddingSpace& space, Index hub_count, Rng& rng,
                       double noise = 0.01);

}  // namespace xalign
