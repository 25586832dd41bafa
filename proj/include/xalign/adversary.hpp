#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "xalign/discriminator.hpp"
#include "xalign/embed_io.hpp"
#include "xalign/linmap.hpp"
#include "xalign/modelsel.hpp"
#include "xalign/rng.hpp"

namespace xalign {

struct TrainConfig {
  Index batch_size = 32;
  double learning_rate = 0.1;
  /// Learning rate of W; unset means `learning_rate` (shared by both players).
  std::optional<double> map_learning_rate;
  double lr_decay = 0.95;
  /// Learning rates are divided by this factor when the criterion drops
  /// below the best seen so far; 1 disables shrinking.
  double lr_shrink_on_criterion_drop = 2.0;
  int epochs = 5;
  int iterations_per_epoch = 100000 / 32;
  Index discriminator_feed_limit = 50000;
  int discriminator_steps = 1;
  std::uint64_t rng_seed = 0;

  double smoothing = 0.2;
  bool smooth_mapping_loss = true;
  double beta = 0.01;
  Index hidden_dim = 2048;
  double leaky_slope = 0.2;
  double input_dropout = 0.1;

  CriterionConfig criterion;
  /// Samples per side for the end-of-epoch discriminator accuracy.
  Index accuracy_samples = 1000;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double criterion = 0.0;
  double disc_loss = 0.0;     ///< mean L_D over the epoch
  double map_loss = 0.0;      ///< mean L_W over the epoch
  double disc_accuracy = 0.0; ///< on freshly drawn samples, evaluation mode
  double learning_rate = 0.0; ///< discriminator rate in force after the epoch's update
  double map_learning_rate = 0.0;
};

struct TrainResult {
  MappingMatrix best;           ///< snapshot with the highest criterion
  int best_epoch = -1;          ///< -1 when no epoch ran
  double best_criterion = 0.0;
  std::vector<EpochRecord> history;
  double max_orthogonality_error = 0.0;  ///< max ||WW^T - I||_F after any step
};

/// Alternating SGD between the discriminator and the mapping W.
///
/// Each step draws uniform batches from the `discriminator_feed_limit` most
/// frequent rows of each space, updates the discriminator, updates W against
/// the flipped labels, then applies the orthogonalization step. The
/// trainer owns all mutable state and can be checkpointed between epochs.
class AdversarialTrainer {
 public:
  AdversarialTrainer(const EmbeddingSpace& src, const EmbeddingSpace& tgt, TrainConfig cfg);

  bool done() const { return epoch_ >= cfg_.epochs; }
  int epoch() const { return epoch_; }
  /// Runs one epoch and returns its record. Throws NumericalError on a non-finite loss.
  const EpochRecord& run_epoch();
  TrainResult run();

  const MappingMatrix& mapping() const { return w_; }
  const Discriminator& discriminator() const { return disc_; }
  const std::vector<EpochRecord>& history() const { return history_; }
  TrainResult result() const;

  void save_checkpoint(const std::filesystem::path& path) const;
  /// Restores state written by save_checkpoint for the same spaces and config.
  void load_checkpoint(const std::filesystem::path& path);

 private:
  Matrix sample_batch(const Matrix& pool, Rng& rng) const;
  double discriminator_accuracy() const;

  const EmbeddingSpace& src_;
  const EmbeddingSpace& tgt_;
  TrainConfig cfg_;
  Matrix src_pool_;
  Matrix tgt_pool_;

  MappingMatrix w_;
  Discriminator disc_;
  Rng rng_;
  int epoch_ = 0;
  double lr_ = 0.0;
  double map_lr_ = 0.0;
  std::optional<double> best_criterion_;
  MappingMatrix best_w_;
  int best_epoch_ = -1;
  double max_ortho_error_ = 0.0;
  std::vector<EpochRecord> history_;
};

TrainResult train_adversarial(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                              const TrainConfig& cfg);

/// CSV with header "epoch,criterion,L_D,L_W,disc_accuracy,lr".
void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out);

}  // namespace xalign
