#pragma once

#include "xalign/linmap.hpp"
#include "xalign/rng.hpp"
#include "xalign/types.hpp"

namespace xalign {

struct DiscriminatorConfig {
  Index input_dim = 300;
  Index hidden_dim = 2048;
  double leaky_slope = 0.2;
  double input_dropout = 0.1;
};

/// Gradients (or any other same-shaped quantity) of the discriminator parameters.
struct DiscriminatorGrads {
  Matrix w1, w2;
  Vector b1, b2, w3;
  double b3 = 0.0;
};

/// Two-hidden-layer perceptron estimating P(source = 1 | z).
///
/// input(d) -> hidden -> hidden -> 1, leaky rectifiers between layers,
/// sigmoid on the output. Input dropout uses inverted scaling in training
/// mode, so evaluation mode needs no rescaling.
class Discriminator {
 public:
  Discriminator() = default;
  /// Uniform initialization in +-1/sqrt(fan_in), deterministic for a given rng state.
  Discriminator(const DiscriminatorConfig& config, Rng& rng);
  /// All weights and biases zero.
  static Discriminator zeros(const DiscriminatorConfig& config);

  const DiscriminatorConfig& config() const { return config_; }

  /// Probability for one vector. `rng` is only used in training mode.
  double forward(const Vector& z, bool train_mode, Rng* rng = nullptr) const;
  /// Probabilities for a batch of row vectors.
  Vector forward_batch(const Matrix& z, bool train_mode, Rng* rng = nullptr) const;

  /// Back-propagates d(loss)/d(logit) for a batch. Returns parameter
  /// gradients; writes d(loss)/d(input rows) into `input_grad` if non-null.
  /// `dropout_mask` must be the mask returned by the forward pass that
  /// produced the logits (empty in evaluation mode).
  struct Pass {
    Matrix input;        // after dropout
    Matrix pre1, pre2;   // pre-activations
    Matrix act1, act2;
    Vector logits;
    Vector probs;
    Matrix dropout_scale;  // empty in evaluation mode
  };
  Pass run(const Matrix& z, bool train_mode, Rng* rng) const;
  DiscriminatorGrads backward(const Pass& pass, const Vector& dlogits, Matrix* input_grad) const;

  /// params <- params - lr * grads
  void apply(const DiscriminatorGrads& grads, double lr);
  bool all_finite() const;

  // Parameters, exposed for checkpoints and tests.
  Matrix w1, w2;   // hidden x input, hidden x hidden
  Vector b1, b2;
  Vector w3;       // hidden -> 1
  double b3 = 0.0;

 private:
  DiscriminatorConfig config_;
};

enum class LossKind { discriminator, mapping };

struct LossOptions {
  double smoothing = 0.2;  ///< label smoothing s; 0 reproduces the plain cross-entropy
  bool train_mode = false; ///< apply input dropout
};

struct LossGrads {
  double loss = 0.0;
  DiscriminatorGrads disc;   ///< filled for LossKind::discriminator
  Matrix map;                ///< d(loss)/dW, filled for LossKind::mapping
  Vector p_src;              ///< predictions on mapped source rows
  Vector p_tgt;              ///< predictions on target rows
};

/// Two-sided cross-entropy from predictions. Source samples carry label
/// `src_label`, target samples 1 - src_label. Probabilities are clamped to
/// [1e-12, 1 - 1e-12]. Natural logarithm.
double two_sided_cross_entropy(const Vector& p_src, const Vector& p_tgt, double src_label);

/// Source label used by each loss for smoothing s.
double source_label(LossKind kind, double smoothing);

/// Loss on mapped source batch (rows of batch_src mapped by W) and target batch.
double adversarial_loss(LossKind kind, const Discriminator& disc, const MappingMatrix& w,
                        const Matrix& batch_src, const Matrix& batch_tgt,
                        const LossOptions& options, Rng* rng = nullptr);

inline double discriminator_loss(const Discriminator& disc, const MappingMatrix& w,
                                 const Matrix& batch_src, const Matrix& batch_tgt,
                                 const LossOptions& options = {}, Rng* rng = nullptr) {
  return adversarial_loss(LossKind::discriminator, disc, w, batch_src, batch_tgt, options, rng);
}
inline double mapping_loss(const Discriminator& disc, const MappingMatrix& w,
                           const Matrix& batch_src, const Matrix& batch_tgt,
                           const LossOptions& options = {}, Rng* rng = nullptr) {
  return adversarial_loss(LossKind::mapping, disc, w, batch_src, batch_tgt, options, rng);
}

/// Loss with analytic gradients. For LossKind::discriminator the gradient is
/// with respect to the discriminator parameters; for LossKind::mapping it is
/// with respect to W only.
LossGrads adversarial_loss_grad(LossKind kind, const Discriminator& disc, const MappingMatrix& w,
                                const Matrix& batch_src, const Matrix& batch_tgt,
                                const LossOptions& options, Rng* rng = nullptr);

}  // namespace xalign
