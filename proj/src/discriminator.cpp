#include "xalign/discriminator.hpp"

#include <algorithm>
#include <cmath>

#include "xalign/error.hpp"

namespace xalign {
namespace {

constexpr double kProbFloor = 1e-12;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void fill_uniform(Eigen::Ref<Matrix> m, double bound, Rng& rng) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
}

void fill_uniform(Vector& v, double bound, Rng& rng) {
  for (Index i = 0; i < v.size(); ++i) v(i) = (2.0 * rng.uniform() - 1.0) * bound;
}

Matrix leaky(const Matrix& pre, double slope) {
  return pre.unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
}

Matrix leaky_grad(const Matrix& pre, const Matrix& upstream, double slope) {
  return upstream.cwiseProduct(pre.unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; }));
}

}  // namespace

Discriminator::Discriminator(const DiscriminatorConfig& config, Rng& rng) : config_(config) {
  const Index d = config.input_dim;
  const Index h = config.hidden_dim;
  if (d <= 0 || h <= 0) throw UsageError("discriminator dimensions must be positive");
  w1.resize(h, d);
  b1.resize(h);
  w2.resize(h, h);
  b2.resize(h);
  w3.resize(h);
  const double bound_in = 1.0 / std::sqrt(static_cast<double>(d));
  const double bound_hidden = 1.0 / std::sqrt(static_cast<double>(h));
  fill_uniform(w1, bound_in, rng);
  fill_uniform(b1, bound_in, rng);
  fill_uniform(w2, bound_hidden, rng);
  fill_uniform(b2, bound_hidden, rng);
  fill_uniform(w3, bound_hidden, rng);
  b3 = (2.0 * rng.uniform() - 1.0) * bound_hidden;
}

Discriminator Discriminator::zeros(const DiscriminatorConfig& config) {
  Discriminator d;
  d.config_ = config;
  d.w1 = Matrix::Zero(config.hidden_dim, config.input_dim);
  d.b1 = Vector::Zero(config.hidden_dim);
  d.w2 = Matrix::Zero(config.hidden_dim, config.hidden_dim);
  d.b2 = Vector::Zero(config.hidden_dim);
  d.w3 = Vector::Zero(config.hidden_dim);
  d.b3 = 0.0;
  return d;
}

Discriminator::Pass Discriminator::run(const Matrix& z, bool train_mode, Rng* rng) const {
  if (z.cols() != config_.input_dim)
    throw UsageError("discriminator input has dimension " + std::to_string(z.cols()) +
                     ", expected " + std::to_string(config_.input_dim));
  Pass pass;
  const double rate = config_.input_dropout;
  if (train_mode && rate > 0.0) {
    if (rng == nullptr) throw UsageError("training-mode forward pass needs a random source");
    const double keep_scale = 1.0 / (1.0 - rate);
    pass.dropout_scale.resize(z.rows(), z.cols());
    for (Index i = 0; i < z.rows(); ++i)
      for (Index j = 0; j < z.cols(); ++j)
        pass.dropout_scale(i, j) = rng->bernoulli(rate) ? 0.0 : keep_scale;
    pass.input = z.cwiseProduct(pass.dropout_scale);
  } else {
    pass.input = z;
  }
  pass.pre1 = pass.input * w1.transpose();
  pass.pre1.rowwise() += b1.transpose();
  pass.act1 = leaky(pass.pre1, config_.leaky_slope);
  pass.pre2 = pass.act1 * w2.transpose();
  pass.pre2.rowwise() += b2.transpose();
  pass.act2 = leaky(pass.pre2, config_.leaky_slope);
  pass.logits = (pass.act2 * w3).array() + b3;
  pass.probs = pass.logits.unaryExpr([](double x) { return sigmoid(x); });
  return pass;
}

double Discriminator::forward(const Vector& z, bool train_mode, Rng* rng) const {
  return forward_batch(Matrix(z.transpose()), train_mode, rng)(0);
}

Vector Discriminator::forward_batch(const Matrix& z, bool train_mode, Rng* rng) const {
  return run(z, train_mode, rng).probs;
}

DiscriminatorGrads Discriminator::backward(const Pass& pass, const Vector& dlogits,
                                           Matrix* input_grad) const {
  const double slope = config_.leaky_slope;
  DiscriminatorGrads g;
  g.w3 = pass.act2.transpose() * dlogits;
  g.b3 = dlogits.sum();
  const Matrix dpre2 = leaky_grad(pass.pre2, dlogits * w3.transpose(), slope);
  g.w2 = dpre2.transpose() * pass.act1;
  g.b2 = dpre2.colwise().sum().transpose();
  const Matrix dpre1 = leaky_grad(pass.pre1, dpre2 * w2, slope);
  g.w1 = dpre1.transpose() * pass.input;
  g.b1 = dpre1.colwise().sum().transpose();
  if (input_grad != nullptr) {
    *input_grad = dpre1 * w1;
    if (pass.dropout_scale.size() > 0) *input_grad = input_grad->cwiseProduct(pass.dropout_scale);
  }
  return g;
}

void Discriminator::apply(const DiscriminatorGrads& grads, double lr) {
  w1 -= lr * grads.w1;
  b1 -= lr * grads.b1;
  w2 -= lr * grads.w2;
  b2 -= lr * grads.b2;
  w3 -= lr * grads.w3;
  b3 -= lr * grads.b3;
}

bool Discriminator::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() && w3.allFinite() &&
         std::isfinite(b3);
}

double two_sided_cross_entropy(const Vector& p_src, const Vector& p_tgt, double src_label) {
  auto side = [](const Vector& p, double label) {
    double sum = 0.0;
    for (Index i = 0; i < p.size(); ++i) {
      const double q = std::clamp(p(i), kProbFloor, 1.0 - kProbFloor);
      sum -= label * std::log(q) + (1.0 - label) * std::log(1.0 - q);
    }
    return sum / static_cast<double>(p.size());
  };
  return side(p_src, src_label) + side(p_tgt, 1.0 - src_label);
}

double source_label(LossKind kind, double smoothing) {
  return kind == LossKind::discriminator ? 1.0 - smoothing : smoothing;
}

LossGrads adversarial_loss_grad(LossKind kind, const Discriminator& disc, const MappingMatrix& w,
                                const Matrix& batch_src, const Matrix& batch_tgt,
                                const LossOptions& options, Rng* rng) {
  if (batch_src.rows() == 0 || batch_tgt.rows() == 0) throw UsageError("empty training batch");
  const Index ns = batch_src.rows();
  const Index nt = batch_tgt.rows();
  Matrix z(ns + nt, w.dim());
  z.topRows(ns) = apply_map(w, batch_src);
  z.bottomRows(nt) = batch_tgt;

  const auto pass = disc.run(z, options.train_mode, rng);
  LossGrads out;
  out.p_src = pass.probs.head(ns);
  out.p_tgt = pass.probs.tail(nt);
  const double label = source_label(kind, options.smoothing);
  out.loss = two_sided_cross_entropy(out.p_src, out.p_tgt, label);

  // d/dlogit of the per-side mean cross-entropy is (p - label) / side size.
  Vector dlogits(ns + nt);
  for (Index i = 0; i < ns; ++i) dlogits(i) = (pass.probs(i) - label) / static_cast<double>(ns);
  for (Index i = 0; i < nt; ++i)
    dlogits(ns + i) = (pass.probs(ns + i) - (1.0 - label)) / static_cast<double>(nt);

  if (kind == LossKind::discriminator) {
    out.disc = disc.backward(pass, dlogits, nullptr);
  } else {
    Matrix dz;
    disc.backward(pass, dlogits, &dz);
    // z_i = W x_i  =>  dL/dW = sum_i dz_i x_i^T
    out.map = dz.topRows(ns).transpose() * batch_src;
  }
  return out;
}

double adversarial_loss(LossKind kind, const Discriminator& disc, const MappingMatrix& w,
                        const Matrix& batch_src, const Matrix& batch_tgt,
                        const LossOptions& options, Rng* rng) {
  if (batch_src.rows() == 0 || batch_tgt.rows() == 0) throw UsageError("empty training batch");
  Matrix z(batch_src.rows() + batch_tgt.rows(), w.dim());
  z.topRows(batch_src.rows()) = apply_map(w, batch_src);
  z.bottomRows(batch_tgt.rows()) = batch_tgt;
  const Vector p = disc.forward_batch(z, options.train_mode, rng);
  return two_sided_cross_entropy(p.head(batch_src.rows()), p.tail(batch_tgt.rows()),
                                 source_label(kind, options.smoothing));
}

}  // namespace xalign
