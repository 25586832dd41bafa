#include "xalign/adversary.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>

#include "xalign/error.hpp"

namespace xalign {
namespace {

constexpr char kCheckpointMagic[4] = {'X', 'A', 'C', 'K'};
constexpr std::uint8_t kCheckpointVersion = 1;

class BinWriter {
 public:
  explicit BinWriter(std::ostream& out) : out_(out) {}
  template <typename T>
  void put(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_matrix(const Matrix& m) {
    put<std::int64_t>(m.rows());
    put<std::int64_t>(m.cols());
    out_.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  void put_vector(const Vector& v) {
    put<std::int64_t>(v.size());
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& out_;
};

class BinReader {
 public:
  BinReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}
  template <typename T>
  T get() {
    T v{};
    if (!in_.read(reinterpret_cast<char*>(&v), sizeof(T))) fail();
    return v;
  }
  Matrix get_matrix() {
    const auto r = get<std::int64_t>();
    const auto c = get<std::int64_t>();
    if (r < 0 || c < 0) fail();
    Matrix m(r, c);
    if (!in_.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)))) fail();
    return m;
  }
  Vector get_vector() {
    const auto n = get<std::int64_t>();
    if (n < 0) fail();
    Vector v(n);
    if (!in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)))) fail();
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    std::string s(n, '\0');
    if (!in_.read(s.data(), static_cast<std::streamsize>(n))) fail();
    return s;
  }

 private:
  [[noreturn]] void fail() { throw IoError(name_ + ": truncated or corrupt checkpoint"); }
  std::istream& in_;
  std::string name_;
};

std::uint64_t config_signature(const TrainConfig& c, const EmbeddingSpace& src,
                               const EmbeddingSpace& tgt) {
  std::string s = std::to_string(src.size()) + "/" + std::to_string(tgt.size()) + "/" +
                  std::to_string(src.dim()) + "/" + std::to_string(c.hidden_dim) + "/" +
                  std::to_string(c.batch_size) + "/" + std::to_string(c.discriminator_steps) + "/" +
                  std::to_string(c.iterations_per_epoch) + "/" + std::to_string(c.rng_seed) + "/" +
                  std::to_string(c.discriminator_feed_limit);
  return fnv1a(s);
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](auto v, const char* name) {
    if (!(v > 0)) throw UsageError(std::string(name) + " must be positive");
  };
  positive(batch_size, "batch_size");
  positive(learning_rate, "learning_rate");
  if (map_learning_rate) positive(*map_learning_rate, "map_learning_rate");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw UsageError("lr_decay must be in (0, 1]");
  if (!(lr_shrink_on_criterion_drop >= 1.0))
    throw UsageError("lr_shrink_on_criterion_drop must be >= 1");
  if (epochs < 0) throw UsageError("epochs must be non-negative");
  positive(iterations_per_epoch, "iterations_per_epoch");
  positive(discriminator_feed_limit, "discriminator_feed_limit");
  positive(discriminator_steps, "discriminator_steps");
  if (!(smoothing >= 0.0 && smoothing < 0.5)) throw UsageError("smoothing must be in [0, 0.5)");
  if (!(input_dropout >= 0.0 && input_dropout < 1.0))
    throw UsageError("input_dropout must be in [0, 1)");
  positive(hidden_dim, "hidden_dim");
  positive(accuracy_samples, "accuracy_samples");
}

AdversarialTrainer::AdversarialTrainer(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                                       TrainConfig cfg)
    : src_(src), tgt_(tgt), cfg_(std::move(cfg)), rng_(Rng::substream(cfg_.rng_seed, "adversary.batches")) {
  cfg_.validate();
  if (src.dim() != tgt.dim())
    throw UsageError("source and target dimensions differ: " + std::to_string(src.dim()) + " vs " +
                     std::to_string(tgt.dim()));
  src_pool_ = src.head(cfg_.discriminator_feed_limit);
  tgt_pool_ = tgt.head(cfg_.discriminator_feed_limit);
  w_ = MappingMatrix::identity(src.dim(), cfg_.beta);
  best_w_ = w_;
  DiscriminatorConfig dc{src.dim(), cfg_.hidden_dim, cfg_.leaky_slope, cfg_.input_dropout};
  Rng init = Rng::substream(cfg_.rng_seed, "adversary.init");
  disc_ = Discriminator(dc, init);
  lr_ = cfg_.learning_rate;
  map_lr_ = cfg_.map_learning_rate.value_or(cfg_.learning_rate);
}

Matrix AdversarialTrainer::sample_batch(const Matrix& pool, Rng& rng) const {
  Matrix b(cfg_.batch_size, pool.cols());
  for (Index i = 0; i < cfg_.batch_size; ++i)
    b.row(i) = pool.row(static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(pool.rows()))));
  return b;
}

double AdversarialTrainer::discriminator_accuracy() const {
  Rng rng = Rng::substream(cfg_.rng_seed ^ static_cast<std::uint64_t>(epoch_), "adversary.accuracy");
  Matrix xs(cfg_.accuracy_samples, src_pool_.cols());
  Matrix ys(cfg_.accuracy_samples, tgt_pool_.cols());
  for (Index i = 0; i < cfg_.accuracy_samples; ++i) {
    xs.row(i) = src_pool_.row(static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(src_pool_.rows()))));
    ys.row(i) = tgt_pool_.row(static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(tgt_pool_.rows()))));
  }
  const Vector ps = disc_.forward_batch(apply_map(w_, xs), false);
  const Vector pt = disc_.forward_batch(ys, false);
  const double correct = static_cast<double>((ps.array() >= 0.5).count() + (pt.array() < 0.5).count());
  return correct / static_cast<double>(2 * cfg_.accuracy_samples);
}

const EpochRecord& AdversarialTrainer::run_epoch() {
  if (done()) throw UsageError("training already finished");
  const LossOptions disc_opts{cfg_.smoothing, true};
  const LossOptions map_opts{cfg_.smooth_mapping_loss ? cfg_.smoothing : 0.0, false};
  double disc_loss_sum = 0.0;
  double map_loss_sum = 0.0;

  for (int it = 0; it < cfg_.iterations_per_epoch; ++it) {
    for (int s = 0; s < cfg_.discriminator_steps; ++s) {
      const Matrix xb = sample_batch(src_pool_, rng_);
      const Matrix yb = sample_batch(tgt_pool_, rng_);
      const LossGrads g = adversarial_loss_grad(LossKind::discriminator, disc_, w_, xb, yb, disc_opts, &rng_);
      if (!std::isfinite(g.loss))
        throw NumericalError("discriminator loss is not finite at epoch " + std::to_string(epoch_) +
                             ", iteration " + std::to_string(it));
      disc_.apply(g.disc, lr_);
      disc_loss_sum += g.loss;
    }
    const Matrix xb = sample_batch(src_pool_, rng_);
    const Matrix yb = sample_batch(tgt_pool_, rng_);
    const LossGrads g = adversarial_loss_grad(LossKind::mapping, disc_, w_, xb, yb, map_opts, nullptr);
    if (!std::isfinite(g.loss))
      throw NumericalError("mapping loss is not finite at epoch " + std::to_string(epoch_) +
                           ", iteration " + std::to_string(it));
    w_.w -= map_lr_ * g.map;
    w_ = orthogonalize_step(w_);
    map_loss_sum += g.loss;
    if (!w_.w.allFinite() || !disc_.all_finite())
      throw NumericalError("parameters diverged at epoch " + std::to_string(epoch_) + ", iteration " +
                           std::to_string(it));
    max_ortho_error_ = std::max(max_ortho_error_, orthogonality_error(w_));
  }

  EpochRecord rec;
  rec.epoch = epoch_;
  rec.disc_loss = disc_loss_sum / (cfg_.iterations_per_epoch * cfg_.discriminator_steps);
  rec.map_loss = map_loss_sum / cfg_.iterations_per_epoch;
  rec.disc_accuracy = discriminator_accuracy();
  rec.criterion = validation_criterion(w_, src_, tgt_, cfg_.criterion);

  lr_ *= cfg_.lr_decay;
  map_lr_ *= cfg_.lr_decay;
  if (best_criterion_ && rec.criterion < *best_criterion_) {
    lr_ /= cfg_.lr_shrink_on_criterion_drop;
    map_lr_ /= cfg_.lr_shrink_on_criterion_drop;
  }
  if (!best_criterion_ || rec.criterion > *best_criterion_) {
    best_criterion_ = rec.criterion;
    best_w_ = w_;
    best_epoch_ = epoch_;
  }
  rec.learning_rate = lr_;
  rec.map_learning_rate = map_lr_;
  history_.push_back(rec);
  ++epoch_;
  return history_.back();
}

TrainResult AdversarialTrainer::run() {
  while (!done()) run_epoch();
  return result();
}

TrainResult AdversarialTrainer::result() const {
  TrainResult r;
  r.best = best_w_;
  r.best_epoch = best_epoch_;
  r.best_criterion = best_criterion_.value_or(0.0);
  r.history = history_;
  r.max_orthogonality_error = max_ortho_error_;
  return r;
}

void AdversarialTrainer::save_checkpoint(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  BinWriter w(out);
  out.write(kCheckpointMagic, 4);
  w.put(kCheckpointVersion);
  w.put(config_signature(cfg_, src_, tgt_));
  w.put<std::int32_t>(epoch_);
  w.put(lr_);
  w.put(map_lr_);
  w.put<std::uint8_t>(best_criterion_ ? 1 : 0);
  w.put(best_criterion_.value_or(0.0));
  w.put<std::int32_t>(best_epoch_);
  w.put(max_ortho_error_);
  w.put(w_.beta);
  w.put_matrix(w_.w);
  w.put_matrix(best_w_.w);
  w.put_matrix(disc_.w1);
  w.put_vector(disc_.b1);
  w.put_matrix(disc_.w2);
  w.put_vector(disc_.b2);
  w.put_vector(disc_.w3);
  w.put(disc_.b3);
  w.put_string(rng_.state());
  w.put<std::uint64_t>(history_.size());
  for (const auto& h : history_) {
    w.put<std::int32_t>(h.epoch);
    w.put(h.criterion);
    w.put(h.disc_loss);
    w.put(h.map_loss);
    w.put(h.disc_accuracy);
    w.put(h.learning_rate);
    w.put(h.map_learning_rate);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void AdversarialTrainer::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw IoError(path.string() + ": not a training checkpoint");
  BinReader r(in, path.string());
  if (r.get<std::uint8_t>() != kCheckpointVersion)
    throw IoError(path.string() + ": unsupported checkpoint version");
  if (r.get<std::uint64_t>() != config_signature(cfg_, src_, tgt_))
    throw UsageError(path.string() + ": checkpoint was written for a different configuration");
  epoch_ = r.get<std::int32_t>();
  lr_ = r.get<double>();
  map_lr_ = r.get<double>();
  const bool has_best = r.get<std::uint8_t>() != 0;
  const double best = r.get<double>();
  best_criterion_ = has_best ? std::optional<double>(best) : std::nullopt;
  best_epoch_ = r.get<std::int32_t>();
  max_ortho_error_ = r.get<double>();
  w_.beta = r.get<double>();
  best_w_.beta = w_.beta;
  w_.w = r.get_matrix();
  best_w_.w = r.get_matrix();
  disc_.w1 = r.get_matrix();
  disc_.b1 = r.get_vector();
  disc_.w2 = r.get_matrix();
  disc_.b2 = r.get_vector();
  disc_.w3 = r.get_vector();
  disc_.b3 = r.get<double>();
  rng_.restore(r.get_string());
  const auto n = r.get<std::uint64_t>();
  history_.clear();
  for (std::uint64_t i = 0; i < n; ++i) {
    EpochRecord h;
    h.epoch = r.get<std::int32_t>();
    h.criterion = r.get<double>();
    h.disc_loss = r.get<double>();
    h.map_loss = r.get<double>();
    h.disc_accuracy = r.get<double>();
    h.learning_rate = r.get<double>();
    h.map_learning_rate = r.get<double>();
    history_.push_back(h);
  }
}

TrainResult train_adversarial(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                              const TrainConfig& cfg) {
  AdversarialTrainer trainer(src, tgt, cfg);
  return trainer.run();
}

void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out) {
  out << "epoch,criterion,L_D,L_W,disc_accuracy,lr\n";
  char line[256];
  for (const auto& h : history) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", h.epoch, h.criterion,
                  h.disc_loss, h.map_loss, h.disc_accuracy, h.learning_rate);
    out << line;
  }
}

}  // namespace xalign
