#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "support.hpp"
#include "xalign/error.hpp"
#include "xalign/evalsuite.hpp"
#include "xalign/linmap.hpp"
#include "xalign/synthgen.hpp"

using namespace xalign;

namespace {

double gold_p1(const SynthPair& p, const MappingMatrix& w) {
  return word_translation_precision(p.gold, w, p.src, p.tgt, RetrievalMethod::nn, {}).at(1);
}

}  // namespace

TEST_CASE("noiseless identity copy") {
  SynthConfig c;
  c.n_words = 300;
  c.dim = 20;
  c.rotation = RotationKind::identity;
  const SynthPair p = generate_pair(c);
  CHECK(p.tgt.vectors() == p.src.vectors());
  CHECK(p.planted.w == Matrix::Identity(20, 20));
  CHECK(gold_p1(p, MappingMatrix::identity(20)) == 1.0);
  CHECK(p.src.word(7) == "word_7");
}

TEST_CASE("noiseless planted rotation is recovered exactly") {
  SynthConfig c;
  c.n_words = 2000;
  c.dim = 50;
  c.rng_seed = 1;
  const SynthPair p = generate_pair(c);
  CHECK(orthogonality_error(p.planted) <= 1e-10);
  const auto [x, y] = gather_pairs(p.gold, p.src, p.tgt);
  // Stored vectors are 32-bit, which bounds recovery from the files.
  CHECK((procrustes(x, y).map.w - p.planted.w).norm() <= 1e-6);
  // In double precision the recovery is exact to rounding.
  const Matrix y64 = x * p.planted.w.transpose();
  CHECK((procrustes(x, y64).map.w - p.planted.w).norm() <= 1e-8);
  for (Index i = 0; i < p.src.size(); ++i)
    CHECK(std::abs(p.src.vectors().row(i).cast<double>().norm() - 1.0) <= 1e-6);
}

TEST_CASE("gold precision falls with noise") {
  SynthConfig c;
  c.n_words = 2000;
  c.dim = 50;
  c.rng_seed = 2;
  double prev = 2.0;
  for (double sigma : {0.1, 0.3, 0.6}) {
    c.noise_sigma = sigma;
    const SynthPair p = generate_pair(c);
    const double v = gold_p1(p, p.planted);
    if (sigma == 0.3) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
    MESSAGE("sigma " << sigma << " P@1 " << v);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("generation is deterministic and the gold dictionary bijective") {
  SynthConfig c;
  c.n_words = 500;
  c.dim = 16;
  c.rng_seed = 3;
  c.noise_sigma = 0.1;
  c.hub_count = 3;
  c.clusters = 5;
  const SynthPair a = generate_pair(c);
  const SynthPair b = generate_pair(c);
  CHECK(a.src == b.src);
  CHECK(a.tgt == b.tgt);
  CHECK(a.planted.w == b.planted.w);
  CHECK(a.hub_rows == b.hub_rows);
  c.rng_seed = 4;
  CHECK_FALSE(generate_pair(c).src == a.src);

  CHECK(a.hub_rows.size() == 3);
  CHECK(a.gold.size() == 497);
  std::set<Index> s, t;
  for (const WordPair& wp : a.gold.pairs) {
    CHECK(s.insert(wp.src).second);
    CHECK(t.insert(wp.tgt).second);
  }
  CHECK(std::accumulate(a.frequencies.begin(), a.frequencies.end(), 0.0) ==
        doctest::Approx(1.0));
  CHECK(std::is_sorted(a.frequencies.rbegin(), a.frequencies.rend()));
}

TEST_CASE("random orthogonal matrices") {
  Rng rng(5);
  for (Index d : {1, 2, 7, 50}) {
    const Matrix q = random_orthogonal(d, rng);
    CHECK((q * q.transpose() - Matrix::Identity(d, d)).norm() <= 1e-10);
  }
  Rng a(6), b(6);
  CHECK(random_orthogonal(9, a) == random_orthogonal(9, b));
}

TEST_CASE("configuration checks") {
  SynthConfig c;
  c.n_words = 10;
  c.dim = 20;
  CHECK_THROWS_AS(generate_pair(c), UsageError);
  c = SynthConfig{};
  c.noise_sigma = -1;
  CHECK_THROWS_AS(generate_pair(c), UsageError);
  CHECK_THROWS_AS(synth_preset("nope"), UsageError);
  CHECK(synth_preset("noisy").noise_sigma > 0.0);
}

TEST_CASE("planting no hubs leaves the space unchanged") {
  SynthConfig c;
  c.n_words = 100;
  c.dim = 10;
  const SynthPair p = generate_pair(c);
  Rng rng(7);
  const HubPlanting h = plant_hubs(p.src, 0, rng);
  CHECK(h.space == p.src);
  CHECK(h.hub_rows.empty());
  CHECK_THROWS_AS(plant_hubs(p.src, 100, rng), UsageError);
}

TEST_CASE("a planted hub attracts many nearest-neighbour queries and CSLS demotes it") {
  const SynthConfig c = synth_preset("hubbed");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthConfig s = c;
    s.rng_seed = seed;
    const SynthPair p = generate_pair(s);
    REQUIRE(p.hub_rows.size() == 1);
    const Index hub = p.hub_rows[0];
    const Matrix rows = p.tgt.vectors().cast<double>();
    const auto nn = testing::self_census(rows, false);
    const auto cs = testing::self_census(rows, true);
    const double mean = 1.0;  // every row is one query
    CHECK(static_cast<double>(nn[static_cast<std::size_t>(hub)]) >= 3.0 * mean);
    CHECK(cs[static_cast<std::size_t>(hub)] < nn[static_cast<std::size_t>(hub)]);
  }
}
