#include <doctest.h>

#include <numeric>
#include <set>

#include "support.hpp"
#include "xalign/error.hpp"
#include "xalign/linmap.hpp"
#include "xalign/metric.hpp"
#include "xalign/refine.hpp"
#include "xalign/synthgen.hpp"

using namespace xalign;
using testing::random_matrix;

namespace {

SynthPair planted(std::uint64_t seed, Index n = 2000, Index d = 50) {
  SynthConfig c;
  c.n_words = n;
  c.dim = d;
  c.rng_seed = seed;
  return generate_pair(c);
}

double p_at_1(const MappingMatrix& w, const SynthPair& p) {
  std::vector<Index> q(static_cast<std::size_t>(p.src.size()));
  std::iota(q.begin(), q.end(), Index{0});
  const RetrievalResult r = translate(q, w, p.src, p.tgt, RetrievalMethod::csls, 1);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < q.size(); ++i) hits += r.targets_of(i)[0] == q[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(q.size());
}

// Brute-force CSLS over capped sets: full score matrix, then row and column argmax.
std::vector<WordPair> oracle_mutual(const MappingMatrix& w, const EmbeddingSpace& src,
                                    const EmbeddingSpace& tgt, Index cap, Index k) {
  const Matrix ms = normalized_rows(apply_map(w, src.head(cap)));
  const Matrix mt = normalized_rows(tgt.head(cap));
  const Matrix cos = ms * mt.transpose();
  const Index n = ms.rows(), m = mt.rows();
  Vector r_t(n), r_s(m);
  for (Index i = 0; i < n; ++i) {
    std::vector<double> row(cos.row(i).data(), cos.row(i).data() + m);
    std::sort(row.rbegin(), row.rend());
    r_t(i) = std::accumulate(row.begin(), row.begin() + k, 0.0) / static_cast<double>(k);
  }
  for (Index j = 0; j < m; ++j) {
    std::vector<double> col(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = cos(i, j);
    std::sort(col.rbegin(), col.rend());
    r_s(j) = std::accumulate(col.begin(), col.begin() + k, 0.0) / static_cast<double>(k);
  }
  Matrix c = 2.0 * cos;
  c.colwise() -= r_t;
  c.rowwise() -= r_s.transpose();
  std::vector<WordPair> out;
  for (Index i = 0; i < n; ++i) {
    Index best = 0;
    for (Index j = 1; j < m; ++j)
      if (c(i, j) > c(i, best)) best = j;
    Index back = 0;
    for (Index s = 1; s < n; ++s)
      if (c(s, best) > c(back, best)) back = s;
    if (back == i) out.push_back({i, best});
  }
  return out;
}

}  // namespace

TEST_CASE("identical spaces give self pairs") {
  Rng rng(1);
  const EmbeddingSpace s =
      normalize(testing::make_space(random_matrix(300, 16, rng)), Normalization::unit);
  RefineParams p;
  p.dict_rank_cap = 100;
  const Dictionary d = build_dictionary(MappingMatrix::identity(16), s, s, p);
  REQUIRE(d.size() == 100);
  for (Index i = 0; i < 100; ++i) CHECK(d.pairs[static_cast<std::size_t>(i)] == WordPair{i, i});
}

TEST_CASE("planted rotation gives the full identity dictionary") {
  const SynthPair p = planted(2);
  RefineParams rp;
  const Dictionary d = build_dictionary(p.planted, p.src, p.tgt, rp);
  CHECK(d.pairs == p.gold.pairs);
}

TEST_CASE("dictionary matches a brute-force mutual CSLS oracle") {
  const SynthPair p = planted(3, 400, 20);
  Rng rng(4);
  const MappingMatrix w{random_orthogonal(20, rng)};
  for (bool mutual : {true, false}) {
    RefineParams rp;
    rp.dict_rank_cap = 250;
    rp.mutual_nn_only = mutual;
    const Dictionary d = build_dictionary(w, p.src, p.tgt, rp);
    if (mutual) {
      CHECK(d.pairs == oracle_mutual(w, p.src, p.tgt, 250, 10));
    } else {
      CHECK(d.size() == 250);
    }
    std::set<Index> sources;
    for (const WordPair& wp : d.pairs) {
      CHECK(wp.src < 250);
      CHECK(wp.tgt < 250);
      CHECK(sources.insert(wp.src).second);
    }
  }
}

TEST_CASE("noise rows never displace clean pairs") {
  const SynthPair p = planted(5);
  Rng rng(6);
  Matrix src = p.src.vectors().cast<double>();
  std::vector<Index> rows(2000);
  std::iota(rows.begin(), rows.end(), Index{0});
  std::set<Index> noisy;
  while (noisy.size() < 400) noisy.insert(static_cast<Index>(rng.uniform_index(2000)));
  for (Index r : noisy) src.row(r) = random_matrix(1, 50, rng).normalized();
  const EmbeddingSpace corrupted(p.src.words(), src.cast<float>());
  RefineParams rp;
  const Dictionary d = build_dictionary(p.planted, corrupted, p.tgt, rp);
  std::size_t clean_found = 0;
  std::size_t noise_on_clean_target = 0;
  for (const WordPair& wp : d.pairs) {
    if (noisy.contains(wp.src)) {
      // A noise row may only pair with a target whose own partner is gone.
      if (!noisy.contains(wp.tgt)) ++noise_on_clean_target;
    } else if (wp.src == wp.tgt) {
      ++clean_found;
    }
  }
  CHECK(noise_on_clean_target == 0);
  CHECK(static_cast<double>(clean_found) >= 0.95 * 1600.0);
}

TEST_CASE("refine fixed points and no-op") {
  Rng rng(7);
  const EmbeddingSpace s =
      normalize(testing::make_space(random_matrix(300, 10, rng)), Normalization::unit);
  RefineParams p;
  p.n_iterations = 0;
  const MappingMatrix w0{random_orthogonal(10, rng)};
  CHECK(refine(w0, s, s, p).map.w == w0.w);

  p.n_iterations = 3;
  const RefineResult r = refine(MappingMatrix::identity(10), s, s, p);
  CHECK((r.map.w - Matrix::Identity(10, 10)).norm() <= 1e-6);
  CHECK(r.dictionary_sizes.size() == 3);
  CHECK_FALSE(r.aborted);
}

TEST_CASE("refinement keeps a perfect mapping perfect") {
  const SynthPair p = planted(8);
  RefineParams rp;
  MappingMatrix w = p.planted;
  for (int it = 0; it < 3; ++it) {
    rp.n_iterations = 1;
    w = refine(w, p.src, p.tgt, rp).map;
    CHECK(orthogonality_error(w) <= 1e-8);
    CHECK(p_at_1(w, p) == 1.0);
  }
}

TEST_CASE("refinement from a perturbed planted map does not lose accuracy") {
  for (std::uint64_t seed = 10; seed < 13; ++seed) {
    SynthConfig c;
    c.n_words = 2000;
    c.dim = 50;
    c.rng_seed = seed;
    c.noise_sigma = 0.05;
    const SynthPair p = generate_pair(c);
    Rng rng(seed);
    const Matrix noisy = p.planted.w + 0.1 * random_matrix(50, 50, rng);
    Eigen::JacobiSVD<Matrix> svd(noisy, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const MappingMatrix w0{svd.matrixU() * svd.matrixV().transpose()};
    const double before = p_at_1(w0, p);
    const RefineResult r = refine(w0, p.src, p.tgt, {});
    CHECK(p_at_1(r.map, p) >= before);
    CHECK(orthogonality_error(r.map) <= 1e-8);
  }
}

TEST_CASE("dictionary induction input checks") {
  // The global best score is always mutual, so a finite map never yields an
  // empty dictionary.
  const EmbeddingSpace src({"a", "b"}, MatrixF{{1, 0}, {0.9f, 0.1f}});
  const EmbeddingSpace tgt({"x", "y"}, MatrixF{{0, 1}, {1, 0}});
  RefineParams p;
  p.dict_rank_cap = 1;
  p.csls_k = 1;
  p.metric = RetrievalMethod::nn;
  const MappingMatrix w{(Matrix(2, 2) << -1, 0, 0, -1).finished()};
  CHECK(build_dictionary(w, src, tgt, p).size() == 1);

  RefineParams bad = p;
  bad.metric = RetrievalMethod::isf;
  CHECK_THROWS_AS(build_dictionary(w, src, tgt, bad), UsageError);
  Matrix nan = Matrix::Identity(2, 2);
  nan(0, 0) = std::nan("");
  CHECK_THROWS_AS(build_dictionary(MappingMatrix{nan}, src, tgt, p), NumericalError);
}
