#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "xalign/error.hpp"
#include "xalign/linmap.hpp"
#include "xalign/synthgen.hpp"

using namespace xalign;
using testing::random_matrix;

namespace {

double objective(const Matrix& w, const Matrix& x, const Matrix& y) {
  return (x * w.transpose() - y).norm();
}

}  // namespace

TEST_CASE("least squares recovers exact linear relations") {
  Rng rng(1);
  const Matrix x = random_matrix(40, 6, rng);
  CHECK((least_squares_map(x, x).map.w - Matrix::Identity(6, 6)).norm() <= 1e-8);

  Matrix a = random_matrix(6, 6, rng);
  a.diagonal().array() += 3.0;
  const FitResult fit = least_squares_map(x, x * a.transpose());
  CHECK((fit.map.w - a).norm() <= 1e-6);
  CHECK(fit.residual <= 1e-8);
}

TEST_CASE("least squares residual matches a gradient descent minimizer") {
  Rng rng(2);
  const Matrix x = random_matrix(20, 4, rng);
  const Matrix y = random_matrix(20, 4, rng);
  const FitResult fit = least_squares_map(x, y);

  // Plain gradient descent on ||X W^T - Y||^2 from zero.
  Matrix w = Matrix::Zero(4, 4);
  const double step = 0.5 / (x.transpose() * x).eval().norm();
  for (int it = 0; it < 20000; ++it) w -= step * 2.0 * (x * w.transpose() - y).transpose() * x;
  CHECK(std::abs(fit.residual - objective(w, x, y)) <= 1e-4);
}

TEST_CASE("least squares rejects ill-conditioned or short inputs") {
  Rng rng(3);
  Matrix x = random_matrix(10, 3, rng);
  x.col(2) = x.col(1);
  CHECK_THROWS_AS(least_squares_map(x, x), NumericalError);
  CHECK_THROWS_AS(least_squares_map(random_matrix(2, 3, rng), random_matrix(2, 3, rng)),
                  UsageError);
}

TEST_CASE("procrustes identity and quarter turn") {
  Rng rng(4);
  const Matrix x = random_matrix(30, 5, rng);
  CHECK((procrustes(x, x).map.w - Matrix::Identity(5, 5)).norm() <= 1e-8);

  const Matrix e = Matrix::Identity(2, 2);
  Matrix rot(2, 2);
  rot << 0, -1, 1, 0;
  const Matrix y = e * rot.transpose();
  CHECK((procrustes(e, y).map.w - rot).norm() <= 1e-10);
}

TEST_CASE("procrustes on noisy rotation beats random orthogonal matrices") {
  Rng rng(5);
  const Matrix r = random_orthogonal(10, rng);
  const Matrix x = random_matrix(500, 10, rng);
  Matrix y = x * r.transpose();
  for (Index i = 0; i < y.rows(); ++i)
    for (Index j = 0; j < y.cols(); ++j) y(i, j) += 0.01 * rng.normal();
  const Matrix w = procrustes(x, y).map.w;
  CHECK((w - r).norm() <= 0.05);
  const double best = objective(w, x, y);
  int beaten = 0;
  for (int t = 0; t < 1000; ++t)
    if (objective(random_orthogonal(10, rng), x, y) < best) ++beaten;
  CHECK(beaten == 0);
}

TEST_CASE("procrustes properties") {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix x = random_matrix(25, 6, rng);
    const Matrix y = random_matrix(25, 6, rng);
    const FitResult fit = procrustes(x, y);
    CHECK(orthogonality_error(fit.map) <= 1e-8);
    // Scale invariance.
    CHECK((procrustes(3.5 * x, y).map.w - fit.map.w).norm() <= 1e-10);
    // No worse than the polar factor of the least squares solution.
    Eigen::JacobiSVD<Matrix> svd(least_squares_map(x, y).map.w,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix polar = svd.matrixU() * svd.matrixV().transpose();
    CHECK(objective(fit.map.w, x, y) <= objective(polar, x, y) + 1e-8);
    // Norm preservation.
    Vector v = Vector::Random(6).normalized();
    CHECK(std::abs((fit.map.w * v).norm() - 1.0) <= 1e-10);
  }
}

TEST_CASE("degenerate procrustes input is flagged, not rejected") {
  Matrix x = Matrix::Zero(3, 3);
  x(0, 0) = 1.0;
  const FitResult fit = procrustes(x, x);
  CHECK(fit.degenerate);
  CHECK(orthogonality_error(fit.map) <= 1e-8);
}

TEST_CASE("orthogonalize step") {
  Rng rng(7);
  const MappingMatrix q{random_orthogonal(6, rng), 0.3};
  CHECK((orthogonalize_step(q).w - q.w).norm() <= 1e-12);

  const MappingMatrix two{2.0 * Matrix::Identity(2, 2), 0.01};
  CHECK((orthogonalize_step(two).w - 1.94 * Matrix::Identity(2, 2)).norm() <= 1e-12);

  MappingMatrix half{0.5 * Matrix::Identity(3, 3), 0.01};
  for (int i = 0; i < 2000; ++i) half = orthogonalize_step(half);
  CHECK((half.w - Matrix::Identity(3, 3)).norm() <= 1e-6);

  // From a near-orthogonal start, singular values stay within 1%.
  MappingMatrix m{random_orthogonal(8, rng) + 0.002 * random_matrix(8, 8, rng), 0.01};
  for (int i = 0; i < 100; ++i) m = orthogonalize_step(m);
  const Vector sv = singular_values(m);
  CHECK(sv.minCoeff() >= 1.0 - 1e-2);
  CHECK(sv.maxCoeff() <= 1.0 + 1e-2);
}

TEST_CASE("apply_map") {
  Rng rng(8);
  const Matrix x = random_matrix(7, 4, rng);
  CHECK(apply_map(MappingMatrix::identity(4), x) == x);

  Matrix rot(2, 2);
  rot << 0, -1, 1, 0;
  Matrix e(1, 2);
  e << 1, 0;
  const Matrix out = apply_map(MappingMatrix{rot}, e);
  CHECK(out(0, 0) == doctest::Approx(0.0));
  CHECK(out(0, 1) == doctest::Approx(1.0));

  const MappingMatrix w{random_matrix(4, 4, rng)};
  const Matrix got = apply_map(w, x);
  for (Index i = 0; i < x.rows(); ++i)
    for (Index r = 0; r < 4; ++r) {
      double acc = 0.0;
      for (Index c = 0; c < 4; ++c) acc += w.w(r, c) * x(i, c);
      CHECK(std::abs(got(i, r) - acc) <= 1e-10);
    }
  CHECK_THROWS_AS(apply_map(w, random_matrix(2, 3, rng)), UsageError);
}

TEST_CASE("mapping files round trip") {
  testing::TempDir dir;
  Rng rng(9);
  const MappingMatrix m{random_matrix(5, 5, rng), 0.02};
  save_mapping(m, dir / "w.txt", std::vector<std::string>{"note"});
  const MappingMatrix t = load_mapping(dir / "w.txt");
  CHECK(t.w == m.w);
  CHECK(t.beta == m.beta);
  save_mapping_binary(m, dir / "w.bin");
  const MappingMatrix b = load_mapping_binary(dir / "w.bin");
  CHECK(b.w == m.w);
  CHECK(b.beta == m.beta);

  testing::write_file(dir / "bad.txt", "2 0.01\n1 0\n0\n");
  CHECK_THROWS_AS(load_mapping(dir / "bad.txt"), IoError);
}
