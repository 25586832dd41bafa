#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>
#include <fstream>
#include <random>
#include <string>
#include <string_view>

#include "xalign/adversary.hpp"
#include "xalign/embed_io.hpp"
#include "xalign/rng.hpp"
#include "xalign/types.hpp"

namespace testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    for (int attempt = 0; attempt < 100; ++attempt) {
      fs::path p = fs::temp_directory_path() / ("xalign-test-" + std::to_string(rd()));
      if (fs::create_directory(p)) {
        path_ = p;
        return;
      }
    }
    throw std::runtime_error("cannot create a temporary directory");
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(std::string_view name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, std::string_view text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline xalign::Matrix random_matrix(xalign::Index rows, xalign::Index cols, xalign::Rng& rng) {
  xalign::Matrix m(rows, cols);
  for (xalign::Index i = 0; i < rows; ++i)
    for (xalign::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

/// Adversarial settings for the 2000 x 50 "desk" synthetic pair: a narrower
/// discriminator with three steps per map step, 30 x 250 iterations, and a
/// stronger orthogonalization pull to match the larger map steps.
inline xalign::TrainConfig desk_train_config(std::uint64_t seed = 1) {
  xalign::TrainConfig c;
  c.hidden_dim = 256;
  c.discriminator_steps = 3;
  c.epochs = 30;
  c.iterations_per_epoch = 250;
  c.learning_rate = 0.1;
  c.map_learning_rate = 0.1;
  c.lr_shrink_on_criterion_drop = 1.0;
  c.beta = 0.1;
  c.criterion.n_queries = 1000;
  c.rng_seed = seed;
  return c;
}

/// Space with words "w0".."w{n-1}" and the given rows.
inline xalign::EmbeddingSpace make_space(const xalign::Matrix& rows, std::string prefix = "w") {
  std::vector<std::string> words;
  for (xalign::Index i = 0; i < rows.rows(); ++i) words.push_back(prefix + std::to_string(i));
  return xalign::EmbeddingSpace(std::move(words), rows.cast<float>());
}

/// Rank-1 in-degree of every row when each row queries all the others
/// (self-matches excluded), by cosine or by CSLS with neighbourhood k.
inline std::vector<xalign::Index> self_census(const xalign::Matrix& rows, bool csls,
                                              xalign::Index k = 10) {
  using xalign::Index;
  const xalign::Matrix u = xalign::normalized_rows(rows);
  xalign::Matrix cos = u * u.transpose();
  const Index n = u.rows();
  cos.diagonal().setConstant(-std::numeric_limits<double>::infinity());
  xalign::Vector r = xalign::Vector::Zero(n);
  if (csls) {
    for (Index i = 0; i < n; ++i) {
      std::vector<double> row(cos.row(i).data(), cos.row(i).data() + n);
      std::partial_sort(row.begin(), row.begin() + k, row.end(), std::greater<>());
      r(i) = std::accumulate(row.begin(), row.begin() + k, 0.0) / static_cast<double>(k);
    }
  }
  std::vector<Index> degree(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    Index best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double s = csls ? 2 * cos(i, j) - r(i) - r(j) : cos(i, j);
      if (s > best_score) {
        best_score = s;
        best = j;
      }
    }
    ++degree[static_cast<std::size_t>(best)];
  }
  return degree;
}

}  // namespace testing
