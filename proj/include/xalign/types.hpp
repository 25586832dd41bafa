#pragma once

#include <cstdint>
#include <span>
#include <string_view>

#include <Eigen/Dense>

namespace xalign {

using Index = Eigen::Index;

/// Row-major double matrix; one vector per row throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Storage type for embedding vectors (32-bit components).
using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// FNV-1a over raw bytes, chainable through `seed`.
std::uint64_t fnv1a(std::span<const unsigned char> bytes,
                    std::uint64_t seed = 14695981039346656037ull);
std::uint64_t fnv1a(std::string_view text, std::uint64_t seed = 14695981039346656037ull);

/// Content fingerprint of a matrix (shape and every component).
std::uint64_t fingerprint(const Matrix& m, std::uint64_t seed = 14695981039346656037ull);

/// Copy of `m` with every row scaled to unit Euclidean norm (zero rows stay zero).
Matrix normalized_rows(const Matrix& m);

}  // namespace xalign
