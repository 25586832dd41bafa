#include "xalign/types.hpp"

namespace xalign {

std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a(std::string_view text, std::uint64_t seed) {
  return fnv1a(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()), seed);
}

std::uint64_t fingerprint(const Matrix& m, std::uint64_t seed) {
  const Index shape[2] = {m.rows(), m.cols()};
  std::uint64_t h = fnv1a(std::span(reinterpret_cast<const unsigned char*>(shape), sizeof(shape)),
                          seed);
  return fnv1a(std::span(reinterpret_cast<const unsigned char*>(m.data()),
                         static_cast<std::size_t>(m.size()) * sizeof(double)),
               h);
}

Matrix normalized_rows(const Matrix& m) {
  Matrix out = m;
  for (Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

}  // namespace xalign
