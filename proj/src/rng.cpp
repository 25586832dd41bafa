#include "xalign/rng.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <sstream>

#include "xalign/error.hpp"
#include "xalign/types.hpp"

namespace xalign {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

Rng Rng::substream(std::uint64_t seed, std::string_view name) {
  return Rng(splitmix64(seed) ^ fnv1a(name));
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw UsageError("uniform_index: empty range");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (cached_normal_) {
    const double v = *cached_normal_;
    cached_normal_.reset();
    return v;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(theta);
  return r * std::cos(theta);
}

std::string Rng::state() const {
  std::ostringstream out;
  out << engine_ << ' ' << (cached_normal_ ? 1 : 0) << ' ';
  if (cached_normal_) out << std::hexfloat << *cached_normal_;
  return out.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream in(state);
  int has_cached = 0;
  in >> engine_ >> has_cached;
  if (has_cached) {
    std::string text;
    in >> text;
    cached_normal_ = std::strtod(text.c_str(), nullptr);
  } else {
    cached_normal_.reset();
  }
  if (!in && !in.eof()) throw IoError("corrupt random-generator state");
}

}  // namespace xalign
