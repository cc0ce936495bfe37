#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace deepboot {

/// Seedable random source used everywhere in the library.
///
/// Built on std::mt19937_64 (whose output stream is fixed by the standard);
/// the variate transforms are implemented here rather than taken from
/// <random> distributions, whose algorithms are implementation-defined, so a
/// seed reproduces the same draws with any conforming standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n);

  double normal();

  /// Gamma(shape, 1) via Marsaglia-Tsang; shapes below one use the
  /// U^(1/shape) boost.
  double gamma(double shape);

  /// Laplace(0, scale): density exp(-|x|/scale) / (2 scale).
  double laplace(double scale = 1.0);

  /// +1 or -1 with probability 1/2 each.
  int rademacher() { return (engine_() >> 63) ? 1 : -1; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

/// Mixes a base seed with a path of integers (replication, method, draw...)
/// into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

}  // namespace deepboot
