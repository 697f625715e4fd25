#pragma once

// Deterministic, splittable random streams.
//
// Every random quantity in the library is drawn from a named stream derived
// from (root seed, stream name). Streams are independent of each other and of
// the order in which they are created, so e.g. adding a third receiver draws
// its own fading matrix without perturbing the draws of the first two.
//
// Gaussian variates use an explicit Box-Muller transform on top of the
// (bit-exact, standardized) mt19937_64 engine rather than
// std::normal_distribution, whose output is implementation-defined. This
// keeps all outputs byte-identical across standard libraries.

#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace risbeam {

namespace detail {

// splitmix64: a well-mixed 64-bit finalizer, used to derive stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a over the stream name, folded with the root seed via splitmix64.
inline std::uint64_t stream_seed(std::uint64_t root, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // Two rounds so that (root, name) mix into each other.
  return splitmix64(splitmix64(root) ^ h);
}

} // namespace detail

class RandomStream {
public:
  RandomStream(std::uint64_t root_seed, std::string_view name)
      : engine_(detail::stream_seed(root_seed, name)) {}

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; one spare value is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    // Guard against log(0).
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(phi);
    have_spare_ = true;
    return r * std::cos(phi);
  }

  // Circularly symmetric complex Gaussian with E[|z|^2] = 1.
  std::complex<double> complex_normal() {
    const double re = normal();
    const double im = normal();
    return {re * 0.70710678118654752440, im * 0.70710678118654752440};
  }

  std::uint64_t raw() { return engine_(); }

private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

} // namespace risbeam
