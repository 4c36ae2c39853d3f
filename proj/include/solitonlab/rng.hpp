#pragma once

// Deterministic random streams.  The generator core is mt19937_64; the
// variate transforms are implemented here (rather than via std::*_distribution)
// so that a given seed produces the same sequence on every standard library.
// Every randomized construction records its seed in the run manifest, making
// reruns reproducible byte for byte.

#include <cmath>
#include <cstdint>
#include <random>

#include "solitonlab/common.hpp"

namespace solitonlab {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller (one variate per call; the partner draw is
  // discarded to keep the stream position easy to reason about).
  double normal() {
    double u1 = uniform01();
    while (u1 == 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  Complex complex_normal() {
    const double re = normal();
    const double im = normal();
    return {re, im};
  }

  // Uniform over an axis-aligned box in the complex plane.
  Complex complex_in_box(double re_lo, double re_hi, double im_lo, double im_hi) {
    const double re = uniform(re_lo, re_hi);
    const double im = uniform(im_lo, im_hi);
    return {re, im};
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace solitonlab
