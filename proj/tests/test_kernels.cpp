#include "solitonlab/kernels.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "solitonlab/rng.hpp"

using namespace solitonlab;

namespace {

// Richardson-extrapolated central difference, step h: error O(h^4).
Complex fd_derivative(const std::function<Complex(Complex)>& f, Complex z, double h) {
  const Complex d1 = (f(z + h) - f(z - h)) / (2.0 * h);
  const Complex d2 = (f(z + 0.5 * h) - f(z - 0.5 * h)) / h;
  return (4.0 * d2 - d1) / 3.0;
}

Complex naive_alpha(const KernelCase& kc, Complex z) {
  switch (kc.kind) {
    case CaseKind::Rational: return 1.0 / z;
    case CaseKind::Trigonometric: {
      const Complex w = kPi * z / kc.period_L;
      return (kPi / kc.period_L) * std::cos(w) / std::sin(w);
    }
    case CaseKind::Hyperbolic: {
      const Complex w = kPi * z / (2.0 * kc.delta);
      return (kPi / (2.0 * kc.delta)) * std::cosh(w) / std::sinh(w);
    }
  }
  return {};
}

}  // namespace

TEST_CASE("alpha: closed-form values") {
  CHECK(std::abs(alpha(KernelCase::rational(), {2.0, 0.0}) - Complex{0.5, 0.0}) < 1e-15);
  // cot(i pi/2) = -i tanh(pi/2)... coth(i pi/2) = cos/sin-type zero: coth(i pi/2) = 0.
  CHECK(std::abs(alpha(KernelCase::hyperbolic(1.0), {0.0, 1.0})) < 1e-15);
  // L = 2: alpha(1/2) = (pi/2) cot(pi/4) = pi/2.
  CHECK(std::abs(alpha(KernelCase::trigonometric(2.0), {0.5, 0.0}) -
                 Complex{kPi / 2.0, 0.0}) < 1e-14);
  // 1/(1+i) = (1-i)/2.
  CHECK(std::abs(alpha(KernelCase::rational(), {1.0, 1.0}) - Complex{0.5, -0.5}) < 1e-15);
}

TEST_CASE("v_pot: closed-form values and Pythagorean relation") {
  CHECK(std::abs(v_pot(KernelCase::rational(), {2.0, 0.0}) - Complex{0.25, 0.0}) < 1e-15);
  // L = 2, z = 1: V = (pi/2)^2 / sin^2(pi/2) = pi^2/4.
  CHECK(std::abs(v_pot(KernelCase::trigonometric(2.0), {1.0, 0.0}) -
                 Complex{kPi * kPi / 4.0, 0.0}) < 1e-13);
  // Random hyperbolic point: V = alpha^2 + C with C = -(pi/2)^2 at delta = 1.
  const auto kc = KernelCase::hyperbolic(1.0);
  const Complex z{0.3, 0.2};
  const Complex lhs = v_pot(kc, z);
  const Complex rhs = alpha(kc, z) * alpha(kc, z) - sq(kPi / 2.0);
  CHECK(std::abs(lhs - rhs) < 1e-13 * std::abs(lhs));
}

TEST_CASE("v_pot_prime: closed-form values and finite-difference oracle") {
  CHECK(std::abs(v_pot_prime(KernelCase::rational(), {1.0, 0.0}) - Complex{-2.0, 0.0}) <
        1e-14);
  CHECK(std::abs(v_pot_prime(KernelCase::rational(), {-1.0, 0.0}) - Complex{2.0, 0.0}) <
        1e-14);

  const std::vector<KernelCase> cases = {KernelCase::rational(),
                                         KernelCase::trigonometric(3.0),
                                         KernelCase::hyperbolic(1.0)};
  Rng rng(20260815);
  for (const auto& kc : cases) {
    // Spot value from the spec-level example: hyperbolic delta=1, z=0.7.
    for (int i = 0; i < 100; ++i) {
      const Complex z = rng.complex_in_box(0.3, 2.0, -0.8, 0.8);
      const Complex fd = fd_derivative([&](Complex w) { return v_pot(kc, w); }, z, 1e-5);
      const Complex an = v_pot_prime(kc, z);
      CHECK(std::abs(fd - an) < 1e-8 * std::max(1.0, std::abs(an)));
      // alpha' = -V via the same oracle.
      const Complex fda = fd_derivative([&](Complex w) { return alpha(kc, w); }, z, 1e-5);
      CHECK(std::abs(fda + v_pot(kc, z)) < 1e-8 * std::max(1.0, std::abs(fda)));
    }
  }
}

TEST_CASE("identity battery: 1000 random triples per case") {
  const std::vector<KernelCase> cases = {KernelCase::rational(),
                                         KernelCase::trigonometric(5.0),
                                         KernelCase::hyperbolic(0.7)};
  Rng rng(42);
  for (const auto& kc : cases) {
    double worst = 0.0;
    int done = 0;
    while (done < 1000) {
      const Complex a = rng.complex_in_box(-3, 3, -3, 3);
      const Complex b = rng.complex_in_box(-3, 3, -3, 3);
      const Complex c = rng.complex_in_box(-3, 3, -3, 3);
      // Keep all evaluation arguments comfortably away from the pole lattice.
      const double clearance =
          std::min({pole_distance(kc, a), pole_distance(kc, a - b),
                    pole_distance(kc, b - c), pole_distance(kc, c - a)});
      if (clearance < 1e-3) continue;
      worst = std::max(worst, identity_residuals(kc, a, b, c).max_residual());
      ++done;
    }
    INFO("case " << kc.name());
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("addition identity: exact rational spot check") {
  // a=0, b=1, c=3: 1/( -1)*1/(-2) + 1/(-2)*1/3 + 1/3*1/(-1) = 1/2 - 1/6 - 1/3 = 0.
  const auto r = identity_residuals(KernelCase::rational(), {0, 0}, {1, 0}, {3, 0});
  CHECK(r.addition < 1e-15);
}

TEST_CASE("hyperbolic case is 2i*delta periodic") {
  const auto kc = KernelCase::hyperbolic(0.5);
  const auto r = identity_residuals(kc, {1.0, 0.1}, {0.4, -0.2}, {-0.9, 0.3});
  CHECK(r.periodicity < 1e-13);
}

TEST_CASE("stable evaluation far from the real axis and for huge arguments") {
  const auto trig = KernelCase::trigonometric(4.0);
  const auto hyp = KernelCase::hyperbolic(1.0);

  // Large |Im z| (trig) / |Re z| (hyp): no overflow, limits correct.
  CHECK(std::isfinite(std::abs(alpha(trig, {1.0, 800.0}))));
  CHECK(std::abs(alpha(trig, {1.0, 800.0}) - Complex{0.0, -kPi / 4.0}) < 1e-14);
  CHECK(std::abs(alpha(hyp, {1e5, 0.3}) - Complex{kPi / 2.0, 0.0}) < 1e-14);
  CHECK(std::abs(v_pot(hyp, {1e5, 0.3})) < 1e-14);

  // Agreement with the naive formulas where those are well-conditioned.
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const Complex z = rng.complex_in_box(0.2, 1.5, -1.4, 1.4);
    for (const auto& kc : {trig, hyp}) {
      if (pole_distance(kc, z) < 1e-2) continue;
      const Complex a = alpha(kc, z), n = naive_alpha(kc, z);
      CHECK(std::abs(a - n) < 1e-13 * std::max(1.0, std::abs(n)));
    }
  }
}

TEST_CASE("pole guard raises DomainError near every lattice") {
  CHECK_THROWS_AS(alpha(KernelCase::rational(), {1e-13, 0.0}), DomainError);
  CHECK_THROWS_AS(v_pot(KernelCase::trigonometric(2.0), {4.0 + 1e-13, 0.0}), DomainError);
  CHECK_THROWS_AS(v_pot_prime(KernelCase::hyperbolic(0.5), {0.0, 1.0 + 1e-13}),
                  DomainError);
  // Just outside the guard radius: evaluates.
  CHECK_NOTHROW(alpha(KernelCase::rational(), {1e-11, 0.0}));
}
