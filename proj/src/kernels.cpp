#include "solitonlab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace solitonlab {

namespace {

// cot(w) for Im w >= 0 via q = exp(2iw), |q| <= 1:  cot = i(1+q)/(q-1).
Complex cot_upper(Complex w) {
  const Complex q = std::exp(2.0 * kI * w);
  return kI * (1.0 + q) / (q - 1.0);
}

Complex cot_stable(Complex w) {
  return (w.imag() >= 0.0) ? cot_upper(w) : -cot_upper(-w);
}

// 1/sin^2(w) = -4q/(q-1)^2 with q = exp(+-2iw); the formula is invariant
// under q -> 1/q, so pick the branch with |q| <= 1.
Complex inv_sin_sq(Complex w) {
  const Complex q = std::exp((w.imag() >= 0.0 ? 2.0 : -2.0) * kI * w);
  const Complex d = q - 1.0;
  return -4.0 * q / (d * d);
}

// cos(w)/sin^3(w) = -4i q(1+q)/(q-1)^3 for Im w >= 0 (odd in w).
Complex cos_over_sin_cubed(Complex w) {
  const bool flip = w.imag() < 0.0;
  if (flip) w = -w;
  const Complex q = std::exp(2.0 * kI * w);
  const Complex d = q - 1.0;
  const Complex r = -4.0 * kI * q * (1.0 + q) / (d * d * d);
  return flip ? -r : r;
}

// coth(w) for Re w >= 0 via q = exp(-2w), |q| <= 1:  coth = (1+q)/(1-q).
Complex coth_upper(Complex w) {
  const Complex q = std::exp(-2.0 * w);
  return (1.0 + q) / (1.0 - q);
}

Complex coth_stable(Complex w) {
  return (w.real() >= 0.0) ? coth_upper(w) : -coth_upper(-w);
}

// 1/sinh^2(w) = 4q/(1-q)^2, invariant under q -> 1/q.
Complex inv_sinh_sq(Complex w) {
  const Complex q = std::exp((w.real() >= 0.0 ? -2.0 : 2.0) * w);
  const Complex d = 1.0 - q;
  return 4.0 * q / (d * d);
}

// cosh(w)/sinh^3(w) = 4q(1+q)/(1-q)^3 for Re w >= 0 (odd in w).
Complex cosh_over_sinh_cubed(Complex w) {
  const bool flip = w.real() < 0.0;
  if (flip) w = -w;
  const Complex q = std::exp(-2.0 * w);
  const Complex d = 1.0 - q;
  const Complex r = 4.0 * q * (1.0 + q) / (d * d * d);
  return flip ? -r : r;
}

[[noreturn]] void throw_pole(const KernelCase& kc, Complex z, double dist) {
  std::ostringstream os;
  os << "kernel evaluation at z = (" << z.real() << ", " << z.imag()
     << ") lies within " << dist << " of a pole of the " << kc.name()
     << " case (guard radius " << kPoleGuard << ")";
  throw DomainError(os.str());
}

void check_pole(const KernelCase& kc, Complex z) {
  const double dist = pole_distance(kc, z);
  if (dist < kPoleGuard) throw_pole(kc, z, dist);
}

double scaled(double resid, double largest_term) {
  return resid / std::max(1.0, largest_term);
}

}  // namespace

KernelCase KernelCase::trigonometric(double L) {
  if (!(L > 0.0)) throw DomainError("KernelCase: period_L must be positive");
  return {CaseKind::Trigonometric, L, 0.0};
}

KernelCase KernelCase::hyperbolic(double delta) {
  if (!(delta > 0.0)) throw DomainError("KernelCase: delta must be positive");
  return {CaseKind::Hyperbolic, 0.0, delta};
}

const char* KernelCase::name() const {
  switch (kind) {
    case CaseKind::Rational: return "rational";
    case CaseKind::Trigonometric: return "trigonometric";
    case CaseKind::Hyperbolic: return "hyperbolic";
  }
  return "unknown";
}

double pole_distance(const KernelCase& kc, Complex z) {
  switch (kc.kind) {
    case CaseKind::Rational:
      return std::abs(z);
    case CaseKind::Trigonometric:
      // Poles at z = n L: reduce the real part modulo L.
      return std::hypot(std::remainder(z.real(), kc.period_L), z.imag());
    case CaseKind::Hyperbolic:
      // Poles at z = 2i delta n: reduce the imaginary part modulo 2 delta.
      return std::hypot(z.real(), std::remainder(z.imag(), 2.0 * kc.delta));
  }
  return 0.0;
}

double c_const(const KernelCase& kc) {
  switch (kc.kind) {
    case CaseKind::Rational: return 0.0;
    case CaseKind::Trigonometric: return sq(kPi / kc.period_L);
    case CaseKind::Hyperbolic: return -sq(kPi / (2.0 * kc.delta));
  }
  return 0.0;
}

Complex alpha(const KernelCase& kc, Complex z) {
  check_pole(kc, z);
  switch (kc.kind) {
    case CaseKind::Rational:
      return 1.0 / z;
    case CaseKind::Trigonometric: {
      const double s = kPi / kc.period_L;
      return s * cot_stable(s * z);
    }
    case CaseKind::Hyperbolic: {
      const double s = kPi / (2.0 * kc.delta);
      return s * coth_stable(s * z);
    }
  }
  return {};
}

Complex v_pot(const KernelCase& kc, Complex z) {
  check_pole(kc, z);
  switch (kc.kind) {
    case CaseKind::Rational:
      return 1.0 / (z * z);
    case CaseKind::Trigonometric: {
      const double s = kPi / kc.period_L;
      return s * s * inv_sin_sq(s * z);
    }
    case CaseKind::Hyperbolic: {
      const double s = kPi / (2.0 * kc.delta);
      return s * s * inv_sinh_sq(s * z);
    }
  }
  return {};
}

Complex v_pot_prime(const KernelCase& kc, Complex z) {
  check_pole(kc, z);
  switch (kc.kind) {
    case CaseKind::Rational:
      return -2.0 / (z * z * z);
    case CaseKind::Trigonometric: {
      const double s = kPi / kc.period_L;
      return -2.0 * s * s * s * cos_over_sin_cubed(s * z);
    }
    case CaseKind::Hyperbolic: {
      const double s = kPi / (2.0 * kc.delta);
      return -2.0 * s * s * s * cosh_over_sinh_cubed(s * z);
    }
  }
  return {};
}

double KernelIdentityResiduals::max_residual() const {
  return std::max({alpha_oddness, v_evenness, pythagorean, addition, periodicity});
}

KernelIdentityResiduals identity_residuals(const KernelCase& kc, Complex a,
                                           Complex b, Complex c) {
  KernelIdentityResiduals out;
  const double C = c_const(kc);
  const Complex z = a - b;

  const Complex aa = alpha(kc, z);
  const Complex am = alpha(kc, -z);
  out.alpha_oddness = scaled(std::abs(am + aa), std::max(std::abs(am), std::abs(aa)));

  const Complex va = v_pot(kc, z);
  const Complex vm = v_pot(kc, -z);
  out.v_evenness = scaled(std::abs(vm - va), std::max(std::abs(vm), std::abs(va)));

  out.pythagorean = scaled(std::abs(va - aa * aa - C),
                           std::max({std::abs(va), std::abs(aa * aa), std::abs(C)}));

  const Complex ab = alpha(kc, a - b);
  const Complex bc = alpha(kc, b - c);
  const Complex ca = alpha(kc, c - a);
  const Complex t1 = ab * bc, t2 = bc * ca, t3 = ca * ab;
  out.addition = scaled(std::abs(t1 + t2 + t3 - C),
                        std::max({std::abs(t1), std::abs(t2), std::abs(t3), std::abs(C)}));

  if (kc.kind == CaseKind::Hyperbolic) {
    const Complex shifted = alpha(kc, z + 2.0 * kI * kc.delta);
    out.periodicity =
        scaled(std::abs(shifted - aa), std::max(std::abs(shifted), std::abs(aa)));
  }
  return out;
}

}  // namespace solitonlab
