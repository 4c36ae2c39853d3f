#pragma once

// The case-dependent special functions underlying the pole ansatz:
//
//   case Rational       alpha(z) = 1/z                      C = 0
//   case Trigonometric  alpha(z) = (pi/L)  cot(pi z / L)    C = (pi/L)^2
//   case Hyperbolic     alpha(z) = (pi/2d) coth(pi z / 2d)  C = -(pi/2d)^2
//
// together with the potential V = -alpha' = alpha^2 + C, its derivative
// V' = -2 alpha V, and a residual battery for the functional identities that
// the rest of the library leans on (oddness of alpha, evenness of V, the
// Pythagorean relation V = alpha^2 + C, the three-point addition identity,
// and 2i*delta-periodicity in the hyperbolic case).
//
// All evaluations use scaled exponentials so arguments with large |Im z|
// (resp. |Re z|) cannot overflow; soliton evaluation probes |Im z| up to
// 3*delta/2 and the integrators may wander further.

#include "solitonlab/common.hpp"

namespace solitonlab {

enum class CaseKind { Rational, Trigonometric, Hyperbolic };

struct KernelCase {
  CaseKind kind = CaseKind::Rational;
  double period_L = 0.0;  // Trigonometric only
  double delta = 0.0;     // Hyperbolic only

  static KernelCase rational() { return {CaseKind::Rational, 0.0, 0.0}; }
  static KernelCase trigonometric(double L);
  static KernelCase hyperbolic(double delta);

  const char* name() const;
};

// Distance from z to the nearest pole of alpha (the lattice 0, L*Z, or
// 2i*delta*Z per case).  Used by the pole guard and by collision monitors.
double pole_distance(const KernelCase& kc, Complex z);

// Guard radius below which alpha/V/V' evaluations raise DomainError instead
// of returning a huge value that downstream solvers would silently consume.
inline constexpr double kPoleGuard = 1e-12;

double c_const(const KernelCase& kc);
Complex alpha(const KernelCase& kc, Complex z);
Complex v_pot(const KernelCase& kc, Complex z);
Complex v_pot_prime(const KernelCase& kc, Complex z);

// alpha'' = -V' (since alpha' = -V); used by the closed-form transforms of
// soliton profiles.
inline Complex alpha_second(const KernelCase& kc, Complex z) {
  return -v_pot_prime(kc, z);
}

// Residuals of the kernel identities.  Each residual is reported absolutely
// when every term in the identity has magnitude <= 1, otherwise relative to
// the largest term, so a single threshold works across cases and argument
// scales.  The single-point identities are evaluated at z = a - b; the
// addition identity uses all three pairwise differences of (a, b, c).
struct KernelIdentityResiduals {
  double alpha_oddness = 0.0;  // alpha(-a) + alpha(a)
  double v_evenness = 0.0;     // V(-a) - V(a)
  double pythagorean = 0.0;    // V(a) - alpha(a)^2 - C
  double addition = 0.0;       // cyclic alpha products minus C
  double periodicity = 0.0;    // alpha(a + 2i*delta) - alpha(a); Hyperbolic only

  double max_residual() const;
};

KernelIdentityResiduals identity_residuals(const KernelCase& kc, Complex a,
                                           Complex b, Complex c);

}  // namespace solitonlab
