#pragma once

// Nonlocal operators used by the spin Benjamin-Ono and spin non-chiral
// intermediate-long-wave equations, each in two independent implementations:
//
//   * a principal-value quadrature oracle (trapezoid with global singularity
//     subtraction and the window's PV kernel integral in closed form), and
//   * a spectral fast path (Fourier multipliers on a zero-padded grid).
//
// Operators and conventions (delta > 0, beta = pi / (2 delta)):
//
//   (H f)(x)  = (1/pi)      PV Int  f(x') / (x' - x) dx'            (line)
//   (H f)(x)  = (1/L)       PV Int  cot(pi (x'-x)/L) f(x') dx'      (periodic)
//   (T f)(x)  = (1/2 delta) PV Int  coth(beta (x'-x)) f(x') dx'     (line)
//   (Tt f)(x) = (1/2 delta)    Int  tanh(beta (x'-x)) f(x') dx'     (line)
//
// Note the sign: this H is the NEGATIVE of the more common convention, so
// alpha(x - a) is an eigenfunction with eigenvalue +i when Im a < 0.  The
// corresponding multipliers (derived from these kernel Fourier transforms and
// validated against the quadrature oracle before use; see
// multiplier_agreement) are
//
//   H:  i sgn(k)      T:  i coth(k delta)      Tt:  i / sinh(k delta)
//
// with the k = 0 mode annihilated.  Tt's integral is only conditionally
// convergent; this module defines it by symmetric partial integrals
// [x - R, x + R] with R growing to the grid boundary, which the symmetric
// truncated window realizes directly.
//
// The block operator calT = [[T, Tt], [-Tt, -T]] acts on pairs (U, V).

#include <functional>
#include <utility>
#include <vector>

#include "solitonlab/kernels.hpp"
#include "solitonlab/spin_algebra.hpp"

namespace solitonlab {

enum class GridDomain { LineTruncated, Periodic };

// Uniformly sampled matrix-valued field.  Line-truncated grids cover
// [-half_width, half_width); periodic grids cover [-period/2, period/2).
struct GridField {
  GridDomain domain = GridDomain::LineTruncated;
  double half_width = 0.0;  // line-truncated only
  double period = 0.0;      // periodic only
  int dim = 1;              // matrix size d
  std::vector<SpinMatrix> values;

  // Line-truncated fields should decay below this Frobenius-norm floor at the
  // window boundary; transforms warn (via TransformDiagnostics) otherwise.
  double decay_floor = 1e-10;

  int n() const { return static_cast<int>(values.size()); }
  double length() const {
    return domain == GridDomain::Periodic ? period : 2.0 * half_width;
  }
  double dx() const { return length() / n(); }
  double node(int i) const { return -0.5 * length() + i * dx(); }
};

// Grid constructors (n_points must be a power of two) and a sampling helper.
GridField make_line_field(double half_width, int n_points, int d);
GridField make_periodic_field(double period, int n_points, int d);
void sample_field(GridField& field,
                  const std::function<SpinMatrix(double)>& fn);

// Largest boundary sample magnitude of the first/last grid cells (Frobenius).
double boundary_magnitude(const GridField& field);

struct TransformDiagnostics {
  double boundary_magnitude = 0.0;
  bool boundary_warning = false;  // line field above its decay floor
};

// Principal-value quadrature oracles.  hilbert_quadrature accepts both
// domains; t/ttilde require a line-truncated grid (the periodic variants
// belong to the elliptic case, which is out of scope).  ttilde throws
// DomainError when the input lacks the decay its conditionally convergent
// integral needs.
GridField hilbert_quadrature(const GridField& field,
                             TransformDiagnostics* diag = nullptr);
GridField t_quadrature(const GridField& field, double delta,
                       TransformDiagnostics* diag = nullptr);
GridField ttilde_quadrature(const GridField& field, double delta,
                            TransformDiagnostics* diag = nullptr);

// Spectral fast paths.  Periodic grids use the exact multiplier on the grid
// modes; line-truncated grids zero-pad by pad_factor (power of two) to push
// the periodization error of the window below the oracle agreement
// tolerance.
inline constexpr int kLinePadFactor = 256;

GridField hilbert(const GridField& field, TransformDiagnostics* diag = nullptr,
                  int pad_factor = kLinePadFactor);
GridField t_op(const GridField& field, double delta,
               TransformDiagnostics* diag = nullptr,
               int pad_factor = kLinePadFactor);
GridField ttilde_op(const GridField& field, double delta,
                    TransformDiagnostics* diag = nullptr,
                    int pad_factor = kLinePadFactor);

// Block operator calT applied to a pair of fields on the same grid:
// returns (T U + Tt V, -Tt U - T V).
enum class TransformPath { Spectral, Quadrature };

std::pair<GridField, GridField> calT_apply(const GridField& u,
                                           const GridField& v, double delta,
                                           TransformPath path =
                                               TransformPath::Spectral);

// Max sup-norm disagreement between the spectral and quadrature paths of the
// given operator over a battery of decaying smooth probe fields (Gaussians,
// Gaussian derivatives, a Lorentzian, and oscillatory envelopes), used to
// validate the derived multipliers.  T and Ttilde are compared on the
// mean-zero members only: their multipliers are singular at k = 0, so a
// mass-carrying truncated field develops a non-decaying plateau that the
// periodized fast path represents only up to a constant.  The equations only
// ever feed them x-derivatives, which carry no mass.
enum class TransformKind { Hilbert, T, Ttilde };

double multiplier_agreement(TransformKind kind, double delta, int n_points,
                            double half_width);

// Eigenfunction identities of the proofs.  HilbertPlus/Minus check
// H alpha'(. - a) = +/- i alpha'(. - a) (rational kernel on the line,
// trigonometric kernel on its period; eigenvalue +i needs Im a < 0, -i needs
// Im a > 0).  CalTPlus/Minus check calT A'_pm(. - a) = +/- i A'_pm(. - a)
// with A_pm(z) = (alpha(z -/+ i delta/2), -alpha(z +/- i delta/2)) in the
// hyperbolic case; + needs -3 delta/2 < Im a < -delta/2 and - needs
// delta/2 < Im a < 3 delta/2.  Returns the sup-norm residual of the identity
// against the quadrature oracle over the grid interior (the outer 10% of a
// truncated window is excluded on each side); the rational case adds the
// closed-form tail of the PV integral outside the window.
enum class EigenIdentity { HilbertPlus, HilbertMinus, CalTPlus, CalTMinus };

double eigenfunction_residual(const KernelCase& kc, Complex a,
                              EigenIdentity which, int n_points,
                              double half_width);

}  // namespace solitonlab
