#pragma once

// Certified multi-soliton initial data and exact soliton fields for the spin
// Benjamin-Ono (sBO) and spin non-chiral intermediate-long-wave (sncILW)
// equations.
//
// A soliton is a pole-ansatz field built from one or two families of
// Calogero-Moser particles:
//
//   sBO      U(x)  =  i sum_j |e_j><f_j| alpha(x - a_j)
//                   - i sum_k |g_k><h_k| alpha(x - b_k)
//   sncILW   U(x)  =  i sum_j |e_j><f_j| alpha(x - a_j - i*delta/2)
//                   - i sum_k |g_k><h_k| alpha(x - b_k + i*delta/2)
//            V(x)  = -i sum_j |e_j><f_j| alpha(x - a_j + i*delta/2)
//                   + i sum_k |g_k><h_k| alpha(x - b_k - i*delta/2)
//
// where in the hermitian reduction the b-family is the conjugate mirror
// (b, g, h) = (a*, f, e) of the a-family and is not stored.  Such a field
// solves its equation exactly when the families evolve by the second-order
// spin Calogero-Moser flow, the initial data satisfy the first-order
// Backlund constraints (see scm.hpp), and every pole stays inside its strip:
//
//   sBO      Im a_j < 0 < Im b_k
//   sncILW   -3*delta/2 < Im a_j < -delta/2,   delta/2 < Im b_k < 3*delta/2
//
// Construction solves for the unknowns (kets e, bras h, velocities) given the
// poles and the other half of each spin pair; everything is linear.  The
// hermitian path solves a 2Nd x 2Nd block system for unit-velocity basis
// inputs and then a 2N x 2N system for the velocities; the general path
// solves one combined (N+M)(d+1) square system by minimum-norm SVD (the pure
// one-family configurations are genuinely under-determined, and the
// minimum-norm representative is the canonical gauge choice e_j ~ f_j).
//
// For unbalanced families the first-order constraints can be unsolvable for
// fully prescribed spins: with the trigonometric and hyperbolic kernels
// alpha(z) tends to a nonzero constant at complex infinity, so a lone b-pole
// facing N > 1 a-poles cannot shed its cross coupling and the linear system
// is rank-deficient with an inconsistent right-hand side (a d-1 dimensional
// obstruction; the rational kernel decays and stays consistent).  When that
// happens the general solver keeps the prescribed poles and a-side bras and
// completes the b-side kets as extra unknowns by a damped Gauss-Newton
// iteration on the full constraint map, which is holomorphic in all
// unknowns.  The returned state carries the adjusted kets; certification is
// re-checked on the result exactly as in the linear path.

#include <string>
#include <utility>
#include <vector>

#include "solitonlab/kernels.hpp"
#include "solitonlab/scm.hpp"
#include "solitonlab/spin_algebra.hpp"

namespace solitonlab {

enum class Equation { SpinBO, SpinNcILW };

const char* equation_name(Equation eq);

// A soliton pole left its validity strip (at construction or along the
// trajectory).
class StripViolationError : public DomainError {
 public:
  explicit StripViolationError(const std::string& what) : DomainError(what) {}
};

// Coincident poles or a singular/inconsistent constraint linear system.
class DegenerateConfigurationError : public DomainError {
 public:
  explicit DegenerateConfigurationError(const std::string& what)
      : DomainError(what) {}
};

// The velocity system obtained from the normalizations is singular.
class DegenerateVelocityError : public DomainError {
 public:
  explicit DegenerateVelocityError(const std::string& what)
      : DomainError(what) {}
};

// Solver output failed its own certification.
class ConstructionFailedError : public ConvergenceError {
 public:
  explicit ConstructionFailedError(const std::string& what)
      : ConvergenceError(what) {}
};

struct SolitonData {
  Equation equation = Equation::SpinBO;
  bool hermitian = true;

  // Families, velocities, and kernel case at t = 0.  In hermitian mode only
  // the a-family is stored and state0.poles_b etc. stay empty.
  ScmState state0;

  double certification_tol = 1e-10;

  // Condition-number estimates of the construction solves (1 when a closed
  // form was used).  Flagged above 1e12 but never rejected on conditioning
  // alone; certification has the final word.
  double condition_block = 1.0;
  double condition_velocity = 1.0;
  bool conditioning_flagged = false;

  // True when the b-side kets had to be adjusted away from the prescribed
  // values to reach a Backlund-consistent state (see the header comment);
  // spin_adjustment is the relative size of that adjustment.
  bool spins_completed = false;
  double spin_adjustment = 0.0;

  int n() const { return state0.n(); }
  int m() const { return state0.m(); }
  int d() const { return state0.d(); }
};

// First-order Backlund flow matching the data: hermitian or two-family, with
// cross-family shift +i*delta in the sncILW case.
FlowSpec soliton_flow(const SolitonData& data);

struct StripCheck {
  bool ok = true;
  double margin = 0.0;       // smallest signed distance to a strip boundary
  std::string violation;     // description of the worst offender when !ok
};

// Strip conditions of data.equation evaluated on the stored t=0 state or on a
// transported state.
StripCheck check_strips(const SolitonData& data);
StripCheck check_strips(const SolitonData& data, const ScmState& at);

struct CertifyReport {
  double normalization_residual = 0.0;  // max_j |<f_j|e_j> - 1|, both families
  double backlund_residual = 0.0;       // max full-vector Backlund residual
  double strip_margin = 0.0;
  bool strips_ok = true;
  double tolerance = 0.0;
  bool pass = false;
  std::string summary() const;
};

// Report-only evaluation of every constraint class the theorems require of
// the initial data.
CertifyReport certify(const SolitonData& data);

// Diagnostics of the raw linear solves.
struct BtSolveInfo {
  double condition_block = 1.0;
  double condition_velocity = 1.0;
  bool flagged = false;
  bool spins_completed = false;   // b-side kets adjusted by Gauss-Newton
  double spin_adjustment = 0.0;   // |g - g_prescribed| / |g_prescribed|
};

// Hermitian constraint solve: given N poles and N bras, returns the state
// carrying kets e_j and velocities v_j with <f_j|e_j> = 1 and the hermitian
// Backlund constraints satisfied.  cross_shift is added to the mirror-family
// alpha arguments (+i*delta for sncILW, 0 for sBO).
ScmState solve_backlund_state_hermitian(const KernelCase& kc,
                                        Complex cross_shift,
                                        const std::vector<Complex>& poles_a,
                                        const std::vector<BraVec>& bras_f,
                                        BtSolveInfo* info = nullptr);

// General two-family constraint solve: given both pole families, the a-side
// bras and the b-side kets, returns the state carrying kets e_j, bras h_k and
// both velocity sets.  M = 0 (or N = 0) is allowed.  If the prescribed kets
// admit no exact solution (unbalanced families, non-decaying kernel) they are
// adjusted by the Gauss-Newton completion and the result is reported in
// info->spins_completed / info->spin_adjustment.
ScmState solve_backlund_state(const KernelCase& kc, Complex cross_shift,
                              const std::vector<Complex>& poles_a,
                              const std::vector<BraVec>& bras_f,
                              const std::vector<Complex>& poles_b,
                              const std::vector<KetVec>& kets_g,
                              BtSolveInfo* info = nullptr);

// Equation-level wrappers: check strips and preconditions, run the matching
// raw solve, certify, and package.  Throw StripViolationError,
// DegenerateConfigurationError, DegenerateVelocityError, or
// ConstructionFailedError (with the residual report in the message).
SolitonData solve_initial_data(const KernelCase& kc, Equation eq,
                               const std::vector<Complex>& poles_a,
                               const std::vector<BraVec>& bras_f,
                               double certification_tol = 1e-10);

SolitonData solve_initial_data_general(const KernelCase& kc, Equation eq,
                                       const std::vector<Complex>& poles_a,
                                       const std::vector<BraVec>& bras_f,
                                       const std::vector<Complex>& poles_b,
                                       const std::vector<KetVec>& kets_g,
                                       double certification_tol = 1e-10);

// Families transported to time t by the first-order Backlund flow (poles move
// with the extracted velocities, spins by the second-order coupling).
ScmState state_at(const SolitonData& data, double t,
                  const IntegrateOptions& opts = {});

// Exact soliton fields.  The overloads taking an ScmState evaluate at an
// already-transported state (grid sweeps should integrate once per time);
// the (t, x) convenience overloads integrate internally.  Both check the
// strip conditions at the evaluation state and throw StripViolationError.
// Hermitian-mode results are hermitian exactly by construction.
SpinMatrix eval_sbo(const SolitonData& data, const ScmState& at, double x);
SpinMatrix eval_sbo(const SolitonData& data, double t, double x);

std::pair<SpinMatrix, SpinMatrix> eval_sncilw(const SolitonData& data,
                                              const ScmState& at, double x);
std::pair<SpinMatrix, SpinMatrix> eval_sncilw(const SolitonData& data,
                                              double t, double x);

// Closed-form one-soliton of the sBO equation (rational or trigonometric
// case; Im a0 < 0):
//
//   U(x,t) = (|f><f| / <f|f>) (i alpha(x - a0 - v t) - i alpha(x - a0* - v t))
//
// with v = -2i alpha(a0 - a0*), which is real and positive (right-moving).
double one_soliton_velocity(const KernelCase& kc, Complex a0);

struct OneSoliton {
  KernelCase kernel;
  Complex a0;
  double velocity = 0.0;
  SpinMatrix projector;  // |f><f| / <f|f>

  SpinMatrix operator()(double x, double t) const;
};

OneSoliton one_soliton(const KernelCase& kc, Complex a0, const BraVec& f);

// Gauge rescaling e_j -> c_j e_j, <f_j| -> <f_j|/c_j (and likewise g, h with
// the next m() entries of c).  Projectors and fields are invariant.
SolitonData gauge_rescaled(const SolitonData& data,
                           const std::vector<Complex>& c);

}  // namespace solitonlab
