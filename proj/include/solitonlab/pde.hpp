#pragma once

// PDE laboratory: residual evaluators for the spin Benjamin-Ono (sBO), spin
// non-chiral intermediate-long-wave (sncILW), and spin ILW (sILW) equations
// and their limits (matrix KdV, spin Heisenberg ferromagnet, half-wave map,
// charge/spin system, bidirectional sBO), a pseudo-spectral evolver for the
// periodic sBO equation, and Hamiltonian/invariant monitors.
//
// The equations, with H the Hilbert transform and (T, Ttilde) the
// intermediate-long-wave kernel pair of transforms.hpp:
//
//   sBO     U_t + {U, U_x} + H U_xx + i[U, H U_x] = 0
//   sncILW  U_t + {U, U_x} + T U_xx + Tt V_xx + i[U, T U_x + Tt V_x] = 0
//           V_t - {V, V_x} - T V_xx - Tt U_xx + i[V, T V_x + Tt U_x] = 0
//   sILW    U_t + {U, U_x} + U_x/delta + T U_xx + i[U, T U_x] = 0
//
// Soliton-backed evaluation has two independent routes.  Analytic mode uses
// the pole ansatz and its closed-form consequences: with P_j = |e_j><f_j|
// (poles a_j below the line/strip) and Q_k = |g_k><h_k| (poles b_k above),
//
//   sBO     U    =  i sum_j P_j alpha(x-a_j) - i sum_k Q_k alpha(x-b_k)
//           H U_x = -sum_j P_j alpha'(x-a_j) - sum_k Q_k alpha'(x-b_k)
//
// (alpha' appears with the same sign in both families because H maps each
// pole term to +/- i times itself depending on the half-plane), and for the
// sncILW pair with arguments shifted by -/+ i*delta/2,
//
//   T U_x + Tt V_x = -sum_j P_j alpha'(x-a_j-i*delta/2)
//                    -sum_k Q_k alpha'(x-b_k+i*delta/2)
//   T V_x + Tt U_x = -sum_j P_j alpha'(x-a_j+i*delta/2)
//                    -sum_k Q_k alpha'(x-b_k-i*delta/2).
//
// Sampled mode ignores all closed forms: it samples U (and V) on a grid,
// differentiates numerically, and applies the quadrature- or multiplier-based
// transforms, so the two modes cross-validate each other.  Time derivatives
// are never taken in closed form in either mode; they come from centered
// differencing of the Backlund trajectory (step 1e-5) with one Richardson
// extrapolation step.
//
// Residual norms are the maximum over grid nodes of the matrix Frobenius
// norm, with the outer 10% of nodes per side excluded on line-truncated
// domains (periodic grids use every node).

#include <array>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "solitonlab/solitons.hpp"
#include "solitonlab/transforms.hpp"

namespace solitonlab {

// ---------------------------------------------------------------------------
// Grid derivatives (shared numerical plumbing)
// ---------------------------------------------------------------------------

// Centered finite difference of order 8 (stencil half-width 4), entrywise.
// order is 1 or 2.  Periodic grids wrap; line grids clamp the stencil index
// at the ends (the affected nodes fall inside the excluded boundary band).
GridField derivative_fd8(const GridField& f, int order);

// Fourier differentiation, entrywise; exact for band-limited periodic
// fields.  Line grids are zero-padded by pad_factor to push the periodic
// images away; intended for fields that decay well inside the window.
// order is 1, 2, or 3.
GridField derivative_spectral(const GridField& f, int order,
                              int pad_factor = 16);

// Trapezoid integral of tr(field) and of tr(field^2) over the grid (exact
// spectral quadrature on periodic grids where the trapezoid rule is exact).
Complex integral_trace(const GridField& f);
Complex integral_trace_square(const GridField& f);

// ---------------------------------------------------------------------------
// FieldEvaluator: exact soliton fields and their derivatives
// ---------------------------------------------------------------------------

enum class EvalMode { Analytic, Sampled };

// Closure over certified soliton data.  Transports the state along the
// first-order Backlund flow (cached per requested time), evaluates the exact
// fields and their closed-form x-derivatives and transform images, and
// supplies trajectory-differenced time derivatives.
//
// Methods taking an ScmState expect a state produced by this evaluator's
// state() (grid sweeps should fetch the state once per time, outside any
// parallel loop; state() mutates a cache and is not thread-safe, everything
// else is const-safe).
class FieldEvaluator {
 public:
  explicit FieldEvaluator(SolitonData data, double time_step = 1e-5);

  const SolitonData& data() const { return data_; }
  double time_step() const { return time_step_; }

  // State transported to time t (cached; integrates from t = 0).
  const ScmState& state(double t) const;

  // Pre-populates the cache with the five states needed by time derivatives
  // at t (t, t +/- h, t +/- h/2).  Call before parallel grid sweeps.
  void prefetch(double t) const;

  // --- single-field family (sBO-type data) ---
  SpinMatrix u(const ScmState& at, double x) const;
  SpinMatrix u_x(const ScmState& at, double x) const;
  SpinMatrix u_xx(const ScmState& at, double x) const;
  SpinMatrix h_u_x(const ScmState& at, double x) const;   // H U_x
  SpinMatrix h_u_xx(const ScmState& at, double x) const;  // H U_xx
  SpinMatrix u_t(double t, double x) const;  // Richardson trajectory FD

  // --- two-field family (sncILW data) ---
  std::pair<SpinMatrix, SpinMatrix> uv(const ScmState& at, double x) const;
  std::pair<SpinMatrix, SpinMatrix> uv_x(const ScmState& at, double x) const;
  std::pair<SpinMatrix, SpinMatrix> uv_xx(const ScmState& at, double x) const;
  // (T U_x + Tt V_x, T V_x + Tt U_x) and their x-derivatives.
  std::pair<SpinMatrix, SpinMatrix> cal_images(const ScmState& at,
                                               double x) const;
  std::pair<SpinMatrix, SpinMatrix> cal_images_x(const ScmState& at,
                                                 double x) const;
  std::pair<SpinMatrix, SpinMatrix> uv_t(double t, double x) const;

  // Samples U (or the pair) on a grid matching the kernel case: periodic
  // grid of the kernel period for trigonometric data, line grid of the given
  // half-width otherwise.
  GridField sample_u(double t, int n_points, double half_width) const;
  std::pair<GridField, GridField> sample_uv(double t, int n_points,
                                            double half_width) const;

 private:
  SolitonData data_;
  double time_step_;
  mutable std::map<double, ScmState> cache_;

  // Pole/spin-projector view of a transported state, mirror family expanded.
  struct Terms;
  Terms terms(const ScmState& at) const;
};

// ---------------------------------------------------------------------------
// Residual evaluators
// ---------------------------------------------------------------------------

struct ResidualOptions {
  EvalMode mode = EvalMode::Analytic;
  int n_points = 512;
  double half_width = 60.0;  // line-domain window; ignored for periodic data
  // Transform route in sampled mode (analytic mode never applies a
  // transform).  The quadrature route is the fully independent oracle.
  TransformPath path = TransformPath::Quadrature;
};

struct ResidualReport {
  double sup = 0.0;          // interior sup of Frobenius norms
  Eigen::MatrixXd entry_sup; // d x d interior sup of each entry's modulus
  double boundary_magnitude = 0.0;  // decay diagnostic of the sampled field
};

// sup-norm residual of the sBO equation on a grid at time t.
ResidualReport sbo_residual(const FieldEvaluator& ev, double t,
                            const ResidualOptions& opts = {});

// Residual pair (U-equation, V-equation) of the sncILW system.
std::pair<ResidualReport, ResidualReport> sncilw_residual(
    const FieldEvaluator& ev, double t, const ResidualOptions& opts = {});

// sILW residual of a soliton-backed field (any sBO-type data; delta is the
// equation's own parameter, independent of the data).
ResidualReport silw_residual(const FieldEvaluator& ev, double delta, double t,
                             const ResidualOptions& opts = {});

// Generic sampled snapshot: a field and its time derivative on one grid.
struct FieldSnapshot {
  GridField u;
  GridField u_t;
};

// Residuals of generic sampled fields (numerical derivatives + transforms).
ResidualReport sbo_residual(const FieldSnapshot& f,
                            TransformPath path = TransformPath::Spectral);
ResidualReport silw_residual(const FieldSnapshot& f, double delta,
                             TransformPath path = TransformPath::Spectral);

// U_t + {U, U_x} + U_xxx (spectral x-derivatives; decaying or periodic).
ResidualReport matrix_kdv_residual(const FieldSnapshot& f);

// U_t + i[U, U_xx]; requires U^2 = I pointwise to 1e-8 (DomainError).
ResidualReport hf_residual(const FieldSnapshot& f);

// ---------------------------------------------------------------------------
// Periodic pseudo-spectral evolver (integrating-factor RK4)
// ---------------------------------------------------------------------------

struct EvolveOptions {
  double dt = 1e-4;
  bool dealias = true;        // 2/3-rule truncation of the quadratic terms
  double tail_tol = 1e-6;     // Fourier tail energy fraction -> failure
  int invariant_stride = 20;  // record invariants every this many steps
  std::vector<double> snapshot_times;  // snapped to the step grid; final
                                       // time is always included
};

struct EvolutionRun {
  double period = 0.0;
  double dt = 0.0;
  bool dealias = true;
  long steps = 0;

  std::vector<double> snapshot_times;  // actual (step-aligned) times
  std::vector<GridField> snapshots;

  // Invariant time series (series_time[i] labels the other series_*[i]).
  std::vector<double> series_time;
  std::vector<double> series_trace;        // Re integral tr U
  std::vector<double> series_trace_sq;     // Re integral tr U^2
  std::vector<double> series_hamiltonian;  // sBO Hamiltonian
  std::vector<double> series_herm_dev;     // sup_x |U - U^dag|_F
  std::vector<double> series_tail_frac;    // Fourier tail energy fraction
};

// Evolves U_t = -({U,U_x} + H U_xx + i[U,H U_x]) on the periodic grid of the
// initial field.  The linear part is handled exactly by the integrating
// factor; quadratic terms are evaluated pseudospectrally.  Throws
// ResolutionError when the Fourier tail energy fraction exceeds tail_tol.
EvolutionRun evolve_periodic_sbo(const GridField& initial, double t_end,
                                 const EvolveOptions& opts = {});

// Flagged variant: adds the sILW terms U_x/delta + (T - H) U_xx etc., i.e.
// evolves U_t = -({U,U_x} + U_x/delta + T U_xx + i[U,T U_x]) with the
// periodic-strip T multiplier.
EvolutionRun evolve_periodic_silw(const GridField& initial, double delta,
                                  double t_end, const EvolveOptions& opts = {});

// ---------------------------------------------------------------------------
// Hamiltonians
// ---------------------------------------------------------------------------

// integral of tr(U^3/3 + U HU_x/2).  Hermitian input makes it real; the
// imaginary part of the quadrature is reported through imag_diag when given.
double hamiltonian_sbo(const GridField& u, double* imag_diag = nullptr,
                       TransformPath path = TransformPath::Spectral);

// integral of tr(U^3/3 + V^3/3 + U T U_x/2 + V T V_x/2 + V Tt U_x/2
//                + U Tt V_x/2) on a line grid.
double hamiltonian_sncilw(const GridField& u, const GridField& v, double delta,
                          double* imag_diag = nullptr,
                          TransformPath path = TransformPath::Spectral);

// ---------------------------------------------------------------------------
// Charge/spin decomposition (d = 2 hermitian)
// ---------------------------------------------------------------------------

// U = (u/2)(I + m . sigma) splits the sBO equation into a charge equation
//
//   u_t + (1+|m|^2) u u_x + (m . m_x) u^2 + H u_xx = 0
//
// and a spin equation
//
//   m_t + u_x m (1-|m|^2) + u [m_x - m (m . m_x)]
//       + (1/u)[H(um)_xx - m H u_xx] - m ^ H(um)_x = 0.
//
// All component fields are scalar (d = 1) grids on one common grid.
struct ChargeSpinField {
  GridField u;
  std::array<GridField, 3> m;
  GridField u_t;
  std::array<GridField, 3> m_t;
};

struct ChargeSpinReport {
  double residual_u = 0.0;   // charge-equation interior sup
  double residual_m = 0.0;   // spin-equation interior sup (Euclidean norm)
  double min_abs_u = 0.0;    // smallest |u| among evaluated nodes
  double usable_fraction = 0.0;  // nodes clearing the charge floor
  // sBO residual of the recomposed matrix field (consistency oracle).
  double recomposed_sbo_residual = 0.0;
};

// Evaluates both residual lines.  Nodes where |u| < u_floor_rel * sup|u| are
// excluded from the spin equation (it divides by u); if fewer than 5% of the
// interior nodes survive, the decomposition is singular -> DomainError.
ChargeSpinReport charge_spin_residual(const ChargeSpinField& f,
                                      TransformPath path = TransformPath::Spectral,
                                      double u_floor_rel = 1e-6);

// Samples a d = 2 hermitian soliton evaluator and decomposes it into
// (u, m, u_t, m_t) fields (trajectory-differenced time derivatives).
ChargeSpinField decompose_soliton(const FieldEvaluator& ev, double t,
                                  int n_points, double half_width);

// ---------------------------------------------------------------------------
// Half-wave map limit
// ---------------------------------------------------------------------------

// Unit 3-vector field m and its time derivative on one grid.
struct SpinVectorField {
  std::array<GridField, 3> m;
  std::array<GridField, 3> m_t;
};

// Residual of m_t = m ^ H m_x.  Requires |m| = 1 pointwise to 1e-8
// (DomainError otherwise).
double hwm_residual(const SpinVectorField& f,
                    TransformPath path = TransformPath::Spectral);

struct HwmLimitReport {
  std::vector<double> lambdas;
  std::vector<double> residuals;  // full scaled-equation residual
  std::vector<double> ratios;     // residuals[i] / residuals[i+1]
  double h_u_xx_sup = 0.0;        // size of the 1/(2 lambda) term's field
};

// Probes the scaled family U_t + (1/2){U,U_x} + (1/(2 lambda)) H U_xx
// + (i/2)[U, H U_x] = 0 on an internal unit-sphere-valued profile m(x) (so
// U = m.sigma satisfies U^2 = I and {U,U_x} = 0 exactly) moving with the
// half-wave-map velocity m_t = m ^ H m_x.  The residual is then the pure
// 1/(2 lambda) dispersion term and must decay like 1/lambda across the list.
HwmLimitReport hwm_limit_probe(const std::vector<double>& lambdas,
                               int n_points = 1024, double half_width = 30.0);

// ---------------------------------------------------------------------------
// Local limits of the sILW equation (delta -> 0 scalings)
// ---------------------------------------------------------------------------

struct LocalLimitReport {
  std::vector<double> deltas;
  // sup | T f_x + f/delta - (delta/3) f_xx | on a unit Gaussian: the kernel
  // expansion remainder, O(delta^3).
  std::vector<double> texpand_remainders;
  // Deviation of the KdV-scaled sILW operator from the matrix-KdV operator
  // on a fixed noncommuting decaying field: O(delta).
  std::vector<double> kdv_deviations;
  // Deviation of the HF-scaled sILW operator from the spin-HF operator on a
  // fixed anticommutator-free decaying field: O(delta).
  std::vector<double> hf_deviations;
};

// The scalings substituted into the sILW equation (time-independent parts):
//   KdV branch  (3/delta^2) U_x + (3/delta) T U_xx + i[U, T U_x]
//               -> U_xxx              as delta -> 0
//   HF branch   (3/delta){U,U_x} + (3/delta) U_x + 3 T U_xx
//               + (3/delta) i[U, T U_x]  -> i[U, U_xx]
// Every transform uses the spectral route: the probe deltas under-resolve
// any fixed quadrature grid while the multiplier stays exact.
LocalLimitReport local_limit_probe(const std::vector<double>& deltas,
                                   int n_points = 2048,
                                   double half_width = 30.0);

// ---------------------------------------------------------------------------
// Bidirectional sBO system (complex z-plane check)
// ---------------------------------------------------------------------------

struct BidirectionalOptions {
  int nx = 21;        // patch resolution (real direction)
  int ny = 13;        // patch resolution (imaginary direction)
  double re_lo = 0.0, re_hi = 0.0;  // patch box; re_lo == re_hi -> derived
  double im_lo = -1.2, im_hi = 1.2; // from the kernel period
  double pole_margin = 0.35;  // exclusion radius around every pole
  double time_step = 1e-5;
};

struct BidirectionalReport {
  double residual = 0.0;       // sup over included patch nodes
  int included_nodes = 0;
  int excluded_nodes = 0;      // inside some pole's exclusion zone
  double min_pole_distance = 0.0;  // over included nodes
};

// For a two-family trigonometric state on the first-order Backlund flow,
// builds U0(z) = -i sum_k |g_k><h_k| alpha(z-b_k), U1(z) = +i sum_j
// |e_j><f_j| alpha(z-a_j), U = U0+U1, Utld = U1-U0 and evaluates the
// residual of  U_t + {U, U_z} + i Utld_zz - [U, Utld_z]  on a rectangular
// patch in the complex z-plane, skipping nodes within pole_margin of any
// pole.  The orientation Utld = U1-U0 makes i Utld_z the analytic
// continuation of +H U_x off the real axis, which is the combination
// Backlund trajectories satisfy (the opposite orientation fails at O(1)
// already in the scalar case).  Holomorphic z-derivatives are closed-form;
// the time derivative comes from centered differencing of the trajectory.
BidirectionalReport bidirectional_residual(const ScmState& state,
                                           const BidirectionalOptions& opts = {});

}  // namespace solitonlab
