#include "solitonlab/acceptance.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>
#include <vector>

#include "solitonlab/kernels.hpp"
#include "solitonlab/pde.hpp"
#include "solitonlab/rng.hpp"
#include "solitonlab/scm.hpp"
#include "solitonlab/solitons.hpp"
#include "solitonlab/transforms.hpp"

namespace solitonlab {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

struct Detail {
  std::string text;
  void add(const char* key, double v) {
    if (!text.empty()) text += " ";
    text += std::string(key) + "=" + num(v);
  }
};

BraVec bra2(Complex a, Complex b) {
  BraVec v(2);
  v << a, b;
  return v;
}

BraVec bra1(Complex a) {
  BraVec v(1);
  v << a;
  return v;
}

KetVec random_spin(Rng& rng, int d) {
  KetVec v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.complex_normal();
  return v;
}

double drift(const std::vector<double>& s) {
  double lo = s.front(), hi = s.front();
  for (double v : s) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return hi - lo;
}

// Frozen hermitian rational spin-BO datasets (d = 2).
SolitonData rational_soliton(int n_solitons) {
  const KernelCase kc = KernelCase::rational();
  switch (n_solitons) {
    case 1:
      return solve_initial_data(kc, Equation::SpinBO, {Complex{0.0, -0.9}},
                                {bra2(1.0, 0.4)});
    case 2:
      return solve_initial_data(kc, Equation::SpinBO,
                                {Complex{-1.3, -0.8}, Complex{1.1, -1.1}},
                                {bra2(1.0, 0.2), bra2(0.3, 1.0)});
    default:
      return solve_initial_data(
          kc, Equation::SpinBO,
          {Complex{-2.0, -0.9}, Complex{0.1, -1.2}, Complex{2.2, -0.75}},
          {bra2(1.0, 0.1), bra2(0.5, 0.9), bra2(-0.4, 1.0)});
  }
}

// Frozen spin non-chiral ILW datasets at delta = 1, poles mid-strip.
SolitonData sncilw_soliton(int n_solitons) {
  const KernelCase kc = KernelCase::hyperbolic(1.0);
  if (n_solitons == 1)
    return solve_initial_data(kc, Equation::SpinNcILW, {Complex{0.0, -1.0}},
                              {bra2(1.0, 0.35)});
  return solve_initial_data(kc, Equation::SpinNcILW,
                            {Complex{-2.0, -1.0}, Complex{2.0, -0.95}},
                            {bra2(1.0, 0.2), bra2(0.4, 1.0)});
}

SolitonData sncilw_pair() {
  return solve_initial_data_general(
      KernelCase::hyperbolic(1.0), Equation::SpinNcILW, {Complex{-1.0, -1.0}},
      {bra2(1.0, 0.3)}, {Complex{1.0, 1.0}}, {bra2(0.2, 1.0)});
}

SolitonData trig_soliton() {
  return solve_initial_data(KernelCase::trigonometric(2.0 * kPi),
                            Equation::SpinBO, {Complex{0.0, -0.8}},
                            {bra2(1.0, 0.5)});
}

template <typename Fn>
CriterionResult run_criterion(int index, const char* name, Fn body) {
  CriterionResult r;
  r.index = index;
  r.name = name;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return r;
}

// 1. Kernel identity battery: 1000 random triples per kernel case, every
// identity residual below 1e-12.
void c1_kernel_identities(CriterionResult& r, std::uint64_t seed) {
  const std::vector<KernelCase> cases = {KernelCase::rational(),
                                         KernelCase::trigonometric(5.0),
                                         KernelCase::hyperbolic(0.7)};
  Rng rng(seed + 1);
  double worst = 0.0;
  for (const auto& kc : cases) {
    int done = 0;
    while (done < 1000) {
      const Complex a = rng.complex_in_box(-3, 3, -3, 3);
      const Complex b = rng.complex_in_box(-3, 3, -3, 3);
      const Complex c = rng.complex_in_box(-3, 3, -3, 3);
      const double clearance =
          std::min({pole_distance(kc, a), pole_distance(kc, a - b),
                    pole_distance(kc, b - c), pole_distance(kc, c - a)});
      if (clearance < 1e-3) continue;
      worst = std::max(worst, identity_residuals(kc, a, b, c).max_residual());
      ++done;
    }
  }
  Detail det;
  det.add("max_residual", worst);
  det.add("tol", 1e-12);
  r.detail = det.text + " (1000 triples x 3 cases)";
  r.pass = worst < 1e-12;
}

// 2. Randomized first-order Backlund data integrated over t in [0,1]
// satisfies the second-order spin Calogero-Moser equations.
void c2_backlund_certificates(CriterionResult& r, std::uint64_t seed) {
  const std::array<std::pair<int, int>, 4> sizes = {
      {{1, 1}, {2, 2}, {2, 1}, {1, 0}}};
  const std::vector<KernelCase> cases = {KernelCase::rational(),
                                         KernelCase::trigonometric(2.0 * kPi),
                                         KernelCase::hyperbolic(1.0)};
  Rng rng(seed + 2);
  double worst_flow = 0.0, worst_accel = 0.0, worst_drift = 0.0;
  bool all = true;
  int count = 0;
  int redraws = 0;

  // A draw is accepted only if the solved spins stay moderate: the
  // constraint solve can return near-degenerate data (spin norms of 10+,
  // condition numbers in the thousands) whose algebraic identities amplify
  // rounding noise far beyond the certificate tolerance even though the
  // identities hold exactly.  Healthy draws measure spin norms below ~3.
  const auto draw_state = [&](const KernelCase& kc, const Complex& shift,
                              int n_a, int n_b, int d) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      std::vector<Complex> poles_a(n_a), poles_b(n_b);
      std::vector<BraVec> bras(n_a);
      std::vector<KetVec> kets(n_b);
      for (int j = 0; j < n_a; ++j) {
        poles_a[j] = Complex(-3.0 + 6.0 * (j + 0.5) / n_a +
                                 rng.uniform(-0.3, 0.3),
                             -0.75 - 0.5 * rng.uniform01());
        bras[j] = random_spin(rng, d);
      }
      for (int k = 0; k < n_b; ++k) {
        poles_b[k] = Complex(-3.0 + 6.0 * (k + 0.5) / n_b +
                                 rng.uniform(-0.3, 0.3),
                             0.75 + 0.5 * rng.uniform01());
        kets[k] = random_spin(rng, d);
      }
      ScmState s = solve_backlund_state(kc, shift, poles_a, bras, poles_b, kets);
      double spin_scale = 0.0;
      for (const auto& e : s.kets_e) spin_scale = std::max(spin_scale, e.norm());
      for (const auto& h : s.bras_h) spin_scale = std::max(spin_scale, h.norm());
      if (spin_scale < 6.0) return s;
      ++redraws;
    }
    throw ConvergenceError(
        "acceptance: no well-conditioned Backlund draw in 64 attempts");
  };

  for (const auto& kc : cases) {
    const Complex shift =
        kc.kind == CaseKind::Hyperbolic ? kI * kc.delta : Complex{0.0, 0.0};
    for (const auto& [n_a, n_b] : sizes) {
      for (int d = 1; d <= 3; ++d) {
        const ScmState s = draw_state(kc, shift, n_a, n_b, d);
        const BtCertificate cert = certify_proposition_BT(
            s, {FlowKind::FirstOrderBT, shift}, 1.0, 1e-6);
        worst_flow = std::max(worst_flow, cert.max_flow_residual);
        worst_accel = std::max(worst_accel, cert.max_accel_deviation);
        worst_drift = std::max(worst_drift, cert.max_constraint_drift);
        all = all && cert.pass;
        ++count;
      }
    }
  }
  Detail det;
  det.add("configs", count);
  det.add("redraws", redraws);
  det.add("max_flow_residual", worst_flow);
  det.add("max_accel_deviation", worst_accel);
  det.add("max_constraint_drift", worst_drift);
  det.add("tol", 1e-6);
  r.detail = det.text;
  r.pass = all;
}

// 3. Constraint-solver construction for N <= 3, d <= 3 certifies below
// 1e-10; one-soliton velocities match their closed forms to 1e-12.
void c3_construction(CriterionResult& r, std::uint64_t seed) {
  const std::vector<KernelCase> cases = {KernelCase::rational(),
                                         KernelCase::trigonometric(2.0 * kPi)};
  Rng rng(seed + 3);
  double worst_norm = 0.0, worst_bt = 0.0;
  bool all = true;
  for (const auto& kc : cases) {
    for (int n = 1; n <= 3; ++n) {
      for (int d = 1; d <= 3; ++d) {
        std::vector<Complex> poles(n);
        std::vector<BraVec> bras(n);
        for (int j = 0; j < n; ++j) {
          poles[j] = Complex(-2.1 + 4.2 * (j + 0.5) / n +
                                 rng.uniform(-0.3, 0.3),
                             -0.55 - 0.7 * rng.uniform01());
          bras[j] = random_spin(rng, d);
        }
        const SolitonData data =
            solve_initial_data(kc, Equation::SpinBO, poles, bras);
        const CertifyReport rep = certify(data);
        worst_norm = std::max(worst_norm, rep.normalization_residual);
        worst_bt = std::max(worst_bt, rep.backlund_residual);
        all = all && rep.pass;
      }
    }
  }

  const SolitonData one_r =
      solve_initial_data(KernelCase::rational(), Equation::SpinBO,
                         {Complex{0.2, -0.9}}, {bra2(1.0, 0.4)});
  const double v_rational_err =
      std::abs(one_r.state0.vels_a[0] - Complex{-1.0 / (-0.9)});

  const double period = 2.0 * kPi;
  const SolitonData one_t =
      solve_initial_data(KernelCase::trigonometric(period), Equation::SpinBO,
                         {Complex{0.4, -0.8}}, {bra2(1.0, 0.5)});
  const double v_trig = -(2.0 * kPi / period) /
                        std::tanh(2.0 * kPi * (-0.8) / period);
  const double v_trig_err = std::abs(one_t.state0.vels_a[0] - Complex{v_trig});

  Detail det;
  det.add("max_normalization_residual", worst_norm);
  det.add("max_backlund_residual", worst_bt);
  det.add("tol", 1e-10);
  det.add("v1_rational_err", v_rational_err);
  det.add("v1_trig_err", v_trig_err);
  det.add("v1_tol", 1e-12);
  r.detail = det.text;
  r.pass = all && worst_norm < 1e-10 && worst_bt < 1e-10 &&
           v_rational_err < 1e-12 && v_trig_err < 1e-12;
}

// 4. Certified 1/2/3-soliton fields: analytic-route residual < 1e-8 on a
// 512-point grid at t in {0, 0.5, 1}; quadrature-sampled route < 1e-5.
void c4_sbo_residuals(CriterionResult& r) {
  double worst_analytic = 0.0, worst_sampled = 0.0;
  for (int n = 1; n <= 3; ++n) {
    FieldEvaluator ev(rational_soliton(n));
    ResidualOptions analytic;
    analytic.mode = EvalMode::Analytic;
    analytic.n_points = 512;
    analytic.half_width = 60.0;
    for (double t : {0.0, 0.5, 1.0})
      worst_analytic = std::max(worst_analytic, sbo_residual(ev, t, analytic).sup);

    ResidualOptions sampled;
    sampled.mode = EvalMode::Sampled;
    sampled.path = TransformPath::Quadrature;
    sampled.n_points = 8192;
    sampled.half_width = 100.0;
    worst_sampled = std::max(worst_sampled, sbo_residual(ev, 0.5, sampled).sup);
  }
  Detail det;
  det.add("max_analytic", worst_analytic);
  det.add("analytic_tol", 1e-8);
  det.add("max_sampled", worst_sampled);
  det.add("sampled_tol", 1e-5);
  r.detail = det.text;
  r.pass = worst_analytic < 1e-8 && worst_sampled < 1e-5;
}

// 5. Certified spin non-chiral ILW solitons (hermitian N=1,2 and a
// non-hermitian pair) against the quadrature transforms at n = 8192.
void c5_sncilw_residuals(CriterionResult& r) {
  double worst = 0.0;
  for (int which = 1; which <= 3; ++which) {
    const SolitonData data = which == 3 ? sncilw_pair() : sncilw_soliton(which);
    FieldEvaluator ev(data);
    ResidualOptions sampled;
    sampled.mode = EvalMode::Sampled;
    sampled.path = TransformPath::Quadrature;
    sampled.n_points = 8192;
    sampled.half_width = 30.0;
    const auto [ru, rv] = sncilw_residual(ev, 0.05, sampled);
    worst = std::max({worst, ru.sup, rv.sup});
  }
  Detail det;
  det.add("max_residual", worst);
  det.add("tol", 1e-6);
  r.detail = det.text + " (3 datasets, delta=1, t=0.05)";
  r.pass = worst < 1e-6;
}

// 6. Eigenfunction identities of the Hilbert and ILW transforms at n = 4096.
void c6_eigenfunctions(CriterionResult& r) {
  double worst = 0.0;
  worst = std::max(worst, eigenfunction_residual(
                              KernelCase::rational(), Complex{0.0, -0.5},
                              EigenIdentity::HilbertPlus, 4096, 200.0));
  worst = std::max(worst, eigenfunction_residual(
                              KernelCase::rational(), Complex{0.4, 0.7},
                              EigenIdentity::HilbertMinus, 4096, 200.0));
  worst = std::max(worst, eigenfunction_residual(
                              KernelCase::trigonometric(2.0 * kPi),
                              Complex{0.3, -0.4},
                              EigenIdentity::HilbertPlus, 4096, 0.0));
  worst = std::max(worst, eigenfunction_residual(
                              KernelCase::hyperbolic(1.0), Complex{0.0, -1.0},
                              EigenIdentity::CalTPlus, 4096, 50.0));
  worst = std::max(worst, eigenfunction_residual(
                              KernelCase::hyperbolic(0.5), Complex{0.2, 0.55},
                              EigenIdentity::CalTMinus, 4096, 50.0));
  Detail det;
  det.add("max_residual", worst);
  det.add("tol", 1e-6);
  r.detail = det.text + " (5 identities)";
  r.pass = worst < 1e-6;
}

// 7. Spectral evolver at n = 512, dt = 1e-4 reproduces the exact periodic
// one-soliton at t = 0.5 and conserves the invariants.
void c7_evolver(CriterionResult& r) {
  const SolitonData data = trig_soliton();
  FieldEvaluator ev(data);
  const GridField initial = ev.sample_u(0.0, 512, 0.0);

  EvolveOptions opts;
  opts.dt = 1e-4;
  opts.snapshot_times = {0.5};
  const EvolutionRun run = evolve_periodic_sbo(initial, 0.5, opts);

  const ScmState& at = ev.state(0.5);
  double sup = 0.0;
  for (int i = 0; i < initial.n(); ++i)
    sup = std::max(sup, (run.snapshots.back().values[i] -
                         ev.u(at, initial.node(i)))
                            .norm());

  const double trace_rel =
      drift(run.series_trace) / std::abs(run.series_trace.front());
  const double trace_sq_rel =
      drift(run.series_trace_sq) / std::abs(run.series_trace_sq.front());
  const double ham_rel =
      drift(run.series_hamiltonian) / std::abs(run.series_hamiltonian.front());

  Detail det;
  det.add("sup_diff", sup);
  det.add("sup_tol", 1e-6);
  det.add("trace_drift_rel", trace_rel);
  det.add("trace_sq_drift_rel", trace_sq_rel);
  det.add("hamiltonian_drift_rel", ham_rel);
  det.add("drift_tol", 1e-6);
  r.detail = det.text;
  r.pass = sup < 1e-6 && trace_rel < 1e-6 && trace_sq_rel < 1e-6 &&
           ham_rel < 1e-6;
}

// 8. Reductions: d = 1 equals the hand-written scalar computation, diagonal
// data decouples, the charge/spin split agrees with the matrix residual,
// and a constant spin direction reduces the charge equation to scalar BO.
void c8_reductions(CriterionResult& r) {
  Detail det;
  bool pass = true;

  // d = 1: matrix machinery vs a hand-written scalar residual, and the
  // field itself vs the bare pole-sum formula.
  {
    const KernelCase kc = KernelCase::rational();
    const SolitonData data =
        solve_initial_data(kc, Equation::SpinBO,
                           {Complex{0.0, -0.9}, Complex{1.2, -0.6}},
                           {bra1(1.0), bra1(1.0)});
    FieldEvaluator ev(data);
    const double t = 0.3;
    const int n = 2048;
    const double w = 60.0;
    ev.prefetch(t);
    const GridField u = ev.sample_u(t, n, w);
    GridField ut = make_line_field(w, n, 1);
    for (int i = 0; i < n; ++i) ut.values[i] = ev.u_t(t, u.node(i));
    const ResidualReport rep = sbo_residual({u, ut}, TransformPath::Spectral);

    const GridField ux = derivative_fd8(u, 1);
    const GridField huxx = hilbert(derivative_fd8(u, 2));
    double hand = 0.0;
    for (int i = n / 10; i < n - n / 10; ++i) {
      const Complex res = ut.values[i](0, 0) +
                          2.0 * u.values[i](0, 0) * ux.values[i](0, 0) +
                          huxx.values[i](0, 0);
      hand = std::max(hand, std::abs(res));
    }
    const double residual_match = std::abs(rep.sup - hand);

    const ScmState& at = ev.state(t);
    double field_diff = 0.0;
    for (int i = 0; i < n; ++i) {
      Complex hand_u = 0.0;
      for (const Complex a : at.poles_a)
        hand_u += kI * alpha(kc, u.node(i) - a) -
                  kI * alpha(kc, u.node(i) - std::conj(a));
      field_diff =
          std::max(field_diff, std::abs(ev.u(at, u.node(i))(0, 0) - hand_u));
    }
    det.add("scalar_residual_match", residual_match);
    det.add("scalar_field_diff", field_diff);
    pass = pass && residual_match < 1e-12 && field_diff < 1e-12;
  }

  // Diagonal 2x2 data built from two scalar solitons: off-diagonal residual
  // vanishes and each diagonal matches its scalar value.
  {
    const int n = 2048;
    const double w = 60.0;
    const double t = 0.2;
    const std::array<Complex, 2> poles = {Complex{0.0, -0.7},
                                          Complex{0.5, -1.1}};
    std::array<GridField, 2> su, sut;
    std::array<double, 2> scalar_sup{};
    for (int k = 0; k < 2; ++k) {
      const SolitonData data = solve_initial_data(
          KernelCase::rational(), Equation::SpinBO, {poles[k]}, {bra1(1.0)});
      FieldEvaluator ev(data);
      ev.prefetch(t);
      su[k] = ev.sample_u(t, n, w);
      sut[k] = make_line_field(w, n, 1);
      for (int i = 0; i < n; ++i) sut[k].values[i] = ev.u_t(t, su[k].node(i));
      scalar_sup[k] = sbo_residual({su[k], sut[k]}, TransformPath::Spectral)
                          .entry_sup(0, 0);
    }
    GridField u = make_line_field(w, n, 2);
    GridField ut = make_line_field(w, n, 2);
    for (int i = 0; i < n; ++i) {
      u.values[i] = SpinMatrix::Zero(2, 2);
      ut.values[i] = SpinMatrix::Zero(2, 2);
      for (int k = 0; k < 2; ++k) {
        u.values[i](k, k) = su[k].values[i](0, 0);
        ut.values[i](k, k) = sut[k].values[i](0, 0);
      }
    }
    const ResidualReport rep = sbo_residual({u, ut}, TransformPath::Spectral);
    const double offdiag = std::max(rep.entry_sup(0, 1), rep.entry_sup(1, 0));
    const double diag_match =
        std::max(std::abs(rep.entry_sup(0, 0) - scalar_sup[0]),
                 std::abs(rep.entry_sup(1, 1) - scalar_sup[1]));
    det.add("offdiag_residual", offdiag);
    det.add("diag_match", diag_match);
    pass = pass && offdiag < 1e-15 && diag_match < 1e-14;
  }

  // Charge/spin split of 2x2 hermitian solitons agrees with the matrix
  // residual; the one-soliton has a constant spin direction, so its charge
  // satisfies scalar BO.
  {
    double worst_cs = 0.0;
    const SolitonData two = solve_initial_data(
        KernelCase::trigonometric(2.0 * kPi), Equation::SpinBO,
        {Complex{-1.0, -0.8}, Complex{1.5, -1.0}},
        {bra2(1.0, 0.2), bra2(0.3, 1.0)});
    {
      FieldEvaluator ev(two);
      const ChargeSpinField f = decompose_soliton(ev, 0.2, 1024, 0.0);
      const ChargeSpinReport rep = charge_spin_residual(f);
      worst_cs = std::max({worst_cs, rep.residual_u, rep.residual_m,
                           rep.recomposed_sbo_residual});
    }

    const SolitonData one = solve_initial_data(
        KernelCase::trigonometric(2.0 * kPi), Equation::SpinBO,
        {Complex{0.3, -0.8}}, {bra2(1.0, Complex{0.3, 0.2})});
    FieldEvaluator ev(one);
    const ChargeSpinField f = decompose_soliton(ev, 0.3, 1024, 0.0);
    const ChargeSpinReport rep = charge_spin_residual(f);
    worst_cs = std::max({worst_cs, rep.residual_u, rep.residual_m,
                         rep.recomposed_sbo_residual});

    double m_range = 0.0, mt_sup = 0.0;
    for (int k = 0; k < 3; ++k) {
      std::vector<double> vals;
      for (int i = 0; i < f.m[k].n(); ++i) {
        vals.push_back(f.m[k].values[i](0, 0).real());
        mt_sup = std::max(mt_sup, std::abs(f.m_t[k].values[i](0, 0)));
      }
      m_range = std::max(m_range, drift(vals));
    }

    const GridField ux = derivative_spectral(f.u, 1);
    const GridField huxx = hilbert(derivative_spectral(f.u, 2));
    double bo_sup = 0.0;
    for (int i = 0; i < f.u.n(); ++i) {
      const Complex res = f.u_t.values[i](0, 0) +
                          2.0 * f.u.values[i](0, 0) * ux.values[i](0, 0) +
                          huxx.values[i](0, 0);
      bo_sup = std::max(bo_sup, std::abs(res));
    }
    det.add("charge_spin_max_residual", worst_cs);
    det.add("m_range", m_range);
    det.add("m_t_sup", mt_sup);
    det.add("constant_m_bo_residual", bo_sup);
    pass = pass && worst_cs < 1e-6 && m_range < 1e-10 && mt_sup < 1e-6 &&
           bo_sup < 1e-6;
  }

  r.detail = det.text;
  r.pass = pass;
}

// 9. Small-delta limits: the kernel expansion remainder contracts like
// delta^3, and the scaled equation's deviations from matrix KdV and from
// the ferromagnet limit scale linearly in delta (within a factor of 2).
void c9_local_limits(CriterionResult& r) {
  const LocalLimitReport rep = local_limit_probe({0.04, 0.02, 0.01});

  double texpand_err = 0.0;
  for (std::size_t i = 0; i + 1 < rep.deltas.size(); ++i) {
    const double ratio =
        rep.texpand_remainders[i] / rep.texpand_remainders[i + 1];
    texpand_err = std::max(texpand_err, std::abs(ratio - 8.0));
  }

  const auto scaled_spread = [&](const std::vector<double>& dev) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < dev.size(); ++i) {
      const double s = dev[i] / rep.deltas[i];
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    return hi / lo;
  };
  const double kdv_spread = scaled_spread(rep.kdv_deviations);
  const double hf_spread = scaled_spread(rep.hf_deviations);

  Detail det;
  det.add("texpand_ratio_err", texpand_err);
  det.add("kdv_linear_spread", kdv_spread);
  det.add("hf_linear_spread", hf_spread);
  r.detail = det.text + " (deltas 0.04/0.02/0.01; spreads must stay below 2)";
  r.pass = texpand_err < 2.0 && kdv_spread < 2.0 && hf_spread < 2.0;
}

// 10. Bidirectional system: a certified two-family trigonometric state has
// residual < 1e-6 on a complex patch around the pole region.
void c10_bidirectional(CriterionResult& r) {
  const KernelCase kc = KernelCase::trigonometric(2.0 * kPi);
  const ScmState state = solve_backlund_state(
      kc, Complex{0.0, 0.0}, {Complex{-0.5, -0.9}}, {bra2(1.0, 0.3)},
      {Complex{0.7, 0.8}}, {bra2(0.4, 1.0)});
  const double bt =
      backlund_residual(state, {FlowKind::FirstOrderBT, Complex{0.0, 0.0}})
          .max_residual();
  const BidirectionalReport rep = bidirectional_residual(state);

  Detail det;
  det.add("backlund_residual", bt);
  det.add("patch_residual", rep.residual);
  det.add("tol", 1e-6);
  det.add("included_nodes", rep.included_nodes);
  r.detail = det.text;
  r.pass = bt < 1e-10 && rep.residual < 1e-6 && rep.included_nodes > 200;
}

// 11. Every certified hermitian one-soliton moves right (velocity real and
// positive, matching the closed form), and spin gauge rescaling leaves the
// field invariant.
void c11_chirality_gauge(CriterionResult& r, std::uint64_t seed) {
  Rng rng(seed + 11);
  const std::vector<KernelCase> cases = {KernelCase::rational(),
                                         KernelCase::trigonometric(2.0 * kPi),
                                         KernelCase::trigonometric(5.0)};
  double min_velocity = std::numeric_limits<double>::infinity();
  double worst_imag = 0.0, worst_closed_form = 0.0;
  bool all_certified = true;
  int count = 0;
  for (const auto& kc : cases) {
    for (int i = 0; i < 8; ++i) {
      const int d = 1 + std::min(2, static_cast<int>(rng.uniform01() * 3.0));
      const Complex a{rng.uniform(-2.0, 2.0), -0.3 - 0.9 * rng.uniform01()};
      const SolitonData data =
          solve_initial_data(kc, Equation::SpinBO, {a}, {random_spin(rng, d)});
      all_certified = all_certified && certify(data).pass;
      const Complex v = data.state0.vels_a[0];
      min_velocity = std::min(min_velocity, v.real());
      worst_imag = std::max(worst_imag, std::abs(v.imag()));
      worst_closed_form = std::max(
          worst_closed_form, std::abs(v - Complex{one_soliton_velocity(kc, a)}));
      ++count;
    }
  }

  const SolitonData base = rational_soliton(2);
  const SolitonData rescaled =
      gauge_rescaled(base, {Complex{0.7, 0.4}, Complex{-1.2, 0.3}});
  FieldEvaluator ea(base), eb(rescaled);
  double gauge_sup_t0 = 0.0, gauge_sup_later = 0.0;
  for (const double t : {0.0, 0.7}) {
    ea.prefetch(t);
    eb.prefetch(t);
    const ScmState& sa = ea.state(t);
    const ScmState& sb = eb.state(t);
    double sup = 0.0;
    for (int i = 0; i <= 200; ++i) {
      const double x = -20.0 + 40.0 * i / 200.0;
      sup = std::max(sup, (ea.u(sa, x) - eb.u(sb, x)).norm());
    }
    (t == 0.0 ? gauge_sup_t0 : gauge_sup_later) = sup;
  }

  Detail det;
  det.add("solitons", count);
  det.add("min_velocity", min_velocity);
  det.add("max_velocity_imag", worst_imag);
  det.add("max_closed_form_err", worst_closed_form);
  det.add("gauge_sup_t0", gauge_sup_t0);
  det.add("gauge_sup_t0.7", gauge_sup_later);
  r.detail = det.text;
  r.pass = all_certified && min_velocity > 0.0 && worst_imag < 1e-10 &&
           worst_closed_form < 1e-12 && gauge_sup_t0 < 1e-14 &&
           gauge_sup_later < 1e-13;
}

}  // namespace

std::vector<CriterionResult> run_acceptance_battery(
    const AcceptanceOptions& opts) {
  std::vector<CriterionResult> out;
  const auto push = [&](CriterionResult r) {
    if (opts.on_result) opts.on_result(r);
    out.push_back(std::move(r));
  };
  const std::uint64_t seed = opts.seed;

  push(run_criterion(1, "kernel identity battery",
                     [&](CriterionResult& r) { c1_kernel_identities(r, seed); }));
  push(run_criterion(
      2, "Backlund flow matches second-order spin Calogero-Moser dynamics",
      [&](CriterionResult& r) { c2_backlund_certificates(r, seed); }));
  push(run_criterion(
      3, "constraint solver residuals and closed-form one-soliton velocities",
      [&](CriterionResult& r) { c3_construction(r, seed); }));
  push(run_criterion(
      4, "spin Benjamin-Ono residuals of certified solitons, both routes",
      [&](CriterionResult& r) { c4_sbo_residuals(r); }));
  push(run_criterion(
      5, "spin non-chiral ILW residuals with quadrature transforms",
      [&](CriterionResult& r) { c5_sncilw_residuals(r); }));
  push(run_criterion(6, "integral-operator eigenfunction identities",
                     [&](CriterionResult& r) { c6_eigenfunctions(r); }));
  push(run_criterion(
      7, "spectral evolver reproduces the exact periodic one-soliton",
      [&](CriterionResult& r) { c7_evolver(r); }));
  push(run_criterion(
      8, "reductions: scalar limit, diagonal decoupling, charge/spin split",
      [&](CriterionResult& r) { c8_reductions(r); }));
  push(run_criterion(
      9, "small-delta limits: kernel expansion, matrix KdV, ferromagnet",
      [&](CriterionResult& r) { c9_local_limits(r); }));
  push(run_criterion(10, "bidirectional system residual on a complex patch",
                     [&](CriterionResult& r) { c10_bidirectional(r); }));
  push(run_criterion(11, "soliton chirality and gauge invariance",
                     [&](CriterionResult& r) { c11_chirality_gauge(r, seed); }));
  return out;
}

bool all_passed(const std::vector<CriterionResult>& results) {
  return std::all_of(results.begin(), results.end(),
                     [](const CriterionResult& r) { return r.pass; });
}

std::string format_result_line(const CriterionResult& r, int total) {
  char head[48];
  std::snprintf(head, sizeof(head), "[%2d/%2d] %s  ", r.index, total,
                r.pass ? "PASS" : "FAIL");
  char tail[32];
  std::snprintf(tail, sizeof(tail), "  [%.2f s]", r.runtime_seconds);
  return std::string(head) + r.name + ": " + r.detail + tail;
}

}  // namespace solitonlab
