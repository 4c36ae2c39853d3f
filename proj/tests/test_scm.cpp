#include "solitonlab/scm.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "solitonlab/rng.hpp"

using namespace solitonlab;

namespace {

KetVec random_vec(Rng& rng, int d) {
  KetVec v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.complex_normal();
  return v;
}

// Generic one-family state with normalized spin pairs and well-separated poles.
ScmState random_state(Rng& rng, const KernelCase& kc, int n, int d) {
  ScmState s;
  s.kernel = kc;
  for (int j = 0; j < n; ++j) {
    s.poles_a.push_back(Complex{1.7 * j - 0.8, -1.0 + 0.4 * rng.uniform01()});
    s.vels_a.push_back(0.3 * rng.complex_normal());
    KetVec e = random_vec(rng, d);
    BraVec f = random_vec(rng, d);
    e /= pairing(f, e);
    s.kets_e.push_back(e);
    s.bras_f.push_back(f);
  }
  return s;
}

// Valid (N,M) = (1,1) Backlund data: for a single pair the constraints force
// e = g/<f|g>, h = f/<f|g>* and equal velocities -2i alpha(a-b).
ScmState one_pair_bt_state(const KernelCase& kc, Complex a, Complex b, const KetVec& g,
                           const BraVec& f) {
  ScmState s;
  s.kernel = kc;
  const Complex fg = pairing(f, g);
  s.poles_a = {a};
  s.vels_a = {Complex{0, 0}};
  s.kets_e = {KetVec(g / fg)};
  s.bras_f = {f};
  s.poles_b = {b};
  s.vels_b = {Complex{0, 0}};
  s.kets_g = {g};
  s.bras_h = {BraVec(f / std::conj(fg))};
  return s;
}

}  // namespace

TEST_CASE("two-particle rational accelerations match hand arithmetic") {
  // N=2, d=1, a=(0,1), all spins 1: a1'' = -4 V'(-1) = -8, a2'' = -4 V'(1) = 8.
  ScmState s;
  s.kernel = KernelCase::rational();
  s.poles_a = {Complex{0, 0}, Complex{1, 0}};
  s.vels_a = {Complex{0, 0}, Complex{0, 0}};
  s.kets_e = {KetVec::Ones(1), KetVec::Ones(1)};
  s.bras_f = {BraVec::Ones(1), BraVec::Ones(1)};
  const auto acc = scm_accelerations(s);
  CHECK(std::abs(acc.family_a[0] - Complex{-8, 0}) < 1e-14);
  CHECK(std::abs(acc.family_a[1] - Complex{8, 0}) < 1e-14);
}

TEST_CASE("second-order rhs matches finite differences of the flow") {
  Rng rng(101);
  ScmState s = random_state(rng, KernelCase::trigonometric(7.0), 3, 2);
  const FlowSpec flow{FlowKind::SecondOrder, {0, 0}};

  // Velocities from a tiny forward/backward integration vs prescribed
  // accelerations.
  IntegrateOptions opts;
  const double h = 1e-3;
  auto vels = [&](double dt) {
    return integrate(s, flow, {dt}, opts).samples.back().state.vels_a;
  };
  const auto vp = vels(h), vm = vels(-h), vp2 = vels(h / 2), vm2 = vels(-h / 2);
  const auto acc = scm_accelerations(s);
  for (int j = 0; j < s.n(); ++j) {
    const Complex d1 = (vp[j] - vm[j]) / (2.0 * h);
    const Complex d2 = (vp2[j] - vm2[j]) / h;
    CHECK(std::abs((4.0 * d2 - d1) / 3.0 - acc.family_a[j]) < 1e-8);
  }
}

TEST_CASE("constraints <f|e> = 1 are preserved to integrator accuracy") {
  Rng rng(102);
  for (const auto& kc :
       {KernelCase::rational(), KernelCase::trigonometric(6.0), KernelCase::hyperbolic(0.9)}) {
    ScmState s = random_state(rng, kc, 3, 2);
    const auto report =
        integrate(s, {FlowKind::SecondOrder, {0, 0}}, {0.25, 0.5, 0.75, 1.0});
    INFO("case " << kc.name());
    CHECK(report.max_constraint_drift < 1e-11);  // 10 * rel_tol
    CHECK(report.warnings.empty());
  }
}

TEST_CASE("free single particle integrates exactly") {
  ScmState s;
  s.kernel = KernelCase::rational();
  s.poles_a = {Complex{0.3, -1.0}};
  s.vels_a = {Complex{0.8, 0.1}};
  s.kets_e = {KetVec::Ones(2) / 2.0};
  s.bras_f = {BraVec::Ones(2)};
  const auto report = integrate(s, {FlowKind::SecondOrder, {0, 0}}, {2.0});
  const ScmState& end = report.samples.back().state;
  CHECK(std::abs(end.poles_a[0] - (s.poles_a[0] + 2.0 * s.vels_a[0])) < 1e-13);
  CHECK((end.kets_e[0] - s.kets_e[0]).norm() < 1e-14);
}

TEST_CASE("backward integration returns to the initial state") {
  Rng rng(103);
  ScmState s = random_state(rng, KernelCase::rational(), 2, 2);
  const auto fwd = integrate(s, {FlowKind::SecondOrder, {0, 0}}, {0.4});
  const auto back = integrate(fwd.samples.back().state, {FlowKind::SecondOrder, {0, 0}},
                              {0.2, 0.0});
  CHECK(back.samples.size() == 2);
  const ScmState& round = back.samples.back().state;
  for (int j = 0; j < s.n(); ++j) {
    CHECK(std::abs(round.poles_a[j] - s.poles_a[j]) < 1e-10);
    CHECK((round.kets_e[j] - s.kets_e[j]).norm() < 1e-10);
    CHECK((round.bras_f[j] - s.bras_f[j]).norm() < 1e-10);
  }
}

TEST_CASE("gauge covariance: e -> c e, f -> f / conj(c) leaves poles and projectors") {
  Rng rng(104);
  ScmState s = random_state(rng, KernelCase::rational(), 3, 2);
  ScmState gauged = s;
  const Complex cs[3] = {{0.4, 1.2}, {-0.9, 0.3}, {2.0, -0.7}};
  for (int j = 0; j < 3; ++j) {
    gauged.kets_e[j] *= cs[j];
    gauged.bras_f[j] /= std::conj(cs[j]);
  }
  CHECK(gauged.constraint_drift() < 1e-13);

  const FlowSpec flow{FlowKind::SecondOrder, {0, 0}};
  const auto r1 = integrate(s, flow, {1.0});
  const auto r2 = integrate(gauged, flow, {1.0});
  const ScmState& e1 = r1.samples.back().state;
  const ScmState& e2 = r2.samples.back().state;
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(e1.poles_a[j] - e2.poles_a[j]) < 1e-11);
    const SpinMatrix p1 = outer(e1.kets_e[j], e1.bras_f[j]);
    const SpinMatrix p2 = outer(e2.kets_e[j], e2.bras_f[j]);
    CHECK((p1 - p2).norm() < 1e-11);
  }
}

TEST_CASE("one-pair Backlund data satisfies the constraint system exactly") {
  Rng rng(105);
  const KetVec g = random_vec(rng, 2);
  const BraVec f = random_vec(rng, 2);
  for (const auto& kc : {KernelCase::rational(), KernelCase::hyperbolic(1.0)}) {
    ScmState s = one_pair_bt_state(kc, Complex{0.2, -0.9}, Complex{-0.4, 0.8}, g, f);
    const FlowSpec flow{FlowKind::FirstOrderBT, {0, 0}};
    const auto v = bt_velocities(s, flow);
    // Both velocities equal -2i alpha(a - b).
    const Complex expect = -2.0 * kI * alpha(kc, s.poles_a[0] - s.poles_b[0]);
    CHECK(std::abs(v.family_a[0] - expect) < 1e-13);
    CHECK(std::abs(v.family_b[0] - expect) < 1e-13);

    ScmState with_v = s;
    with_v.vels_a = v.family_a;
    with_v.vels_b = v.family_b;
    CHECK(backlund_residual(with_v, flow).max_residual() < 1e-13);

    const auto cert = certify_proposition_BT(s, flow, 1.0, 1e-8);
    CHECK(cert.pass);
    CHECK(cert.max_flow_residual < 1e-10);
    CHECK(cert.max_accel_deviation < 1e-8);
  }
}

TEST_CASE("hermitian non-interacting data certifies; perturbation is detected") {
  // Orthonormal bras with e_j = f_j and rational poles -i, 1-2i: the mirror
  // couplings collapse to per-particle velocities -1/Im(a_j).
  ScmState s;
  s.kernel = KernelCase::rational();
  s.poles_a = {Complex{0, -1}, Complex{1, -2}};
  s.vels_a = {Complex{0, 0}, Complex{0, 0}};
  KetVec e1(2), e2(2);
  e1 << 1, 0;
  e2 << 0, 1;
  s.kets_e = {e1, e2};
  s.bras_f = {e1, e2};

  const FlowSpec flow{FlowKind::FirstOrderBTHermitian, {0, 0}};
  const auto v = bt_velocities(s, flow);
  CHECK(std::abs(v.family_a[0] - Complex{1.0, 0}) < 1e-14);
  CHECK(std::abs(v.family_a[1] - Complex{0.5, 0}) < 1e-14);

  const auto cert = certify_proposition_BT(s, flow, 1.0, 1e-8);
  CHECK(cert.pass);

  // A 1e-3 spin perturbation must register as a residual well above 1e-6.
  ScmState bad = s;
  bad.kets_e[0](1) += 1e-3;
  bad.vels_a = bt_velocities(bad, flow).family_a;
  CHECK(backlund_residual(bad, flow).max_residual() > 1e-5);
}

TEST_CASE("renormalization flag pins the constraints to machine precision") {
  Rng rng(106);
  ScmState s = random_state(rng, KernelCase::rational(), 3, 2);
  IntegrateOptions opts;
  opts.renormalize = true;
  const auto report = integrate(s, {FlowKind::SecondOrder, {0, 0}}, {1.0}, opts);
  CHECK(report.max_constraint_drift < 1e-13);
}

TEST_CASE("pole near-collision aborts with the offending pair named") {
  ScmState s;
  s.kernel = KernelCase::rational();
  s.poles_a = {Complex{0, 0}, Complex{1e-10, 0}};
  s.vels_a = {Complex{0, 0}, Complex{0, 0}};
  s.kets_e = {KetVec::Ones(1), KetVec::Ones(1)};
  s.bras_f = {BraVec::Ones(1), BraVec::Ones(1)};
  try {
    integrate(s, {FlowKind::SecondOrder, {0, 0}}, {1.0});
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& err) {
    CHECK(std::string(err.what()).find("a0-a1") != std::string::npos);
  }
}

TEST_CASE("sample times must be monotone from the state time") {
  Rng rng(107);
  ScmState s = random_state(rng, KernelCase::rational(), 2, 1);
  CHECK_THROWS_AS(integrate(s, {FlowKind::SecondOrder, {0, 0}}, {0.5, 0.2, 0.8}),
                  DomainError);
}
