#include "solitonlab/solitons.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "solitonlab/rng.hpp"

using namespace solitonlab;

namespace {

BraVec random_vec(Rng& rng, int d) {
  BraVec v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.complex_normal();
  return v;
}

std::vector<BraVec> random_vecs(Rng& rng, int n, int d) {
  std::vector<BraVec> out;
  for (int j = 0; j < n; ++j) out.push_back(random_vec(rng, d));
  return out;
}

// Interacting but well-separated hermitian configuration.
std::vector<Complex> spread_poles(Rng& rng, int n, double im_lo,
                                  double im_hi) {
  std::vector<Complex> poles;
  for (int j = 0; j < n; ++j)
    poles.push_back(Complex{1.4 * j + rng.uniform(-0.2, 0.2),
                            rng.uniform(im_lo, im_hi)});
  return poles;
}

double field_diff(const SpinMatrix& a, const SpinMatrix& b) {
  return (a - b).norm();
}

}  // namespace

TEST_CASE("hermitian construction reproduces one-soliton closed forms") {
  const KernelCase rat = KernelCase::rational();

  SECTION("rational, unit bra") {
    BraVec f(3);
    f << 1.0, 0.0, 0.0;
    const SolitonData data =
        solve_initial_data(rat, Equation::SpinBO, {Complex{0, -1}}, {f});
    REQUIRE(std::abs(data.state0.vels_a[0] - Complex{1.0, 0.0}) < 1e-12);
    REQUIRE((data.state0.kets_e[0] - f).norm() < 1e-12);
    REQUIRE_FALSE(data.conditioning_flagged);
    const CertifyReport report = certify(data);
    REQUIRE(report.pass);
    REQUIRE(report.backlund_residual < 1e-12);
  }

  SECTION("rational, scaled bra rescales the ket only") {
    BraVec f(2);
    f << 2.0, 0.0;
    const SolitonData data =
        solve_initial_data(rat, Equation::SpinBO, {Complex{0, -1}}, {f});
    REQUIRE(std::abs(data.state0.vels_a[0] - Complex{1.0, 0.0}) < 1e-12);
    KetVec expect(2);
    expect << 0.5, 0.0;
    REQUIRE((data.state0.kets_e[0] - expect).norm() < 1e-13);
  }

  SECTION("trigonometric velocity formula") {
    for (double length : {2.0 * kPi, 5.0}) {
      const KernelCase trig = KernelCase::trigonometric(length);
      const Complex a0{0.4, -0.7};
      BraVec f(2);
      f << 0.3, Complex{0.0, 1.1};
      const SolitonData data =
          solve_initial_data(trig, Equation::SpinBO, {a0}, {f});
      const double expect = -(2.0 * kPi / length) /
                            std::tanh(2.0 * kPi * a0.imag() / length);
      REQUIRE(std::abs(data.state0.vels_a[0] - expect) < 1e-12);
      REQUIRE(std::abs(one_soliton_velocity(trig, a0) - expect) < 1e-12);
    }
  }
}

TEST_CASE("hermitian construction: orthogonal bras give decoupled solitons") {
  BraVec f1(2), f2(2);
  f1 << 2.0, 0.0;
  f2 << 0.0, 3.0;
  const SolitonData data = solve_initial_data(
      KernelCase::rational(), Equation::SpinBO,
      {Complex{0, -1}, Complex{1, -2}}, {f1, f2});
  REQUIRE(std::abs(data.state0.vels_a[0] - Complex{1.0, 0.0}) < 1e-12);
  REQUIRE(std::abs(data.state0.vels_a[1] - Complex{0.5, 0.0}) < 1e-12);
  REQUIRE((data.state0.kets_e[0] - f1 / 4.0).norm() < 1e-12);
  REQUIRE((data.state0.kets_e[1] - f2 / 9.0).norm() < 1e-12);
  const CertifyReport report = certify(data);
  REQUIRE(report.normalization_residual < 1e-13);
  REQUIRE(report.backlund_residual < 1e-12);
}

TEST_CASE("hermitian construction certifies on random interacting data") {
  Rng rng(2024);

  SECTION("trigonometric N=2, d=2") {
    const SolitonData data = solve_initial_data(
        KernelCase::trigonometric(2.0 * kPi), Equation::SpinBO,
        spread_poles(rng, 2, -1.3, -0.6), random_vecs(rng, 2, 2));
    const CertifyReport report = certify(data);
    REQUIRE(report.pass);
    REQUIRE(report.backlund_residual < 1e-10);
    REQUIRE_FALSE(data.conditioning_flagged);
  }

  SECTION("rational N=3, d=3") {
    const SolitonData data = solve_initial_data(
        KernelCase::rational(), Equation::SpinBO,
        spread_poles(rng, 3, -1.5, -0.7), random_vecs(rng, 3, 3));
    const CertifyReport report = certify(data);
    REQUIRE(report.pass);
    REQUIRE(report.backlund_residual < 1e-10);
  }

  SECTION("hyperbolic sncILW N=2, d=2") {
    const SolitonData data = solve_initial_data(
        KernelCase::hyperbolic(1.0), Equation::SpinNcILW,
        spread_poles(rng, 2, -1.3, -0.7), random_vecs(rng, 2, 2));
    const CertifyReport report = certify(data);
    REQUIRE(report.pass);
    REQUIRE(report.backlund_residual < 1e-10);
  }
}

TEST_CASE("degenerate and invalid constructions are rejected") {
  const KernelCase rat = KernelCase::rational();
  BraVec f(2);
  f << 1.0, 0.5;

  REQUIRE_THROWS_AS(
      solve_initial_data(rat, Equation::SpinBO,
                         {Complex{0, -1}, Complex{0, -1}}, {f, f}),
      DegenerateConfigurationError);
  REQUIRE_THROWS_AS(
      solve_initial_data(rat, Equation::SpinBO, {Complex{0, 0.5}}, {f}),
      StripViolationError);
  REQUIRE_THROWS_AS(solve_initial_data(KernelCase::hyperbolic(1.0),
                                       Equation::SpinBO, {Complex{0, -1}},
                                       {f}),
                    ConfigError);
  REQUIRE_THROWS_AS(
      solve_initial_data(rat, Equation::SpinNcILW, {Complex{0, -1}}, {f}),
      ConfigError);
  // Outside the band -3/2 < Im a < -1/2 for delta = 1.
  REQUIRE_THROWS_AS(solve_initial_data(KernelCase::hyperbolic(1.0),
                                       Equation::SpinNcILW,
                                       {Complex{0, -0.4}}, {f}),
                    StripViolationError);
  BraVec zero = BraVec::Zero(2);
  REQUIRE_THROWS_AS(
      solve_initial_data(rat, Equation::SpinBO, {Complex{0, -1}}, {zero}),
      DomainError);
}

TEST_CASE("one-soliton evaluator: peak value, chirality, solver agreement") {
  const KernelCase rat = KernelCase::rational();

  SECTION("scalar peak value at the pole's real part") {
    BraVec f(1);
    f << 1.0;
    const OneSoliton sol = one_soliton(rat, Complex{0, -1}, f);
    const SpinMatrix u00 = sol(0.0, 0.0);
    REQUIRE(std::abs(u00(0, 0) - Complex{2.0, 0.0}) < 1e-14);
    // The profile rides along x = v t.
    REQUIRE(field_diff(sol(sol.velocity * 0.7, 0.7), u00) < 1e-12);
  }

  SECTION("right-moving in both translation-invariant cases") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
      const Complex a0 = rng.complex_in_box(-2.0, 2.0, -2.5, -0.1);
      REQUIRE(one_soliton_velocity(rat, a0) > 0.0);
      REQUIRE(one_soliton_velocity(KernelCase::trigonometric(7.0), a0) > 0.0);
    }
  }

  SECTION("matches construction plus field evaluation") {
    Rng rng(11);
    BraVec f(2);
    f << Complex{0.8, -0.1}, Complex{-0.4, 0.6};
    const Complex a0{0.3, -0.9};
    const OneSoliton sol = one_soliton(rat, a0, f);
    const SolitonData data =
        solve_initial_data(rat, Equation::SpinBO, {a0}, {f});
    for (double t : {0.0, 0.4}) {
      const ScmState at = state_at(data, t);
      for (int i = 0; i < 100; ++i) {
        const double x = -5.0 + 10.0 * i / 99.0;
        REQUIRE(field_diff(sol(x, t), eval_sbo(data, at, x)) < 1e-12);
      }
    }
  }

  SECTION("preconditions") {
    BraVec f(1);
    f << 1.0;
    REQUIRE_THROWS_AS(one_soliton(rat, Complex{0, 0.2}, f),
                      StripViolationError);
    REQUIRE_THROWS_AS(one_soliton(KernelCase::hyperbolic(1.0), Complex{0, -1}, f),
                      ConfigError);
  }
}

TEST_CASE("transported fields stay hermitian with projector structure") {
  Rng rng(31);
  const SolitonData data = solve_initial_data(
      KernelCase::trigonometric(2.0 * kPi), Equation::SpinBO,
      spread_poles(rng, 2, -1.2, -0.8), random_vecs(rng, 2, 2));
  for (double t : {0.3, 1.0}) {
    const ScmState at = state_at(data, t);
    for (int j = 0; j < at.n(); ++j) {
      const SpinMatrix p = outer(at.kets_e[j], at.bras_f[j]);
      REQUIRE((p * p - p).norm() < 1e-10);
      REQUIRE(std::abs(pairing(at.bras_f[j], at.kets_e[j]) - 1.0) < 1e-10);
    }
    const StripCheck strips = check_strips(data, at);
    REQUIRE(strips.ok);
    const SpinMatrix u = eval_sbo(data, at, 0.37);
    REQUIRE(is_hermitian(u, 1e-14));
  }
}

TEST_CASE("gauge rescaling leaves fields and certification invariant") {
  Rng rng(41);
  const SolitonData data = solve_initial_data(
      KernelCase::trigonometric(2.0 * kPi), Equation::SpinBO,
      spread_poles(rng, 2, -1.2, -0.8), random_vecs(rng, 2, 2));
  const SolitonData gauged =
      gauge_rescaled(data, {Complex{0.7, 0.2}, Complex{1.9, -1.1}});
  REQUIRE(certify(gauged).pass);
  double scale = 0.0;
  double diff = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double x = -3.0 + 6.0 * i / 19.0;
    const SpinMatrix a = eval_sbo(data, data.state0, x);
    const SpinMatrix b = eval_sbo(gauged, gauged.state0, x);
    diff = std::max(diff, field_diff(a, b));
    scale = std::max(scale, a.norm());
  }
  REQUIRE(diff < 1e-14 * std::max(1.0, scale));

  // Single soliton: spins are constant along the flow, so the invariance
  // survives transport essentially to roundoff.
  BraVec f(2);
  f << Complex{0.8, -0.1}, Complex{-0.4, 0.6};
  const SolitonData one = solve_initial_data(KernelCase::rational(),
                                             Equation::SpinBO,
                                             {Complex{0.3, -0.9}}, {f});
  const SolitonData one_gauged = gauge_rescaled(one, {Complex{2.0, -1.0}});
  REQUIRE(field_diff(eval_sbo(one, 0.5, 1.1), eval_sbo(one_gauged, 0.5, 1.1)) <
          1e-13);
}

TEST_CASE("general two-family construction: closed forms and certification") {
  Rng rng(53);
  const KernelCase rat = KernelCase::rational();

  SECTION("one pair in closed form") {
    const Complex a{0.0, -0.8};
    const Complex b{0.3, 0.9};
    const BraVec f = random_vec(rng, 2);
    const KetVec g = random_vec(rng, 2);
    const SolitonData data =
        solve_initial_data_general(rat, Equation::SpinBO, {a}, {f}, {b}, {g});
    const Complex expect_v = -2.0 * kI / (a - b);
    REQUIRE(std::abs(data.state0.vels_a[0] - expect_v) < 1e-12);
    REQUIRE(std::abs(data.state0.vels_b[0] - expect_v) < 1e-12);
    const Complex s = pairing(f, g);
    REQUIRE((data.state0.kets_e[0] - KetVec(g / s)).norm() < 1e-12);
    REQUIRE((data.state0.bras_h[0] - BraVec(f / std::conj(s))).norm() < 1e-12);
    REQUIRE(certify(data).backlund_residual < 1e-12);
  }

  SECTION("lone particle is static with the minimum-norm ket") {
    const BraVec f = random_vec(rng, 3);
    const SolitonData data = solve_initial_data_general(
        rat, Equation::SpinBO, {Complex{0.0, -1.1}}, {f}, {}, {});
    REQUIRE(std::abs(data.state0.vels_a[0]) < 1e-14);
    REQUIRE((data.state0.kets_e[0] - KetVec(f / f.squaredNorm())).norm() <
            1e-14);
    REQUIRE(certify(data).pass);
  }

  SECTION("random mixed families certify") {
    // Unbalanced (2,1) with the periodic kernel: no exact solution exists for
    // fully prescribed spins, so the solver must adjust the b-side ket.
    const SolitonData pair21 = solve_initial_data_general(
        KernelCase::trigonometric(2.0 * kPi), Equation::SpinBO,
        spread_poles(rng, 2, -1.3, -0.6), random_vecs(rng, 2, 2),
        spread_poles(rng, 1, 0.6, 1.3), {random_vec(rng, 2)});
    REQUIRE(certify(pair21).pass);
    REQUIRE(pair21.spins_completed);
    REQUIRE(pair21.spin_adjustment > 1e-6);

    const SolitonData pair22 = solve_initial_data_general(
        rat, Equation::SpinBO, spread_poles(rng, 2, -1.4, -0.7),
        random_vecs(rng, 2, 3), spread_poles(rng, 2, 0.7, 1.4),
        random_vecs(rng, 2, 3));
    REQUIRE(certify(pair22).pass);
    REQUIRE(certify(pair22).backlund_residual < 1e-10);
    REQUIRE_FALSE(pair22.spins_completed);
  }

  SECTION("unbalanced families with non-decaying kernels complete the kets") {
    for (int d : {2, 3}) {
      const SolitonData trig = solve_initial_data_general(
          KernelCase::trigonometric(5.0), Equation::SpinBO,
          spread_poles(rng, 2, -1.0, -0.5), random_vecs(rng, 2, d),
          spread_poles(rng, 1, 0.5, 1.0), {random_vec(rng, d)});
      REQUIRE(certify(trig).pass);
      REQUIRE(trig.spins_completed);

      const SolitonData hyp = solve_initial_data_general(
          KernelCase::hyperbolic(1.0), Equation::SpinNcILW,
          spread_poles(rng, 2, -1.4, -0.6), random_vecs(rng, 2, d),
          spread_poles(rng, 1, 0.6, 1.4), {random_vec(rng, d)});
      REQUIRE(certify(hyp).pass);
      REQUIRE(hyp.spins_completed);
    }

    // The rational kernel decays, so the same shape stays consistent with
    // the prescribed kets.
    const SolitonData flat = solve_initial_data_general(
        rat, Equation::SpinBO, spread_poles(rng, 2, -1.0, -0.5),
        random_vecs(rng, 2, 2), spread_poles(rng, 1, 0.5, 1.0),
        {random_vec(rng, 2)});
    REQUIRE(certify(flat).pass);
    REQUIRE_FALSE(flat.spins_completed);
  }

  SECTION("general fields are plain pole sums") {
    const Complex a{0.0, -0.8};
    const Complex b{0.2, 1.0};
    BraVec f(1), g(1);
    f << Complex{1.0, 0.3};
    g << Complex{0.7, -0.2};
    const SolitonData data =
        solve_initial_data_general(rat, Equation::SpinBO, {a}, {f}, {b}, {g});
    const double x = 0.9;
    const Complex manual =
        kI * data.state0.kets_e[0](0) * std::conj(data.state0.bras_f[0](0)) /
            (x - a) -
        kI * data.state0.kets_g[0](0) * std::conj(data.state0.bras_h[0](0)) /
            (x - b);
    const SpinMatrix u = eval_sbo(data, data.state0, x);
    REQUIRE(std::abs(u(0, 0) - manual) < 1e-14);
  }
}

TEST_CASE("sncILW fields: hermiticity, strip checks, large-delta limits") {
  Rng rng(67);

  SECTION("hermitian pair of fields") {
    BraVec f(2);
    f << 0.8, Complex{0.0, 0.3};
    const SolitonData data = solve_initial_data(
        KernelCase::hyperbolic(1.0), Equation::SpinNcILW, {Complex{0, -0.9}},
        {f});
    const auto [u, v] = eval_sncilw(data, 0.25, 0.6);
    REQUIRE(is_hermitian(u, 1e-14));
    REQUIRE(is_hermitian(v, 1e-14));
  }

  SECTION("strip violations are flagged and block evaluation") {
    BraVec f(2);
    f << 1.0, 0.5;
    SolitonData data = solve_initial_data(KernelCase::hyperbolic(1.0),
                                          Equation::SpinNcILW,
                                          {Complex{0, -0.9}}, {f});
    data.state0.poles_a[0] = Complex{0, -0.3};  // above the band
    REQUIRE_FALSE(certify(data).strips_ok);
    REQUIRE_THROWS_AS(eval_sncilw(data, data.state0, 0.0),
                      StripViolationError);
  }

  SECTION("second field collapses as the two equations decouple") {
    BraVec f(2);
    f << 1.0, Complex{0.2, 0.4};
    double norms[2];
    const double deltas[2] = {10.0, 100.0};
    for (int i = 0; i < 2; ++i) {
      const SolitonData data = solve_initial_data(
          KernelCase::hyperbolic(deltas[i]), Equation::SpinNcILW,
          {Complex{0.0, -(0.5 * deltas[i] + 0.5)}}, {f});
      const auto [u, v] = eval_sncilw(data, data.state0, 0.7);
      norms[i] = v.norm();
      REQUIRE(u.norm() > 0.1);  // the first field survives
    }
    REQUIRE(norms[0] > 20.0 * norms[1]);
  }

  SECTION("first field approaches the Benjamin-Ono soliton field") {
    const double delta = 500.0;
    const Complex a0{0.2, -(0.5 * delta + 0.5)};
    BraVec f(2);
    f << 1.0, 0.4;
    const SolitonData ncilw = solve_initial_data(
        KernelCase::hyperbolic(delta), Equation::SpinNcILW, {a0}, {f});
    const SolitonData bo = solve_initial_data(
        KernelCase::rational(), Equation::SpinBO,
        {a0 + Complex{0.0, 0.5 * delta}}, {f});
    double diff = 0.0;
    for (int i = 0; i < 21; ++i) {
      const double x = -2.0 + 4.0 * i / 20.0;
      const auto [u, v] = eval_sncilw(ncilw, ncilw.state0, x);
      diff = std::max(diff, field_diff(u, eval_sbo(bo, bo.state0, x)));
    }
    REQUIRE(diff < 1e-4);
  }

  SECTION("general two-family sncILW data certifies") {
    const SolitonData data = solve_initial_data_general(
        KernelCase::hyperbolic(1.0), Equation::SpinNcILW,
        {Complex{0.0, -0.9}}, {random_vec(rng, 2)}, {Complex{0.4, 0.8}},
        {random_vec(rng, 2)});
    REQUIRE(certify(data).pass);
    const auto [u, v] = eval_sncilw(data, data.state0, -0.3);
    REQUIRE(u.norm() > 0.0);
    REQUIRE(v.norm() > 0.0);
  }
}

TEST_CASE("constructed data passes the first-order flow certificate") {
  Rng rng(71);
  const SolitonData data = solve_initial_data_general(
      KernelCase::rational(), Equation::SpinBO,
      spread_poles(rng, 2, -1.4, -0.7), random_vecs(rng, 2, 2),
      spread_poles(rng, 1, 0.7, 1.4), {random_vec(rng, 2)});
  const BtCertificate cert =
      certify_proposition_BT(data.state0, soliton_flow(data), 1.0, 1e-6);
  REQUIRE(cert.pass);
}
