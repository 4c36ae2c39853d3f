#include "solitonlab/spin_algebra.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "solitonlab/rng.hpp"

using namespace solitonlab;

namespace {

KetVec random_vec(Rng& rng, int d) {
  KetVec v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.complex_normal();
  return v;
}

SpinMatrix random_matrix(Rng& rng, int d) {
  SpinMatrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.complex_normal();
  return m;
}

}  // namespace

TEST_CASE("outer products and pairings") {
  KetVec e(2), f(2);
  e << 1, 0;
  f << 1, 0;
  CHECK((outer(e, f) - (SpinMatrix(2, 2) << 1, 0, 0, 0).finished()).norm() == 0.0);
  f << 0, 1;
  CHECK((outer(e, f) - (SpinMatrix(2, 2) << 0, 1, 0, 0).finished()).norm() == 0.0);

  // The pairing conjugates the bra side.
  BraVec g(2);
  g << Complex{0, 1}, 0;
  KetVec h(2);
  h << Complex{0, 1}, 0;
  CHECK(std::abs(pairing(g, h) - Complex{1, 0}) < 1e-16);

  CHECK_THROWS_AS(outer(KetVec::Ones(2), BraVec::Ones(3)), DomainError);
}

TEST_CASE("normalized outer products are idempotent projectors") {
  Rng rng(11);
  for (int d : {1, 2, 3, 4}) {
    KetVec e = random_vec(rng, d);
    BraVec f = random_vec(rng, d);
    e /= pairing(f, e);  // enforce <f|e> = 1
    const SpinMatrix p = outer(e, f);
    CHECK((p * p - p).norm() < 1e-13);
    CHECK(second_singular_ratio(p) < 1e-12);
    // |e><f|^dagger = |f><e|
    CHECK((herm_conj(p) - outer(f, e)).norm() < 1e-15);
  }
}

TEST_CASE("commutator and anticommutator") {
  Rng rng(12);
  const SpinMatrix a = random_matrix(rng, 3), b = random_matrix(rng, 3);
  CHECK((commutator(SpinMatrix::Identity(3, 3), a)).norm() == 0.0);
  CHECK((anticommutator(pauli(1), pauli(1)) - 2.0 * SpinMatrix::Identity(2, 2)).norm() ==
        0.0);
  CHECK((anticommutator(a, b) + commutator(a, b) - 2.0 * a * b).norm() < 1e-14);
}

TEST_CASE("pauli algebra: sigma_j sigma_k = delta_jk I + i eps_jkl sigma_l") {
  for (int j = 1; j <= 3; ++j) {
    for (int k = 1; k <= 3; ++k) {
      SpinMatrix expect = SpinMatrix::Zero(2, 2);
      if (j == k) {
        expect = SpinMatrix::Identity(2, 2);
      } else {
        const int l = 6 - j - k;
        const double eps = ((j == 1 && k == 2) || (j == 2 && k == 3) || (j == 3 && k == 1))
                               ? 1.0
                               : -1.0;
        expect = kI * eps * pauli(l);
      }
      CHECK((pauli(j) * pauli(k) - expect).norm() == 0.0);
    }
  }
}

TEST_CASE("pauli compose/decompose round trip") {
  SpinMatrix u = pauli_compose(2.0, {0, 0, 1});
  CHECK((u - (SpinMatrix(2, 2) << 2, 0, 0, 0).finished()).norm() == 0.0);
  CHECK((pauli_compose(1.0, {0, 0, 0}) - 0.5 * SpinMatrix::Identity(2, 2)).norm() == 0.0);

  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    SpinMatrix h = random_matrix(rng, 2);
    h = SpinMatrix(0.5 * (h + h.adjoint()));
    h += (0.7 - h.trace().real() / 2.0) * SpinMatrix::Identity(2, 2);  // trace 1.4
    const PauliParts parts = pauli_decompose(h);
    CHECK((pauli_compose(parts.u, parts.m) - h).norm() < 1e-14);
  }

  // Traceless input: charge-degenerate.
  CHECK_THROWS_AS(pauli_decompose(pauli(3)), DomainError);
}
