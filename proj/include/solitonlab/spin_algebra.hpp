#pragma once

// Dense complex spin algebra: the d x d matrices U, V, P_j = |e_j><f_j| and
// the d-component (co)vectors they are built from.
//
// Storage convention: a BraVec holds the d components of the vector f itself;
// the linear functional <f| acts through the hermitian pairing
//   pairing(f, e) = sum_mu conj(f_mu) e_mu = f.dot(e),
// and |e><f| = e * f.adjoint().  With this identification every bra-ket
// expression translates verbatim into Eigen calls.

#include <Eigen/Dense>

#include "solitonlab/common.hpp"

namespace solitonlab {

using SpinMatrix = Eigen::MatrixXcd;
using KetVec = Eigen::VectorXcd;
using BraVec = Eigen::VectorXcd;

inline Complex pairing(const BraVec& f, const KetVec& e) { return f.dot(e); }

SpinMatrix outer(const KetVec& e, const BraVec& f);

inline SpinMatrix commutator(const SpinMatrix& a, const SpinMatrix& b) {
  return a * b - b * a;
}

inline SpinMatrix anticommutator(const SpinMatrix& a, const SpinMatrix& b) {
  return a * b + b * a;
}

inline SpinMatrix herm_conj(const SpinMatrix& a) { return a.adjoint(); }

// Pauli matrices sigma_1, sigma_2, sigma_3 (k is 1-based).
SpinMatrix pauli(int k);

// U = (u/2)(I + m . sigma) for real charge u and real 3-vector m.
SpinMatrix pauli_compose(double u, const Eigen::Vector3d& m);

// Inverse of pauli_compose on hermitian 2x2 matrices: u = tr U and
// m_k = tr(U sigma_k)/u.  Raises DomainError when |tr U| < 1e-14 (the spin
// direction is undefined at vanishing charge).
struct PauliParts {
  double u = 0.0;
  Eigen::Vector3d m = Eigen::Vector3d::Zero();
};
PauliParts pauli_decompose(const SpinMatrix& U);

inline double frobenius(const SpinMatrix& a) { return a.norm(); }

inline bool is_hermitian(const SpinMatrix& a, double tol) {
  return (a - a.adjoint()).norm() <= tol;
}

// Largest and second-largest singular values via direct SVD (d is tiny, <= 8).
// Used by the rank-one projector checks.
double second_singular_ratio(const SpinMatrix& a);

}  // namespace solitonlab
