#include "solitonlab/spin_algebra.hpp"

#include <cmath>
#include <sstream>

namespace solitonlab {

namespace {

void check_dims(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": dimension mismatch (" << a << " vs " << b << ")";
    throw DomainError(os.str());
  }
}

// Largest eigenvalue of a hermitian positive semi-definite matrix by power
// iteration (no eigensolver dependency; d <= 8 makes convergence trivial).
double top_eigenvalue(const SpinMatrix& m, Eigen::VectorXcd& v) {
  const Eigen::Index d = m.rows();
  v = Eigen::VectorXcd::Ones(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) += 0.01 * static_cast<double>(i);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    Eigen::VectorXcd w = m * v;
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
    lambda = n;
  }
  return lambda;
}

}  // namespace

SpinMatrix outer(const KetVec& e, const BraVec& f) {
  check_dims(e.size(), f.size(), "outer");
  return e * f.adjoint();
}

SpinMatrix pauli(int k) {
  SpinMatrix s(2, 2);
  switch (k) {
    case 1: s << 0, 1, 1, 0; break;
    case 2: s << 0, -kI, kI, 0; break;
    case 3: s << 1, 0, 0, -1; break;
    default: throw DomainError("pauli: index must be 1, 2, or 3");
  }
  return s;
}

SpinMatrix pauli_compose(double u, const Eigen::Vector3d& m) {
  SpinMatrix out = SpinMatrix::Identity(2, 2);
  for (int k = 1; k <= 3; ++k) out += m(k - 1) * pauli(k);
  return 0.5 * u * out;
}

PauliParts pauli_decompose(const SpinMatrix& U) {
  check_dims(U.rows(), 2, "pauli_decompose");
  check_dims(U.cols(), 2, "pauli_decompose");
  const Complex tr = U.trace();
  if (std::abs(tr) < 1e-14) {
    throw DomainError(
        "pauli_decompose: charge-degenerate input (|trace| < 1e-14), spin "
        "direction undefined");
  }
  PauliParts parts;
  parts.u = tr.real();
  for (int k = 1; k <= 3; ++k) {
    parts.m(k - 1) = (U * pauli(k)).trace().real() / parts.u;
  }
  return parts;
}

double second_singular_ratio(const SpinMatrix& a) {
  Eigen::VectorXcd v1;
  const double l1 = top_eigenvalue(a.adjoint() * a, v1);
  if (l1 == 0.0) return 0.0;
  // Deflate a itself rather than the Gram matrix: the Frobenius norm of the
  // deflated matrix bounds sigma_2 without the sqrt(eps) floor that squaring
  // would introduce.
  const Eigen::VectorXcd av = a * v1;
  const double s1 = av.norm();
  if (s1 == 0.0) return 0.0;
  const Eigen::VectorXcd u1 = av / s1;
  const SpinMatrix deflated = a - s1 * (u1 * v1.adjoint());
  return deflated.norm() / s1;
}

}  // namespace solitonlab
