#include "solitonlab/solitons.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "solitonlab/rng.hpp"

namespace solitonlab {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

constexpr double kSingularRatio = 2e-14;  // relative sigma_min cutoff
constexpr double kConditionFlag = 1e12;
constexpr double kCoincidentPoles = 1e-10;

std::string cplx(Complex z) {
  std::ostringstream os;
  os << "(" << z.real() << (z.imag() < 0 ? " - " : " + ")
     << std::abs(z.imag()) << "i)";
  return os.str();
}

void check_family_shapes(const std::vector<Complex>& poles,
                         const std::vector<BraVec>& vecs, const char* which,
                         int d_expected) {
  if (poles.size() != vecs.size())
    throw DomainError(std::string("soliton solve: ") + which +
                      " pole and spin counts differ");
  for (const auto& v : vecs) {
    if (v.size() != d_expected)
      throw DomainError(std::string("soliton solve: inconsistent spin "
                                    "dimension in ") +
                        which + " family");
    if (v.norm() == 0.0)
      throw DomainError(std::string("soliton solve: zero spin vector in ") +
                        which + " family");
  }
}

void check_distinct(const KernelCase& kc, const std::vector<Complex>& poles,
                    const char* which) {
  const int n = static_cast<int>(poles.size());
  for (int j = 0; j < n; ++j)
    for (int k = j + 1; k < n; ++k)
      if (pole_distance(kc, poles[j] - poles[k]) < kCoincidentPoles)
        throw DegenerateConfigurationError(
            std::string("degenerate configuration: coincident ") + which +
            "-family poles " + cplx(poles[j]) + " and " + cplx(poles[k]));
}

// Singular-value diagnostics shared by both solvers.
struct SvdCheck {
  double condition = 1.0;
  bool singular = false;
};

SvdCheck svd_check(const MatrixXcd& m) {
  Eigen::JacobiSVD<MatrixXcd> svd(m);
  const auto& s = svd.singularValues();
  SvdCheck out;
  const double top = s(0);
  const double bottom = s(s.size() - 1);
  if (top == 0.0 || bottom <= kSingularRatio * top) {
    out.singular = true;
    out.condition =
        bottom > 0.0 ? top / bottom : std::numeric_limits<double>::infinity();
  } else {
    out.condition = top / bottom;
  }
  out.condition = std::min(out.condition, 1e300);
  return out;
}

ScmState make_state(const KernelCase& kc, const std::vector<Complex>& poles_a,
                    const std::vector<Complex>& vels_a,
                    const std::vector<KetVec>& kets_e,
                    const std::vector<BraVec>& bras_f) {
  ScmState s;
  s.kernel = kc;
  s.time = 0.0;
  s.poles_a = poles_a;
  s.vels_a = vels_a;
  s.kets_e = kets_e;
  s.bras_f = bras_f;
  return s;
}

void fill_info(BtSolveInfo* info, double cond_block, double cond_vel) {
  if (!info) return;
  info->condition_block = cond_block;
  info->condition_velocity = cond_vel;
  info->flagged = cond_block > kConditionFlag || cond_vel > kConditionFlag;
}

}  // namespace

const char* equation_name(Equation eq) {
  switch (eq) {
    case Equation::SpinBO:
      return "spin Benjamin-Ono";
    case Equation::SpinNcILW:
      return "spin non-chiral ILW";
  }
  return "unknown";
}

ScmState solve_backlund_state_hermitian(const KernelCase& kc,
                                        Complex cross_shift,
                                        const std::vector<Complex>& poles_a,
                                        const std::vector<BraVec>& bras_f,
                                        BtSolveInfo* info) {
  const int n = static_cast<int>(poles_a.size());
  if (n == 0) throw DomainError("soliton solve: empty pole list");
  const int d = static_cast<int>(bras_f.empty() ? 0 : bras_f[0].size());
  check_family_shapes(poles_a, bras_f, "a", d);
  check_distinct(kc, poles_a, "a");

  // Block system [[A, B], [-B*, -A*]] (e*; e) = (v-part; v*-part) with
  //   A_{jm,kn} = -2i <f_j|f_k> delta_{mn} alpha(a_j - a_k* + shift)
  //   B_{jm,kn} =  2i (1-delta_{jk}) f*_{km} f*_{jn} alpha(a_j - a_k),
  // assembled for unit-velocity right-hand sides.
  MatrixXcd blockA = MatrixXcd::Zero(n * d, n * d);
  MatrixXcd blockB = MatrixXcd::Zero(n * d, n * d);
  try {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const Complex am =
            alpha(kc, poles_a[j] - std::conj(poles_a[k]) + cross_shift);
        const Complex coeff_a = -2.0 * kI * pairing(bras_f[j], bras_f[k]) * am;
        for (int mu = 0; mu < d; ++mu)
          blockA(j * d + mu, k * d + mu) = coeff_a;
        if (k == j) continue;
        const Complex aw = alpha(kc, poles_a[j] - poles_a[k]);
        for (int mu = 0; mu < d; ++mu)
          for (int nu = 0; nu < d; ++nu)
            blockB(j * d + mu, k * d + nu) = 2.0 * kI *
                                             std::conj(bras_f[k](mu)) *
                                             std::conj(bras_f[j](nu)) * aw;
      }
    }
  } catch (const DomainError& err) {
    throw DegenerateConfigurationError(
        std::string("degenerate configuration: kernel pole hit while "
                    "assembling the constraint system (") +
        err.what() + ")");
  }

  MatrixXcd block(2 * n * d, 2 * n * d);
  block.topLeftCorner(n * d, n * d) = blockA;
  block.topRightCorner(n * d, n * d) = blockB;
  block.bottomLeftCorner(n * d, n * d) = -blockB.conjugate();
  block.bottomRightCorner(n * d, n * d) = -blockA.conjugate();

  const SvdCheck block_check = svd_check(block);
  if (block_check.singular)
    throw DegenerateConfigurationError(
        "degenerate configuration: singular constraint block system "
        "(condition estimate " +
        std::to_string(block_check.condition) + ")");

  // Unit-velocity basis right-hand sides: column j for v_j = 1 (top slots
  // conj(f_j)), column n+j for v_j* = 1 (bottom slots -f_j).
  MatrixXcd rhs = MatrixXcd::Zero(2 * n * d, 2 * n);
  for (int j = 0; j < n; ++j)
    for (int mu = 0; mu < d; ++mu) {
      rhs(j * d + mu, j) = std::conj(bras_f[j](mu));
      rhs(n * d + j * d + mu, n + j) = -bras_f[j](mu);
    }
  const MatrixXcd basis = block.partialPivLu().solve(rhs);

  // Normalizations <f_k|e_k> = 1 and their conjugates as a 2n x 2n system in
  // the independent unknowns (v, v*).
  MatrixXcd t1(n, n), t2(n, n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j) {
      t1(k, j) = bras_f[k].dot(basis.col(j).segment(n * d + k * d, d));
      t2(k, j) = bras_f[k].dot(basis.col(n + j).segment(n * d + k * d, d));
    }
  MatrixXcd vel_sys(2 * n, 2 * n);
  vel_sys.topLeftCorner(n, n) = t1;
  vel_sys.topRightCorner(n, n) = t2;
  vel_sys.bottomLeftCorner(n, n) = t2.conjugate();
  vel_sys.bottomRightCorner(n, n) = t1.conjugate();

  const SvdCheck vel_check = svd_check(vel_sys);
  if (vel_check.singular)
    throw DegenerateVelocityError(
        "degenerate velocity system: singular normalization system "
        "(condition estimate " +
        std::to_string(vel_check.condition) + ")");
  const VectorXcd vv = vel_sys.partialPivLu().solve(VectorXcd::Ones(2 * n));

  // The two halves must be conjugate mirrors of each other.
  double mirror = 0.0;
  double vmax = 1.0;
  for (int j = 0; j < n; ++j) {
    mirror = std::max(mirror, std::abs(vv(n + j) - std::conj(vv(j))));
    vmax = std::max(vmax, std::abs(vv(j)));
  }
  if (mirror > 1e-6 * vmax)
    throw ConstructionFailedError(
        "construction failed: velocity solution is not conjugate-symmetric "
        "(mismatch " +
        std::to_string(mirror) + ")");

  std::vector<Complex> vels(n);
  VectorXcd weights(2 * n);
  for (int j = 0; j < n; ++j) {
    vels[j] = 0.5 * (vv(j) + std::conj(vv(n + j)));
    weights(j) = vels[j];
    weights(n + j) = std::conj(vels[j]);
  }
  const VectorXcd solution = basis * weights;
  std::vector<KetVec> kets(n);
  for (int k = 0; k < n; ++k)
    kets[k] = solution.segment(n * d + k * d, d);

  fill_info(info, block_check.condition, vel_check.condition);
  return make_state(kc, poles_a, vels, kets, bras_f);
}

ScmState solve_backlund_state(const KernelCase& kc, Complex cross_shift,
                              const std::vector<Complex>& poles_a,
                              const std::vector<BraVec>& bras_f,
                              const std::vector<Complex>& poles_b,
                              const std::vector<KetVec>& kets_g,
                              BtSolveInfo* info) {
  const int n = static_cast<int>(poles_a.size());
  const int m = static_cast<int>(poles_b.size());
  if (n + m == 0) throw DomainError("soliton solve: empty pole lists");
  const int d = static_cast<int>(n > 0 ? bras_f[0].size() : kets_g[0].size());
  check_family_shapes(poles_a, bras_f, "a", d);
  check_family_shapes(poles_b, kets_g, "b", d);
  check_distinct(kc, poles_a, "a");
  check_distinct(kc, poles_b, "b");

  ScmState s;
  s.kernel = kc;
  s.time = 0.0;
  s.poles_a = poles_a;
  s.bras_f = bras_f;
  s.poles_b = poles_b;
  s.kets_g = kets_g;

  // A single particle interacts with nothing: its velocity vanishes and the
  // Backlund equations leave the remaining spin half free up to the
  // normalization; take the minimum-norm representative.
  if (n + m == 1) {
    if (n == 1) {
      s.vels_a = {Complex{0.0, 0.0}};
      s.kets_e = {KetVec(bras_f[0] / bras_f[0].squaredNorm())};
    } else {
      s.vels_b = {Complex{0.0, 0.0}};
      s.bras_h = {BraVec(kets_g[0] / kets_g[0].squaredNorm())};
    }
    fill_info(info, 1.0, 1.0);
    return s;
  }

  // The cross-shift and pole differences never change during the solve, so
  // precompute every 2i*alpha coefficient once.
  MatrixXcd aa = MatrixXcd::Zero(std::max(n, 1), std::max(n, 1));
  MatrixXcd ab = MatrixXcd::Zero(std::max(n, 1), std::max(m, 1));
  MatrixXcd ba = MatrixXcd::Zero(std::max(m, 1), std::max(n, 1));
  MatrixXcd bb = MatrixXcd::Zero(std::max(m, 1), std::max(m, 1));
  try {
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        if (k != j) aa(j, k) = 2.0 * kI * alpha(kc, poles_a[j] - poles_a[k]);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < m; ++k)
        ab(j, k) =
            2.0 * kI * alpha(kc, poles_a[j] - poles_b[k] + cross_shift);
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < n; ++k)
        ba(j, k) =
            2.0 * kI * alpha(kc, poles_b[j] - poles_a[k] + cross_shift);
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        if (k != j) bb(j, k) = 2.0 * kI * alpha(kc, poles_b[j] - poles_b[k]);
  } catch (const DomainError& err) {
    throw DegenerateConfigurationError(
        std::string("degenerate configuration: kernel pole hit while "
                    "assembling the constraint system (") +
        err.what() + ")");
  }

  // One combined square system in (e, eta = conj(h), v, w); the constraint
  // rows <f_j|e_j> = 1 and <h_k|g_k> = 1 are included directly because the
  // within-family couplings are rank-one and the staged block solve used in
  // the hermitian path can be structurally singular here.
  const int dim = (n + m) * d + (n + m);
  const auto ecol = [d](int k, int nu) { return k * d + nu; };
  const auto etacol = [d, n](int k, int nu) { return (n + k) * d + nu; };
  const auto vcol = [d, n, m](int j) { return (n + m) * d + j; };
  const auto wcol = [d, n, m](int j) { return (n + m) * d + n + j; };

  const auto assemble = [&](const std::vector<KetVec>& g) {
    MatrixXcd sys = MatrixXcd::Zero(dim, dim);
    for (int j = 0; j < n; ++j) {
      for (int mu = 0; mu < d; ++mu) {
        const int row = j * d + mu;
        for (int k = 0; k < n; ++k) {
          if (k == j) continue;
          for (int nu = 0; nu < d; ++nu)
            sys(row, ecol(k, nu)) = aa(j, k) * std::conj(bras_f[k](mu)) *
                                    std::conj(bras_f[j](nu));
        }
        for (int k = 0; k < m; ++k)
          sys(row, etacol(k, mu)) = -ab(j, k) * pairing(bras_f[j], g[k]);
        sys(row, vcol(j)) = -std::conj(bras_f[j](mu));
      }
    }
    for (int j = 0; j < m; ++j) {
      for (int mu = 0; mu < d; ++mu) {
        const int row = n * d + j * d + mu;
        for (int k = 0; k < n; ++k)
          sys(row, ecol(k, mu)) = ba(j, k) * pairing(bras_f[k], g[j]);
        for (int k = 0; k < m; ++k) {
          if (k == j) continue;
          for (int nu = 0; nu < d; ++nu)
            sys(row, etacol(k, nu)) = -bb(j, k) * g[k](mu) * g[j](nu);
        }
        sys(row, wcol(j)) = -g[j](mu);
      }
    }
    for (int j = 0; j < n; ++j) {
      const int row = (n + m) * d + j;
      for (int nu = 0; nu < d; ++nu)
        sys(row, ecol(j, nu)) = std::conj(bras_f[j](nu));
    }
    for (int j = 0; j < m; ++j) {
      const int row = (n + m) * d + n + j;
      for (int nu = 0; nu < d; ++nu) sys(row, etacol(j, nu)) = g[j](nu);
    }
    return sys;
  };

  VectorXcd rhs = VectorXcd::Zero(dim);
  rhs.tail(n + m).setOnes();

  const MatrixXcd sys = assemble(kets_g);
  Eigen::JacobiSVD<MatrixXcd> svd(sys,
                                  Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(kSingularRatio);
  const VectorXcd z = svd.solve(rhs);
  const double misfit = (sys * z - rhs).norm();

  const auto extract = [&](const VectorXcd& zz) {
    s.kets_e.resize(n);
    s.vels_a.resize(n);
    for (int k = 0; k < n; ++k) {
      s.kets_e[k] = zz.segment(ecol(k, 0), d);
      s.vels_a[k] = zz(vcol(k));
    }
    s.bras_h.resize(m);
    s.vels_b.resize(m);
    for (int k = 0; k < m; ++k) {
      s.bras_h[k] = zz.segment(etacol(k, 0), d).conjugate();
      s.vels_b[k] = zz(wcol(k));
    }
  };

  if (misfit <= 1e-8 * std::max(1.0, rhs.norm())) {
    const auto& sv = svd.singularValues();
    double condition = 1.0;
    if (sv(0) > 0.0) {
      const double smallest_kept = sv(svd.rank() - 1);
      condition = std::min(sv(0) / smallest_kept, 1e300);
      if (svd.rank() < dim)
        condition = 1e300;  // rank-deficient: minimum-norm representative used
    }
    extract(z);
    fill_info(info, condition, condition);
    return s;
  }

  if (m == 0)
    throw DegenerateConfigurationError(
        "degenerate configuration: constraint system is inconsistent "
        "(least-squares misfit " +
        std::to_string(misfit) + ")");

  // No exact solution with the prescribed b-side kets (generic for unbalanced
  // families when alpha does not decay at infinity): complete the kets as
  // extra unknowns.  All residual terms are polynomial in the unconjugated
  // unknowns, so the constraint map is holomorphic and a complex Gauss-Newton
  // iteration with minimum-norm steps applies directly.
  const int ext = dim + m * d;
  const auto gcol = [&](int k, int nu) { return dim + k * d + nu; };

  const auto residual_of = [&](const VectorXcd& zz) {
    VectorXcd out = VectorXcd::Zero(dim);
    for (int j = 0; j < n; ++j) {
      for (int mu = 0; mu < d; ++mu) {
        Complex acc = -std::conj(bras_f[j](mu)) * zz(vcol(j));
        for (int k = 0; k < n; ++k) {
          if (k == j) continue;
          Complex dot = 0.0;
          for (int nu = 0; nu < d; ++nu)
            dot += std::conj(bras_f[j](nu)) * zz(ecol(k, nu));
          acc += aa(j, k) * std::conj(bras_f[k](mu)) * dot;
        }
        for (int k = 0; k < m; ++k) {
          Complex dot = 0.0;
          for (int nu = 0; nu < d; ++nu)
            dot += std::conj(bras_f[j](nu)) * zz(gcol(k, nu));
          acc -= ab(j, k) * dot * zz(etacol(k, mu));
        }
        out(j * d + mu) = acc;
      }
    }
    for (int j = 0; j < m; ++j) {
      for (int mu = 0; mu < d; ++mu) {
        Complex acc = -zz(gcol(j, mu)) * zz(wcol(j));
        for (int k = 0; k < n; ++k) {
          Complex dot = 0.0;
          for (int nu = 0; nu < d; ++nu)
            dot += std::conj(bras_f[k](nu)) * zz(gcol(j, nu));
          acc += ba(j, k) * dot * zz(ecol(k, mu));
        }
        for (int k = 0; k < m; ++k) {
          if (k == j) continue;
          Complex dot = 0.0;
          for (int nu = 0; nu < d; ++nu)
            dot += zz(gcol(j, nu)) * zz(etacol(k, nu));
          acc -= bb(j, k) * zz(gcol(k, mu)) * dot;
        }
        out(n * d + j * d + mu) = acc;
      }
    }
    for (int j = 0; j < n; ++j) {
      Complex dot = 0.0;
      for (int nu = 0; nu < d; ++nu)
        dot += std::conj(bras_f[j](nu)) * zz(ecol(j, nu));
      out((n + m) * d + j) = dot - 1.0;
    }
    for (int j = 0; j < m; ++j) {
      Complex dot = 0.0;
      for (int nu = 0; nu < d; ++nu)
        dot += zz(etacol(j, nu)) * zz(gcol(j, nu));
      out((n + m) * d + n + j) = dot - 1.0;
    }
    return out;
  };

  const auto jacobian_of = [&](const VectorXcd& zz) {
    MatrixXcd jac = MatrixXcd::Zero(dim, ext);
    for (int j = 0; j < n; ++j) {
      for (int mu = 0; mu < d; ++mu) {
        const int row = j * d + mu;
        jac(row, vcol(j)) = -std::conj(bras_f[j](mu));
        for (int k = 0; k < n; ++k) {
          if (k == j) continue;
          for (int nu = 0; nu < d; ++nu)
            jac(row, ecol(k, nu)) = aa(j, k) * std::conj(bras_f[k](mu)) *
                                    std::conj(bras_f[j](nu));
        }
        for (int k = 0; k < m; ++k) {
          Complex dot = 0.0;
          for (int nu = 0; nu < d; ++nu)
            dot += std::conj(bras_f[j](nu)) * zz(gcol(k, nu));
          jac(row, etacol(k, mu)) = -ab(j, k) * dot;
          for (int nu = 0; nu < d; ++nu)
            jac(row, gcol(k, nu)) =
                -ab(j, k) * std::conj(bras_f[j](nu)) * zz(etacol(k, mu));
        }
      }
    }
    for (int j = 0; j < m; ++j) {
      for (int mu = 0; mu < d; ++mu) {
        const int row = n * d + j * d + mu;
        jac(row, wcol(j)) = -zz(gcol(j, mu));
        jac(row, gcol(j, mu)) += -zz(wcol(j));
        for (int k = 0; k < n; ++k) {
          Complex dot = 0.0;
          for (int nu = 0; nu < d; ++nu)
            dot += std::conj(bras_f[k](nu)) * zz(gcol(j, nu));
          jac(row, ecol(k, mu)) = ba(j, k) * dot;
          for (int nu = 0; nu < d; ++nu)
            jac(row, gcol(j, nu)) +=
                ba(j, k) * std::conj(bras_f[k](nu)) * zz(ecol(k, mu));
        }
        for (int k = 0; k < m; ++k) {
          if (k == j) continue;
          Complex dot = 0.0;
          for (int nu = 0; nu < d; ++nu)
            dot += zz(gcol(j, nu)) * zz(etacol(k, nu));
          jac(row, gcol(k, mu)) += -bb(j, k) * dot;
          for (int nu = 0; nu < d; ++nu) {
            jac(row, etacol(k, nu)) = -bb(j, k) * zz(gcol(k, mu)) *
                                      zz(gcol(j, nu));
            jac(row, gcol(j, nu)) +=
                -bb(j, k) * zz(gcol(k, mu)) * zz(etacol(k, nu));
          }
        }
      }
    }
    for (int j = 0; j < n; ++j) {
      const int row = (n + m) * d + j;
      for (int nu = 0; nu < d; ++nu)
        jac(row, ecol(j, nu)) = std::conj(bras_f[j](nu));
    }
    for (int j = 0; j < m; ++j) {
      const int row = (n + m) * d + n + j;
      for (int nu = 0; nu < d; ++nu) {
        jac(row, etacol(j, nu)) = zz(gcol(j, nu));
        jac(row, gcol(j, nu)) = zz(etacol(j, nu));
      }
    }
    return jac;
  };

  // Minimum-norm linear seed for a given set of kets.
  const auto linear_seed = [&](const std::vector<KetVec>& g) {
    const MatrixXcd m0 = assemble(g);
    Eigen::JacobiSVD<MatrixXcd> dec(m0,
                                    Eigen::ComputeThinU | Eigen::ComputeThinV);
    dec.setThreshold(kSingularRatio);
    return VectorXcd(dec.solve(rhs));
  };

  const double conv_tol = 1e-12 * std::sqrt(static_cast<double>(n + m));
  Rng perturb_rng(0x50117055u);
  double best_norm = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 10; ++attempt) {
    std::vector<KetVec> g_seed = kets_g;
    if (attempt > 0) {
      for (auto& gk : g_seed) {
        const double scale = 0.4 * gk.norm() * std::min(attempt, 4);
        for (int nu = 0; nu < d; ++nu)
          gk(nu) += scale * perturb_rng.complex_normal();
      }
    }
    VectorXcd zz(ext);
    zz.head(dim) = linear_seed(g_seed);
    for (int k = 0; k < m; ++k)
      for (int nu = 0; nu < d; ++nu) zz(gcol(k, nu)) = g_seed[k](nu);

    // Levenberg-Marquardt on |F|^2: regularized normal equations keep the
    // steps well-defined even though the system is underdetermined.
    VectorXcd fval = residual_of(zz);
    double fnorm = fval.norm();
    double mu = 1e-3;
    bool stalled = false;
    for (int iter = 0; iter < 200 && fnorm > conv_tol && !stalled; ++iter) {
      const MatrixXcd jac = jacobian_of(zz);
      const MatrixXcd normal = jac.adjoint() * jac;
      const VectorXcd grad = jac.adjoint() * fval;
      const double diag_scale = std::max(normal.diagonal().real().maxCoeff(),
                                         1e-30);
      bool improved = false;
      for (int grow = 0; grow < 40; ++grow) {
        MatrixXcd damped = normal;
        damped.diagonal().array() += mu * diag_scale;
        const VectorXcd step = damped.ldlt().solve(-grad);
        const VectorXcd trial = zz + step;
        const VectorXcd ftrial = residual_of(trial);
        if (ftrial.norm() < fnorm) {
          zz = trial;
          fval = ftrial;
          fnorm = ftrial.norm();
          mu = std::max(mu * 0.35, 1e-14);
          improved = true;
          break;
        }
        mu *= 8.0;
      }
      stalled = !improved;
    }
    best_norm = std::min(best_norm, fnorm);
    if (fnorm > conv_tol) continue;

    extract(zz);
    double g_shift = 0.0;
    double g_scale = 0.0;
    s.kets_g.resize(m);
    for (int k = 0; k < m; ++k) {
      s.kets_g[k] = zz.segment(gcol(k, 0), d);
      g_shift += (s.kets_g[k] - kets_g[k]).squaredNorm();
      g_scale += kets_g[k].squaredNorm();
    }
    Eigen::JacobiSVD<MatrixXcd> jd(jacobian_of(zz));
    const auto& jsv = jd.singularValues();
    double condition = 1e300;
    if (jsv(dim - 1) > 0.0)
      condition = std::min(jsv(0) / jsv(dim - 1), 1e300);
    fill_info(info, condition, condition);
    if (info) {
      info->spins_completed = true;
      info->spin_adjustment = std::sqrt(g_shift / g_scale);
    }
    return s;
  }
  throw ConstructionFailedError(
      "construction failed: the prescribed spin data admit no "
      "Backlund-consistent completion (best residual " +
      std::to_string(best_norm) + " after Gauss-Newton)");
}

FlowSpec soliton_flow(const SolitonData& data) {
  FlowSpec flow;
  flow.kind = data.hermitian ? FlowKind::FirstOrderBTHermitian
                             : FlowKind::FirstOrderBT;
  if (data.equation == Equation::SpinNcILW)
    flow.cross_shift = Complex{0.0, data.state0.kernel.delta};
  return flow;
}

namespace {

struct StripBand {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = 0.0;
  const char* text = "";
};

void band_check(const std::vector<Complex>& poles, const StripBand& band,
                const char* family, StripCheck& out) {
  for (std::size_t j = 0; j < poles.size(); ++j) {
    const double im = poles[j].imag();
    const double margin = std::min(im - band.lo, band.hi - im);
    if (margin < out.margin) out.margin = margin;
    if (margin <= 0.0 && out.ok) {
      out.ok = false;
      std::ostringstream os;
      os << "strip violation: pole " << family << "_" << j << " = "
         << cplx(poles[j]) << " outside " << band.text;
      out.violation = os.str();
    }
  }
}

StripCheck strips_of(Equation eq, bool hermitian, const ScmState& s) {
  StripCheck out;
  out.margin = std::numeric_limits<double>::infinity();
  const double delta = s.kernel.delta;
  StripBand band_a, band_b;
  if (eq == Equation::SpinBO) {
    band_a = {-std::numeric_limits<double>::infinity(), 0.0, "Im a < 0"};
    band_b = {0.0, std::numeric_limits<double>::infinity(), "Im b > 0"};
  } else {
    band_a = {-1.5 * delta, -0.5 * delta,
              "-3*delta/2 < Im a < -delta/2"};
    band_b = {0.5 * delta, 1.5 * delta, "delta/2 < Im b < 3*delta/2"};
  }
  band_check(s.poles_a, band_a, "a", out);
  if (!hermitian) band_check(s.poles_b, band_b, "b", out);
  if (s.poles_a.empty() && s.poles_b.empty()) out.margin = 0.0;
  return out;
}

}  // namespace

StripCheck check_strips(const SolitonData& data) {
  return strips_of(data.equation, data.hermitian, data.state0);
}

StripCheck check_strips(const SolitonData& data, const ScmState& at) {
  return strips_of(data.equation, data.hermitian, at);
}

std::string CertifyReport::summary() const {
  std::ostringstream os;
  os << "normalization " << normalization_residual << ", backlund "
     << backlund_residual << ", strip margin " << strip_margin
     << (strips_ok ? "" : " (violated)") << ", tolerance " << tolerance
     << " -> " << (pass ? "pass" : "FAIL");
  return os.str();
}

CertifyReport certify(const SolitonData& data) {
  CertifyReport report;
  report.tolerance = data.certification_tol;
  const ScmState& s = data.state0;
  double norm_res = 0.0;
  for (int j = 0; j < s.n(); ++j)
    norm_res = std::max(norm_res,
                        std::abs(pairing(s.bras_f[j], s.kets_e[j]) - 1.0));
  for (int k = 0; k < s.m(); ++k)
    norm_res = std::max(norm_res,
                        std::abs(pairing(s.bras_h[k], s.kets_g[k]) - 1.0));
  report.normalization_residual = norm_res;
  report.backlund_residual =
      backlund_residual(s, soliton_flow(data)).max_residual();
  const StripCheck strips = check_strips(data);
  report.strips_ok = strips.ok;
  report.strip_margin = strips.margin;
  report.pass = strips.ok && norm_res <= report.tolerance &&
                report.backlund_residual <= report.tolerance;
  return report;
}

namespace {

void check_equation_case(const KernelCase& kc, Equation eq) {
  if (eq == Equation::SpinBO && kc.kind == CaseKind::Hyperbolic)
    throw ConfigError(
        "spin Benjamin-Ono construction requires the rational or "
        "trigonometric case");
  if (eq == Equation::SpinNcILW && kc.kind != CaseKind::Hyperbolic)
    throw ConfigError(
        "spin non-chiral ILW construction requires the hyperbolic case");
}

SolitonData package(Equation eq, bool hermitian, ScmState state,
                    const BtSolveInfo& info, double tol) {
  SolitonData data;
  data.equation = eq;
  data.hermitian = hermitian;
  data.state0 = std::move(state);
  data.certification_tol = tol;
  data.condition_block = info.condition_block;
  data.condition_velocity = info.condition_velocity;
  data.conditioning_flagged = info.flagged;
  data.spins_completed = info.spins_completed;
  data.spin_adjustment = info.spin_adjustment;
  const CertifyReport report = certify(data);
  if (!report.pass)
    throw ConstructionFailedError("construction failed certification: " +
                                  report.summary());
  return data;
}

void require_strips(Equation eq, bool hermitian, const ScmState& probe) {
  const StripCheck strips = strips_of(eq, hermitian, probe);
  if (!strips.ok) throw StripViolationError(strips.violation);
}

}  // namespace

SolitonData solve_initial_data(const KernelCase& kc, Equation eq,
                               const std::vector<Complex>& poles_a,
                               const std::vector<BraVec>& bras_f,
                               double certification_tol) {
  check_equation_case(kc, eq);
  ScmState probe;
  probe.kernel = kc;
  probe.poles_a = poles_a;
  require_strips(eq, true, probe);
  const Complex shift =
      eq == Equation::SpinNcILW ? Complex{0.0, kc.delta} : Complex{0.0, 0.0};
  BtSolveInfo info;
  ScmState state =
      solve_backlund_state_hermitian(kc, shift, poles_a, bras_f, &info);
  return package(eq, true, std::move(state), info, certification_tol);
}

SolitonData solve_initial_data_general(const KernelCase& kc, Equation eq,
                                       const std::vector<Complex>& poles_a,
                                       const std::vector<BraVec>& bras_f,
                                       const std::vector<Complex>& poles_b,
                                       const std::vector<KetVec>& kets_g,
                                       double certification_tol) {
  check_equation_case(kc, eq);
  ScmState probe;
  probe.kernel = kc;
  probe.poles_a = poles_a;
  probe.poles_b = poles_b;
  require_strips(eq, false, probe);
  const Complex shift =
      eq == Equation::SpinNcILW ? Complex{0.0, kc.delta} : Complex{0.0, 0.0};
  BtSolveInfo info;
  ScmState state =
      solve_backlund_state(kc, shift, poles_a, bras_f, poles_b, kets_g, &info);
  return package(eq, false, std::move(state), info, certification_tol);
}

ScmState state_at(const SolitonData& data, double t,
                  const IntegrateOptions& opts) {
  if (t == data.state0.time) return data.state0;
  const IntegrationReport run =
      integrate(data.state0, soliton_flow(data), {t}, opts);
  return run.samples.back().state;
}

namespace {

// Shared pole-sum evaluator: S(x) = i sum_j P_j alpha(x - a_j - shift_a)
// minus, in general mode, i sum_k Q_k alpha(x - b_k - shift_b); hermitian
// mode returns S + S^dagger, which is hermitian exactly.
SpinMatrix pole_sum(const SolitonData& data, const ScmState& at, double x,
                    Complex shift_a, Complex shift_b) {
  const int d = data.d();
  SpinMatrix sum = SpinMatrix::Zero(d, d);
  for (int j = 0; j < at.n(); ++j)
    sum += kI * alpha(at.kernel, x - at.poles_a[j] - shift_a) *
           outer(at.kets_e[j], at.bras_f[j]);
  if (data.hermitian) return sum + SpinMatrix(sum.adjoint());
  for (int k = 0; k < at.m(); ++k)
    sum -= kI * alpha(at.kernel, x - at.poles_b[k] - shift_b) *
           outer(at.kets_g[k], at.bras_h[k]);
  return sum;
}

}  // namespace

SpinMatrix eval_sbo(const SolitonData& data, const ScmState& at, double x) {
  if (data.equation != Equation::SpinBO)
    throw ConfigError("eval_sbo called on non-sBO soliton data");
  const StripCheck strips = check_strips(data, at);
  if (!strips.ok)
    throw StripViolationError(strips.violation + " at t = " +
                              std::to_string(at.time));
  return pole_sum(data, at, x, Complex{0.0, 0.0}, Complex{0.0, 0.0});
}

SpinMatrix eval_sbo(const SolitonData& data, double t, double x) {
  return eval_sbo(data, state_at(data, t), x);
}

std::pair<SpinMatrix, SpinMatrix> eval_sncilw(const SolitonData& data,
                                              const ScmState& at, double x) {
  if (data.equation != Equation::SpinNcILW)
    throw ConfigError("eval_sncilw called on non-sncILW soliton data");
  const StripCheck strips = check_strips(data, at);
  if (!strips.ok)
    throw StripViolationError(strips.violation + " at t = " +
                              std::to_string(at.time));
  const Complex half_shift{0.0, 0.5 * at.kernel.delta};
  SpinMatrix u = pole_sum(data, at, x, half_shift, -half_shift);
  SpinMatrix v = -pole_sum(data, at, x, -half_shift, half_shift);
  return {std::move(u), std::move(v)};
}

std::pair<SpinMatrix, SpinMatrix> eval_sncilw(const SolitonData& data,
                                              double t, double x) {
  return eval_sncilw(data, state_at(data, t), x);
}

double one_soliton_velocity(const KernelCase& kc, Complex a0) {
  const Complex v = -2.0 * kI * alpha(kc, a0 - std::conj(a0));
  if (std::abs(v.imag()) > 1e-12 * std::max(1.0, std::abs(v.real())))
    throw DomainError("one-soliton velocity is not real");
  return v.real();
}

SpinMatrix OneSoliton::operator()(double x, double t) const {
  const SpinMatrix s =
      kI * alpha(kernel, x - a0 - velocity * t) * projector;
  return s + SpinMatrix(s.adjoint());
}

OneSoliton one_soliton(const KernelCase& kc, Complex a0, const BraVec& f) {
  if (kc.kind == CaseKind::Hyperbolic)
    throw ConfigError(
        "one-soliton closed form requires the rational or trigonometric "
        "case");
  if (a0.imag() >= 0.0)
    throw StripViolationError("strip violation: one-soliton pole " + cplx(a0) +
                              " requires Im a0 < 0");
  if (f.norm() == 0.0) throw DomainError("one-soliton: zero spin vector");
  OneSoliton out;
  out.kernel = kc;
  out.a0 = a0;
  out.velocity = one_soliton_velocity(kc, a0);
  out.projector = outer(f, f) / f.squaredNorm();
  return out;
}

SolitonData gauge_rescaled(const SolitonData& data,
                           const std::vector<Complex>& c) {
  if (static_cast<int>(c.size()) != data.n() + data.m())
    throw DomainError("gauge rescaling needs one factor per particle");
  for (Complex cj : c)
    if (std::abs(cj) == 0.0)
      throw DomainError("gauge rescaling factors must be nonzero");
  SolitonData out = data;
  for (int j = 0; j < data.n(); ++j) {
    out.state0.kets_e[j] *= c[j];
    out.state0.bras_f[j] /= std::conj(c[j]);
  }
  for (int k = 0; k < data.m(); ++k) {
    out.state0.kets_g[k] *= c[data.n() + k];
    out.state0.bras_h[k] /= std::conj(c[data.n() + k]);
  }
  return out;
}

}  // namespace solitonlab
