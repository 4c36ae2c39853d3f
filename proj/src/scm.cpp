#include "solitonlab/scm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace solitonlab {

namespace {

// View of the partner family entering the cross terms of the Backlund
// equations: the stored b-family, or the hermitian mirror (a*, f, e).
struct CrossFamily {
  std::vector<Complex> poles;
  const std::vector<KetVec>* kets = nullptr;   // |g_k>
  const std::vector<BraVec>* bras = nullptr;   // <h_k|
};

CrossFamily cross_family(const ScmState& s, FlowKind kind) {
  CrossFamily cf;
  if (kind == FlowKind::FirstOrderBTHermitian) {
    cf.poles.reserve(s.poles_a.size());
    for (Complex a : s.poles_a) cf.poles.push_back(std::conj(a));
    cf.kets = &s.bras_f;  // |f_k>
    cf.bras = &s.kets_e;  // <e_k|
  } else {
    cf.poles = s.poles_b;
    cf.kets = &s.kets_g;
    cf.bras = &s.bras_h;
  }
  return cf;
}

// Spin evolution shared by every flow: |e_j>' = 2i sum |e_k><f_k|e_j> V_jk,
// <f_j|' = -2i sum <f_j|e_k><f_k| V_jk.  Bras are stored as vectors, so their
// components evolve with the conjugated coefficients.
void spin_rhs(const KernelCase& kc, const std::vector<Complex>& poles,
              const std::vector<KetVec>& kets, const std::vector<BraVec>& bras,
              std::vector<KetVec>& dkets, std::vector<BraVec>& dbras) {
  const int n = static_cast<int>(poles.size());
  dkets.resize(n);
  dbras.resize(n);
  for (int j = 0; j < n; ++j) {
    KetVec de = KetVec::Zero(kets[j].size());
    BraVec df = BraVec::Zero(bras[j].size());
    for (int k = 0; k < n; ++k) {
      if (k == j) continue;
      const Complex v = v_pot(kc, poles[j] - poles[k]);
      de += (2.0 * kI * v) * pairing(bras[k], kets[j]) * kets[k];
      df += std::conj(-2.0 * kI * v * pairing(bras[j], kets[k])) * bras[k];
    }
    dkets[j] = de;
    dbras[j] = df;
  }
}

std::vector<Complex> accelerations(const KernelCase& kc,
                                   const std::vector<Complex>& poles,
                                   const std::vector<KetVec>& kets,
                                   const std::vector<BraVec>& bras) {
  const int n = static_cast<int>(poles.size());
  std::vector<Complex> acc(n, Complex{0, 0});
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      if (k == j) continue;
      acc[j] += -4.0 * pairing(bras[j], kets[k]) * pairing(bras[k], kets[j]) *
                v_pot_prime(kc, poles[j] - poles[k]);
    }
  }
  return acc;
}

bool is_first_order(FlowKind kind) { return kind != FlowKind::SecondOrder; }

// ---------------------------------------------------------------------------
// Flattened representation for the adaptive integrator
// ---------------------------------------------------------------------------

void append_vecs(Eigen::VectorXcd& y, Eigen::Index& at, const std::vector<KetVec>& vs) {
  for (const auto& v : vs) {
    y.segment(at, v.size()) = v;
    at += v.size();
  }
}

Eigen::VectorXcd pack(const ScmState& s, const FlowSpec& flow) {
  const Eigen::Index d = s.d();
  const Eigen::Index n = s.n(), m = s.m();
  const bool second = !is_first_order(flow.kind);
  Eigen::VectorXcd y((second ? 2 : 1) * (n + m) + 2 * d * (n + m));
  Eigen::Index at = 0;
  for (Complex a : s.poles_a) y(at++) = a;
  if (second)
    for (Complex v : s.vels_a) y(at++) = v;
  append_vecs(y, at, s.kets_e);
  append_vecs(y, at, s.bras_f);
  for (Complex b : s.poles_b) y(at++) = b;
  if (second)
    for (Complex v : s.vels_b) y(at++) = v;
  append_vecs(y, at, s.kets_g);
  append_vecs(y, at, s.bras_h);
  return y;
}

void take_vecs(const Eigen::VectorXcd& y, Eigen::Index& at, std::vector<KetVec>& vs,
               Eigen::Index d) {
  for (auto& v : vs) {
    v = y.segment(at, d);
    at += d;
  }
}

void unpack(ScmState& s, const Eigen::VectorXcd& y, const FlowSpec& flow) {
  const Eigen::Index d = s.d();
  const bool second = !is_first_order(flow.kind);
  Eigen::Index at = 0;
  for (auto& a : s.poles_a) a = y(at++);
  if (second)
    for (auto& v : s.vels_a) v = y(at++);
  take_vecs(y, at, s.kets_e, d);
  take_vecs(y, at, s.bras_f, d);
  for (auto& b : s.poles_b) b = y(at++);
  if (second)
    for (auto& v : s.vels_b) v = y(at++);
  take_vecs(y, at, s.kets_g, d);
  take_vecs(y, at, s.bras_h, d);
}

// Minimum pole separation relevant to the flow, with a description of the
// closest pair (lattice-aware distances).
std::pair<double, std::string> min_separation(const ScmState& s, const FlowSpec& flow) {
  double best = std::numeric_limits<double>::infinity();
  std::string what = "none";
  auto consider = [&](double dist, const std::string& desc) {
    if (dist < best) {
      best = dist;
      what = desc;
    }
  };
  auto family = [&](const std::vector<Complex>& p, char tag) {
    for (std::size_t j = 0; j < p.size(); ++j)
      for (std::size_t k = j + 1; k < p.size(); ++k) {
        std::ostringstream os;
        os << tag << j << "-" << tag << k;
        consider(pole_distance(s.kernel, p[j] - p[k]), os.str());
      }
  };
  family(s.poles_a, 'a');
  family(s.poles_b, 'b');
  if (flow.kind == FlowKind::FirstOrderBTHermitian) {
    for (int j = 0; j < s.n(); ++j)
      for (int k = 0; k < s.n(); ++k) {
        std::ostringstream os;
        os << "a" << j << "-conj(a" << k << ")";
        consider(pole_distance(s.kernel,
                               s.poles_a[j] - std::conj(s.poles_a[k]) + flow.cross_shift),
                 os.str());
      }
  } else if (flow.kind == FlowKind::FirstOrderBT) {
    for (int j = 0; j < s.n(); ++j)
      for (int k = 0; k < s.m(); ++k) {
        std::ostringstream os;
        os << "a" << j << "-b" << k;
        consider(pole_distance(s.kernel, s.poles_a[j] - s.poles_b[k] + flow.cross_shift),
                 os.str());
      }
  }
  return {best, what};
}

}  // namespace

double ScmState::constraint_drift() const {
  double drift = 0.0;
  for (int j = 0; j < n(); ++j)
    drift = std::max(drift, std::abs(pairing(bras_f[j], kets_e[j]) - 1.0));
  for (int j = 0; j < m(); ++j)
    drift = std::max(drift, std::abs(pairing(bras_h[j], kets_g[j]) - 1.0));
  return drift;
}

void ScmState::validate() const {
  auto family = [](const std::vector<Complex>& poles, const std::vector<Complex>& vels,
                   const std::vector<KetVec>& kets, const std::vector<BraVec>& bras,
                   int d, const char* tag) {
    if (vels.size() != poles.size() || kets.size() != poles.size() ||
        bras.size() != poles.size()) {
      throw DomainError(std::string("ScmState: inconsistent array sizes in family ") +
                        tag);
    }
    for (const auto& v : kets)
      if (v.size() != d) throw DomainError("ScmState: ket dimension mismatch");
    for (const auto& v : bras)
      if (v.size() != d) throw DomainError("ScmState: bra dimension mismatch");
    for (Complex p : poles)
      if (!std::isfinite(p.real()) || !std::isfinite(p.imag()))
        throw DomainError("ScmState: non-finite pole");
  };
  if (poles_a.empty()) throw DomainError("ScmState: family a must be non-empty");
  family(poles_a, vels_a, kets_e, bras_f, d(), "a");
  family(poles_b, vels_b, kets_g, bras_h, d(), "b");
}

ScmState scm_rhs(const ScmState& s, const FlowSpec& flow) {
  ScmState ds = s;  // same shape; values overwritten below
  ds.time = 1.0;    // dt/dt

  spin_rhs(s.kernel, s.poles_a, s.kets_e, s.bras_f, ds.kets_e, ds.bras_f);
  if (s.m() > 0) spin_rhs(s.kernel, s.poles_b, s.kets_g, s.bras_h, ds.kets_g, ds.bras_h);

  if (flow.kind == FlowKind::SecondOrder) {
    ds.poles_a = s.vels_a;
    ds.vels_a = accelerations(s.kernel, s.poles_a, s.kets_e, s.bras_f);
    ds.poles_b = s.vels_b;
    ds.vels_b = accelerations(s.kernel, s.poles_b, s.kets_g, s.bras_h);
    return ds;
  }

  const BtVelocities v = bt_velocities(s, flow);
  ds.poles_a = v.family_a;
  ds.vels_a = v.family_a;
  ds.poles_b = v.family_b;
  ds.vels_b = v.family_b;
  return ds;
}

BtVelocities bt_velocities(const ScmState& s, const FlowSpec& flow) {
  BtVelocities out;
  const CrossFamily cf = cross_family(s, flow.kind);
  const int n = s.n();
  const int mc = static_cast<int>(cf.poles.size());

  out.family_a.assign(n, Complex{0, 0});
  for (int j = 0; j < n; ++j) {
    Complex v{0, 0};
    for (int k = 0; k < n; ++k) {
      if (k == j) continue;
      v += 2.0 * kI * pairing(s.bras_f[j], s.kets_e[k]) *
           pairing(s.bras_f[k], s.kets_e[j]) * alpha(s.kernel, s.poles_a[j] - s.poles_a[k]);
    }
    for (int k = 0; k < mc; ++k) {
      v -= 2.0 * kI * pairing(s.bras_f[j], (*cf.kets)[k]) *
           pairing((*cf.bras)[k], s.kets_e[j]) *
           alpha(s.kernel, s.poles_a[j] - cf.poles[k] + flow.cross_shift);
    }
    out.family_a[j] = v;
  }

  if (flow.kind == FlowKind::FirstOrderBT && s.m() > 0) {
    const int m = s.m();
    out.family_b.assign(m, Complex{0, 0});
    for (int j = 0; j < m; ++j) {
      Complex w{0, 0};
      for (int k = 0; k < m; ++k) {
        if (k == j) continue;
        w -= 2.0 * kI * pairing(s.bras_h[j], s.kets_g[k]) *
             pairing(s.bras_h[k], s.kets_g[j]) *
             alpha(s.kernel, s.poles_b[j] - s.poles_b[k]);
      }
      for (int k = 0; k < n; ++k) {
        w += 2.0 * kI * pairing(s.bras_h[j], s.kets_e[k]) *
             pairing(s.bras_f[k], s.kets_g[j]) *
             alpha(s.kernel, s.poles_b[j] - s.poles_a[k] + flow.cross_shift);
      }
      out.family_b[j] = w;
    }
  }
  return out;
}

ScmAccelerations scm_accelerations(const ScmState& s) {
  ScmAccelerations out;
  out.family_a = accelerations(s.kernel, s.poles_a, s.kets_e, s.bras_f);
  out.family_b = accelerations(s.kernel, s.poles_b, s.kets_g, s.bras_h);
  return out;
}

double BtResidual::max_residual() const {
  double r = 0.0;
  for (double x : family_a) r = std::max(r, x);
  for (double x : family_b) r = std::max(r, x);
  return r;
}

BtResidual backlund_residual(const ScmState& s, const FlowSpec& flow) {
  BtResidual out;
  const CrossFamily cf = cross_family(s, flow.kind);
  const int n = s.n();
  const int mc = static_cast<int>(cf.poles.size());

  // (BTa) is a bra equation; accumulate the residual as the stored-vector
  // representative (conjugated coefficients) and take its norm.
  out.family_a.assign(n, 0.0);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXcd res = std::conj(s.vels_a[j]) * s.bras_f[j];
    for (int k = 0; k < n; ++k) {
      if (k == j) continue;
      const Complex c = 2.0 * kI * pairing(s.bras_f[j], s.kets_e[k]) *
                        alpha(s.kernel, s.poles_a[j] - s.poles_a[k]);
      res -= std::conj(c) * s.bras_f[k];
    }
    for (int k = 0; k < mc; ++k) {
      const Complex c = 2.0 * kI * pairing(s.bras_f[j], (*cf.kets)[k]) *
                        alpha(s.kernel, s.poles_a[j] - cf.poles[k] + flow.cross_shift);
      res += std::conj(c) * (*cf.bras)[k];
    }
    out.family_a[j] = res.norm();
  }

  if (flow.kind == FlowKind::FirstOrderBT && s.m() > 0) {
    const int m = s.m();
    out.family_b.assign(m, 0.0);
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXcd res = s.vels_b[j] * s.kets_g[j];
      for (int k = 0; k < m; ++k) {
        if (k == j) continue;
        res += 2.0 * kI * pairing(s.bras_h[k], s.kets_g[j]) *
               alpha(s.kernel, s.poles_b[j] - s.poles_b[k]) * s.kets_g[k];
      }
      for (int k = 0; k < n; ++k) {
        res -= 2.0 * kI * pairing(s.bras_f[k], s.kets_g[j]) *
               alpha(s.kernel, s.poles_b[j] - s.poles_a[k] + flow.cross_shift) *
               s.kets_e[k];
      }
      out.family_b[j] = res.norm();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dormand-Prince RK5(4) with PI step-size control
// ---------------------------------------------------------------------------

namespace {

constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
// 5th-order weights equal kA[6]; embedded 4th-order weights:
constexpr double kB4[7] = {5179.0 / 57600, 0.0,           7571.0 / 16695, 393.0 / 640,
                           -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

}  // namespace

IntegrationReport integrate(const ScmState& s0, const FlowSpec& flow,
                            const std::vector<double>& sample_times,
                            const IntegrateOptions& opts) {
  s0.validate();
  IntegrationReport report;
  if (sample_times.empty()) return report;

  const double t0 = s0.time;
  const double dir = (sample_times.back() >= t0) ? 1.0 : -1.0;
  double prev = t0;
  for (double t : sample_times) {
    if ((t - prev) * dir < 0.0)
      throw DomainError("integrate: sample times must be monotone from the state time");
    prev = t;
  }

  ScmState work = s0;
  {
    const auto [dist, pair] = min_separation(work, flow);
    if (dist < opts.collision_guard) {
      std::ostringstream os;
      os << "integrate: pole near-collision in the initial state (pair " << pair
         << ", separation " << dist << " < guard " << opts.collision_guard << ")";
      throw ConvergenceError(os.str());
    }
  }
  auto rhs = [&](double t, const Eigen::VectorXcd& y) {
    work.time = t;
    unpack(work, y, flow);
    return pack(scm_rhs(work, flow), flow);
  };

  auto emit = [&](double t, const Eigen::VectorXcd& y) {
    ScmSample sample;
    sample.state = s0;
    sample.state.time = t;
    unpack(sample.state, y, flow);
    if (is_first_order(flow.kind)) {
      const BtVelocities v = bt_velocities(sample.state, flow);
      sample.state.vels_a = v.family_a;
      if (!v.family_b.empty()) sample.state.vels_b = v.family_b;
    }
    sample.constraint_drift = sample.state.constraint_drift();
    report.max_constraint_drift =
        std::max(report.max_constraint_drift, sample.constraint_drift);
    report.samples.push_back(std::move(sample));
  };

  double t = t0;
  Eigen::VectorXcd y = pack(s0, flow);
  Eigen::VectorXcd k[7];
  k[0] = rhs(t, y);
  double h = dir * std::abs(opts.initial_step);
  double err_prev = 1e-4;
  bool warned_drift = false;

  std::size_t next_sample = 0;
  while (next_sample < sample_times.size()) {
    const double target = sample_times[next_sample];
    if ((target - t) * dir <= 1e-14 * std::max(1.0, std::abs(target))) {
      emit(target, y);
      ++next_sample;
      continue;
    }
    if ((t + h - target) * dir > 0.0) h = target - t;
    if (std::abs(h) < 1e-14 * std::max(1.0, std::abs(t))) {
      const auto [dist, pair] = min_separation(work, flow);
      std::ostringstream os;
      os << "integrate: step size underflow at t = " << t
         << " (closest pole pair " << pair << ", separation " << dist << ")";
      throw ConvergenceError(os.str());
    }

    Eigen::VectorXcd stage;
    Eigen::VectorXcd y5;
    try {
      for (int i = 1; i < 7; ++i) {
        stage = y;
        for (int l = 0; l < i; ++l) stage += (h * kA[i][l]) * k[l];
        if (i == 6) y5 = stage;
        k[i] = rhs(t + kC[i] * h, stage);
      }
    } catch (const DomainError&) {
      // A stage landed on a kernel pole; retreat and retry with a smaller step.
      ++report.steps_rejected;
      h *= 0.1;
      continue;
    }

    Eigen::VectorXcd err_vec = Eigen::VectorXcd::Zero(y.size());
    for (int i = 0; i < 7; ++i) {
      const double b5 = (i < 6) ? kA[6][i] : 0.0;
      err_vec += (h * (b5 - kB4[i])) * k[i];
    }

    double err_sq = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double sc =
          opts.abs_tol + opts.rel_tol * std::max(std::abs(y(i)), std::abs(y5(i)));
      err_sq += sq(std::abs(err_vec(i)) / sc);
    }
    const double err = std::sqrt(err_sq / static_cast<double>(y.size()));

    if (!std::isfinite(err)) {
      // Overflowing stages (e.g. approaching a pole): retreat hard; the
      // underflow check above turns persistent failure into a clean abort.
      ++report.steps_rejected;
      h *= 0.1;
      continue;
    }

    if (err <= 1.0) {
      t += h;
      y = y5;
      k[0] = k[6];  // first-same-as-last
      ++report.steps_accepted;

      work.time = t;
      unpack(work, y, flow);
      const auto [dist, pair] = min_separation(work, flow);
      if (dist < opts.collision_guard) {
        std::ostringstream os;
        os << "integrate: pole near-collision at t = " << t << " (pair " << pair
           << ", separation " << dist << " < guard " << opts.collision_guard << ")";
        throw ConvergenceError(os.str());
      }
      const double drift = work.constraint_drift();
      report.max_constraint_drift = std::max(report.max_constraint_drift, drift);
      if (drift > opts.drift_warn && !warned_drift) {
        std::ostringstream os;
        os << "constraint drift " << drift << " exceeded " << opts.drift_warn
           << " at t = " << t;
        report.warnings.push_back(os.str());
        warned_drift = true;
      }
      if (opts.renormalize) {
        for (int j = 0; j < work.n(); ++j)
          work.kets_e[j] /= pairing(work.bras_f[j], work.kets_e[j]);
        for (int j = 0; j < work.m(); ++j)
          work.kets_g[j] /= pairing(work.bras_h[j], work.kets_g[j]);
        y = pack(work, flow);
        k[0] = rhs(t, y);
      }

      const double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.7 / 5.0) *
                         std::pow(err_prev, 0.4 / 5.0);
      h *= std::clamp(fac, 0.2, 5.0);
      err_prev = std::max(err, 1e-4);
    } else {
      ++report.steps_rejected;
      h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 1.0);
    }
  }
  return report;
}

BtCertificate certify_proposition_BT(const ScmState& s0, const FlowSpec& flow,
                                     double t_end, double tol, int samples) {
  if (!is_first_order(flow.kind))
    throw DomainError("certify_proposition_BT: flow must be first order");
  BtCertificate cert;
  cert.tolerance = tol;

  {
    ScmState init = s0;
    const BtVelocities v = bt_velocities(init, flow);
    init.vels_a = v.family_a;
    if (!v.family_b.empty()) init.vels_b = v.family_b;
    cert.initial_residual = backlund_residual(init, flow).max_residual();
  }

  std::vector<double> times(samples + 1);
  for (int i = 0; i <= samples; ++i)
    times[i] = s0.time + t_end * static_cast<double>(i) / samples;

  IntegrateOptions opts;
  const IntegrationReport run = integrate(s0, flow, times, opts);
  cert.max_constraint_drift = run.max_constraint_drift;

  // Velocities of the first-order flow a short time away from a given state,
  // for the finite-difference acceleration probe.
  auto vels_at = [&](const ScmState& from, double dt) {
    const IntegrationReport r = integrate(from, flow, {from.time + dt}, opts);
    const ScmState& st = r.samples.back().state;
    std::vector<Complex> v = st.vels_a;
    v.insert(v.end(), st.vels_b.begin(), st.vels_b.end());
    return v;
  };

  const double h = 1e-3;
  for (const ScmSample& sample : run.samples) {
    cert.max_flow_residual = std::max(
        cert.max_flow_residual, backlund_residual(sample.state, flow).max_residual());

    const auto vp = vels_at(sample.state, h);
    const auto vm = vels_at(sample.state, -h);
    const auto vp2 = vels_at(sample.state, h / 2);
    const auto vm2 = vels_at(sample.state, -h / 2);
    ScmAccelerations acc = scm_accelerations(sample.state);
    std::vector<Complex> expect = acc.family_a;
    expect.insert(expect.end(), acc.family_b.begin(), acc.family_b.end());
    for (std::size_t j = 0; j < expect.size(); ++j) {
      const Complex d1 = (vp[j] - vm[j]) / (2.0 * h);
      const Complex d2 = (vp2[j] - vm2[j]) / h;
      const Complex fd = (4.0 * d2 - d1) / 3.0;
      cert.max_accel_deviation =
          std::max(cert.max_accel_deviation, std::abs(fd - expect[j]));
    }
  }

  cert.pass = cert.initial_residual <= tol && cert.max_flow_residual <= tol &&
              cert.max_accel_deviation <= tol;
  return cert;
}

}  // namespace solitonlab
