#include "solitonlab/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace solitonlab {

namespace {

const char* kind_name(CaseKind k) {
  switch (k) {
    case CaseKind::Rational:
      return "rational";
    case CaseKind::Trigonometric:
      return "trigonometric";
    default:
      return "hyperbolic";
  }
}

Json vec_to_json(const KetVec& v) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v(i)));
  return out;
}

KetVec vec_from_json(const Json& j) {
  if (!j.is_array() || j.empty())
    throw ConfigError("io: spin vector must be a non-empty array");
  KetVec v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = complex_from_json(j[i]);
  return v;
}

Json complex_list(const std::vector<Complex>& zs) {
  Json out = Json::array();
  for (Complex z : zs) out.push_back(complex_to_json(z));
  return out;
}

std::vector<Complex> complex_list_from(const Json& j) {
  std::vector<Complex> out;
  for (const Json& e : j) out.push_back(complex_from_json(e));
  return out;
}

template <typename V>
std::vector<V> vec_list_from(const Json& j) {
  std::vector<V> out;
  for (const Json& e : j) out.push_back(vec_from_json(e));
  return out;
}

template <typename V>
Json vec_list(const std::vector<V>& vs) {
  Json out = Json::array();
  for (const V& v : vs) out.push_back(vec_to_json(v));
  return out;
}

void append_complex_columns(std::string& header, const std::string& stem,
                            int count) {
  for (int i = 0; i < count; ++i) {
    header += "," + stem + "_" + std::to_string(i) + "_re";
    header += "," + stem + "_" + std::to_string(i) + "_im";
  }
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

Json complex_to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

Complex complex_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError("io: complex values must be [re, im] number pairs");
  return {j[0].get<double>(), j[1].get<double>()};
}

Json kernel_to_json(const KernelCase& kc) {
  Json j;
  j["kind"] = kind_name(kc.kind);
  if (kc.kind == CaseKind::Trigonometric) j["period"] = kc.period_L;
  if (kc.kind == CaseKind::Hyperbolic) j["delta"] = kc.delta;
  return j;
}

KernelCase kernel_from_json(const Json& j) {
  const std::string kind = j.value("kind", "");
  if (kind == "rational") return KernelCase::rational();
  if (kind == "trigonometric") {
    if (!j.contains("period"))
      throw ConfigError("io: trigonometric kernel needs a \"period\"");
    return KernelCase::trigonometric(j["period"].get<double>());
  }
  if (kind == "hyperbolic") {
    if (!j.contains("delta"))
      throw ConfigError("io: hyperbolic kernel needs a \"delta\"");
    return KernelCase::hyperbolic(j["delta"].get<double>());
  }
  throw ConfigError("io: unknown kernel kind \"" + kind +
                    "\" (expected rational/trigonometric/hyperbolic)");
}

Json state_to_json(const ScmState& s) {
  Json j;
  j["kernel"] = kernel_to_json(s.kernel);
  j["time"] = s.time;
  j["poles_a"] = complex_list(s.poles_a);
  j["vels_a"] = complex_list(s.vels_a);
  j["kets_e"] = vec_list(s.kets_e);
  j["bras_f"] = vec_list(s.bras_f);
  j["poles_b"] = complex_list(s.poles_b);
  j["vels_b"] = complex_list(s.vels_b);
  j["kets_g"] = vec_list(s.kets_g);
  j["bras_h"] = vec_list(s.bras_h);
  return j;
}

ScmState state_from_json(const Json& j) {
  ScmState s;
  s.kernel = kernel_from_json(j.at("kernel"));
  s.time = j.value("time", 0.0);
  s.poles_a = complex_list_from(j.at("poles_a"));
  s.vels_a = complex_list_from(j.at("vels_a"));
  s.kets_e = vec_list_from<KetVec>(j.at("kets_e"));
  s.bras_f = vec_list_from<BraVec>(j.at("bras_f"));
  s.poles_b = complex_list_from(j.value("poles_b", Json::array()));
  s.vels_b = complex_list_from(j.value("vels_b", Json::array()));
  s.kets_g = vec_list_from<KetVec>(j.value("kets_g", Json::array()));
  s.bras_h = vec_list_from<BraVec>(j.value("bras_h", Json::array()));
  s.validate();
  return s;
}

Json soliton_to_json(const SolitonData& data) {
  Json j;
  j["format"] = "solitonlab.soliton/1";
  j["equation"] = equation_name(data.equation);
  j["hermitian"] = data.hermitian;
  j["state"] = state_to_json(data.state0);
  j["certification_tol"] = data.certification_tol;
  j["condition_block"] = data.condition_block;
  j["condition_velocity"] = data.condition_velocity;
  j["conditioning_flagged"] = data.conditioning_flagged;
  j["spins_completed"] = data.spins_completed;
  j["spin_adjustment"] = data.spin_adjustment;
  return j;
}

SolitonData soliton_from_json(const Json& j) {
  SolitonData data;
  const std::string eq = j.value("equation", "");
  if (eq == equation_name(Equation::SpinBO)) {
    data.equation = Equation::SpinBO;
  } else if (eq == equation_name(Equation::SpinNcILW)) {
    data.equation = Equation::SpinNcILW;
  } else {
    throw ConfigError("io: unknown equation \"" + eq + "\"");
  }
  data.hermitian = j.value("hermitian", true);
  data.state0 = state_from_json(j.at("state"));
  data.certification_tol = j.value("certification_tol", 1e-10);
  data.condition_block = j.value("condition_block", 1.0);
  data.condition_velocity = j.value("condition_velocity", 1.0);
  data.conditioning_flagged = j.value("conditioning_flagged", false);
  data.spins_completed = j.value("spins_completed", false);
  data.spin_adjustment = j.value("spin_adjustment", 0.0);
  if (data.hermitian && data.state0.m() != 0)
    throw ConfigError("io: hermitian soliton data cannot carry a b-family");
  return data;
}

Json certify_to_json(const CertifyReport& report) {
  Json j;
  j["normalization_residual"] = report.normalization_residual;
  j["backlund_residual"] = report.backlund_residual;
  j["strip_margin"] = report.strip_margin;
  j["strips_ok"] = report.strips_ok;
  j["tolerance"] = report.tolerance;
  j["pass"] = report.pass;
  return j;
}

Json residual_to_json(const ResidualReport& report) {
  Json j;
  j["sup"] = report.sup;
  j["boundary_magnitude"] = report.boundary_magnitude;
  Json rows = Json::array();
  for (int r = 0; r < report.entry_sup.rows(); ++r) {
    Json row = Json::array();
    for (int c = 0; c < report.entry_sup.cols(); ++c)
      row.push_back(report.entry_sup(r, c));
    rows.push_back(row);
  }
  j["entry_sup"] = rows;
  return j;
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("io: cannot open \"" + path + "\" for writing");
  out << j.dump(2) << "\n";
  if (!out) throw ConfigError("io: failed writing \"" + path + "\"");
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("io: cannot open \"" + path + "\"");
  Json j = Json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded())
    throw ConfigError("io: \"" + path + "\" is not valid JSON");
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("io: cannot open \"" + path + "\" for writing");
  out << text;
  if (!out) throw ConfigError("io: failed writing \"" + path + "\"");
}

namespace {

std::string grid_header(const GridField& f) {
  std::string header = "x";
  for (int r = 0; r < f.dim; ++r)
    for (int c = 0; c < f.dim; ++c) {
      const std::string stem =
          "u_" + std::to_string(r) + "_" + std::to_string(c);
      header += "," + stem + "_re," + stem + "_im";
    }
  return header;
}

void grid_row(std::string& out, const GridField& f, int i) {
  out += format_double(f.node(i));
  for (int r = 0; r < f.dim; ++r)
    for (int c = 0; c < f.dim; ++c) {
      out += ",";
      out += format_double(f.values[i](r, c).real());
      out += ",";
      out += format_double(f.values[i](r, c).imag());
    }
  out += "\n";
}

}  // namespace

void write_grid_csv(const std::string& path, const GridField& f) {
  std::string text = grid_header(f) + "\n";
  for (int i = 0; i < f.n(); ++i) grid_row(text, f, i);
  write_text_file(path, text);
}

void write_series_csv(const std::string& path, const EvolutionRun& run) {
  std::string text = "time,trace,trace_sq,hamiltonian,herm_dev,tail_frac\n";
  for (std::size_t i = 0; i < run.series_time.size(); ++i) {
    text += format_double(run.series_time[i]);
    text += "," + format_double(run.series_trace[i]);
    text += "," + format_double(run.series_trace_sq[i]);
    text += "," + format_double(run.series_hamiltonian[i]);
    text += "," + format_double(run.series_herm_dev[i]);
    text += "," + format_double(run.series_tail_frac[i]);
    text += "\n";
  }
  write_text_file(path, text);
}

void write_snapshots_csv(const std::string& path, const EvolutionRun& run) {
  if (run.snapshots.empty()) {
    write_text_file(path, "snapshot,time,x\n");
    return;
  }
  std::string text = "snapshot,time," + grid_header(run.snapshots.front());
  text += "\n";
  for (std::size_t s = 0; s < run.snapshots.size(); ++s) {
    const GridField& f = run.snapshots[s];
    for (int i = 0; i < f.n(); ++i) {
      text += std::to_string(s) + "," + format_double(run.snapshot_times[s]);
      text += ",";
      grid_row(text, f, i);
    }
  }
  write_text_file(path, text);
}

void write_trajectory_csv(const std::string& path,
                          const std::vector<ScmSample>& samples) {
  if (samples.empty()) {
    write_text_file(path, "time,constraint_drift\n");
    return;
  }
  const ScmState& first = samples.front().state;
  const int n = first.n(), m = first.m(), d = first.d();

  std::string header = "time,constraint_drift";
  append_complex_columns(header, "a", n);
  append_complex_columns(header, "va", n);
  for (int j = 0; j < n; ++j) {
    append_complex_columns(header, "e" + std::to_string(j), d);
    append_complex_columns(header, "f" + std::to_string(j), d);
  }
  append_complex_columns(header, "b", m);
  append_complex_columns(header, "vb", m);
  for (int k = 0; k < m; ++k) {
    append_complex_columns(header, "g" + std::to_string(k), d);
    append_complex_columns(header, "h" + std::to_string(k), d);
  }

  std::string text = header + "\n";
  auto put = [&](Complex z) {
    text += ",";
    text += format_double(z.real());
    text += ",";
    text += format_double(z.imag());
  };
  for (const ScmSample& sample : samples) {
    const ScmState& s = sample.state;
    if (s.n() != n || s.m() != m || s.d() != d)
      throw ConfigError("io: trajectory samples changed shape");
    text += format_double(s.time);
    text += "," + format_double(sample.constraint_drift);
    for (Complex z : s.poles_a) put(z);
    for (Complex z : s.vels_a) put(z);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < d; ++i) put(s.kets_e[j](i));
      for (int i = 0; i < d; ++i) put(s.bras_f[j](i));
    }
    for (Complex z : s.poles_b) put(z);
    for (Complex z : s.vels_b) put(z);
    for (int k = 0; k < m; ++k) {
      for (int i = 0; i < d; ++i) put(s.kets_g[k](i));
      for (int i = 0; i < d; ++i) put(s.bras_h[k](i));
    }
    text += "\n";
  }
  write_text_file(path, text);
}

}  // namespace solitonlab
