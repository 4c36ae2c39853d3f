#pragma once

// Serialization layer shared by the command-line tool and the test drivers:
// JSON records for soliton data, certification and residual reports, and run
// manifests, plus CSV export for sampled grids, sCM trajectories, and
// evolution time series.
//
// Round-trip policy: CSV cells are printed with 17 significant digits; the
// JSON emitter prints the shortest decimal that parses back to the identical
// double.  Either way a written double reloads bit for bit.

#include <string>
#include <vector>

#include <json.hpp>

#include "solitonlab/pde.hpp"
#include "solitonlab/scm.hpp"
#include "solitonlab/solitons.hpp"
#include "solitonlab/transforms.hpp"

namespace solitonlab {

using Json = nlohmann::json;

// %.17g formatting used by every CSV cell.
std::string format_double(double x);

// Complex numbers are stored as [re, im] pairs.
Json complex_to_json(Complex z);
Complex complex_from_json(const Json& j);

Json kernel_to_json(const KernelCase& kc);
KernelCase kernel_from_json(const Json& j);

Json state_to_json(const ScmState& s);
ScmState state_from_json(const Json& j);

// Full soliton record (equation, kernel case, families, spins, velocities,
// certification tolerance, solver diagnostics).  from-json revalidates
// shapes and throws ConfigError on malformed input.
Json soliton_to_json(const SolitonData& data);
SolitonData soliton_from_json(const Json& j);

Json certify_to_json(const CertifyReport& report);
Json residual_to_json(const ResidualReport& report);

// File helpers.  Throw ConfigError on I/O or parse failure.
void write_json_file(const std::string& path, const Json& j);
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Grid CSV: header "x,u_<r>_<c>_re,u_<r>_<c>_im,...", one row per node.
void write_grid_csv(const std::string& path, const GridField& f);

// Invariant time series of an evolution run:
// "time,trace,trace_sq,hamiltonian,herm_dev,tail_frac".
void write_series_csv(const std::string& path, const EvolutionRun& run);

// All snapshots stacked: "snapshot,time,x,u_<r>_<c>_re,...".
void write_snapshots_csv(const std::string& path, const EvolutionRun& run);

// sCM trajectory samples: time, constraint drift, then Re/Im pairs of every
// pole, velocity, and spin component of both families.
void write_trajectory_csv(const std::string& path,
                          const std::vector<ScmSample>& samples);

}  // namespace solitonlab
