#pragma once

// Acceptance battery: one self-contained check per advertised guarantee of
// the library, each with a pinned tolerance and a runtime budget.  The same
// battery backs the standalone acceptance executable and the CLI `suite`
// verb.
//
//   1. kernel identity battery (1000 random triples per kernel case)
//   2. first-order Backlund flow satisfies the second-order dynamics
//   3. constraint solver residuals and one-soliton velocity closed forms
//   4. spin Benjamin-Ono residuals of certified solitons (both routes)
//   5. spin non-chiral ILW residuals with quadrature transforms
//   6. integral-operator eigenfunction identities
//   7. spectral evolver against the exact periodic one-soliton
//   8. reductions: scalar limit, diagonal decoupling, charge/spin split
//   9. small-delta limits: kernel expansion, matrix KdV, ferromagnet
//  10. bidirectional system on a complex patch
//  11. soliton chirality and gauge invariance
//
// Every randomized criterion draws from its own deterministically seeded
// generator, so a fixed battery seed reproduces byte-identical reports.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace solitonlab {

struct CriterionResult {
  int index = 0;
  std::string name;
  bool pass = false;
  double runtime_seconds = 0.0;
  // Measured quantities as "key=value" pairs (deterministic for a fixed
  // seed; runtime_seconds is the only wall-clock field).
  std::string detail;
};

struct AcceptanceOptions {
  std::uint64_t seed = 42;
  // Invoked after each criterion finishes (progress reporting).
  std::function<void(const CriterionResult&)> on_result;
};

// Runs all criteria in order (a failure does not stop the battery) and
// returns one result per criterion.
std::vector<CriterionResult> run_acceptance_battery(
    const AcceptanceOptions& opts = {});

// True when every result passed.
bool all_passed(const std::vector<CriterionResult>& results);

// "[ 3/11] PASS  name: detail [1.23 s]" -- the one-line report format.
std::string format_result_line(const CriterionResult& r, int total);

}  // namespace solitonlab
