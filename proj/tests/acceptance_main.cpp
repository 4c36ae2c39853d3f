// Standalone acceptance battery: prints one pass/fail line per criterion
// (with the measured quantities and pinned tolerances) and exits nonzero if
// any criterion fails.  Optional: --seed N  (default 42).

#include <cstdio>
#include <cstdlib>
#include <string>

#include "solitonlab/acceptance.hpp"

int main(int argc, char** argv) {
  std::uint64_t seed = 42;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--seed" && i + 1 < argc) {
      seed = std::strtoull(argv[++i], nullptr, 10);
    } else {
      std::fprintf(stderr, "usage: %s [--seed N]\n", argv[0]);
      return 2;
    }
  }

  std::setvbuf(stdout, nullptr, _IONBF, 0);
  solitonlab::AcceptanceOptions opts;
  opts.seed = seed;
  opts.on_result = [](const solitonlab::CriterionResult& r) {
    std::puts(solitonlab::format_result_line(r, 11).c_str());
  };

  const auto results = solitonlab::run_acceptance_battery(opts);
  int failed = 0;
  for (const auto& r : results) failed += r.pass ? 0 : 1;
  if (failed == 0) {
    std::printf("acceptance: all %zu criteria passed\n", results.size());
    return 0;
  }
  std::printf("acceptance: %d of %zu criteria FAILED\n", failed,
              results.size());
  return 1;
}
