#pragma once

// Shared scalar types, error categories, and small utilities used across the
// library.  Everything numerical is built on std::complex<double> and dense
// Eigen types; no other math dependencies are used.

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace solitonlab {

using Complex = std::complex<double>;

inline constexpr Complex kI{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

// Raised when a kernel or field is evaluated too close to a pole, or when an
// input violates a mathematical precondition (degenerate configuration,
// charge-degenerate decomposition, ...).
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a grid cannot represent the requested field faithfully
// (Fourier-tail energy, insufficient boundary decay, ...).
class ResolutionError : public std::runtime_error {
 public:
  explicit ResolutionError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when an adaptive integration fails to make progress (step underflow,
// near-collision of poles, ...).
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Raised on malformed run configurations or files.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Global worker-thread count used by parallel_for (set from the CLI --threads
// flag; defaults to 1 so that library calls are deterministic and quiet).
int& worker_threads();

// Runs fn(i) for i in [0, n).  With worker_threads() == 1 this is a plain
// loop; otherwise the index range is split into contiguous blocks, one per
// thread.  The partition depends only on (n, thread count), never on timing,
// so reductions assembled per-block stay deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

inline double sq(double x) { return x * x; }

}  // namespace solitonlab
