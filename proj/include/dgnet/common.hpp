// Shared basics: scalar/precision policy, error types, a portable deterministic
// RNG, and a tiny deterministic parallel-for. Everything downstream includes this.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace dgnet {

template <class Real>
using MatX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
template <class Real>
using VecX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;
using Eigen::VectorXi;

// Normalization floor: guards divisions when a whole flux block is zero.
// 1e-16 underflows meaningfully in single precision, hence the split.
template <class Real>
constexpr Real beta_floor() {
  if constexpr (sizeof(Real) == sizeof(float)) return Real(1e-7);
  else return Real(1e-16);
}

// ---------------------------------------------------------------------------
// Errors. ConfigError -> exit 2 at the CLI, NumericalError -> exit 3.
// ---------------------------------------------------------------------------

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
  long line = -1;
  explicit ParseError(const std::string& what, long line_no = -1)
      : std::runtime_error(line_no >= 0 ? what + " (line " + std::to_string(line_no) + ")" : what),
        line(line_no) {}
};

struct NumericalError : std::runtime_error {
  long element = -1;  // offending element index, when known
  long step = -1;     // offending time step, when known
  explicit NumericalError(const std::string& what, long elem = -1, long step_no = -1)
      : std::runtime_error(what), element(elem), step(step_no) {}
};

// ---------------------------------------------------------------------------
// Deterministic RNG. std::mt19937_64 supplies the bit stream (its output is
// fully specified), but uniform/normal transforms are hand-rolled because the
// standard distributions are implementation-defined and would break
// byte-identical artifacts across standard libraries.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Modulo bias is irrelevant at the ranges used here (n << 2^64), but the
    // rejection loop keeps the draw exact anyway.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return x % n;
  }

  // Standard normal via Box-Muller (pair cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Derive an independent child stream (splitmix64 of seed and stream id).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// ---------------------------------------------------------------------------
// Deterministic parallel-for: result never depends on the worker count, so
// callers must only write disjoint slots. `nthreads <= 1` runs inline.
// ---------------------------------------------------------------------------

inline void parallel_for(long n, int nthreads, const std::function<void(long, long)>& body) {
  if (n <= 0) return;
  if (nthreads <= 1 || n < 2 * nthreads) {
    body(0, n);
    return;
  }
  const long chunk = (n + nthreads - 1) / nthreads;
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(nthreads));
  for (long t = 0; t < nthreads; ++t) {
    const long lo = t * chunk;
    const long hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace dgnet
