#pragma once

#include "dissynth/model.hpp"

#include <cstdint>

namespace dissynth {

/// Counter-based generator: draw(k) = splitmix64(key + k * golden).  Streams
/// for different subsystems come from split(), so adding a subsystem never
/// perturbs the draws of the others.
class CounterRng
{
public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal by Box-Muller; both values of a pair are used.
  double normal();

  /// Independent child stream for index i.
  CounterRng split(std::uint64_t i) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// The three-subsystem network with one disturbance and one performance
/// channel.  d enters subsystem 1's second disturbance channel together with
/// w4, and z = w4 = 0.4 [1 1] x3.
InterconnectionProblem example1();

struct Example2Options
{
  int subsystems = 20;
  Index states = 5;
  Index inputs = 2;
  Index outputs = 2;        ///< also the number of disturbance channels per block
  double density = 0.05;
  Index n_d = 2;
  Index n_z = 2;
  std::uint64_t seed = 1;
  int max_tries = 1000;     ///< per subsystem, for the controllability resample
};

/// Thrown when no controllable (A_i, B_i) pair was found within max_tries.
class GenerationBudgetExceeded : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Random network: A_i shifted so its spectral abscissa is exactly one,
/// B_i, G_i, C_i standard normal, (A_i, B_i) controllable, M_wy with the
/// given density of standard normal entries.  Each d channel drives one
/// random w entry and each z channel reads one random y entry.
InterconnectionProblem generate_example2(const Example2Options& opt);

/// Rank of [B, AB, ..., A^{n-1}B] with singular values above tol * sigma_max.
Index controllability_rank(const Matrix& A, const Matrix& B, double tol = 1e-9);

}  // namespace dissynth
