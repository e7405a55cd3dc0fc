#pragma once

#include "dissynth/model.hpp"

#include <random>

namespace dissynth::testing {

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols)
{
  std::normal_distribution<double> nd;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      m(i, j) = nd(rng);
    }
  }
  return m;
}

inline Matrix random_symmetric(std::mt19937_64& rng, Index k)
{
  const Matrix m = random_matrix(rng, k, k);
  return 0.5 * (m + m.transpose());
}

/// Random well-formed problem with small channel counts.
inline InterconnectionProblem random_problem(std::mt19937_64& rng, int max_subsystems = 3)
{
  std::uniform_int_distribution<int> count(1, max_subsystems);
  std::uniform_int_distribution<int> small(1, 3);
  std::uniform_int_distribution<int> channel(0, 2);
  InterconnectionProblem p;
  const int N = count(rng);
  for (int i = 0; i < N; ++i) {
    const Index n = small(rng);
    Subsystem s;
    s.A = random_matrix(rng, n, n);
    s.B = random_matrix(rng, n, small(rng));
    s.G = random_matrix(rng, n, channel(rng));
    s.C = random_matrix(rng, channel(rng), n);
    p.subsystems.push_back(std::move(s));
  }
  p.n_d = channel(rng);
  p.n_z = channel(rng);
  const Index n_w = p.total_disturbances();
  const Index n_y = p.total_outputs();
  p.M_wy = random_matrix(rng, n_w, n_y);
  p.M_wd = random_matrix(rng, n_w, p.n_d);
  p.M_zy = random_matrix(rng, p.n_z, n_y);
  p.M_zd = random_matrix(rng, p.n_z, p.n_d);
  return p;
}

}  // namespace dissynth::testing
