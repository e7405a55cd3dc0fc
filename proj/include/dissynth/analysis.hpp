#pragma once

#include "dissynth/lmi.hpp"
#include "dissynth/model.hpp"

#include <functional>
#include <span>
#include <vector>

namespace dissynth {

/// Largest real part over the eigenvalues of a square matrix.
double spectral_abscissa(const Matrix& A);

struct HinfOptions
{
  double tol = 1e-6;  ///< relative step at which golden-section refinement stops
  double w_min = 1e-4;
  double w_max = 1e4;
  int points = 400;
};

/// Largest singular value of C (jw I - A)^{-1} B + D.
double sigma_max(const StateSpace& ss, double w);

/// sup_w sigma_max over a logarithmic grid (plus w = 0 and the feedthrough
/// limit), refined by golden-section search around the best grid point.
/// Throws InvalidInput for an unstable A.
double hinf_norm(const StateSpace& ss, const HinfOptions& opt = {});

/// Bounded-real-lemma oracle: minimizes gamma^2 subject to
/// [[A'P + PA, PB, C'], [B'P, -gamma^2 I, D'], [C, D, -I]] <= 0, P >= 0
/// with the interior point solver.
double hinf_norm_bounded_real(const StateSpace& ss);

struct Trajectory
{
  double h = 0.0;
  std::vector<double> t;
  Matrix x;  ///< one column per sample
  Matrix d;
  Matrix z;  ///< C x + D d
};

using InputSignal = std::function<Vector(double)>;

/// Classical fixed-step RK4 on dx/dt = A x + B d(t), T/h steps (rounded).
/// Throws NumericalError once |x| exceeds 1e12.
Trajectory simulate(const StateSpace& ss, const InputSignal& d, const Vector& x0, double T, double h);

/// d = 0 on n_d channels.
InputSignal zero_input(Index n_d);

struct DissipationCheck
{
  double max_violation = 0.0;  ///< max over samples of dV/dt minus supply (local and global forms)
  double max_scaled = 0.0;     ///< same, divided by 1 + |x|^2
  double threshold = 1e-8;     ///< pass when max_scaled <= threshold
  bool passed() const { return max_scaled <= threshold; }
};

/// Evaluates dV/dt with V = sum x_i' P_i x_i along the closed-loop vector
/// field and compares it with sum_i [w_i; y_i]' S_i [w_i; y_i] per subsystem
/// and with [d; z]' S [d; z] globally.
DissipationCheck check_dissipation(const Trajectory& traj, const InterconnectionProblem& p,
                                   std::span<const Matrix> gains, std::span<const LocalCertificate> certificates,
                                   const SupplyRate& supply);

}  // namespace dissynth
