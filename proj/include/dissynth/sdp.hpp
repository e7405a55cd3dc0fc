#pragma once

#include "dissynth/lmi.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace dissynth {

/// Convex quadratic objective over packed matrix variables subject to LMIs:
///
///   minimize  1/2 x' H x + c' x + c0   subject to  every constraint.
struct SdpProblem
{
  VariableLayout layout;
  Vector linear;
  Matrix quadratic;  ///< symmetric positive semidefinite
  double constant = 0.0;
  std::vector<LmiConstraint> constraints;

  SdpProblem() = default;
  explicit SdpProblem(VariableLayout vars);

  /// Resizes linear/quadratic after variables were added to `layout`.
  void sync_dimensions();

  /// weight * ||X||_F^2
  void add_squared_norm(VariableId var, double weight);
  /// weight * ||X||_F through an epigraph scalar and an arrow-shaped LMI;
  /// returns the id of the epigraph variable.
  VariableId add_norm(VariableId var, double weight);
  /// weight * ||X - anchor||_F^2
  void add_prox(VariableId var, double weight, const Matrix& anchor);
  /// weight * x for a scalar variable
  void add_linear_scalar(VariableId var, double weight);
  /// x >= lower for a scalar variable (a 1x1 LMI)
  void add_lower_bound(VariableId var, double lower);

  double objective(const Vector& x) const;
};

enum class SdpStatus { Optimal, Infeasible, Unbounded, MaxIterations, NumericalFailure };

std::string_view to_string(SdpStatus status);

struct SdpSettings
{
  double tol_feas = 1e-8;
  double tol_gap = 1e-8;
  int max_iter = 200;
  double static_regularization = 1e-10;
  double step_fraction = 0.99;
  /// Expected magnitude of the solution entries.  The solver works in
  /// x / variable_scale with the objective normalized, so the tolerances
  /// stay meaningful for problems living far from unit scale.
  double variable_scale = 1.0;
};

/// Farkas ray for an infeasible LMI system: Z_l >= 0 with sum_l <F_lj, Z_l>
/// vanishing for every coordinate and a strictly separating constant part,
/// normalized so that the separation equals one.
struct InfeasibilityCertificate
{
  std::vector<Matrix> duals;
  double residual = 0.0;  ///< max-norm of the coordinate part after normalization
};

struct SdpSolution
{
  SdpStatus status = SdpStatus::NumericalFailure;
  Vector x;
  double objective = 0.0;
  double primal_residual = 0.0;  ///< relative, max-norm
  double dual_residual = 0.0;    ///< relative, max-norm
  double gap = 0.0;              ///< relative duality gap
  int iterations = 0;
  std::vector<Matrix> duals;     ///< one multiplier per constraint
  std::optional<InfeasibilityCertificate> certificate;

  Matrix value(const SdpProblem& prob, VariableId var) const { return prob.layout.unpack(x, var); }
};

/// Primal-dual interior point method on the homogeneous embedding of the
/// problem (Nesterov-Todd scaling, Mehrotra predictor-corrector).  Runs
/// single-threaded and is deterministic for identical input.
SdpSolution solve_sdp(const SdpProblem& prob, const SdpSettings& settings = {});

}  // namespace dissynth
