#pragma once

#include "dissynth/lmi.hpp"
#include "dissynth/sdp.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace dissynth {

enum class SynthesisMode { Stabilize, Hinf };

/// Smoothing term mu * d: sum of squared Frobenius norms, or of plain ones.
enum class Smoothing { SquaredFrobenius, Frobenius };

std::string_view to_string(SynthesisMode mode);

struct AdmmConfig
{
  double rho = 1e-3;
  double mu = 1e-3;
  bool accelerated = false;
  bool restart = false;
  int max_iter = 200;
  double tol_primal = 1e-6;
  double tol_dual = 1e-6;
  double margin = 1e-6;
  SynthesisMode mode = SynthesisMode::Stabilize;
  Smoothing smoothing = Smoothing::SquaredFrobenius;
  SdpSettings sdp{1e-10, 1e-10, 200, 1e-10, 0.99};
  unsigned threads = 0;  ///< workers for the local step; 0 = hardware concurrency

  /// Throws InvalidInput on non-positive parameters or rho > mu with acceleration.
  void validate() const;
};

struct ResidualRecord
{
  int k = 0;
  double primal = 0.0;
  double dual = 0.0;
  std::optional<double> eta;
  double elapsed_ms = 0.0;
};

using ResidualTrace = std::vector<ResidualRecord>;

/// Which subproblem failed and why; index is the subsystem for local stages.
class SubproblemFailure : public std::runtime_error
{
public:
  enum class Stage { Local, Global, Polish };
  SubproblemFailure(Stage stage, std::optional<std::size_t> index, SdpStatus status, const std::string& what)
    : std::runtime_error(what), stage(stage), index(index), status(status)
  {}
  Stage stage;
  std::optional<std::size_t> index;
  SdpStatus status;
};

/// Iterates of the scaled consensus ADMM.  Only the S_i blocks are coupled;
/// P_i, Y_i stay local and eta lives in the global block.
struct AdmmState
{
  int k = 0;
  std::vector<Index> offsets;  ///< start of block i in the coupled vectors
  Vector y;                    ///< local copies svec(S_i), stacked
  std::vector<Matrix> P;
  std::vector<Matrix> Y;
  Vector v;                    ///< consensus svec(S_i), stacked
  Vector v_prev;
  double eta = 1.0;
  Vector u;                    ///< scaled duals
  Vector u_prev;
  Vector v_bar;
  Vector u_bar;
  double alpha = 1.0;
  double combined_prev = std::numeric_limits<double>::infinity();
  ResidualTrace trace;

  Vector block(const Vector& stacked, std::size_t i) const;
};

/// S = P = Y = I for every block, u = svec(I), eta = 1.
AdmmState initial_state(const InterconnectionProblem& p);

/// argmin mu (|S|^2 + |P|^2 + |Y|^2) + rho/2 |svec S - v_bar + u_bar|^2 over the local LMIs.
LocalCertificate local_step(std::size_t i, const Subsystem& sub, const Vector& v_bar, const Vector& u_bar,
                            const AdmmConfig& cfg);

struct GlobalUpdate
{
  Vector v;
  double eta = 0.0;
};

/// argmin [eta] + mu (sum |S_i|^2 [+ eta^2]) + rho/2 |y - v + u_bar|^2 over the global LMI.
GlobalUpdate global_step(const InterconnectionProblem& p, const Matrix& permutation, const Vector& y,
                         const Vector& u_bar, const std::vector<Index>& offsets, const AdmmConfig& cfg);

/// u = u_bar + y - v.
Vector dual_step(const Vector& u_bar, const Vector& y, const Vector& v);

/// Momentum update of alpha, v_bar, u_bar (with the optional restart).
void accelerate(AdmmState& state, const AdmmConfig& cfg, double combined_residual);

/// (|y - v|, rho |v - v_prev|)
std::pair<double, double> residuals(const AdmmState& state, double rho);

/// alpha_{k+1} = (1 + sqrt(1 + 4 alpha_k^2)) / 2
double next_alpha(double alpha);

/// Holds S fixed and re-solves the smoothed local problem over (P, Y) alone.
LocalCertificate polish_local(std::size_t i, const Subsystem& sub, const Matrix& S, const AdmmConfig& cfg);

enum class AdmmStatus { Converged, MaxIterations, Infeasible, SolverFailure };

std::string_view to_string(AdmmStatus status);

struct AdmmResult
{
  AdmmStatus status = AdmmStatus::MaxIterations;
  std::vector<LocalCertificate> certificates;  ///< consensus S_i with polished P_i, Y_i
  std::optional<double> eta;
  ResidualTrace trace;
  int iterations = 0;
  std::string message;
  std::optional<SubproblemFailure> failure;
};

/// Runs until both residuals meet their tolerances or max_iter.  Stabilize
/// mode requires n_d = n_z = 0.
AdmmResult run_admm(const InterconnectionProblem& p, const AdmmConfig& cfg);

}  // namespace dissynth
