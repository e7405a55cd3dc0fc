#pragma once

#include "dissynth/admm.hpp"
#include "dissynth/analysis.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dissynth {

/// Moore-Penrose pseudo-inverse by SVD; singular values below
/// rcond * sigma_max count as zero.
Matrix pinv(const Matrix& B, double rcond = 1e-12);

/// K_i = pinv(B_i) P_i^{-1} Y_i.  Throws NumericalError if some P_i is singular.
std::vector<Matrix> recover_gains(std::span<const Matrix> P, std::span<const Matrix> Y, std::span<const Matrix> B);

/// rank(M_zy blockdiag(C_i)) == n_y, the zero-state detectability condition.
bool detectability_rank_ok(const InterconnectionProblem& p);

struct VerificationReport
{
  std::vector<double> recovery_residual;  ///< |B B^+ P^{-1} Y - P^{-1} Y|_F per subsystem
  std::vector<double> local_lmi;          ///< max eigenvalue with Y := P B K
  std::vector<double> positivity;         ///< min eigenvalue of P
  double global_lmi = 0.0;                ///< max eigenvalue of the global expression
  double abscissa = 0.0;                  ///< closed loop
  bool detectable = false;
  std::optional<double> hinf;             ///< closed-loop H-infinity norm (hinf mode)
  std::optional<double> hinf_bound;       ///< sqrt(eta)

  double tol_verify = 1e-7;
  double recovery_threshold = 1e-7;
  double global_threshold = 0.0;          ///< -margin + tol_verify
  double hinf_rel_tol = 1e-3;

  bool recovery_ok() const;
  bool local_ok() const;
  bool global_ok() const;
  bool stable() const { return abscissa < 0.0; }
  bool hinf_ok() const;
  bool passed() const;
  /// Names of the failed checks, comma separated; empty when passed.
  std::string failures() const;
};

/// Re-evaluates the certificates with the recovered gains substituted.
/// `supply` selects the mode; with an H-infinity supply the closed-loop
/// norm is also compared against sqrt(eta).
VerificationReport verify_certificates(const InterconnectionProblem& p, std::span<const Matrix> gains,
                                       std::span<const LocalCertificate> certificates, const SupplyRate& supply,
                                       double margin, double tol_verify = 1e-7);

enum class SynthesisStatus { Verified, VerificationFailed, NotConverged, Infeasible, SolverFailure };

std::string_view to_string(SynthesisStatus status);

struct SynthesisResult
{
  SynthesisStatus status = SynthesisStatus::NotConverged;
  SynthesisMode mode = SynthesisMode::Stabilize;
  std::vector<Matrix> gains;
  std::optional<double> eta;
  std::optional<double> bound;  ///< sqrt(eta)
  std::vector<LocalCertificate> certificates;
  ResidualTrace trace;
  int iterations = 0;
  std::optional<VerificationReport> report;
  bool detectability_warning = false;
  std::string message;
};

/// Theorem-1 flow: n_d = n_z = 0 and every B_i nonzero, else InvalidInput.
SynthesisResult synthesize_stabilizing(const InterconnectionProblem& p, AdmmConfig cfg);

/// H-infinity flow: n_d, n_z >= 1.  A failed detectability rank only sets
/// the warning flag.
SynthesisResult synthesize_hinf(const InterconnectionProblem& p, AdmmConfig cfg);

/// One SDP over all local and global LMIs, no smoothing.  Minimizes eta in
/// hinf mode; in stabilize mode minimizes the trace of the P_i to keep the
/// certificate bounded.
SynthesisResult centralized_synthesis(const InterconnectionProblem& p, SynthesisMode mode, double margin = 1e-6,
                                      const SdpSettings& settings = {1e-9, 1e-9, 200, 1e-10, 0.99});

/// Upper bound on the decision-vector length centralized_synthesis accepts.
inline constexpr Index kCentralizedLimit = 20000;

}  // namespace dissynth
