#include "dissynth/synthesis.hpp"

#include "dissynth/sdp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>

namespace dissynth {

Matrix pinv(const Matrix& B, double rcond)
{
  if (B.size() == 0) {
    return Matrix::Zero(B.cols(), B.rows());
  }
  Eigen::JacobiSVD<Matrix> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double cutoff = rcond * sv(0);
  Vector inv = Vector::Zero(sv.size());
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff) {
      inv(i) = 1.0 / sv(i);
    }
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

namespace {

Matrix solve_spd(const Matrix& P, const Matrix& rhs, std::size_t i)
{
  Eigen::FullPivLU<Matrix> lu(P);
  if (!lu.isInvertible()) {
    throw NumericalError("recover_gains: P_" + std::to_string(i) + " is singular");
  }
  return lu.solve(rhs);
}

double max_eig(const Matrix& X)
{
  if (X.size() == 0) {
    return -std::numeric_limits<double>::infinity();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (X + X.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

double min_eig(const Matrix& X)
{
  return -max_eig(-X);
}

}  // namespace

std::vector<Matrix> recover_gains(std::span<const Matrix> P, std::span<const Matrix> Y, std::span<const Matrix> B)
{
  if (P.size() != Y.size() || P.size() != B.size()) {
    throw InvalidInput("recover_gains: P, Y and B lists differ in length");
  }
  std::vector<Matrix> K;
  K.reserve(P.size());
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (P[i].rows() != P[i].cols() || Y[i].rows() != P[i].rows() || Y[i].cols() != P[i].rows() ||
        B[i].rows() != P[i].rows()) {
      throw InvalidInput("recover_gains: shapes of P, Y, B disagree for subsystem " + std::to_string(i));
    }
    Eigen::JacobiSVD<Matrix> svd(P[i]);
    const Vector sv = svd.singularValues();
    if (sv.size() > 0 && !(sv(sv.size() - 1) > 1e-14 * std::max(1.0, sv(0)))) {
      throw NumericalError("recover_gains: P_" + std::to_string(i) + " is numerically singular");
    }
    K.push_back(pinv(B[i]) * solve_spd(P[i], Y[i], i));
  }
  return K;
}

bool detectability_rank_ok(const InterconnectionProblem& p)
{
  const Matrix O = p.M_zy * stacked_C(p);
  const Index n_y = p.total_outputs();
  if (O.size() == 0) {
    return n_y == 0;
  }
  Eigen::JacobiSVD<Matrix> svd(O);
  const Vector sv = svd.singularValues();
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > 1e-9 * sv(0)) {
      ++rank;
    }
  }
  return rank == n_y;
}

bool VerificationReport::recovery_ok() const
{
  for (double r : recovery_residual) {
    if (!(r <= recovery_threshold)) {
      return false;
    }
  }
  return true;
}

bool VerificationReport::local_ok() const
{
  for (double v : local_lmi) {
    if (!(v <= tol_verify)) {
      return false;
    }
  }
  for (double v : positivity) {
    if (!(v > 0.0)) {
      return false;
    }
  }
  return true;
}

bool VerificationReport::global_ok() const
{
  return global_lmi <= global_threshold;
}

bool VerificationReport::hinf_ok() const
{
  if (!hinf_bound) {
    return true;
  }
  return hinf && *hinf <= *hinf_bound * (1.0 + hinf_rel_tol);
}

bool VerificationReport::passed() const
{
  return recovery_ok() && local_ok() && global_ok() && stable() && hinf_ok();
}

std::string VerificationReport::failures() const
{
  std::vector<std::string> names;
  if (!recovery_ok()) names.emplace_back("gain recovery");
  if (!local_ok()) names.emplace_back("local LMI");
  if (!global_ok()) names.emplace_back("global LMI");
  if (!stable()) names.emplace_back("closed-loop stability");
  if (!hinf_ok()) names.emplace_back("H-infinity bound");
  std::string out;
  for (const auto& n : names) {
    out += (out.empty() ? "" : ", ") + n;
  }
  return out;
}

VerificationReport verify_certificates(const InterconnectionProblem& p, std::span<const Matrix> gains,
                                       std::span<const LocalCertificate> certificates, const SupplyRate& supply,
                                       double margin, double tol_verify)
{
  require_valid(p);
  const std::size_t N = p.subsystems.size();
  if (gains.size() != N || certificates.size() != N) {
    throw InvalidInput("verify_certificates: expected " + std::to_string(N) + " gains and certificates");
  }
  VerificationReport r;
  r.tol_verify = tol_verify;
  r.recovery_threshold = tol_verify;
  r.global_threshold = -margin + tol_verify;

  std::vector<Matrix> S;
  for (std::size_t i = 0; i < N; ++i) {
    const Subsystem& s = p.subsystems[i];
    const LocalCertificate& c = certificates[i];
    Matrix X;
    try {
      X = solve_spd(c.P, c.Y, i);
    } catch (const NumericalError&) {
      X = Matrix::Constant(c.P.rows(), c.P.cols(), std::numeric_limits<double>::infinity());
    }
    const Matrix BBp = s.B * pinv(s.B);
    r.recovery_residual.push_back((BBp * X - X).norm());
    const LocalCertificate substituted{c.S, c.P, c.P * s.B * gains[i]};
    r.local_lmi.push_back(max_eig(local_dissipation_matrix(s, substituted)));
    r.positivity.push_back(min_eig(c.P));
    S.push_back(c.S);
  }
  const Matrix perm = build_permutation(p.dims(), p.n_d, p.n_z);
  r.global_lmi = max_eig(global_lmi_matrix(p, perm, supply, S));
  const StateSpace cl = assemble_closed_loop(p, gains);
  r.abscissa = spectral_abscissa(cl.A);
  r.detectable = detectability_rank_ok(p);
  if (supply.hinf) {
    r.hinf_bound = std::sqrt(supply.eta);
    if (r.stable()) {
      r.hinf = hinf_norm(cl);
    }
  }
  return r;
}

std::string_view to_string(SynthesisStatus status)
{
  switch (status) {
    case SynthesisStatus::Verified: return "verified";
    case SynthesisStatus::VerificationFailed: return "verification-failed";
    case SynthesisStatus::NotConverged: return "not-converged";
    case SynthesisStatus::Infeasible: return "infeasible";
    case SynthesisStatus::SolverFailure: return "solver-failure";
  }
  return "unknown";
}

namespace {

std::vector<Matrix> field(std::span<const LocalCertificate> certs, Matrix LocalCertificate::*member)
{
  std::vector<Matrix> out;
  for (const auto& c : certs) {
    out.push_back(c.*member);
  }
  return out;
}

std::vector<Matrix> input_matrices(const InterconnectionProblem& p)
{
  std::vector<Matrix> out;
  for (const auto& s : p.subsystems) {
    out.push_back(s.B);
  }
  return out;
}

SupplyRate supply_for(const InterconnectionProblem& p, SynthesisMode mode, std::optional<double> eta)
{
  return mode == SynthesisMode::Hinf ? hinf_supply(eta.value_or(0.0), p.n_d, p.n_z) : zero_supply(p.n_d, p.n_z);
}

/// Recovers gains and verifies; keeps `status` unless verification decides it.
void finish(SynthesisResult& res, const InterconnectionProblem& p, double margin, bool converged)
{
  try {
    const auto P = field(res.certificates, &LocalCertificate::P);
    const auto Y = field(res.certificates, &LocalCertificate::Y);
    res.gains = recover_gains(P, Y, input_matrices(p));
  } catch (const NumericalError& e) {
    res.message += (res.message.empty() ? "" : "; ") + std::string(e.what());
    if (converged) {
      res.status = SynthesisStatus::VerificationFailed;
    }
    return;
  }
  res.report = verify_certificates(p, res.gains, res.certificates, supply_for(p, res.mode, res.eta), margin);
  if (converged) {
    res.status = res.report->passed() ? SynthesisStatus::Verified : SynthesisStatus::VerificationFailed;
  }
  if (!res.report->passed()) {
    res.message += (res.message.empty() ? "" : "; ") + ("verification failed: " + res.report->failures());
  }
}

SynthesisResult run_flow(const InterconnectionProblem& p, const AdmmConfig& cfg)
{
  SynthesisResult res;
  res.mode = cfg.mode;
  AdmmResult admm = run_admm(p, cfg);
  res.trace = std::move(admm.trace);
  res.iterations = admm.iterations;
  res.message = admm.message;
  res.eta = admm.eta;
  if (res.eta) {
    res.bound = std::sqrt(*res.eta);
  }
  switch (admm.status) {
    case AdmmStatus::Infeasible: res.status = SynthesisStatus::Infeasible; return res;
    case AdmmStatus::SolverFailure: res.status = SynthesisStatus::SolverFailure; return res;
    case AdmmStatus::MaxIterations: res.status = SynthesisStatus::NotConverged; break;
    case AdmmStatus::Converged: break;
  }
  res.certificates = std::move(admm.certificates);
  finish(res, p, cfg.margin, admm.status == AdmmStatus::Converged);
  return res;
}

}  // namespace

SynthesisResult synthesize_stabilizing(const InterconnectionProblem& p, AdmmConfig cfg)
{
  require_valid(p);
  if (p.n_d != 0 || p.n_z != 0) {
    throw InvalidInput("stabilizing synthesis requires d and z to vanish (n_d = n_z = 0), got n_d = " +
                       std::to_string(p.n_d) + ", n_z = " + std::to_string(p.n_z));
  }
  for (std::size_t i = 0; i < p.subsystems.size(); ++i) {
    if (p.subsystems[i].inputs() == 0) {
      throw InvalidInput("subsystem " + std::to_string(i) + " has no control input");
    }
  }
  cfg.mode = SynthesisMode::Stabilize;
  return run_flow(p, cfg);
}

SynthesisResult synthesize_hinf(const InterconnectionProblem& p, AdmmConfig cfg)
{
  require_valid(p);
  if (p.n_d < 1 || p.n_z < 1) {
    throw InvalidInput("H-infinity synthesis needs at least one disturbance and one performance channel");
  }
  for (std::size_t i = 0; i < p.subsystems.size(); ++i) {
    if (p.subsystems[i].inputs() == 0) {
      throw InvalidInput("subsystem " + std::to_string(i) + " has no control input");
    }
  }
  cfg.mode = SynthesisMode::Hinf;
  SynthesisResult res = run_flow(p, cfg);
  res.detectability_warning = !detectability_rank_ok(p);
  return res;
}

SynthesisResult centralized_synthesis(const InterconnectionProblem& p, SynthesisMode mode, double margin,
                                      const SdpSettings& settings)
{
  require_valid(p);
  const bool hinf = mode == SynthesisMode::Hinf;
  if (hinf && (p.n_d < 1 || p.n_z < 1)) {
    throw InvalidInput("centralized H-infinity synthesis needs n_d, n_z >= 1");
  }
  if (!hinf && (p.n_d != 0 || p.n_z != 0)) {
    throw InvalidInput("centralized stabilizing synthesis requires n_d = n_z = 0");
  }

  VariableLayout layout;
  std::vector<LocalVariables> locals;
  GlobalVariables global;
  for (std::size_t i = 0; i < p.subsystems.size(); ++i) {
    locals.push_back(add_local_variables(layout, p.subsystems[i], std::to_string(i)));
    global.supply_blocks.push_back(locals.back().S);
  }
  if (hinf) {
    global.eta = layout.add_scalar("eta");
  }
  if (layout.size() > kCentralizedLimit) {
    throw InvalidInput("centralized_synthesis: " + std::to_string(layout.size()) +
                       " decision variables exceed the limit of " + std::to_string(kCentralizedLimit));
  }

  SdpProblem prob(layout);
  for (std::size_t i = 0; i < p.subsystems.size(); ++i) {
    auto lmi = local_lmi(p.subsystems[i], prob.layout, locals[i], margin);
    prob.constraints.push_back(std::move(lmi.positivity));
    prob.constraints.push_back(std::move(lmi.dissipation));
  }
  const Matrix perm = build_permutation(p.dims(), p.n_d, p.n_z);
  const SupplyRate supply = hinf ? hinf_supply(0.0, p.n_d, p.n_z) : zero_supply(p.n_d, p.n_z);
  prob.constraints.push_back(global_lmi(p, perm, supply, prob.layout, global, margin));
  if (hinf) {
    prob.add_linear_scalar(*global.eta, 1.0);
    prob.add_lower_bound(*global.eta, 0.0);
  } else {
    for (const auto& v : locals) {
      const MatrixVariable& P = prob.layout[v.P];
      const Vector diag = prob.layout.coordinates(v.P, Matrix::Identity(P.rows, P.rows));
      prob.linear.segment(P.offset, P.size()) += diag;
    }
  }

  const SdpSolution sol = solve_sdp(prob, settings);
  SynthesisResult res;
  res.mode = mode;
  res.message = "centralized solve: " + std::string(to_string(sol.status));
  if (sol.status == SdpStatus::Infeasible) {
    res.status = SynthesisStatus::Infeasible;
    return res;
  }
  if (sol.status != SdpStatus::Optimal) {
    res.status = SynthesisStatus::SolverFailure;
    return res;
  }
  for (const auto& v : locals) {
    res.certificates.push_back({sol.value(prob, v.S), sol.value(prob, v.P), sol.value(prob, v.Y)});
  }
  if (hinf) {
    res.eta = std::max(0.0, sol.x(prob.layout[*global.eta].offset));
    res.bound = std::sqrt(*res.eta);
    res.detectability_warning = !detectability_rank_ok(p);
  }
  finish(res, p, margin, true);
  return res;
}

}  // namespace dissynth
