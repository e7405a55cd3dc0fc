#include "dissynth/admm.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

namespace dissynth {

std::string_view to_string(SynthesisMode mode)
{
  return mode == SynthesisMode::Hinf ? "hinf" : "stabilize";
}

std::string_view to_string(AdmmStatus status)
{
  switch (status) {
    case AdmmStatus::Converged: return "converged";
    case AdmmStatus::MaxIterations: return "max-iterations";
    case AdmmStatus::Infeasible: return "infeasible";
    case AdmmStatus::SolverFailure: return "solver-failure";
  }
  return "unknown";
}

void AdmmConfig::validate() const
{
  if (!(rho > 0.0) || !(mu > 0.0)) {
    throw InvalidInput("ADMM: rho and mu must be positive");
  }
  if (accelerated && rho > mu) {
    throw InvalidInput("ADMM: acceleration requires rho <= mu");
  }
  if (max_iter < 1) {
    throw InvalidInput("ADMM: max_iter must be at least 1");
  }
  if (!(tol_primal > 0.0) || !(tol_dual > 0.0) || !(margin >= 0.0)) {
    throw InvalidInput("ADMM: tolerances must be positive and the margin non-negative");
  }
}

Vector AdmmState::block(const Vector& stacked, std::size_t i) const
{
  const Index start = offsets[i];
  const Index end = i + 1 < offsets.size() ? offsets[i + 1] : stacked.size();
  return stacked.segment(start, end - start);
}

AdmmState initial_state(const InterconnectionProblem& p)
{
  AdmmState st;
  Index total = 0;
  for (const auto& s : p.subsystems) {
    st.offsets.push_back(total);
    total += svec_size(s.disturbances() + s.outputs());
  }
  st.y.resize(total);
  for (std::size_t i = 0; i < p.subsystems.size(); ++i) {
    const auto& s = p.subsystems[i];
    const Index k = s.disturbances() + s.outputs();
    st.y.segment(st.offsets[i], svec_size(k)) = svec(Matrix::Identity(k, k));
    st.P.push_back(Matrix::Identity(s.states(), s.states()));
    st.Y.push_back(Matrix::Identity(s.states(), s.states()));
  }
  st.v = st.y;
  st.v_prev = st.v;
  st.u = st.y;
  st.u_prev = st.u;
  st.v_bar = st.v;
  st.u_bar = st.u;
  return st;
}

namespace {

void require_solved(const SdpSolution& sol, SubproblemFailure::Stage stage, std::optional<std::size_t> index,
                    const std::string& label)
{
  if (sol.status == SdpStatus::Optimal) {
    return;
  }
  std::string what = label + ": " + std::string(to_string(sol.status));
  throw SubproblemFailure(stage, index, sol.status, what);
}

void add_smoothing(SdpProblem& prob, VariableId var, const AdmmConfig& cfg)
{
  if (cfg.smoothing == Smoothing::Frobenius) {
    prob.add_norm(var, cfg.mu);
  } else {
    prob.add_squared_norm(var, cfg.mu);
  }
}

// Iterates live near the prox target, which can sit many orders below 1;
// the interior point termination is only meaningful once that scale is
// divided out.  Coarser scales are the fallback when a solve stalls.
SdpSolution solve_scaled(const SdpProblem& prob, const AdmmConfig& cfg, double magnitude)
{
  SdpSettings st = cfg.sdp;
  double scale = std::clamp(std::max(magnitude, 10.0 * cfg.margin), 1e-8, 1.0);
  SdpSolution sol;
  for (int attempt = 0; attempt < 3; ++attempt) {
    st.variable_scale = scale;
    sol = solve_sdp(prob, st);
    if (sol.status == SdpStatus::Optimal || sol.status == SdpStatus::Infeasible || scale >= 1.0) {
      break;
    }
    scale = std::min(1.0, scale * 100.0);
  }
  return sol;
}

double max_abs(const Vector& v)
{
  return v.size() > 0 ? v.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace

LocalCertificate local_step(std::size_t i, const Subsystem& sub, const Vector& v_bar, const Vector& u_bar,
                            const AdmmConfig& cfg)
{
  const Index k = sub.disturbances() + sub.outputs();
  if (v_bar.size() != svec_size(k) || u_bar.size() != svec_size(k)) {
    throw InvalidInput("local_step: consensus block has the wrong length for subsystem " + std::to_string(i));
  }
  VariableLayout layout;
  const auto vars = add_local_variables(layout, sub);
  SdpProblem prob(layout);
  add_smoothing(prob, vars.S, cfg);
  add_smoothing(prob, vars.P, cfg);
  add_smoothing(prob, vars.Y, cfg);
  prob.add_prox(vars.S, 0.5 * cfg.rho, smat(v_bar - u_bar));
  auto lmi = local_lmi(sub, prob.layout, vars, cfg.margin);
  prob.constraints.push_back(std::move(lmi.positivity));
  prob.constraints.push_back(std::move(lmi.dissipation));

  const SdpSolution sol = solve_scaled(prob, cfg, max_abs(v_bar - u_bar));
  require_solved(sol, SubproblemFailure::Stage::Local, i, "local step for subsystem " + std::to_string(i));
  return {sol.value(prob, vars.S), sol.value(prob, vars.P), sol.value(prob, vars.Y)};
}

LocalCertificate polish_local(std::size_t i, const Subsystem& sub, const Matrix& S, const AdmmConfig& cfg)
{
  VariableLayout full;
  const auto vars = add_local_variables(full, sub);
  const auto lmi = local_lmi(sub, full, vars, cfg.margin);

  // same ordering as add_local_variables, minus S
  VariableLayout layout;
  const auto P = layout.add_symmetric("P", sub.states());
  const auto Y = layout.add_general("Y", sub.states(), sub.states());
  SdpProblem prob(layout);
  add_smoothing(prob, P, cfg);
  add_smoothing(prob, Y, cfg);
  prob.constraints.push_back(fix_variable(lmi.positivity, full, vars.S, S));
  prob.constraints.push_back(fix_variable(lmi.dissipation, full, vars.S, S));

  const SdpSolution sol = solve_scaled(prob, cfg, S.cwiseAbs().maxCoeff());
  require_solved(sol, SubproblemFailure::Stage::Polish, i, "certificate polish for subsystem " + std::to_string(i));
  return {S, sol.value(prob, P), sol.value(prob, Y)};
}

GlobalUpdate global_step(const InterconnectionProblem& p, const Matrix& permutation, const Vector& y,
                         const Vector& u_bar, const std::vector<Index>& offsets, const AdmmConfig& cfg)
{
  const bool hinf = cfg.mode == SynthesisMode::Hinf;
  VariableLayout layout;
  GlobalVariables vars;
  for (std::size_t i = 0; i < p.subsystems.size(); ++i) {
    const auto& s = p.subsystems[i];
    vars.supply_blocks.push_back(layout.add_symmetric("S" + std::to_string(i), s.disturbances() + s.outputs()));
  }
  if (hinf) {
    vars.eta = layout.add_scalar("eta");
  }
  SdpProblem prob(layout);
  const Vector anchor = y + u_bar;
  for (std::size_t i = 0; i < vars.supply_blocks.size(); ++i) {
    const auto id = vars.supply_blocks[i];
    add_smoothing(prob, id, cfg);
    prob.add_prox(id, 0.5 * cfg.rho, smat(anchor.segment(offsets[i], prob.layout[id].size())));
  }
  const SupplyRate supply = hinf ? hinf_supply(0.0, p.n_d, p.n_z) : zero_supply(p.n_d, p.n_z);
  if (hinf) {
    prob.add_linear_scalar(*vars.eta, 1.0);
    if (cfg.smoothing == Smoothing::Frobenius) {
      prob.add_linear_scalar(*vars.eta, cfg.mu);  // |eta| = eta on eta >= 0
    } else {
      prob.add_squared_norm(*vars.eta, cfg.mu);
    }
    prob.add_lower_bound(*vars.eta, 0.0);
  }
  prob.constraints.push_back(global_lmi(p, permutation, supply, prob.layout, vars, cfg.margin));

  const SdpSolution sol = solve_scaled(prob, cfg, max_abs(anchor));
  require_solved(sol, SubproblemFailure::Stage::Global, std::nullopt, "global step");
  GlobalUpdate out;
  out.v.resize(y.size());
  for (std::size_t i = 0; i < vars.supply_blocks.size(); ++i) {
    const auto& var = prob.layout[vars.supply_blocks[i]];
    out.v.segment(offsets[i], var.size()) = sol.x.segment(var.offset, var.size());
  }
  out.eta = hinf ? std::max(0.0, sol.x(prob.layout[*vars.eta].offset)) : 0.0;
  return out;
}

Vector dual_step(const Vector& u_bar, const Vector& y, const Vector& v)
{
  if (u_bar.size() != y.size() || y.size() != v.size()) {
    throw InvalidInput("dual_step: vectors have different lengths");
  }
  return u_bar + y - v;
}

double next_alpha(double alpha)
{
  return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * alpha * alpha));
}

void accelerate(AdmmState& st, const AdmmConfig& cfg, double combined)
{
  if (cfg.restart && combined > st.combined_prev) {
    st.alpha = 1.0;
    st.v_bar = st.v;
    st.u_bar = st.u;
    st.combined_prev = combined;
    return;
  }
  const double a_next = next_alpha(st.alpha);
  const double beta = (st.alpha - 1.0) / a_next;
  st.v_bar = st.v + beta * (st.v - st.v_prev);
  st.u_bar = st.u + beta * (st.u - st.u_prev);
  st.alpha = a_next;
  st.combined_prev = combined;
}

std::pair<double, double> residuals(const AdmmState& st, double rho)
{
  return {(st.y - st.v).norm(), rho * (st.v - st.v_prev).norm()};
}

namespace {

/// Runs body(i) for i in [0, n) on up to `threads` workers; rethrows the
/// failure with the smallest index so the outcome does not depend on timing.
template<typename Body>
void parallel_for(std::size_t n, unsigned threads, Body body)
{
  if (threads == 0) {
    threads = std::max(1u, std::thread::hardware_concurrency());
  }
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::vector<std::exception_ptr> errors(n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            body(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

}  // namespace

AdmmResult run_admm(const InterconnectionProblem& p, const AdmmConfig& cfg)
{
  cfg.validate();
  require_valid(p);
  const bool hinf = cfg.mode == SynthesisMode::Hinf;
  if (!hinf && (p.n_d != 0 || p.n_z != 0)) {
    throw InvalidInput("stabilize mode requires n_d = n_z = 0 (no exogenous input or performance output)");
  }
  if (hinf && (p.n_d < 1 || p.n_z < 1)) {
    throw InvalidInput("hinf mode requires at least one disturbance and one performance channel");
  }

  const Matrix perm = build_permutation(p.dims(), p.n_d, p.n_z);
  AdmmState st = initial_state(p);
  const std::size_t N = p.subsystems.size();
  const auto t0 = std::chrono::steady_clock::now();
  AdmmResult result;

  try {
    for (int k = 1; k <= cfg.max_iter; ++k) {
      st.k = k;
      std::vector<LocalCertificate> local(N);
      parallel_for(N, cfg.threads, [&](std::size_t i) {
        local[i] = local_step(i, p.subsystems[i], st.block(st.v_bar, i), st.block(st.u_bar, i), cfg);
      });
      for (std::size_t i = 0; i < N; ++i) {
        st.y.segment(st.offsets[i], svec_size(local[i].S.rows())) = svec(local[i].S);
        st.P[i] = std::move(local[i].P);
        st.Y[i] = std::move(local[i].Y);
      }

      const GlobalUpdate g = global_step(p, perm, st.y, st.u_bar, st.offsets, cfg);
      st.v_prev = st.v;
      st.u_prev = st.u;
      st.v = g.v;
      st.eta = g.eta;
      st.u = dual_step(st.u_bar, st.y, st.v);

      const auto [r, s] = residuals(st, cfg.rho);
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      st.trace.push_back({k, r, s, hinf ? std::optional<double>(st.eta) : std::nullopt, ms});

      if (r <= cfg.tol_primal && s <= cfg.tol_dual) {
        result.status = AdmmStatus::Converged;
        break;
      }
      if (cfg.accelerated) {
        accelerate(st, cfg, r * r + s * s);
      } else {
        st.v_bar = st.v;
        st.u_bar = st.u;
      }
    }
  } catch (const SubproblemFailure& f) {
    result.status = f.status == SdpStatus::Infeasible ? AdmmStatus::Infeasible : AdmmStatus::SolverFailure;
    result.message = f.what();
    result.failure = f;
    result.trace = std::move(st.trace);
    result.iterations = st.k;
    return result;
  }

  result.iterations = st.k;
  result.trace = std::move(st.trace);
  if (hinf) {
    result.eta = st.eta;
  }

  // Certificates take the consensus S_i; P_i, Y_i are re-solved against it so
  // the local inequalities hold exactly rather than to within |y - v|.
  result.certificates.resize(N);
  std::vector<std::string> polish_errors(N);
  parallel_for(N, cfg.threads, [&](std::size_t i) {
    const Matrix S = smat(st.block(st.v, i));
    try {
      result.certificates[i] = polish_local(i, p.subsystems[i], S, cfg);
    } catch (const SubproblemFailure& f) {
      result.certificates[i] = {S, st.P[i], st.Y[i]};
      polish_errors[i] = f.what();
    }
  });
  for (const auto& e : polish_errors) {
    if (!e.empty()) {
      result.message += (result.message.empty() ? "" : "; ") + e;
    }
  }
  if (result.status == AdmmStatus::Converged && result.message.empty()) {
    result.message = "converged after " + std::to_string(result.iterations) + " iterations";
  } else if (result.status == AdmmStatus::MaxIterations && result.message.empty()) {
    result.message = "iteration limit reached";
  }
  return result;
}

}  // namespace dissynth
