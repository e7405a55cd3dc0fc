#include "dissynth/admm.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace dissynth;

namespace {

Subsystem scalar(double a, double b, double g, double c)
{
  return {Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, b), Matrix::Constant(1, 1, g),
          Matrix::Constant(1, 1, c)};
}

Matrix sym2(double a, double b, double c)
{
  Matrix m(2, 2);
  m << a, b, b, c;
  return m;
}

double max_eig(const Matrix& m)
{
  return Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().maxCoeff();
}

double local_objective(const LocalCertificate& c, const Vector& target, double mu, double rho)
{
  return mu * (c.S.squaredNorm() + c.P.squaredNorm() + c.Y.squaredNorm()) +
         0.5 * rho * (svec(c.S) - target).squaredNorm();
}

InterconnectionProblem one_loop()
{
  InterconnectionProblem p;
  p.subsystems = {scalar(-1, 1, 1, 1)};
  p.n_d = p.n_z = 1;
  p.M_wy = Matrix::Zero(1, 1);
  p.M_wd = Matrix::Ones(1, 1);
  p.M_zy = Matrix::Ones(1, 1);
  p.M_zd = Matrix::Zero(1, 1);
  return p;
}

InterconnectionProblem coupled_scalars()
{
  InterconnectionProblem p;
  p.subsystems = {scalar(1, 1, 1, 1), scalar(1, 1, 1, 1)};
  p.M_wy = sym2(0, 1, 0);
  p.M_wd = Matrix::Zero(2, 0);
  p.M_zy = Matrix::Zero(0, 2);
  p.M_zd = Matrix::Zero(0, 0);
  return p;
}

}  // namespace

TEST_CASE("local step from a feasible anchor is feasible and no worse than the anchor")
{
  AdmmConfig cfg;
  cfg.rho = cfg.mu = 1.0;
  const Subsystem sub = scalar(-1, 1, 1, 1);
  const Vector anchor = svec(sym2(1, 1, 0));
  const LocalCertificate c = local_step(0, sub, anchor, Vector::Zero(3), cfg);

  CHECK(max_eig(local_dissipation_matrix(sub, c)) <= 1e-8);
  CHECK(c.P(0, 0) >= cfg.margin - 1e-9);
  // S = anchor, P = 1, Y = 0 is feasible with value 4
  const LocalCertificate at_anchor{sym2(1, 1, 0), Matrix::Ones(1, 1), Matrix::Zero(1, 1)};
  CHECK(max_eig(local_dissipation_matrix(sub, at_anchor)) < 0.0);
  CHECK(local_objective(c, anchor, 1.0, 1.0) <= local_objective(at_anchor, anchor, 1.0, 1.0) + 1e-9);
}

TEST_CASE("local step with dominant smoothing tends to the minimum-norm certificate")
{
  AdmmConfig cfg;
  cfg.mu = 1e6;
  cfg.rho = 1.0;
  const Subsystem sub = scalar(1, 1, 1, 1);
  const LocalCertificate c = local_step(0, sub, Vector::Zero(3), Vector::Zero(3), cfg);

  VariableLayout layout;
  const auto vars = add_local_variables(layout, sub);
  SdpProblem prob(layout);
  prob.add_squared_norm(vars.S, 1.0);
  prob.add_squared_norm(vars.P, 1.0);
  prob.add_squared_norm(vars.Y, 1.0);
  auto lmi = local_lmi(sub, prob.layout, vars, cfg.margin);
  prob.constraints.push_back(lmi.positivity);
  prob.constraints.push_back(lmi.dissipation);
  SdpSettings st = cfg.sdp;
  st.variable_scale = 1e-5;
  const SdpSolution direct = solve_sdp(prob, st);
  REQUIRE(direct.status == SdpStatus::Optimal);

  const double scale = direct.x.cwiseAbs().maxCoeff();
  CHECK((c.S - direct.value(prob, vars.S)).cwiseAbs().maxCoeff() <= 1e-3 * scale);
  CHECK((c.P - direct.value(prob, vars.P)).cwiseAbs().maxCoeff() <= 1e-3 * scale);
  CHECK((c.Y - direct.value(prob, vars.Y)).cwiseAbs().maxCoeff() <= 1e-3 * scale);
}

TEST_CASE("local step with B = 0 still returns a feasible certificate")
{
  AdmmConfig cfg;
  const Subsystem trap = scalar(1, 0, 0, 1);
  const Vector anchor = svec(Matrix::Identity(2, 2));
  const LocalCertificate c = local_step(0, trap, anchor, Vector::Zero(3), cfg);
  CHECK(max_eig(local_dissipation_matrix(trap, c)) <= 1e-9);
  CHECK(c.P(0, 0) >= cfg.margin - 1e-12);
}

TEST_CASE("local step rejects a consensus block of the wrong length")
{
  CHECK_THROWS_AS(local_step(0, scalar(1, 1, 1, 1), Vector::Zero(2), Vector::Zero(2), AdmmConfig{}), InvalidInput);
}

TEST_CASE("global step keeps a feasible anchor and lowers eta")
{
  const auto p = one_loop();
  const Matrix perm = build_permutation(p.dims(), 1, 1);
  AdmmConfig cfg;
  cfg.mode = SynthesisMode::Hinf;
  cfg.rho = 1.0;
  cfg.mu = 1e-3;
  const Vector anchor = svec(sym2(0, 0, -2));
  const GlobalUpdate g = global_step(p, perm, anchor, Vector::Zero(3), {0}, cfg);

  // objective at (anchor, eta = 1) bounds the prox distance
  const double f_anchor = 1.0 + cfg.mu * (4.0 + 1.0);
  CHECK((g.v - anchor).norm() <= std::sqrt(2.0 * f_anchor / cfg.rho));
  const Matrix F = global_lmi_matrix(p, perm, hinf_supply(g.eta, 1, 1), {smat(g.v)});
  CHECK(max_eig(F) <= -cfg.margin + 1e-8);
  CHECK(g.eta < 1.0);
  CHECK(g.eta >= 0.0);
}

TEST_CASE("global step without interconnection makes every S22 negative")
{
  InterconnectionProblem p = coupled_scalars();
  p.M_wy.setZero();
  const Matrix perm = build_permutation(p.dims(), 0, 0);
  AdmmConfig cfg;
  const Vector anchor = svec(Matrix::Identity(2, 2));
  Vector y(6);
  y << anchor, anchor;
  const GlobalUpdate g = global_step(p, perm, y, Vector::Zero(6), {0, 3}, cfg);
  CHECK(smat(g.v.head(3))(1, 1) <= -cfg.margin + 1e-9);
  CHECK(smat(g.v.tail(3))(1, 1) <= -cfg.margin + 1e-9);
  CHECK(g.eta == 0.0);
}

TEST_CASE("dual step arithmetic")
{
  Vector one(1), two(1);
  one << 1.0;
  two << 2.0;
  CHECK(dual_step(Vector::Zero(1), two, two) == Vector::Zero(1));
  CHECK(dual_step(one, two, one)(0) == 2.0);
  CHECK_THROWS_AS(dual_step(one, Vector::Zero(2), one), InvalidInput);

  std::mt19937_64 rng(4);
  const Vector ub = testing::random_matrix(rng, 5, 1);
  const Vector y = testing::random_matrix(rng, 5, 1);
  const Vector v = testing::random_matrix(rng, 5, 1);
  CHECK((dual_step(ub, y, v) - ub).norm() == doctest::Approx((y - v).norm()).epsilon(1e-14));
}

TEST_CASE("residuals by definition")
{
  AdmmState st;
  st.y = Vector::Ones(3);
  st.v = st.y;
  st.v_prev = st.v;
  auto [r, s] = residuals(st, 1.0);
  CHECK(r == 0.0);
  CHECK(s == 0.0);

  st.v = Vector::Constant(1, 1.0);
  st.v_prev = Vector::Constant(1, 0.5);
  st.y = st.v;
  std::tie(r, s) = residuals(st, 2.0);
  CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("alpha recursion")
{
  CHECK(next_alpha(1.0) == doctest::Approx((1.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-15));
  double a = 1.0;
  for (int k = 1; k <= 1000; ++k) {
    CHECK(a >= (k + 1) / 2.0);
    const double next = next_alpha(a);
    CHECK(std::abs(next * (next - 1.0) - a * a) <= 1e-12 * std::max(1.0, a * a));
    a = next;
  }
}

TEST_CASE("first extrapolation leaves v unchanged")
{
  AdmmState st;
  st.v = Vector::Constant(2, 3.0);
  st.v_prev = Vector::Constant(2, 1.0);
  st.u = Vector::Constant(2, 0.5);
  st.u_prev = Vector::Zero(2);
  AdmmConfig cfg;
  cfg.accelerated = true;
  accelerate(st, cfg, 1.0);
  CHECK(st.v_bar == st.v);
  CHECK(st.u_bar == st.u);
  CHECK(st.alpha == doctest::Approx((1.0 + std::sqrt(5.0)) / 2.0));

  // second step extrapolates with (alpha_2 - 1) / alpha_3
  const double beta = (st.alpha - 1.0) / next_alpha(st.alpha);
  accelerate(st, cfg, 0.5);
  CHECK(st.v_bar.isApprox(st.v + beta * (st.v - st.v_prev)));
}

TEST_CASE("restart resets the momentum when the residual grows")
{
  AdmmState st;
  st.v = Vector::Constant(1, 2.0);
  st.v_prev = Vector::Constant(1, 1.0);
  st.u = st.u_prev = Vector::Zero(1);
  st.alpha = 5.0;
  st.combined_prev = 1.0;
  AdmmConfig cfg;
  cfg.accelerated = cfg.restart = true;
  accelerate(st, cfg, 2.0);
  CHECK(st.alpha == 1.0);
  CHECK(st.v_bar == st.v);
}

TEST_CASE("config validation")
{
  AdmmConfig cfg;
  cfg.accelerated = true;
  cfg.rho = 2.0 * cfg.mu;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg.rho = cfg.mu;
  CHECK_NOTHROW(cfg.validate());
  cfg.max_iter = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

TEST_CASE("initial state is all identity")
{
  const auto p = coupled_scalars();
  const AdmmState st = initial_state(p);
  REQUIRE(st.offsets == std::vector<Index>{0, 3});
  CHECK(st.v == st.y);
  CHECK(st.u == st.y);
  CHECK(smat(st.block(st.v, 1)).isApprox(Matrix::Identity(2, 2)));
  CHECK(st.eta == 1.0);
}

TEST_CASE("two coupled unstable scalars converge in stabilize mode")
{
  const auto p = coupled_scalars();
  AdmmConfig cfg;
  cfg.accelerated = true;
  const AdmmResult r = run_admm(p, cfg);
  REQUIRE(r.status == AdmmStatus::Converged);
  REQUIRE(!r.trace.empty());
  CHECK(r.trace.back().primal <= cfg.tol_primal);
  CHECK(r.trace.back().dual <= cfg.tol_dual);
  CHECK(static_cast<int>(r.trace.size()) == r.iterations);
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    CHECK(r.trace[k].k == static_cast<int>(k) + 1);
    CHECK(!r.trace[k].eta.has_value());
  }
  const Matrix perm = build_permutation(p.dims(), 0, 0);
  std::vector<Matrix> S;
  for (const auto& c : r.certificates) {
    S.push_back(c.S);
    CHECK(max_eig(local_dissipation_matrix(p.subsystems[0], c)) <= 1e-7);
  }
  CHECK(max_eig(global_lmi_matrix(p, perm, zero_supply(0, 0), S)) <= -cfg.margin + 1e-7);
}

TEST_CASE("standard ADMM runs are deterministic")
{
  const auto p = coupled_scalars();
  AdmmConfig cfg;
  cfg.max_iter = 15;
  cfg.threads = 2;
  const AdmmResult a = run_admm(p, cfg);
  const AdmmResult b = run_admm(p, cfg);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    CHECK(a.trace[k].primal == b.trace[k].primal);
    CHECK(a.trace[k].dual == b.trace[k].dual);
  }
}

TEST_CASE("stabilize mode refuses exogenous channels")
{
  AdmmConfig cfg;
  CHECK_THROWS_AS(run_admm(one_loop(), cfg), InvalidInput);
}

TEST_CASE("hinf run keeps eta in the trace")
{
  AdmmConfig cfg;
  cfg.mode = SynthesisMode::Hinf;
  cfg.max_iter = 5;
  const AdmmResult r = run_admm(one_loop(), cfg);
  REQUIRE(r.trace.size() == 5);
  for (const auto& rec : r.trace) {
    REQUIRE(rec.eta.has_value());
    CHECK(*rec.eta >= 0.0);
  }
}
