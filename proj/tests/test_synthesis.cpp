#include "dissynth/problems.hpp"
#include "dissynth/synthesis.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

using namespace dissynth;

namespace {

Subsystem scalar(double a, double b, double g, double c)
{
  return {Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, b), Matrix::Constant(1, 1, g),
          Matrix::Constant(1, 1, c)};
}

InterconnectionProblem coupled_scalars(double a = 1.0, double coupling = 1.0)
{
  InterconnectionProblem p;
  p.subsystems = {scalar(a, 1, 1, 1), scalar(a, 1, 1, 1)};
  p.M_wy = Matrix::Zero(2, 2);
  p.M_wy(0, 1) = p.M_wy(1, 0) = coupling;
  p.M_wd = Matrix::Zero(2, 0);
  p.M_zy = Matrix::Zero(0, 2);
  p.M_zd = Matrix::Zero(0, 0);
  return p;
}

InterconnectionProblem single_loop()
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

InterconnectionProblem trap()
{
  InterconnectionProblem p;
  p.subsystems = {scalar(1, 0, 0, 1)};
  p.M_wy = Matrix::Zero(1, 1);
  p.M_wd = Matrix::Zero(1, 0);
  p.M_zy = Matrix::Zero(0, 1);
  p.M_zd = Matrix::Zero(0, 0);
  return p;
}

std::vector<Matrix> supply_blocks(const std::vector<LocalCertificate>& certs)
{
  std::vector<Matrix> out;
  for (const auto& c : certs) out.push_back(c.S);
  return out;
}

double max_eig(const Matrix& m)
{
  return Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().maxCoeff();
}

}  // namespace

TEST_CASE("pseudo-inverse of tall, wide and rank-deficient matrices")
{
  std::mt19937_64 rng(11);
  for (const auto& [r, c] : {std::pair{4, 2}, std::pair{2, 4}, std::pair{3, 3}}) {
    const Matrix B = testing::random_matrix(rng, r, c);
    const Matrix X = pinv(B);
    CHECK((B * X * B - B).norm() <= 1e-12);
    CHECK((X * B * X - X).norm() <= 1e-12);
    CHECK((B * X - (B * X).transpose()).norm() <= 1e-12);
  }
  CHECK(pinv(Matrix::Zero(2, 1)).isZero());
}

TEST_CASE("gain recovery by hand")
{
  const Matrix I = Matrix::Identity(2, 2);
  const std::vector<Matrix> P1{I}, Y1{-I}, B1{I};
  CHECK(recover_gains(P1, Y1, B1)[0].isApprox(-I));

  Matrix B(2, 1);
  B << 1, 0;
  const Matrix P = Eigen::Vector2d(2, 1).asDiagonal();
  const Matrix Y = Eigen::Vector2d(-2, -1).asDiagonal();
  const std::vector<Matrix> Ps{P}, Ys{Y}, Bs{B};
  const Matrix K = recover_gains(Ps, Ys, Bs)[0];
  REQUIRE(K.rows() == 1);
  REQUIRE(K.cols() == 2);
  CHECK(K(0, 0) == doctest::Approx(-1.0));
  CHECK(K(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("gain recovery inverts the forward construction Y = P B L")
{
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 2 + trial % 4;
    const Index m = 1 + trial % n;
    const Matrix R = testing::random_matrix(rng, n, n);
    const Matrix P = R * R.transpose() + Matrix::Identity(n, n);
    const Matrix B = testing::random_matrix(rng, n, m);
    const Matrix L = testing::random_matrix(rng, m, n);
    const std::vector<Matrix> Ps{P}, Ys{P * B * L}, Bs{B};
    CHECK((recover_gains(Ps, Ys, Bs)[0] - L).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("gain recovery rejects singular P and mismatched lists")
{
  const std::vector<Matrix> P{Matrix::Zero(1, 1)}, Y{Matrix::Ones(1, 1)}, B{Matrix::Ones(1, 1)};
  CHECK_THROWS_AS(recover_gains(P, Y, B), NumericalError);
  const std::vector<Matrix> none;
  CHECK_THROWS_AS(recover_gains(P, Y, none), InvalidInput);
}

TEST_CASE("detectability rank condition")
{
  CHECK(detectability_rank_ok(single_loop()));
  InterconnectionProblem p = single_loop();
  p.M_zy.setZero();
  CHECK_FALSE(detectability_rank_ok(p));
  // one performance output cannot observe four interconnection outputs
  CHECK_FALSE(detectability_rank_ok(example1()));
}

TEST_CASE("verification rejects zero gain on the B = 0 trap")
{
  const auto p = trap();
  const std::vector<Matrix> K{Matrix::Zero(1, 1)};
  const std::vector<LocalCertificate> certs{{Matrix::Zero(2, 2), Matrix::Ones(1, 1), Matrix::Constant(1, 1, -5.0)}};
  const VerificationReport r = verify_certificates(p, K, certs, zero_supply(0, 0), 1e-6);
  CHECK(r.local_lmi[0] == doctest::Approx(2.0));
  CHECK(r.recovery_residual[0] == doctest::Approx(5.0));
  CHECK_FALSE(r.local_ok());
  CHECK_FALSE(r.recovery_ok());
  CHECK_FALSE(r.stable());
  CHECK_FALSE(r.passed());
  CHECK(r.failures().find("gain recovery") != std::string::npos);
}

TEST_CASE("B = 0 trap converges but fails verification")
{
  const SynthesisResult r = synthesize_stabilizing(trap(), AdmmConfig{});
  CHECK(r.status == SynthesisStatus::VerificationFailed);
  REQUIRE(r.report.has_value());
  CHECK_FALSE(r.report->recovery_ok());
  CHECK(r.report->abscissa == doctest::Approx(1.0));
  CHECK(r.trace.back().primal <= 1e-6);
}

TEST_CASE("two coupled unstable scalars are stabilized")
{
  AdmmConfig cfg;
  cfg.accelerated = true;
  const auto p = coupled_scalars();
  const SynthesisResult r = synthesize_stabilizing(p, cfg);
  REQUIRE(r.status == SynthesisStatus::Verified);
  CHECK(r.report->abscissa < 0.0);
  CHECK(spectral_abscissa(assemble_closed_loop(p, r.gains).A) < 0.0);
  CHECK_FALSE(r.eta.has_value());
}

TEST_CASE("perturbing verified gains breaks verification")
{
  AdmmConfig cfg;
  cfg.accelerated = true;
  const auto p = coupled_scalars();
  const SynthesisResult r = synthesize_stabilizing(p, cfg);
  REQUIRE(r.status == SynthesisStatus::Verified);
  std::vector<Matrix> K = r.gains;
  K[0](0, 0) += 10.0;
  const VerificationReport bad = verify_certificates(p, K, r.certificates, zero_supply(0, 0), cfg.margin);
  CHECK_FALSE(bad.passed());
  CHECK((!bad.stable() || !bad.local_ok()));
}

TEST_CASE("already-stable decoupled subsystems need almost no gain")
{
  const auto p = coupled_scalars(-1.0, 0.0);
  const SynthesisResult r = synthesize_stabilizing(p, AdmmConfig{});
  REQUIRE(r.status == SynthesisStatus::Verified);
  for (const auto& K : r.gains) {
    CHECK(K.norm() < 1e-2);
  }
  const SynthesisResult c = centralized_synthesis(p, SynthesisMode::Stabilize);
  REQUIRE(c.status == SynthesisStatus::Verified);
}

TEST_CASE("stabilizing synthesis requires d and z to vanish")
{
  try {
    synthesize_stabilizing(single_loop(), AdmmConfig{});
    FAIL("expected InvalidInput");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("n_d = n_z = 0") != std::string::npos);
  }
  InterconnectionProblem p = coupled_scalars();
  p.subsystems[0].B = Matrix::Zero(1, 0);
  CHECK_THROWS_AS(synthesize_stabilizing(p, AdmmConfig{}), InvalidInput);
}

TEST_CASE("hinf synthesis needs disturbance and performance channels")
{
  AdmmConfig cfg;
  CHECK_THROWS_AS(synthesize_hinf(coupled_scalars(), cfg), InvalidInput);
}

TEST_CASE("single loop hinf synthesis with heavy smoothing is verified by the sweep")
{
  AdmmConfig cfg;
  cfg.mu = cfg.rho = 1e3;
  cfg.max_iter = 300;
  const auto p = single_loop();
  const SynthesisResult r = synthesize_hinf(p, cfg);
  REQUIRE(r.status == SynthesisStatus::Verified);
  REQUIRE(r.eta.has_value());
  const double k = r.gains[0](0, 0);
  // closed loop 1 / (s + 1 - k) has gain 1 / (1 - k)
  CHECK(*r.report->hinf == doctest::Approx(1.0 / (1.0 - k)).epsilon(1e-6));
  CHECK(*r.report->hinf <= std::sqrt(*r.eta) * (1.0 + 1e-3));
  CHECK_FALSE(r.detectability_warning);
}

TEST_CASE("hinf result carries the detectability warning")
{
  InterconnectionProblem p = single_loop();
  p.M_zy.setZero();
  p.M_zd.setOnes();
  AdmmConfig cfg;
  cfg.mode = SynthesisMode::Hinf;
  cfg.max_iter = 3;
  const SynthesisResult r = synthesize_hinf(p, cfg);
  CHECK(r.detectability_warning);
}

TEST_CASE("centralized synthesis on example 1 sits at the margin")
{
  const SynthesisResult c = centralized_synthesis(example1(), SynthesisMode::Hinf);
  REQUIRE(c.status == SynthesisStatus::Verified);
  REQUIRE(c.eta.has_value());
  CHECK(*c.eta == doctest::Approx(1e-6).epsilon(1e-2));
  for (double res : c.report->recovery_residual) {
    CHECK(res <= 1e-12);  // B_i = I
  }
  CHECK(*c.report->hinf <= *c.bound * (1.0 + 1e-3));
}

TEST_CASE("centralized and distributed stabilization agree on the constraint set")
{
  const auto p = coupled_scalars();
  AdmmConfig cfg;
  cfg.accelerated = true;
  const SynthesisResult central = centralized_synthesis(p, SynthesisMode::Stabilize, cfg.margin);
  REQUIRE(central.status == SynthesisStatus::Verified);
  const SynthesisResult admm = synthesize_stabilizing(p, cfg);
  REQUIRE(admm.status == SynthesisStatus::Verified);
  const double slack = 10.0 * cfg.tol_primal;
  for (std::size_t i = 0; i < admm.certificates.size(); ++i) {
    CHECK(max_eig(local_dissipation_matrix(p.subsystems[i], admm.certificates[i])) <= slack);
  }
  const Matrix perm = build_permutation(p.dims(), 0, 0);
  CHECK(max_eig(global_lmi_matrix(p, perm, zero_supply(0, 0), supply_blocks(admm.certificates))) <=
        -cfg.margin + slack);
}

TEST_CASE("centralized hinf bounds the distributed eta from below")
{
  const auto p = single_loop();
  const SynthesisResult central = centralized_synthesis(p, SynthesisMode::Hinf);
  REQUIRE(central.status == SynthesisStatus::Verified);
  AdmmConfig cfg;
  cfg.mu = cfg.rho = 1e3;
  cfg.max_iter = 300;
  const SynthesisResult admm = synthesize_hinf(p, cfg);
  REQUIRE(admm.status == SynthesisStatus::Verified);
  CHECK(*central.eta <= *admm.eta + 1e-8);
}

TEST_CASE("status names")
{
  CHECK(to_string(SynthesisStatus::Verified) == "verified");
  CHECK(to_string(SynthesisStatus::VerificationFailed) == "verification-failed");
  CHECK(to_string(SynthesisStatus::NotConverged) == "not-converged");
  CHECK(to_string(SynthesisStatus::Infeasible) == "infeasible");
}
