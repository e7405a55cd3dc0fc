#include "dissynth/sdp.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

using namespace dissynth;

namespace {

LmiConstraint scalar_lmi(const VariableLayout& layout, VariableId x, double coeff, double constant)
{
  LmiBuilder b(layout, 1);
  b.add_congruence(x, Matrix::Identity(1, 1), coeff);
  b.add_constant(Matrix::Constant(1, 1, constant));
  return b.build("scalar", LmiSense::PositiveSemidefinite, 0.0);
}

}  // namespace

TEST_CASE("minimize x on the nonnegative half-line")
{
  VariableLayout layout;
  const auto x = layout.add_scalar("x");
  SdpProblem prob(layout);
  prob.add_linear_scalar(x, 1.0);
  prob.constraints.push_back(scalar_lmi(prob.layout, x, 1.0, 0.0));
  const auto sol = solve_sdp(prob);
  REQUIRE(sol.status == SdpStatus::Optimal);
  CHECK(std::abs(sol.x(0)) <= 1e-7);
  CHECK(std::abs(sol.objective) <= 1e-7);
}

TEST_CASE("minimize trace X subject to X >= I")
{
  VariableLayout layout;
  const auto X = layout.add_symmetric("X", 2);
  SdpProblem prob(layout);
  prob.linear = prob.layout.coordinates(X, Matrix::Identity(2, 2));
  LmiBuilder b(prob.layout, 2);
  b.add_congruence(X, Matrix::Identity(2, 2));
  prob.constraints.push_back(b.build("X >= I", LmiSense::PositiveSemidefinite, 1.0));
  const auto sol = solve_sdp(prob);
  REQUIRE(sol.status == SdpStatus::Optimal);
  CHECK((sol.value(prob, X) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK(sol.objective == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("contradictory bounds are reported infeasible with a certificate")
{
  VariableLayout layout;
  const auto x = layout.add_scalar("x");
  SdpProblem prob(layout);
  prob.add_linear_scalar(x, 1.0);
  prob.constraints.push_back(scalar_lmi(prob.layout, x, 1.0, 0.0));
  prob.constraints.push_back(scalar_lmi(prob.layout, x, -1.0, -1.0));
  const auto sol = solve_sdp(prob);
  REQUIRE(sol.status == SdpStatus::Infeasible);
  REQUIRE(sol.certificate.has_value());
  CHECK(sol.certificate->residual <= 1e-8);
  // the two multipliers must balance
  CHECK(sol.certificate->duals[0](0, 0) == doctest::Approx(sol.certificate->duals[1](0, 0)).epsilon(1e-6));
}

TEST_CASE("unbounded linear objective")
{
  VariableLayout layout;
  const auto x = layout.add_scalar("x");
  SdpProblem prob(layout);
  prob.add_linear_scalar(x, -1.0);
  prob.constraints.push_back(scalar_lmi(prob.layout, x, 1.0, 0.0));
  CHECK(solve_sdp(prob).status == SdpStatus::Unbounded);
}

TEST_CASE("unconstrained prox returns the anchor")
{
  std::mt19937_64 rng(17);
  VariableLayout layout;
  const auto V = layout.add_symmetric("V", 3);
  const auto W = layout.add_general("W", 2, 3);
  SdpProblem prob(layout);
  const Matrix a = testing::random_symmetric(rng, 3);
  const Matrix b = testing::random_matrix(rng, 2, 3);
  prob.add_prox(V, 1.0, a);
  prob.add_prox(W, 0.5, b);
  const auto sol = solve_sdp(prob);
  REQUIRE(sol.status == SdpStatus::Optimal);
  CHECK((sol.value(prob, V) - a).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((sol.value(prob, W) - b).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(std::abs(sol.objective) <= 1e-10);
}

TEST_CASE("projection onto the PSD cone")
{
  // min ||X - A||^2 s.t. X >= 0 is the eigenvalue clip of A
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix A = testing::random_symmetric(rng, 4);
    VariableLayout layout;
    const auto X = layout.add_symmetric("X", 4);
    SdpProblem prob(layout);
    prob.add_prox(X, 1.0, A);
    LmiBuilder b(prob.layout, 4);
    b.add_congruence(X, Matrix::Identity(4, 4));
    prob.constraints.push_back(b.build("psd", LmiSense::PositiveSemidefinite, 0.0));
    const auto sol = solve_sdp(prob);
    REQUIRE(sol.status == SdpStatus::Optimal);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(A);
    const Matrix expected =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
    CHECK((sol.value(prob, X) - expected).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("random feasible problems with known interior points")
{
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    VariableLayout layout;
    const auto X = layout.add_symmetric("X", 3);
    const auto Y = layout.add_general("Y", 2, 2);
    SdpProblem prob(layout);
    prob.linear = testing::random_matrix(rng, prob.layout.size(), 1);
    prob.add_squared_norm(X, 0.1);
    prob.add_squared_norm(Y, 0.1);
    // F(x) = F0 + L X L' + R Y + Y'R' with F(x0) < 0 at a random x0
    const Matrix L = testing::random_matrix(rng, 4, 3);
    const Matrix R = testing::random_matrix(rng, 4, 2);
    Vector x0 = testing::random_matrix(rng, prob.layout.size(), 1);
    LmiBuilder b(prob.layout, 4);
    b.add_product(X, L, L.transpose());
    b.add_product(Y, R, Matrix::Identity(2, 4));
    b.add_product(Y, Matrix::Identity(2, 4).transpose(), R.transpose(), 1.0, true);
    LmiConstraint probe = b.build("probe", LmiSense::NegativeSemidefinite, 0.0);
    const Matrix at_x0 = probe.evaluate(x0);
    b.add_constant(-at_x0 - Matrix::Identity(4, 4));
    prob.constraints.push_back(b.build("F", LmiSense::NegativeSemidefinite, 1e-3));
    const auto sol = solve_sdp(prob);
    REQUIRE(sol.status == SdpStatus::Optimal);
    CHECK(prob.constraints[0].violation(sol.x) <= 1e-8);
    CHECK(sol.primal_residual <= 1e-8);
    CHECK(sol.gap <= 1e-8);
    CHECK(prob.objective(sol.x) <= prob.objective(x0) + 1e-8);
  }
}

TEST_CASE("solves are deterministic")
{
  std::mt19937_64 rng(31);
  VariableLayout layout;
  const auto X = layout.add_symmetric("X", 3);
  SdpProblem prob(layout);
  prob.add_prox(X, 1.0, testing::random_symmetric(rng, 3));
  prob.add_linear_scalar(X, 0.3);
  LmiBuilder b(prob.layout, 3);
  b.add_congruence(X, testing::random_matrix(rng, 3, 3));
  b.add_constant(Matrix::Identity(3, 3));
  prob.constraints.push_back(b.build("c", LmiSense::NegativeSemidefinite, 0.0));
  const auto a = solve_sdp(prob);
  const auto c = solve_sdp(prob);
  REQUIRE(a.status == SdpStatus::Optimal);
  CHECK(a.iterations == c.iterations);
  CHECK((a.x - c.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("objective dimensions must match the layout")
{
  VariableLayout layout;
  layout.add_scalar("x");
  SdpProblem prob(layout);
  prob.linear = Vector::Zero(3);
  CHECK_THROWS_AS(solve_sdp(prob), InvalidInput);
}
