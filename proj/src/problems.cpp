#include "dissynth/problems.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>

namespace dissynth {

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t CounterRng::next_u64()
{
  return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * counter_++);
}

double CounterRng::uniform()
{
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::normal()
{
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) {
    u1 = uniform();
  }
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

CounterRng CounterRng::split(std::uint64_t i) const
{
  return CounterRng(splitmix64(key_ ^ splitmix64(i + 1)));
}

InterconnectionProblem example1()
{
  InterconnectionProblem p;
  const Matrix I2 = Matrix::Identity(2, 2);

  Subsystem g1;
  g1.A.resize(2, 2);
  g1.A << 4, 0, 2, -2;
  g1.B = I2;
  g1.G = I2;  // [w2; w4 + d]
  g1.C.resize(1, 2);
  g1.C << 0.5, 0.5;  // w1

  Subsystem g2;
  g2.A.resize(2, 2);
  g2.A << 8, 0, 12, -2;
  g2.B = I2;
  g2.G = Matrix::Ones(2, 1);  // w1
  g2.C = 0.5 * I2;            // [w2; w3]

  Subsystem g3;
  g3.A.resize(2, 2);
  g3.A << 2, 0, 2, -2;
  g3.B = I2;
  g3.G = Matrix::Ones(2, 1);  // w3
  g3.C.resize(1, 2);
  g3.C << 0.4, 0.4;  // w4

  p.subsystems = {g1, g2, g3};
  p.n_d = 1;
  p.n_z = 1;
  // y = (y1 | y2[0], y2[1] | y3),  w = (w_1[0], w_1[1] | w_2 | w_3)
  p.M_wy = Matrix::Zero(4, 4);
  p.M_wy(0, 1) = 1.0;
  p.M_wy(1, 3) = 1.0;
  p.M_wy(2, 0) = 1.0;
  p.M_wy(3, 2) = 1.0;
  p.M_wd = Matrix::Zero(4, 1);
  p.M_wd(1, 0) = 1.0;
  p.M_zy = Matrix::Zero(1, 4);
  p.M_zy(0, 3) = 1.0;
  p.M_zd = Matrix::Zero(1, 1);
  return p;
}

Index controllability_rank(const Matrix& A, const Matrix& B, double tol)
{
  const Index n = A.rows();
  if (n == 0 || B.cols() == 0) {
    return 0;
  }
  Matrix ctrb(n, n * B.cols());
  Matrix block = B;
  for (Index k = 0; k < n; ++k) {
    ctrb.middleCols(k * B.cols(), B.cols()) = block;
    block = A * block;
  }
  Eigen::JacobiSVD<Matrix> svd(ctrb);
  const Vector sv = svd.singularValues();
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol * sv(0)) {
      ++rank;
    }
  }
  return rank;
}

namespace {

Matrix normal_matrix(CounterRng& rng, Index rows, Index cols)
{
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = rng.normal();
    }
  }
  return m;
}

double abscissa(const Matrix& A)
{
  Eigen::EigenSolver<Matrix> eig(A, false);
  return eig.eigenvalues().real().maxCoeff();
}

}  // namespace

InterconnectionProblem generate_example2(const Example2Options& opt)
{
  if (opt.subsystems < 1 || opt.states < 1 || opt.inputs < 0 || opt.outputs < 0) {
    throw InvalidInput("generate_example2: subsystem count and sizes must be positive");
  }
  if (!(opt.density >= 0.0 && opt.density <= 1.0)) {
    throw InvalidInput("generate_example2: density must lie in [0, 1]");
  }
  if (opt.n_d < 0 || opt.n_z < 0) {
    throw InvalidInput("generate_example2: channel counts must be non-negative");
  }
  const CounterRng root(opt.seed);
  InterconnectionProblem p;
  const Index n = opt.states;
  for (int i = 0; i < opt.subsystems; ++i) {
    CounterRng rng = root.split(static_cast<std::uint64_t>(i));
    Subsystem s;
    bool found = false;
    for (int attempt = 0; attempt < opt.max_tries && !found; ++attempt) {
      Matrix A = normal_matrix(rng, n, n);
      A.diagonal().array() -= abscissa(A) - 1.0;
      // a second pass removes the rounding left by the first
      A.diagonal().array() -= abscissa(A) - 1.0;
      Matrix B = normal_matrix(rng, n, opt.inputs);
      if (controllability_rank(A, B) == n) {
        s.A = std::move(A);
        s.B = std::move(B);
        found = true;
      }
    }
    if (!found) {
      throw GenerationBudgetExceeded("no controllable pair for subsystem " + std::to_string(i) + " after " +
                                     std::to_string(opt.max_tries) + " tries");
    }
    s.G = normal_matrix(rng, n, opt.outputs);
    s.C = normal_matrix(rng, opt.outputs, n);
    p.subsystems.push_back(std::move(s));
  }

  CounterRng rng = root.split(static_cast<std::uint64_t>(opt.subsystems));
  const Index n_w = p.total_disturbances();
  const Index n_y = p.total_outputs();
  p.n_d = opt.n_d;
  p.n_z = opt.n_z;
  p.M_wy = Matrix::Zero(n_w, n_y);
  for (Index r = 0; r < n_w; ++r) {
    for (Index c = 0; c < n_y; ++c) {
      if (rng.uniform() < opt.density) {
        p.M_wy(r, c) = rng.normal();
      }
    }
  }
  auto pick = [&rng](Index k) { return static_cast<Index>(rng.uniform() * static_cast<double>(k)); };
  p.M_wd = Matrix::Zero(n_w, p.n_d);
  for (Index j = 0; j < p.n_d && n_w > 0; ++j) {
    p.M_wd(pick(n_w), j) = 1.0;
  }
  p.M_zy = Matrix::Zero(p.n_z, n_y);
  for (Index j = 0; j < p.n_z && n_y > 0; ++j) {
    p.M_zy(j, pick(n_y)) = 1.0;
  }
  p.M_zd = Matrix::Zero(p.n_z, p.n_d);
  return p;
}

}  // namespace dissynth
