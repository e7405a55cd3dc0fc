#include "dissynth/analysis.hpp"

#include "dissynth/sdp.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <complex>
#include <limits>

namespace dissynth {

double spectral_abscissa(const Matrix& A)
{
  if (A.rows() != A.cols()) {
    throw InvalidInput("spectral_abscissa: matrix is " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()));
  }
  if (A.size() == 0) {
    return -std::numeric_limits<double>::infinity();
  }
  if (!A.allFinite()) {
    throw InvalidInput("spectral_abscissa: non-finite entries");
  }
  Eigen::EigenSolver<Matrix> eig(A, false);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("spectral_abscissa: eigenvalue iteration did not converge");
  }
  return eig.eigenvalues().real().maxCoeff();
}

double sigma_max(const StateSpace& ss, double w)
{
  using Complex = std::complex<double>;
  using CMatrix = Eigen::MatrixXcd;
  CMatrix M = -ss.A.cast<Complex>();
  M.diagonal().array() += Complex(0.0, w);
  const CMatrix X = M.partialPivLu().solve(ss.B.cast<Complex>());
  const CMatrix H = ss.C.cast<Complex>() * X + ss.D.cast<Complex>();
  if (H.size() == 0) {
    return 0.0;
  }
  Eigen::JacobiSVD<CMatrix> svd(H);
  return svd.singularValues()(0);
}

double hinf_norm(const StateSpace& ss, const HinfOptions& opt)
{
  if (!(opt.w_min > 0.0) || !(opt.w_max > opt.w_min) || opt.points < 2 || !(opt.tol > 0.0)) {
    throw InvalidInput("hinf_norm: bad frequency grid");
  }
  if (ss.A.rows() > 0 && spectral_abscissa(ss.A) >= 0.0) {
    throw InvalidInput("hinf_norm: A is not Hurwitz, the norm is infinite");
  }
  const double lo = std::log(opt.w_min);
  const double hi = std::log(opt.w_max);
  const double step = (hi - lo) / (opt.points - 1);
  auto f = [&](double lw) { return sigma_max(ss, std::exp(lw)); };

  int best = 0;
  double best_val = -1.0;
  for (int k = 0; k < opt.points; ++k) {
    const double v = f(lo + k * step);
    if (v > best_val) {
      best_val = v;
      best = k;
    }
  }

  // golden section on log-frequency between the neighbours of the grid peak
  double a = lo + std::max(0, best - 1) * step;
  double b = lo + std::min(opt.points - 1, best + 1) * step;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (std::abs(b - a) > opt.tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  double result = std::max({best_val, fc, fd});
  result = std::max(result, sigma_max(ss, 0.0));
  if (ss.D.size() > 0) {
    Eigen::JacobiSVD<Matrix> svd(ss.D);
    result = std::max(result, svd.singularValues()(0));
  }
  return result;
}

double hinf_norm_bounded_real(const StateSpace& ss)
{
  if (ss.A.rows() > 0 && spectral_abscissa(ss.A) >= 0.0) {
    throw InvalidInput("hinf_norm_bounded_real: A is not Hurwitz");
  }
  const Index n = ss.A.rows();
  const Index m = ss.B.cols();
  const Index q = ss.C.rows();
  const Index dim = n + m + q;
  VariableLayout layout;
  const auto P = layout.add_symmetric("P", n);
  const auto g = layout.add_scalar("gamma2");

  const Matrix I = Matrix::Identity(dim, dim);
  const Matrix E1 = I.leftCols(n);
  const Matrix E2 = I.middleCols(n, m);
  const Matrix E3 = I.rightCols(q);

  LmiBuilder b(layout, dim);
  b.add_product(P, E1 * ss.A.transpose(), E1.transpose());
  b.add_product(P, E1, ss.A * E1.transpose());
  b.add_product(P, E1, ss.B * E2.transpose());
  b.add_product(P, E2 * ss.B.transpose(), E1.transpose());
  for (Index j = 0; j < m; ++j) {
    b.add_product(g, E2.col(j), E2.col(j).transpose(), -1.0);
  }
  Matrix K = E3 * ss.C * E1.transpose() + E3 * ss.D * E2.transpose();
  b.add_constant(K + K.transpose() - E3 * E3.transpose());

  SdpProblem prob(layout);
  prob.add_linear_scalar(g, 1.0);
  prob.constraints.push_back(b.build("bounded real", LmiSense::NegativeSemidefinite, 0.0));
  LmiBuilder pos(layout, n);
  pos.add_congruence(P, Matrix::Identity(n, n));
  prob.constraints.push_back(pos.build("P", LmiSense::PositiveSemidefinite, 0.0));

  const SdpSolution sol = solve_sdp(prob, {1e-8, 1e-8, 200, 1e-10, 0.99});
  if (sol.status != SdpStatus::Optimal) {
    throw NumericalError("hinf_norm_bounded_real: solver ended with " + std::string(to_string(sol.status)));
  }
  return std::sqrt(std::max(0.0, sol.x(prob.layout[g].offset)));
}

InputSignal zero_input(Index n_d)
{
  return [n_d](double) { return Vector::Zero(n_d); };
}

Trajectory simulate(const StateSpace& ss, const InputSignal& d, const Vector& x0, double T, double h)
{
  if (!(h > 0.0) || !(T >= h)) {
    throw InvalidInput("simulate: need 0 < h <= T");
  }
  if (x0.size() != ss.A.rows()) {
    throw InvalidInput("simulate: initial state has length " + std::to_string(x0.size()) + ", expected " +
                       std::to_string(ss.A.rows()));
  }
  const auto steps = static_cast<Index>(std::llround(T / h));
  const Index n_d = ss.B.cols();
  auto input = [&](double t) {
    Vector v = d(t);
    if (v.size() != n_d) {
      throw InvalidInput("simulate: input signal has length " + std::to_string(v.size()) + ", expected " +
                         std::to_string(n_d));
    }
    return v;
  };
  auto field = [&](double t, const Vector& x) -> Vector { return ss.A * x + ss.B * input(t); };

  Trajectory tr;
  tr.h = h;
  tr.t.resize(steps + 1);
  tr.x.resize(x0.size(), steps + 1);
  tr.d.resize(n_d, steps + 1);
  tr.z.resize(ss.C.rows(), steps + 1);
  Vector x = x0;
  for (Index k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * h;
    tr.t[k] = t;
    tr.x.col(k) = x;
    tr.d.col(k) = input(t);
    tr.z.col(k) = ss.C * x + ss.D * tr.d.col(k);
    if (k == steps) {
      break;
    }
    const Vector k1 = field(t, x);
    const Vector k2 = field(t + 0.5 * h, x + 0.5 * h * k1);
    const Vector k3 = field(t + 0.5 * h, x + 0.5 * h * k2);
    const Vector k4 = field(t + h, x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite() || x.norm() > 1e12) {
      throw NumericalError("simulate: state norm exceeded 1e12 at t = " + std::to_string(t + h));
    }
  }
  return tr;
}

DissipationCheck check_dissipation(const Trajectory& traj, const InterconnectionProblem& p,
                                   std::span<const Matrix> gains, std::span<const LocalCertificate> certificates,
                                   const SupplyRate& supply)
{
  const std::size_t N = p.subsystems.size();
  if (certificates.size() != N) {
    throw InvalidInput("check_dissipation: expected " + std::to_string(N) + " certificates");
  }
  const StateSpace cl = assemble_closed_loop(p, gains);
  const Matrix C = stacked_C(p);
  if (traj.x.rows() != cl.A.rows() || traj.d.rows() != p.n_d) {
    throw InvalidInput("check_dissipation: trajectory does not match the problem");
  }

  DissipationCheck out;
  out.max_violation = -std::numeric_limits<double>::infinity();
  out.max_scaled = -std::numeric_limits<double>::infinity();
  for (Index k = 0; k < traj.x.cols(); ++k) {
    const Vector x = traj.x.col(k);
    const Vector d = traj.d.col(k);
    const Vector xdot = cl.A * x + cl.B * d;
    const Vector y = C * x;
    const Vector w = p.M_wy * y + p.M_wd * d;
    const Vector z = p.M_zy * y + p.M_zd * d;

    double vdot = 0.0;
    double worst = -std::numeric_limits<double>::infinity();
    Index xo = 0, wo = 0, yo = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const Subsystem& s = p.subsystems[i];
      const Vector xi = x.segment(xo, s.states());
      const double vdot_i = 2.0 * xi.dot(certificates[i].P * xdot.segment(xo, s.states()));
      Vector wy(s.disturbances() + s.outputs());
      wy << w.segment(wo, s.disturbances()), y.segment(yo, s.outputs());
      const double supply_i = wy.dot(certificates[i].S * wy);
      worst = std::max(worst, vdot_i - supply_i);
      vdot += vdot_i;
      xo += s.states();
      wo += s.disturbances();
      yo += s.outputs();
    }
    Vector dz(p.n_d + p.n_z);
    dz << d, z;
    const double global_supply = supply.S.size() > 0 ? dz.dot(supply.S * dz) : 0.0;
    worst = std::max(worst, vdot - global_supply);

    out.max_violation = std::max(out.max_violation, worst);
    out.max_scaled = std::max(out.max_scaled, worst / (1.0 + x.squaredNorm()));
  }
  return out;
}

}  // namespace dissynth
