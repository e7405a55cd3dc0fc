#include "dissynth/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace dissynth {

// --- SdpProblem ---------------------------------------------------------------

SdpProblem::SdpProblem(VariableLayout vars) : layout(std::move(vars))
{
  sync_dimensions();
}

void SdpProblem::sync_dimensions()
{
  const Index n = layout.size();
  const Index old = linear.size();
  if (old == n && quadratic.rows() == n) {
    return;
  }
  Vector c = Vector::Zero(n);
  Matrix H = Matrix::Zero(n, n);
  const Index keep = std::min(old, n);
  if (keep > 0) {
    c.head(keep) = linear.head(keep);
    H.topLeftCorner(keep, keep) = quadratic.topLeftCorner(keep, keep);
  }
  linear = std::move(c);
  quadratic = std::move(H);
}

void SdpProblem::add_squared_norm(VariableId var, double weight)
{
  sync_dimensions();
  const MatrixVariable& v = layout[var];
  quadratic.diagonal().segment(v.offset, v.size()).array() += 2.0 * weight;
}

VariableId SdpProblem::add_norm(VariableId var, double weight)
{
  const VariableId t = layout.add_scalar(layout[var].name + " norm");
  sync_dimensions();
  linear(layout[t].offset) += weight;

  // [t I  x; x' t] >= 0  <=>  |x| <= t
  const MatrixVariable& v = layout[var];
  const Index m = v.size();
  LmiConstraint c;
  c.name = v.name + " norm epigraph";
  c.dim = m + 1;
  c.constant = Matrix::Zero(m + 1, m + 1);
  c.sense = LmiSense::PositiveSemidefinite;
  SparseMatrix diag(m + 1, m + 1);
  diag.setIdentity();
  c.terms.emplace_back(layout[t].offset, diag);
  for (Index j = 0; j < m; ++j) {
    SparseMatrix e(m + 1, m + 1);
    e.insert(j, m) = 1.0;
    e.insert(m, j) = 1.0;
    e.makeCompressed();
    c.terms.emplace_back(v.offset + j, std::move(e));
  }
  constraints.push_back(std::move(c));
  return t;
}

void SdpProblem::add_prox(VariableId var, double weight, const Matrix& anchor)
{
  sync_dimensions();
  const MatrixVariable& v = layout[var];
  const Vector a = layout.coordinates(var, anchor);
  quadratic.diagonal().segment(v.offset, v.size()).array() += 2.0 * weight;
  linear.segment(v.offset, v.size()) -= 2.0 * weight * a;
  constant += weight * a.squaredNorm();
}

void SdpProblem::add_linear_scalar(VariableId var, double weight)
{
  sync_dimensions();
  linear(layout[var].offset) += weight;
}

void SdpProblem::add_lower_bound(VariableId var, double lower)
{
  LmiBuilder b(layout, 1);
  b.add_congruence(var, Matrix::Identity(1, 1));
  b.add_constant(Matrix::Constant(1, 1, -lower));
  constraints.push_back(b.build(layout[var].name + " lower bound", LmiSense::PositiveSemidefinite, 0.0));
}

double SdpProblem::objective(const Vector& x) const
{
  return 0.5 * x.dot(quadratic * x) + linear.dot(x) + constant;
}

std::string_view to_string(SdpStatus status)
{
  switch (status) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::Infeasible: return "infeasible";
    case SdpStatus::Unbounded: return "unbounded";
    case SdpStatus::MaxIterations: return "max-iterations";
    case SdpStatus::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

// --- Interior point method ------------------------------------------------------
//
// Cone form:  minimize 1/2 x'Px + q'x  s.t.  s_l = b_l - A_l(x) in S^k_+.
// Homogeneous embedding with (tau, kappa):
//   P x + A'z + q tau = 0,  A x + s - b tau = 0,  q'x + b'z + x'Px/tau + kappa = 0.

namespace {

using Blocks = std::vector<Matrix>;

struct Cone
{
  Index dim = 0;
  Matrix b;
  std::vector<std::pair<Index, SparseMatrix>> A;  // coefficient of -x_j in s
};

struct Scaling
{
  Matrix R;      // W(Z) = R' Z R
  Matrix Rinv;
  Matrix Winv;   // (R R')^{-1}
  Vector lambda;
};

double inner(const Matrix& X, const Matrix& Y) { return (X.array() * Y.array()).sum(); }

double inner(const SparseMatrix& A, const Matrix& Y)
{
  double acc = 0.0;
  for (Index k = 0; k < A.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
      acc += it.value() * Y(it.row(), it.col());
    }
  }
  return acc;
}

double inner(const Blocks& X, const Blocks& Y)
{
  double acc = 0.0;
  for (std::size_t l = 0; l < X.size(); ++l) {
    acc += inner(X[l], Y[l]);
  }
  return acc;
}

double max_abs(const Blocks& X)
{
  double m = 0.0;
  for (const auto& B : X) {
    if (B.size() > 0) {
      m = std::max(m, B.cwiseAbs().maxCoeff());
    }
  }
  return m;
}

double max_abs(const Vector& v) { return v.size() > 0 ? v.cwiseAbs().maxCoeff() : 0.0; }

Matrix sym(const Matrix& X) { return 0.5 * (X + X.transpose()); }

/// lambda \ D for the Jordan product X o Y = (XY + YX)/2 with diagonal lambda.
Matrix jordan_divide(const Vector& lambda, const Matrix& D)
{
  Matrix out(D.rows(), D.cols());
  for (Index j = 0; j < D.cols(); ++j) {
    for (Index i = 0; i < D.rows(); ++i) {
      out(i, j) = 2.0 * D(i, j) / (lambda(i) + lambda(j));
    }
  }
  return out;
}

/// Largest alpha with Lambda + alpha D >= 0 (infinity when unbounded).
double max_step_scaled(const Vector& lambda, const Matrix& D)
{
  const Vector inv_sqrt = lambda.cwiseSqrt().cwiseInverse();
  const Matrix M = sym(inv_sqrt.asDiagonal() * D * inv_sqrt.asDiagonal());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

double min_eigenvalue(const Matrix& X)
{
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym(X), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

class InteriorPoint
{
public:
  InteriorPoint(const SdpProblem& prob, const SdpSettings& settings) : prob_(prob), set_(settings)
  {
    n_ = prob.layout.size();
    if (prob.linear.size() != n_ || prob.quadratic.rows() != n_ || prob.quadratic.cols() != n_) {
      throw InvalidInput("solve_sdp: objective dimensions do not match the variable layout");
    }
    if (!(settings.variable_scale > 0.0) || !std::isfinite(settings.variable_scale)) {
      throw InvalidInput("solve_sdp: variable_scale must be positive");
    }
    // x = sigma * x~, constraints divided by sigma, objective by omega
    sigma_ = settings.variable_scale;
    P_ = sym(prob.quadratic) * (sigma_ * sigma_);
    q_ = prob.linear * sigma_;
    const double size = std::max(P_.size() > 0 ? P_.cwiseAbs().maxCoeff() : 0.0,
                                 q_.size() > 0 ? q_.cwiseAbs().maxCoeff() : 0.0);
    omega_ = size > 0.0 ? 1.0 / size : 1.0;
    P_ *= omega_;
    q_ *= omega_;
    for (const auto& c : prob.constraints) {
      Cone cone;
      cone.dim = c.dim;
      const double sign = c.sense == LmiSense::PositiveSemidefinite ? 1.0 : -1.0;
      cone.b = (sign * c.constant - c.margin * Matrix::Identity(c.dim, c.dim)) / sigma_;
      for (const auto& [coord, F] : c.terms) {
        if (coord < 0 || coord >= n_) {
          throw InvalidInput("solve_sdp: constraint '" + c.name + "' references an unknown coordinate");
        }
        cone.A.emplace_back(coord, SparseMatrix(-sign * F));
      }
      degree_ += cone.dim;
      cones_.push_back(std::move(cone));
    }
  }

  SdpSolution run();

private:
  Blocks apply_A(const Vector& x) const
  {
    Blocks out;
    out.reserve(cones_.size());
    for (const auto& cone : cones_) {
      Matrix M = Matrix::Zero(cone.dim, cone.dim);
      for (const auto& [j, F] : cone.A) {
        const double xv = x(j);
        if (xv != 0.0) {
          for (Index k = 0; k < F.outerSize(); ++k) {
            for (SparseMatrix::InnerIterator it(F, k); it; ++it) {
              M(it.row(), it.col()) += xv * it.value();
            }
          }
        }
      }
      out.push_back(std::move(M));
    }
    return out;
  }

  Vector apply_AT(const Blocks& Z) const
  {
    Vector out = Vector::Zero(n_);
    for (std::size_t l = 0; l < cones_.size(); ++l) {
      for (const auto& [j, F] : cones_[l].A) {
        out(j) += inner(F, Z[l]);
      }
    }
    return out;
  }

  Blocks b_blocks() const
  {
    Blocks out;
    for (const auto& c : cones_) out.push_back(c.b);
    return out;
  }

  bool compute_scaling(const Blocks& s, const Blocks& z);
  bool factor_schur();
  void solve_kkt(const Vector& r1, const Blocks& r2, Vector& dx, Blocks& dz) const;

  SdpSolution finish(SdpStatus status, const Vector& x, const Blocks& z, double tau, int iters) const;

  const SdpProblem& prob_;
  SdpSettings set_;
  Index n_ = 0;
  Index degree_ = 0;
  Matrix P_;
  Vector q_;
  std::vector<Cone> cones_;
  std::vector<Scaling> scaling_;
  Eigen::LLT<Matrix> schur_;
  double reg_ = 0.0;
  double sigma_ = 1.0;
  double omega_ = 1.0;

  double pres_ = 0.0;
  double dres_ = 0.0;
  double gap_ = 0.0;
};

bool InteriorPoint::compute_scaling(const Blocks& s, const Blocks& z)
{
  scaling_.resize(cones_.size());
  for (std::size_t l = 0; l < cones_.size(); ++l) {
    Eigen::LLT<Matrix> ls(sym(s[l]));
    Eigen::LLT<Matrix> lz(sym(z[l]));
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) {
      return false;
    }
    const Matrix Ls = ls.matrixL();
    const Matrix Lz = lz.matrixL();
    Eigen::JacobiSVD<Matrix> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector lambda = svd.singularValues();
    if (!(lambda.minCoeff() > 0.0) || !lambda.allFinite()) {
      return false;
    }
    const Vector isq = lambda.cwiseSqrt().cwiseInverse();
    Scaling& sc = scaling_[l];
    sc.lambda = lambda;
    sc.R = Ls * svd.matrixV() * isq.asDiagonal();
    sc.Rinv = isq.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
    sc.Winv = sc.Rinv.transpose() * sc.Rinv;
  }
  return true;
}

bool InteriorPoint::factor_schur()
{
  Matrix M = P_;
  for (std::size_t l = 0; l < cones_.size(); ++l) {
    const Cone& cone = cones_[l];
    const Matrix& Wi = scaling_[l].Winv;
    for (std::size_t b = 0; b < cone.A.size(); ++b) {
      const auto& [j, Fj] = cone.A[b];
      const Matrix T = Wi * (Fj * Wi);
      for (std::size_t a = 0; a <= b; ++a) {
        const auto& [i, Fi] = cone.A[a];
        const double v = inner(Fi, T);
        M(i, j) += v;
        if (i != j) {
          M(j, i) += v;
        }
      }
    }
  }
  const double scale = std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
  reg_ = set_.static_regularization + 1e-30 * scale;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Matrix Mr = M;
    Mr.diagonal().array() += reg_;
    schur_.compute(Mr);
    if (schur_.info() == Eigen::Success) {
      return true;
    }
    reg_ = std::max(reg_ * 100.0, 1e-12 * scale);
  }
  return false;
}

void InteriorPoint::solve_kkt(const Vector& r1, const Blocks& r2, Vector& dx, Blocks& dz) const
{
  // [P  A'; A  -W'W] [dx; dz] = [r1; r2]
  Blocks t(cones_.size());
  for (std::size_t l = 0; l < cones_.size(); ++l) {
    t[l] = scaling_[l].Winv * r2[l] * scaling_[l].Winv;
  }
  dx = schur_.solve(r1 + apply_AT(t));
  auto recover = [&](const Vector& x, const Blocks* rhs) {
    Blocks Ax = apply_A(x);
    Blocks out(cones_.size());
    for (std::size_t l = 0; l < cones_.size(); ++l) {
      const Matrix d = rhs ? Matrix(Ax[l] - (*rhs)[l]) : Ax[l];
      out[l] = sym(scaling_[l].Winv * d * scaling_[l].Winv);
    }
    return out;
  };
  dz = recover(dx, &r2);
  // iterative refinement against the unregularized system
  double last = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 4; ++step) {
    const Vector res = r1 - P_ * dx - apply_AT(dz);
    const double err = max_abs(res);
    if (!(err < 0.5 * last) || err <= 1e-14 * std::max(1.0, max_abs(r1))) {
      break;
    }
    last = err;
    const Vector cx = schur_.solve(res);
    const Blocks cz = recover(cx, nullptr);
    dx += cx;
    for (std::size_t l = 0; l < cones_.size(); ++l) {
      dz[l] += cz[l];
    }
  }
}

SdpSolution InteriorPoint::finish(SdpStatus status, const Vector& x, const Blocks& z, double tau,
                                  int iters) const
{
  SdpSolution sol;
  sol.status = status;
  sol.iterations = iters;
  const double t = tau > 0.0 ? tau : 1.0;
  sol.x = x * (sigma_ / t);
  sol.objective = prob_.objective(sol.x);
  sol.primal_residual = pres_;
  sol.dual_residual = dres_;
  sol.gap = gap_;
  for (std::size_t l = 0; l < z.size(); ++l) {
    // report multipliers in the constraint's own orientation
    sol.duals.push_back(z[l] / (t * omega_ * sigma_));
  }
  return sol;
}

SdpSolution InteriorPoint::run()
{
  const std::size_t L = cones_.size();
  const Blocks bb = b_blocks();
  const double bnorm = max_abs(bb);
  const double qnorm = max_abs(q_);

  // --- initial point: solve the KKT system with identity scaling ---
  scaling_.assign(L, Scaling{});
  for (std::size_t l = 0; l < L; ++l) {
    const Index k = cones_[l].dim;
    scaling_[l] = {Matrix::Identity(k, k), Matrix::Identity(k, k), Matrix::Identity(k, k), Vector::Ones(k)};
  }
  if (!factor_schur()) {
    return finish(SdpStatus::NumericalFailure, Vector::Zero(n_), Blocks(L), 1.0, 0);
  }
  Blocks negb(L);
  for (std::size_t l = 0; l < L; ++l) negb[l] = -bb[l];
  Vector x;
  Blocks z;
  solve_kkt(-q_, bb, x, z);
  Blocks s(L);
  for (std::size_t l = 0; l < L; ++l) {
    s[l] = -z[l];
  }
  auto shift = [&](Blocks& X) {
    double worst = -std::numeric_limits<double>::infinity();
    double nrm = 0.0;
    for (const auto& B : X) {
      if (B.size() > 0) {
        worst = std::max(worst, -min_eigenvalue(B));
        nrm = std::max(nrm, B.norm());
      }
    }
    if (L > 0 && worst >= -1e-8 * std::max(1.0, nrm)) {
      for (auto& B : X) {
        B.diagonal().array() += 1.0 + worst;
      }
    }
  };
  shift(s);
  shift(z);
  double tau = 1.0;
  double kappa = 1.0;

  int stalls = 0;
  for (int iter = 0; iter <= set_.max_iter; ++iter) {
    // --- residuals ---
    const Vector Px = P_ * x;
    const double xPx = x.dot(Px);
    const Blocks Ax = apply_A(x);
    const Vector ATz = apply_AT(z);
    const Vector rx = Px + ATz + q_ * tau;
    Blocks rz(L);
    for (std::size_t l = 0; l < L; ++l) {
      rz[l] = Ax[l] + s[l] - bb[l] * tau;
    }
    const double bz = inner(bb, z);
    const double qx = q_.dot(x);
    const double rtau = qx + bz + xPx / tau + kappa;

    if (!x.allFinite() || !std::isfinite(tau) || !std::isfinite(kappa)) {
      return finish(SdpStatus::NumericalFailure, x, z, tau, iter);
    }

    // --- termination on the normalized iterate ---
    {
      const double pobj = 0.5 * xPx / (tau * tau) + qx / tau;
      const double dobj = -0.5 * xPx / (tau * tau) - bz / tau;
      Blocks Axh = Ax;
      for (auto& B : Axh) B /= tau;
      Blocks sh = s;
      for (auto& B : sh) B /= tau;
      pres_ = max_abs(rz) / tau / std::max({1.0, bnorm, max_abs(Axh), max_abs(sh)});
      dres_ = max_abs(rx) / tau / std::max({1.0, qnorm, max_abs(Px) / tau, max_abs(ATz) / tau});
      const double gap_abs = std::abs(pobj - dobj);
      gap_ = gap_abs / std::max(1.0, std::min(std::abs(pobj), std::abs(dobj)));
      if (pres_ <= set_.tol_feas && dres_ <= set_.tol_feas && (gap_ <= set_.tol_gap || gap_abs <= set_.tol_gap)) {
        return finish(SdpStatus::Optimal, x, z, tau, iter);
      }
      // Farkas ray: A'z = 0, b'z < 0, z >= 0
      if (bz < 0.0 && tau < kappa) {
        const double rel = max_abs(ATz) / -bz;
        if (rel <= set_.tol_feas) {
          SdpSolution sol = finish(SdpStatus::Infeasible, x, z, tau, iter);
          InfeasibilityCertificate cert;
          for (const auto& B : z) cert.duals.push_back(B / (-bz * sigma_));
          cert.residual = rel;
          sol.certificate = std::move(cert);
          return sol;
        }
      }
      if (qx < 0.0 && tau < kappa) {
        Blocks axs(L);
        for (std::size_t l = 0; l < L; ++l) axs[l] = Ax[l] + s[l];
        if (max_abs(Px) <= set_.tol_feas * -qx && max_abs(axs) <= set_.tol_feas * -qx) {
          return finish(SdpStatus::Unbounded, x, z, tau, iter);
        }
      }
    }
    if (iter == set_.max_iter) {
      return finish(SdpStatus::MaxIterations, x, z, tau, iter);
    }

    // --- scaling and Schur complement ---
    if (!compute_scaling(s, z) || !factor_schur()) {
      return finish(SdpStatus::NumericalFailure, x, z, tau, iter);
    }
    const double mu = (inner(s, z) + tau * kappa) / static_cast<double>(degree_ + 1);

    // constant part of the tau elimination
    Vector x2;
    Blocks z2;
    solve_kkt(q_, negb, x2, z2);
    const Vector c1 = q_ + 2.0 * Px / tau;
    const double c3 = -(xPx / (tau * tau) + kappa / tau);

    struct Direction
    {
      Vector dx;
      Blocks dz, ds;
      double dtau = 0.0;
      double dkappa = 0.0;
    };

    auto direction = [&](double eta_r, const Blocks& dsv, double dkappa_rhs) {
      Direction d;
      Blocks u(L);  // lambda \ d_s
      Blocks rhs2(L);
      for (std::size_t l = 0; l < L; ++l) {
        const Scaling& sc = scaling_[l];
        u[l] = jordan_divide(sc.lambda, dsv[l]);
        rhs2[l] = -eta_r * rz[l] - sc.R * u[l] * sc.R.transpose();
      }
      const Vector rhs1 = -eta_r * rx;
      const double rhs3 = -eta_r * rtau - dkappa_rhs / tau;
      Vector x1;
      Blocks z1;
      solve_kkt(rhs1, rhs2, x1, z1);
      const double denom = c3 - c1.dot(x2) - inner(bb, z2);
      d.dtau = (rhs3 - c1.dot(x1) - inner(bb, z1)) / denom;
      d.dx = x1 - d.dtau * x2;
      d.dz.resize(L);
      d.ds.resize(L);
      // ds from the primal equation keeps A dx + ds - b dtau exact; the
      // scaled complementarity form loses digits when W is ill-conditioned
      const Blocks Adx = apply_A(d.dx);
      for (std::size_t l = 0; l < L; ++l) {
        d.dz[l] = z1[l] - d.dtau * z2[l];
        d.ds[l] = sym(-eta_r * rz[l] - Adx[l] + bb[l] * d.dtau);
      }
      d.dkappa = (dkappa_rhs - kappa * d.dtau) / tau;
      return d;
    };

    auto max_step = [&](const Direction& d) {
      double alpha = std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < L; ++l) {
        const Scaling& sc = scaling_[l];
        alpha = std::min(alpha, max_step_scaled(sc.lambda, sc.Rinv * d.ds[l] * sc.Rinv.transpose()));
        alpha = std::min(alpha, max_step_scaled(sc.lambda, sc.R.transpose() * d.dz[l] * sc.R));
      }
      if (d.dtau < 0.0) alpha = std::min(alpha, -tau / d.dtau);
      if (d.dkappa < 0.0) alpha = std::min(alpha, -kappa / d.dkappa);
      return alpha;
    };

    // predictor
    Blocks ds_aff(L);
    for (std::size_t l = 0; l < L; ++l) {
      ds_aff[l] = -Matrix(scaling_[l].lambda.array().square().matrix().asDiagonal());
    }
    const Direction aff = direction(1.0, ds_aff, -tau * kappa);
    const double alpha_aff = std::min(1.0, max_step(aff));
    const double sigma = std::pow(1.0 - alpha_aff, 3);

    // corrector
    Blocks ds_cc(L);
    for (std::size_t l = 0; l < L; ++l) {
      const Scaling& sc = scaling_[l];
      const Matrix a = sc.Rinv * aff.ds[l] * sc.Rinv.transpose();
      const Matrix b = sc.R.transpose() * aff.dz[l] * sc.R;
      ds_cc[l] = ds_aff[l] - 0.5 * (a * b + b * a);
      ds_cc[l].diagonal().array() += sigma * mu;
    }
    const Direction d = direction(1.0 - sigma, ds_cc, -tau * kappa + sigma * mu - aff.dtau * aff.dkappa);
    const double alpha = std::min(1.0, set_.step_fraction * max_step(d));
    if (!std::isfinite(alpha) || alpha < 1e-10) {
      if (++stalls >= 3) {
        return finish(SdpStatus::NumericalFailure, x, z, tau, iter);
      }
    } else {
      stalls = 0;
    }

    x += alpha * d.dx;
    for (std::size_t l = 0; l < L; ++l) {
      s[l] = sym(s[l] + alpha * d.ds[l]);
      z[l] = sym(z[l] + alpha * d.dz[l]);
    }
    tau += alpha * d.dtau;
    kappa += alpha * d.dkappa;
  }
  return finish(SdpStatus::MaxIterations, x, z, tau, set_.max_iter);
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& prob, const SdpSettings& settings)
{
  InteriorPoint ipm(prob, settings);
  SdpSolution sol = ipm.run();
  // multipliers for NSD constraints act on -F; keep them PSD either way
  return sol;
}

}  // namespace dissynth
