#include "dissynth/lmi.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace dissynth {

namespace {

const double kSqrt2 = std::sqrt(2.0);

double max_abs_or_one(const Matrix& m) { return std::max(1.0, m.size() ? m.cwiseAbs().maxCoeff() : 0.0); }

}  // namespace

Vector svec(const Matrix& X)
{
  if (X.rows() != X.cols()) {
    throw InvalidInput("svec: matrix is not square");
  }
  if (X.size() > 0 && (X - X.transpose()).cwiseAbs().maxCoeff() > 1e-12 * max_abs_or_one(X)) {
    throw InvalidInput("svec: matrix is not symmetric");
  }
  const Index k = X.rows();
  Vector v(svec_size(k));
  Index idx = 0;
  for (Index j = 0; j < k; ++j) {
    for (Index i = 0; i < j; ++i) {
      v(idx++) = kSqrt2 * 0.5 * (X(i, j) + X(j, i));
    }
    v(idx++) = X(j, j);
  }
  return v;
}

Matrix smat(const Vector& v)
{
  const auto k = static_cast<Index>(std::llround((std::sqrt(8.0 * static_cast<double>(v.size()) + 1.0) - 1.0) / 2.0));
  if (svec_size(k) != v.size()) {
    throw InvalidInput("smat: length " + std::to_string(v.size()) + " is not a triangular number");
  }
  Matrix X(k, k);
  Index idx = 0;
  for (Index j = 0; j < k; ++j) {
    for (Index i = 0; i < j; ++i) {
      X(i, j) = X(j, i) = v(idx++) / kSqrt2;
    }
    X(j, j) = v(idx++);
  }
  return X;
}

// --- VariableLayout ---------------------------------------------------------

VariableId VariableLayout::add_symmetric(std::string name, Index k)
{
  MatrixVariable v{std::move(name), VariableKind::Symmetric, k, k, size_};
  size_ += v.size();
  vars_.push_back(std::move(v));
  return vars_.size() - 1;
}

VariableId VariableLayout::add_general(std::string name, Index rows, Index cols)
{
  MatrixVariable v{std::move(name), VariableKind::General, rows, cols, size_};
  size_ += v.size();
  vars_.push_back(std::move(v));
  return vars_.size() - 1;
}

std::optional<VariableId> VariableLayout::find(const std::string& name) const
{
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i].name == name) {
      return i;
    }
  }
  return std::nullopt;
}

Matrix VariableLayout::unpack(const Vector& x, VariableId id) const
{
  const MatrixVariable& v = vars_.at(id);
  if (v.kind == VariableKind::Symmetric) {
    return smat(x.segment(v.offset, v.size()));
  }
  return Eigen::Map<const Matrix>(x.data() + v.offset, v.rows, v.cols);
}

Vector VariableLayout::coordinates(VariableId id, const Matrix& value) const
{
  const MatrixVariable& v = vars_.at(id);
  if (value.rows() != v.rows || value.cols() != v.cols) {
    throw InvalidInput("value for variable '" + v.name + "' has wrong shape");
  }
  if (v.kind == VariableKind::Symmetric) {
    return svec(value);
  }
  return Eigen::Map<const Vector>(value.data(), value.size());
}

void VariableLayout::pack(VariableId id, const Matrix& value, Vector& x) const
{
  const MatrixVariable& v = vars_.at(id);
  x.segment(v.offset, v.size()) = coordinates(id, value);
}

std::vector<VariableLayout::BasisEntry> VariableLayout::basis(VariableId id, Index local) const
{
  const MatrixVariable& v = vars_.at(id);
  if (v.kind == VariableKind::General) {
    return {{local % v.rows, local / v.rows, 1.0}};
  }
  // invert the svec ordering: column j holds entries (0..j, j)
  Index j = 0;
  while (svec_size(j + 1) <= local) {
    ++j;
  }
  const Index i = local - svec_size(j);
  if (i == j) {
    return {{j, j, 1.0}};
  }
  return {{i, j, 1.0 / kSqrt2}, {j, i, 1.0 / kSqrt2}};
}

// --- LmiConstraint ------------------------------------------------------------

Matrix LmiConstraint::evaluate(const Vector& x) const
{
  Matrix F = constant;
  for (const auto& [coord, coeff] : terms) {
    const double xv = x(coord);
    if (xv == 0.0) {
      continue;
    }
    for (Index k = 0; k < coeff.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(coeff, k); it; ++it) {
        F(it.row(), it.col()) += xv * it.value();
      }
    }
  }
  return F;
}

double LmiConstraint::violation(const Vector& x) const
{
  if (dim == 0) {
    return -margin;
  }
  const Matrix F = evaluate(x);
  const Matrix Fs = 0.5 * (F + F.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Fs, Eigen::EigenvaluesOnly);
  if (sense == LmiSense::NegativeSemidefinite) {
    return eig.eigenvalues().maxCoeff() + margin;
  }
  return margin - eig.eigenvalues().minCoeff();
}

LmiConstraint fix_variable(const LmiConstraint& c, const VariableLayout& layout, VariableId var, const Matrix& value)
{
  const MatrixVariable& v = layout[var];
  const Vector coords = layout.coordinates(var, value);
  LmiConstraint out = c;
  out.terms.clear();
  for (const auto& [coord, coeff] : c.terms) {
    if (coord < v.offset) {
      out.terms.emplace_back(coord, coeff);
    } else if (coord >= v.offset + v.size()) {
      out.terms.emplace_back(coord - v.size(), coeff);
    } else {
      out.constant += coords(coord - v.offset) * Matrix(coeff);
    }
  }
  return out;
}

// --- LmiBuilder ----------------------------------------------------------------

LmiBuilder::LmiBuilder(const VariableLayout& layout, Index dim)
  : layout_(layout), dim_(dim), constant_(Matrix::Zero(dim, dim)),
    slot_(static_cast<std::size_t>(layout.size()))
{}

LmiBuilder& LmiBuilder::add_product(VariableId var, const Matrix& left, const Matrix& right, double scale,
                                    bool transpose)
{
  const MatrixVariable& v = layout_[var];
  const Index inner_rows = transpose ? v.cols : v.rows;
  const Index inner_cols = transpose ? v.rows : v.cols;
  if (left.rows() != dim_ || right.cols() != dim_ || left.cols() != inner_rows || right.rows() != inner_cols) {
    throw InvalidInput("LmiBuilder: product shapes do not match variable '" + v.name + "'");
  }
  for (Index local = 0; local < v.size(); ++local) {
    const auto entries = layout_.basis(var, local);
    Matrix contrib = Matrix::Zero(dim_, dim_);
    bool any = false;
    for (const auto& e : entries) {
      const Index r = transpose ? e.col : e.row;
      const Index c = transpose ? e.row : e.col;
      if (left.col(r).isZero(0.0) || right.row(c).isZero(0.0)) {
        continue;
      }
      contrib.noalias() += (scale * e.value) * left.col(r) * right.row(c);
      any = true;
    }
    if (!any) {
      continue;
    }
    const auto coord = static_cast<std::size_t>(v.offset + local);
    if (!slot_[coord]) {
      slot_[coord] = dense_terms_.size();
      dense_terms_.emplace_back(static_cast<Index>(coord), Matrix::Zero(dim_, dim_));
    }
    dense_terms_[*slot_[coord]].second += contrib;
  }
  return *this;
}

LmiBuilder& LmiBuilder::add_congruence(VariableId var, const Matrix& T, double scale)
{
  return add_product(var, T.transpose(), T, scale);
}

LmiBuilder& LmiBuilder::add_constant(const Matrix& value)
{
  if (value.rows() != dim_ || value.cols() != dim_) {
    throw InvalidInput("LmiBuilder: constant has wrong shape");
  }
  constant_ += value;
  return *this;
}

LmiConstraint LmiBuilder::build(std::string name, LmiSense sense, double margin) const
{
  LmiConstraint out;
  out.name = std::move(name);
  out.dim = dim_;
  out.sense = sense;
  out.margin = margin;
  if (dim_ > 0 && (constant_ - constant_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * max_abs_or_one(constant_)) {
    throw InvalidInput("LmiBuilder: constant term of '" + out.name + "' is not symmetric");
  }
  out.constant = 0.5 * (constant_ + constant_.transpose());
  auto sorted = dense_terms_;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [coord, dense] : sorted) {
    if (dim_ > 0 && (dense - dense.transpose()).cwiseAbs().maxCoeff() > 1e-12 * max_abs_or_one(dense)) {
      throw InvalidInput("LmiBuilder: coefficient of coordinate " + std::to_string(coord) + " in '" + out.name +
                         "' is not symmetric");
    }
    const Matrix sym = 0.5 * (dense + dense.transpose());
    SparseMatrix sp = sym.sparseView(1.0, 0.0);
    if (sp.nonZeros() == 0) {
      continue;
    }
    sp.makeCompressed();
    out.terms.emplace_back(coord, std::move(sp));
  }
  return out;
}

// --- Supply rates ---------------------------------------------------------------

SupplyRate hinf_supply(double eta, Index n_d, Index n_z)
{
  if (!(eta >= 0.0)) {
    throw InvalidInput("hinf_supply: eta must be non-negative");
  }
  SupplyRate s;
  s.S = Matrix::Zero(n_d + n_z, n_d + n_z);
  s.S.topLeftCorner(n_d, n_d).diagonal().setConstant(eta);
  s.S.bottomRightCorner(n_z, n_z).diagonal().setConstant(-1.0);
  s.hinf = true;
  s.eta = eta;
  s.n_d = n_d;
  s.n_z = n_z;
  return s;
}

SupplyRate zero_supply(Index n_d, Index n_z)
{
  SupplyRate s;
  s.S = Matrix::Zero(n_d + n_z, n_d + n_z);
  s.n_d = n_d;
  s.n_z = n_z;
  return s;
}

// --- Local dissipation LMI ---------------------------------------------------------

LocalVariables add_local_variables(VariableLayout& layout, const Subsystem& sub, const std::string& suffix)
{
  LocalVariables v{};
  v.S = layout.add_symmetric("S" + suffix, sub.disturbances() + sub.outputs());
  v.P = layout.add_symmetric("P" + suffix, sub.states());
  v.Y = layout.add_general("Y" + suffix, sub.states(), sub.states());
  return v;
}

LocalLmi local_lmi(const Subsystem& sub, const VariableLayout& layout, const LocalVariables& vars, double margin)
{
  const Index n = sub.states();
  const Index n_w = sub.disturbances();
  const Index n_y = sub.outputs();
  const Index dim = n + n_w;

  LmiBuilder pos(layout, n);
  pos.add_congruence(vars.P, Matrix::Identity(n, n));

  // embeddings of the x and w rows, and selectors of the S blocks
  Matrix Ex = Matrix::Zero(dim, n);
  Ex.topRows(n).setIdentity();
  Matrix Ew = Matrix::Zero(dim, n_w);
  Ew.bottomRows(n_w).setIdentity();
  Matrix Jw = Matrix::Zero(n_w, n_w + n_y);
  Jw.leftCols(n_w).setIdentity();
  Matrix Jy = Matrix::Zero(n_y, n_w + n_y);
  Jy.rightCols(n_y).setIdentity();

  const Matrix& A = sub.A;
  const Matrix& G = sub.G;
  const Matrix& C = sub.C;

  LmiBuilder diss(layout, dim);
  // (1,1): A'P + PA + Y' + Y - C' S22 C
  diss.add_product(vars.P, Ex * A.transpose(), Ex.transpose());
  diss.add_product(vars.P, Ex, A * Ex.transpose());
  diss.add_product(vars.Y, Ex, Ex.transpose());
  diss.add_product(vars.Y, Ex, Ex.transpose(), 1.0, true);
  diss.add_product(vars.S, Ex * C.transpose() * Jy, Jy.transpose() * C * Ex.transpose(), -1.0);
  // (1,2) = P G - C' S12' and its transpose
  diss.add_product(vars.P, Ex, G * Ew.transpose());
  diss.add_product(vars.P, Ew * G.transpose(), Ex.transpose());
  diss.add_product(vars.S, Ex * C.transpose() * Jy, Jw.transpose() * Ew.transpose(), -1.0);
  diss.add_product(vars.S, Ew * Jw, Jy.transpose() * C * Ex.transpose(), -1.0);
  // (2,2): -S11
  diss.add_product(vars.S, Ew * Jw, Jw.transpose() * Ew.transpose(), -1.0);

  return {pos.build("P positivity", LmiSense::PositiveSemidefinite, margin),
          diss.build("local dissipation", LmiSense::NegativeSemidefinite, 0.0)};
}

Matrix local_dissipation_matrix(const Subsystem& sub, const LocalCertificate& cert)
{
  const Index n = sub.states();
  const Index n_w = sub.disturbances();
  const Matrix& P = cert.P;
  const Matrix& Y = cert.Y;
  const Matrix S12 = cert.S12(n_w);
  Matrix X(n + n_w, n + n_w);
  X.topLeftCorner(n, n) =
    sub.A.transpose() * P + P * sub.A + Y.transpose() + Y - sub.C.transpose() * cert.S22(n_w) * sub.C;
  X.topRightCorner(n, n_w) = P * sub.G - sub.C.transpose() * S12.transpose();
  X.bottomLeftCorner(n_w, n) = X.topRightCorner(n, n_w).transpose();
  X.bottomRightCorner(n_w, n_w) = -cert.S11(n_w);
  return X;
}

// --- Global interconnection LMI -------------------------------------------------------

namespace {

Matrix stacked_map(const InterconnectionProblem& p, const Matrix& permutation)
{
  const Index n_y = p.total_outputs();
  const Index cols = n_y + p.n_d;
  const Matrix M = p.interconnection();
  Matrix MI(M.rows() + cols, cols);
  MI << M, Matrix::Identity(cols, cols);
  if (permutation.rows() != MI.rows() || permutation.cols() != MI.rows()) {
    throw InvalidInput("global_lmi: permutation size does not match the problem");
  }
  return permutation * MI;
}

}  // namespace

std::vector<Matrix> local_row_maps(const InterconnectionProblem& p, const Matrix& permutation)
{
  const Matrix H = stacked_map(p, permutation);
  std::vector<Matrix> out;
  Index row = 0;
  for (const auto& s : p.subsystems) {
    const Index k = s.disturbances() + s.outputs();
    out.push_back(H.middleRows(row, k));
    row += k;
  }
  return out;
}

std::pair<Matrix, Matrix> supply_row_maps(const InterconnectionProblem& p, const Matrix& permutation)
{
  const Matrix H = stacked_map(p, permutation);
  const Index start = H.rows() - p.n_d - p.n_z;
  return {H.middleRows(start, p.n_d), H.bottomRows(p.n_z)};
}

LmiConstraint global_lmi(const InterconnectionProblem& p, const Matrix& permutation, const SupplyRate& supply,
                         const VariableLayout& layout, const GlobalVariables& vars, double margin)
{
  if (vars.supply_blocks.size() != p.subsystems.size()) {
    throw InvalidInput("global_lmi: need one supply block per subsystem");
  }
  if (supply.S.rows() != p.n_d + p.n_z || supply.S.cols() != p.n_d + p.n_z) {
    throw InvalidInput("global_lmi: supply rate size does not match n_d + n_z");
  }
  if (vars.eta && !supply.hinf) {
    throw InvalidInput("global_lmi: a variable eta requires an H-infinity supply rate");
  }
  const auto rows = local_row_maps(p, permutation);
  const auto [Td, Tz] = supply_row_maps(p, permutation);
  const Index dim = p.total_outputs() + p.n_d;

  LmiBuilder b(layout, dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    b.add_congruence(vars.supply_blocks[i], rows[i]);
  }
  Matrix Tdz(p.n_d + p.n_z, dim);
  Tdz << Td, Tz;
  if (vars.eta) {
    // -[d; z]' diag(eta I, -I) [d; z] = -eta |d|^2 + |z|^2
    for (Index k = 0; k < p.n_d; ++k) {
      b.add_product(*vars.eta, -Td.row(k).transpose(), Td.row(k));
    }
    b.add_constant(Tz.transpose() * Tz);
  } else {
    b.add_constant(-Tdz.transpose() * supply.S * Tdz);
  }
  return b.build("global interconnection", LmiSense::NegativeSemidefinite, margin);
}

Matrix global_lmi_matrix(const InterconnectionProblem& p, const Matrix& permutation, const SupplyRate& supply,
                         const std::vector<Matrix>& supply_blocks)
{
  const auto rows = local_row_maps(p, permutation);
  const auto [Td, Tz] = supply_row_maps(p, permutation);
  const Index dim = p.total_outputs() + p.n_d;
  Matrix out = Matrix::Zero(dim, dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += rows[i].transpose() * supply_blocks.at(i) * rows[i];
  }
  Matrix Tdz(p.n_d + p.n_z, dim);
  Tdz << Td, Tz;
  out -= Tdz.transpose() * supply.S * Tdz;
  return out;
}

}  // namespace dissynth
