#pragma once

#include "dissynth/model.hpp"

#include <Eigen/Sparse>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dissynth {

// ---------------------------------------------------------------------------
// Scaled half-vectorization
// ---------------------------------------------------------------------------

/// Length of svec for a k x k symmetric matrix.
constexpr Index svec_size(Index k) { return k * (k + 1) / 2; }

/// Upper triangle, column by column, off-diagonal entries scaled by sqrt(2),
/// so that dot(svec X, svec Y) = trace(X Y).  Throws InvalidInput if X is
/// not symmetric to within 1e-12 (relative to its largest entry, min 1).
Vector svec(const Matrix& X);

/// Inverse of svec.  Throws InvalidInput if v's length is not triangular.
Matrix smat(const Vector& v);

// ---------------------------------------------------------------------------
// Decision variables
// ---------------------------------------------------------------------------

enum class VariableKind { Symmetric, General };

using VariableId = std::size_t;

struct MatrixVariable
{
  std::string name;
  VariableKind kind = VariableKind::General;
  Index rows = 0;
  Index cols = 0;
  Index offset = 0;  ///< first coordinate in the flat decision vector

  /// Number of flat coordinates (svec length for symmetric, rows*cols otherwise).
  Index size() const { return kind == VariableKind::Symmetric ? svec_size(rows) : rows * cols; }
};

/// Packs named matrix variables into one flat vector.  Symmetric variables use
/// svec coordinates, general ones column-major vec; both make the Euclidean
/// norm of the coordinates equal the Frobenius norm of the matrix.
class VariableLayout
{
public:
  VariableId add_symmetric(std::string name, Index k);
  VariableId add_general(std::string name, Index rows, Index cols);
  VariableId add_scalar(std::string name) { return add_general(std::move(name), 1, 1); }

  Index size() const { return size_; }
  std::size_t count() const { return vars_.size(); }
  const MatrixVariable& operator[](VariableId id) const { return vars_.at(id); }
  std::optional<VariableId> find(const std::string& name) const;

  Matrix unpack(const Vector& x, VariableId id) const;
  void pack(VariableId id, const Matrix& value, Vector& x) const;
  Vector coordinates(VariableId id, const Matrix& value) const;

  struct BasisEntry
  {
    Index row;
    Index col;
    double value;
  };
  /// Nonzeros of the matrix that coordinate `local` of variable `id` multiplies.
  std::vector<BasisEntry> basis(VariableId id, Index local) const;

private:
  std::vector<MatrixVariable> vars_;
  Index size_ = 0;
};

// ---------------------------------------------------------------------------
// Affine matrix inequalities
// ---------------------------------------------------------------------------

enum class LmiSense {
  PositiveSemidefinite,  ///< F(x) >= margin * I
  NegativeSemidefinite   ///< F(x) <= -margin * I
};

using SparseMatrix = Eigen::SparseMatrix<double>;

/// F(x) = F0 + sum_j x_j F_j together with a sense and margin.  Coefficients
/// are symmetric for every coordinate, so F(x) is symmetric for every x.
struct LmiConstraint
{
  std::string name;
  Index dim = 0;
  Matrix constant;
  std::vector<std::pair<Index, SparseMatrix>> terms;  ///< (flat coordinate, F_j)
  LmiSense sense = LmiSense::NegativeSemidefinite;
  double margin = 0.0;

  Matrix evaluate(const Vector& x) const;

  /// Amount by which x misses the constraint: lambda_max(F) + margin for the
  /// NSD sense, margin - lambda_min(F) for the PSD sense.  <= 0 means satisfied.
  double violation(const Vector& x) const;
};

/// Substitutes a fixed value for `var` and drops its coordinates; coordinates
/// after the variable shift down, matching a layout built without it.
LmiConstraint fix_variable(const LmiConstraint& c, const VariableLayout& layout, VariableId var, const Matrix& value);

/// Accumulates terms of the form scale * L X R (or L X^T R) into a dim x dim
/// expression.  Callers add both halves of non-symmetric products.
class LmiBuilder
{
public:
  LmiBuilder(const VariableLayout& layout, Index dim);

  LmiBuilder& add_product(VariableId var, const Matrix& left, const Matrix& right, double scale = 1.0,
                          bool transpose = false);
  /// scale * T^T X T for a symmetric variable X.
  LmiBuilder& add_congruence(VariableId var, const Matrix& T, double scale = 1.0);
  LmiBuilder& add_constant(const Matrix& value);

  /// Throws InvalidInput if any coefficient is not symmetric.
  LmiConstraint build(std::string name, LmiSense sense, double margin) const;

private:
  const VariableLayout& layout_;
  Index dim_;
  Matrix constant_;
  std::vector<std::pair<Index, Matrix>> dense_terms_;
  std::vector<std::optional<std::size_t>> slot_;  // coordinate -> index into dense_terms_
};

// ---------------------------------------------------------------------------
// Supply rates and the synthesis LMIs
// ---------------------------------------------------------------------------

/// Global quadratic supply [d; z]^T S [d; z].
struct SupplyRate
{
  Matrix S;            ///< (n_d + n_z) square, symmetric
  bool hinf = false;   ///< S = diag(eta I, -I)
  double eta = 0.0;
  Index n_d = 0;
  Index n_z = 0;
};

/// S = diag(eta I_{n_d}, -I_{n_z}).  Throws InvalidInput for eta < 0.
SupplyRate hinf_supply(double eta, Index n_d, Index n_z);

/// S = 0 on (n_d + n_z) channels; the stabilization setting.
SupplyRate zero_supply(Index n_d, Index n_z);

/// Decision variables of one subsystem's dissipation certificate.
struct LocalCertificate
{
  Matrix S;  ///< (n_w + n_y) square; blocks S11 (n_w), S12 (n_w x n_y), S22 (n_y)
  Matrix P;  ///< n square, symmetric
  Matrix Y;  ///< n square, general

  Matrix S11(Index n_w) const { return S.topLeftCorner(n_w, n_w); }
  Matrix S12(Index n_w) const { return S.topRightCorner(n_w, S.cols() - n_w); }
  Matrix S22(Index n_w) const { return S.bottomRightCorner(S.rows() - n_w, S.cols() - n_w); }
};

struct LocalVariables
{
  VariableId S;
  VariableId P;
  VariableId Y;
};

/// Registers S_i, P_i, Y_i for `sub` in `layout`, named with the given suffix.
LocalVariables add_local_variables(VariableLayout& layout, const Subsystem& sub, const std::string& suffix = "");

struct LocalLmi
{
  LmiConstraint positivity;   ///< P >= margin I
  LmiConstraint dissipation;  ///< [[A'P+PA+Y'+Y-C'S22C, PG-C'S12'], [G'P-S12 C, -S11]] <= 0
};

LocalLmi local_lmi(const Subsystem& sub, const VariableLayout& layout, const LocalVariables& vars,
                   double margin);

/// The dissipation block evaluated at a concrete certificate.
Matrix local_dissipation_matrix(const Subsystem& sub, const LocalCertificate& cert);

struct GlobalVariables
{
  std::vector<VariableId> supply_blocks;  ///< one S_i per subsystem
  std::optional<VariableId> eta;          ///< present in H-infinity mode
};

/// [M; I]^T P^T Q P [M; I] <= -margin I over [y; d] with Q = diag(S_1..S_N, -S).
/// With vars.eta set the supply must be H-infinity and eta is a decision variable.
LmiConstraint global_lmi(const InterconnectionProblem& p, const Matrix& permutation, const SupplyRate& supply,
                         const VariableLayout& layout, const GlobalVariables& vars, double margin);

/// The global expression (without margin) at concrete supply matrices.
Matrix global_lmi_matrix(const InterconnectionProblem& p, const Matrix& permutation, const SupplyRate& supply,
                         const std::vector<Matrix>& supply_blocks);

/// Rows of P [M; I] belonging to subsystem i ([w_i; y_i]); the trailing
/// d and z rows are returned by supply_row_maps.
std::vector<Matrix> local_row_maps(const InterconnectionProblem& p, const Matrix& permutation);
std::pair<Matrix, Matrix> supply_row_maps(const InterconnectionProblem& p, const Matrix& permutation);

}  // namespace dissynth
