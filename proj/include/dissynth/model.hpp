#pragma once

#include "dissynth/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace dissynth {

/// One block of the network:  x' = A x + B u + G w,  y = C x.
struct Subsystem
{
  Matrix A;  ///< n x n
  Matrix B;  ///< n x m
  Matrix G;  ///< n x n_w
  Matrix C;  ///< n_y x n

  Index states() const { return A.rows(); }
  Index inputs() const { return B.cols(); }
  Index disturbances() const { return G.cols(); }
  Index outputs() const { return C.rows(); }
};

/// Channel dimensions of one subsystem, used where only the shape matters.
struct SubsystemDims
{
  Index states = 0;
  Index inputs = 0;
  Index disturbances = 0;
  Index outputs = 0;
};

/// Subsystems plus the static interconnection [w; z] = M [y; d].
struct InterconnectionProblem
{
  std::vector<Subsystem> subsystems;
  Matrix M_wy;  ///< n_w x n_y
  Matrix M_wd;  ///< n_w x n_d
  Matrix M_zy;  ///< n_z x n_y
  Matrix M_zd;  ///< n_z x n_d
  Index n_d = 0;
  Index n_z = 0;

  Index total_states() const;
  Index total_disturbances() const;  ///< n_w
  Index total_outputs() const;       ///< n_y
  std::vector<SubsystemDims> dims() const;

  /// The full interconnection matrix [[M_wy, M_wd], [M_zy, M_zd]].
  Matrix interconnection() const;
};

/// Global LTI realization  x' = A x + B d,  z = C x + D d.
struct StateSpace
{
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix D;
};

struct ValidationIssue
{
  enum class Kind { DimensionMismatch, NonFinite };
  Kind kind;
  std::string where;  ///< e.g. "subsystem[0].C" or "M_wd"
  std::string message;
};

/// Report-style validation: an empty vector means the problem is usable.
/// Well-posedness needs no check: subsystems have no feedthrough, so
/// w = M_wy y + M_wd d is always uniquely determined.
std::vector<ValidationIssue> validate_problem(const InterconnectionProblem& p);

/// Throws InvalidInput listing every issue if validate_problem is non-empty.
void require_valid(const InterconnectionProblem& p);

/// 0/1 matrix mapping the stacked [w; z; y; d] to [w_1; y_1; ...; w_N; y_N; d; z].
Matrix build_permutation(std::span<const SubsystemDims> dims, Index n_d, Index n_z);

Matrix stacked_A(const InterconnectionProblem& p);
Matrix stacked_B(const InterconnectionProblem& p);
Matrix stacked_G(const InterconnectionProblem& p);
Matrix stacked_C(const InterconnectionProblem& p);

/// A = diag(A_i) + diag(G_i) M_wy diag(C_i),  B = diag(G_i) M_wd,
/// C = M_zy diag(C_i),  D = M_zd.
StateSpace assemble_open_loop(const InterconnectionProblem& p);

/// Open loop with A replaced by A + diag(B_i) diag(K_i).
StateSpace assemble_closed_loop(const InterconnectionProblem& p, std::span<const Matrix> gains);

}  // namespace dissynth
