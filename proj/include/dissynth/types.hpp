#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace dissynth {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raised when caller-supplied data violates a documented precondition.
class InvalidInput : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical kernel cannot produce a meaningful result
/// (singular matrix, unstable system passed to a norm routine, overflow).
class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Block-diagonal concatenation; empty blocks contribute zero rows or columns.
template<typename Range>
Matrix block_diagonal(const Range& blocks)
{
  Index rows = 0;
  Index cols = 0;
  for (const Matrix& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Index r = 0;
  Index c = 0;
  for (const Matrix& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace dissynth
