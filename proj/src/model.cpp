#include "dissynth/model.hpp"

#include <numeric>
#include <sstream>

namespace dissynth {

namespace {

std::string shape(const Matrix& m)
{
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void check_shape(std::vector<ValidationIssue>& out, const std::string& where, const Matrix& m, Index rows,
                 Index cols)
{
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << where << " is " << shape(m) << ", expected " << rows << "x" << cols;
    out.push_back({ValidationIssue::Kind::DimensionMismatch, where, os.str()});
  }
}

void check_finite(std::vector<ValidationIssue>& out, const std::string& where, const Matrix& m)
{
  if (!m.allFinite()) {
    out.push_back({ValidationIssue::Kind::NonFinite, where, where + " contains a non-finite entry"});
  }
}

}  // namespace

Index InterconnectionProblem::total_states() const
{
  return std::accumulate(subsystems.begin(), subsystems.end(), Index{0},
                         [](Index acc, const Subsystem& s) { return acc + s.states(); });
}

Index InterconnectionProblem::total_disturbances() const
{
  return std::accumulate(subsystems.begin(), subsystems.end(), Index{0},
                         [](Index acc, const Subsystem& s) { return acc + s.disturbances(); });
}

Index InterconnectionProblem::total_outputs() const
{
  return std::accumulate(subsystems.begin(), subsystems.end(), Index{0},
                         [](Index acc, const Subsystem& s) { return acc + s.outputs(); });
}

std::vector<SubsystemDims> InterconnectionProblem::dims() const
{
  std::vector<SubsystemDims> out;
  out.reserve(subsystems.size());
  for (const auto& s : subsystems) {
    out.push_back({s.states(), s.inputs(), s.disturbances(), s.outputs()});
  }
  return out;
}

Matrix InterconnectionProblem::interconnection() const
{
  const Index n_w = M_wy.rows();
  const Index n_y = M_wy.cols();
  Matrix M(n_w + n_z, n_y + n_d);
  M << M_wy, M_wd, M_zy, M_zd;
  return M;
}

std::vector<ValidationIssue> validate_problem(const InterconnectionProblem& p)
{
  std::vector<ValidationIssue> out;
  if (p.subsystems.empty()) {
    out.push_back({ValidationIssue::Kind::DimensionMismatch, "subsystems", "problem has no subsystems"});
  }
  for (std::size_t i = 0; i < p.subsystems.size(); ++i) {
    const Subsystem& s = p.subsystems[i];
    const std::string tag = "subsystem[" + std::to_string(i) + "]";
    const Index n = s.A.rows();
    if (n < 1) {
      out.push_back({ValidationIssue::Kind::DimensionMismatch, tag + ".A", tag + ".A must have at least one state"});
    }
    check_shape(out, tag + ".A", s.A, n, n);
    check_shape(out, tag + ".B", s.B, n, s.B.cols());
    check_shape(out, tag + ".G", s.G, n, s.G.cols());
    check_shape(out, tag + ".C", s.C, s.C.rows(), n);
    check_finite(out, tag + ".A", s.A);
    check_finite(out, tag + ".B", s.B);
    check_finite(out, tag + ".G", s.G);
    check_finite(out, tag + ".C", s.C);
  }
  if (p.n_d < 0 || p.n_z < 0) {
    out.push_back({ValidationIssue::Kind::DimensionMismatch, "n_d/n_z", "channel counts must be non-negative"});
    return out;
  }
  const Index n_w = p.total_disturbances();
  const Index n_y = p.total_outputs();
  check_shape(out, "M_wy", p.M_wy, n_w, n_y);
  check_shape(out, "M_wd", p.M_wd, n_w, p.n_d);
  check_shape(out, "M_zy", p.M_zy, p.n_z, n_y);
  check_shape(out, "M_zd", p.M_zd, p.n_z, p.n_d);
  check_finite(out, "M_wy", p.M_wy);
  check_finite(out, "M_wd", p.M_wd);
  check_finite(out, "M_zy", p.M_zy);
  check_finite(out, "M_zd", p.M_zd);
  return out;
}

void require_valid(const InterconnectionProblem& p)
{
  const auto issues = validate_problem(p);
  if (issues.empty()) {
    return;
  }
  std::string msg = "invalid problem:";
  for (const auto& issue : issues) {
    msg += "\n  " + issue.message;
  }
  throw InvalidInput(msg);
}

Matrix build_permutation(std::span<const SubsystemDims> dims, Index n_d, Index n_z)
{
  Index n_w = 0;
  Index n_y = 0;
  for (const auto& d : dims) {
    n_w += d.disturbances;
    n_y += d.outputs;
  }
  const Index size = n_w + n_z + n_y + n_d;
  // input positions in [w; z; y; d]
  const Index w0 = 0;
  const Index z0 = n_w;
  const Index y0 = n_w + n_z;
  const Index d0 = n_w + n_z + n_y;

  Matrix P = Matrix::Zero(size, size);
  Index row = 0;
  Index w_off = 0;
  Index y_off = 0;
  for (const auto& d : dims) {
    for (Index k = 0; k < d.disturbances; ++k) {
      P(row++, w0 + w_off + k) = 1.0;
    }
    for (Index k = 0; k < d.outputs; ++k) {
      P(row++, y0 + y_off + k) = 1.0;
    }
    w_off += d.disturbances;
    y_off += d.outputs;
  }
  for (Index k = 0; k < n_d; ++k) {
    P(row++, d0 + k) = 1.0;
  }
  for (Index k = 0; k < n_z; ++k) {
    P(row++, z0 + k) = 1.0;
  }
  return P;
}

Matrix stacked_A(const InterconnectionProblem& p)
{
  std::vector<Matrix> blocks;
  for (const auto& s : p.subsystems) blocks.push_back(s.A);
  return block_diagonal(blocks);
}

Matrix stacked_B(const InterconnectionProblem& p)
{
  std::vector<Matrix> blocks;
  for (const auto& s : p.subsystems) blocks.push_back(s.B);
  return block_diagonal(blocks);
}

Matrix stacked_G(const InterconnectionProblem& p)
{
  std::vector<Matrix> blocks;
  for (const auto& s : p.subsystems) blocks.push_back(s.G);
  return block_diagonal(blocks);
}

Matrix stacked_C(const InterconnectionProblem& p)
{
  std::vector<Matrix> blocks;
  for (const auto& s : p.subsystems) blocks.push_back(s.C);
  return block_diagonal(blocks);
}

StateSpace assemble_open_loop(const InterconnectionProblem& p)
{
  require_valid(p);
  const Matrix G = stacked_G(p);
  const Matrix C = stacked_C(p);
  StateSpace ss;
  ss.A = stacked_A(p) + G * p.M_wy * C;
  // d enters through the same channel as w, hence the G factor
  ss.B = G * p.M_wd;
  ss.C = p.M_zy * C;
  ss.D = p.M_zd;
  return ss;
}

StateSpace assemble_closed_loop(const InterconnectionProblem& p, std::span<const Matrix> gains)
{
  StateSpace ss = assemble_open_loop(p);
  if (gains.size() != p.subsystems.size()) {
    throw InvalidInput("expected " + std::to_string(p.subsystems.size()) + " gains, got " +
                       std::to_string(gains.size()));
  }
  Index off = 0;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const Subsystem& s = p.subsystems[i];
    if (gains[i].rows() != s.inputs() || gains[i].cols() != s.states()) {
      throw InvalidInput("gain for subsystem " + std::to_string(i) + " is " + shape(gains[i]) + ", expected " +
                         std::to_string(s.inputs()) + "x" + std::to_string(s.states()));
    }
    ss.A.block(off, off, s.states(), s.states()) += s.B * gains[i];
    off += s.states();
  }
  return ss;
}

}  // namespace dissynth
