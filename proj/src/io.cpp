#include "dissynth/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace dissynth {

using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void dump_to(const std::filesystem::path& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

json matrix_json(const Matrix& m)
{
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) {
      row.push_back(m(r, c));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// rows/cols < 0 means "take it from the data"
Matrix matrix_from(const json& j, const std::string& where, Index rows = -1, Index cols = -1)
{
  if (!j.is_array()) {
    throw IoError(where + ": expected an array of rows");
  }
  const auto r = static_cast<Index>(j.size());
  if (r == 0) {
    if (rows > 0) {
      throw IoError(where + ": expected " + std::to_string(rows) + " rows, got none");
    }
    return Matrix::Zero(0, std::max<Index>(cols, 0));
  }
  if (!j[0].is_array()) {
    throw IoError(where + ": rows must be arrays");
  }
  const auto c = static_cast<Index>(j[0].size());
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != c) {
      throw IoError(where + ": row " + std::to_string(i) + " does not have " + std::to_string(c) + " entries");
    }
    for (Index k = 0; k < c; ++k) {
      const json& v = row[static_cast<std::size_t>(k)];
      if (!v.is_number()) {
        throw IoError(where + "[" + std::to_string(i) + "][" + std::to_string(k) + "] is not a number");
      }
      m(i, k) = v.get<double>();
    }
  }
  if ((rows >= 0 && r != rows) || (cols >= 0 && c != cols)) {
    throw InvalidInput(where + " is " + std::to_string(r) + "x" + std::to_string(c) + ", expected " +
                       (rows >= 0 ? std::to_string(rows) : "?") + "x" + (cols >= 0 ? std::to_string(cols) : "?"));
  }
  return m;
}

const json& member(const json& j, const char* key, const std::string& where)
{
  const auto it = j.find(key);
  if (it == j.end()) {
    throw IoError(where + ": missing key \"" + key + "\"");
  }
  return *it;
}

Index count_from(const json& j, const char* key)
{
  const json& v = member(j, key, "problem");
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw IoError(std::string("problem: \"") + key + "\" must be a non-negative integer");
  }
  return static_cast<Index>(v.get<long long>());
}

bool numeric_row(const json& j)
{
  return j.is_array() && std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_primitive(); });
}

// Like dump(1), but arrays of scalars stay on one line so matrices read row by row.
void pretty(std::ostream& out, const json& j, int depth)
{
  const std::string pad(static_cast<std::size_t>(depth) + 1, ' ');
  const std::string close(static_cast<std::size_t>(depth), ' ');
  if (j.is_object() && !j.empty()) {
    out << "{\n";
    std::size_t k = 0;
    for (const auto& [key, value] : j.items()) {
      out << pad << json(key).dump() << ": ";
      pretty(out, value, depth + 1);
      out << (++k < j.size() ? ",\n" : "\n");
    }
    out << close << '}';
  } else if (j.is_array() && !j.empty() && !numeric_row(j)) {
    out << "[\n";
    for (std::size_t k = 0; k < j.size(); ++k) {
      out << pad;
      pretty(out, j[k], depth + 1);
      out << (k + 1 < j.size() ? ",\n" : "\n");
    }
    out << close << ']';
  } else {
    out << j.dump();
  }
}

std::string render(const json& j)
{
  std::ostringstream ss;
  pretty(ss, j, 0);
  ss << '\n';
  return ss.str();
}

std::string shortest(double v)
{
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::optional<SynthesisMode> parse_mode(std::string_view text)
{
  if (text == "hinf") {
    return SynthesisMode::Hinf;
  }
  if (text == "stabilize") {
    return SynthesisMode::Stabilize;
  }
  return std::nullopt;
}

ProblemFile parse_problem(const std::string& text)
{
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is 1-based and points at the offending character
    const std::size_t at = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t k = 0; k < at; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    // drop the "[json.exception...] parse error at line L, column C: " prefix
    std::string msg = e.what();
    if (const auto pos = msg.find(": "); pos != std::string::npos) {
      msg = msg.substr(pos + 2);
    }
    throw IoError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg, line, col);
  }
  if (!doc.is_object()) {
    throw IoError("problem: top level must be an object");
  }

  ProblemFile out;
  InterconnectionProblem& p = out.problem;
  const json& subs = member(doc, "subsystems", "problem");
  if (!subs.is_array() || subs.empty()) {
    throw IoError("problem: \"subsystems\" must be a non-empty array");
  }
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const std::string where = "subsystems[" + std::to_string(i) + "]";
    const json& s = subs[i];
    if (!s.is_object()) {
      throw IoError(where + ": expected an object");
    }
    Subsystem sub;
    sub.A = matrix_from(member(s, "A", where), where + ".A");
    const Index n = sub.A.rows();
    if (sub.A.cols() != n) {
      throw InvalidInput(where + ".A is not square");
    }
    sub.B = matrix_from(member(s, "B", where), where + ".B", n);
    sub.G = matrix_from(member(s, "G", where), where + ".G", n);
    sub.C = matrix_from(member(s, "C", where), where + ".C", -1, n);
    p.subsystems.push_back(std::move(sub));
  }
  p.n_d = count_from(doc, "n_d");
  p.n_z = count_from(doc, "n_z");
  const Index n_w = p.total_disturbances();
  const Index n_y = p.total_outputs();
  const json& M = member(doc, "M", "problem");
  if (!M.is_object()) {
    throw IoError("problem: \"M\" must be an object");
  }
  p.M_wy = matrix_from(member(M, "wy", "M"), "M.wy", n_w, n_y);
  p.M_wd = matrix_from(member(M, "wd", "M"), "M.wd", n_w, p.n_d);
  p.M_zy = matrix_from(member(M, "zy", "M"), "M.zy", p.n_z, n_y);
  p.M_zd = matrix_from(member(M, "zd", "M"), "M.zd", p.n_z, p.n_d);

  if (const auto it = doc.find("mode"); it != doc.end()) {
    if (!it->is_string() || !(out.mode = parse_mode(it->get<std::string>()))) {
      throw IoError("problem: \"mode\" must be \"stabilize\" or \"hinf\"");
    }
  }
  require_valid(p);
  return out;
}

ProblemFile read_problem(const std::filesystem::path& path)
{
  const std::string text = slurp(path);
  try {
    return parse_problem(text);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what(), e.line, e.column);
  }
}

std::string write_problem(const InterconnectionProblem& p, std::optional<SynthesisMode> mode)
{
  require_valid(p);
  json doc = json::object();
  json subs = json::array();
  for (const auto& s : p.subsystems) {
    subs.push_back({{"A", matrix_json(s.A)}, {"B", matrix_json(s.B)}, {"G", matrix_json(s.G)}, {"C", matrix_json(s.C)}});
  }
  doc["subsystems"] = std::move(subs);
  doc["M"] = {{"wy", matrix_json(p.M_wy)}, {"wd", matrix_json(p.M_wd)}, {"zy", matrix_json(p.M_zy)},
              {"zd", matrix_json(p.M_zd)}};
  doc["n_d"] = p.n_d;
  doc["n_z"] = p.n_z;
  if (mode) {
    doc["mode"] = std::string(to_string(*mode));
  }
  return render(doc);
}

void save_problem(const std::filesystem::path& path, const InterconnectionProblem& p, std::optional<SynthesisMode> mode)
{
  dump_to(path, write_problem(p, mode));
}

void write_trace(std::ostream& out, const ResidualTrace& trace)
{
  out << "k,primal_residual,dual_residual,eta,elapsed_ms\n";
  for (const auto& r : trace) {
    out << r.k << ',' << shortest(r.primal) << ',' << shortest(r.dual) << ',' << (r.eta ? shortest(*r.eta) : "")
        << ',' << shortest(r.elapsed_ms) << '\n';
  }
}

void save_trace(const std::filesystem::path& path, const ResidualTrace& trace)
{
  std::ostringstream ss;
  write_trace(ss, trace);
  dump_to(path, ss.str());
}

ResidualTrace parse_trace(std::istream& in)
{
  std::string line;
  if (!std::getline(in, line) || line != "k,primal_residual,dual_residual,eta,elapsed_ms") {
    throw IoError("trace: unexpected header");
  }
  ResidualTrace out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) {
      continue;
    }
    std::array<std::string, 5> f;
    std::size_t start = 0;
    for (std::size_t c = 0; c < f.size(); ++c) {
      const auto end = line.find(',', start);
      if ((end == std::string::npos) != (c + 1 == f.size())) {
        throw IoError("trace: line " + std::to_string(lineno) + " does not have 5 fields", lineno);
      }
      f[c] = line.substr(start, end == std::string::npos ? std::string::npos : end - start);
      start = end + 1;
    }
    try {
      ResidualRecord r;
      r.k = std::stoi(f[0]);
      r.primal = std::stod(f[1]);
      r.dual = std::stod(f[2]);
      if (!f[3].empty()) {
        r.eta = std::stod(f[3]);
      }
      r.elapsed_ms = std::stod(f[4]);
      out.push_back(r);
    } catch (const std::logic_error&) {
      throw IoError("trace: line " + std::to_string(lineno) + " has a non-numeric field", lineno);
    }
  }
  return out;
}

std::string result_to_json(const SynthesisResult& r)
{
  json doc = json::object();
  doc["status"] = std::string(to_string(r.status));
  doc["mode"] = std::string(to_string(r.mode));
  doc["iterations"] = r.iterations;
  doc["eta"] = r.eta ? json(*r.eta) : json(nullptr);
  doc["bound"] = r.bound ? json(*r.bound) : json(nullptr);
  json gains = json::array();
  for (const auto& K : r.gains) {
    gains.push_back(matrix_json(K));
  }
  doc["gains"] = std::move(gains);
  json certs = json::array();
  for (const auto& c : r.certificates) {
    certs.push_back({{"S", matrix_json(c.S)}, {"P", matrix_json(c.P)}, {"Y", matrix_json(c.Y)}});
  }
  doc["certificates"] = std::move(certs);
  if (r.report) {
    const VerificationReport& v = *r.report;
    doc["verification"] = {
      {"passed", v.passed()},
      {"failures", v.failures()},
      {"recovery_residual", v.recovery_residual},
      {"local_lmi_max_eigenvalue", v.local_lmi},
      {"P_min_eigenvalue", v.positivity},
      {"global_lmi_max_eigenvalue", v.global_lmi},
      {"spectral_abscissa", v.abscissa},
      {"detectable", v.detectable},
      {"hinf_norm", v.hinf ? json(*v.hinf) : json(nullptr)},
      {"hinf_bound", v.hinf_bound ? json(*v.hinf_bound) : json(nullptr)},
    };
  } else {
    doc["verification"] = nullptr;
  }
  doc["detectability_warning"] = r.detectability_warning;
  doc["message"] = r.message;
  return render(doc);
}

void save_result(const std::filesystem::path& path, const SynthesisResult& result)
{
  dump_to(path, result_to_json(result));
}

}  // namespace dissynth
