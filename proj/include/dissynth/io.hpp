#pragma once

#include "dissynth/synthesis.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

namespace dissynth {

/// File could not be read, written or parsed.  For JSON syntax errors
/// `line` and `column` point into the document (1-based).
class IoError : public std::runtime_error
{
public:
  explicit IoError(const std::string& what, std::optional<std::size_t> line = std::nullopt,
                   std::optional<std::size_t> column = std::nullopt)
    : std::runtime_error(what), line(line), column(column)
  {}
  std::optional<std::size_t> line;
  std::optional<std::size_t> column;
};

struct ProblemFile
{
  InterconnectionProblem problem;
  std::optional<SynthesisMode> mode;
};

std::optional<SynthesisMode> parse_mode(std::string_view text);

/// Parses the JSON problem document.  Empty matrices take their shape from
/// the surrounding dimensions.  Throws IoError on syntax errors and on
/// missing keys, InvalidInput when the shapes do not fit together.
ProblemFile parse_problem(const std::string& text);
ProblemFile read_problem(const std::filesystem::path& path);

/// Shortest round-trip decimal for every entry, so read(write(p)) == p bit for bit.
std::string write_problem(const InterconnectionProblem& p, std::optional<SynthesisMode> mode = std::nullopt);
void save_problem(const std::filesystem::path& path, const InterconnectionProblem& p,
                  std::optional<SynthesisMode> mode = std::nullopt);

/// Header k,primal_residual,dual_residual,eta,elapsed_ms; eta is empty in stabilize mode.
void write_trace(std::ostream& out, const ResidualTrace& trace);
void save_trace(const std::filesystem::path& path, const ResidualTrace& trace);
ResidualTrace parse_trace(std::istream& in);

std::string result_to_json(const SynthesisResult& result);
void save_result(const std::filesystem::path& path, const SynthesisResult& result);

}  // namespace dissynth
