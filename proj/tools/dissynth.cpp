#include "dissynth/io.hpp"
#include "dissynth/problems.hpp"
#include "dissynth/synthesis.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace dissynth;

namespace {

enum Exit : int { Ok = 0, Usage = 1, VerifyFailed = 2, NotConverged = 3, Infeasible = 4 };

int exit_code(SynthesisStatus s)
{
  switch (s) {
    case SynthesisStatus::Verified: return Ok;
    case SynthesisStatus::VerificationFailed: return VerifyFailed;
    case SynthesisStatus::NotConverged: return NotConverged;
    case SynthesisStatus::Infeasible: return Infeasible;
    case SynthesisStatus::SolverFailure: return NotConverged;
  }
  return NotConverged;
}

struct SolveArgs
{
  std::string input;
  std::string mode;
  bool accel = false;
  bool restart = false;
  double rho = AdmmConfig{}.rho;
  double mu = AdmmConfig{}.mu;
  int max_iter = AdmmConfig{}.max_iter;
  double tol = AdmmConfig{}.tol_primal;
  double margin = AdmmConfig{}.margin;
  std::string smoothing = "squared";
  unsigned threads = 0;
  std::string trace;
  std::string out;
};

SynthesisMode pick_mode(const std::string& flag, const ProblemFile& file)
{
  if (!flag.empty()) {
    return *parse_mode(flag);
  }
  if (file.mode) {
    return *file.mode;
  }
  return file.problem.n_d > 0 && file.problem.n_z > 0 ? SynthesisMode::Hinf : SynthesisMode::Stabilize;
}

AdmmConfig make_config(const SolveArgs& a, SynthesisMode mode)
{
  AdmmConfig cfg;
  cfg.mode = mode;
  cfg.accelerated = a.accel;
  cfg.restart = a.restart;
  cfg.rho = a.rho;
  cfg.mu = a.mu;
  cfg.max_iter = a.max_iter;
  cfg.tol_primal = cfg.tol_dual = a.tol;
  cfg.margin = a.margin;
  cfg.smoothing = a.smoothing == "frobenius" ? Smoothing::Frobenius : Smoothing::SquaredFrobenius;
  cfg.threads = a.threads;
  cfg.validate();
  return cfg;
}

void print_summary(const SynthesisResult& r)
{
  std::cout << "status: " << to_string(r.status) << " after " << r.iterations << " iterations\n";
  if (r.eta) {
    std::cout << "eta: " << *r.eta << "  bound sqrt(eta): " << *r.bound << "\n";
  }
  if (r.report) {
    std::cout << "closed-loop spectral abscissa: " << r.report->abscissa << "\n";
    if (r.report->hinf) {
      std::cout << "closed-loop H-infinity norm: " << *r.report->hinf << "\n";
    }
    if (!r.report->passed()) {
      std::cout << "failed checks: " << r.report->failures() << "\n";
    }
  }
  if (r.detectability_warning) {
    std::cout << "warning: zero-state detectability rank condition does not hold\n";
  }
  if (!r.message.empty()) {
    std::cout << r.message << "\n";
  }
}

int cmd_solve(const SolveArgs& a)
{
  const ProblemFile file = read_problem(a.input);
  const SynthesisMode mode = pick_mode(a.mode, file);
  const AdmmConfig cfg = make_config(a, mode);
  const SynthesisResult r =
    mode == SynthesisMode::Hinf ? synthesize_hinf(file.problem, cfg) : synthesize_stabilizing(file.problem, cfg);
  print_summary(r);
  if (!a.trace.empty()) {
    save_trace(a.trace, r.trace);
  }
  if (!a.out.empty()) {
    save_result(a.out, r);
  }
  return exit_code(r.status);
}

std::optional<int> iterations_to(const ResidualTrace& trace, double tol)
{
  for (const auto& rec : trace) {
    if (rec.primal <= tol && rec.dual <= tol) {
      return rec.k;
    }
  }
  return std::nullopt;
}

int cmd_compare(SolveArgs a, const std::string& dir)
{
  const ProblemFile file = read_problem(a.input);
  const SynthesisMode mode = pick_mode(a.mode, file);
  fs::create_directories(dir);

  bool reached = false;
  for (const bool accel : {false, true}) {
    a.accel = accel;
    const AdmmConfig cfg = make_config(a, mode);
    const AdmmResult r = run_admm(file.problem, cfg);
    if (r.status == AdmmStatus::Infeasible) {
      std::cerr << "error: " << r.message << "\n";
      return Infeasible;
    }
    if (r.status == AdmmStatus::SolverFailure) {
      std::cerr << "error: " << r.message << "\n";
      return NotConverged;
    }
    const std::string name = accel ? "accelerated" : "standard";
    save_trace(fs::path(dir) / (name + ".csv"), r.trace);
    const auto k = iterations_to(r.trace, a.tol);
    std::cout << name << ": ";
    if (k) {
      std::cout << "residuals <= " << a.tol << " at iteration " << *k << "\n";
      reached = true;
    } else {
      std::cout << "tolerance " << a.tol << " not reached in " << r.iterations << " iterations (final primal "
                << r.trace.back().primal << ")\n";
    }
  }
  return reached ? Ok : NotConverged;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Distributed dissipativity-based controller synthesis"};
  app.require_subcommand(1);

  const std::map<std::string, std::string> modes{{"stabilize", "stabilize"}, {"hinf", "hinf"}};
  const std::map<std::string, std::string> smoothings{{"squared", "squared"}, {"frobenius", "frobenius"}};

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Synthesize gains for a problem file");
  s->add_option("--input", solve.input, "Problem file (JSON)")->required()->check(CLI::ExistingFile);
  s->add_option("--mode", solve.mode, "stabilize or hinf (default: file's mode, else inferred)")
    ->transform(CLI::CheckedTransformer(modes));
  s->add_flag("--accel", solve.accel, "Accelerated ADMM");
  s->add_flag("--restart", solve.restart, "Restart the momentum when the combined residual grows");
  s->add_option("--rho", solve.rho, "Penalty parameter")->capture_default_str();
  s->add_option("--mu", solve.mu, "Smoothing weight")->capture_default_str();
  s->add_option("--max-iter", solve.max_iter, "Iteration limit")->capture_default_str();
  s->add_option("--tol", solve.tol, "Primal and dual residual tolerance")->capture_default_str();
  s->add_option("--margin", solve.margin, "Strictness margin of the LMIs")->capture_default_str();
  s->add_option("--smoothing", solve.smoothing, "squared or frobenius")
    ->transform(CLI::CheckedTransformer(smoothings))
    ->capture_default_str();
  s->add_option("--threads", solve.threads, "Local-step workers (0 = all cores)");
  s->add_option("--trace", solve.trace, "Write the residual trace (CSV)");
  s->add_option("--out", solve.out, "Write gains, certificates and verification (JSON)");

  Example2Options gen;
  std::string gen_out;
  auto* g = app.add_subcommand("gen-example2", "Write a random network problem file");
  g->add_option("--n", gen.subsystems, "Number of subsystems")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--states", gen.states, "States per subsystem")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--inputs", gen.inputs, "Inputs per subsystem")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--outputs", gen.outputs, "Outputs per subsystem")->capture_default_str()->check(CLI::PositiveNumber);
  g->add_option("--density", gen.density, "Fraction of nonzero interconnection entries")
    ->capture_default_str()
    ->check(CLI::Range(0.0, 1.0));
  g->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  g->add_option("-o,--out", gen_out, "Output file")->required();

  std::string ex1_out;
  auto* e = app.add_subcommand("example1", "Write the three-subsystem example problem file");
  e->add_option("-o,--out", ex1_out, "Output file")->required();

  SolveArgs cmp;
  cmp.max_iter = 50;
  std::string cmp_dir;
  auto* c = app.add_subcommand("compare", "Run standard and accelerated ADMM and write both traces");
  c->add_option("--input", cmp.input, "Problem file (JSON)")->required()->check(CLI::ExistingFile);
  c->add_option("--mode", cmp.mode, "stabilize or hinf")->transform(CLI::CheckedTransformer(modes));
  c->add_option("--max-iter", cmp.max_iter, "Iteration limit")->capture_default_str();
  c->add_option("--tol", cmp.tol, "Residual tolerance")->capture_default_str();
  c->add_option("--rho", cmp.rho, "Penalty parameter")->capture_default_str();
  c->add_option("--mu", cmp.mu, "Smoothing weight")->capture_default_str();
  c->add_option("--margin", cmp.margin, "Strictness margin of the LMIs")->capture_default_str();
  c->add_flag("--restart", cmp.restart, "Momentum restart for the accelerated run");
  c->add_option("-o,--out", cmp_dir, "Directory for standard.csv and accelerated.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? Ok : Usage;
  }

  try {
    if (*s) {
      return cmd_solve(solve);
    }
    if (*g) {
      save_problem(gen_out, generate_example2(gen), SynthesisMode::Hinf);
      return Ok;
    }
    if (*e) {
      save_problem(ex1_out, example1(), SynthesisMode::Hinf);
      return Ok;
    }
    if (*c) {
      return cmd_compare(cmp, cmp_dir);
    }
  } catch (const GenerationBudgetExceeded& err) {
    std::cerr << "error: " << err.what() << "\n";
    return NotConverged;
  } catch (const IoError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return Usage;
  } catch (const InvalidInput& err) {
    std::cerr << "error: " << err.what() << "\n";
    return Usage;
  } catch (const NumericalError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return NotConverged;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return Usage;
  }
  return Usage;
}
