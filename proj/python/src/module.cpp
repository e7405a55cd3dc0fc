#include "dissynth/io.hpp"
#include "dissynth/problems.hpp"
#include "dissynth/synthesis.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace dissynth;

namespace {

SynthesisMode mode_from(const std::string& s)
{
  const auto m = parse_mode(s);
  if (!m) {
    throw InvalidInput("mode must be 'stabilize' or 'hinf', got '" + s + "'");
  }
  return *m;
}

Smoothing smoothing_from(const std::string& s)
{
  if (s == "squared") return Smoothing::SquaredFrobenius;
  if (s == "frobenius") return Smoothing::Frobenius;
  throw InvalidInput("smoothing must be 'squared' or 'frobenius', got '" + s + "'");
}

// rows of (k, primal, dual, eta or nan, elapsed_ms)
Matrix trace_array(const ResidualTrace& trace)
{
  Matrix out(static_cast<Index>(trace.size()), 5);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& r = trace[i];
    out.row(static_cast<Index>(i)) << r.k, r.primal, r.dual, r.eta.value_or(std::nan("")), r.elapsed_ms;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Distributed dissipativity-based controller synthesis";

  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<GenerationBudgetExceeded>(m, "GenerationBudgetExceeded", PyExc_RuntimeError);
  // InvalidInput derives from std::invalid_argument and surfaces as ValueError

  py::class_<Subsystem>(m, "Subsystem")
    .def(py::init([](Matrix A, Matrix B, Matrix G, Matrix C) { return Subsystem{A, B, G, C}; }), py::arg("A"),
         py::arg("B"), py::arg("G"), py::arg("C"))
    .def_readwrite("A", &Subsystem::A)
    .def_readwrite("B", &Subsystem::B)
    .def_readwrite("G", &Subsystem::G)
    .def_readwrite("C", &Subsystem::C)
    .def_property_readonly("states", &Subsystem::states)
    .def_property_readonly("inputs", &Subsystem::inputs)
    .def_property_readonly("disturbances", &Subsystem::disturbances)
    .def_property_readonly("outputs", &Subsystem::outputs);

  py::class_<InterconnectionProblem>(m, "Problem")
    .def(py::init([](std::vector<Subsystem> subs, Matrix M_wy, std::optional<Matrix> M_wd, std::optional<Matrix> M_zy,
                     std::optional<Matrix> M_zd) {
           InterconnectionProblem p;
           p.subsystems = std::move(subs);
           p.M_wy = std::move(M_wy);
           const Index n_w = p.total_disturbances();
           const Index n_y = p.total_outputs();
           p.M_wd = M_wd ? *M_wd : Matrix::Zero(n_w, 0);
           p.M_zy = M_zy ? *M_zy : Matrix::Zero(0, n_y);
           p.n_d = p.M_wd.cols();
           p.n_z = p.M_zy.rows();
           p.M_zd = M_zd ? *M_zd : Matrix::Zero(p.n_z, p.n_d);
           require_valid(p);
           return p;
         }),
         py::arg("subsystems"), py::arg("M_wy"), py::arg("M_wd") = py::none(), py::arg("M_zy") = py::none(),
         py::arg("M_zd") = py::none())
    .def_readonly("subsystems", &InterconnectionProblem::subsystems)
    .def_readonly("M_wy", &InterconnectionProblem::M_wy)
    .def_readonly("M_wd", &InterconnectionProblem::M_wd)
    .def_readonly("M_zy", &InterconnectionProblem::M_zy)
    .def_readonly("M_zd", &InterconnectionProblem::M_zd)
    .def_readonly("n_d", &InterconnectionProblem::n_d)
    .def_readonly("n_z", &InterconnectionProblem::n_z)
    .def("open_loop", [](const InterconnectionProblem& p) {
      const StateSpace ss = assemble_open_loop(p);
      return py::make_tuple(ss.A, ss.B, ss.C, ss.D);
    })
    .def("closed_loop", [](const InterconnectionProblem& p, const std::vector<Matrix>& gains) {
      const StateSpace ss = assemble_closed_loop(p, gains);
      return py::make_tuple(ss.A, ss.B, ss.C, ss.D);
    })
    .def("to_json", [](const InterconnectionProblem& p) { return write_problem(p); })
    .def_static("from_json", [](const std::string& text) { return parse_problem(text).problem; })
    .def_static("load", [](const std::filesystem::path& path) { return read_problem(path).problem; })
    .def("save", [](const InterconnectionProblem& p, const std::filesystem::path& path) { save_problem(path, p); });

  m.def("example1", &example1, "The three-subsystem network with one disturbance and one performance channel");
  m.def(
    "generate_example2",
    [](int n, Index states, Index inputs, Index outputs, double density, Index n_d, Index n_z, std::uint64_t seed) {
      Example2Options opt;
      opt.subsystems = n;
      opt.states = states;
      opt.inputs = inputs;
      opt.outputs = outputs;
      opt.density = density;
      opt.n_d = n_d;
      opt.n_z = n_z;
      opt.seed = seed;
      return generate_example2(opt);
    },
    py::arg("n") = 20, py::arg("states") = 5, py::arg("inputs") = 2, py::arg("outputs") = 2,
    py::arg("density") = 0.05, py::arg("n_d") = 2, py::arg("n_z") = 2, py::arg("seed") = 1);

  py::class_<VerificationReport>(m, "VerificationReport")
    .def_readonly("recovery_residual", &VerificationReport::recovery_residual)
    .def_readonly("local_lmi", &VerificationReport::local_lmi)
    .def_readonly("positivity", &VerificationReport::positivity)
    .def_readonly("global_lmi", &VerificationReport::global_lmi)
    .def_readonly("abscissa", &VerificationReport::abscissa)
    .def_readonly("detectable", &VerificationReport::detectable)
    .def_readonly("hinf", &VerificationReport::hinf)
    .def_readonly("hinf_bound", &VerificationReport::hinf_bound)
    .def_property_readonly("passed", &VerificationReport::passed)
    .def_property_readonly("failures", &VerificationReport::failures);

  py::class_<LocalCertificate>(m, "Certificate")
    .def_readonly("S", &LocalCertificate::S)
    .def_readonly("P", &LocalCertificate::P)
    .def_readonly("Y", &LocalCertificate::Y);

  py::class_<SynthesisResult>(m, "SynthesisResult")
    .def_property_readonly("status", [](const SynthesisResult& r) { return std::string(to_string(r.status)); })
    .def_property_readonly("mode", [](const SynthesisResult& r) { return std::string(to_string(r.mode)); })
    .def_readonly("gains", &SynthesisResult::gains)
    .def_readonly("eta", &SynthesisResult::eta)
    .def_readonly("bound", &SynthesisResult::bound)
    .def_readonly("certificates", &SynthesisResult::certificates)
    .def_readonly("iterations", &SynthesisResult::iterations)
    .def_readonly("report", &SynthesisResult::report)
    .def_readonly("detectability_warning", &SynthesisResult::detectability_warning)
    .def_readonly("message", &SynthesisResult::message)
    .def_property_readonly("trace", [](const SynthesisResult& r) { return trace_array(r.trace); },
                           "columns: k, primal residual, dual residual, eta (nan in stabilize mode), elapsed ms")
    .def("to_json", [](const SynthesisResult& r) { return result_to_json(r); });

  m.def(
    "synthesize",
    [](const InterconnectionProblem& p, const std::string& mode, bool accel, bool restart, double rho, double mu,
       int max_iter, double tol, double margin, const std::string& smoothing, unsigned threads) {
      AdmmConfig cfg;
      cfg.mode = mode_from(mode);
      cfg.accelerated = accel;
      cfg.restart = restart;
      cfg.rho = rho;
      cfg.mu = mu;
      cfg.max_iter = max_iter;
      cfg.tol_primal = cfg.tol_dual = tol;
      cfg.margin = margin;
      cfg.smoothing = smoothing_from(smoothing);
      cfg.threads = threads;
      py::gil_scoped_release release;
      return cfg.mode == SynthesisMode::Hinf ? synthesize_hinf(p, cfg) : synthesize_stabilizing(p, cfg);
    },
    py::arg("problem"), py::arg("mode") = "stabilize", py::arg("accel") = false, py::arg("restart") = false,
    py::arg("rho") = 1e-3, py::arg("mu") = 1e-3, py::arg("max_iter") = 200, py::arg("tol") = 1e-6,
    py::arg("margin") = 1e-6, py::arg("smoothing") = "squared", py::arg("threads") = 0u,
    "Distributed synthesis by consensus ADMM followed by gain recovery and verification");

  m.def(
    "centralized",
    [](const InterconnectionProblem& p, const std::string& mode, double margin) {
      py::gil_scoped_release release;
      return centralized_synthesis(p, mode_from(mode), margin);
    },
    py::arg("problem"), py::arg("mode") = "stabilize", py::arg("margin") = 1e-6,
    "All LMIs in a single SDP; reference solution for small networks");

  m.def(
    "verify",
    [](const InterconnectionProblem& p, const std::vector<Matrix>& gains,
       const std::vector<LocalCertificate>& certificates, std::optional<double> eta, double margin) {
      const SupplyRate supply = eta ? hinf_supply(*eta, p.n_d, p.n_z) : zero_supply(p.n_d, p.n_z);
      return verify_certificates(p, gains, certificates, supply, margin);
    },
    py::arg("problem"), py::arg("gains"), py::arg("certificates"), py::arg("eta") = py::none(),
    py::arg("margin") = 1e-6);

  m.def("recover_gains", [](const std::vector<Matrix>& P, const std::vector<Matrix>& Y, const std::vector<Matrix>& B) {
    return recover_gains(P, Y, B);
  });
  m.def("spectral_abscissa", &spectral_abscissa, py::arg("A"));
  m.def(
    "hinf_norm",
    [](Matrix A, Matrix B, Matrix C, Matrix D) { return hinf_norm({A, B, C, D}); },
    py::arg("A"), py::arg("B"), py::arg("C"), py::arg("D"));
  m.def(
    "simulate",
    [](Matrix A, Matrix B, Matrix C, Matrix D, const Vector& x0, double T, double h,
       std::optional<std::function<Vector(double)>> d) {
      const StateSpace ss{A, B, C, D};
      const Trajectory tr = simulate(ss, d ? InputSignal(*d) : zero_input(B.cols()), x0, T, h);
      return py::make_tuple(tr.t, tr.x, tr.z);
    },
    py::arg("A"), py::arg("B"), py::arg("C"), py::arg("D"), py::arg("x0"), py::arg("T"), py::arg("h"),
    py::arg("d") = py::none(), "RK4 simulation; returns (t, x, z) with one column per sample");
  m.def("svec", &svec, py::arg("X"));
  m.def("smat", &smat, py::arg("v"));
}
