#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dbf/experiments.hpp"

namespace py = pybind11;
using namespace dbf;

namespace {

RetractionKind retraction_from_name(const std::string& name, int order) {
  if (name == "cayley-exact") return CayleyExact{};
  if (name == "cayley-neumann") return CayleyNeumann{order};
  if (name == "qr") return QrRetraction{};
  if (name == "polar") return PolarRetraction{};
  throw std::invalid_argument("unknown retraction: " + name);
}

py::dict log_to_dict(const TrajectoryLog& log) {
  py::dict out;
  out["converged"] = log.converged;
  out["iterations"] = log.iterations;
  out["mvp_total"] = log.mvp_total;
  out["final_iterate"] = log.final_iterate;
  py::list f, delta, omega, displacement;
  for (const auto& rec : log.records) {
    f.append(rec.f);
    delta.append(rec.delta);
    omega.append(rec.omega_norm);
    displacement.append(rec.displacement);
  }
  out["f"] = std::move(f);
  out["delta"] = std::move(delta);
  out["omega_norm"] = std::move(omega);
  out["displacement"] = std::move(displacement);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "core operations of the isotropic-noise-invariant eigendecomposition flow";

  m.def(
      "trace_free", [](const Matrix& S) { return trace_free(SymmetricMatrix(S)).data(); },
      py::arg("S"), "S - (tr S / n) I");
  m.def(
      "rotated_covariance",
      [](const Matrix& M, const Matrix& C) {
        return rotate_covariance(Rotation(M, 1e-6), SymmetricMatrix(C)).data();
      },
      py::arg("M"), py::arg("C"), "M^T C M, symmetrized");
  m.def(
      "off_diagonal_energy",
      [](const Matrix& A) { return off_diagonal_energy(SymmetricMatrix(A)); }, py::arg("A"));
  m.def(
      "commutator_generator",
      [](const Matrix& A) { return commutator_generator(SymmetricMatrix(A)).data(); }, py::arg("A"),
      "[A, diag A] evaluated entrywise as (A_jj - A_ii) A_ij");
  m.def(
      "spectral_separation",
      [](const Matrix& A) { return spectral_separation(SymmetricMatrix(A)); }, py::arg("A"));
  m.def(
      "operator_norm", [](const Matrix& S) { return operator_norm(SymmetricMatrix(S)); },
      py::arg("S"));
  m.def(
      "haar_rotation",
      [](Eigen::Index n, std::uint64_t seed) {
        Rng rng(seed);
        return haar_rotation(n, rng).data();
      },
      py::arg("n"), py::arg("seed"));

  m.def(
      "cayley_exact", [](const Matrix& X) { return cayley_exact(SkewGenerator(X)).data(); },
      py::arg("X"));
  m.def(
      "cayley_neumann",
      [](const Matrix& X, int order) { return cayley_neumann(SkewGenerator(X), order); },
      py::arg("X"), py::arg("order") = 3);
  m.def(
      "qr_retract", [](const Matrix& Y) { return qr_retract(Y).data(); }, py::arg("Y"));
  m.def("qr_factor_positive", &qr_factor_positive, py::arg("Y"));
  m.def(
      "polar_retract", [](const Matrix& Y) { return polar_retract(Y).data(); }, py::arg("Y"));
  m.def(
      "givens_rotation",
      [](Eigen::Index n, Eigen::Index i, Eigen::Index j, double t) {
        return givens_rotation(n, i, j, t).data();
      },
      py::arg("n"), py::arg("i"), py::arg("j"), py::arg("t"));

  m.def("lipschitz_bound", &lipschitz_bound, py::arg("n"), py::arg("norm_ce2"));
  m.def("entry_threshold", &entry_threshold, py::arg("g"), py::arg("delta_lb"));
  m.def("si_contraction", &si_contraction, py::arg("lambda1"), py::arg("lambda2"),
        py::arg("sigma2"));
  m.def("oja_effective_step", &oja_effective_step, py::arg("eta"), py::arg("sigma2"));
  m.def("input_bound", &input_bound, py::arg("norm_ce"), py::arg("norm_ee"));
  m.def("domain_radius", &domain_radius, py::arg("g"), py::arg("delta_lb"), py::arg("norm_ce"));
  m.def(
      "direction_cosine",
      [](const Matrix& C, const Matrix& M) -> py::object {
        const auto c = direction_cosine(SymmetricMatrix(C), Rotation(M, 1e-6));
        if (!c) return py::none();
        return py::float_(*c);
      },
      py::arg("C"), py::arg("M"));
  m.def(
      "hutchinson_trace",
      [](const Matrix& C, double sigma2, int probes, std::uint64_t seed) {
        MvpOracle oracle(Matrix(C), sigma2);
        Rng rng(seed);
        return hutchinson_trace(oracle, probes, rng);
      },
      py::arg("C"), py::arg("sigma2"), py::arg("probes"), py::arg("seed"));

  m.def(
      "solve",
      [](Eigen::Index n, std::vector<double> eigenvalues, std::uint64_t basis_seed, double sigma2,
         double eps_e, std::uint64_t seed, const std::string& retraction, int neumann_order,
         int max_iters, double f_tolerance, bool use_trace_free) {
        ObservationModel model;
        model.signal.n = n;
        model.signal.eigenvalues =
            eigenvalues.empty() ? SignalSpec::standard(n, basis_seed).eigenvalues : eigenvalues;
        model.signal.basis_seed = basis_seed;
        model.noise = NoiseSchedule::constant(sigma2, eps_e);
        SolverConfig config;
        config.retraction = retraction_from_name(retraction, neumann_order);
        config.max_iters = max_iters;
        config.f_tolerance = f_tolerance;
        config.use_trace_free = use_trace_free;
        Rng init = Rng::stream("solve", seed, "init");
        const Rotation M0 = haar_rotation(n, init);
        Rng rng = Rng::stream("solve", seed, "noise");
        return log_to_dict(run_flow(config, model, M0, rng));
      },
      py::arg("n"), py::arg("eigenvalues") = std::vector<double>{}, py::arg("basis_seed") = 42,
      py::arg("sigma2") = 0.0, py::arg("eps_e") = 0.0, py::arg("seed") = 0,
      py::arg("retraction") = "cayley-neumann", py::arg("neumann_order") = 3,
      py::arg("max_iters") = 100000, py::arg("f_tolerance") = 1e-6,
      py::arg("use_trace_free") = true,
      "run the commutator flow on the standard observation model");

  m.def(
      "run_experiment",
      [](const std::string& id, Eigen::Index n, int seeds, std::vector<double> sigma2,
         std::vector<double> eps_e, const std::map<std::string, std::string>& overrides) {
        ExperimentSpec spec;
        spec.id = id;
        spec.n = n;
        spec.seeds = seeds;
        spec.sigma2_grid = std::move(sigma2);
        spec.eps_e_grid = std::move(eps_e);
        spec.overrides = overrides;
        const ResultTable table = run_experiment(spec);
        py::dict out;
        out["columns"] = table.columns;
        out["metadata"] = table.metadata;
        py::list rows;
        for (const auto& row : table.rows) {
          py::list r;
          for (const auto& cell : row)
            std::visit([&r](const auto& v) { r.append(v); }, cell);
          rows.append(std::move(r));
        }
        out["rows"] = std::move(rows);
        return out;
      },
      py::arg("id"), py::arg("n") = 0, py::arg("seeds") = 0,
      py::arg("sigma2") = std::vector<double>{}, py::arg("eps_e") = std::vector<double>{},
      py::arg("overrides") = std::map<std::string, std::string>{});

  m.attr("__version__") = "0.1.0";
}
