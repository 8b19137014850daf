#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dbf/experiments.hpp"
#include "json.hpp"

namespace {

// exit codes: 0 success, 1 usage error, 2 experiment failure
constexpr int kUsageError = 1;
constexpr int kExperimentFailure = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void apply_config_file(dbf::ExperimentSpec& spec, const std::string& path) {
  const nlohmann::json j = nlohmann::json::parse(read_file(path));
  if (j.contains("experiment")) spec.id = j.at("experiment").get<std::string>();
  if (j.contains("n")) spec.n = j.at("n").get<Eigen::Index>();
  if (j.contains("seeds")) spec.seeds = j.at("seeds").get<int>();
  if (j.contains("sigma2")) spec.sigma2_grid = j.at("sigma2").get<std::vector<double>>();
  if (j.contains("eps_e")) spec.eps_e_grid = j.at("eps_e").get<std::vector<double>>();
  if (j.contains("workers")) spec.workers = j.at("workers").get<int>();
  if (j.contains("overrides"))
    for (const auto& [key, value] : j.at("overrides").items())
      spec.overrides[key] = value.is_string() ? value.get<std::string>() : value.dump();
}

int run_solve(const std::string& config_path) {
  const nlohmann::json j = nlohmann::json::parse(read_file(config_path));
  const dbf::ObservationModel model = dbf::model_from_json(j.at("model").dump());

  dbf::SolverConfig config;
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    if (s.contains("max_iters")) config.max_iters = s.at("max_iters").get<int>();
    if (s.contains("f_tolerance")) config.f_tolerance = s.at("f_tolerance").get<double>();
    if (s.contains("reorth_period")) config.reorth_period = s.at("reorth_period").get<int>();
    if (s.contains("use_trace_free")) config.use_trace_free = s.at("use_trace_free").get<bool>();
    if (s.contains("step_c")) config.step.c = s.at("step_c").get<double>();
    if (s.contains("retraction")) {
      const std::string r = s.at("retraction").get<std::string>();
      if (r == "cayley-exact")
        config.retraction = dbf::CayleyExact{};
      else if (r == "cayley-neumann")
        config.retraction = dbf::CayleyNeumann{s.value("neumann_order", 3)};
      else if (r == "qr")
        config.retraction = dbf::QrRetraction{};
      else if (r == "polar")
        config.retraction = dbf::PolarRetraction{};
      else
        throw std::invalid_argument("unknown retraction: " + r);
    }
    if (s.contains("step_schedule") && s.at("step_schedule").get<std::string>() == "decaying")
      config.step = dbf::StepSchedule::decaying(s.value("step_c", 0.5), s.value("k0", 100.0));
  }

  const std::uint64_t seed = j.value("seed", 0ULL);
  dbf::Rng init = dbf::Rng::stream("solve", seed, "init");
  const dbf::Rotation M0 = dbf::haar_rotation(model.signal.n, init);
  dbf::Rng rng = dbf::Rng::stream("solve", seed, "noise");
  const dbf::TrajectoryLog log = dbf::run_flow(config, model, M0, rng);

  if (j.contains("trajectory_csv")) {
    std::ofstream out(j.at("trajectory_csv").get<std::string>(), std::ios::binary);
    out << log.to_csv();
  }
  std::cout << log.summary_json() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete double-bracket flow eigendecomposition experiments"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run a named experiment (e1..e14, mvp_cost, verify)");
  std::string experiment;
  dbf::ExperimentSpec spec;
  std::string out_path;
  std::string format = "csv";
  std::string config_file;
  long long n_flag = 0;
  std::vector<double> sigma2_flag, eps_e_flag;
  std::vector<std::string> override_flags;
  run->add_option("--experiment", experiment, "experiment id")->required();
  run->add_option("--n", n_flag, "problem dimension");
  run->add_option("--seeds", spec.seeds, "number of seeds / samples");
  run->add_option("--sigma2", sigma2_flag, "isotropic noise grid")->delimiter(',');
  run->add_option("--eps-e", eps_e_flag, "trace-free noise amplitude grid")->delimiter(',');
  run->add_option("--out", out_path, "output path (default stdout)");
  run->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--config", config_file, "JSON config file (CLI flags override)");
  run->add_option("--workers", spec.workers, "worker count (default DBF_WORKERS or cores)");
  run->add_option("--set", override_flags, "experiment-specific override key=value");

  // solve
  auto* solve = app.add_subcommand("solve", "run one solve from a JSON config");
  std::string solve_config;
  solve->add_option("--config", solve_config, "JSON config file")->required();

  // verify
  auto* verify = app.add_subcommand("verify", "run the invariant battery");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (run->parsed()) {
      if (!config_file.empty()) apply_config_file(spec, config_file);
      spec.id = experiment;
      if (n_flag > 0) spec.n = n_flag;
      if (!sigma2_flag.empty()) spec.sigma2_grid = sigma2_flag;
      if (!eps_e_flag.empty()) spec.eps_e_grid = eps_e_flag;
      for (const auto& kv : override_flags) {
        const auto pos = kv.find('=');
        if (pos == std::string::npos) throw std::invalid_argument("--set expects key=value");
        spec.overrides[kv.substr(0, pos)] = kv.substr(pos + 1);
      }
      const dbf::ResultTable table = dbf::run_experiment(spec);
      dbf::emit(table, format, out_path);
      if (spec.id == "verify" && table.metadata.at("violations_total") != "0")
        return kExperimentFailure;
      return 0;
    }
    if (solve->parsed()) return run_solve(solve_config);
    if (verify->parsed()) {
      dbf::ExperimentSpec vspec;
      vspec.id = "verify";
      const dbf::ResultTable table = dbf::run_experiment(vspec);
      dbf::emit(table, "csv", "");
      return table.metadata.at("violations_total") == "0" ? 0 : kExperimentFailure;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExperimentFailure;
  }
  return kUsageError;
}
