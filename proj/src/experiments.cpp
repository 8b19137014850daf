#include "dbf/experiments.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace dbf {

namespace {

std::string format_cell_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

int resolve_workers(const ExperimentSpec& spec) {
  if (spec.workers > 0) return spec.workers;
  if (const char* env = std::getenv("DBF_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(0..count-1) on up to `workers` threads. Tasks own their Rng
// streams, so results are identical at any worker count.
void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  const int threads = std::min(workers, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      while (!failed.load()) {
        const int i = next.fetch_add(1);
        if (i >= count) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed.store(true);
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

double parse_override(const ExperimentSpec& spec, const std::string& key, double fallback) {
  auto it = spec.overrides.find(key);
  if (it == spec.overrides.end()) return fallback;
  return std::stod(it->second);
}

std::string override_str(const ExperimentSpec& spec, const std::string& key,
                         const std::string& fallback) {
  auto it = spec.overrides.find(key);
  return it == spec.overrides.end() ? fallback : it->second;
}

constexpr std::uint64_t kSignalBasisSeed = 42;

ObservationModel plain_model(Eigen::Index n, double sigma2, double eps_e = 0.0, double scale = 1.0) {
  ObservationModel model;
  model.signal = SignalSpec::standard(n, kSignalBasisSeed, scale);
  model.noise = NoiseSchedule::constant(sigma2, eps_e);
  return model;
}

void echo_config(ResultTable& table, const ExperimentSpec& spec, Eigen::Index n, int seeds) {
  table.metadata["experiment"] = spec.id;
  table.metadata["n"] = std::to_string(n);
  table.metadata["seeds"] = std::to_string(seeds);
  table.metadata["version"] = "dbflow-0.1.0";
}

struct MethodEntry {
  std::string name;
  bool is_flow = false;             // commutator family via run_flow
  RetractionKind retraction = CayleyExact{};
  BaselineConfig baseline;
};

std::vector<MethodEntry> comparison_methods(int max_iters, double f_tol, bool wall_clock_grid) {
  std::vector<MethodEntry> methods;
  {
    MethodEntry m;
    m.name = "cayley";
    m.is_flow = true;
    m.retraction = CayleyNeumann{3};
    methods.push_back(m);
  }
  {
    MethodEntry m;
    m.name = "riem-qr";
    m.is_flow = true;
    m.retraction = QrRetraction{};
    methods.push_back(m);
  }
  {
    MethodEntry m;
    m.name = "riem-polar";
    m.is_flow = true;
    m.retraction = PolarRetraction{};
    methods.push_back(m);
  }
  {
    MethodEntry m;
    m.name = "tf-oja";
    m.baseline.method = BaselineMethod::TfOjaOracle;
    m.baseline.step_c = 0.1;
    m.baseline.max_iters = max_iters;
    m.baseline.f_tolerance = f_tol;
    methods.push_back(m);
  }
  {
    MethodEntry m;
    m.name = "raw-oja";
    m.baseline.method = BaselineMethod::RawOja;
    m.baseline.step_c = 0.1;
    // the iteration-count grid uses the squared realized norm; the
    // wall-clock grid uses the unsquared rule, under which raw Oja is
    // competitive at low noise and the crossover is visible
    m.baseline.normalizer = wall_clock_grid ? StepSchedule::Normalizer::C2
                                            : StepSchedule::Normalizer::C2Sq;
    m.baseline.max_iters = max_iters;
    m.baseline.f_tolerance = f_tol;
    methods.push_back(m);
  }
  if (wall_clock_grid) {
    MethodEntry m;
    m.name = "subspace-iteration";
    m.baseline.method = BaselineMethod::SubspaceIteration;
    m.baseline.max_iters = max_iters;
    m.baseline.f_tolerance = f_tol;
    methods.push_back(m);
  }
  return methods;
}

TrajectoryLog run_method(const MethodEntry& method, const ObservationModel& model,
                         const Rotation& M0, Rng& rng, int max_iters, double f_tol) {
  if (method.is_flow) {
    SolverConfig config;
    config.retraction = method.retraction;
    config.step = StepSchedule::constant(0.1, StepSchedule::Normalizer::Ce2Sq);
    config.max_iters = max_iters;
    config.f_tolerance = f_tol;
    return run_flow(config, model, M0, rng);
  }
  return baseline_run(method.baseline, model, M0, rng);
}

// ---------------------------------------------------------------------------
// e1: pathwise invariance across isotropic noise levels
// ---------------------------------------------------------------------------
ResultTable run_e1(const ExperimentSpec& spec) {
  const Eigen::Index n = spec.n > 0 ? spec.n : 20;
  const int seeds = spec.seeds > 0 ? spec.seeds : 1;
  const int steps = static_cast<int>(parse_override(spec, "steps", 5000));
  std::vector<double> sigmas = spec.sigma2_grid;
  if (sigmas.empty()) sigmas = {0.0, 1e3, 1e6};

  ResultTable table;
  table.columns = {"seed", "sigma2_a", "sigma2_b", "max_diff", "mean_diff"};
  echo_config(table, spec, n, seeds);

  for (int seed = 0; seed < seeds; ++seed) {
    std::vector<TrajectoryLog> logs(sigmas.size());
    parallel_for(static_cast<int>(sigmas.size()), resolve_workers(spec), [&](int i) {
      SolverConfig config;
      config.retraction = CayleyNeumann{3};
      config.step = StepSchedule::constant(0.1);
      config.max_iters = steps;
      config.f_tolerance = 1e-300;  // run the full horizon
      config.record_iterates = true;
      Rng init = Rng::stream("e1", static_cast<std::uint64_t>(seed), "init");
      const Rotation M0 = haar_rotation(n, init);
      Rng rng = Rng::stream("e1", static_cast<std::uint64_t>(seed), "noise");
      logs[static_cast<std::size_t>(i)] =
          run_flow(config, plain_model(n, sigmas[static_cast<std::size_t>(i)]), M0, rng);
    });
    for (std::size_t a = 0; a < sigmas.size(); ++a) {
      for (std::size_t b = a + 1; b < sigmas.size(); ++b) {
        const ComparisonReport rep = trajectory_difference(logs[a], logs[b]);
        table.add_row({static_cast<std::int64_t>(seed), sigmas[a], sigmas[b], rep.max_difference,
                       rep.mean_difference});
      }
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// e2: response to a large isotropic pulse
// ---------------------------------------------------------------------------
ResultTable run_e2(const ExperimentSpec& spec) {
  const Eigen::Index n = spec.n > 0 ? spec.n : 20;
  const int seeds = spec.seeds > 0 ? spec.seeds : 10;
  const int steps = static_cast<int>(parse_override(spec, "steps", 400));
  const double pulse = parse_override(spec, "pulse", 1e8);
  const std::int64_t p0 = 200, p1 = 220;

  // ratio = max pulse-window d_k over the median pre-pulse d_k; the same
  // statistic from a pulse-free run of the same seed (quiet_ratio) isolates
  // the natural decay of d_k, so response = ratio / quiet_ratio is 1 for a
  // method the pulse cannot reach.
  ResultTable table;
  table.columns = {"method", "seed", "median_pre", "max_pulse", "ratio", "quiet_ratio", "response"};
  echo_config(table, spec, n, seeds);

  const std::vector<std::string> methods = {"cayley", "subspace-iteration", "qr-oja", "euclidean-sgd"};

  auto pulse_stats = [&](const TrajectoryLog& log) {
    std::vector<double> pre, in_pulse;
    for (const auto& rec : log.records) {
      if (rec.k < p0) pre.push_back(rec.displacement);
      if (rec.k >= p0 && rec.k < p1) in_pulse.push_back(rec.displacement);
    }
    std::nth_element(pre.begin(), pre.begin() + static_cast<std::ptrdiff_t>(pre.size() / 2),
                     pre.end());
    const double med = pre[pre.size() / 2];
    const double mx = in_pulse.empty() ? 0.0 : *std::max_element(in_pulse.begin(), in_pulse.end());
    return std::pair<double, double>(med, mx);
  };

  std::vector<std::vector<ResultCell>> rows(methods.size() * static_cast<std::size_t>(seeds));
  parallel_for(static_cast<int>(rows.size()), resolve_workers(spec), [&](int idx) {
    const std::size_t m = static_cast<std::size_t>(idx) % methods.size();
    const int seed = idx / static_cast<int>(methods.size());

    auto run_with = [&](double pulse_level) {
      ObservationModel model;
      model.signal = SignalSpec::standard(n, kSignalBasisSeed);
      model.noise = NoiseSchedule::pulse(0.0, pulse_level, p0, p1);
      Rng init = Rng::stream("e2", static_cast<std::uint64_t>(seed), "init");
      const Rotation M0 = haar_rotation(n, init);
      Rng rng = Rng::stream("e2", static_cast<std::uint64_t>(seed), "noise");
      if (methods[m] == "cayley") {
        SolverConfig config;
        config.retraction = CayleyNeumann{3};
        config.max_iters = steps;
        config.f_tolerance = 1e-300;
        return run_flow(config, model, M0, rng);
      }
      BaselineConfig config;
      config.max_iters = steps;
      config.f_tolerance = 1e-300;
      if (methods[m] == "subspace-iteration") config.method = BaselineMethod::SubspaceIteration;
      if (methods[m] == "qr-oja") {
        config.method = BaselineMethod::QrOja;
        config.eta = 0.1 / static_cast<double>(n);  // 0.1 / ||C_sig||_2
      }
      if (methods[m] == "euclidean-sgd") {
        config.method = BaselineMethod::EuclideanSgdQr;
        config.eta = 0.1 / static_cast<double>(n * n);
      }
      return baseline_run(config, model, M0, rng);
    };

    const auto [med, mx] = pulse_stats(run_with(pulse));
    const auto [qmed, qmx] = pulse_stats(run_with(0.0));
    const double ratio = med > 0 ? mx / med : 0.0;
    const double quiet = qmed > 0 ? qmx / qmed : 0.0;
    rows[static_cast<std::size_t>(idx)] = {methods[m],
                                           static_cast<std::int64_t>(seed),
                                           med,
                                           mx,
                                           ratio,
                                           quiet,
                                           quiet > 0 ? ratio / quiet : 0.0};
  });
  for (auto& r : rows) table.add_row(std::move(r));
  return table;
}

// ---------------------------------------------------------------------------
// e3: steady-state error vs trace-free noise amplitude
// ---------------------------------------------------------------------------
ResultTable run_e3(const ExperimentSpec& spec) {
  const Eigen::Index n = spec.n > 0 ? spec.n : 20;
  const int seeds = spec.seeds > 0 ? spec.seeds : 5;
  const int steps = static_cast<int>(parse_override(spec, "steps", 4000));
  std::vector<double> sigmas = spec.sigma2_grid;
  if (sigmas.empty()) sigmas = {0.0, 1e3, 1e6};
  std::vector<double> eps_grid = spec.eps_e_grid;
  if (eps_grid.empty()) eps_grid = {0.1, 0.2, 0.5, 1.0, 2.0};

  ResultTable table;
  table.columns = {"kind", "sigma2", "eps_e", "radius", "slope", "intercept", "r2"};
  echo_config(table, spec, n, seeds);

  const Signal signal = build_signal(SignalSpec::standard(n, kSignalBasisSeed));
  const int cells = static_cast<int>(sigmas.size() * eps_grid.size()) * seeds;
  std::vector<double> radii(static_cast<std::size_t>(cells), 0.0);

  parallel_for(cells, resolve_workers(spec), [&](int idx) {
    const int per_sigma = static_cast<int>(eps_grid.size()) * seeds;
    const std::size_t si = static_cast<std::size_t>(idx / per_sigma);
    const int rem = idx % per_sigma;
    const std::size_t ei = static_cast<std::size_t>(rem / seeds);
    const int seed = rem % seeds;

    SolverConfig config;
    config.retraction = CayleyNeumann{3};
    config.max_iters = steps;
    config.f_tolerance = 1e-300;
    ObservationModel model = plain_model(n, sigmas[si], eps_grid[ei]);
    // start at the diagonalizing basis so the tail samples the noise ball
    Rng rng = Rng::stream("e3", static_cast<std::uint64_t>(seed), "noise");
    const TrajectoryLog log = run_flow(config, model, signal.basis, rng);
    const IssFit fit = iss_fit(log.f_series());
    radii[static_cast<std::size_t>(idx)] = fit.steady_state;
  });

  for (std::size_t si = 0; si < sigmas.size(); ++si) {
    std::vector<double> mean_radius(eps_grid.size(), 0.0);
    for (std::size_t ei = 0; ei < eps_grid.size(); ++ei) {
      double acc = 0.0;
      for (int seed = 0; seed < seeds; ++seed) {
        const std::size_t idx =
            si * eps_grid.size() * static_cast<std::size_t>(seeds) +
            ei * static_cast<std::size_t>(seeds) + static_cast<std::size_t>(seed);
        acc += radii[idx];
      }
      mean_radius[ei] = acc / seeds;
      table.add_row({std::string("cell"), sigmas[si], eps_grid[ei], mean_radius[ei],
                     std::string(), std::string(), std::string()});
    }
    const LinearFit fit = linear_fit(eps_grid, mean_radius);
    table.add_row({std::string("fit"), sigmas[si], std::string(), std::string(), fit.slope,
                   fit.intercept, fit.r_squared});
  }
  return table;
}

// ---------------------------------------------------------------------------
// e4: convergence rate under decaying steps
// ---------------------------------------------------------------------------
ResultTable run_e4(const ExperimentSpec& spec) {
  const Eigen::Index n = spec.n > 0 ? spec.n : 10;
  const int seeds = spec.seeds > 0 ? spec.seeds : 5;
  const int steps = static_cast<int>(parse_override(spec, "steps", 30000));
  const double c = parse_override(spec, "c", 0.5);
  const double k0 = parse_override(spec, "k0", 100.0);
  const double eps_e = parse_override(spec, "eps_e", 0.5);
  const bool variant_b = override_str(spec, "variant", "A") == "B";
  std::vector<double> sigmas = spec.sigma2_grid;
  if (sigmas.empty()) sigmas = {0.0};

  ResultTable table;
  table.columns = {"sigma2", "slope", "steps", "variant"};
  echo_config(table, spec, n, seeds);

  const Signal signal = build_signal(SignalSpec::standard(n, kSignalBasisSeed));
  for (double sigma2 : sigmas) {
    std::vector<std::vector<double>> series(static_cast<std::size_t>(seeds));
    parallel_for(seeds, resolve_workers(spec), [&](int seed) {
      SolverConfig config;
      config.retraction = CayleyNeumann{3};
      config.step = StepSchedule::decaying(c, k0);
      config.max_iters = steps;
      config.f_tolerance = 1e-300;
      ObservationModel model = plain_model(n, sigma2, variant_b ? 0.0 : eps_e);
      if (variant_b) {
        model.kind = ObservationModel::Kind::SampleCovariance;
        model.samples_per_step = static_cast<int>(parse_override(spec, "samples", 200));
      }
      Rng rng = Rng::stream("e4", static_cast<std::uint64_t>(seed), "noise");
      series[static_cast<std::size_t>(seed)] = run_flow(config, model, signal.basis, rng).f_series();
    });
    std::vector<double> mean_f(series[0].size(), 0.0);
    for (const auto& s : series)
      for (std::size_t k = 0; k < mean_f.size(); ++k) mean_f[k] += s[k] / seeds;
    const std::size_t burn = static_cast<std::size_t>(10.0 * k0);
    table.add_row({sigma2, loglog_slope(mean_f, burn), static_cast<std::int64_t>(mean_f.size()),
                   std::string(variant_b ? "B" : "A")});
  }
  return table;
}

// ---------------------------------------------------------------------------
// e5: monotone descent threshold in the step size
// ---------------------------------------------------------------------------
ResultTable run_e5(const ExperimentSpec& spec) {
  const Eigen::Index n = spec.n > 0 ? spec.n : 20;
  const int seeds = spec.seeds > 0 ? spec.seeds : 10;
  const int steps = static_cast<int>(parse_override(spec, "steps", 1000));
  const double scale = parse_override(spec, "scale", 0.5);
  std::vector<double> etas;
  {
    const std::string grid = override_str(spec, "eta_grid", "0.001,0.002,0.005,0.01,0.015,0.02,0.03,0.05");
    std::stringstream ss(grid);
    std::string tok;
    while (std::getline(ss, tok, ',')) etas.push_back(std::stod(tok));
  }

  ResultTable table;
  table.columns = {"eta", "monotone_fraction", "mean_ascents"};
  echo_config(table, spec, n, seeds);

  std::vector<int> ascents(etas.size() * static_cast<std::size_t>(seeds), 0);
  parallel_for(static_cast<int>(ascents.size()), resolve_workers(spec), [&](int idx) {
    const std::size_t ei = static_cast<std::size_t>(idx) / static_cast<std::size_t>(seeds);
    const int seed = idx % seeds;
    SolverConfig config;
    config.retraction = CayleyExact{};
    config.step = StepSchedule::constant(etas[ei], StepSchedule::Normalizer::None);
    config.max_iters = steps;
    config.f_tolerance = 1e-300;
    Rng init = Rng::stream("e5", static_cast<std::uint64_t>(seed), "init");
    const Rotation M0 = haar_rotation(n, init);
    Rng rng = Rng::stream("e5", static_cast<std::uint64_t>(seed), "noise");
    const TrajectoryLog log = run_flow(config, plain_model(n, 0.0, 0.0, scale), M0, rng);
    ascents[static_cast<std::size_t>(idx)] = monotonicity_audit(log.f_series());
  });

  for (std::size_t ei = 0; ei < etas.size(); ++ei) {
    int monotone = 0;
    double total = 0.0;
    for (int seed = 0; seed < seeds; ++seed) {
      const int a = ascents[ei * static_cast<std::size_t>(seeds) + static_cast<std::size_t>(seed)];
      if (a == 0) ++monotone;
      total += a;
    }
    table.add_row({etas[ei], static_cast<double>(monotone) / seeds, total / seeds});
  }
  return table;
}

// ---------------------------------------------------------------------------
// e6: spectral separation of Haar initial points
// ---------------------------------------------------------------------------
ResultTable run_e6(const ExperimentSpec& spec) {
  std::vector<Eigen::Index> dims = spec.n > 0 ? std::vector<Eigen::Index>{spec.n}
                                              : std::vector<Eigen::Index>{5, 10, 20, 50};
  const int samples = spec.seeds > 0 ? spec.seeds : 1000;

  ResultTable table;
  table.columns = {"n", "mean_delta_over_g", "p5_delta_over_g"};
  echo_config(table, spec, dims[0], samples);

  for (Eigen::Index n : dims) {
    const Signal signal = build_signal(SignalSpec::standard(n, kSignalBasisSeed));
    std::vector<double> vals(static_cast<std::size_t>(samples));
    parallel_for(samples, resolve_workers(spec), [&](int s) {
      Rng rng = Rng::stream("e6", static_cast<std::uint64_t>(s), "init");
      const Rotation M = haar_rotation(n, rng);
      vals[static_cast<std::size_t>(s)] =
          spectral_separation(rotate_covariance(M, signal.covariance)) / signal.gap;
    });
    std::sort(vals.begin(), vals.end());
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    const double p5 = vals[static_cast<std::size_t>(0.05 * static_cast<double>(vals.size()))];
    table.add_row({static_cast<std::int64_t>(n), mean, p5});
  }
  return table;
}

// ---------------------------------------------------------------------------
// e7: empirical gradient Lipschitz constant vs the bound
// ---------------------------------------------------------------------------
ResultTable run_e7(const ExperimentSpec& spec) {
  std::vector<Eigen::Index> dims = spec.n > 0 ? std::vector<Eigen::Index>{spec.n}
                                              : std::vector<Eigen::Index>{5, 10, 20};
  const int pairs = spec.seeds > 0 ? spec.seeds : 1000;
  const double eps = parse_override(spec, "eps", 1e-4);

  ResultTable table;
  table.columns = {"n", "L_est", "L_bound", "ratio"};
  echo_config(table, spec, dims[0], pairs);

  for (Eigen::Index n : dims) {
    const Signal signal = build_signal(SignalSpec::standard(n, kSignalBasisSeed));
    const SymmetricMatrix Ce = trace_free(signal.covariance);
    Rng rng = Rng::stream("e7", static_cast<std::uint64_t>(n), "pairs");
    const double L_est = empirical_lipschitz(Ce, pairs, eps, rng);
    const double L_bound = lipschitz_bound(n, signal.norm_ce);
    table.add_row({static_cast<std::int64_t>(n), L_est, L_bound, L_est / L_bound});
  }
  return table;
}

// ---------------------------------------------------------------------------
// e8: alignment between Oja and commutator directions
// ---------------------------------------------------------------------------
ResultTable run_e8(const ExperimentSpec& spec) {
  const Eigen::Index n = spec.n > 0 ? spec.n : 10;
  const int samples = spec.seeds > 0 ? spec.seeds : 10000;

  ResultTable table;
  table.columns = {"n", "samples", "p_negative"};
  echo_config(table, spec, n, samples);

  std::vector<int> negative(static_cast<std::size_t>(samples), 0);
  std::vector<int> valid(static_cast<std::size_t>(samples), 0);
  parallel_for(samples, resolve_workers(spec), [&](int s) {
    Rng rng = Rng::stream("e8", static_cast<std::uint64_t>(s), "sample");
    // sign-symmetric matrix law (C and -C equidistributed), the condition
    // under which the 1/2-probability statement is exact
    const SymmetricMatrix C(sym_part(rng.gaussian_matrix(n, n)));
    const Rotation M = haar_rotation(n, rng);
    if (auto cosine = direction_cosine(C, M)) {
      valid[static_cast<std::size_t>(s)] = 1;
      negative[static_cast<std::size_t>(s)] = *cosine < 0.0 ? 1 : 0;
    }
  });
  int neg = 0, tot = 0;
  for (int s = 0; s < samples; ++s) {
    neg += negative[static_cast<std::size_t>(s)];
    tot += valid[static_cast<std::size_t>(s)];
  }
  table.add_row({static_cast<std::int64_t>(n), static_cast<std::int64_t>(tot),
                 static_cast<double>(neg) / std::max(tot, 1)});
  return table;
}

// ---------------------------------------------------------------------------
// e9: non-escape from the spectrally separated domain
// ---------------------------------------------------------------------------
ResultTable run_e9(const ExperimentSpec& spec) {
  const Eigen::Index n = spec.n > 0 ? spec.n : 20;
  const int seeds = spec.seeds > 0 ? spec.seeds : 20;
  const int steps = static_cast<int>(parse_override(spec, "steps", 5000));
  const double scale = parse_override(spec, "scale", 0.1);  // gap g = scale
  std::vector<double> eps_grid = spec.eps_e_grid;
  if (eps_grid.empty()) eps_grid = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5};

  ResultTable table;
  table.columns = {"eps_e", "p_escape", "mean_delta_min", "mean_final_delta"};
  echo_config(table, spec, n, seeds);

  const Signal signal = build_signal(SignalSpec::standard(n, kSignalBasisSeed, scale));
  const double threshold = signal.gap / 4.0;

  struct CellResult {
    bool escaped = false;
    double delta_min = 0.0;
    double delta_final = 0.0;
  };
  std::vector<CellResult> results(eps_grid.size() * static_cast<std::size_t>(seeds));

  parallel_for(static_cast<int>(results.size()), resolve_workers(spec), [&](int idx) {
    const std::size_t ei = static_cast<std::size_t>(idx) / static_cast<std::size_t>(seeds);
    const int seed = idx % seeds;
    Rng init = Rng::stream("e9", static_cast<std::uint64_t>(seed), "init");
    Matrix K = skew_part(init.gaussian_matrix(n, n));
    K *= 0.01 / K.norm();
    const Rotation M0(Matrix(signal.basis.data() * cayley_exact(SkewGenerator(std::move(K))).data()),
                      1e-9);
    SolverConfig config;
    config.retraction = CayleyNeumann{3};
    config.max_iters = steps;
    config.f_tolerance = 1e-300;
    ObservationModel model = plain_model(n, 0.0, eps_grid[ei], scale);
    if (override_str(spec, "noise_mode", "iid") == "frozen") {
      model.noise.frozen = true;
      model.noise.frozen_seed = static_cast<std::uint64_t>(seed);
    }
    Rng rng = Rng::stream("e9", static_cast<std::uint64_t>(seed), "noise");
    const TrajectoryLog log = run_flow(config, model, M0, rng);
    CellResult cell;
    cell.delta_min = std::numeric_limits<double>::infinity();
    for (const auto& rec : log.records) cell.delta_min = std::min(cell.delta_min, rec.delta);
    cell.delta_final = log.records.back().delta;
    cell.escaped = cell.delta_min < threshold;
    results[static_cast<std::size_t>(idx)] = cell;
  });

  for (std::size_t ei = 0; ei < eps_grid.size(); ++ei) {
    int escapes = 0;
    double dmin = 0.0, dfin = 0.0;
    for (int seed = 0; seed < seeds; ++seed) {
      const CellResult& cell = results[ei * static_cast<std::size_t>(seeds) + static_cast<std::size_t>(seed)];
      escapes += cell.escaped ? 1 : 0;
      dmin += cell.delta_min;
      dfin += cell.delta_final;
    }
    table.add_row({eps_grid[ei], static_cast<double>(escapes) / seeds, dmin / seeds, dfin / seeds});
  }
  return table;
}

// ---------------------------------------------------------------------------
// e10: retraction sensitivity to symmetric perturbations
// ---------------------------------------------------------------------------
ResultTable run_e10(const ExperimentSpec& spec) {
  const Eigen::Index n = spec.n > 0 ? spec.n : 8;
  const int seeds = spec.seeds > 0 ? spec.seeds : 20;
  std::vector<double> eps_grid = spec.eps_e_grid;
  if (eps_grid.empty()) eps_grid = {1e-5, 1e-4, 1e-3, 1e-2};

  ResultTable table;
  table.columns = {"kind", "eps", "qr_distance", "polar_distance", "qr_slope", "polar_slope"};
  echo_config(table, spec, n, seeds);
  table.metadata["note"] =
      "M (I + eps S) is already a polar decomposition, so the polar distances "
      "sit at the SVD rounding floor (exact insensitivity to normal perturbations)";

  std::vector<double> qr_mean(eps_grid.size(), 0.0), polar_mean(eps_grid.size(), 0.0);
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng = Rng::stream("e10", static_cast<std::uint64_t>(seed), "sample");
    const Rotation M = haar_rotation(n, rng);
    Matrix S = sym_part(rng.gaussian_matrix(n, n));
    S /= spectral_norm(S);
    for (std::size_t ei = 0; ei < eps_grid.size(); ++ei) {
      const Matrix Y = M.data() * (identity(n) + eps_grid[ei] * S);
      qr_mean[ei] += (qr_retract(Y).data() - M.data()).norm() / seeds;
      polar_mean[ei] += (polar_retract(Y).data() - M.data()).norm() / seeds;
    }
  }
  std::vector<double> lx, lqr, lpolar;
  for (std::size_t ei = 0; ei < eps_grid.size(); ++ei) {
    lx.push_back(std::log(eps_grid[ei]));
    lqr.push_back(std::log(qr_mean[ei]));
    lpolar.push_back(std::log(polar_mean[ei]));
    table.add_row({std::string("cell"), eps_grid[ei], qr_mean[ei], polar_mean[ei], std::string(),
                   std::string()});
  }
  table.add_row({std::string("fit"), std::string(), std::string(), std::string(),
                 linear_fit(lx, lqr).slope, linear_fit(lx, lpolar).slope});
  return table;
}

// ---------------------------------------------------------------------------
// e11: global convergence from Haar initialization
// ---------------------------------------------------------------------------
ResultTable run_e11(const ExperimentSpec& spec) {
  const Eigen::Index n = spec.n > 0 ? spec.n : 10;
  const int seeds = spec.seeds > 0 ? spec.seeds : 50;
  const int max_iters = static_cast<int>(parse_override(spec, "kmax", 10000));
  const double f_tol = parse_override(spec, "f_tol", 1e-8);

  ResultTable table;
  table.columns = {"seed", "converged", "iterations", "final_f"};
  echo_config(table, spec, n, seeds);

  std::vector<TrajectoryLog> logs(static_cast<std::size_t>(seeds));
  parallel_for(seeds, resolve_workers(spec), [&](int seed) {
    SolverConfig config;
    config.retraction = CayleyNeumann{3};
    config.max_iters = max_iters;
    config.f_tolerance = f_tol;
    Rng init = Rng::stream("e11", static_cast<std::uint64_t>(seed), "init");
    const Rotation M0 = haar_rotation(n, init);
    Rng rng = Rng::stream("e11", static_cast<std::uint64_t>(seed), "noise");
    logs[static_cast<std::size_t>(seed)] = run_flow(config, plain_model(n, 0.0), M0, rng);
  });
  for (int seed = 0; seed < seeds; ++seed) {
    const TrajectoryLog& log = logs[static_cast<std::size_t>(seed)];
    const double final_f = log.records.empty() ? 0.0 : log.records.back().f;
    table.add_row({static_cast<std::int64_t>(seed), std::string(log.converged ? "yes" : "no"),
                   log.iterations, final_f});
  }
  return table;
}

// ---------------------------------------------------------------------------
// e12: iterations to enter the spectrally separated domain
// ---------------------------------------------------------------------------
ResultTable run_e12(const ExperimentSpec& spec) {
  const Eigen::Index n = spec.n > 0 ? spec.n : 5;
  const int seeds = spec.seeds > 0 ? spec.seeds : 20;
  const int max_iters = static_cast<int>(parse_override(spec, "kmax", 1000));

  ResultTable table;
  table.columns = {"seed", "entered", "t_enter", "f_enter"};
  echo_config(table, spec, n, seeds);

  const Signal signal = build_signal(SignalSpec::standard(n, kSignalBasisSeed));
  const double f_enter = entry_threshold(signal.gap, signal.gap / 4.0);

  std::vector<std::int64_t> entry(static_cast<std::size_t>(seeds), -1);
  parallel_for(seeds, resolve_workers(spec), [&](int seed) {
    SolverConfig config;
    config.retraction = CayleyNeumann{3};
    config.max_iters = max_iters;
    config.f_tolerance = 1e-300;
    Rng init = Rng::stream("e12", static_cast<std::uint64_t>(seed), "init");
    const Rotation M0 = haar_rotation(n, init);
    Rng rng = Rng::stream("e12", static_cast<std::uint64_t>(seed), "noise");
    const TrajectoryLog log = run_flow(config, plain_model(n, 0.0), M0, rng);
    for (const auto& rec : log.records) {
      if (rec.f <= f_enter) {
        entry[static_cast<std::size_t>(seed)] = rec.k;
        break;
      }
    }
  });
  for (int seed = 0; seed < seeds; ++seed) {
    const std::int64_t t = entry[static_cast<std::size_t>(seed)];
    table.add_row({static_cast<std::int64_t>(seed), std::string(t >= 0 ? "yes" : "no"),
                   t >= 0 ? t : static_cast<std::int64_t>(-1), f_enter});
  }
  return table;
}

// ---------------------------------------------------------------------------
// e13 / e14: method comparison grids
// ---------------------------------------------------------------------------
ResultTable run_comparison(const ExperimentSpec& spec, bool with_wall_clock) {
  const Eigen::Index n = spec.n > 0 ? spec.n : (with_wall_clock ? 20 : 10);
  const int seeds = spec.seeds > 0 ? spec.seeds : (with_wall_clock ? 3 : 5);
  const int max_iters = static_cast<int>(parse_override(spec, "kmax", 30000));
  const double f_tol = parse_override(spec, "f_tol", 1e-6);
  std::vector<double> sigmas = spec.sigma2_grid;
  if (sigmas.empty())
    sigmas = with_wall_clock ? std::vector<double>{0, 1, 10, 100, 500, 1000}
                             : std::vector<double>{0, 1, 10, 100, 1000};

  ResultTable table;
  table.columns = with_wall_clock
                      ? std::vector<std::string>{"method", "sigma2", "mean_iters", "fails",
                                                 "wall_clock_s"}
                      : std::vector<std::string>{"method", "sigma2", "mean_iters", "fails"};
  echo_config(table, spec, n, seeds);
  if (with_wall_clock)
    table.metadata["note"] = "wall-clock values are hardware dependent and not comparable across machines";

  const std::vector<MethodEntry> methods = comparison_methods(max_iters, f_tol, with_wall_clock);
  struct Cell {
    double iter_sum = 0.0;
    int converged = 0;
    int fails = 0;
    double seconds = 0.0;
  };
  std::vector<Cell> cells(methods.size() * sigmas.size());

  const int total = static_cast<int>(cells.size()) * seeds;
  std::mutex cell_mutex;
  parallel_for(total, resolve_workers(spec), [&](int idx) {
    const int cell_idx = idx / seeds;
    const int seed = idx % seeds;
    const std::size_t mi = static_cast<std::size_t>(cell_idx) / sigmas.size();
    const std::size_t si = static_cast<std::size_t>(cell_idx) % sigmas.size();

    Rng init = Rng::stream(spec.id, static_cast<std::uint64_t>(seed), "init");
    const Rotation M0 = haar_rotation(n, init);
    Rng rng = Rng::stream(spec.id, static_cast<std::uint64_t>(seed), "noise");
    const auto t0 = std::chrono::steady_clock::now();
    const TrajectoryLog log =
        run_method(methods[mi], plain_model(n, sigmas[si]), M0, rng, max_iters, f_tol);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::lock_guard<std::mutex> lock(cell_mutex);
    Cell& cell = cells[static_cast<std::size_t>(cell_idx)];
    if (log.converged) {
      cell.iter_sum += static_cast<double>(log.iterations);
      ++cell.converged;
    } else {
      ++cell.fails;
    }
    cell.seconds += secs;
  });

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
      const Cell& cell = cells[mi * sigmas.size() + si];
      std::vector<ResultCell> row = {methods[mi].name, sigmas[si]};
      if (cell.converged > 0)
        row.push_back(cell.iter_sum / cell.converged);
      else
        row.push_back(std::string("FAIL"));
      row.push_back(static_cast<std::int64_t>(cell.fails));
      if (with_wall_clock) row.push_back(cell.seconds / seeds);
      table.add_row(std::move(row));
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// mvp_cost: oracle meter audit
// ---------------------------------------------------------------------------
ResultTable run_mvp_cost(const ExperimentSpec& spec) {
  const Eigen::Index n = spec.n > 0 ? spec.n : 20;
  const int iters = static_cast<int>(parse_override(spec, "steps", 100));
  const int m = static_cast<int>(parse_override(spec, "probes", 10));

  ResultTable table;
  table.columns = {"method", "iters", "total_mvps", "mvps_per_iter", "overhead"};
  echo_config(table, spec, n, 1);

  Rng init = Rng::stream("mvp_cost", 0, "init");
  const Rotation M0 = haar_rotation(n, init);
  const ObservationModel model = plain_model(n, 100.0);

  SolverConfig flow;
  flow.retraction = CayleyNeumann{3};
  flow.max_iters = iters;
  flow.f_tolerance = 1e-300;
  Rng rng1 = Rng::stream("mvp_cost", 0, "noise");
  const TrajectoryLog cayley = run_flow(flow, model, M0, rng1);

  BaselineConfig hutch;
  hutch.method = BaselineMethod::TfOjaHutchinson;
  hutch.hutchinson_probes = m;
  hutch.max_iters = iters;
  hutch.f_tolerance = 1e-300;
  Rng rng2 = Rng::stream("mvp_cost", 0, "noise");
  const TrajectoryLog tf_hutch = baseline_run(hutch, model, M0, rng2);

  BaselineConfig oracle_mode;
  oracle_mode.method = BaselineMethod::TfOjaOracle;
  oracle_mode.max_iters = iters;
  oracle_mode.f_tolerance = 1e-300;
  Rng rng3 = Rng::stream("mvp_cost", 0, "noise");
  const TrajectoryLog tf_oracle = baseline_run(oracle_mode, model, M0, rng3);

  const double per_cayley = static_cast<double>(cayley.mvp_total) / iters;
  table.add_row({std::string("cayley"), static_cast<std::int64_t>(iters), cayley.mvp_total,
                 per_cayley, 1.0});
  table.add_row({std::string("tf-oja-oracle (entry access)"), static_cast<std::int64_t>(iters),
                 tf_oracle.mvp_total, static_cast<double>(tf_oracle.mvp_total) / iters,
                 static_cast<double>(tf_oracle.mvp_total) / cayley.mvp_total});
  table.add_row({std::string("tf-oja-hutchinson"), static_cast<std::int64_t>(iters),
                 tf_hutch.mvp_total, static_cast<double>(tf_hutch.mvp_total) / iters,
                 static_cast<double>(tf_hutch.mvp_total) / cayley.mvp_total});
  return table;
}

ResultTable run_verify(const ExperimentSpec& spec) {
  ResultTable table;
  table.columns = {"check", "trials", "violations", "detail"};
  echo_config(table, spec, 0, 0);
  int total = 0;
  for (const auto& check : run_property_battery()) {
    table.add_row({check.name, static_cast<std::int64_t>(check.trials),
                   static_cast<std::int64_t>(check.violations), check.detail});
    total += check.violations;
  }
  table.metadata["violations_total"] = std::to_string(total);
  return table;
}

}  // namespace

void ResultTable::add_row(std::vector<ResultCell> row) {
  if (row.size() != columns.size())
    throw std::invalid_argument("ResultTable: row width does not match columns");
  rows.push_back(std::move(row));
}

std::string ResultTable::to_csv() const {
  std::ostringstream os;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c) os << ',';
    os << columns[c];
  }
  os << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << ',';
      std::visit(
          [&os](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>)
              os << format_cell_double(v);
            else
              os << v;
          },
          row[c]);
    }
    os << '\n';
  }
  return os.str();
}

std::string ResultTable::to_json() const {
  nlohmann::json j;
  j["columns"] = columns;
  j["metadata"] = metadata;
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& cell : row)
      std::visit([&r](const auto& v) { r.push_back(v); }, cell);
    rows_json.push_back(std::move(r));
  }
  j["rows"] = std::move(rows_json);
  return j.dump(2);
}

ResultTable run_experiment(const ExperimentSpec& spec) {
  if (spec.id == "e1") return run_e1(spec);
  if (spec.id == "e2") return run_e2(spec);
  if (spec.id == "e3") return run_e3(spec);
  if (spec.id == "e4") return run_e4(spec);
  if (spec.id == "e5") return run_e5(spec);
  if (spec.id == "e6") return run_e6(spec);
  if (spec.id == "e7") return run_e7(spec);
  if (spec.id == "e8") return run_e8(spec);
  if (spec.id == "e9") return run_e9(spec);
  if (spec.id == "e10") return run_e10(spec);
  if (spec.id == "e11") return run_e11(spec);
  if (spec.id == "e12") return run_e12(spec);
  if (spec.id == "e13") return run_comparison(spec, true);
  if (spec.id == "e14") return run_comparison(spec, false);
  if (spec.id == "mvp_cost") return run_mvp_cost(spec);
  if (spec.id == "verify") return run_verify(spec);
  throw std::invalid_argument("unknown experiment id: " + spec.id);
}

void emit(const ResultTable& table, const std::string& format, const std::string& path) {
  std::string payload;
  if (format == "csv")
    payload = table.to_csv();
  else if (format == "json")
    payload = table.to_json();
  else
    throw std::invalid_argument("emit: format must be csv or json");
  if (path.empty() || path == "-") {
    std::cout << payload;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit: cannot open " + path);
  out << payload;
  if (!out) throw std::runtime_error("emit: write failed for " + path);
}

}  // namespace dbf
