#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lrsm/bootstrap.hpp"
#include "lrsm/effects.hpp"
#include "lrsm/eigenbasis.hpp"
#include "lrsm/io.hpp"
#include "lrsm/model.hpp"
#include "lrsm/moments.hpp"
#include "lrsm/oracle.hpp"
#include "lrsm/reml.hpp"
#include "lrsm/simharness.hpp"
#include "lrsm/weights.hpp"

namespace {

using namespace lrsm;

// Every pipeline stage runs under a label so failures name where they died.
struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error("[" + stage + "] " + what) {}
};

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

struct FitArgs {
  std::string data_path, response = "y";
  std::string weights_path, coords_path;
  std::string model = "LSLM";
  Index rank = -1;
  double threshold = -1.0;
  Index bootstrap_m = 0;
  std::uint64_t seed = 1;
  std::string out = ".";
  int threads = 1;
  bool abs_eigen = false;
  bool one_based = false;
  bool alt_intercept = false;
};

SpatialWeights load_weights(const FitArgs& a, Index n) {
  if (!a.weights_path.empty())
    return load_edge_list(a.weights_path, a.one_based, n);
  const Matrix coords = read_coords(a.coords_path);
  if (coords.rows() != n)
    throw Error("coordinate count " + std::to_string(coords.rows()) +
                " does not match data rows " + std::to_string(n));
  return build_delaunay_adjacency(coords);
}

int run_fit(const FitArgs& a) {
  const ModelKind kind = kind_from_string(a.model);
  const DesignData data =
      stage("data", [&] { return load_data(a.data_path, a.response); });
  const Index n = data.y.size();

  SpatialWeights w0, w;
  if (kind != ModelKind::LM) {
    w0 = stage("weights", [&] { return load_weights(a, n); });
    w = stage("scale", [&] { return scale_by_max_eigenvalue(w0); });
  }

  EigenOptions eopts;
  if (a.abs_eigen) eopts.ranking = EigenRanking::LargestMagnitude;

  FittedModel fitted;
  EffectsEstimate effects;
  std::optional<double> moran;
  Index basis_l = 0;

  if (kind == ModelKind::LM) {
    fitted = stage("fit", [&] { return fit_ols(data); });
    const Index kc = data.x.cols() - 1;
    effects.de = fitted.beta.segment(1, kc);
    effects.ie = Vector::Zero(kc);
    effects.names.assign(data.names.begin() + 1, data.names.end());
    if (!a.weights_path.empty() || !a.coords_path.empty()) {
      w0 = stage("weights", [&] { return load_weights(a, n); });
      moran = stage("moran",
                    [&] { return moran_z(ols_residuals(fitted, data), w0); });
    }
  } else if (!is_lowrank(kind)) {
    if (kind != ModelKind::SEM && kind != ModelKind::SLM)
      throw StageError("fit", "full-rank fitting supports SEM and SLM only");
    if (a.bootstrap_m > 0)
      throw StageError("bootstrap",
                       "bootstrap intervals apply to low-rank kinds");
    const FullRankFit fr =
        stage("fit", [&] { return fit_fullrank(kind, data, w); });
    fitted.kind = kind;
    fitted.beta = fr.beta;
    fitted.names = fr.names;
    fitted.se_beta = fr.se_beta;
    fitted.sigma2 = fr.sigma2;
    fitted.tau2 = 0.0;
    fitted.loglik_r = fr.loglik;
    if (kind == ModelKind::SLM)
      fitted.theta.rho = fr.theta;
    else
      fitted.theta.phi = fr.theta;
    fitted.diagnostics.converged = true;
    fitted.diagnostics.evaluations = fr.evaluations;
    effects = stage("effects",
                    [&] { return effects_fullrank_table(fitted, w); });
    moran = stage("moran", [&] { return moran_z(fr.residuals, w0); });
  } else {
    EigenBasis basis;
    if (a.threshold >= 0.0) {
      basis = stage("basis", [&] {
        return select_by_threshold(w, a.threshold, eopts);
      });
      if (basis.l() == 0)
        throw StageError("basis", "no eigenvalue passes the threshold " +
                                      format_double(a.threshold));
    } else {
      const Index l =
          a.rank > 0 ? a.rank : std::max<Index>(1, std::min<Index>(200, n / 2));
      basis = stage("basis", [&] {
        const std::uint64_t key = weights_content_hash(w, l);
        char name[64];
        std::snprintf(name, sizeof name, "basis-%016llx.bin",
                      static_cast<unsigned long long>(key));
        const std::string cache_path =
            (std::filesystem::path(a.out) / name).string();
        EigenBasis b;
        if (load_basis(cache_path, key, b)) return b;
        b = top_l_eigenpairs(w, l, eopts);
        save_basis(cache_path, b, key);
        return b;
      });
    }
    basis_l = basis.l();

    const MomentCache cache = stage("moments", [&] {
      return precompute_moments(data, basis, w, kind, a.alt_intercept);
    });
    FitOptions fopts;
    fopts.alt_intercept = a.alt_intercept;
    fopts.threads = a.threads;
    fitted =
        stage("fit", [&] { return fit_cached(cache, basis.lambdas, fopts); });
    effects =
        stage("effects", [&] { return effects_table(fitted, basis, cache); });
    moran = stage("moran", [&] {
      return moran_z(lowrank_residuals(fitted, data, basis, w), w0);
    });

    if (a.bootstrap_m > 0) {
      const BootstrapResult bres = stage("bootstrap", [&] {
        BootstrapOptions bo;
        bo.threads = a.threads;
        return bootstrap_cached(fitted, cache, basis, a.bootstrap_m, a.seed,
                                bo);
      });
      attach_percentile_cis(effects, bres);
      stage("write", [&] {
        atomic_write((std::filesystem::path(a.out) / "bootstrap.csv").string(),
                     bootstrap_csv(fitted, effects, bres));
        return 0;
      });
    }
  }

  stage("write", [&] {
    const std::filesystem::path out(a.out);
    atomic_write((out / "fit.json").string(),
                 fit_report_json(fitted, &effects,
                                 moran ? &*moran : nullptr, n, basis_l));
    atomic_write((out / "effects.csv").string(), effects_csv(effects));
    return 0;
  });
  std::cout << "fit written to " << a.out << "/fit.json" << std::endl;
  return 0;
}

struct SimulateArgs {
  std::string scenario_path;
  std::string out = ".";
  int threads = 1;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int run_simulate(const SimulateArgs& a) {
  std::vector<Scenario> scenarios =
      stage("scenario", [&] { return load_scenarios(a.scenario_path); });
  if (a.seed_given)
    for (auto& sc : scenarios) sc.seed = a.seed;

  SimulationReport all;
  for (const auto& sc : scenarios) {
    const SimulationReport rep =
        stage("simulate", [&] { return run_monte_carlo(sc, a.threads); });
    all.rows.insert(all.rows.end(), rep.rows.begin(), rep.rows.end());
    all.seconds_generate += rep.seconds_generate;
    all.seconds_fit += rep.seconds_fit;
    all.seconds_bootstrap += rep.seconds_bootstrap;
  }
  stage("write", [&] {
    atomic_write(
        (std::filesystem::path(a.out) / "simulation.csv").string(),
        simulation_csv(all));
    return 0;
  });
  std::cout << "generate " << all.seconds_generate << "s, fit "
            << all.seconds_fit << "s, bootstrap " << all.seconds_bootstrap
            << "s; report written to " << a.out << "/simulation.csv"
            << std::endl;

  for (const auto& row : all.rows)
    if (row.target == "beta1" && row.n_fail >= 1 &&
        std::isnan(row.bias)) {
      std::cerr << "error [simulate]: " << row.scenario_id << " "
                << row.estimator << " failed in every replicate" << std::endl;
      return 1;
    }
  return 0;
}

struct BenchArgs {
  std::vector<Index> sizes{1000, 2000};
  std::vector<Index> ls{50};
  Index bootstrap_m = 0;
  int repeats = 30;
  std::uint64_t seed = 7;
  std::string out = ".";
  int threads = 1;
};

int run_bench(const BenchArgs& a) {
  BenchmarkOptions opts;
  opts.bootstrap_m = a.bootstrap_m;
  opts.estimation_repeats = a.repeats;
  opts.seed = a.seed;
  opts.threads = a.threads;
  const auto rows =
      stage("bench", [&] { return run_benchmark(a.sizes, a.ls, opts); });
  stage("write", [&] {
    atomic_write((std::filesystem::path(a.out) / "benchmark.csv").string(),
                 benchmark_csv(rows));
    return 0;
  });
  std::cout << "benchmark written to " << a.out << "/benchmark.csv"
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"low-rank spatial econometric models"};
  app.require_subcommand(1);

  FitArgs fa;
  CLI::App* fit = app.add_subcommand("fit", "fit one model to a dataset");
  fit->add_option("--data", fa.data_path, "observation CSV")->required();
  fit->add_option("--response", fa.response, "response column name");
  auto* w_opt =
      fit->add_option("--weights", fa.weights_path, "edge-list file");
  auto* c_opt =
      fit->add_option("--coords", fa.coords_path, "coordinate CSV");
  w_opt->excludes(c_opt);
  fit->add_option("--model", fa.model, "LM, LSEM, LSLM, LSDM, LSAC, SEM, SLM");
  auto* rank_opt = fit->add_option("--rank", fa.rank, "basis rank L");
  auto* thr_opt =
      fit->add_option("--threshold", fa.threshold, "eigenvalue threshold");
  rank_opt->excludes(thr_opt);
  thr_opt->excludes(rank_opt);
  fit->add_option("--bootstrap", fa.bootstrap_m, "bootstrap replicates");
  fit->add_option("--seed", fa.seed, "root random seed");
  fit->add_option("--out", fa.out, "output directory")->envname("LRSM_OUT");
  fit->add_option("--threads", fa.threads, "worker threads")
      ->envname("LRSM_THREADS");
  fit->add_flag("--abs-eigen", fa.abs_eigen,
                "rank eigenpairs by |lambda| instead of lambda");
  fit->add_flag("--one-based", fa.one_based, "edge list uses 1-based ids");
  fit->add_flag("--alt-intercept", fa.alt_intercept,
                "route the intercept through the spillover transform");

  SimulateArgs sa;
  CLI::App* sim = app.add_subcommand("simulate", "run a Monte Carlo scenario file");
  sim->add_option("scenario", sa.scenario_path, "scenario config")->required();
  sim->add_option("--out", sa.out, "output directory")->envname("LRSM_OUT");
  sim->add_option("--threads", sa.threads, "worker threads")
      ->envname("LRSM_THREADS");
  auto* sim_seed = sim->add_option("--seed", sa.seed, "override scenario seeds");

  BenchArgs ba;
  CLI::App* bench = app.add_subcommand("bench", "time the pipeline phases");
  bench->add_option("--sizes", ba.sizes, "sample sizes")->delimiter(',');
  bench->add_option("--ls", ba.ls, "basis ranks")->delimiter(',');
  bench->add_option("--bootstrap", ba.bootstrap_m, "bootstrap replicates");
  bench->add_option("--repeats", ba.repeats, "estimation repeats per cell");
  bench->add_option("--seed", ba.seed, "root random seed");
  bench->add_option("--out", ba.out, "output directory")->envname("LRSM_OUT");
  bench->add_option("--threads", ba.threads, "worker threads")
      ->envname("LRSM_THREADS");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) {
      if (kind_from_string(fa.model) != ModelKind::LM &&
          fa.weights_path.empty() && fa.coords_path.empty())
        throw StageError("weights",
                         "exactly one of --weights or --coords is required");
      return run_fit(fa);
    }
    if (sim->parsed()) {
      sa.seed_given = sim_seed->count() > 0;
      return run_simulate(sa);
    }
    if (bench->parsed()) return run_bench(ba);
  } catch (const std::exception& e) {
    std::cerr << "error " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
