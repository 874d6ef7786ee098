#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrsm/common.hpp"
#include "lrsm/model.hpp"
#include "lrsm/weights.hpp"

namespace lrsm {

// The two synthetic processes: a spatial-lag response with additive white
// noise, and a spatially autocorrelated-error response with additive white
// noise. Both draw unit coordinates as standard-normal pairs and build W by
// Delaunay adjacency with symmetric degree normalization followed by
// max-eigenvalue scaling.
enum class DgpKind { LagNoise, ErrorNoise };

struct EstimatorSpec {
  ModelKind kind = ModelKind::LM;
  Index l = 0;  // basis rank; meaningful for low-rank kinds only

  std::string label() const;
};

// One simulation study: a (dependence × tau2) grid sharing n, coefficients,
// replication count, estimator list, and seed. Replicate r of every cell
// shares the same coordinate/covariate/innovation draws (common random
// numbers), so cells differ only through the parameters.
struct Scenario {
  std::string id = "scenario";
  DgpKind dgp = DgpKind::LagNoise;
  Index n = 200;
  double beta0 = 1.0, beta1 = 2.0, beta2 = 0.5;
  std::vector<double> dependence{0.6};
  std::vector<double> tau2{0.0};
  Index replications = 100;
  std::vector<EstimatorSpec> estimators;
  std::uint64_t seed = 1;
  Index bootstrap_m = 0;  // when > 0, low-rank estimators also bootstrap
  double level = 0.95;
};

void validate_scenario(const Scenario& sc);

// Declarative scenario text: `key = value` lines with #-comments; values are
// numbers, booleans, "strings", or [arrays]. A `[name]` line opens a new
// scenario inheriting every key seen before the first section.
std::vector<Scenario> parse_scenarios(const std::string& text,
                                      const std::string& source_name);
std::vector<Scenario> load_scenarios(const std::string& path);

// One replicate's synthetic data, deterministic in (scenario, cell, r).
struct DgpDraw {
  Matrix coords;      // n×2
  SpatialWeights w0;  // raw binary Delaunay adjacency
  SpatialWeights w;   // normalized and scaled
  DesignData data;
};

DgpDraw generate_dgp(const Scenario& sc, double dependence, double tau2,
                     Index replicate_index);

struct SimulationRow {
  std::string scenario_id;  // id plus the grid-cell suffix
  std::string estimator;
  Index l = 0;
  std::string target;
  double rmse = 0.0, bias = 0.0;
  Index n_fail = 0;
};

struct SimulationReport {
  std::vector<SimulationRow> rows;
  double seconds_generate = 0.0;  // DGP + eigendecomposition
  double seconds_fit = 0.0;
  double seconds_bootstrap = 0.0;
};

SimulationReport run_monte_carlo(const Scenario& sc, int threads = 1);

std::string simulation_csv(const SimulationReport& report);

struct BenchmarkRow {
  Index n = 0, l = 0;
  double seconds_eigen = 0.0;
  double seconds_precompute = 0.0;
  double seconds_estimation = 0.0;  // summed over estimation_repeats fits
  int estimation_repeats = 0;
  double seconds_bootstrap = 0.0;   // -1 when not run
  std::string status;               // "ok" or the failure reason
};

struct BenchmarkOptions {
  Index bootstrap_m = 0;
  int estimation_repeats = 30;
  std::uint64_t seed = 7;
  int threads = 1;
};

// Times the pipeline phases per (n, L) on synthetic lag-noise data; sizes
// above the exact-solve guard draw the response from the low-rank model
// itself.
std::vector<BenchmarkRow> run_benchmark(const std::vector<Index>& sizes,
                                        const std::vector<Index>& ls,
                                        const BenchmarkOptions& opts = {});

std::string benchmark_csv(const std::vector<BenchmarkRow>& rows);

}  // namespace lrsm
