#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfsim/engine.hpp"
#include "cfsim/rng.hpp"
#include "cfsim/traffic.hpp"

namespace cfsim::analysis {

// --- analytic queueing oracles ----------------------------------------------

// Slotted M/G/1 mean waiting: lambda E[U^2] / (2 (1 - lambda E[U])) + 1/2.
double mg1_slotted_wait(double lambda, double e_u, double e_u2);

// Discrete-time GI/GI/1 with Bernoulli(delta) arrivals, mean time in system
// measured in frames: (delta E[U^2] - delta E[U]) / (2 (1 - delta E[U])) + E[U].
double gi_g1_wait(double delta, double e_u, double e_u2);

// Bernoulli-arrival FIFO queue simulated directly; returns the mean time in
// system over `arrivals` served customers with deterministic service u.
double bernoulli_fifo_sim(double delta, std::int64_t service, std::int64_t arrivals,
                          std::uint64_t seed);

// Overflow frequency of CAB frames under uniform geometric traffic, by
// direct Monte Carlo on the exact frame-aggregate distribution: the frame's
// coflow count is Poisson(lambda*T) and, given the count, the aggregate
// entries are i.i.d. negative binomials (sampled gamma-Poisson). Identical
// in distribution to the engine's per-frame overflow indicator, at a tiny
// fraction of the cost.
double overflow_frequency_mc(int n, double lambda, double entry_mean, std::int64_t frame_size,
                             std::int64_t frames, std::uint64_t seed);

// --- regression helper --------------------------------------------------------

struct LinFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_se = 0.0;
};

LinFit fit_line(std::span<const double> x, std::span<const double> y);

// --- clearance-time scaling studies -------------------------------------------

enum class ScalingFitKind { MeanVsLogN, LogLog, Constant };

struct ScalingFamily {
  traffic::Placement placement = traffic::Placement::Diagonal;
  traffic::FlowSizeDistribution dist;
};

struct ScalingEstimate {
  std::vector<int> grid;
  std::vector<double> means;
  std::vector<double> std_errors;
  ScalingFitKind fit_kind = ScalingFitKind::MeanVsLogN;
  LinFit fit;
};

// Monte Carlo estimate of E[tau] across the port-count grid, with the fit
// the distribution family calls for: geometric vs log N, power law on the
// log-log axes, deterministic as a constancy check.
ScalingEstimate clearance_scaling(const ScalingFamily& family, std::span<const int> n_grid,
                                  int samples_per_n, RngStream& rng);

// --- experiment harness --------------------------------------------------------

struct NamedPolicy {
  std::string name;
  engine::PolicyConfig config;
};

struct ExperimentPlan {
  enum class GridKind { None, PortCount, OfferedLoad };

  engine::SimConfig base;
  std::vector<NamedPolicy> policies;
  GridKind grid_kind = GridKind::None;
  std::vector<double> grid;  // port counts or offered loads
  int replications = 1;
  int jobs = 0;  // 0: hardware concurrency
};

struct RunResult {
  std::string policy;
  int n = 0;
  double lambda = 0.0;
  double beta = 0.0;
  double rho = 0.0;
  std::uint64_t seed = 0;
  std::int64_t horizon = 0;
  std::int64_t warmup = 0;
  std::optional<std::int64_t> frame_size;
  std::optional<double> gamma;
  std::optional<double> delta;
  std::optional<bool> sctf;
  std::optional<bool> dynamic_frames;
  engine::MetricsRecord metrics;
  std::string status = "ok";
};

RunResult execute_run(const engine::SimConfig& config, const std::string& policy_name);

// Runs every (grid point, policy, seed) combination on a bounded worker
// pool; rows come back in deterministic (grid, policy, seed) order and
// failed runs are recorded with status=error.
std::vector<RunResult> sweep(const ExperimentPlan& plan);

// --- CSV ------------------------------------------------------------------------

std::vector<std::string> csv_header();
std::vector<std::string> csv_fields(const RunResult& r);
std::string csv_line(std::span<const std::string> fields);
void write_csv(std::ostream& os, std::span<const RunResult> results);
std::vector<std::vector<std::string>> read_csv(std::istream& is);

struct DilationRow {
  std::string policy;
  int n = 0;
  double dilation_mean = 0.0;
  double dilation_se = 0.0;
  int replications = 0;
};

// Per (policy, N): mean and standard error of the dilation factor across
// seeds. Throws if any input row lacks packet-delay metrics.
std::vector<DilationRow> dilation_report(std::span<const RunResult> results);
void write_dilation_csv(std::ostream& os, std::span<const DilationRow> rows);

// --- CLI -------------------------------------------------------------------------

int run_cli(int argc, char** argv);

}  // namespace cfsim::analysis
