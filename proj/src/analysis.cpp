#include "cfsim/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "CLI11.hpp"

namespace cfsim::analysis {

double mg1_slotted_wait(double lambda, double e_u, double e_u2) {
  if (lambda < 0 || e_u < 0 || e_u2 < 0)
    throw std::invalid_argument("mg1_slotted_wait: negative argument");
  if (lambda * e_u >= 1.0) throw std::domain_error("mg1_slotted_wait: lambda E[U] >= 1 (unstable)");
  return lambda * e_u2 / (2.0 * (1.0 - lambda * e_u)) + 0.5;
}

double gi_g1_wait(double delta, double e_u, double e_u2) {
  if (delta < 0 || e_u < 0 || e_u2 < 0) throw std::invalid_argument("gi_g1_wait: negative argument");
  if (delta * e_u >= 1.0) throw std::domain_error("gi_g1_wait: delta E[U] >= 1 (unstable)");
  return (delta * e_u2 - delta * e_u) / (2.0 * (1.0 - delta * e_u)) + e_u;
}

double bernoulli_fifo_sim(double delta, std::int64_t service, std::int64_t arrivals,
                          std::uint64_t seed) {
  RngStream rng(seed, 17);
  std::int64_t workload = 0;  // slots of unfinished work at the start of a slot
  std::int64_t served = 0;
  double total = 0.0;
  while (served < arrivals) {
    if (rng.uniform01() < delta) {
      total += static_cast<double>(workload + service);
      workload += service;
      ++served;
    }
    if (workload > 0) --workload;
  }
  return total / static_cast<double>(arrivals);
}

double overflow_frequency_mc(int n, double lambda, double entry_mean, std::int64_t frame_size,
                             std::int64_t frames, std::uint64_t seed) {
  if (n < 1 || lambda < 0 || entry_mean <= 0 || frame_size < 2 || frames < 1)
    throw std::invalid_argument("overflow_frequency_mc: bad arguments");
  RngStream rng(seed, 11);
  const double t = static_cast<double>(frame_size);
  std::vector<std::int64_t> row_load(n), col_load(n);
  std::int64_t overflows = 0;

  for (std::int64_t f = 0; f < frames; ++f) {
    const std::int64_t m = sample_poisson_any(lambda * t, rng);
    if (m == 0) continue;
    // Aggregate entries are i.i.d. NB(m, p), sampled through the
    // gamma-Poisson mixture: E_ij ~ Poisson(Gamma(m, scale entry_mean)).
    std::fill(row_load.begin(), row_load.end(), 0);
    std::fill(col_load.begin(), col_load.end(), 0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double g = sample_gamma(static_cast<double>(m), rng) * entry_mean;
        const std::int64_t e = sample_poisson_any(g, rng);
        row_load[i] += e;
        col_load[j] += e;
      }
    for (int i = 0; i < n; ++i)
      if (row_load[i] >= frame_size || col_load[i] >= frame_size) {  // tau(L) > T-1
        ++overflows;
        break;
      }
  }
  return static_cast<double>(overflows) / static_cast<double>(frames);
}

LinFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need >= 2 paired samples");
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  const double denom = m * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_line: degenerate x values");
  LinFit fit;
  fit.slope = (m * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / m;
  double ss_res = 0.0, ss_tot = 0.0;
  const double ybar = sy / m;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double pred = fit.intercept + fit.slope * x[k];
    ss_res += (y[k] - pred) * (y[k] - pred);
    ss_tot += (y[k] - ybar) * (y[k] - ybar);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  if (x.size() > 2) {
    const double var_e = ss_res / (m - 2.0);
    fit.slope_se = std::sqrt(var_e / (sxx - sx * sx / m));
  }
  return fit;
}

ScalingEstimate clearance_scaling(const ScalingFamily& family, std::span<const int> n_grid,
                                  int samples_per_n, RngStream& rng) {
  if (n_grid.size() < 3) throw std::invalid_argument("clearance_scaling: need >= 3 grid points");
  if (samples_per_n < 1000)
    throw std::invalid_argument("clearance_scaling: need >= 1000 samples per point");

  ScalingEstimate est;
  for (int n : n_grid) {
    traffic::CoflowModel model;
    model.n = n;
    model.lambda = 0.0;
    model.placement = family.placement;
    model.flow_sizes = family.dist;
    model.beta = family.dist.mean();
    double sum = 0.0, sumsq = 0.0;
    for (int s = 0; s < samples_per_n; ++s) {
      auto demand = traffic::sample_demand_sparse(model, rng);
      const double tau = static_cast<double>(demand.clearance());
      sum += tau;
      sumsq += tau * tau;
    }
    const double mean = sum / samples_per_n;
    const double var = std::max(0.0, sumsq / samples_per_n - mean * mean);
    est.grid.push_back(n);
    est.means.push_back(mean);
    est.std_errors.push_back(std::sqrt(var / samples_per_n));
  }

  using Kind = traffic::FlowSizeDistribution::Kind;
  std::vector<double> xs, ys;
  switch (family.dist.kind) {
    case Kind::PowerLaw:
      est.fit_kind = ScalingFitKind::LogLog;
      for (std::size_t k = 0; k < est.grid.size(); ++k) {
        xs.push_back(std::log(static_cast<double>(est.grid[k])));
        ys.push_back(std::log(est.means[k]));
      }
      break;
    case Kind::Geometric:
      est.fit_kind = ScalingFitKind::MeanVsLogN;
      for (std::size_t k = 0; k < est.grid.size(); ++k) {
        xs.push_back(std::log(static_cast<double>(est.grid[k])));
        ys.push_back(est.means[k]);
      }
      break;
    default:
      est.fit_kind = ScalingFitKind::Constant;
      for (std::size_t k = 0; k < est.grid.size(); ++k) {
        xs.push_back(std::log(static_cast<double>(est.grid[k])));
        ys.push_back(est.means[k]);
      }
      break;
  }
  est.fit = fit_line(xs, ys);
  return est;
}

RunResult execute_run(const engine::SimConfig& config, const std::string& policy_name) {
  RunResult r;
  r.policy = policy_name;
  r.n = config.model.n;
  r.lambda = config.model.lambda;
  r.beta = config.model.beta;
  r.rho = config.model.rho();
  r.seed = config.seed;
  r.horizon = config.horizon_slots;
  r.warmup = config.warmup_slots;
  if (config.policy.kind == engine::PolicyConfig::Kind::Cab) {
    r.sctf = config.policy.cab_sctf;
    r.dynamic_frames = config.policy.cab_dynamic_frames;
  }
  try {
    engine::Simulation sim(config);
    r.metrics = sim.run();
    r.status = r.metrics.status;
    if (config.policy.kind == engine::PolicyConfig::Kind::Cab) {
      if (sim.tuned_cab()) {
        r.frame_size = sim.tuned_cab()->frame_size;
        r.gamma = sim.tuned_cab()->gamma;
        r.delta = sim.tuned_cab()->delta;
      } else {
        r.frame_size = config.policy.cab_frame_size;
      }
    }
  } catch (const std::exception& e) {
    r.status = std::string("error: ") + e.what();
  }
  return r;
}

std::vector<RunResult> sweep(const ExperimentPlan& plan) {
  if (plan.policies.empty()) throw std::invalid_argument("sweep: no policies");
  if (plan.replications < 1) throw std::invalid_argument("sweep: replications must be >= 1");
  if (plan.grid_kind != ExperimentPlan::GridKind::None && plan.grid.empty())
    throw std::invalid_argument("sweep: empty grid");

  struct RunTask {
    engine::SimConfig config;
    std::string policy;
  };
  std::vector<RunTask> specs;
  const std::vector<double> grid =
      plan.grid_kind == ExperimentPlan::GridKind::None ? std::vector<double>{0.0} : plan.grid;
  for (double g : grid) {
    for (const auto& pol : plan.policies) {
      for (int rep = 0; rep < plan.replications; ++rep) {
        engine::SimConfig cfg = plan.base;
        cfg.policy = pol.config;
        cfg.seed = plan.base.seed + static_cast<std::uint64_t>(rep);
        switch (plan.grid_kind) {
          case ExperimentPlan::GridKind::PortCount:
            cfg.model = traffic::CoflowModel::uniform_geometric(
                static_cast<int>(g), plan.base.model.lambda, plan.base.model.beta);
            break;
          case ExperimentPlan::GridKind::OfferedLoad:
            cfg.model = plan.base.model;
            cfg.model.lambda = g / plan.base.model.beta;
            break;
          case ExperimentPlan::GridKind::None:
            break;
        }
        specs.push_back({std::move(cfg), pol.name});
      }
    }
  }

  std::vector<RunResult> results(specs.size());
  int jobs = plan.jobs > 0 ? plan.jobs
                           : static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(specs.size())));
  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (std::size_t i; (i = cursor.fetch_add(1)) < specs.size();)
      results[i] = execute_run(specs[i].config, specs[i].policy);
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs - 1; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return results;
}

// --- CSV -------------------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_int(std::int64_t v) {
  char buf[24];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_opt_double(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}

std::string fmt_opt_bool(const std::optional<bool>& v) {
  return v ? std::string(*v ? "1" : "0") : std::string();
}

}  // namespace

std::vector<std::string> csv_header() {
  return {"policy", "n",      "lambda",   "beta",
          "rho",    "seed",   "horizon",  "warmup",
          "frame_size", "gamma", "delta", "sctf",
          "dynamic_frames", "completed", "mean_coflow_delay", "p999_coflow_delay",
          "mean_packet_delay", "dilation", "eta", "overflow_freq",
          "stable", "status"};
}

std::vector<std::string> csv_fields(const RunResult& r) {
  const auto& m = r.metrics;
  const bool have = m.completed_coflows > 0;
  std::string p999;
  if (auto it = m.coflow_delay_percentiles.find(0.999); it != m.coflow_delay_percentiles.end())
    p999 = fmt_int(it->second);
  return {
      r.policy,
      fmt_int(r.n),
      fmt_double(r.lambda),
      fmt_double(r.beta),
      fmt_double(r.rho),
      fmt_int(static_cast<std::int64_t>(r.seed)),
      fmt_int(r.horizon),
      fmt_int(r.warmup),
      r.frame_size ? fmt_int(*r.frame_size) : std::string(),
      fmt_opt_double(r.gamma),
      fmt_opt_double(r.delta),
      fmt_opt_bool(r.sctf),
      fmt_opt_bool(r.dynamic_frames),
      fmt_int(m.completed_coflows),
      have ? fmt_double(m.mean_coflow_delay) : std::string(),
      p999,
      have && m.mean_packet_delay > 0 ? fmt_double(m.mean_packet_delay) : std::string(),
      have && m.dilation_factor > 0 ? fmt_double(m.dilation_factor) : std::string(),
      fmt_opt_double(m.eta_nonconforming),
      fmt_opt_double(m.overflow_frequency),
      fmt_opt_bool(m.stable),
      r.status,
  };
}

std::string csv_line(std::span<const std::string> fields) {
  std::string out;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) out.push_back(',');
    const std::string& f = fields[k];
    if (f.find_first_of(",\"\n") != std::string::npos) {
      out.push_back('"');
      for (char c : f) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
      }
      out.push_back('"');
    } else {
      out += f;
    }
  }
  return out;
}

void write_csv(std::ostream& os, std::span<const RunResult> results) {
  os << csv_line(csv_header()) << '\n';
  for (const auto& r : results) os << csv_line(csv_fields(r)) << '\n';
}

std::vector<std::vector<std::string>> read_csv(std::istream& is) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    for (std::size_t k = 0; k <= line.size(); ++k) {
      if (k == line.size()) {
        row.push_back(cell);
        break;
      }
      char c = line[k];
      if (quoted) {
        if (c == '"') {
          if (k + 1 < line.size() && line[k + 1] == '"') {
            cell.push_back('"');
            ++k;
          } else {
            quoted = false;
          }
        } else {
          cell.push_back(c);
        }
      } else if (c == '"' && cell.empty()) {
        quoted = true;
      } else if (c == ',') {
        row.push_back(cell);
        cell.clear();
      } else {
        cell.push_back(c);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<DilationRow> dilation_report(std::span<const RunResult> results) {
  struct Key {
    std::string policy;
    int n;
    bool operator<(const Key& o) const {
      if (policy != o.policy) return policy < o.policy;
      return n < o.n;
    }
  };
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : results) {
    if (r.status != "ok") continue;
    if (!(r.metrics.mean_packet_delay > 0.0) || !(r.metrics.dilation_factor > 0.0))
      throw std::invalid_argument("dilation_report: run lacks packet-delay metrics");
    groups[{r.policy, r.n}].push_back(r.metrics.dilation_factor);
  }
  std::vector<DilationRow> out;
  for (const auto& [key, vals] : groups) {
    double sum = 0.0, sumsq = 0.0;
    for (double v : vals) {
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / vals.size();
    const double var = std::max(0.0, sumsq / vals.size() - mean * mean);
    DilationRow row;
    row.policy = key.policy;
    row.n = key.n;
    row.dilation_mean = mean;
    row.dilation_se = vals.size() > 1 ? std::sqrt(var / (vals.size() - 1.0)) : 0.0;
    row.replications = static_cast<int>(vals.size());
    out.push_back(std::move(row));
  }
  return out;
}

void write_dilation_csv(std::ostream& os, std::span<const DilationRow> rows) {
  os << "policy,n,dilation_mean,dilation_se,replications\n";
  for (const auto& r : rows)
    os << r.policy << ',' << r.n << ',' << fmt_double(r.dilation_mean) << ','
       << fmt_double(r.dilation_se) << ',' << r.replications << '\n';
}

// --- CLI ---------------------------------------------------------------------------

namespace {

struct CliOptions {
  int n = 16;
  double lambda = 0.3;
  double beta = 2.5;
  std::string policy = "cab";
  std::int64_t horizon = 1000000;
  std::int64_t warmup = -1;  // -1: 10% of horizon
  std::uint64_t seed = 1;
  std::string out;
  std::string placement = "uniform";
  std::string dist = "geometric";
  std::int64_t det_value = 1;
  double epsilon = 1.0;
  std::int64_t frame_size = 0;  // 0: auto-tune
  bool sctf = false;
  bool dynamic_frames = false;
  bool allow_unstable = false;
  bool check_invariants = false;
  int jobs = 0;
  int reps = 1;
  std::string grid;
  std::string policies;
  std::string family = "geometric";
  int samples = 10000;
  std::string percentiles = "0.999";
  bool no_dilation = false;
};

// key = value lines with '#' comments; nesting via dotted keys (cab.sctf).
void apply_config_file(const std::string& path, CliOptions& o) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  auto trim = [](std::string v) {
    const char* ws = " \t\r";
    auto b = v.find_first_not_of(ws);
    auto e = v.find_last_not_of(ws);
    return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
  };
  auto as_bool = [](const std::string& v) {
    return v == "1" || v == "true" || v == "yes" || v == "on";
  };
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;  // sections are decorative
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "n") o.n = std::stoi(val);
    else if (key == "lambda") o.lambda = std::stod(val);
    else if (key == "beta") o.beta = std::stod(val);
    else if (key == "policy") o.policy = val;
    else if (key == "horizon") o.horizon = std::stoll(val);
    else if (key == "warmup") o.warmup = std::stoll(val);
    else if (key == "seed") o.seed = std::stoull(val);
    else if (key == "out") o.out = val;
    else if (key == "placement") o.placement = val;
    else if (key == "dist") o.dist = val;
    else if (key == "value") o.det_value = std::stoll(val);
    else if (key == "epsilon") o.epsilon = std::stod(val);
    else if (key == "frame_size" || key == "cab.frame_size") o.frame_size = std::stoll(val);
    else if (key == "sctf" || key == "cab.sctf") o.sctf = as_bool(val);
    else if (key == "dynamic_frames" || key == "cab.dynamic_frames") o.dynamic_frames = as_bool(val);
    else if (key == "allow_unstable") o.allow_unstable = as_bool(val);
    else if (key == "check_invariants") o.check_invariants = as_bool(val);
    else if (key == "jobs") o.jobs = std::stoi(val);
    else if (key == "reps") o.reps = std::stoi(val);
    else if (key == "grid") o.grid = val;
    else if (key == "policies") o.policies = val;
    else if (key == "family") o.family = val;
    else if (key == "samples") o.samples = std::stoi(val);
    else if (key == "percentiles") o.percentiles = val;
    else if (key == "dilation") o.no_dilation = !as_bool(val);
    else
      throw CLI::ValidationError("config line " + std::to_string(lineno) + ": unknown key '" +
                                 key + "'");
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

traffic::CoflowModel model_from(const CliOptions& o) {
  traffic::FlowSizeDistribution dist;
  if (o.dist == "geometric") {
    // handled by the factories below
  } else if (o.dist == "deterministic") {
    dist = traffic::FlowSizeDistribution::deterministic(o.det_value);
  } else if (o.dist == "powerlaw") {
    dist = traffic::FlowSizeDistribution::power_law(o.epsilon);
  } else if (o.dist == "zero") {
    dist = traffic::FlowSizeDistribution::zero();
  } else {
    throw CLI::ValidationError("--dist must be geometric|deterministic|powerlaw|zero");
  }

  if (o.placement == "uniform") {
    if (o.dist == "geometric") return traffic::CoflowModel::uniform_geometric(o.n, o.lambda, o.beta);
    traffic::CoflowModel m;
    m.n = o.n;
    m.lambda = o.lambda;
    m.placement = traffic::Placement::UniformDense;
    m.flow_sizes = dist;
    m.beta = dist.mean() * o.n;
    return m;
  }
  if (o.placement == "diagonal") {
    if (o.dist == "geometric") dist = traffic::FlowSizeDistribution::geometric(o.beta);
    return traffic::CoflowModel::diagonal(o.n, o.lambda, dist);
  }
  throw CLI::ValidationError("--placement must be uniform|diagonal");
}

engine::PolicyConfig policy_from(const CliOptions& o, const std::string& name) {
  if (name == "randomized") return engine::PolicyConfig::randomized();
  if (name == "periodic") return engine::PolicyConfig::periodic();
  if (name == "mwm") return engine::PolicyConfig::mwm();
  if (name == "cab")
    return engine::PolicyConfig::cab(
        o.frame_size > 0 ? std::optional<std::int64_t>(o.frame_size) : std::nullopt, o.sctf,
        o.dynamic_frames);
  throw CLI::ValidationError("--policy must be randomized|periodic|mwm|cab");
}

engine::SimConfig config_from(const CliOptions& o) {
  engine::SimConfig cfg;
  cfg.model = model_from(o);
  cfg.policy = policy_from(o, o.policy);
  cfg.horizon_slots = o.horizon;
  cfg.warmup_slots = o.warmup >= 0 ? o.warmup : o.horizon / 10;
  cfg.seed = o.seed;
  cfg.stationary_metrics = !o.allow_unstable;
  cfg.metrics.check_invariants = o.check_invariants;
  cfg.metrics.dilation = !o.no_dilation;
  cfg.metrics.percentiles.clear();
  for (const auto& tok : split_list(o.percentiles))
    cfg.metrics.percentiles.push_back(std::stod(tok));
  if (cfg.metrics.percentiles.empty()) cfg.metrics.percentiles.push_back(0.999);
  return cfg;
}

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot open output file: " + path);
  return file;
}

int cmd_simulate(const CliOptions& o) {
  auto result = execute_run(config_from(o), o.policy);
  std::ofstream file;
  std::ostream& os = open_output(o.out, file);
  write_csv(os, std::span<const RunResult>(&result, 1));
  if (result.status.rfind("error", 0) == 0) return 2;
  return 0;
}

int cmd_sweep(const CliOptions& o, ExperimentPlan::GridKind kind) {
  ExperimentPlan plan;
  plan.base = config_from(o);
  plan.grid_kind = kind;
  for (const auto& tok : split_list(o.grid)) plan.grid.push_back(std::stod(tok));
  if (plan.grid.empty()) throw CLI::ValidationError("--grid is required (comma-separated)");
  auto names = split_list(o.policies.empty() ? o.policy : o.policies);
  for (const auto& name : names) plan.policies.push_back({name, policy_from(o, name)});
  plan.replications = o.reps;
  plan.jobs = o.jobs;
  auto results = sweep(plan);
  std::ofstream file;
  std::ostream& os = open_output(o.out, file);
  write_csv(os, results);
  return 0;
}

int cmd_tune(const CliOptions& o) {
  auto model = model_from(o);
  auto mgf = tuning::mgf_for_model(model);
  const double gamma = tuning::compute_gamma(model.lambda, mgf);
  auto params = tuning::solve_delta_t(gamma, model.n, model.rho());
  const double lhs = params.delta * model.n * static_cast<double>(params.frame_size) *
                     (model.rho() + 1.0) *
                     (1.0 + static_cast<double>(model.n) * static_cast<double>(params.frame_size));
  std::cout << "n=" << model.n << " lambda=" << fmt_double(model.lambda)
            << " beta=" << fmt_double(model.beta) << " rho=" << fmt_double(model.rho()) << "\n"
            << "gamma=" << fmt_double(params.gamma) << "\n"
            << "delta=" << fmt_double(params.delta) << "\n"
            << "T=" << params.frame_size << "\n"
            << "residual=" << fmt_double(std::abs(lhs - 0.5)) << "\n"
            << "overflow_bound=" << fmt_double(tuning::overflow_bound(
                   model.n, params.gamma, static_cast<double>(params.frame_size)))
            << "\n";
  return 0;
}

int cmd_scaling(const CliOptions& o) {
  ScalingFamily family;
  family.placement = traffic::Placement::Diagonal;
  if (o.family == "geometric") {
    family.dist = traffic::FlowSizeDistribution::geometric(o.beta);
  } else if (o.family == "powerlaw") {
    family.dist = traffic::FlowSizeDistribution::power_law(o.epsilon);
  } else if (o.family == "deterministic") {
    family.dist = traffic::FlowSizeDistribution::deterministic(o.det_value);
  } else {
    throw CLI::ValidationError("--family must be geometric|powerlaw|deterministic");
  }
  std::vector<int> grid;
  for (const auto& tok : split_list(o.grid.empty() ? "8,16,32,64,128,256" : o.grid))
    grid.push_back(std::stoi(tok));
  RngStream rng(o.seed, 3);
  auto est = clearance_scaling(family, grid, o.samples, rng);
  std::ofstream file;
  std::ostream& os = open_output(o.out, file);
  os << "n,mean_tau,std_error\n";
  for (std::size_t k = 0; k < est.grid.size(); ++k)
    os << est.grid[k] << ',' << fmt_double(est.means[k]) << ',' << fmt_double(est.std_errors[k])
       << '\n';
  const char* kind = est.fit_kind == ScalingFitKind::LogLog
                         ? "log(mean) vs log(n)"
                         : (est.fit_kind == ScalingFitKind::MeanVsLogN ? "mean vs log(n)"
                                                                       : "constancy");
  os << "# fit: " << kind << " slope=" << fmt_double(est.fit.slope)
     << " intercept=" << fmt_double(est.fit.intercept) << " r2=" << fmt_double(est.fit.r2)
     << " slope_se=" << fmt_double(est.fit.slope_se) << '\n';
  return 0;
}

int cmd_oracle_check(const CliOptions& o) {
  int failures = 0;

  // Slotted M/G/1 vs the engine's per-VOQ batch waiting under periodic scheduling.
  CliOptions sim = o;
  sim.policy = "periodic";
  auto cfg = config_from(sim);
  engine::Simulation s(cfg);
  auto rec = s.run();
  const double m = sim.beta / sim.n;
  const double sigma2 = sim.beta * (1.0 + m);
  const double e_u2 = sim.n * sigma2 + sim.beta * sim.beta;
  const double predicted = mg1_slotted_wait(sim.lambda, sim.beta, e_u2);
  if (!rec.mg1_batch_wait) throw std::runtime_error("oracle-check: probe produced no samples");
  const double rel = std::abs(*rec.mg1_batch_wait - predicted) / predicted;
  std::cout << "mg1: simulated=" << fmt_double(*rec.mg1_batch_wait)
            << " predicted=" << fmt_double(predicted) << " rel_err=" << fmt_double(rel)
            << (rel <= 0.05 ? " ok" : " FAIL") << "\n";
  if (rel > 0.05) ++failures;

  // GI/GI/1 formula vs a direct Bernoulli FIFO simulation.
  const double delta = 0.1;
  const std::int64_t u = 3;
  const double formula = gi_g1_wait(delta, static_cast<double>(u), static_cast<double>(u * u));
  const double simulated = bernoulli_fifo_sim(delta, u, 200000, o.seed);
  const double rel2 = std::abs(simulated - formula) / formula;
  std::cout << "gi_g1: simulated=" << fmt_double(simulated) << " predicted=" << fmt_double(formula)
            << " rel_err=" << fmt_double(rel2) << (rel2 <= 0.03 ? " ok" : " FAIL") << "\n";
  if (rel2 > 0.03) ++failures;
  return failures == 0 ? 0 : 2;
}

void add_common_options(CLI::App* cmd, CliOptions& o, std::string& config_path) {
  cmd->add_option("--config", config_path, "Read options from a key=value config file");
  cmd->add_option("--n", o.n, "Switch port count");
  cmd->add_option("--lambda", o.lambda, "Coflow arrival rate per slot");
  cmd->add_option("--beta", o.beta, "Per-port mean load");
  cmd->add_option("--policy", o.policy, "randomized|periodic|mwm|cab")
      ->check(CLI::IsMember({"randomized", "periodic", "mwm", "cab"}));
  cmd->add_option("--horizon", o.horizon, "Simulation length in slots");
  cmd->add_option("--warmup", o.warmup, "Warmup slots (-1: 10% of horizon)");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--out", o.out, "Output file (default stdout)");
  cmd->add_option("--placement", o.placement, "uniform|diagonal")
      ->check(CLI::IsMember({"uniform", "diagonal"}));
  cmd->add_option("--dist", o.dist, "geometric|deterministic|powerlaw|zero")
      ->check(CLI::IsMember({"geometric", "deterministic", "powerlaw", "zero"}));
  cmd->add_option("--value", o.det_value, "Deterministic flow size");
  cmd->add_option("--epsilon", o.epsilon, "Power-law tail exponent parameter");
  cmd->add_option("--frame-size", o.frame_size, "CAB frame size (0: auto-tune)");
  cmd->add_flag("--sctf", o.sctf, "CAB: shortest-clearance-time-first packet choice");
  cmd->add_flag("--dynamic-frames", o.dynamic_frames, "CAB: start new frames early when idle");
  cmd->add_flag("--allow-unstable", o.allow_unstable, "Permit rho >= 1 (no stationary metrics)");
  cmd->add_option("--percentiles", o.percentiles, "Coflow delay percentiles to record");
  cmd->add_flag("--no-dilation", o.no_dilation, "Skip the dilation factor");
  cmd->add_flag("--check-invariants", o.check_invariants, "Verify packet conservation");
  cmd->add_option("--jobs", o.jobs, "Worker threads for sweeps (0: all cores)");
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"coflowsim: coflow scheduling simulator for an NxN input-queued switch"};
  app.require_subcommand(1);
  CliOptions o;
  std::string config_path;

  auto* sim = app.add_subcommand("simulate", "Run one simulation and print a CSV row");
  add_common_options(sim, o, config_path);

  auto* sweep_n = app.add_subcommand("sweep-n", "Sweep the port count grid");
  add_common_options(sweep_n, o, config_path);
  sweep_n->add_option("--grid", o.grid, "Comma-separated port counts")->required();
  sweep_n->add_option("--policies", o.policies, "Comma-separated policy names");
  sweep_n->add_option("--reps", o.reps, "Seeds per grid point");

  auto* sweep_rho = app.add_subcommand("sweep-rho", "Sweep the offered load grid");
  add_common_options(sweep_rho, o, config_path);
  sweep_rho->add_option("--grid", o.grid, "Comma-separated offered loads")->required();
  sweep_rho->add_option("--policies", o.policies, "Comma-separated policy names");
  sweep_rho->add_option("--reps", o.reps, "Seeds per grid point");

  auto* tune = app.add_subcommand("tune", "Print tuned CAB parameters (gamma, delta, T)");
  add_common_options(tune, o, config_path);

  auto* scaling = app.add_subcommand("scaling", "Monte Carlo clearance-time scaling study");
  add_common_options(scaling, o, config_path);
  scaling->add_option("--family", o.family, "geometric|powerlaw|deterministic")
      ->check(CLI::IsMember({"geometric", "powerlaw", "deterministic"}));
  scaling->add_option("--grid", o.grid, "Comma-separated port counts");
  scaling->add_option("--samples", o.samples, "Samples per grid point");

  auto* oracle = app.add_subcommand("oracle-check", "Compare simulator against queueing formulas");
  add_common_options(oracle, o, config_path);

  try {
    app.parse(argc, argv);
    if (!config_path.empty()) {
      // Config supplies defaults; explicit flags take precedence, so apply
      // the file and re-parse the command line on top of it.
      apply_config_file(config_path, o);
      app.clear();
      app.parse(argc, argv);
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(o);
    if (sweep_n->parsed()) return cmd_sweep(o, ExperimentPlan::GridKind::PortCount);
    if (sweep_rho->parsed()) return cmd_sweep(o, ExperimentPlan::GridKind::OfferedLoad);
    if (tune->parsed()) return cmd_tune(o);
    if (scaling->parsed()) return cmd_scaling(o);
    if (oracle->parsed()) return cmd_oracle_check(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace cfsim::analysis
