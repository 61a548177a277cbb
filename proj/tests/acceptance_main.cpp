// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Exit code is the number of
// failed criteria. Pass "--only 1,4,9" to run a subset.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cfsim/analysis.hpp"
#include "cfsim/engine.hpp"
#include "cfsim/matching.hpp"
#include "cfsim/tuning.hpp"
#include "oracles.hpp"

using namespace cfsim;

namespace {

struct CabEvidence {
  std::string label;
  std::int64_t frame_size = 0;
  std::int64_t classified = 0;
  std::int64_t violations = 0;
  std::int64_t max_conforming_delay = 0;
};

std::vector<CabEvidence> g_cab_evidence;

struct CabRunOutcome {
  engine::MetricsRecord metrics;
  std::optional<tuning::CabParameters> tuned;
  CabEvidence evidence;
};

CabRunOutcome run_cab_instrumented(const engine::SimConfig& config, const std::string& label) {
  engine::Simulation sim(config);
  CabRunOutcome out;
  out.metrics = sim.run();
  out.tuned = sim.tuned_cab();
  auto& cab = dynamic_cast<sched::CabScheduler&>(sim.policy());
  out.evidence = {label, cab.frame_size(), cab.coflows_classified(),
                  cab.conforming_delay_violations(), cab.max_conforming_delay()};
  return out;
}

template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const unsigned jobs =
      std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(count)));
  std::atomic<std::size_t> cursor{0};
  auto work = [&] {
    for (std::size_t i; (i = cursor.fetch_add(1)) < count;) fn(i);
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w + 1 < jobs; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
}

engine::SimConfig standard_config(int n, double lambda, std::int64_t horizon, std::uint64_t seed) {
  engine::SimConfig cfg;
  cfg.model = traffic::CoflowModel::uniform_geometric(n, lambda, 2.5);
  cfg.horizon_slots = horizon;
  cfg.warmup_slots = horizon / 10;
  cfg.seed = seed;
  return cfg;
}

// ---- criterion bodies -------------------------------------------------------

bool criterion_1(std::string& detail) {
  RngStream rng(101, 0);
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    const int n = 1 + static_cast<int>(rng.uniform_below(16));
    traffic::TrafficMatrix x(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) x(i, j) = static_cast<std::int64_t>(rng.uniform_below(11));
    auto s = matching::clearance_schedule(x);
    if (s.length() != traffic::clearance_time(x)) {
      detail = "schedule length mismatch at trial " + std::to_string(t);
      return false;
    }
    if (!oracles::replay(x, s.matchings).all_zero()) {
      detail = "replay left packets at trial " + std::to_string(t);
      return false;
    }
  }
  detail = "10000 random matrices (n<=16, entries<=10): length==tau and replay drains";
  return true;
}

bool criterion_2(std::string& detail) {
  RngStream rng(202, 0);
  const int n = 6;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> w(n * n);
    for (auto& x : w) x = static_cast<double>(rng.uniform_below(100));
    auto m = matching::max_weight_matching(n, w);
    double got = 0;
    for (int i = 0; i < n; ++i) got += w[static_cast<std::size_t>(i) * n + m.assign[i]];
    if (got != oracles::brute_force_max_weight(n, w)) {
      detail = "weight differs from the 720-permutation maximum at trial " + std::to_string(t);
      return false;
    }
  }
  detail = "1000 random 6x6 matrices: weight equal to exhaustive enumeration";
  return true;
}

bool criterion_3(std::string& detail) {
  RngStream rng(303, 0);
  for (int t = 0; t < 1000; ++t) {
    const int n = 2 + static_cast<int>(rng.uniform_below(15));
    std::vector<double> rate(static_cast<std::size_t>(n) * n);
    for (auto& x : rate) x = rng.uniform01();
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      double rs = 0, cs = 0;
      for (int j = 0; j < n; ++j) {
        rs += rate[static_cast<std::size_t>(i) * n + j];
        cs += rate[static_cast<std::size_t>(j) * n + i];
      }
      worst = std::max({worst, rs, cs});
    }
    const double scale = (0.3 + 0.69 * rng.uniform01()) / worst;
    for (auto& x : rate) x *= scale;

    auto d = matching::bvn_decompose(n, rate);
    if (static_cast<int>(d.matchings.size()) > n * n - 2 * n + 2) {
      detail = "too many matchings at trial " + std::to_string(t);
      return false;
    }
    std::vector<double> cover(rate.size(), 0.0);
    double total_p = 0.0;
    for (std::size_t k = 0; k < d.matchings.size(); ++k) {
      total_p += d.probabilities[k];
      for (int i = 0; i < n; ++i)
        cover[static_cast<std::size_t>(i) * n + d.matchings[k].assign[i]] += d.probabilities[k];
    }
    if (total_p > 1.0 + 1e-9) {
      detail = "probabilities exceed one at trial " + std::to_string(t);
      return false;
    }
    for (std::size_t c = 0; c < rate.size(); ++c)
      if (cover[c] < rate[c] - 1e-9) {
        detail = "coverage below the rate matrix at trial " + std::to_string(t);
        return false;
      }
  }
  detail = "1000 random sub-stochastic matrices (n<=16): coverage and term-count invariants hold";
  return true;
}

bool criterion_4(std::string& detail) {
  auto cfg = standard_config(8, 0.3, 1000000, 4);
  cfg.policy = engine::PolicyConfig::periodic();
  auto rec = engine::run(cfg);
  const double sigma2 = 2.5 * (1.0 + 2.5 / 8.0);
  const double predicted = analysis::mg1_slotted_wait(0.3, 2.5, 8.0 * sigma2 + 6.25);
  const double rel = std::abs(*rec.mg1_batch_wait - predicted) / predicted;
  std::ostringstream os;
  os << "simulated=" << *rec.mg1_batch_wait << " predicted=" << predicted
     << " rel_err=" << rel << " (tol 0.05)";
  detail = os.str();
  return rel <= 0.05;
}

bool criterion_5(std::string& detail) {
  RngStream rng(505, 3);
  analysis::ScalingFamily fam{traffic::Placement::Diagonal,
                              traffic::FlowSizeDistribution::geometric(2.5)};
  std::vector<int> grid{8, 16, 32, 64, 128, 256};
  auto est = analysis::clearance_scaling(fam, grid, 10000, rng);
  std::ostringstream os;
  os << "mean tau vs log N fit: R^2=" << est.fit.r2 << " slope=" << est.fit.slope
     << " (gate R^2>=0.95)";
  detail = os.str();
  return est.fit.r2 >= 0.95;
}

bool criterion_6(std::string& detail) {
  RngStream rng(606, 3);
  analysis::ScalingFamily fam{traffic::Placement::Diagonal,
                              traffic::FlowSizeDistribution::power_law(1.0)};
  std::vector<int> grid{8, 16, 32, 64, 128, 256};
  auto est = analysis::clearance_scaling(fam, grid, 10000, rng);
  std::ostringstream os;
  os << "log-log slope=" << est.fit.slope << " (gate [0.35, 0.65], theory 0.5)";
  detail = os.str();
  return est.fit.slope >= 0.35 && est.fit.slope <= 0.65;
}

bool criterion_7(std::string& detail) {
  const int n = 16;
  const double lambda = 0.3, beta = 2.5;
  auto mgf = tuning::mgf_for_model(traffic::CoflowModel::uniform_geometric(n, lambda, beta));
  const double gamma = tuning::compute_gamma(lambda, mgf);
  auto params = tuning::solve_delta_t(gamma, n, lambda * beta);
  const double bound =
      tuning::overflow_bound(n, params.gamma, static_cast<double>(params.frame_size));

  const int trials = 100;
  std::vector<double> freq(trials);
  parallel_for(trials, [&](std::size_t k) {
    freq[k] = analysis::overflow_frequency_mc(n, lambda, beta / n, params.frame_size, 100000,
                                              9000 + static_cast<std::uint64_t>(k));
  });
  int passed = 0;
  for (double f : freq)
    if (f <= bound) ++passed;

  // Cross-validate the fast frame sampler against the engine's own per-frame
  // overflow counter where overflow is actually frequent (T=40).
  const std::int64_t t_small = 40, frames = 3000;
  auto cfg = standard_config(n, lambda, t_small * frames + 1, 77);
  cfg.policy = engine::PolicyConfig::cab(t_small, false, false);
  auto cab_out = run_cab_instrumented(cfg, "criterion7-crosscheck T=40");
  g_cab_evidence.push_back(cab_out.evidence);
  const double engine_freq = *cab_out.metrics.overflow_frequency;
  const double mc_freq =
      analysis::overflow_frequency_mc(n, lambda, beta / n, t_small, frames, 77);
  const bool cross_ok = std::abs(engine_freq - mc_freq) <= 0.035;

  std::ostringstream os;
  os << "tuned T=" << params.frame_size << " bound=" << bound << ": " << passed
     << "/100 trials of 1e5 frames within the bound (need >=95); engine-vs-sampler at T=40: "
     << engine_freq << " vs " << mc_freq << (cross_ok ? " (agree)" : " (DISAGREE)");
  detail = os.str();
  return passed >= 95 && cross_ok;
}

struct TrendData {
  std::vector<int> grid{16, 32, 64, 128};
  std::vector<std::uint64_t> seeds{1001, 1002, 1003, 1004, 1005};
  // [grid][seed]
  std::vector<std::vector<double>> cab_mean, cab_dilation, rand_mean, rand_dilation;
  bool ran = false;
};

TrendData g_trend;

void run_trend_study() {
  if (g_trend.ran) return;
  g_trend.ran = true;
  const auto& grid = g_trend.grid;
  const auto& seeds = g_trend.seeds;
  g_trend.cab_mean.assign(grid.size(), std::vector<double>(seeds.size(), 0.0));
  g_trend.cab_dilation = g_trend.cab_mean;
  g_trend.rand_mean = g_trend.cab_mean;
  g_trend.rand_dilation = g_trend.cab_mean;

  struct Task {
    int gi;
    int si;
    bool cab;
  };
  std::vector<Task> tasks;
  for (std::size_t gi = 0; gi < grid.size(); ++gi)
    for (std::size_t si = 0; si < seeds.size(); ++si)
      for (bool cab : {true, false})
        tasks.push_back({static_cast<int>(gi), static_cast<int>(si), cab});

  std::vector<CabEvidence> evidence(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t k) {
    const Task& task = tasks[k];
    auto cfg = standard_config(grid[task.gi], 0.3, 1000000, seeds[task.si]);
    if (task.cab) {
      // CAB with both heuristics enabled, the configuration the studies use.
      cfg.policy = engine::PolicyConfig::cab(std::nullopt, true, true);
      auto out = run_cab_instrumented(
          cfg, "criterion9 cab n=" + std::to_string(grid[task.gi]) + " seed=" +
                   std::to_string(seeds[task.si]));
      evidence[k] = out.evidence;
      g_trend.cab_mean[task.gi][task.si] = out.metrics.mean_coflow_delay;
      g_trend.cab_dilation[task.gi][task.si] = out.metrics.dilation_factor;
    } else {
      cfg.policy = engine::PolicyConfig::randomized();
      auto rec = engine::run(cfg);
      g_trend.rand_mean[task.gi][task.si] = rec.mean_coflow_delay;
      g_trend.rand_dilation[task.gi][task.si] = rec.dilation_factor;
    }
  });
  for (std::size_t k = 0; k < tasks.size(); ++k)
    if (tasks[k].cab) g_cab_evidence.push_back(evidence[k]);
}

double pooled_mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

bool criterion_9(std::string& detail) {
  run_trend_study();
  std::vector<double> logn, cab_y, rand_y;
  for (std::size_t gi = 0; gi < g_trend.grid.size(); ++gi) {
    logn.push_back(std::log(static_cast<double>(g_trend.grid[gi])));
    cab_y.push_back(pooled_mean(g_trend.cab_mean[gi]));
    rand_y.push_back(pooled_mean(g_trend.rand_mean[gi]) / g_trend.grid[gi]);
  }
  auto cab_fit = analysis::fit_line(logn, cab_y);
  auto rand_fit = analysis::fit_line(logn, rand_y);
  std::ostringstream os;
  os << "cab mean delay vs log N: R^2=" << cab_fit.r2 << " (means";
  for (double y : cab_y) os << " " << y;
  os << "); randomized mean/N vs log N: R^2=" << rand_fit.r2 << " (gate 0.9 each)";
  detail = os.str();
  return cab_fit.r2 >= 0.9 && rand_fit.r2 >= 0.9;
}

bool criterion_10(std::string& detail) {
  run_trend_study();
  int monotone_seeds = 0;
  for (std::size_t si = 0; si < g_trend.seeds.size(); ++si) {
    bool increasing = true;
    for (std::size_t gi = 0; gi + 1 < g_trend.grid.size(); ++gi)
      if (g_trend.rand_dilation[gi + 1][si] <= g_trend.rand_dilation[gi][si]) increasing = false;
    if (increasing) ++monotone_seeds;
  }
  double lo = 1e300, hi = 0.0;
  for (std::size_t gi = 0; gi < g_trend.grid.size(); ++gi) {
    const double m = pooled_mean(g_trend.cab_dilation[gi]);
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  std::ostringstream os;
  os << "randomized dilation strictly increasing in " << monotone_seeds
     << "/5 seeds (need >=4); cab dilation max/min=" << hi / lo << " (gate <=2)";
  detail = os.str();
  return monotone_seeds >= 4 && hi / lo <= 2.0;
}

bool criterion_11(std::string& detail) {
  for (int n : {50, 100, 200, 400}) {
    auto model = traffic::CoflowModel::uniform_geometric(n, 0.3, 2.5);
    const double gamma_model = tuning::compute_gamma(0.3, tuning::mgf_for_model(model));
    for (double gamma : {0.1, gamma_model}) {
      auto p = tuning::solve_delta_t(gamma, n, 0.75);
      const double t = static_cast<double>(p.frame_size);
      const double lhs = p.delta * n * t * 1.75 * (1.0 + n * t);
      if (std::abs(lhs - 0.5) > 1e-6) {
        detail = "residual above 1e-6 at N=" + std::to_string(n);
        return false;
      }
      const auto ceil_t =
          static_cast<std::int64_t>(std::ceil(std::log(2.0 * n / p.delta) / gamma));
      if (p.frame_size != ceil_t) {
        detail = "T is not the exact ceiling at N=" + std::to_string(n);
        return false;
      }
    }
  }
  detail = "residual <= 1e-6 and T = ceil(log(2N/delta)/gamma) exactly for N in {50,100,200,400}";
  return true;
}

bool criterion_12(std::string& detail) {
  const int n = 16;
  const std::uint64_t seed = 2;
  auto mgf = tuning::mgf_for_model(traffic::CoflowModel::uniform_geometric(n, 0.3, 2.5));
  auto params = tuning::solve_delta_t(tuning::compute_gamma(0.3, mgf), n, 0.75);

  auto stable_of = [&](engine::PolicyConfig pol, double rho, const char* label,
                       bool cab) -> std::optional<bool> {
    auto cfg = standard_config(n, rho / 2.5, 100000, seed);
    cfg.policy = pol;
    cfg.stationary_metrics = rho < 1.0;
    if (cab) {
      auto out = run_cab_instrumented(cfg, std::string("criterion12 ") + label);
      g_cab_evidence.push_back(out.evidence);
      return out.metrics.stable;
    }
    return engine::run(cfg).stable;
  };

  auto cab_pol = engine::PolicyConfig::cab(params.frame_size, true, true);
  auto r_stable = stable_of(engine::PolicyConfig::randomized(), 0.75, "randomized 0.75", false);
  auto c_stable = stable_of(cab_pol, 0.75, "cab 0.75", true);
  auto r_over = stable_of(engine::PolicyConfig::randomized(), 1.05, "randomized 1.05", false);
  auto c_over = stable_of(cab_pol, 1.05, "cab 1.05", true);

  std::ostringstream os;
  os << "rho=0.75: randomized " << (*r_stable ? "stable" : "UNSTABLE") << ", cab "
     << (*c_stable ? "stable" : "UNSTABLE") << "; rho=1.05: randomized "
     << (*r_over ? "STABLE" : "unstable") << ", cab " << (*c_over ? "STABLE" : "unstable");
  detail = os.str();
  return *r_stable && *c_stable && !*r_over && !*c_over;
}

bool criterion_13(std::string& detail) {
  auto cfg = standard_config(16, 0.3, 100000, 7);
  cfg.policy = engine::PolicyConfig::cab(std::nullopt, true, true);
  std::string first;
  for (int rep = 0; rep < 10; ++rep) {
    auto row = analysis::execute_run(cfg, "cab");
    const std::string line = analysis::csv_line(analysis::csv_fields(row));
    if (rep == 0) {
      first = line;
      if (row.status != "ok") {
        detail = "run failed: " + row.status;
        return false;
      }
    } else if (line != first) {
      detail = "row differs at repetition " + std::to_string(rep);
      return false;
    }
  }
  detail = "10 repetitions produced byte-identical CSV rows";
  return true;
}

bool criterion_8(std::string& detail) {
  std::int64_t total_classified = 0, total_violations = 0;
  std::int64_t runs = 0;
  for (const auto& e : g_cab_evidence) {
    total_classified += e.classified;
    total_violations += e.violations;
    ++runs;
  }
  std::ostringstream os;
  os << total_violations << " conforming coflows above 2T across " << runs
     << " instrumented CAB runs (" << total_classified << " classified coflows)";
  detail = os.str();
  return runs > 0 && total_classified > 0 && total_violations == 0;
}

struct Criterion {
  int id;
  const char* title;
  std::function<bool(std::string&)> body;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int a = 1; a + 1 < argc + 1; ++a) {
    if (a < argc && std::strcmp(argv[a], "--only") == 0 && a + 1 < argc) {
      std::stringstream ss(argv[a + 1]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.push_back(std::stoi(tok));
    }
  }
  auto selected = [&](int id) {
    return only.empty() || std::find(only.begin(), only.end(), id) != only.end();
  };

  // Criterion 8 aggregates evidence from the CAB runs of 7, 9 and 12, so it
  // is evaluated last; everything prints in dependency order.
  std::vector<Criterion> criteria = {
      {1, "clearance schedule correctness", criterion_1},
      {2, "max-weight matching exactness", criterion_2},
      {3, "Birkhoff-von Neumann validity", criterion_3},
      {4, "slotted M/G/1 oracle match", criterion_4},
      {5, "diagonal geometric clearance scales with log N", criterion_5},
      {6, "diagonal power-law clearance log-log slope", criterion_6},
      {7, "frame overflow frequency within the exponential bound", criterion_7},
      {9, "mean delay trends vs log N", criterion_9},
      {10, "dilation contrast between randomized and cab", criterion_10},
      {11, "delta/T tuner self-consistency", criterion_11},
      {12, "stability frontier at rho 0.75 vs 1.05", criterion_12},
      {13, "byte-identical repeated simulation rows", criterion_13},
      {8, "conforming coflow delay never exceeds 2T", criterion_8},
  };

  int failures = 0;
  for (auto& c : criteria) {
    if (!selected(c.id)) continue;
    std::string detail;
    bool ok;
    try {
      ok = c.body(detail);
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("exception: ") + e.what();
    }
    if (!ok) ++failures;
    std::printf("[%s] criterion %2d: %s — %s\n", ok ? "PASS" : "FAIL", c.id, c.title,
                detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
              failures);
  return failures;
}
