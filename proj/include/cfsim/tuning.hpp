#pragma once

#include <cstdint>
#include <functional>
#include <limits>

#include "cfsim/rng.hpp"
#include "cfsim/traffic.hpp"

namespace cfsim::tuning {

// Moment generating function of the per-port coflow load B = sum_j X_ij.
struct PortLoadMgf {
  std::function<double(double)> value;  // M_B(s)
  double domain_sup = 0.0;              // M_B finite on [0, domain_sup)
  double mean = 0.0;                    // E[B]
  double variance = 0.0;                // Var(B)

  double operator()(double s) const { return value(s); }
};

// Closed-form MGF for the supported model families; throws for heavy-tailed
// flow sizes (no finite MGF) and for per-entry mean matrices (use the Monte
// Carlo estimator instead).
PortLoadMgf mgf_for_model(const traffic::CoflowModel& model);

// Empirical MGF from sampled per-port loads. The usable domain is capped
// where the estimate's relative standard error exceeds 5%.
PortLoadMgf mgf_monte_carlo(const traffic::CoflowModel& model, int samples, RngStream& rng);

// f(s) = lambda (1 - M_B(s)) + s; the Chernoff exponent of the per-frame
// port-load tail. Throws if s is outside [0, domain_sup).
double f_of_s(double s, double lambda, const PortLoadMgf& mgf);

// Largest search point for gamma; also the cap that keeps the lambda -> 0
// degenerate case (f ~ s unbounded) finite.
inline constexpr double kGammaSearchCap = 5.0;

// gamma = max_{s >= 0} f(s), found by a grid bracket plus golden-section
// refinement on the concave f. Requires rho = lambda E[B] < 1.
double compute_gamma(double lambda, const PortLoadMgf& mgf);

struct CabParameters {
  double gamma = 0.0;
  double delta = 0.0;       // overflow probability target
  std::int64_t frame_size = 0;  // T = ceil(log(2N/delta)/gamma), >= 2
};

// Solves  delta N T (rho+1)(1+NT) = 1/2  and  T = ceil(log(2N/delta)/gamma)
// simultaneously by fixed-point iteration from delta0 = 1/(2N^2).
CabParameters solve_delta_t(double gamma, int n, double rho);

// Union-Chernoff overflow bound 2 N exp(-gamma T).
double overflow_bound(int n, double gamma, double t);

// Measures the overflow frequency a parameter choice produces; supplied by
// the caller (typically a wrapped simulator run).
using OverflowProbe = std::function<double(const CabParameters&)>;

struct TuneResult {
  double gamma = 0.0;
  CabParameters params;
  double measured_delta = 0.0;
  bool converged = false;
  int rounds = 0;
};

// Empirical gamma search: raise gamma while the measured overflow stays
// under target, back off (growing T) when it does not. `step` is the
// multiplicative back-off factor in (0,1); the raise factor is 1/step.
TuneResult empirical_gamma_tune(const OverflowProbe& probe, int n, double rho,
                                double initial_gamma, double step, int max_rounds);

struct HeavyTrafficGamma {
  double s_star = 0.0;
  double gamma = 0.0;
};

// Heavy-traffic choice s* = (1-rho)/(lambda (sigma^2 + beta^2)) with
// gamma = f(s*) evaluated through the exact MGF.
HeavyTrafficGamma heavy_traffic_gamma(double lambda, double beta, double sigma2,
                                      const PortLoadMgf& mgf);

}  // namespace cfsim::tuning
