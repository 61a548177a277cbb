#include "cfsim/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

namespace cfsim::tuning {

namespace {

PortLoadMgf geometric_port_mgf(double entry_mean, int terms) {
  // Sum of `terms` i.i.d. geometric(mean entry_mean) variables.
  const double p = entry_mean / (entry_mean + 1.0);
  PortLoadMgf mgf;
  mgf.domain_sup = std::log(1.0 / p);
  mgf.mean = entry_mean * terms;
  mgf.variance = entry_mean * (1.0 + entry_mean) * terms;
  mgf.value = [p, terms](double s) {
    return std::pow((1.0 - p) / (1.0 - p * std::exp(s)), terms);
  };
  return mgf;
}

PortLoadMgf deterministic_port_mgf(double load) {
  PortLoadMgf mgf;
  mgf.domain_sup = std::numeric_limits<double>::infinity();
  mgf.mean = load;
  mgf.variance = 0.0;
  mgf.value = [load](double s) { return std::exp(load * s); };
  return mgf;
}

}  // namespace

PortLoadMgf mgf_for_model(const traffic::CoflowModel& model) {
  using Kind = traffic::FlowSizeDistribution::Kind;
  if (model.mean_matrix)
    throw std::invalid_argument(
        "mgf_for_model: no closed form for per-entry mean matrices; use mgf_monte_carlo");
  const auto& d = model.flow_sizes;
  const bool diagonal = model.placement == traffic::Placement::Diagonal;
  switch (d.kind) {
    case Kind::Geometric:
      return geometric_port_mgf(d.geo_mean, diagonal ? 1 : model.n);
    case Kind::Deterministic:
      return deterministic_port_mgf(diagonal ? static_cast<double>(d.value)
                                             : static_cast<double>(d.value) * model.n);
    case Kind::Zero: {
      PortLoadMgf mgf;
      mgf.domain_sup = std::numeric_limits<double>::infinity();
      mgf.mean = 0.0;
      mgf.variance = 0.0;
      mgf.value = [](double) { return 1.0; };
      return mgf;
    }
    case Kind::PowerLaw:
      throw std::domain_error("mgf_for_model: power-law flow sizes are heavy-tailed (no MGF)");
  }
  throw std::logic_error("mgf_for_model: unreachable");
}

PortLoadMgf mgf_monte_carlo(const traffic::CoflowModel& model, int samples, RngStream& rng) {
  if (samples < 100) throw std::invalid_argument("mgf_monte_carlo: too few samples");
  auto loads = std::make_shared<std::vector<double>>();
  loads->reserve(static_cast<std::size_t>(samples));
  double sum = 0.0, sumsq = 0.0;
  for (int k = 0; k < samples; ++k) {
    auto demand = traffic::sample_demand_sparse(model, rng);
    // Port 0's load; all ports are exchangeable under the supported models.
    double b = static_cast<double>(demand.row_sums.empty() ? 0 : demand.row_sums[0]);
    loads->push_back(b);
    sum += b;
    sumsq += b * b;
  }
  const double mean = sum / samples;
  const double var = std::max(0.0, sumsq / samples - mean * mean);

  auto estimate = [loads](double s) {
    double m = 0.0;
    for (double b : *loads) m += std::exp(s * b);
    return m / static_cast<double>(loads->size());
  };
  auto rse = [loads, estimate](double s) {
    double m = estimate(s);
    double v = 0.0;
    for (double b : *loads) {
      double d = std::exp(s * b) - m;
      v += d * d;
    }
    v /= static_cast<double>(loads->size());
    return std::sqrt(v / static_cast<double>(loads->size())) / m;
  };

  // Cap the domain where the estimator loses precision (RSE > 5%).
  double lo = 0.0, hi = kGammaSearchCap;
  if (rse(hi) > 0.05) {
    for (int it = 0; it < 60 && hi - lo > 1e-9; ++it) {
      double mid = 0.5 * (lo + hi);
      (rse(mid) <= 0.05 ? lo : hi) = mid;
    }
    hi = lo;
  }

  PortLoadMgf mgf;
  mgf.domain_sup = hi;
  mgf.mean = mean;
  mgf.variance = var;
  mgf.value = estimate;
  return mgf;
}

double f_of_s(double s, double lambda, const PortLoadMgf& mgf) {
  if (s < 0.0 || s >= mgf.domain_sup)
    throw std::domain_error("f_of_s: s outside the MGF domain");
  return lambda * (1.0 - mgf(s)) + s;
}

double compute_gamma(double lambda, const PortLoadMgf& mgf) {
  const double rho = lambda * mgf.mean;
  if (rho >= 1.0)
    throw std::domain_error("compute_gamma: requires rho < 1");

  double hi = kGammaSearchCap;
  if (std::isfinite(mgf.domain_sup)) hi = std::min(hi, mgf.domain_sup * (1.0 - 1e-6));
  if (hi <= 0.0) throw std::domain_error("compute_gamma: empty search interval");

  auto f = [&](double s) { return lambda * (1.0 - mgf(s)) + s; };

  // Coarse bracket, then golden-section on the concave objective.
  const int grid = 512;
  double best_s = 0.0, best_f = 0.0;
  for (int k = 0; k <= grid; ++k) {
    double s = hi * k / grid;
    double fs = f(s);
    if (fs > best_f) {
      best_f = fs;
      best_s = s;
    }
  }
  double a = std::max(0.0, best_s - hi / grid);
  double b = std::min(hi, best_s + hi / grid);
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    }
  }
  return std::max({best_f, f1, f2});
}

CabParameters solve_delta_t(double gamma, int n, double rho) {
  if (gamma <= 0.0) throw std::invalid_argument("solve_delta_t: gamma must be > 0");
  if (n < 1) throw std::invalid_argument("solve_delta_t: n must be >= 1");
  if (rho <= 0.0 || rho >= 1.0) throw std::invalid_argument("solve_delta_t: need 0 < rho < 1");

  auto t_of_delta = [&](double delta) {
    double t = std::ceil(std::log(2.0 * n / delta) / gamma);
    return std::max<std::int64_t>(2, static_cast<std::int64_t>(t));
  };
  auto delta_of_t = [&](std::int64_t t) {
    return 1.0 / (2.0 * n * static_cast<double>(t) * (rho + 1.0) *
                  (1.0 + static_cast<double>(n) * static_cast<double>(t)));
  };

  double delta = 1.0 / (2.0 * static_cast<double>(n) * n);
  std::int64_t t = t_of_delta(delta);
  for (int it = 0; it < 1000; ++it) {
    delta = delta_of_t(t);
    std::int64_t t_next = t_of_delta(delta);
    if (t_next == t) return CabParameters{gamma, delta, t};
    // The map T -> T' is monotone, so oscillation should not occur; if the
    // integer ceil ever flip-flops, keep the larger (more conservative) T.
    if (t_next < t && it > 500) t_next = t;
    t = t_next;
  }
  throw std::runtime_error("solve_delta_t: fixed point did not converge in 1000 iterations");
}

double overflow_bound(int n, double gamma, double t) {
  if (gamma <= 0.0) throw std::invalid_argument("overflow_bound: gamma must be > 0");
  return 2.0 * n * std::exp(-gamma * t);
}

TuneResult empirical_gamma_tune(const OverflowProbe& probe, int n, double rho,
                                double initial_gamma, double step, int max_rounds) {
  if (!(step > 0.0 && step < 1.0))
    throw std::invalid_argument("empirical_gamma_tune: step must be in (0,1)");
  if (initial_gamma <= 0.0)
    throw std::invalid_argument("empirical_gamma_tune: initial gamma must be > 0");

  // Best-so-far: the largest gamma whose measured overflow stays within the
  // target (larger gamma means a smaller frame, hence lower delay); if no
  // round was feasible, the one that overflowed least.
  TuneResult best_feasible, least_bad;
  double least_measured = std::numeric_limits<double>::infinity();
  double gamma = std::min(initial_gamma, kGammaSearchCap);
  for (int round = 1; round <= max_rounds; ++round) {
    CabParameters params = solve_delta_t(gamma, n, rho);
    double measured = probe(params);
    if (measured <= params.delta && gamma >= best_feasible.gamma)
      best_feasible = TuneResult{gamma, params, measured, false, round};
    if (measured < least_measured) {
      least_measured = measured;
      least_bad = TuneResult{gamma, params, measured, false, round};
    }
    if (std::abs(measured - params.delta) <= params.delta / 2.0)
      return TuneResult{gamma, params, measured, true, round};
    if (measured > params.delta) {
      gamma *= step;  // too many overflows: grow T
    } else {
      double next = std::min(gamma / step, kGammaSearchCap);
      if (next == gamma) break;  // pinned at the cap; nothing left to explore
      gamma = next;
    }
  }
  return best_feasible.gamma > 0.0 ? best_feasible : least_bad;
}

HeavyTrafficGamma heavy_traffic_gamma(double lambda, double beta, double sigma2,
                                      const PortLoadMgf& mgf) {
  const double rho = lambda * beta;
  if (rho >= 1.0) throw std::domain_error("heavy_traffic_gamma: requires rho < 1");
  if (lambda <= 0.0) throw std::invalid_argument("heavy_traffic_gamma: lambda must be > 0");
  HeavyTrafficGamma out;
  out.s_star = (1.0 - rho) / (lambda * (sigma2 + beta * beta));
  if (out.s_star >= mgf.domain_sup)
    throw std::domain_error("heavy_traffic_gamma: s* outside the MGF domain");
  out.gamma = f_of_s(out.s_star, lambda, mgf);
  return out;
}

}  // namespace cfsim::tuning
