#pragma once

#include <cmath>
#include <cstdint>

namespace cfsim {

// Seeded splitmix64 stream. Distinct stream ids on the same seed give
// statistically independent sequences, so arrivals, flow sizes and policy
// randomness can be drawn from separate streams without interfering.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : state_(mix(seed + kGolden) ^ mix((stream_id + 1) * 0xD2B74407B1CE6E93ULL)) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  // Uniform on the open interval (0, 1).
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound).
  std::uint64_t uniform_below(std::uint64_t bound) {
    return next_u64() % bound;
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
};

// Knuth multiplication method; fine for the per-slot rates used here.
class PoissonSampler {
 public:
  explicit PoissonSampler(double lambda)
      : lambda_(lambda), exp_neg_lambda_(lambda > 0 ? std::exp(-lambda) : 1.0) {}

  std::int64_t sample(RngStream& rng) const {
    if (lambda_ <= 0.0) return 0;
    std::int64_t k = 0;
    double prod = rng.uniform01();
    while (prod > exp_neg_lambda_) {
      ++k;
      prod *= rng.uniform01();
    }
    return k;
  }

  double lambda() const { return lambda_; }

 private:
  double lambda_;
  double exp_neg_lambda_;
};

inline std::int64_t sample_poisson(double lambda, RngStream& rng) {
  return PoissonSampler(lambda).sample(rng);
}

// Hoermann's transformed rejection with squeeze (PTRS): exact and O(1) for
// mu >= 10, where Knuth's product method is O(mu).
inline std::int64_t sample_poisson_ptrs(double mu, RngStream& rng) {
  const double loglam = std::log(mu);
  const double b = 0.931 + 2.53 * std::sqrt(mu);
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform01() - 0.5;
    const double v = rng.uniform01();
    const double us = 0.5 - std::abs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + mu + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -mu + kf * loglam - std::lgamma(kf + 1.0))
      return static_cast<std::int64_t>(kf);
  }
}

inline std::int64_t sample_poisson_any(double mu, RngStream& rng) {
  if (mu <= 0.0) return 0;
  if (mu < 10.0) return PoissonSampler(mu).sample(rng);
  return sample_poisson_ptrs(mu, rng);
}

inline double sample_normal(RngStream& rng) {
  // Marsaglia polar method (one variate per call).
  for (;;) {
    double u = 2.0 * rng.uniform01() - 1.0;
    double v = 2.0 * rng.uniform01() - 1.0;
    double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

// Marsaglia-Tsang for shape >= 1 (unit scale); boosted for shape < 1.
inline double sample_gamma(double shape, RngStream& rng) {
  if (shape <= 0.0) return 0.0;
  if (shape < 1.0) {
    double u = rng.uniform01();
    return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = sample_normal(rng);
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = rng.uniform01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

// Geometric on {0,1,2,...} with P[X=k] = (1-p) p^k, via inverse transform.
class GeometricSampler {
 public:
  explicit GeometricSampler(double p) : p_(p), log_p_(std::log(p)) {}

  std::int64_t sample(RngStream& rng) const {
    if (p_ <= 0.0) return 0;
    return static_cast<std::int64_t>(std::floor(std::log(rng.uniform01()) / log_p_));
  }

  double p() const { return p_; }

 private:
  double p_;
  double log_p_;
};

}  // namespace cfsim
