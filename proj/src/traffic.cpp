#include "cfsim/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cfsim::traffic {

TrafficMatrix::TrafficMatrix(int n, std::vector<std::int64_t> counts)
    : n_(n), counts_(std::move(counts)) {
  if (n < 1) throw std::invalid_argument("TrafficMatrix: n must be >= 1");
  if (counts_.size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("TrafficMatrix: count vector size mismatch");
  for (std::int64_t c : counts_)
    if (c < 0) throw std::invalid_argument("TrafficMatrix: negative entry");
}

TrafficMatrix::TrafficMatrix(std::initializer_list<std::initializer_list<std::int64_t>> rows) {
  n_ = static_cast<int>(rows.size());
  counts_.reserve(static_cast<std::size_t>(n_) * n_);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != n_)
      throw std::invalid_argument("TrafficMatrix: ragged initializer");
    for (std::int64_t c : row) {
      if (c < 0) throw std::invalid_argument("TrafficMatrix: negative entry");
      counts_.push_back(c);
    }
  }
}

std::int64_t TrafficMatrix::row_sum(int i) const {
  std::int64_t s = 0;
  for (int j = 0; j < n_; ++j) s += counts_[idx(i, j)];
  return s;
}

std::int64_t TrafficMatrix::col_sum(int j) const {
  std::int64_t s = 0;
  for (int i = 0; i < n_; ++i) s += counts_[idx(i, j)];
  return s;
}

std::vector<std::int64_t> TrafficMatrix::row_sums() const {
  std::vector<std::int64_t> out(n_, 0);
  for (int i = 0; i < n_; ++i) out[i] = row_sum(i);
  return out;
}

std::vector<std::int64_t> TrafficMatrix::col_sums() const {
  std::vector<std::int64_t> out(n_, 0);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) out[j] += counts_[idx(i, j)];
  return out;
}

std::int64_t TrafficMatrix::total() const {
  std::int64_t s = 0;
  for (std::int64_t c : counts_) s += c;
  return s;
}

void TrafficMatrix::add(const TrafficMatrix& other) {
  if (other.n_ != n_) throw std::invalid_argument("TrafficMatrix::add: dimension mismatch");
  for (std::size_t k = 0; k < counts_.size(); ++k) counts_[k] += other.counts_[k];
}

std::int64_t clearance_time(const TrafficMatrix& x) {
  std::int64_t best = 0;
  for (int i = 0; i < x.n(); ++i) best = std::max(best, x.row_sum(i));
  for (int j = 0; j < x.n(); ++j) best = std::max(best, x.col_sum(j));
  return best;
}

FlowSizeDistribution FlowSizeDistribution::deterministic(std::int64_t value) {
  if (value < 0) throw std::invalid_argument("deterministic flow size must be >= 0");
  FlowSizeDistribution d;
  d.kind = Kind::Deterministic;
  d.value = value;
  return d;
}

FlowSizeDistribution FlowSizeDistribution::geometric(double mean) {
  if (mean <= 0) throw std::invalid_argument("geometric mean must be > 0");
  FlowSizeDistribution d;
  d.kind = Kind::Geometric;
  d.geo_mean = mean;
  return d;
}

FlowSizeDistribution FlowSizeDistribution::power_law(double epsilon) {
  if (epsilon <= 0) throw std::invalid_argument("power law epsilon must be > 0");
  FlowSizeDistribution d;
  d.kind = Kind::PowerLaw;
  d.epsilon = epsilon;
  return d;
}

FlowSizeDistribution FlowSizeDistribution::zero() { return FlowSizeDistribution{}; }

namespace {

// E[X] = sum_{k>=1} k^-(1+eps) = zeta(1+eps), truncated once increments vanish.
double zeta_tail_mean(double epsilon) {
  double s = 0.0;
  for (int k = 1; k < 2000000; ++k) {
    double term = std::pow(static_cast<double>(k), -(1.0 + epsilon));
    s += term;
    if (term < 1e-12 * s) break;
  }
  return s;
}

}  // namespace

double FlowSizeDistribution::mean() const {
  switch (kind) {
    case Kind::Deterministic: return static_cast<double>(value);
    case Kind::Geometric: return geo_mean;
    case Kind::PowerLaw: return zeta_tail_mean(epsilon);
    case Kind::Zero: return 0.0;
  }
  return 0.0;
}

double FlowSizeDistribution::variance() const {
  switch (kind) {
    case Kind::Deterministic: return 0.0;
    case Kind::Geometric: return geo_mean * (1.0 + geo_mean);
    case Kind::PowerLaw:
      if (epsilon <= 1.0)
        throw std::domain_error("power law variance infinite for epsilon <= 1");
      {
        double m2 = 0.0;  // E[X^2] = sum (2k-1) P[X>=k]
        for (int k = 1; k < 2000000; ++k) {
          double term = (2.0 * k - 1.0) * std::pow(static_cast<double>(k), -(1.0 + epsilon));
          m2 += term;
          if (term < 1e-12 * m2) break;
        }
        double m = zeta_tail_mean(epsilon);
        return m2 - m * m;
      }
    case Kind::Zero: return 0.0;
  }
  return 0.0;
}

std::int64_t sample_flow_size(const FlowSizeDistribution& dist, RngStream& rng) {
  switch (dist.kind) {
    case FlowSizeDistribution::Kind::Deterministic:
      return dist.value;
    case FlowSizeDistribution::Kind::Geometric: {
      double p = dist.geo_mean / (dist.geo_mean + 1.0);
      return GeometricSampler(p).sample(rng);
    }
    case FlowSizeDistribution::Kind::PowerLaw:
      // floor(U^{-1/(1+eps)}) has P[X >= k] = k^-(1+eps) exactly on integers.
      return static_cast<std::int64_t>(
          std::floor(std::pow(rng.uniform01(), -1.0 / (1.0 + dist.epsilon))));
    case FlowSizeDistribution::Kind::Zero:
      return 0;
  }
  return 0;
}

CoflowModel CoflowModel::uniform_geometric(int n, double lambda, double beta) {
  if (n < 1) throw std::invalid_argument("CoflowModel: n must be >= 1");
  CoflowModel m;
  m.n = n;
  m.lambda = lambda;
  m.placement = Placement::UniformDense;
  m.flow_sizes = FlowSizeDistribution::geometric(beta / n);
  m.beta = beta;
  return m;
}

CoflowModel CoflowModel::uniform_deterministic(int n, double lambda, std::int64_t per_entry) {
  CoflowModel m;
  m.n = n;
  m.lambda = lambda;
  m.placement = Placement::UniformDense;
  m.flow_sizes = FlowSizeDistribution::deterministic(per_entry);
  m.beta = static_cast<double>(per_entry) * n;
  return m;
}

CoflowModel CoflowModel::diagonal(int n, double lambda, FlowSizeDistribution dist) {
  CoflowModel m;
  m.n = n;
  m.lambda = lambda;
  m.placement = Placement::Diagonal;
  m.flow_sizes = dist;
  m.beta = dist.mean();
  return m;
}

CoflowModel CoflowModel::nonuniform_geometric(int n, double lambda, std::vector<double> means) {
  if (means.size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("CoflowModel: mean matrix size mismatch");
  CoflowModel m;
  m.n = n;
  m.lambda = lambda;
  m.placement = Placement::UniformDense;
  double beta = 0.0;
  for (int i = 0; i < n; ++i) {
    double rs = 0.0;
    for (int j = 0; j < n; ++j) rs += means[static_cast<std::size_t>(i) * n + j];
    beta = std::max(beta, rs);
  }
  for (int j = 0; j < n; ++j) {
    double cs = 0.0;
    for (int i = 0; i < n; ++i) cs += means[static_cast<std::size_t>(i) * n + j];
    beta = std::max(beta, cs);
  }
  m.beta = beta;
  // flow_sizes records the family; per-entry means come from the matrix.
  m.flow_sizes = FlowSizeDistribution::geometric(beta / n);
  m.mean_matrix = std::move(means);
  return m;
}

std::int64_t SparseDemand::clearance() const {
  std::int64_t best = 0;
  for (std::int64_t s : row_sums) best = std::max(best, s);
  for (std::int64_t s : col_sums) best = std::max(best, s);
  return best;
}

TrafficMatrix SparseDemand::to_matrix() const {
  TrafficMatrix m(n);
  for (const auto& e : entries) m(e.row, e.col) += e.count;
  return m;
}

int SparseDemand::find_entry(int row, int col) const {
  const std::int64_t key = static_cast<std::int64_t>(row) * n + col;
  std::size_t lo = 0, hi = entries.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    const std::int64_t k = static_cast<std::int64_t>(entries[mid].row) * n + entries[mid].col;
    if (k < key)
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo < entries.size() && entries[lo].row == row && entries[lo].col == col)
    return static_cast<int>(lo);
  return -1;
}

namespace {

void push_entry(SparseDemand& d, int i, int j, std::int64_t count) {
  if (count <= 0) return;
  d.entries.push_back({i, j, count});
  d.row_sums[i] += count;
  d.col_sums[j] += count;
  d.total += count;
}

// Uniform geometric entries: skip over the zero cells directly instead of
// drawing n^2 variates. Gaps between nonzero cells are geometric with
// success probability p = P[X >= 1], and X | X >= 1 is 1 + Geometric(p).
void sample_uniform_geometric(SparseDemand& d, double entry_mean, RngStream& rng) {
  const int n = d.n;
  const double p = entry_mean / (entry_mean + 1.0);
  const double log_q = std::log1p(-p);
  const GeometricSampler cond(p);
  const std::int64_t cells = static_cast<std::int64_t>(n) * n;
  std::int64_t pos = static_cast<std::int64_t>(std::floor(std::log(rng.uniform01()) / log_q));
  while (pos < cells) {
    std::int64_t v = 1 + cond.sample(rng);
    push_entry(d, static_cast<int>(pos / n), static_cast<int>(pos % n), v);
    pos += 1 + static_cast<std::int64_t>(std::floor(std::log(rng.uniform01()) / log_q));
  }
}

}  // namespace

SparseDemand sample_demand_sparse(const CoflowModel& model, RngStream& size_rng) {
  SparseDemand d;
  d.n = model.n;
  d.row_sums.assign(model.n, 0);
  d.col_sums.assign(model.n, 0);

  if (model.mean_matrix) {
    const auto& means = *model.mean_matrix;
    for (int i = 0; i < model.n; ++i)
      for (int j = 0; j < model.n; ++j) {
        double m = means[static_cast<std::size_t>(i) * model.n + j];
        if (m <= 0) continue;
        auto dist = FlowSizeDistribution::geometric(m);
        push_entry(d, i, j, sample_flow_size(dist, size_rng));
      }
    return d;
  }

  switch (model.placement) {
    case Placement::Diagonal:
      for (int i = 0; i < model.n; ++i)
        push_entry(d, i, i, sample_flow_size(model.flow_sizes, size_rng));
      break;
    case Placement::UniformDense:
      if (model.flow_sizes.kind == FlowSizeDistribution::Kind::Geometric) {
        sample_uniform_geometric(d, model.flow_sizes.geo_mean, size_rng);
      } else if (model.flow_sizes.kind == FlowSizeDistribution::Kind::Zero) {
        // nothing
      } else {
        for (int i = 0; i < model.n; ++i)
          for (int j = 0; j < model.n; ++j)
            push_entry(d, i, j, sample_flow_size(model.flow_sizes, size_rng));
      }
      break;
  }
  return d;
}

TrafficMatrix sample_demand(const CoflowModel& model, RngStream& size_rng) {
  return sample_demand_sparse(model, size_rng).to_matrix();
}

SparseDemand to_sparse(const TrafficMatrix& m) {
  SparseDemand d;
  d.n = m.n();
  d.row_sums.assign(m.n(), 0);
  d.col_sums.assign(m.n(), 0);
  for (int i = 0; i < m.n(); ++i)
    for (int j = 0; j < m.n(); ++j) push_entry(d, i, j, m(i, j));
  return d;
}

std::vector<Coflow> sample_arrivals(const CoflowModel& model, std::int64_t slot,
                                    RngStream& count_rng, RngStream& size_rng,
                                    std::uint64_t& next_id) {
  std::vector<Coflow> out;
  std::int64_t count = sample_poisson(model.lambda, count_rng);
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t k = 0; k < count; ++k) {
    Coflow c;
    c.id = next_id++;
    c.arrival_slot = slot;
    c.demand = sample_demand(model, size_rng);
    c.remaining = c.demand;
    out.push_back(std::move(c));
  }
  return out;
}

TrafficMatrix aggregate(std::span<const Coflow> coflows, int n) {
  TrafficMatrix sum(n);
  for (const auto& c : coflows) {
    if (c.demand.n() != n)
      throw std::invalid_argument("aggregate: coflow dimension mismatch");
    sum.add(c.demand);
  }
  return sum;
}

}  // namespace cfsim::traffic
