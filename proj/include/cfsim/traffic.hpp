#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "cfsim/rng.hpp"

namespace cfsim::traffic {

// Square matrix of nonnegative packet counts; the demand of one coflow or
// an aggregate of several.
class TrafficMatrix {
 public:
  TrafficMatrix() = default;
  explicit TrafficMatrix(int n) : n_(n), counts_(static_cast<std::size_t>(n) * n, 0) {}
  TrafficMatrix(int n, std::vector<std::int64_t> counts);
  TrafficMatrix(std::initializer_list<std::initializer_list<std::int64_t>> rows);

  int n() const { return n_; }
  std::int64_t operator()(int i, int j) const { return counts_[idx(i, j)]; }
  std::int64_t& operator()(int i, int j) { return counts_[idx(i, j)]; }

  std::int64_t row_sum(int i) const;
  std::int64_t col_sum(int j) const;
  std::vector<std::int64_t> row_sums() const;
  std::vector<std::int64_t> col_sums() const;
  std::int64_t total() const;
  bool all_zero() const { return total() == 0; }

  void add(const TrafficMatrix& other);  // entrywise; throws on size mismatch

  std::span<const std::int64_t> data() const { return counts_; }
  bool operator==(const TrafficMatrix&) const = default;

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }

  int n_ = 0;
  std::vector<std::int64_t> counts_;
};

// Minimum number of slots needed to transmit x through the crossbar:
// the largest row or column sum.
std::int64_t clearance_time(const TrafficMatrix& x);

struct FlowSizeDistribution {
  enum class Kind { Deterministic, Geometric, PowerLaw, Zero };

  static FlowSizeDistribution deterministic(std::int64_t value);
  static FlowSizeDistribution geometric(double mean);   // support {0,1,...}, p = m/(m+1)
  static FlowSizeDistribution power_law(double epsilon); // P[X>=k] = k^-(1+eps), k>=1
  static FlowSizeDistribution zero();

  double mean() const;
  double variance() const;  // throws for PowerLaw with infinite variance (eps <= 1)

  Kind kind = Kind::Zero;
  std::int64_t value = 0;  // Deterministic
  double geo_mean = 0.0;   // Geometric
  double epsilon = 0.0;    // PowerLaw
};

std::int64_t sample_flow_size(const FlowSizeDistribution& dist, RngStream& rng);

enum class Placement { UniformDense, Diagonal };

// Sparse demand: only the nonzero entries, with cached line sums.
struct SparseEntry {
  int row;
  int col;
  std::int64_t count;
};

struct SparseDemand {
  int n = 0;
  std::vector<SparseEntry> entries;  // unique cells in row-major order
  std::vector<std::int64_t> row_sums;
  std::vector<std::int64_t> col_sums;
  std::int64_t total = 0;

  std::int64_t clearance() const;
  TrafficMatrix to_matrix() const;
  // Index of the entry at (row, col), or -1; entries are row-major sorted.
  int find_entry(int row, int col) const;
};

struct CoflowModel {
  int n = 0;
  double lambda = 0.0;           // coflow arrivals per slot
  Placement placement = Placement::UniformDense;
  FlowSizeDistribution flow_sizes;  // per-entry (UniformDense) or diagonal (Diagonal)
  double beta = 0.0;             // max per-port mean load
  // Optional per-entry geometric means (row-major n*n); UniformDense only.
  std::optional<std::vector<double>> mean_matrix;

  double rho() const { return lambda * beta; }

  // Uniform traffic: every entry geometric with mean beta/n.
  static CoflowModel uniform_geometric(int n, double lambda, double beta);
  static CoflowModel uniform_deterministic(int n, double lambda, std::int64_t per_entry);
  static CoflowModel diagonal(int n, double lambda, FlowSizeDistribution dist);
  static CoflowModel nonuniform_geometric(int n, double lambda, std::vector<double> means);

  bool uniform_entries() const { return !mean_matrix.has_value(); }
};

struct Coflow {
  std::uint64_t id = 0;
  std::int64_t arrival_slot = 0;
  TrafficMatrix demand;
  TrafficMatrix remaining;
  std::optional<std::int64_t> completion_slot;

  bool complete() const { return completion_slot.has_value(); }
};

SparseDemand sample_demand_sparse(const CoflowModel& model, RngStream& size_rng);
TrafficMatrix sample_demand(const CoflowModel& model, RngStream& size_rng);
SparseDemand to_sparse(const TrafficMatrix& m);

// Poisson(lambda)-many coflows released at the start of `slot`. Counts and
// flow sizes come from separate streams so that consumers of one do not
// perturb the other.
std::vector<Coflow> sample_arrivals(const CoflowModel& model, std::int64_t slot,
                                    RngStream& count_rng, RngStream& size_rng,
                                    std::uint64_t& next_id);

// Entrywise sum of demand matrices; throws on dimension mismatch.
TrafficMatrix aggregate(std::span<const Coflow> coflows, int n);

}  // namespace cfsim::traffic
