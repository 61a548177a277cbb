#pragma once

#include <cstdint>
#include <vector>

#include "cfsim/traffic.hpp"

namespace cfsim::matching {

// A crossbar schedule: assign[i] is the output connected to input i, or
// kIdle. Feasible when no output appears twice.
struct Matching {
  static constexpr int kIdle = -1;

  std::vector<int> assign;

  int n() const { return static_cast<int>(assign.size()); }
  static Matching idle(int n) { return Matching{std::vector<int>(n, kIdle)}; }
  static Matching identity(int n);

  bool operator==(const Matching&) const = default;
};

bool is_feasible(const Matching& m);

// Full permutation maximizing sum of weights[i][assign[i]]. Ties are broken
// toward the lexicographically smallest assignment vector. Exact for
// integer-valued weights; real weights are compared with a small tolerance.
Matching max_weight_matching(int n, const std::vector<double>& weights_row_major);
Matching max_weight_matching(const std::vector<std::vector<double>>& weights);

struct BvnDecomposition {
  std::vector<Matching> matchings;       // full permutations
  std::vector<double> probabilities;     // positive, sum <= 1
};

// Birkhoff-von Neumann decomposition of a sub-stochastic rate matrix:
// pads to doubly stochastic, then repeatedly extracts a perfect matching on
// the positive support and subtracts its minimum covered entry. Guarantees
// sum p_k M_k >= rate entrywise within 1e-9 using at most n^2-2n+2 terms.
BvnDecomposition bvn_decompose(int n, const std::vector<double>& rate_row_major);
BvnDecomposition bvn_decompose(const std::vector<std::vector<double>>& rate);

struct ClearanceSchedule {
  std::vector<Matching> matchings;  // length == clearance_time(covers)
  traffic::TrafficMatrix covers;

  std::int64_t length() const { return static_cast<std::int64_t>(matchings.size()); }
};

// Clears x in exactly clearance_time(x) slots: pad x so every line sum
// equals tau, then peel perfect matchings off the positive support.
ClearanceSchedule clearance_schedule(const traffic::TrafficMatrix& x);

}  // namespace cfsim::matching
