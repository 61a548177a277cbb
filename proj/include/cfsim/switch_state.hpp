#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "cfsim/traffic.hpp"

namespace cfsim::engine {

// One live coflow, stored sparsely (only nonzero demand entries).
struct ActiveCoflow {
  std::uint64_t id = 0;
  std::int64_t arrival_slot = 0;
  traffic::SparseDemand demand;
  std::vector<std::int64_t> remaining;  // parallel to demand.entries
  std::int64_t remaining_total = 0;
  std::int64_t clearance = 0;           // tau(demand), cached
  std::int64_t packet_delay_sum = 0;

  bool complete() const { return remaining_total == 0; }
};

// VOQ lengths plus the registry of live coflows. Q(i,j) always equals the
// sum of the live coflows' remaining packets at (i,j).
struct SwitchState {
  int n = 0;
  std::int64_t slot = 0;
  std::vector<std::int64_t> voq;  // row-major n*n
  std::unordered_map<std::uint64_t, ActiveCoflow> active;

  std::int64_t queue(int i, int j) const { return voq[static_cast<std::size_t>(i) * n + j]; }
  const ActiveCoflow* find(std::uint64_t id) const {
    auto it = active.find(id);
    return it == active.end() ? nullptr : &it->second;
  }
  bool is_complete(std::uint64_t id) const { return active.find(id) == active.end(); }
};

}  // namespace cfsim::engine
