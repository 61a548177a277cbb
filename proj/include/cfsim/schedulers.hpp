#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cfsim/matching.hpp"
#include "cfsim/rng.hpp"
#include "cfsim/switch_state.hpp"
#include "cfsim/traffic.hpp"

namespace cfsim::sched {

// A coflow that still has packets queued at the VOQ being served.
struct CandidateView {
  std::uint64_t id;
  std::int64_t arrival_slot;
  std::int64_t clearance;
};

// Engine-backed access to the coflows queued at one VOQ. next() walks the
// live candidates in arrival order without materializing the whole queue,
// so a policy that only wants the head pays O(1) even under deep backlogs.
class VoqCandidates {
 public:
  virtual ~VoqCandidates() = default;
  virtual const CandidateView* next() = 0;  // nullptr when exhausted
  virtual bool has_packet(std::uint64_t id) const = 0;
};

struct PolicyStats {
  std::optional<double> eta_nonconforming;
  std::optional<double> overflow_frequency;
};

class Scheduler {
 public:
  virtual ~Scheduler() = default;

  virtual void on_arrivals(std::int64_t /*slot*/,
                           std::span<const engine::ActiveCoflow* const> /*arrivals*/) {}

  // Must return a feasible matching; pairs whose VOQ is empty are idled by
  // the engine.
  virtual matching::Matching decide(std::int64_t slot, const engine::SwitchState& state) = 0;

  // Which queued coflow sends a packet on an activated pair. nullopt idles
  // the pair. Default: FIFO (earliest arrival, ties by id).
  virtual std::optional<std::uint64_t> choose_packet(int in, int out, VoqCandidates& candidates);

  virtual void on_completion(const engine::ActiveCoflow& /*coflow*/, std::int64_t /*slot*/) {}
  virtual PolicyStats stats() const { return {}; }
  virtual const char* name() const = 0;
};

// --- standalone policy building blocks -------------------------------------

struct CabSelection {
  std::vector<traffic::Coflow> conforming;
  std::vector<traffic::Coflow> non_conforming;
};

// Scans coflows in arrival order (ties by id) and admits each one whose
// addition keeps the running aggregate's clearance time <= t-1. Scanning
// continues past rejections, so the admitted set is maximal.
CabSelection cab_select_conforming(std::vector<traffic::Coflow> frame_coflows, std::int64_t t);

// SCTF packet choice: smallest original clearance time, ties by earliest
// arrival then id. With sctf_enabled == false, plain FIFO order.
std::uint64_t sctf_choose_packet(std::span<const CandidateView> candidates, bool sctf_enabled);

// --- the four policies ------------------------------------------------------

class RandomizedScheduler : public Scheduler {
 public:
  // Uniform traffic: an independent uniform random permutation each slot.
  RandomizedScheduler(int n, RngStream rng);
  // General traffic: sample matching M_k with probability p_k; the residual
  // probability 1 - sum p_k idles the switch.
  RandomizedScheduler(int n, matching::BvnDecomposition decomposition, RngStream rng);

  matching::Matching decide(std::int64_t slot, const engine::SwitchState& state) override;
  const char* name() const override { return "randomized"; }

 private:
  int n_;
  bool uniform_mode_;
  matching::BvnDecomposition decomposition_;
  RngStream rng_;
  std::vector<int> scratch_;
};

class PeriodicScheduler : public Scheduler {
 public:
  // Uniform rotation: input i -> output ((i + t) mod N) + 1 in 1-indexed
  // terms; each pair is served exactly once every N slots.
  explicit PeriodicScheduler(int n);
  // Fixed cycle through a BvN decomposition: matching M_k occupies a
  // round(p_k * period) share of each period.
  PeriodicScheduler(int n, const matching::BvnDecomposition& decomposition, int period);

  matching::Matching decide(std::int64_t slot, const engine::SwitchState& state) override;
  const char* name() const override { return "periodic"; }

 private:
  int n_;
  bool rotation_mode_;
  std::vector<matching::Matching> cycle_;
};

class MwmScheduler : public Scheduler {
 public:
  explicit MwmScheduler(int n);

  matching::Matching decide(std::int64_t slot, const engine::SwitchState& state) override;
  const char* name() const override { return "mwm"; }

 private:
  int n_;
  std::vector<double> weights_;
};

struct CabOptions {
  std::int64_t frame_size = 0;  // T >= 2
  bool sctf = false;
  bool dynamic_frames = false;
};

class CabScheduler : public Scheduler {
 public:
  CabScheduler(int n, CabOptions options);

  void on_arrivals(std::int64_t slot,
                   std::span<const engine::ActiveCoflow* const> arrivals) override;
  matching::Matching decide(std::int64_t slot, const engine::SwitchState& state) override;
  std::optional<std::uint64_t> choose_packet(int in, int out,
                                             VoqCandidates& candidates) override;
  void on_completion(const engine::ActiveCoflow& coflow, std::int64_t slot) override;
  PolicyStats stats() const override;
  const char* name() const override { return "cab"; }

  // True when the conforming batch is exhausted, every conforming coflow of
  // the previous frame has completed, and the overflow FIFO is empty.
  bool dynamic_frame_check(const engine::SwitchState& state) const;

  std::int64_t frame_size() const { return options_.frame_size; }
  std::int64_t frames_started() const { return frames_started_; }
  std::int64_t frames_closed() const { return frames_closed_; }
  std::int64_t overflow_frames() const { return overflow_frames_; }
  std::int64_t coflows_classified() const { return classified_total_; }
  std::int64_t coflows_nonconforming() const { return classified_nonconforming_; }
  std::int64_t max_conforming_delay() const { return max_conforming_delay_; }
  std::int64_t conforming_delay_violations() const { return conforming_delay_violations_; }
  std::size_t fifo_length() const { return fifo_.size(); }
  // Mean total service time, in frames, of the non-conforming coflows
  // produced by one overflow frame.
  double mean_overflow_batch_service() const;

 private:
  struct PendingCoflow {
    std::uint64_t id;
    std::int64_t arrival_slot;
    std::int64_t clearance;
    std::int64_t total;
    std::vector<traffic::SparseEntry> entries;
    std::vector<std::int64_t> row_sums, col_sums;
  };

  struct FifoEntry {
    std::uint64_t id;
    std::int64_t clearance;
    std::vector<traffic::SparseEntry> entries;
    std::optional<matching::ClearanceSchedule> schedule;  // built at first service
    std::size_t pos = 0;
  };

  void start_frame(std::int64_t slot);

  int n_;
  CabOptions options_;

  std::int64_t frame_start_ = 0;
  std::int64_t next_frame_start_ = 0;
  std::vector<PendingCoflow> pending_;
  std::vector<PendingCoflow> slot_buffer_;

  matching::ClearanceSchedule batch_schedule_;
  std::size_t batch_pos_ = 0;
  std::unordered_set<std::uint64_t> batch_members_;
  // Batch coflows holding demand at each VOQ, rebuilt every frame; keeps the
  // packet choice independent of how deep the overflow backlog grows.
  std::unordered_map<std::int64_t, std::vector<CandidateView>> batch_by_voq_;

  std::deque<FifoEntry> fifo_;

  enum class ServingMode { Batch, Fifo };
  ServingMode serving_mode_ = ServingMode::Batch;
  std::uint64_t fifo_head_id_ = 0;

  std::unordered_map<std::uint64_t, bool> classification_;  // id -> conforming
  std::int64_t frames_started_ = 0;
  std::int64_t frames_closed_ = 0;
  std::int64_t overflow_frames_ = 0;
  std::int64_t classified_total_ = 0;
  std::int64_t classified_nonconforming_ = 0;
  std::int64_t max_conforming_delay_ = 0;
  std::int64_t conforming_delay_violations_ = 0;
  std::int64_t overflow_batches_ = 0;
  std::int64_t overflow_batch_service_frames_ = 0;
};

}  // namespace cfsim::sched
