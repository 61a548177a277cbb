#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cfsim/matching.hpp"
#include "cfsim/rng.hpp"
#include "cfsim/schedulers.hpp"
#include "cfsim/switch_state.hpp"
#include "cfsim/traffic.hpp"
#include "cfsim/tuning.hpp"

namespace cfsim::engine {

struct PolicyConfig {
  enum class Kind { Randomized, Periodic, Mwm, Cab };
  enum class RandomizedMode { Auto, UniformPermutation, Decomposition };
  enum class PeriodicMode { Auto, Rotation, BvnCycle };

  Kind kind = Kind::Cab;

  // CAB: frame size is auto-tuned from the traffic model when unset.
  std::optional<std::int64_t> cab_frame_size;
  bool cab_sctf = false;
  bool cab_dynamic_frames = false;

  RandomizedMode randomized_mode = RandomizedMode::Auto;
  PeriodicMode periodic_mode = PeriodicMode::Auto;
  int bvn_cycle_period = 1024;

  static PolicyConfig randomized();
  static PolicyConfig periodic();
  static PolicyConfig mwm();
  static PolicyConfig cab(std::optional<std::int64_t> frame_size, bool sctf, bool dynamic_frames);

  const char* name() const;
};

struct MetricsFlags {
  std::vector<double> percentiles{0.999};
  bool dilation = true;
  bool collect_coflow_log = false;
  bool check_invariants = false;
};

// A coflow placed by hand rather than sampled, released at `slot`.
struct Injection {
  std::int64_t slot = 0;
  traffic::TrafficMatrix demand;
};

struct SimConfig {
  traffic::CoflowModel model;  // carries the port count
  PolicyConfig policy;
  std::int64_t horizon_slots = 0;
  std::int64_t warmup_slots = 0;
  std::uint64_t seed = 0;
  MetricsFlags metrics;
  // Stationary metrics require rho < 1; disable for overload probes.
  bool stationary_metrics = true;
  std::vector<Injection> injected;

  int n() const { return model.n; }
};

struct MetricsRecord {
  std::int64_t completed_coflows = 0;
  double mean_coflow_delay = 0.0;
  std::map<double, std::int64_t> coflow_delay_percentiles;
  double mean_packet_delay = 0.0;
  double dilation_factor = 0.0;
  std::optional<double> eta_nonconforming;   // CAB
  std::optional<double> overflow_frequency;  // CAB
  std::optional<bool> stable;
  std::vector<std::pair<std::int64_t, std::int64_t>> backlog_trace;  // (slot, packets)
  // Mean slotted-M/G/1 batch waiting per VOQ (periodic policy only).
  std::optional<double> mg1_batch_wait;
  std::string status = "ok";
};

struct CoflowLogEntry {
  std::uint64_t id;
  std::int64_t arrival_slot;
  std::int64_t completion_slot;
  std::int64_t clearance;
  std::int64_t total_packets;
  std::int64_t delay;
};

// Delay of a completed coflow: completion - arrival + 1 slots; a coflow
// served entirely within its arrival slot has delay 1, an empty coflow 0.
std::int64_t coflow_delay(const traffic::Coflow& c);

// Nearest-rank percentile: the ceil(q*n)-th smallest value.
std::int64_t percentile(std::vector<std::int64_t> delays, double q);

// Least-squares slope of the last half of the backlog trace; stable when it
// is at most 1e-3 packets/slot.
bool stability_probe(std::span<const std::pair<std::int64_t, std::int64_t>> trace);

class Simulation {
 public:
  explicit Simulation(SimConfig config);
  // Run under a caller-supplied policy instead of one built from the config.
  Simulation(SimConfig config, std::unique_ptr<sched::Scheduler> policy);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  MetricsRecord run();

  const SwitchState& state() const { return state_; }
  sched::Scheduler& policy() { return *policy_; }
  const std::optional<tuning::CabParameters>& tuned_cab() const { return tuned_cab_; }
  const std::vector<CoflowLogEntry>& coflow_log() const { return coflow_log_; }

  struct VoqRef {
    std::uint64_t id;
    std::uint32_t entry_index;
  };
  struct VoqList {
    std::vector<VoqRef> items;
    std::size_t head = 0;
  };
  // Narrow view handed to the candidate walker.
  class VoqListAccess {
   public:
    explicit VoqListAccess(VoqList* list) : list_(list) {}
    std::size_t head() const { return list_->head; }
    std::size_t size() const { return list_->items.size(); }
    VoqRef at(std::size_t k) const { return list_->items[k]; }
    void pop_head() {
      if (++list_->head == list_->items.size()) {
        list_->items.clear();
        list_->head = 0;
      }
    }

   private:
    VoqList* list_;
  };

 private:
  void admit_arrivals();
  void serve(const matching::Matching& m);
  void transmit(ActiveCoflow& coflow, std::uint32_t entry_index);
  void complete_coflow(const ActiveCoflow& coflow);
  void check_conservation() const;

  SimConfig config_;
  SwitchState state_;
  std::unique_ptr<sched::Scheduler> policy_;
  std::optional<tuning::CabParameters> tuned_cab_;

  RngStream count_rng_;
  RngStream size_rng_;
  PoissonSampler poisson_;
  std::uint64_t next_id_ = 0;
  std::size_t next_injection_ = 0;

  std::vector<VoqList> voq_lists_;
  std::int64_t total_backlog_ = 0;
  std::int64_t arrived_packets_ = 0;
  std::int64_t served_packets_ = 0;

  // Counted (post-warmup, completed) coflow statistics.
  std::vector<std::int64_t> delays_;
  std::int64_t packet_delay_sum_ = 0;
  std::int64_t packets_counted_ = 0;

  // Slotted M/G/1 waiting probe, one virtual workload per VOQ.
  bool mg1_probe_ = false;
  std::vector<double> mg1_workload_;
  std::vector<std::int64_t> mg1_last_slot_;
  double mg1_wait_sum_ = 0.0;
  std::int64_t mg1_wait_count_ = 0;

  std::vector<std::pair<std::int64_t, std::int64_t>> backlog_trace_;
  std::vector<CoflowLogEntry> coflow_log_;
};

MetricsRecord run(const SimConfig& config);

}  // namespace cfsim::engine
