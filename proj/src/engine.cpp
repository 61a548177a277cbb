#include "cfsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cfsim::engine {

PolicyConfig PolicyConfig::randomized() {
  PolicyConfig p;
  p.kind = Kind::Randomized;
  return p;
}

PolicyConfig PolicyConfig::periodic() {
  PolicyConfig p;
  p.kind = Kind::Periodic;
  return p;
}

PolicyConfig PolicyConfig::mwm() {
  PolicyConfig p;
  p.kind = Kind::Mwm;
  return p;
}

PolicyConfig PolicyConfig::cab(std::optional<std::int64_t> frame_size, bool sctf,
                               bool dynamic_frames) {
  PolicyConfig p;
  p.kind = Kind::Cab;
  p.cab_frame_size = frame_size;
  p.cab_sctf = sctf;
  p.cab_dynamic_frames = dynamic_frames;
  return p;
}

const char* PolicyConfig::name() const {
  switch (kind) {
    case Kind::Randomized: return "randomized";
    case Kind::Periodic: return "periodic";
    case Kind::Mwm: return "mwm";
    case Kind::Cab: return "cab";
  }
  return "?";
}

std::int64_t coflow_delay(const traffic::Coflow& c) {
  if (!c.completion_slot)
    throw std::invalid_argument("coflow_delay: coflow has not completed");
  if (c.demand.all_zero()) return 0;
  return *c.completion_slot - c.arrival_slot + 1;
}

std::int64_t percentile(std::vector<std::int64_t> delays, double q) {
  if (delays.empty()) throw std::invalid_argument("percentile: empty sample");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("percentile: q must be in (0,1)");
  std::sort(delays.begin(), delays.end());
  auto rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(delays.size())));
  rank = std::clamp<std::size_t>(rank, 1, delays.size());
  return delays[rank - 1];
}

bool stability_probe(std::span<const std::pair<std::int64_t, std::int64_t>> trace) {
  if (trace.size() < 10) throw std::invalid_argument("stability_probe: need >= 10 samples");
  const std::size_t start = trace.size() / 2;
  const std::size_t m = trace.size() - start;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = start; k < trace.size(); ++k) {
    double x = static_cast<double>(trace[k].first);
    double y = static_cast<double>(trace[k].second);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double denom = m * sxx - sx * sx;
  if (denom == 0.0) return true;  // degenerate single-time trace: flat
  double slope = (m * sxy - sx * sy) / denom;
  return slope <= 1e-3;
}

namespace {

std::unique_ptr<sched::Scheduler> build_policy(const SimConfig& config,
                                               std::optional<tuning::CabParameters>& tuned) {
  const auto& model = config.model;
  const int n = model.n;
  RngStream policy_rng(config.seed, 2);
  switch (config.policy.kind) {
    case PolicyConfig::Kind::Randomized: {
      bool uniform = config.policy.randomized_mode == PolicyConfig::RandomizedMode::UniformPermutation;
      if (config.policy.randomized_mode == PolicyConfig::RandomizedMode::Auto)
        uniform = model.placement == traffic::Placement::UniformDense && model.uniform_entries();
      if (uniform) return std::make_unique<sched::RandomizedScheduler>(n, policy_rng);
      std::vector<double> rate(static_cast<std::size_t>(n) * n, 0.0);
      if (model.mean_matrix) {
        for (std::size_t k = 0; k < rate.size(); ++k)
          rate[k] = model.lambda * (*model.mean_matrix)[k];
      } else if (model.placement == traffic::Placement::Diagonal) {
        for (int i = 0; i < n; ++i)
          rate[static_cast<std::size_t>(i) * n + i] = model.lambda * model.flow_sizes.mean();
      } else {
        for (std::size_t k = 0; k < rate.size(); ++k)
          rate[k] = model.lambda * model.flow_sizes.mean();
      }
      return std::make_unique<sched::RandomizedScheduler>(n, matching::bvn_decompose(n, rate),
                                                          policy_rng);
    }
    case PolicyConfig::Kind::Periodic: {
      bool rotation = config.policy.periodic_mode != PolicyConfig::PeriodicMode::BvnCycle;
      if (rotation) return std::make_unique<sched::PeriodicScheduler>(n);
      std::vector<double> rate(static_cast<std::size_t>(n) * n,
                               model.lambda * model.flow_sizes.mean());
      return std::make_unique<sched::PeriodicScheduler>(n, matching::bvn_decompose(n, rate),
                                                        config.policy.bvn_cycle_period);
    }
    case PolicyConfig::Kind::Mwm:
      return std::make_unique<sched::MwmScheduler>(n);
    case PolicyConfig::Kind::Cab: {
      sched::CabOptions opts;
      opts.sctf = config.policy.cab_sctf;
      opts.dynamic_frames = config.policy.cab_dynamic_frames;
      if (config.policy.cab_frame_size) {
        opts.frame_size = *config.policy.cab_frame_size;
      } else {
        auto mgf = tuning::mgf_for_model(model);
        double gamma = tuning::compute_gamma(model.lambda, mgf);
        tuned = tuning::solve_delta_t(gamma, n, model.rho());
        opts.frame_size = tuned->frame_size;
      }
      return std::make_unique<sched::CabScheduler>(n, opts);
    }
  }
  throw std::logic_error("build_policy: unreachable");
}

}  // namespace

Simulation::Simulation(SimConfig config) : Simulation(std::move(config), nullptr) {}

Simulation::Simulation(SimConfig config, std::unique_ptr<sched::Scheduler> policy)
    : config_(std::move(config)),
      count_rng_(config_.seed, 0),
      size_rng_(config_.seed, 1),
      poisson_(config_.model.lambda) {
  const int n = config_.model.n;
  if (n < 1) throw std::invalid_argument("Simulation: n must be >= 1");
  if (config_.horizon_slots < 1) throw std::invalid_argument("Simulation: horizon must be >= 1");
  if (config_.warmup_slots < 0 || config_.warmup_slots >= config_.horizon_slots)
    throw std::invalid_argument("Simulation: need 0 <= warmup < horizon");
  if (config_.stationary_metrics && config_.model.rho() >= 1.0)
    throw std::invalid_argument(
        "Simulation: rho >= 1 cannot produce stationary metrics (disable stationary_metrics "
        "to probe overload)");
  for (const auto& inj : config_.injected)
    if (inj.demand.n() != n) throw std::invalid_argument("Simulation: injected size mismatch");
  std::stable_sort(config_.injected.begin(), config_.injected.end(),
                   [](const Injection& a, const Injection& b) { return a.slot < b.slot; });

  state_.n = n;
  state_.voq.assign(static_cast<std::size_t>(n) * n, 0);
  voq_lists_.resize(static_cast<std::size_t>(n) * n);
  policy_ = policy ? std::move(policy) : build_policy(config_, tuned_cab_);

  mg1_probe_ = config_.policy.kind == PolicyConfig::Kind::Periodic;
  if (mg1_probe_) {
    mg1_workload_.assign(static_cast<std::size_t>(n) * n, 0.0);
    mg1_last_slot_.assign(static_cast<std::size_t>(n) * n, 0);
  }
}

Simulation::~Simulation() = default;

void Simulation::admit_arrivals() {
  const int n = state_.n;
  const std::int64_t slot = state_.slot;

  std::vector<ActiveCoflow> incoming;
  while (next_injection_ < config_.injected.size() &&
         config_.injected[next_injection_].slot == slot) {
    ActiveCoflow c;
    c.id = next_id_++;
    c.arrival_slot = slot;
    c.demand = traffic::to_sparse(config_.injected[next_injection_].demand);
    incoming.push_back(std::move(c));
    ++next_injection_;
  }
  const std::int64_t count = poisson_.sample(count_rng_);
  for (std::int64_t k = 0; k < count; ++k) {
    ActiveCoflow c;
    c.id = next_id_++;
    c.arrival_slot = slot;
    c.demand = traffic::sample_demand_sparse(config_.model, size_rng_);
    incoming.push_back(std::move(c));
  }
  if (incoming.empty()) return;

  std::vector<const ActiveCoflow*> views;
  std::vector<const ActiveCoflow*> empties;  // zero-demand: completed on the spot
  views.reserve(incoming.size());
  for (auto& c : incoming) {
    c.remaining_total = c.demand.total;
    c.clearance = c.demand.clearance();
    if (c.remaining_total == 0) {
      empties.push_back(&c);
      views.push_back(&c);
      continue;
    }
    c.remaining.reserve(c.demand.entries.size());
    for (const auto& e : c.demand.entries) c.remaining.push_back(e.count);
    auto [it, ok] = state_.active.emplace(c.id, std::move(c));
    (void)ok;
    ActiveCoflow& reg = it->second;
    for (std::uint32_t idx = 0; idx < reg.demand.entries.size(); ++idx) {
      const auto& e = reg.demand.entries[idx];
      const std::size_t q = static_cast<std::size_t>(e.row) * n + e.col;
      state_.voq[q] += e.count;
      voq_lists_[q].items.push_back({reg.id, idx});
      if (mg1_probe_) {
        double& v = mg1_workload_[q];
        v = std::max(0.0, v - static_cast<double>(slot - mg1_last_slot_[q]));
        mg1_last_slot_[q] = slot;
        if (slot >= config_.warmup_slots) {
          mg1_wait_sum_ += v;
          ++mg1_wait_count_;
        }
        v += static_cast<double>(n) * static_cast<double>(e.count);
      }
    }
    total_backlog_ += reg.remaining_total;
    arrived_packets_ += reg.remaining_total;
    views.push_back(&reg);
  }

  policy_->on_arrivals(slot, views);

  for (const ActiveCoflow* c : empties) {
    if (c->arrival_slot >= config_.warmup_slots) delays_.push_back(0);
    if (config_.metrics.collect_coflow_log)
      coflow_log_.push_back({c->id, c->arrival_slot, c->arrival_slot, 0, 0, 0});
    policy_->on_completion(*c, slot);
  }
}

void Simulation::transmit(ActiveCoflow& coflow, std::uint32_t entry_index) {
  const auto& e = coflow.demand.entries[entry_index];
  const std::size_t q = static_cast<std::size_t>(e.row) * state_.n + e.col;
  --coflow.remaining[entry_index];
  --coflow.remaining_total;
  --state_.voq[q];
  --total_backlog_;
  ++served_packets_;
  coflow.packet_delay_sum += state_.slot - coflow.arrival_slot + 1;
  if (coflow.remaining_total == 0) {
    complete_coflow(coflow);
    state_.active.erase(coflow.id);
  }
}

void Simulation::complete_coflow(const ActiveCoflow& coflow) {
  const std::int64_t delay = state_.slot - coflow.arrival_slot + 1;
  if (coflow.arrival_slot >= config_.warmup_slots) {
    delays_.push_back(delay);
    packet_delay_sum_ += coflow.packet_delay_sum;
    packets_counted_ += coflow.demand.total;
  }
  if (config_.metrics.collect_coflow_log)
    coflow_log_.push_back({coflow.id, coflow.arrival_slot, state_.slot, coflow.clearance,
                           coflow.demand.total, delay});
  policy_->on_completion(coflow, state_.slot);
}

namespace {

// Lazy walk over one VOQ's queued coflows; compacts exhausted refs at the
// head so repeated FIFO service stays O(1) amortized.
class LiveCandidates final : public sched::VoqCandidates {
 public:
  LiveCandidates(const SwitchState& state, Simulation::VoqListAccess list, int row, int col)
      : state_(state), list_(list), cursor_(list.head()), row_(row), col_(col) {}

  const sched::CandidateView* next() override {
    while (cursor_ < list_.size()) {
      const auto ref = list_.at(cursor_);
      auto it = state_.active.find(ref.id);
      const bool live =
          it != state_.active.end() && it->second.remaining[ref.entry_index] > 0;
      if (!live) {
        if (cursor_ == list_.head()) list_.pop_head();
        ++cursor_;
        continue;
      }
      view_ = {it->second.id, it->second.arrival_slot, it->second.clearance};
      ++cursor_;
      return &view_;
    }
    return nullptr;
  }

  bool has_packet(std::uint64_t id) const override {
    auto it = state_.active.find(id);
    if (it == state_.active.end()) return false;
    const int idx = it->second.demand.find_entry(row_, col_);
    return idx >= 0 && it->second.remaining[static_cast<std::size_t>(idx)] > 0;
  }

 private:
  const SwitchState& state_;
  Simulation::VoqListAccess list_;
  std::size_t cursor_;
  int row_, col_;
  sched::CandidateView view_;
};

}  // namespace

void Simulation::serve(const matching::Matching& m) {
  const int n = state_.n;
  for (int i = 0; i < n; ++i) {
    const int j = m.assign[i];
    if (j == matching::Matching::kIdle) continue;
    const std::size_t q = static_cast<std::size_t>(i) * n + j;
    if (state_.voq[q] == 0) continue;  // scheduled but empty: idle

    LiveCandidates candidates(state_, VoqListAccess{&voq_lists_[q]}, i, j);
    auto chosen = policy_->choose_packet(i, j, candidates);
    if (!chosen) continue;
    auto it = state_.active.find(*chosen);
    if (it == state_.active.end())
      throw std::logic_error("policy chose a coflow that is not active");
    const int idx = it->second.demand.find_entry(i, j);
    if (idx < 0 || it->second.remaining[static_cast<std::size_t>(idx)] <= 0)
      throw std::logic_error("policy chose a coflow with no packet at the served pair");
    transmit(it->second, static_cast<std::uint32_t>(idx));
  }
}

void Simulation::check_conservation() const {
  std::int64_t from_registry = 0;
  std::vector<std::int64_t> q(state_.voq.size(), 0);
  for (const auto& [id, c] : state_.active) {
    from_registry += c.remaining_total;
    for (std::uint32_t k = 0; k < c.demand.entries.size(); ++k) {
      const auto& e = c.demand.entries[k];
      q[static_cast<std::size_t>(e.row) * state_.n + e.col] += c.remaining[k];
    }
  }
  if (from_registry != total_backlog_ || q != state_.voq ||
      arrived_packets_ != served_packets_ + total_backlog_)
    throw std::logic_error("packet conservation violated");
}

MetricsRecord Simulation::run() {
  const std::int64_t horizon = config_.horizon_slots;
  const std::int64_t trace_interval =
      std::max<std::int64_t>(1, (horizon - config_.warmup_slots) / 512);

  for (std::int64_t slot = 0; slot < horizon; ++slot) {
    state_.slot = slot;
    admit_arrivals();
    matching::Matching m = policy_->decide(slot, state_);
    if (static_cast<int>(m.assign.size()) != state_.n || !matching::is_feasible(m))
      throw std::runtime_error(std::string("policy '") + policy_->name() +
                               "' produced an infeasible matching at slot " +
                               std::to_string(slot));
    serve(m);
    if (slot >= config_.warmup_slots &&
        (slot - config_.warmup_slots) % trace_interval == 0)
      backlog_trace_.emplace_back(slot, total_backlog_);
    if (config_.metrics.check_invariants && slot % 1024 == 0) check_conservation();
  }
  if (config_.metrics.check_invariants) check_conservation();

  MetricsRecord rec;
  rec.completed_coflows = static_cast<std::int64_t>(delays_.size());
  rec.backlog_trace = backlog_trace_;
  if (!delays_.empty()) {
    double sum = 0.0;
    for (std::int64_t d : delays_) sum += static_cast<double>(d);
    rec.mean_coflow_delay = sum / static_cast<double>(delays_.size());
    for (double q : config_.metrics.percentiles)
      rec.coflow_delay_percentiles[q] = percentile(delays_, q);
    if (packets_counted_ > 0) {
      rec.mean_packet_delay =
          static_cast<double>(packet_delay_sum_) / static_cast<double>(packets_counted_);
      if (config_.metrics.dilation && rec.mean_packet_delay > 0.0)
        rec.dilation_factor = rec.mean_coflow_delay / rec.mean_packet_delay;
    }
  } else {
    rec.status = "no_completions";
  }
  auto stats = policy_->stats();
  rec.eta_nonconforming = stats.eta_nonconforming;
  rec.overflow_frequency = stats.overflow_frequency;
  if (backlog_trace_.size() >= 10) rec.stable = stability_probe(backlog_trace_);
  if (mg1_probe_ && mg1_wait_count_ > 0)
    rec.mg1_batch_wait = mg1_wait_sum_ / static_cast<double>(mg1_wait_count_);
  return rec;
}

MetricsRecord run(const SimConfig& config) { return Simulation(config).run(); }

}  // namespace cfsim::engine
