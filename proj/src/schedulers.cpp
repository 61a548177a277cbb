#include "cfsim/schedulers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cfsim::sched {

std::optional<std::uint64_t> Scheduler::choose_packet(int /*in*/, int /*out*/,
                                                      VoqCandidates& candidates) {
  // Queue order is arrival order, so the first live candidate is FIFO.
  const CandidateView* head = candidates.next();
  if (!head) return std::nullopt;
  return head->id;
}

namespace {

// Shared admission scan: admit each load whose addition keeps
// max(row sums, col sums) <= budget. Returns admission flags.
std::vector<char> admit_by_clearance(int n,
                                     std::span<const std::vector<std::int64_t>> row_sums,
                                     std::span<const std::vector<std::int64_t>> col_sums,
                                     std::int64_t budget) {
  std::vector<std::int64_t> run_rows(n, 0), run_cols(n, 0);
  std::vector<char> admitted(row_sums.size(), 0);
  for (std::size_t k = 0; k < row_sums.size(); ++k) {
    std::int64_t peak = 0;
    for (int i = 0; i < n; ++i) {
      peak = std::max(peak, run_rows[i] + row_sums[k][i]);
      peak = std::max(peak, run_cols[i] + col_sums[k][i]);
    }
    if (peak <= budget) {
      admitted[k] = 1;
      for (int i = 0; i < n; ++i) {
        run_rows[i] += row_sums[k][i];
        run_cols[i] += col_sums[k][i];
      }
    }
  }
  return admitted;
}

}  // namespace

CabSelection cab_select_conforming(std::vector<traffic::Coflow> frame_coflows, std::int64_t t) {
  if (t < 2) throw std::invalid_argument("cab_select_conforming: frame size must be >= 2");
  std::stable_sort(frame_coflows.begin(), frame_coflows.end(),
                   [](const traffic::Coflow& a, const traffic::Coflow& b) {
                     if (a.arrival_slot != b.arrival_slot) return a.arrival_slot < b.arrival_slot;
                     return a.id < b.id;
                   });
  const int n = frame_coflows.empty() ? 1 : frame_coflows.front().demand.n();
  std::vector<std::vector<std::int64_t>> rows, cols;
  rows.reserve(frame_coflows.size());
  cols.reserve(frame_coflows.size());
  for (const auto& c : frame_coflows) {
    rows.push_back(c.demand.row_sums());
    cols.push_back(c.demand.col_sums());
  }
  auto admitted = admit_by_clearance(n, rows, cols, t - 1);
  CabSelection out;
  for (std::size_t k = 0; k < frame_coflows.size(); ++k)
    (admitted[k] ? out.conforming : out.non_conforming).push_back(std::move(frame_coflows[k]));
  return out;
}

std::uint64_t sctf_choose_packet(std::span<const CandidateView> candidates, bool sctf_enabled) {
  if (candidates.empty()) throw std::invalid_argument("sctf_choose_packet: no candidates");
  const CandidateView* best = &candidates[0];
  for (const auto& c : candidates) {
    bool better;
    if (sctf_enabled && c.clearance != best->clearance) {
      better = c.clearance < best->clearance;
    } else if (c.arrival_slot != best->arrival_slot) {
      better = c.arrival_slot < best->arrival_slot;
    } else {
      better = c.id < best->id;
    }
    if (better) best = &c;
  }
  return best->id;
}

// --- randomized --------------------------------------------------------------

RandomizedScheduler::RandomizedScheduler(int n, RngStream rng)
    : n_(n), uniform_mode_(true), rng_(rng), scratch_(n) {}

RandomizedScheduler::RandomizedScheduler(int n, matching::BvnDecomposition decomposition,
                                         RngStream rng)
    : n_(n), uniform_mode_(false), decomposition_(std::move(decomposition)), rng_(rng) {}

matching::Matching RandomizedScheduler::decide(std::int64_t /*slot*/,
                                               const engine::SwitchState& /*state*/) {
  if (uniform_mode_) {
    for (int i = 0; i < n_; ++i) scratch_[i] = i;
    for (int i = n_ - 1; i > 0; --i)
      std::swap(scratch_[i], scratch_[rng_.uniform_below(static_cast<std::uint64_t>(i) + 1)]);
    matching::Matching m;
    m.assign = scratch_;
    return m;
  }
  double u = rng_.uniform01();
  double acc = 0.0;
  for (std::size_t k = 0; k < decomposition_.matchings.size(); ++k) {
    acc += decomposition_.probabilities[k];
    if (u <= acc) return decomposition_.matchings[k];
  }
  return matching::Matching::idle(n_);  // residual probability idles
}

// --- periodic ----------------------------------------------------------------

PeriodicScheduler::PeriodicScheduler(int n) : n_(n), rotation_mode_(true) {}

PeriodicScheduler::PeriodicScheduler(int n, const matching::BvnDecomposition& decomposition,
                                     int period)
    : n_(n), rotation_mode_(false) {
  if (period < 1) throw std::invalid_argument("PeriodicScheduler: period must be >= 1");
  // Largest-remainder allocation of round(p_k * period) slots per matching.
  std::vector<int> counts(decomposition.matchings.size(), 0);
  std::vector<std::pair<double, std::size_t>> rema;
  int assigned = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    double share = decomposition.probabilities[k] * period;
    counts[k] = static_cast<int>(std::floor(share));
    assigned += counts[k];
    rema.emplace_back(share - counts[k], k);
  }
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  double total_p = 0.0;
  for (double p : decomposition.probabilities) total_p += p;
  int target = std::min<int>(period, static_cast<int>(std::lround(total_p * period)));
  for (std::size_t r = 0; r < rema.size() && assigned < target; ++r, ++assigned)
    ++counts[rema[r].second];
  for (std::size_t k = 0; k < counts.size(); ++k)
    for (int c = 0; c < counts[k]; ++c) cycle_.push_back(decomposition.matchings[k]);
  while (static_cast<int>(cycle_.size()) < period) cycle_.push_back(matching::Matching::idle(n_));
}

matching::Matching PeriodicScheduler::decide(std::int64_t slot,
                                             const engine::SwitchState& /*state*/) {
  if (rotation_mode_) {
    matching::Matching m;
    m.assign.resize(n_);
    for (int i = 0; i < n_; ++i)
      m.assign[i] = static_cast<int>((static_cast<std::int64_t>(i) + slot + 1) % n_);
    return m;
  }
  return cycle_[static_cast<std::size_t>(slot % static_cast<std::int64_t>(cycle_.size()))];
}

// --- max-weight matching ------------------------------------------------------

MwmScheduler::MwmScheduler(int n) : n_(n), weights_(static_cast<std::size_t>(n) * n) {}

matching::Matching MwmScheduler::decide(std::int64_t /*slot*/, const engine::SwitchState& state) {
  for (std::size_t k = 0; k < weights_.size(); ++k)
    weights_[k] = static_cast<double>(state.voq[k]);
  return matching::max_weight_matching(n_, weights_);
}

// --- CAB ----------------------------------------------------------------------

CabScheduler::CabScheduler(int n, CabOptions options) : n_(n), options_(options) {
  if (options_.frame_size < 2) throw std::invalid_argument("CabScheduler: frame size must be >= 2");
  batch_schedule_.covers = traffic::TrafficMatrix(n);
}

void CabScheduler::on_arrivals(std::int64_t /*slot*/,
                               std::span<const engine::ActiveCoflow* const> arrivals) {
  for (const engine::ActiveCoflow* c : arrivals) {
    PendingCoflow p;
    p.id = c->id;
    p.arrival_slot = c->arrival_slot;
    p.clearance = c->clearance;
    p.total = c->demand.total;
    p.entries = c->demand.entries;
    p.row_sums = c->demand.row_sums;
    p.col_sums = c->demand.col_sums;
    slot_buffer_.push_back(std::move(p));
  }
}

void CabScheduler::start_frame(std::int64_t slot) {
  const std::int64_t t = options_.frame_size;
  if (frames_started_ > 0) {
    ++frames_closed_;
    // Overflow: the closed frame's aggregate needs more than T-1 slots.
    std::vector<std::int64_t> all_rows(n_, 0), all_cols(n_, 0);
    for (const auto& p : pending_) {
      for (int i = 0; i < n_; ++i) {
        all_rows[i] += p.row_sums[i];
        all_cols[i] += p.col_sums[i];
      }
    }
    std::int64_t tau = 0;
    for (int i = 0; i < n_; ++i) tau = std::max({tau, all_rows[i], all_cols[i]});
    if (tau > t - 1) ++overflow_frames_;
  }
  ++frames_started_;

  // Admission in arrival order; the scan continues past rejections so the
  // batch is maximal.
  std::vector<std::int64_t> run_rows(n_, 0), run_cols(n_, 0);
  traffic::TrafficMatrix batch(n_);
  batch_members_.clear();
  batch_by_voq_.clear();
  std::int64_t overflow_service = 0;
  bool any_nonconforming = false;
  for (auto& p : pending_) {
    std::int64_t peak = 0;
    for (int i = 0; i < n_; ++i) {
      peak = std::max(peak, run_rows[i] + p.row_sums[i]);
      peak = std::max(peak, run_cols[i] + p.col_sums[i]);
    }
    const bool conforming = peak <= t - 1;
    ++classified_total_;
    if (conforming) {
      for (int i = 0; i < n_; ++i) {
        run_rows[i] += p.row_sums[i];
        run_cols[i] += p.col_sums[i];
      }
      for (const auto& e : p.entries) {
        batch(e.row, e.col) += e.count;
        batch_by_voq_[static_cast<std::int64_t>(e.row) * n_ + e.col].push_back(
            {p.id, p.arrival_slot, p.clearance});
      }
      if (p.total > 0) {
        batch_members_.insert(p.id);
        classification_.emplace(p.id, true);
      }
    } else {
      ++classified_nonconforming_;
      any_nonconforming = true;
      overflow_service += p.clearance;
      classification_.emplace(p.id, false);
      FifoEntry fe;
      fe.id = p.id;
      fe.clearance = p.clearance;
      fe.entries = std::move(p.entries);
      fifo_.push_back(std::move(fe));
    }
  }
  if (any_nonconforming) {
    ++overflow_batches_;
    overflow_batch_service_frames_ += overflow_service;
  }
  batch_schedule_ = matching::clearance_schedule(batch);
  batch_pos_ = 0;
  pending_.clear();
  frame_start_ = slot;
  next_frame_start_ = slot + t;
}

bool CabScheduler::dynamic_frame_check(const engine::SwitchState& state) const {
  if (!fifo_.empty()) return false;
  if (batch_pos_ < batch_schedule_.matchings.size()) return false;
  for (std::uint64_t id : batch_members_)
    if (!state.is_complete(id)) return false;
  return true;
}

matching::Matching CabScheduler::decide(std::int64_t slot, const engine::SwitchState& state) {
  if (slot >= next_frame_start_) {
    start_frame(slot);
  } else if (options_.dynamic_frames && slot > frame_start_ && dynamic_frame_check(state)) {
    start_frame(slot);
  }
  // This slot's arrivals belong to the frame in force now.
  for (auto& p : slot_buffer_) pending_.push_back(std::move(p));
  slot_buffer_.clear();

  const std::int64_t phase = slot - frame_start_;
  if (phase < options_.frame_size - 1) {
    serving_mode_ = ServingMode::Batch;
    if (batch_pos_ < batch_schedule_.matchings.size())
      return batch_schedule_.matchings[batch_pos_++];
    return matching::Matching::idle(n_);
  }

  // Last slot of the frame: one matching of the head non-conforming coflow.
  serving_mode_ = ServingMode::Fifo;
  if (fifo_.empty()) return matching::Matching::idle(n_);
  FifoEntry& head = fifo_.front();
  if (!head.schedule) {
    traffic::TrafficMatrix demand(n_);
    for (const auto& e : head.entries) demand(e.row, e.col) += e.count;
    head.schedule = matching::clearance_schedule(demand);
    head.pos = 0;
  }
  fifo_head_id_ = head.id;
  matching::Matching m = head.schedule->matchings[head.pos++];
  if (head.pos >= head.schedule->matchings.size()) fifo_.pop_front();
  return m;
}

std::optional<std::uint64_t> CabScheduler::choose_packet(int in, int out,
                                                         VoqCandidates& candidates) {
  if (serving_mode_ == ServingMode::Fifo) {
    // One coflow at a time: only the head-of-line non-conforming coflow.
    if (candidates.has_packet(fifo_head_id_)) return fifo_head_id_;
    return std::nullopt;
  }
  // Batch phase: only the current conforming batch may transmit; an
  // activation with no batch packet left is dummy padding and idles.
  auto it = batch_by_voq_.find(static_cast<std::int64_t>(in) * n_ + out);
  if (it == batch_by_voq_.end()) return std::nullopt;
  static thread_local std::vector<CandidateView> members;
  members.clear();
  for (const auto& c : it->second)
    if (candidates.has_packet(c.id)) members.push_back(c);
  if (members.empty()) return std::nullopt;
  return sctf_choose_packet(members, options_.sctf);
}

void CabScheduler::on_completion(const engine::ActiveCoflow& coflow, std::int64_t slot) {
  auto it = classification_.find(coflow.id);
  if (it == classification_.end()) return;  // zero-demand coflow, never classified
  if (it->second) {
    std::int64_t delay = slot - coflow.arrival_slot + 1;
    max_conforming_delay_ = std::max(max_conforming_delay_, delay);
    if (delay > 2 * options_.frame_size) ++conforming_delay_violations_;
  }
  classification_.erase(it);
}

PolicyStats CabScheduler::stats() const {
  PolicyStats s;
  if (classified_total_ > 0)
    s.eta_nonconforming =
        static_cast<double>(classified_nonconforming_) / static_cast<double>(classified_total_);
  if (frames_closed_ > 0)
    s.overflow_frequency =
        static_cast<double>(overflow_frames_) / static_cast<double>(frames_closed_);
  return s;
}

double CabScheduler::mean_overflow_batch_service() const {
  if (overflow_batches_ == 0) return 0.0;
  return static_cast<double>(overflow_batch_service_frames_) /
         static_cast<double>(overflow_batches_);
}

}  // namespace cfsim::sched
