#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <memory>

#include "cfsim/analysis.hpp"
#include "cfsim/engine.hpp"
#include "cfsim/matching.hpp"
#include "oracles.hpp"

using namespace cfsim;
using namespace cfsim::engine;
using cfsim::matching::Matching;
using cfsim::traffic::TrafficMatrix;

namespace {

SimConfig base_config(int n, double lambda, double beta, std::int64_t horizon) {
  SimConfig cfg;
  cfg.model = traffic::CoflowModel::uniform_geometric(n, lambda, beta);
  cfg.policy = PolicyConfig::periodic();
  cfg.horizon_slots = horizon;
  cfg.warmup_slots = horizon / 10;
  cfg.seed = 42;
  return cfg;
}

// Plays a fixed list of matchings from slot 0, then idles.
struct ReplayPolicy : sched::Scheduler {
  std::vector<Matching> slots;
  std::size_t pos = 0;
  explicit ReplayPolicy(std::vector<Matching> s) : slots(std::move(s)) {}
  Matching decide(std::int64_t, const SwitchState& state) override {
    if (pos < slots.size()) return slots[pos++];
    return Matching::idle(state.n);
  }
  const char* name() const override { return "replay"; }
};

}  // namespace

TEST_CASE("coflow_delay conventions") {
  traffic::Coflow c;
  c.arrival_slot = 10;
  c.demand = TrafficMatrix{{1}};
  c.remaining = TrafficMatrix(1);
  CHECK_THROWS_AS(coflow_delay(c), std::invalid_argument);
  c.completion_slot = 12;
  CHECK(coflow_delay(c) == 3);

  traffic::Coflow zero;
  zero.arrival_slot = 4;
  zero.demand = TrafficMatrix(2);
  zero.remaining = TrafficMatrix(2);
  zero.completion_slot = 4;
  CHECK(coflow_delay(zero) == 0);
}

TEST_CASE("percentile is nearest rank") {
  CHECK(percentile({5}, 0.999) == 5);
  std::vector<std::int64_t> ladder(1000);
  for (int k = 0; k < 1000; ++k) ladder[k] = k + 1;
  CHECK(percentile(ladder, 0.999) == 999);
  CHECK(percentile({3, 1, 2}, 0.5) == 2);
  CHECK_THROWS_AS(percentile({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(percentile({1}, 1.5), std::invalid_argument);
}

TEST_CASE("stability probe") {
  std::vector<std::pair<std::int64_t, std::int64_t>> flat, rising;
  for (int k = 0; k < 64; ++k) {
    flat.emplace_back(k * 100, 500);
    rising.emplace_back(k * 100, 100 * k);
  }
  CHECK(stability_probe(flat));
  CHECK(!stability_probe(rising));
  CHECK_THROWS_AS(stability_probe(std::vector<std::pair<std::int64_t, std::int64_t>>(5)),
                  std::invalid_argument);
}

TEST_CASE("empty arrivals produce no completions") {
  auto cfg = base_config(4, 0.0, 2.5, 1000);
  auto rec = run(cfg);
  CHECK(rec.completed_coflows == 0);
  CHECK(rec.status == "no_completions");
}

TEST_CASE("a single injected coflow finishes in its clearance time") {
  TrafficMatrix x{{2, 1}, {1, 2}};

  SUBCASE("under a clearance-schedule replay") {
    auto cfg = base_config(2, 0.0, 2.5, 50);
    cfg.warmup_slots = 0;
    cfg.injected.push_back({0, x});
    cfg.metrics.collect_coflow_log = true;
    Simulation sim(cfg, std::make_unique<ReplayPolicy>(matching::clearance_schedule(x).matchings));
    auto rec = sim.run();
    CHECK(rec.completed_coflows == 1);
    CHECK(rec.mean_coflow_delay == doctest::Approx(3.0));
    CHECK(sim.coflow_log()[0].completion_slot == 2);
  }

  SUBCASE("under max-weight matching") {
    auto cfg = base_config(2, 0.0, 2.5, 50);
    cfg.warmup_slots = 0;
    cfg.policy = PolicyConfig::mwm();
    cfg.injected.push_back({0, x});
    auto rec = run(cfg);
    CHECK(rec.completed_coflows == 1);
    CHECK(rec.mean_coflow_delay == doctest::Approx(3.0));
  }
}

TEST_CASE("determinism: identical config and seed give identical records") {
  auto cfg = base_config(8, 0.3, 2.5, 20000);
  cfg.policy = PolicyConfig::randomized();
  auto a = run(cfg);
  auto b = run(cfg);
  CHECK(a.completed_coflows == b.completed_coflows);
  CHECK(a.mean_coflow_delay == b.mean_coflow_delay);
  CHECK(a.mean_packet_delay == b.mean_packet_delay);
  CHECK(a.coflow_delay_percentiles == b.coflow_delay_percentiles);
  CHECK(a.backlog_trace == b.backlog_trace);

  // A different seed produces a different sample path.
  cfg.seed = 43;
  auto c = run(cfg);
  CHECK(a.mean_coflow_delay != c.mean_coflow_delay);
}

TEST_CASE("packet conservation holds under every policy") {
  for (auto kind : {PolicyConfig::randomized(), PolicyConfig::periodic(), PolicyConfig::mwm(),
                    PolicyConfig::cab(40, true, true)}) {
    auto cfg = base_config(6, 0.3, 2.0, 8000);
    cfg.policy = kind;
    cfg.metrics.check_invariants = true;
    CHECK_NOTHROW(run(cfg));
  }
}

TEST_CASE("per-coflow delay is never below the clearance time; dilation >= 1") {
  auto cfg = base_config(8, 0.3, 2.5, 30000);
  cfg.policy = PolicyConfig::cab(60, false, false);
  cfg.metrics.collect_coflow_log = true;
  Simulation sim(cfg);
  auto rec = sim.run();
  REQUIRE(rec.completed_coflows > 100);
  for (const auto& e : sim.coflow_log()) {
    CHECK(e.delay >= e.clearance);
    if (e.total_packets == 0) CHECK(e.delay == 0);
  }
  CHECK(rec.dilation_factor >= 1.0);
}

TEST_CASE("dilation is at least one under the agnostic policies too") {
  for (auto kind : {PolicyConfig::randomized(), PolicyConfig::periodic()}) {
    auto cfg = base_config(8, 0.3, 2.5, 30000);
    cfg.policy = kind;
    auto rec = run(cfg);
    REQUIRE(rec.completed_coflows > 100);
    CHECK(rec.dilation_factor >= 1.0);
  }
}

TEST_CASE("per-VOQ batch waiting matches the slotted M/G/1 oracle") {
  auto cfg = base_config(8, 0.3, 2.5, 200000);
  cfg.policy = PolicyConfig::periodic();
  auto rec = run(cfg);
  REQUIRE(rec.mg1_batch_wait.has_value());
  const double sigma2 = 2.5 * (1.0 + 2.5 / 8.0);
  const double predicted = analysis::mg1_slotted_wait(0.3, 2.5, 8.0 * sigma2 + 2.5 * 2.5);
  CHECK(*rec.mg1_batch_wait ==
        doctest::Approx(predicted).epsilon(0.07));  // tighter 5% gate runs at 1e6 slots
}

TEST_CASE("cab auto-tune flows tuned parameters into the run") {
  auto cfg = base_config(16, 0.3, 2.5, 30000);
  cfg.policy = PolicyConfig::cab(std::nullopt, true, true);
  Simulation sim(cfg);
  REQUIRE(sim.tuned_cab().has_value());
  CHECK(sim.tuned_cab()->gamma > 0.0);
  CHECK(sim.tuned_cab()->delta > 0.0);
  CHECK(sim.tuned_cab()->frame_size >= 2);
  auto rec = sim.run();
  REQUIRE(rec.overflow_frequency.has_value());
  auto& cab = dynamic_cast<sched::CabScheduler&>(sim.policy());
  CHECK(cab.conforming_delay_violations() == 0);
  // At a tuned frame size overflow is vanishing, so even the delay tail
  // stays below the two-frame bound.
  CHECK(rec.coflow_delay_percentiles[0.999] <= 2 * sim.tuned_cab()->frame_size);
  // Stability proxy: measured overflow times the measured non-conforming
  // batch service stays below one.
  CHECK(*rec.overflow_frequency * cab.mean_overflow_batch_service() < 1.0);
}

TEST_CASE("zero-demand coflows complete at arrival with delay zero") {
  SimConfig cfg;
  cfg.model = traffic::CoflowModel::uniform_geometric(1, 0.5, 0.05);
  cfg.policy = PolicyConfig::periodic();
  cfg.horizon_slots = 20000;
  cfg.warmup_slots = 0;
  cfg.seed = 3;
  cfg.metrics.collect_coflow_log = true;
  Simulation sim(cfg);
  auto rec = sim.run();
  REQUIRE(rec.completed_coflows > 1000);
  bool saw_zero = false;
  for (const auto& e : sim.coflow_log())
    if (e.total_packets == 0) {
      saw_zero = true;
      CHECK(e.delay == 0);
      CHECK(e.completion_slot == e.arrival_slot);
    }
  CHECK(saw_zero);
  CHECK(rec.mean_coflow_delay < 10.0);  // the zero-delay mass pulls the mean down
}

TEST_CASE("an infeasible policy matching aborts the run") {
  struct Bad : sched::Scheduler {
    Matching decide(std::int64_t, const SwitchState&) override {
      Matching m;
      m.assign = {0, 0};  // output collision
      return m;
    }
    const char* name() const override { return "bad"; }
  };
  auto cfg = base_config(2, 0.0, 2.5, 10);
  cfg.warmup_slots = 0;
  Simulation sim(cfg, std::make_unique<Bad>());
  CHECK_THROWS_AS(sim.run(), std::runtime_error);
}

TEST_CASE("engine stability runs") {
  // The probe's 1e-3 packets/slot threshold needs the criterion-scale
  // window; short horizons drown the slope estimate in backlog noise.
  SUBCASE("randomized at rho 0.75 is stable") {
    auto cfg = base_config(16, 0.3, 2.5, 100000);
    cfg.policy = PolicyConfig::randomized();
    auto rec = run(cfg);
    REQUIRE(rec.stable.has_value());
    CHECK(*rec.stable);
  }
  SUBCASE("randomized at rho 1.05 is not") {
    auto cfg = base_config(16, 1.05 / 2.5, 2.5, 100000);
    cfg.policy = PolicyConfig::randomized();
    cfg.stationary_metrics = false;
    auto rec = run(cfg);
    REQUIRE(rec.stable.has_value());
    CHECK(!*rec.stable);
  }
}

TEST_CASE("config validation") {
  auto cfg = base_config(4, 0.3, 2.5, 100);
  cfg.warmup_slots = 100;
  CHECK_THROWS_AS(Simulation{cfg}, std::invalid_argument);

  auto overload = base_config(4, 0.5, 2.5, 100);  // rho = 1.25
  CHECK_THROWS_AS(Simulation{overload}, std::invalid_argument);
  overload.stationary_metrics = false;
  CHECK_NOTHROW(Simulation{overload});

  auto bad_inject = base_config(4, 0.3, 2.5, 100);
  bad_inject.injected.push_back({0, TrafficMatrix(3)});
  CHECK_THROWS_AS(Simulation{bad_inject}, std::invalid_argument);
}
