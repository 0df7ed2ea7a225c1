#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rotkv/checker.hpp"
#include "rotkv/cure.hpp"
#include "rotkv/engine.hpp"
#include "rotkv/sim.hpp"

using namespace rotkv;

namespace {

std::string key_on(const Topology& topo, uint32_t part, const std::string& tag = "k") {
  for (int i = 0; i < 10000; i++) {
    std::string k = tag + std::to_string(i);
    if (topo.locate(k) == part) return k;
  }
  FAIL("no key found for partition ", part);
  return "";
}

struct TimedOps final : Workload {
  struct Step {
    int64_t at;
    std::function<void(ClientApi&)> fire;
  };
  std::vector<Step> steps;
  std::vector<OpResult> done_ops;
  size_t next = 0;

  void ready(ClientApi& api) override { arm(api); }
  void done(ClientApi& api, const OpResult& r) override {
    done_ops.push_back(r);
    arm(api);
  }
  void alarm(ClientApi& api, uint64_t token) override {
    if (token != next) return;  // stale wake-up
    size_t i = next++;
    steps[i].fire(api);
  }

 private:
  void arm(ClientApi& api) {
    if (next >= steps.size()) return;
    int64_t now = api.runtime().now_ms();
    int64_t at = steps[next].at;
    if (at <= now) {
      size_t i = next++;
      steps[i].fire(api);
    } else {
      api.runtime().set_alarm(at - now, next);
    }
  }
};

// Physical-clock cluster with per-partition clock offsets and one scripted
// client per data center.
struct CureRun {
  Topology topo;
  Simulator sim;
  std::vector<ContrarianPartition*> parts;  // by partition node id
  std::vector<TimedOps*> clients;

  CureRun(uint32_t partitions, uint32_t dcs, uint32_t nclients, const EngineConfig& cfg,
          const Schedule& sched, const std::vector<int64_t>& offsets)
      : topo{partitions, dcs, nclients}, sim(topo, sched) {
    parts.resize(partitions * dcs, nullptr);
    for (uint32_t d = 0; d < dcs; d++)
      for (uint32_t p = 0; p < partitions; p++) {
        uint32_t id = topo.partition_node(d, p);
        auto node = make_partition(cfg, topo, id);
        parts[id] = static_cast<ContrarianPartition*>(node.get());
        sim.add_node(id, std::move(node));
        if (id < offsets.size()) sim.set_clock_offset(id, offsets[id]);
      }
    for (uint32_t ci = 0; ci < nclients; ci++) {
      auto w = std::make_unique<TimedOps>();
      clients.push_back(w.get());
      uint32_t id = topo.client_node(ci);
      sim.add_node(id, make_client(cfg, topo, id, std::move(w)));
    }
  }
};

// No background timers, so clock values in the oracle stay frozen.
EngineConfig quiet_cure() {
  EngineConfig cfg;
  cfg.engine = EngineKind::cure;
  cfg.heartbeats = false;
  cfg.stabilization_period_ms = 0;
  cfg.store_gc_period_ms = 0;
  return cfg;
}

}  // namespace

TEST_CASE("a partition whose clock lags holds each read for exactly the gap") {
  // Zero-delay links, coordinator's clock on time, the other partition 2ms
  // behind.  Every snapshot's local entry is the coordinator's tick, so the
  // laggard must wait out exactly the 2ms gap, on every transaction.
  for (RotMode mode : {RotMode::one_and_half, RotMode::two_round}) {
    CAPTURE(rot_mode_name(mode));
    EngineConfig cfg = quiet_cure();
    cfg.rot_mode = mode;
    Topology probe{2, 1, 1};
    std::string kx = key_on(probe, 0, "x");
    std::string ky = key_on(probe, 1, "y");

    std::vector<TimedOps::Step> steps;
    for (int i = 0; i < 10; i++)
      steps.push_back({5 + 5 * i, [&](ClientApi& c) { c.rot({kx, ky}); }});

    Schedule sched;
    sched.default_law = DelayLaw::fixed(0);
    CureRun run(2, 1, 1, cfg, sched, {0, -2});
    run.clients[0]->steps = std::move(steps);
    auto res = run.sim.run_until_quiescent(500);
    CHECK(res.pending_client_ops == 0);
    REQUIRE(run.clients[0]->done_ops.size() == 10);

    for (int i = 0; i < 10; i++) {
      const OpResult& r = run.clients[0]->done_ops[static_cast<size_t>(i)];
      REQUIRE(r.returns.size() == 2);
      CHECK(r.sv[0] == Timestamp::from_parts(5 + 5 * i, 0));
    }

    Counters tot = run.sim.merged_counters();
    CHECK(tot.blocked_reads == 10);
    CHECK(tot.blocked_read_ms == 20);
    CHECK(tot.blocked_puts == 0);
    REQUIRE(tot.rot_latencies_ms.size() == 10);
    for (int64_t l : tot.rot_latencies_ms) CHECK(l == 2);
  }
}

TEST_CASE("aligned clocks never hold a read") {
  EngineConfig cfg = quiet_cure();
  Topology probe{2, 1, 1};
  std::string kx = key_on(probe, 0, "x");
  std::string ky = key_on(probe, 1, "y");

  std::vector<TimedOps::Step> steps;
  for (int i = 0; i < 10; i++)
    steps.push_back({5 + 5 * i, [&](ClientApi& c) { c.rot({kx, ky}); }});

  Schedule sched;
  sched.default_law = DelayLaw::fixed(0);
  CureRun run(2, 1, 1, cfg, sched, {0, 0});
  run.clients[0]->steps = std::move(steps);
  auto res = run.sim.run_until_quiescent(500);
  CHECK(res.pending_client_ops == 0);
  REQUIRE(run.clients[0]->done_ops.size() == 10);

  Counters tot = run.sim.merged_counters();
  CHECK(tot.blocked_reads == 0);
  CHECK(tot.blocked_read_ms == 0);
  for (int64_t l : tot.rot_latencies_ms) CHECK(l == 0);
}

TEST_CASE("a put is held until the writer's view fits under the local clock") {
  // First write lands on the on-time partition and stamps (3,0).  The second
  // write reaches the laggard while its clock still reads 2, so it is held
  // 1ms and then stamped (3,1): above everything the writer has seen, without
  // the clock ever running ahead of physical time.
  EngineConfig cfg = quiet_cure();
  Topology probe{2, 1, 1};
  std::string kx = key_on(probe, 0, "x");
  std::string ky = key_on(probe, 1, "y");

  std::vector<TimedOps::Step> steps;
  steps.push_back({3, [&](ClientApi& c) { c.put(kx, "a"); }});
  steps.push_back({4, [&](ClientApi& c) { c.put(ky, "b"); }});
  steps.push_back({10, [&](ClientApi& c) { c.rot({kx, ky}); }});

  Schedule sched;
  sched.default_law = DelayLaw::fixed(0);
  CureRun run(2, 1, 1, cfg, sched, {0, -2});
  run.clients[0]->steps = std::move(steps);
  auto res = run.sim.run_until_quiescent(500);
  CHECK(res.pending_client_ops == 0);
  REQUIRE(run.clients[0]->done_ops.size() == 3);

  const auto& ops = run.clients[0]->done_ops;
  CHECK(ops[0].put_ts == Timestamp::from_parts(3, 0));
  CHECK(ops[1].put_ts == Timestamp::from_parts(3, 1));
  REQUIRE(ops[2].returns.size() == 2);
  REQUIRE(ops[2].returns[0].present);
  REQUIRE(ops[2].returns[1].present);
  CHECK(ops[2].returns[0].v.value == "a");
  CHECK(ops[2].returns[1].v.value == "b");

  Counters tot = run.sim.merged_counters();
  CHECK(tot.blocked_puts == 1);
  REQUIRE(tot.put_latencies_ms.size() == 2);
  CHECK(tot.put_latencies_ms[0] == 0);
  CHECK(tot.put_latencies_ms[1] == 1);
}

TEST_CASE("held operations keep every session and snapshot guarantee under mixed skew") {
  // Partitions disagree by up to 4ms and messages reorder adversarially; the
  // engine may only trade that skew for waiting, never for a stale or torn
  // read.  The trace checker replays each run against the full rule set.
  for (uint64_t seed : {11ull, 12ull, 13ull}) {
    CAPTURE(seed);
    EngineConfig cfg;
    cfg.engine = EngineKind::cure;
    cfg.rot_mode = RotMode::two_round;
    Topology topo{2, 2, 2};
    std::string kx = key_on(topo, 0, "x");
    std::string ky = key_on(topo, 1, "y");
    std::string kz = key_on(topo, 0, "z");

    Schedule sched;
    sched.seed = seed;
    sched.default_law = DelayLaw::adversarial(1, 6);
    CureRun run(2, 2, 2, cfg, sched, {0, -2, 2, 0});

    std::vector<TimedOps::Step> a;
    a.push_back({0, [&](ClientApi& c) { c.put(kx, "x0"); }});
    a.push_back({1, [&](ClientApi& c) { c.put(ky, "y0"); }});
    a.push_back({6, [&](ClientApi& c) { c.rot({kx, ky, kz}); }});
    a.push_back({12, [&](ClientApi& c) { c.put(kz, "z0"); }});
    a.push_back({20, [&](ClientApi& c) { c.rot({kx, ky, kz}); }});
    run.clients[0]->steps = std::move(a);

    std::vector<TimedOps::Step> b;
    b.push_back({2, [&](ClientApi& c) { c.put(kx, "x1"); }});
    b.push_back({8, [&](ClientApi& c) { c.rot({kx, ky}); }});
    b.push_back({14, [&](ClientApi& c) { c.put(ky, "y1"); }});
    b.push_back({40, [&](ClientApi& c) { c.rot({kx, ky, kz}); }});
    run.clients[1]->steps = std::move(b);

    auto res = run.sim.run_until_quiescent(600);
    CHECK(res.pending_client_ops == 0);
    CHECK(run.clients[0]->done_ops.size() == 5);
    CHECK(run.clients[1]->done_ops.size() == 4);

    CheckOptions opt;
    opt.max_steps_multi = 4;
    opt.max_steps_single = 4;
    CheckReport rep = check_trace(run.topo, run.sim.trace(), opt);
    INFO(rep.summary());
    CHECK(rep.ok());
    CHECK(rep.stats.rots == 4);

    // Every partition pair across the two data centers converged.
    for (const std::string& k : {kx, ky, kz}) {
      uint32_t p = run.topo.locate(k);
      const Version* v0 = run.parts[run.topo.partition_node(0, p)]->store().chains().at(k).newest();
      const Version* v1 = run.parts[run.topo.partition_node(1, p)]->store().chains().at(k).newest();
      REQUIRE(v0 != nullptr);
      REQUIRE(v1 != nullptr);
      CHECK(v0->same_identity(*v1));
      CHECK(v0->value == v1->value);
    }
  }
}
