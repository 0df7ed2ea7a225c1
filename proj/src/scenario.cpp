#include "rotkv/scenario.hpp"

#include <functional>
#include <stdexcept>
#include <utility>

namespace rotkv {

namespace {

// Fixed-time operation script for one client.  Each step fires once its time
// arrives and the previous operation has completed.
struct Script final : Workload {
  struct Step {
    int64_t at;
    std::function<void(ClientApi&)> fire;
  };
  std::vector<Step> steps;
  std::vector<OpResult>* out = nullptr;

  void ready(ClientApi& api) override { arm(api); }
  void done(ClientApi& api, const OpResult& r) override {
    if (out) out->push_back(r);
    arm(api);
  }
  void alarm(ClientApi& api, uint64_t token) override {
    if (token != next_) return;  // superseded wake-up
    fire_next(api);
  }

 private:
  void arm(ClientApi& api) {
    if (next_ >= steps.size()) return;
    int64_t now = api.runtime().now_ms();
    if (steps[next_].at <= now) {
      fire_next(api);
    } else {
      api.runtime().set_alarm(steps[next_].at - now, next_);
    }
  }
  void fire_next(ClientApi& api) {
    size_t i = next_++;
    steps[i].fire(api);
  }

  size_t next_ = 0;
};

std::string key_on(const Topology& topo, uint32_t part, const std::string& tag) {
  for (int i = 0;; i++) {
    std::string k = tag + std::to_string(i);
    if (topo.locate(k) == part) return k;
  }
}

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"fig1", "fig2", "e_star_demo"};
  return names;
}

ScenarioResult run_scenario(const std::string& name, const EngineConfig& engine) {
  bool slow_leg, seed_y;
  if (name == "fig1") {
    slow_leg = true;
    seed_y = true;
  } else if (name == "fig2") {
    slow_leg = false;
    seed_y = true;
  } else if (name == "e_star_demo") {
    slow_leg = true;
    seed_y = false;
  } else {
    throw std::invalid_argument("unknown scenario: " + name);
  }

  ScenarioResult res;
  res.name = name;
  res.topo = Topology{2, 1, 3};
  res.topo.validate();
  res.key_x = key_on(res.topo, 0, "x");
  res.key_y = key_on(res.topo, 1, "y");

  uint32_t seeder = res.topo.client_node(0);
  uint32_t reader = res.topo.client_node(1);
  uint32_t writer = res.topo.client_node(2);

  Schedule sched;
  sched.seed = 1;
  sched.default_law = DelayLaw::fixed(1);
  // The read's second leg crosses the wire while the dependent writes land.
  if (slow_leg)
    sched.link_overrides[{reader, res.topo.partition_node(0, 1)}] = DelayLaw::fixed(25);

  Simulator sim(res.topo, sched);
  for (uint32_t p = 0; p < res.topo.partitions; p++) {
    uint32_t id = res.topo.partition_node(0, p);
    sim.add_node(id, make_partition(engine, res.topo, id));
  }

  std::vector<OpResult> reader_done, writer_done;
  auto add_client = [&](uint32_t id, std::vector<Script::Step> steps,
                        std::vector<OpResult>* out) {
    auto s = std::make_unique<Script>();
    s->steps = std::move(steps);
    s->out = out;
    sim.add_node(id, make_client(engine, res.topo, id, std::move(s)));
  };
  auto put = [](std::string k, std::string v) {
    return [k = std::move(k), v = std::move(v)](ClientApi& api) { api.put(k, v); };
  };
  auto rot = [](std::vector<std::string> keys) {
    return [keys = std::move(keys)](ClientApi& api) { api.rot(keys); };
  };

  std::vector<Script::Step> seed_steps;
  seed_steps.push_back({0, put(res.key_x, "X0")});
  if (seed_y) seed_steps.push_back({3, put(res.key_y, "Y0")});
  add_client(seeder, std::move(seed_steps), nullptr);
  add_client(reader, {{10, rot({res.key_x, res.key_y})}}, &reader_done);
  // The writer overwrites the first key, then writes the second with that
  // overwrite in its causal past.
  add_client(writer, {{12, put(res.key_x, "X1")}, {16, put(res.key_y, "Y1")}}, &writer_done);

  res.run = sim.run_until_quiescent(80);
  res.counters = sim.merged_counters();
  res.trace = sim.take_trace();
  res.check = check_trace(res.topo, res.trace, CheckOptions{});

  if (reader_done.size() == 1) {
    res.reader_rot = reader_done[0].opid;
    res.reader_returns = reader_done[0].returns;
  }
  if (writer_done.size() == 2) {
    res.put_x1 = writer_done[0].opid;
    res.put_y1 = writer_done[1].opid;
  }
  return res;
}

}  // namespace rotkv
