#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "rotkv/checker.hpp"
#include "rotkv/engine.hpp"
#include "rotkv/sim.hpp"

using namespace rotkv;

namespace {

uint64_t mix(uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::set<std::string> rules_of(const CheckReport& rep) {
  std::set<std::string> r;
  for (const auto& v : rep.violations) r.insert(v.rule);
  return r;
}

// -- synthetic trace helpers -------------------------------------------------

TraceEvent start_put(int64_t t, uint32_t node, uint64_t opid, std::string key) {
  TraceEvent e;
  e.t = t;
  e.node = node;
  e.ev = EvKind::op_start;
  e.op = OpKind::put;
  e.opid = opid;
  e.key = std::move(key);
  return e;
}

TraceEvent end_put(int64_t t, uint32_t node, uint64_t opid, std::string key, uint64_t ts,
                   uint32_t dc) {
  TraceEvent e;
  e.t = t;
  e.node = node;
  e.ev = EvKind::op_end;
  e.op = OpKind::put;
  e.opid = opid;
  e.key = std::move(key);
  e.vts = Timestamp(ts);
  e.vdc = dc;
  return e;
}

TraceEvent start_rot(int64_t t, uint32_t node, uint64_t opid, std::vector<std::string> keys,
                     bool probe = false) {
  TraceEvent e;
  e.t = t;
  e.node = node;
  e.ev = EvKind::op_start;
  e.op = OpKind::rot;
  e.opid = opid;
  e.keys = std::move(keys);
  e.probe = probe;
  return e;
}

struct Ret {
  std::string key;
  bool present = false;
  uint64_t ts = 0;
  uint32_t dc = 0;
};

TraceEvent end_rot(int64_t t, uint32_t node, uint64_t opid, std::vector<Ret> rets,
                   bool probe = false) {
  TraceEvent e;
  e.t = t;
  e.node = node;
  e.ev = EvKind::op_end;
  e.op = OpKind::rot;
  e.opid = opid;
  e.probe = probe;
  for (const Ret& r : rets) e.rets.push_back({r.key, r.present, Timestamp(r.ts), r.dc});
  return e;
}

TraceEvent msg(EvKind ev, int64_t t, uint64_t mid, uint32_t src, uint32_t dst, MsgKind kind,
               uint32_t bytes, uint64_t rot = 0, int32_t vpk = -1) {
  TraceEvent e;
  e.t = t;
  e.node = ev == EvKind::msg_send ? src : dst;
  e.ev = ev;
  e.mid = mid;
  e.src = src;
  e.dst = dst;
  e.mkind = kind;
  e.bytes = bytes;
  e.rot = rot;
  e.vpk = vpk;
  return e;
}

const Topology kTopo{2, 2, 2};  // partitions 0..3, clients 4..5, probers 6..7

uint64_t id(uint32_t client, uint32_t seq) { return make_opid(client, seq); }

}  // namespace

TEST_CASE("ancestor closure matches a Floyd-Warshall oracle on random dags") {
  uint64_t s = 12345;
  for (int trial = 0; trial < 25; trial++) {
    size_t n = 1 + mix(s) % 40;
    std::vector<std::pair<uint32_t, uint32_t>> edges;
    for (uint32_t i = 0; i < n; i++)
      for (uint32_t j = i + 1; j < n; j++)
        if (mix(s) % 4 == 0) edges.push_back({i, j});

    auto anc = ancestor_closure(n, edges);
    REQUIRE(anc.size() == n);

    // Independent oracle: boolean Floyd-Warshall.
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (auto [u, v] : edges) reach[u][v] = true;
    for (size_t k = 0; k < n; k++)
      for (size_t i = 0; i < n; i++)
        for (size_t j = 0; j < n; j++)
          if (reach[i][k] && reach[k][j]) reach[i][j] = true;

    size_t mismatches = 0;
    for (size_t i = 0; i < n; i++)
      for (size_t j = 0; j < n; j++)
        if (closure_has(anc, i, j) != reach[i][j]) mismatches++;
    CHECK(mismatches == 0);
  }
}

TEST_CASE("ancestor closure reports cycles as empty") {
  CHECK(ancestor_closure(2, {{0, 1}, {1, 0}}).empty());
  CHECK(ancestor_closure(3, {{0, 1}, {1, 2}, {2, 0}}).empty());
  CHECK_FALSE(ancestor_closure(3, {{0, 1}, {1, 2}, {0, 2}}).empty());
}

TEST_CASE("clean synthetic trace passes") {
  uint32_t c1 = kTopo.client_node(0);
  std::vector<TraceEvent> tr;
  tr.push_back(start_put(0, c1, id(c1, 1), "x"));
  tr.push_back(end_put(2, c1, id(c1, 1), "x", 10, 0));
  tr.push_back(start_rot(3, c1, id(c1, 2), {"x", "y"}));
  tr.push_back(end_rot(5, c1, id(c1, 2), {{"x", true, 10, 0}, {"y", false, 0, 0}}));
  auto rep = check_trace(kTopo, tr);
  CHECK(rep.ok());
  CHECK(rep.stats.ops == 2);
  CHECK(rep.stats.rots == 1);
  CHECK(rep.stats.puts == 1);
}

TEST_CASE("missing own write is a stale read and a session violation") {
  uint32_t c1 = kTopo.client_node(0);
  std::vector<TraceEvent> tr;
  tr.push_back(start_put(0, c1, id(c1, 1), "x"));
  tr.push_back(end_put(2, c1, id(c1, 1), "x", 10, 0));
  tr.push_back(start_rot(3, c1, id(c1, 2), {"x"}));
  tr.push_back(end_rot(5, c1, id(c1, 2), {{"x", false, 0, 0}}));
  auto rep = check_trace(kTopo, tr);
  CHECK_FALSE(rep.ok());
  auto rules = rules_of(rep);
  CHECK(rules.count("stale-read") == 1);
  CHECK(rules.count("session") == 1);
}

TEST_CASE("fractured snapshot across two keys is caught") {
  // Writer session: x then y.  Reader returns the y but misses the x.
  uint32_t c1 = kTopo.client_node(0), c2 = kTopo.client_node(1);
  std::vector<TraceEvent> tr;
  tr.push_back(start_put(0, c2, id(c2, 1), "x"));
  tr.push_back(end_put(2, c2, id(c2, 1), "x", 10, 0));
  tr.push_back(start_put(3, c2, id(c2, 2), "y"));
  tr.push_back(end_put(5, c2, id(c2, 2), "y", 11, 0));
  tr.push_back(start_rot(6, c1, id(c1, 1), {"x", "y"}));
  tr.push_back(end_rot(8, c1, id(c1, 1), {{"x", false, 0, 0}, {"y", true, 11, 0}}));
  auto rep = check_trace(kTopo, tr);
  auto rules = rules_of(rep);
  CHECK(rules.count("snapshot") == 1);
  CHECK(rules.count("stale-read") == 1);

  // Stale-but-present x, with the overwrite causally after it (the writer of
  // the fresher x had read the stale one first): still fractured.
  std::vector<TraceEvent> tr2;
  tr2.push_back(start_put(0, c1, id(c1, 1), "x"));
  tr2.push_back(end_put(1, c1, id(c1, 1), "x", 5, 0));
  tr2.push_back(start_rot(2, c2, id(c2, 1), {"x"}));
  tr2.push_back(end_rot(3, c2, id(c2, 1), {{"x", true, 5, 0}}));
  tr2.push_back(start_put(4, c2, id(c2, 2), "x"));
  tr2.push_back(end_put(5, c2, id(c2, 2), "x", 10, 0));
  tr2.push_back(start_put(6, c2, id(c2, 3), "y"));
  tr2.push_back(end_put(7, c2, id(c2, 3), "y", 11, 0));
  tr2.push_back(start_rot(8, c1, id(c1, 2), {"x", "y"}));
  tr2.push_back(end_rot(10, c1, id(c1, 2), {{"x", true, 5, 0}, {"y", true, 11, 0}}));
  auto rep2 = check_trace(kTopo, tr2);
  CHECK(rules_of(rep2).count("snapshot") == 1);

  // A concurrent overwrite of x (no causal tie to the returned x) that the
  // returned y depends on is stale but not a fractured pair.
  std::vector<TraceEvent> tr2b;
  tr2b.push_back(start_put(0, c1, id(c1, 1), "x"));
  tr2b.push_back(end_put(1, c1, id(c1, 1), "x", 5, 0));
  tr2b.push_back(start_put(2, c2, id(c2, 1), "x"));
  tr2b.push_back(end_put(4, c2, id(c2, 1), "x", 10, 0));
  tr2b.push_back(start_put(5, c2, id(c2, 2), "y"));
  tr2b.push_back(end_put(7, c2, id(c2, 2), "y", 11, 0));
  tr2b.push_back(start_rot(8, c1, id(c1, 2), {"x", "y"}));
  tr2b.push_back(end_rot(10, c1, id(c1, 2), {{"x", true, 5, 0}, {"y", true, 11, 0}}));
  auto rep2b = check_trace(kTopo, tr2b);
  CHECK(rules_of(rep2b) == std::set<std::string>{"stale-read"});

  // Returning both fresh values is clean.
  std::vector<TraceEvent> tr3 = tr2;
  tr3.back() = end_rot(10, c1, id(c1, 2), {{"x", true, 10, 0}, {"y", true, 11, 0}});
  CHECK(check_trace(kTopo, tr3).ok());
}

TEST_CASE("causally later write that loses the tie-break is flagged") {
  uint32_t c1 = kTopo.client_node(0);
  std::vector<TraceEvent> tr;
  tr.push_back(start_put(0, c1, id(c1, 1), "x"));
  tr.push_back(end_put(2, c1, id(c1, 1), "x", 10, 1));
  tr.push_back(start_put(3, c1, id(c1, 2), "x"));
  tr.push_back(end_put(5, c1, id(c1, 2), "x", 9, 0));  // later in session, smaller version
  auto rep = check_trace(kTopo, tr);
  CHECK(rules_of(rep).count("write-order") == 1);
}

TEST_CASE("returning a version nobody wrote is flagged") {
  uint32_t c1 = kTopo.client_node(0);
  std::vector<TraceEvent> tr;
  tr.push_back(start_rot(0, c1, id(c1, 1), {"x"}));
  tr.push_back(end_rot(2, c1, id(c1, 1), {{"x", true, 99, 0}}));
  auto rep = check_trace(kTopo, tr);
  CHECK(rules_of(rep) == std::set<std::string>{"unknown-version"});
}

TEST_CASE("overlapping and malformed operations are flagged") {
  uint32_t c1 = kTopo.client_node(0);
  std::vector<TraceEvent> tr;
  tr.push_back(start_put(0, c1, id(c1, 1), "x"));
  tr.push_back(start_put(1, c1, id(c1, 2), "y"));  // first op still running
  tr.push_back(end_put(2, c1, id(c1, 1), "x", 1, 0));
  tr.push_back(end_put(3, c1, id(c1, 2), "y", 2, 0));
  CHECK(rules_of(check_trace(kTopo, tr)).count("op-structure") == 1);

  std::vector<TraceEvent> tr2;
  tr2.push_back(start_rot(0, c1, id(c1, 1), {"x", "y"}));
  tr2.push_back(end_rot(2, c1, id(c1, 1), {{"y", false, 0, 0}, {"x", false, 0, 0}}));
  CHECK(rules_of(check_trace(kTopo, tr2)).count("op-structure") == 1);

  std::vector<TraceEvent> tr3;
  tr3.push_back(end_put(2, c1, id(c1, 1), "x", 1, 0));
  CHECK(rules_of(check_trace(kTopo, tr3)).count("op-structure") == 1);
}

TEST_CASE("transport anomalies are flagged") {
  uint32_t c1 = kTopo.client_node(0), p0 = kTopo.partition_node(0, 0);

  // Delivery without a send.
  std::vector<TraceEvent> tr;
  tr.push_back(msg(EvKind::msg_deliver, 1, 7, c1, p0, MsgKind::put_req, 30));
  CHECK(rules_of(check_trace(kTopo, tr)).count("transport") == 1);

  // Double delivery.
  std::vector<TraceEvent> tr2;
  tr2.push_back(msg(EvKind::msg_send, 0, 7, c1, p0, MsgKind::put_req, 30));
  tr2.push_back(msg(EvKind::msg_deliver, 1, 7, c1, p0, MsgKind::put_req, 30));
  tr2.push_back(msg(EvKind::msg_deliver, 2, 7, c1, p0, MsgKind::put_req, 30));
  CHECK(rules_of(check_trace(kTopo, tr2)).count("transport") == 1);

  // Payload size changed in flight.
  std::vector<TraceEvent> tr3;
  tr3.push_back(msg(EvKind::msg_send, 0, 7, c1, p0, MsgKind::put_req, 30));
  tr3.push_back(msg(EvKind::msg_deliver, 1, 7, c1, p0, MsgKind::put_req, 31));
  CHECK(rules_of(check_trace(kTopo, tr3)).count("transport") == 1);

  // Undelivered sends at the cut are not an anomaly.
  std::vector<TraceEvent> tr4;
  tr4.push_back(msg(EvKind::msg_send, 0, 7, c1, p0, MsgKind::put_req, 30));
  CHECK(check_trace(kTopo, tr4).ok());
}

TEST_CASE("multiple versions of one key in a response are flagged") {
  uint32_t c1 = kTopo.client_node(0), p0 = kTopo.partition_node(0, 0);
  std::vector<TraceEvent> tr;
  uint64_t rot = id(c1, 1);
  tr.push_back(msg(EvKind::msg_send, 0, 1, c1, p0, MsgKind::rot_req, 30, rot));
  tr.push_back(msg(EvKind::msg_deliver, 1, 1, c1, p0, MsgKind::rot_req, 30, rot));
  tr.push_back(msg(EvKind::msg_send, 1, 2, p0, c1, MsgKind::rot_resp, 60, rot, 2));
  tr.push_back(msg(EvKind::msg_deliver, 2, 2, p0, c1, MsgKind::rot_resp, 60, rot, 2));
  auto rep = check_trace(kTopo, tr);
  CHECK(rules_of(rep).count("one-version") == 1);
}

TEST_CASE("step bounds and server-side holding are flagged") {
  uint32_t c1 = kTopo.client_node(0), p0 = kTopo.partition_node(0, 0);
  uint64_t rot = id(c1, 1);

  // Two-step exchange passes a limit of 2, fails a limit of 1.
  std::vector<TraceEvent> tr;
  tr.push_back(msg(EvKind::msg_send, 0, 1, c1, p0, MsgKind::rot_req, 30, rot, -1));
  tr.push_back(msg(EvKind::msg_deliver, 1, 1, c1, p0, MsgKind::rot_req, 30, rot, -1));
  tr.push_back(msg(EvKind::msg_send, 1, 2, p0, c1, MsgKind::rot_resp, 40, rot, 1));
  tr.push_back(msg(EvKind::msg_deliver, 2, 2, p0, c1, MsgKind::rot_resp, 40, rot, 1));
  CheckOptions opt;
  opt.max_steps_single = 2;
  opt.max_steps_multi = 2;
  opt.nonblocking_reads = true;
  CHECK(check_trace(kTopo, tr, opt).ok());
  CHECK(check_trace(kTopo, tr, opt).stats.max_rot_steps == 2);
  opt.max_steps_single = 1;
  CHECK(rules_of(check_trace(kTopo, tr, opt)).count("steps") == 1);

  // A response sent two ticks after the enabling delivery was held.
  std::vector<TraceEvent> tr2;
  tr2.push_back(msg(EvKind::msg_send, 0, 1, c1, p0, MsgKind::rot_req, 30, rot, -1));
  tr2.push_back(msg(EvKind::msg_deliver, 1, 1, c1, p0, MsgKind::rot_req, 30, rot, -1));
  tr2.push_back(msg(EvKind::msg_send, 3, 2, p0, c1, MsgKind::rot_resp, 40, rot, 1));
  tr2.push_back(msg(EvKind::msg_deliver, 4, 2, p0, c1, MsgKind::rot_resp, 40, rot, 1));
  CheckOptions opt2;
  opt2.nonblocking_reads = true;
  CHECK(rules_of(check_trace(kTopo, tr2, opt2)).count("nonblocking") == 1);
  opt2.nonblocking_reads = false;
  CHECK(check_trace(kTopo, tr2, opt2).ok());
}

TEST_CASE("quiesced probes must return the global winner") {
  uint32_t c1 = kTopo.client_node(0);
  uint32_t prober = kTopo.prober_node(0);
  std::vector<TraceEvent> tr;
  tr.push_back(start_put(0, c1, id(c1, 1), "x"));
  tr.push_back(end_put(2, c1, id(c1, 1), "x", 10, 0));

  // Probe after the last write: must see 10@0.
  tr.push_back(start_rot(20, prober, id(prober, 1), {"x"}, true));
  tr.push_back(end_rot(22, prober, id(prober, 1), {{"x", false, 0, 0}}, true));
  auto rep = check_trace(kTopo, tr);
  CHECK(rules_of(rep).count("diverged") == 1);
  CHECK(rep.stats.converged_probe_rots == 1);

  // The same stale read from a regular client is allowed (mere lag).
  std::vector<TraceEvent> tr2;
  tr2.push_back(start_put(0, c1, id(c1, 1), "x"));
  tr2.push_back(end_put(2, c1, id(c1, 1), "x", 10, 0));
  uint32_t c2 = kTopo.client_node(1);
  tr2.push_back(start_rot(20, c2, id(c2, 1), {"x"}));
  tr2.push_back(end_rot(22, c2, id(c2, 1), {{"x", false, 0, 0}}));
  CHECK(check_trace(kTopo, tr2).ok());

  // A probe concurrent with the writes is not eligible.
  std::vector<TraceEvent> tr3;
  tr3.push_back(start_put(0, c1, id(c1, 1), "x"));
  tr3.push_back(start_rot(1, prober, id(prober, 1), {"x"}, true));
  tr3.push_back(end_put(2, c1, id(c1, 1), "x", 10, 0));
  tr3.push_back(end_rot(3, prober, id(prober, 1), {{"x", false, 0, 0}}, true));
  auto rep3 = check_trace(kTopo, tr3);
  CHECK(rep3.ok());
  CHECK(rep3.stats.converged_probe_rots == 0);

  // Matching the winner passes.
  std::vector<TraceEvent> tr4;
  tr4.push_back(start_put(0, c1, id(c1, 1), "x"));
  tr4.push_back(end_put(2, c1, id(c1, 1), "x", 10, 0));
  tr4.push_back(start_rot(20, prober, id(prober, 1), {"x"}, true));
  tr4.push_back(end_rot(22, prober, id(prober, 1), {{"x", true, 10, 0}}, true));
  CHECK(check_trace(kTopo, tr4).ok());
}

// ---- end-to-end: the checker against real engine traces --------------------

namespace {

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
    if (token != next) return;
    size_t i = next++;
    steps[i].fire(api);
  }

 private:
  void arm(ClientApi& api) {
    if (next >= steps.size()) return;
    int64_t now = api.runtime().now_ms();
    if (steps[next].at <= now) {
      size_t i = next++;
      steps[i].fire(api);
    } else {
      api.runtime().set_alarm(steps[next].at - now, next);
    }
  }
};

std::string key_on(const Topology& topo, uint32_t part, const std::string& tag) {
  for (int i = 0; i < 10000; i++) {
    std::string k = tag + std::to_string(i);
    if (topo.locate(k) == part) return k;
  }
  FAIL("no key found");
  return "";
}

// Runs a small cross-dc workload and returns the trace.
std::vector<TraceEvent> engine_trace(const EngineConfig& cfg, uint64_t seed,
                                     int64_t client_to_partition_delay = 0,
                                     uint32_t delayed_partition = 0) {
  Topology topo{2, 2, 2};
  std::string kx = key_on(topo, 0, "x");
  std::string ky = key_on(topo, 1, "y");
  Schedule sched;
  sched.seed = seed;
  sched.default_law = DelayLaw::adversarial(1, 8);
  if (client_to_partition_delay > 0) {
    sched.default_law = DelayLaw::fixed(1);
    sched.link_overrides[{topo.client_node(0), topo.partition_node(0, delayed_partition)}] =
        DelayLaw::fixed(client_to_partition_delay);
  }
  Simulator sim(topo, sched);
  for (uint32_t d = 0; d < 2; d++)
    for (uint32_t p = 0; p < 2; p++) {
      uint32_t pid = topo.partition_node(d, p);
      sim.add_node(pid, make_partition(cfg, topo, pid));
    }

  auto mk = [&](uint32_t ci, std::vector<TimedOps::Step> steps) {
    auto w = std::make_unique<TimedOps>();
    w->steps = std::move(steps);
    uint32_t cid = topo.client_node(ci);
    sim.add_node(cid, make_client(cfg, topo, cid, std::move(w)));
  };

  // Reader in dc0.
  std::vector<TimedOps::Step> a;
  a.push_back({0, [&](ClientApi& c) { c.rot({kx, ky}); }});
  a.push_back({25, [&](ClientApi& c) { c.rot({kx, ky}); }});
  mk(0, std::move(a));

  // Writer session in dc1: x then y (y causally after x).
  std::vector<TimedOps::Step> b;
  b.push_back({1, [&](ClientApi& c) { c.put(kx, "x0"); }});
  b.push_back({1, [&](ClientApi& c) { c.put(ky, "y1"); }});
  b.push_back({40, [&](ClientApi& c) { c.rot({kx, ky}); }});
  mk(1, std::move(b));

  auto res = sim.run_until_quiescent(3000);
  REQUIRE(res.pending_client_ops == 0);
  return sim.take_trace();
}

}  // namespace

TEST_CASE("engine traces with snapshot machinery check clean") {
  Topology topo{2, 2, 2};
  for (RotMode mode : {RotMode::one_and_half, RotMode::two_round}) {
    for (uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
      CAPTURE(rot_mode_name(mode));
      CAPTURE(seed);
      EngineConfig cfg;
      cfg.engine = EngineKind::contrarian;
      cfg.rot_mode = mode;
      auto tr = engine_trace(cfg, seed);
      CheckOptions opt;
      opt.nonblocking_reads = true;
      opt.max_steps_multi = mode == RotMode::one_and_half ? 3 : 4;
      opt.max_steps_single = mode == RotMode::one_and_half ? 2 : 4;
      auto rep = check_trace(topo, tr, opt);
      INFO(rep.summary());
      CHECK(rep.ok());
      CHECK(rep.stats.rots >= 3);
      CHECK(rep.stats.puts == 2);
    }
  }
}

TEST_CASE("the plain newest-value engine fractures snapshots under skewed delays") {
  // One reader with a slow link to the y-partition: it samples x before the
  // writer's x lands and y after the causally-later y landed.  The engines
  // with snapshot machinery stay clean on the same schedule.
  Topology topo{2, 2, 2};

  EngineConfig naive;
  naive.engine = EngineKind::read_latest;
  size_t fractured = 0;
  for (int64_t delay : {6, 10, 14, 18}) {
    auto tr = engine_trace(naive, 1, delay, 1);
    auto rep = check_trace(topo, tr);
    // Only consistency rules may fire, and the fractured pair must be among
    // them; wire-level and structural rules stay silent.
    for (const auto& v : rep.violations)
      CHECK((v.rule == "snapshot" || v.rule == "stale-read" || v.rule == "session"));
    if (rules_of(rep).count("snapshot")) fractured++;
  }
  CHECK(fractured > 0);

  EngineConfig safe;
  safe.engine = EngineKind::contrarian;
  for (int64_t delay : {6, 10, 14, 18}) {
    auto tr = engine_trace(safe, 1, delay, 1);
    auto rep = check_trace(topo, tr);
    INFO(rep.summary());
    CHECK(rep.ok());
  }
}
