#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rotkv/bench.hpp"
#include "rotkv/checker.hpp"
#include "rotkv/engine.hpp"
#include "rotkv/socket_rt.hpp"

using namespace rotkv;

namespace {

// Each socket client gets a private WrittenKeys: the shared set is a
// simulator convenience and is not safe across node threads.
void add_load_clients(SocketCluster& cl, const EngineConfig& eng, const WorkloadConfig& wc,
                      int64_t deadline_ms) {
  const Topology& topo = cl.topology();
  auto pool = std::make_shared<const std::vector<std::vector<std::string>>>(
      build_key_pool(topo, wc.keys_per_partition));
  for (uint32_t i = 0; i < topo.clients; i++) {
    uint32_t id = topo.client_node(i);
    cl.add_node(id, make_client(eng, topo, id,
                                std::make_unique<BenchWorkload>(wc, topo, pool,
                                                                std::make_shared<WrittenKeys>(),
                                                                deadline_ms)));
  }
}

void add_partitions(SocketCluster& cl, const EngineConfig& eng) {
  const Topology& topo = cl.topology();
  for (uint32_t d = 0; d < topo.dcs; d++)
    for (uint32_t p = 0; p < topo.partitions; p++) {
      uint32_t id = topo.partition_node(d, p);
      cl.add_node(id, make_partition(eng, topo, id));
    }
}

struct RogueClient final : Node {
  uint32_t target;
  explicit RogueClient(uint32_t t) : target(t) {}
  void start(Runtime& rt) override {
    Message m;
    m.dst = target;
    m.body = HeartbeatBody{1, {}};
    rt.send(std::move(m));
  }
  void on_message(Runtime&, const Message&) override {}
};

}  // namespace

TEST_CASE("a small cluster runs a live load over sockets and the trace checks clean") {
  EngineKind kinds[] = {EngineKind::contrarian, EngineKind::cure, EngineKind::cclo};
  for (EngineKind k : kinds) {
    CAPTURE(static_cast<int>(k));
    Topology topo{2, 1, 2};
    SocketCluster cl(topo, 7);
    EngineConfig eng;
    eng.engine = k;
    add_partitions(cl, eng);
    WorkloadConfig wc;
    wc.w = 0.2;
    wc.p = 2;
    wc.z = 0;
    wc.keys_per_partition = 32;
    add_load_clients(cl, eng, wc, 250);

    RunResult r = cl.run_for(500);
    CHECK(r.pending_client_ops == 0);

    Counters c = cl.merged_counters();
    CHECK(c.rots > 0);
    CHECK(c.puts > 0);
    CHECK(c.ops_completed == c.rots + c.puts);

    CheckReport rep = check_trace(topo, cl.take_trace());
    if (!rep.ok()) CAPTURE(rep.summary());
    CHECK(rep.ok());
    CHECK(rep.stats.rots == c.rots);
    CHECK(rep.stats.puts == c.puts);
  }
}

TEST_CASE("a socket run rejects traffic outside the topology contract") {
  SUBCASE("clients may not message clients") {
    Topology topo{2, 1, 2};
    SocketCluster cl(topo, 3);
    EngineConfig eng;
    add_partitions(cl, eng);
    cl.add_node(topo.client_node(0), std::make_unique<RogueClient>(topo.client_node(1)));
    CHECK_THROWS_AS(cl.run_for(200), std::runtime_error);
  }
  SUBCASE("sends to an absent node fail the run") {
    Topology topo{2, 1, 2};
    SocketCluster cl(topo, 3);
    EngineConfig eng;
    add_partitions(cl, eng);
    cl.add_node(topo.client_node(0), std::make_unique<RogueClient>(topo.prober_node(0)));
    CHECK_THROWS_AS(cl.run_for(200), std::runtime_error);
  }
}

TEST_CASE("socket runs honor per-node physical clock offsets") {
  Topology topo{2, 1, 2};
  SocketCluster cl(topo, 11);
  EngineConfig eng;
  eng.engine = EngineKind::cure;
  add_partitions(cl, eng);
  cl.set_clock_offset(topo.partition_node(0, 0), 2);
  WorkloadConfig wc;
  wc.w = 0.3;
  wc.p = 2;
  wc.z = 0;
  wc.keys_per_partition = 32;
  add_load_clients(cl, eng, wc, 250);

  RunResult r = cl.run_for(500);
  CHECK(r.pending_client_ops == 0);
  CheckReport rep = check_trace(topo, cl.take_trace());
  if (!rep.ok()) CAPTURE(rep.summary());
  CHECK(rep.ok());
}
