#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rotkv/scenario.hpp"
#include "rotkv/trace.hpp"

using namespace rotkv;

namespace {

EngineConfig eng(EngineKind k, RotMode m = RotMode::one_and_half) {
  EngineConfig c;
  c.engine = k;
  c.rot_mode = m;
  return c;
}

}  // namespace

TEST_CASE("locate is pure in (key, N), balanced, and rejects a single partition") {
  Topology a{8, 1, 1};
  Topology b{8, 2, 4};
  CHECK(a.locate("someKey") == b.locate("someKey"));  // M and clients don't matter
  CHECK(a.locate("k123") == a.locate("k123"));

  const int keys = 100000;
  std::vector<uint32_t> load(8, 0);
  for (int i = 0; i < keys; i++) load[a.locate("key" + std::to_string(i))]++;
  const double expect = keys / 8.0;
  double chi2 = 0;
  for (uint32_t c : load) {
    CHECK(std::abs(c - expect) / expect < 0.05);
    chi2 += (c - expect) * (c - expect) / expect;
  }
  CHECK(chi2 < 24.32);  // 7 dof at p = 0.001

  Topology bad{1, 1, 1};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("scenario names are stable identifiers; unknown names are rejected") {
  const auto& names = scenario_names();
  REQUIRE(names.size() == 3);
  CHECK(names[0] == "fig1");
  CHECK(names[1] == "fig2");
  CHECK(names[2] == "e_star_demo");
  CHECK_THROWS_AS(run_scenario("fig3", EngineConfig{}), std::invalid_argument);
}

TEST_CASE("fig1: causal engines return both seed values under the straddle") {
  for (EngineConfig cfg : {eng(EngineKind::contrarian, RotMode::one_and_half),
                           eng(EngineKind::contrarian, RotMode::two_round),
                           eng(EngineKind::cure), eng(EngineKind::cclo)}) {
    CAPTURE(engine_name(cfg.engine));
    CAPTURE(rot_mode_name(cfg.rot_mode));
    ScenarioResult r = run_scenario("fig1", cfg);
    CHECK(r.run.pending_client_ops == 0);
    REQUIRE(r.reader_returns.size() == 2);
    REQUIRE(r.reader_returns[0].present);
    REQUIRE(r.reader_returns[1].present);
    CHECK(r.reader_returns[0].v.value == "X0");
    CHECK(r.reader_returns[1].v.value == "Y0");
    INFO(r.check.summary());
    CHECK(r.check.ok());
  }
}

TEST_CASE("fig1: the read-latest strawman returns the torn pair, flagged exactly once") {
  ScenarioResult r = run_scenario("fig1", eng(EngineKind::read_latest));
  CHECK(r.run.pending_client_ops == 0);
  REQUIRE(r.reader_returns.size() == 2);
  REQUIRE(r.reader_returns[0].present);
  REQUIRE(r.reader_returns[1].present);
  CHECK(r.reader_returns[0].v.value == "X0");
  CHECK(r.reader_returns[1].v.value == "Y1");
  INFO(r.check.summary());
  REQUIRE(r.check.violations.size() == 1);
  // The cut rule names the overwrite pulled into the read's causal past by
  // the returned dependent value.
  CHECK(r.check.violations[0].rule == "stale-read");
}

TEST_CASE("fig2: the write path consults the read partition before exposing the write") {
  ScenarioResult r = run_scenario("fig2", eng(EngineKind::cclo));
  REQUIRE(r.reader_returns.size() == 2);
  REQUIRE(r.reader_returns[0].present);
  REQUIRE(r.reader_returns[1].present);
  CHECK(r.reader_returns[0].v.value == "X0");
  CHECK(r.reader_returns[1].v.value == "Y0");
  INFO(r.check.summary());
  CHECK(r.check.ok());

  uint32_t px = r.topo.partition_node(0, 0);
  uint32_t py = r.topo.partition_node(0, 1);
  int64_t last_check_delivery = -1;
  int64_t last_put_ack_send = -1;
  int check_deliveries = 0;
  for (const TraceEvent& e : r.trace) {
    if (e.ev == EvKind::msg_deliver && e.mkind == MsgKind::readers_check_req && e.src == py &&
        e.dst == px) {
      check_deliveries++;
      last_check_delivery = std::max(last_check_delivery, e.t);
    }
    if (e.ev == EvKind::msg_send && e.mkind == MsgKind::put_resp && e.src == py)
      last_put_ack_send = std::max(last_put_ack_send, e.t);
  }
  CHECK(check_deliveries == 2);  // the seeding write of y, then the dependent one
  REQUIRE(last_check_delivery >= 0);
  REQUIRE(last_put_ack_send >= 0);
  // The interrogation reached the read key's partition strictly before the
  // dependent write was acknowledged (made visible).
  CHECK(last_check_delivery < last_put_ack_send);

  CHECK(r.counters.readers_checks == 2);
  CHECK(r.counters.readers_check_rotids_cumulative == 1);  // the reader, reported once
  CHECK(r.counters.readers_check_rotids_distinct == 1);
}

TEST_CASE("fig2 runs clean on every engine") {
  for (EngineKind k : {EngineKind::contrarian, EngineKind::cure, EngineKind::cclo,
                       EngineKind::read_latest}) {
    CAPTURE(engine_name(k));
    ScenarioResult r = run_scenario("fig2", eng(k));
    CHECK(r.run.pending_client_ops == 0);
    INFO(r.check.summary());
    CHECK(r.check.ok());
  }
}

TEST_CASE("e_star_demo: a read split across a dependent write pair stays causal") {
  for (EngineConfig cfg : {eng(EngineKind::contrarian, RotMode::one_and_half),
                           eng(EngineKind::contrarian, RotMode::two_round),
                           eng(EngineKind::cure), eng(EngineKind::cclo)}) {
    CAPTURE(engine_name(cfg.engine));
    CAPTURE(rot_mode_name(cfg.rot_mode));
    ScenarioResult r = run_scenario("e_star_demo", cfg);
    CHECK(r.run.pending_client_ops == 0);
    REQUIRE(r.reader_returns.size() == 2);
    REQUIRE(r.reader_returns[0].present);
    CHECK(r.reader_returns[0].v.value == "X0");
    CHECK_FALSE(r.reader_returns[1].present);  // the dependent write stays out
    INFO(r.check.summary());
    CHECK(r.check.ok());
  }

  ScenarioResult s = run_scenario("e_star_demo", eng(EngineKind::read_latest));
  REQUIRE(s.reader_returns.size() == 2);
  REQUIRE(s.reader_returns[0].present);
  REQUIRE(s.reader_returns[1].present);
  CHECK(s.reader_returns[0].v.value == "X0");
  CHECK(s.reader_returns[1].v.value == "Y1");
  INFO(s.check.summary());
  REQUIRE(s.check.violations.size() == 1);
  CHECK(s.check.violations[0].rule == "stale-read");
}

TEST_CASE("scenario replays are deterministic") {
  for (const std::string& name : scenario_names()) {
    ScenarioResult a = run_scenario(name, eng(EngineKind::cclo));
    ScenarioResult b = run_scenario(name, eng(EngineKind::cclo));
    TraceMeta meta{2, 1, 3, "cclo"};
    CHECK(trace_to_jsonl(meta, a.topo, a.trace) == trace_to_jsonl(meta, b.topo, b.trace));
  }
}
