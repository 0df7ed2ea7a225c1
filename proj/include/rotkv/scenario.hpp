#pragma once

#include <string>
#include <vector>

#include "rotkv/checker.hpp"
#include "rotkv/engine.hpp"
#include "rotkv/sim.hpp"

namespace rotkv {

// Directed, fully scripted schedules that replay the classic interleavings of
// a two-key read against a causally dependent write pair, on two partitions
// in one DC.  Scripts are engine-agnostic: the same timed operations and link
// delays run against any engine, and the trace shows how (or whether) that
// engine kept the read's snapshot causal.  Names are stable identifiers,
// shared by the CLI and the test suites:
//
//   fig1         both keys are seeded; the read's second leg is slowed so the
//                dependent write pair lands between its two leg arrivals.  A
//                causal engine returns both seed values; an engine that just
//                reads the latest version returns the torn pair.
//   fig2         same operations with both legs fast: the read finishes first
//                and only its server-side footprint remains.  Exercises the
//                write path of the readers-check engine, which must consult
//                the first key's partition before the second write becomes
//                visible.
//   e_star_demo  the straddle of fig1 with the second key unseeded: the write
//                pair overwrites key one and creates key two while the read
//                is in flight.  A causal engine returns (seed, absent).
struct ScenarioResult {
  std::string name;
  Topology topo{2, 1, 3};
  RunResult run;
  Counters counters;
  std::vector<TraceEvent> trace;
  CheckReport check;

  // Script cast, for assertions and reporting.
  std::string key_x, key_y;         // the contended keys, partitions 0 and 1
  uint64_t reader_rot = 0;          // opid of the straddling read
  uint64_t put_x1 = 0, put_y1 = 0;  // opids of the dependent write pair
  std::vector<MaybeVersion> reader_returns;  // what the read saw, {x, y} order
};

const std::vector<std::string>& scenario_names();

// Replays one named script under the simulator and runs the checker over the
// trace.  Deterministic for a given (name, engine).  Throws
// std::invalid_argument for names not in scenario_names().
ScenarioResult run_scenario(const std::string& name, const EngineConfig& engine);

}  // namespace rotkv
