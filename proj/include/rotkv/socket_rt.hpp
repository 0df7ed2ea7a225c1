#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "rotkv/bench.hpp"
#include "rotkv/runtime.hpp"
#include "rotkv/sim.hpp"
#include "rotkv/topology.hpp"

namespace rotkv {

// Runs the same nodes over real stream sockets: one thread per node, plus a
// router thread switching frames between per-node socket pairs.  Timers run
// on the wall clock; frames use the documented encode()/decode() format.
// Unlike the simulator, runs are not deterministic, but the trace and merged
// counters keep the same shape, so the same reporting and checking code
// applies to both backends.
class SocketCluster {
 public:
  SocketCluster(Topology topo, uint64_t seed);
  ~SocketCluster();

  SocketCluster(const SocketCluster&) = delete;
  SocketCluster& operator=(const SocketCluster&) = delete;

  void add_node(uint32_t id, std::unique_ptr<Node> n);
  void set_clock_offset(uint32_t node, int64_t offset_ms);
  // Event recording, on by default; switch off for long runs (counters only).
  void set_record_trace(bool on) { record_trace_ = on; }

  // Starts every node and the router, lets them run for wall_ms of wall
  // time, stops them, and joins.  Callable once; throws std::runtime_error
  // if any node or the router failed.
  RunResult run_for(int64_t wall_ms);

  // Valid after run_for returned.
  Counters merged_counters() const;
  std::vector<TraceEvent> take_trace();  // stably ordered by wall ms
  const Topology& topology() const { return topo_; }

 private:
  friend class SocketRuntime;
  struct NodeSlot;

  void node_main(NodeSlot& s);
  void router_main();
  int64_t wall_now_ms() const;
  void fail(const std::string& what);

  Topology topo_;
  uint64_t seed_;
  std::chrono::steady_clock::time_point t0_;
  std::atomic<bool> stop_{false};
  bool ran_ = false;
  bool record_trace_ = true;

  std::vector<std::unique_ptr<NodeSlot>> slots_;
  std::thread router_;

  mutable std::mutex trace_mu_;
  std::vector<TraceEvent> trace_;
  std::mutex err_mu_;
  std::string error_;
};

// Socket twin of run_experiment: same config, same result shape, wall-clock
// durations.  Each client gets a private written-key set and no convergence
// probes run (the shared set is a simulator convenience, and probe timing
// assumes deterministic quiescence), so converged-probe checks are vacuous
// here.  The schedule's delay law is ignored; real delivery is what it is.
ExperimentResult run_socket_experiment(const ExperimentConfig& cfg);

}  // namespace rotkv
