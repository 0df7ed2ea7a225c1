#pragma once

#include <map>
#include <memory>
#include <queue>
#include <vector>

#include "rotkv/runtime.hpp"
#include "rotkv/topology.hpp"

namespace rotkv {

// Per-message delay distribution.  All laws are finite: every sent message
// is delivered exactly once.
struct DelayLaw {
  enum class Kind { fixed, uniform, adversarial } kind = Kind::fixed;
  int64_t lo = 1, hi = 1;

  static DelayLaw fixed(int64_t d) { return {Kind::fixed, d, d}; }
  static DelayLaw uniform(int64_t lo, int64_t hi) { return {Kind::uniform, lo, hi}; }
  // Uniform with occasional multiplied stragglers; reorders heavily.
  static DelayLaw adversarial(int64_t lo, int64_t hi) { return {Kind::adversarial, lo, hi}; }
};

struct Schedule {
  uint64_t seed = 1;
  DelayLaw default_law = DelayLaw::fixed(1);
  std::map<std::pair<uint32_t, uint32_t>, DelayLaw> link_overrides;  // (src,dst)
  bool compute_digests = false;
  // Event recording; switch off for long runs where only counters matter
  // (a full trace of a multi-minute run does not fit in memory).
  bool record_trace = true;
};

struct RunResult {
  int64_t end_time = 0;
  bool hit_limit = false;
  uint64_t pending_client_ops = 0;  // liveness failure when > 0 at the end
};

// Single-threaded discrete-event simulator.  Runs are a pure function of
// (topology, schedule, node behavior): events execute in (time, sequence)
// order and all randomness derives from the schedule seed.
class Simulator {
 public:
  Simulator(Topology topo, Schedule sched);
  ~Simulator();

  void add_node(uint32_t id, std::unique_ptr<Node> n);
  Node* node(uint32_t id);

  // Processes events in timestamp order until the queue is empty or
  // simulated time would exceed limit_ms.
  RunResult run_until_quiescent(int64_t limit_ms);

  int64_t now_ms() const { return now_; }
  void set_clock_offset(uint32_t node, int64_t offset_ms);

  const std::vector<TraceEvent>& trace() const { return trace_; }
  std::vector<TraceEvent> take_trace() { return std::move(trace_); }
  Counters merged_counters() const;
  const Topology& topology() const { return topo_; }

 private:
  friend class SimRuntime;
  struct Ev;
  struct NodeSlot;

  void send_from(uint32_t src, Message m);
  void set_timer_for(uint32_t node, int64_t period_ms, TimerKind kind);
  void set_alarm_for(uint32_t node, int64_t delay_ms, uint64_t token);
  int64_t draw_delay(uint32_t src, uint32_t dst);
  void push(Ev e);

  Topology topo_;
  Schedule sched_;
  int64_t now_ = 0;
  bool started_ = false;
  uint64_t seq_ = 0;
  uint64_t next_mid_ = 1;
  uint64_t delay_rng_;
  std::vector<std::unique_ptr<NodeSlot>> slots_;
  std::priority_queue<Ev, std::vector<Ev>, bool (*)(const Ev&, const Ev&)> queue_;
  std::vector<TraceEvent> trace_;
};

}  // namespace rotkv
