#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rotkv/message.hpp"
#include "rotkv/trace.hpp"

namespace rotkv {

// Per-node operation and traffic counters, merged after a run.
struct Counters {
  std::array<uint64_t, kMsgKinds> msgs_sent{};
  std::array<uint64_t, kMsgKinds> bytes_sent{};
  uint64_t ops_started = 0, ops_completed = 0;
  uint64_t rots = 0, puts = 0;
  uint64_t keys_read = 0;  // individual keys touched by read transactions
  std::vector<int64_t> rot_latencies_ms;
  std::vector<int64_t> put_latencies_ms;

  // Partition-side blocking (reads or puts held for a clock condition).
  uint64_t blocked_reads = 0;
  int64_t blocked_read_ms = 0;
  uint64_t blocked_puts = 0;

  // Readers-check accounting, one-round engine.
  uint64_t readers_checks = 0;
  uint64_t readers_check_messages = 0;
  uint64_t readers_check_rotids_cumulative = 0;
  uint64_t readers_check_rotids_distinct = 0;
  uint64_t readers_check_bytes = 0;

  void merge(const Counters& o);
};

// Backend-facing handle a node uses to interact with the world.  The same
// node code runs on the simulator and on the socket backend.
class Runtime {
 public:
  virtual ~Runtime() = default;

  virtual uint32_t node_id() const = 0;
  // Trace timebase: simulated ms, or wall ms since run start.
  virtual int64_t now_ms() const = 0;
  // This node's physical clock reading (now + configured offset).
  virtual int64_t physical_now_ms() const = 0;

  virtual void send(Message m) = 0;
  // Periodic timer; period must be > 0.
  virtual void set_timer(int64_t period_ms, TimerKind kind) = 0;
  // One-shot callback after delay_ms (>= 0), delivered to on_alarm(token).
  virtual void set_alarm(int64_t delay_ms, uint64_t token) = 0;

  virtual void emit(TraceEvent e) = 0;
  virtual uint64_t rand64() = 0;
  virtual Counters& counters() = 0;
};

class Node {
 public:
  virtual ~Node() = default;
  virtual void start(Runtime&) {}
  virtual void on_message(Runtime&, const Message&) = 0;
  virtual void on_timer(Runtime&, TimerKind) {}
  virtual void on_alarm(Runtime&, uint64_t /*token*/) {}
};

}  // namespace rotkv
