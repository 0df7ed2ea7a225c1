#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rotkv/message.hpp"
#include "rotkv/topology.hpp"

namespace rotkv {

enum class EvKind : uint8_t { op_start, op_end, msg_send, msg_deliver, timer };
enum class OpKind : uint8_t { none, rot, put };
enum class TimerKind : uint8_t { stabilization, heartbeat, gc, alarm };

const char* ev_kind_name(EvKind k);
const char* timer_kind_name(TimerKind k);

struct RetVersion {
  std::string key;
  bool present = false;
  Timestamp ts;
  uint32_t dc = 0;
};

// One trace line.  Field names in the JSONL form are a stable contract:
//   t, node, ev; op events add op, opid, probe, keys, rets, key, ts, dc, sv;
//   message events add mid, src, dst, kind, bytes, digest, rot, vpk;
//   timer events add kind.
struct TraceEvent {
  int64_t t = 0;
  uint32_t node = 0;
  EvKind ev = EvKind::timer;

  // op_start / op_end
  OpKind op = OpKind::none;
  uint64_t opid = 0;
  bool probe = false;
  std::vector<std::string> keys;   // rot start
  std::vector<RetVersion> rets;    // rot end
  std::string key;                 // put
  Timestamp vts;                   // put end: created version
  uint32_t vdc = 0;
  DcVector sv;                     // rot end, timestamp-based engines

  // msg_send / msg_deliver
  uint64_t mid = 0;
  uint32_t src = 0, dst = 0;
  MsgKind mkind = MsgKind::rot_req;
  uint32_t bytes = 0;
  uint64_t digest = 0;
  uint64_t rot = 0;   // owning transaction for rot_* kinds, else 0
  int32_t vpk = -1;   // rot_resp: max versions returned per key

  // timer
  TimerKind tkind = TimerKind::stabilization;
};

struct TraceMeta {
  uint32_t partitions = 0, dcs = 1, clients = 0;
  std::string engine;
};

// Line-delimited JSON; first line is a meta object, one event per line after.
void write_trace_jsonl(std::ostream& os, const TraceMeta& meta, const Topology& topo,
                       const std::vector<TraceEvent>& events);
std::string trace_to_jsonl(const TraceMeta& meta, const Topology& topo,
                           const std::vector<TraceEvent>& events);
// Parses what write_trace_jsonl produced; throws std::runtime_error on
// malformed input.
std::pair<TraceMeta, std::vector<TraceEvent>> read_trace_jsonl(std::istream& is);

}  // namespace rotkv
