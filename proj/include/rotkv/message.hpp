#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "rotkv/storage.hpp"

namespace rotkv {

enum class MsgKind : uint8_t {
  rot_req,
  rot_fwd,
  rot_resp,
  put_req,
  put_resp,
  replicate,
  dep_check,
  readers_check_req,
  readers_check_resp,
  heartbeat,
  stab_exchange,
};
inline constexpr size_t kMsgKinds = 11;
const char* msg_kind_name(MsgKind k);

// Transaction ids double as operation ids: client id in the upper half,
// per-client sequence number in the lower half (8 bytes on the wire).
inline uint64_t make_opid(uint32_t client, uint32_t seq) {
  return (static_cast<uint64_t>(client) << 32) | seq;
}
inline uint32_t opid_client(uint64_t opid) { return static_cast<uint32_t>(opid >> 32); }
inline uint32_t opid_seq(uint64_t opid) { return static_cast<uint32_t>(opid & 0xffffffffu); }

// Client-side context carried on requests in the timestamp-based engines.
struct ClientCtx {
  Timestamp highest_local_ts;
  DcVector highest_gss;
};

// Role of a rot_req / rot_resp within a transaction's message flow.
enum class RotRole : uint8_t {
  coord_two,    // round 1 of the two-round mode: snapshot request
  read,         // snapshot-carrying read request (round 2)
  coord_direct, // coordinator copy in the direct mode: picks, forwards, serves
  read_direct,  // non-coordinator copy in the direct mode: waits for the forward
  plain,        // one-round engines: read the latest (or recorded) versions
};

struct DepEntry {
  std::string key;
  Timestamp ts;
  uint32_t origin_dc = 0;
  bool operator==(const DepEntry&) const = default;
};

struct ReaderWire {
  uint32_t client = 0;
  uint32_t seq = 0;          // transaction sequence of that client
  Timestamp read_ts;         // logical time the read was served
  bool operator==(const ReaderWire&) const = default;
};

struct MaybeVersion {
  std::string key;
  bool present = false;
  Version v;  // meaningful only when present
};

struct RotReqBody {
  uint64_t rot = 0;
  RotRole role = RotRole::plain;
  std::vector<std::string> keys;       // keys owned by the destination
  DcVector sv;                         // role == read
  ClientCtx ctx;                       // coordinator roles
  std::vector<uint32_t> involved;      // coord_direct: partition indexes to forward to
};

struct RotRespBody {
  uint64_t rot = 0;
  bool snapshot_only = false;          // two-round round-1 reply: sv, no versions
  DcVector sv;
  std::vector<MaybeVersion> returns;
  Timestamp clock_echo;                // sender's clock, for loose coupling
};

struct RotFwdBody {
  uint64_t rot = 0;
  DcVector sv;
};

struct PutReqBody {
  uint64_t opid = 0;
  std::string key;
  std::string value;
  ClientCtx ctx;                       // timestamp-based engines
  Timestamp client_ts;                 // one-round engines
  std::vector<DepEntry> deps;          // one-round engines
};

struct PutRespBody {
  uint64_t opid = 0;
  std::string key;
  Timestamp ts;
  uint32_t origin_dc = 0;
  DcVector gss;
  Timestamp clock_echo;
};

struct ReplicateBody {
  uint64_t seq = 0;   // per link; shared with heartbeats for in-order apply
  Version v;
  std::vector<DepEntry> deps;
};

// Combined remote-side dependency-and-readers check.  The response is sent
// once every requested version is installed at the responder and carries the
// responder's reader records for the requested keys.
struct DepCheckBody {
  bool is_resp = false;
  uint64_t check = 0;
  std::vector<DepEntry> deps;          // request
  std::vector<ReaderWire> readers;     // response
  Timestamp clock_echo;                // response
};

struct ReadersCheckReqBody {
  uint64_t check = 0;
  std::vector<std::string> keys;
};

struct ReadersCheckRespBody {
  uint64_t check = 0;
  std::vector<ReaderWire> readers;
  Timestamp clock_echo;
};

struct HeartbeatBody {
  uint64_t seq = 0;
  Timestamp ts;
};

struct StabBody {
  DcVector vv;
};

using Payload = std::variant<RotReqBody, RotFwdBody, RotRespBody, PutReqBody, PutRespBody,
                             ReplicateBody, DepCheckBody, ReadersCheckReqBody,
                             ReadersCheckRespBody, HeartbeatBody, StabBody>;

MsgKind kind_of(const Payload& p);

struct Message {
  uint32_t src = 0;
  uint32_t dst = 0;
  uint64_t mid = 0;
  Payload body;

  MsgKind kind() const { return kind_of(body); }
};

// Wire format (documented in the README, version 1):
//   4-byte big-endian length (bytes after the length field)
//   1-byte message kind
//   payload: version byte, src u32, dst u32, mid u64, then the kind-specific
//   body; multi-byte integers little-endian, strings length-prefixed.
std::vector<uint8_t> encode(const Message& m);
size_t encoded_size(const Message& m);
// Decodes one frame (as produced by encode); throws std::runtime_error on a
// malformed frame.
Message decode(const uint8_t* data, size_t len);

uint64_t payload_digest(const Message& m);

// Trace annotations shared by the transport backends.
uint64_t rot_of(const Message& m);  // owning transaction for rot_* kinds, else 0
int32_t vpk_of(const Message& m);   // rot_resp: max present versions per key, else -1

}  // namespace rotkv
