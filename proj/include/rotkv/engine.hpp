#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rotkv/hlc.hpp"
#include "rotkv/runtime.hpp"
#include "rotkv/topology.hpp"

namespace rotkv {

// contrarian: timestamp-stable snapshots off hybrid clocks, nonblocking reads.
// cure:       same snapshot machinery on raw physical clocks; partitions hold
//             reads (and timestamp assignment) until their clock catches up.
// cclo:       one-round reads on logical clocks; writers pay a readers check.
// read_latest: no consistency machinery at all (baseline for the checker).
enum class EngineKind : uint8_t { contrarian, cure, cclo, read_latest };

// Read-transaction message flow for the timestamp-based engines.
//   one_and_half: client fans out to all involved partitions; the coordinator
//                 picks the snapshot and forwards it server-side (3 steps).
//   two_round:    client asks the coordinator for a snapshot, then reads from
//                 every involved partition with it (4 steps).
enum class RotMode : uint8_t { one_and_half, two_round };

const char* engine_name(EngineKind k);
EngineKind parse_engine(const std::string& s);
const char* rot_mode_name(RotMode m);
RotMode parse_rot_mode(const std::string& s);

struct EngineConfig {
  EngineKind engine = EngineKind::contrarian;
  RotMode rot_mode = RotMode::one_and_half;

  int64_t stabilization_period_ms = 5;
  int64_t heartbeat_period_ms = 1;     // sent on links idle since the last beat
  int64_t reader_gc_period_ms = 100;   // one-round engine: reader-record sweep
  int64_t reader_gc_horizon_ms = 500;  // records older than this are dead
  int64_t store_gc_period_ms = 250;    // 0 disables version-chain pruning
  int64_t store_gc_retain_ms = 500;
  bool heartbeats = true;

  // Tests may pin a clock mode; engines otherwise use their native one.
  std::optional<ClockMode> clock_mode_override;

  ClockMode clock_mode() const;
};

// What a completed operation handed back to the issuing client.
struct OpResult {
  uint64_t opid = 0;
  OpKind kind = OpKind::none;
  std::vector<MaybeVersion> returns;  // rot, one entry per requested key
  DcVector sv;                        // rot, timestamp-based engines
  Timestamp put_ts;                   // put: created version
  uint32_t put_dc = 0;
};

// Issue surface handed to a Workload.  Clients are closed-loop: at most one
// operation may be outstanding; issuing while busy is a logic error.
class ClientApi {
 public:
  virtual ~ClientApi() = default;
  virtual void rot(std::vector<std::string> keys) = 0;
  virtual void put(std::string key, std::string value) = 0;
  virtual bool busy() const = 0;
  virtual uint32_t client_id() const = 0;
  virtual Runtime& runtime() = 0;
};

// Drives one client.  ready() runs at start and whenever the client goes
// idle; issue at most one op from it (or none to stay quiet).  One-shot
// alarms armed through the api's runtime come back via alarm().
class Workload {
 public:
  virtual ~Workload() = default;
  virtual void ready(ClientApi& api) = 0;
  virtual void done(ClientApi&, const OpResult&) {}
  virtual void alarm(ClientApi&, uint64_t /*token*/) {}
};

std::unique_ptr<Node> make_partition(const EngineConfig& cfg, const Topology& topo,
                                     uint32_t node_id);
std::unique_ptr<Node> make_client(const EngineConfig& cfg, const Topology& topo,
                                  uint32_t node_id, std::unique_ptr<Workload> w);

}  // namespace rotkv
