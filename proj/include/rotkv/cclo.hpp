#pragma once

#include <map>
#include <set>
#include <vector>

#include "rotkv/client.hpp"
#include "rotkv/engine.hpp"
#include "rotkv/storage.hpp"

namespace rotkv {

// A reader record: one client's newest read transaction touching a key.
// Clients run one transaction at a time, so per client only the highest
// sequence number can still be in flight; records compact to that.
struct ReaderRec {
  uint32_t seq = 0;
  Timestamp read_ts;   // responder clock when recorded (wire/debugging)
  int64_t rec_ms = 0;  // record age, drives garbage collection
};

using ReaderMap = std::map<uint32_t, ReaderRec>;  // client -> record

// Version identity within one key: (creation_ts, origin_dc).
using VersionId = std::pair<uint64_t, uint32_t>;

inline VersionId version_id(const Version& v) {
  return {v.creation_ts.encoded(), v.origin_dc};
}

// Per-key reader bookkeeping.
//   current:  transactions that read the key since its newest install.
//   excluded: per version, transactions that must not be served it (they
//             read causally earlier state elsewhere before it installed).
//   old_sum:  union of all exclusion sets; readers-check responses return
//             current + old_sum so protection propagates transitively.
struct KeyReaders {
  ReaderMap current;
  ReaderMap old_sum;
  std::map<VersionId, ReaderMap> excluded;
};

// One-round nonblocking partition.  Reads are a single request/response and
// never wait; writers pay for that with a readers check against the write's
// dependencies before the new version becomes visible.
class CcloPartition : public Node {
 public:
  CcloPartition(EngineConfig cfg, Topology topo, uint32_t id);

  void start(Runtime& rt) override;
  void on_message(Runtime& rt, const Message& m) override;
  void on_timer(Runtime& rt, TimerKind k) override;

  // Test hooks.
  PartitionStore& store() { return store_; }
  HlcClock& clock() { return clock_; }
  const KeyReaders* readers(const std::string& key) const;

 private:
  struct PendingLocalPut {
    PutReqBody req;
    uint32_t client = 0;
    std::set<uint32_t> awaiting;  // partition nodes still to respond
    ReaderMap merged;             // check-returned readers, per-client max seq
  };
  struct PendingInstall {  // replicated version awaiting dependency checks
    Version v;
    std::set<uint32_t> awaiting;
    ReaderMap merged;
  };
  struct HeldCheck {  // incoming dep_check whose versions aren't all here yet
    uint32_t src = 0;
    uint64_t check = 0;
    std::vector<DepEntry> missing;
    std::vector<std::string> keys;  // reader lists to return when satisfied
  };

  void serve_rot(Runtime& rt, const Message& m);
  void handle_put(Runtime& rt, const Message& m);
  void finish_local_put(Runtime& rt, uint64_t check);
  void handle_replicate(Runtime& rt, const Message& m);
  void finish_install(Runtime& rt, uint64_t check);
  void handle_readers_check_req(Runtime& rt, const Message& m);
  void handle_dep_check(Runtime& rt, const Message& m);
  void on_installed(Runtime& rt);  // re-examines held checks
  void install_with_exclusions(Runtime& rt, Version v, ReaderMap from_checks);
  void replicate_out(Runtime& rt, const Version& v, const std::vector<DepEntry>& deps);

  std::vector<ReaderWire> collect_readers(Runtime& rt, const std::vector<std::string>& keys);
  bool dep_present(const DepEntry& d) const;
  void gc_readers(Runtime& rt);

  EngineConfig cfg_;
  Topology topo_;
  uint32_t id_, dc_, idx_;
  HlcClock clock_;
  PartitionStore store_;
  std::map<std::string, KeyReaders> readers_;
  std::map<uint64_t, PendingLocalPut> pending_puts_;      // by check id
  std::map<uint64_t, PendingInstall> pending_installs_;   // by check id
  std::vector<HeldCheck> held_checks_;
  std::map<uint32_t, uint64_t> repl_seq_;  // outgoing, by remote dc
  uint64_t next_check_ = 1;
};

// One-round client: reads fan out directly, writes carry the accumulated
// dependency list (reset to the written version after each put).
class CcloClient : public EngineClient {
 public:
  CcloClient(EngineConfig cfg, Topology topo, uint32_t id, std::unique_ptr<Workload> w);

  Timestamp client_ts() const { return client_ts_; }
  const std::map<std::string, DepEntry>& deps() const { return deps_; }

 protected:
  void handle(Runtime& rt, const Message& m) override;
  void send_rot(Runtime& rt, uint64_t opid, const std::vector<std::string>& keys) override;
  void send_put(Runtime& rt, uint64_t opid, const std::string& key,
                const std::string& value) override;

 private:
  Timestamp client_ts_;                   // highest version timestamp seen
  std::map<std::string, DepEntry> deps_;  // reads since the last put
  std::map<std::string, MaybeVersion> acc_;
  size_t awaiting_ = 0;
};

}  // namespace rotkv
