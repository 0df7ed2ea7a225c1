#pragma once

#include <map>
#include <optional>
#include <vector>

#include "rotkv/client.hpp"
#include "rotkv/engine.hpp"
#include "rotkv/storage.hpp"

namespace rotkv {

// Timestamp-stable partition.  Reads are served against a snapshot vector
// without blocking: serving a snapshot advances the hybrid clock past the
// snapshot's local entry, so no later local write can fall under it, and
// snapshot entries for remote data centers never exceed the locally applied
// replication prefix (vv), so no remote write can either.
class ContrarianPartition : public Node {
 public:
  ContrarianPartition(EngineConfig cfg, Topology topo, uint32_t id);

  void start(Runtime& rt) override;
  void on_message(Runtime& rt, const Message& m) override;
  void on_timer(Runtime& rt, TimerKind k) override;

  // Snapshot choice: the freshest vector this partition can prove safe,
  // raised to the client's context so sessions stay monotone.
  DcVector pick_sv(Runtime& rt, const ClientCtx& ctx);

  // Introspection / seeding for directed tests.
  const DcVector& gss() const { return gss_; }
  const DcVector& vv() const { return vv_; }
  PartitionStore& store() { return store_; }
  HlcClock& clock() { return clock_; }
  void preset_gss(DcVector g) { gss_ = std::move(g); }
  void preset_vv(DcVector v) { vv_ = std::move(v); }
  void preset_peer_vv(uint32_t index, DcVector v) { peer_vv_[index] = std::move(v); }

 protected:
  // Seam for the physical-clock variant: it defers instead of serving when
  // its clock cannot yet cover sv, and defers timestamp assignment on puts.
  virtual void serve_read_or_wait(Runtime& rt, uint64_t rot, uint32_t client,
                                  const std::vector<std::string>& keys, const DcVector& sv);
  virtual void handle_put(Runtime& rt, const Message& m);

  void serve_read(Runtime& rt, uint64_t rot, uint32_t client,
                  const std::vector<std::string>& keys, const DcVector& sv);
  void do_put(Runtime& rt, const PutReqBody& b, uint32_t client);
  void handle_rot_req(Runtime& rt, const Message& m);
  void handle_rot_fwd(Runtime& rt, const Message& m);
  void enqueue_replication(Runtime& rt, uint32_t src, const Message& m);
  void apply_in_order(Runtime& rt, uint32_t src_dc);
  void replicate_out(Runtime& rt, const Version& v);
  void broadcast_stability(Runtime& rt);
  void recompute_gss();
  void maybe_serve_pending(Runtime& rt, uint64_t rot);

  EngineConfig cfg_;
  Topology topo_;
  uint32_t id_, dc_, idx_;
  HlcClock clock_;
  PartitionStore store_;

  // vv_[i]: every replicated write from dc i with ts <= vv_[i] is applied
  // here (own entry: local write/heartbeat frontier).
  DcVector vv_;
  DcVector gss_;                     // entrywise min of peer vv's, this dc
  std::vector<DcVector> peer_vv_;    // by partition index, own slot = vv_

  // Direct-mode rots at a non-coordinator: the key list (from the client)
  // and the snapshot (from the coordinator) race; hold whichever is first.
  struct PendingRot {
    uint32_t client = 0;
    std::optional<std::vector<std::string>> keys;
    std::optional<DcVector> sv;
  };
  std::map<uint64_t, PendingRot> pending_rots_;

  // Replication links (one per remote dc, same partition index both sides).
  // Heartbeats share the sequence stream so the applied prefix is exact.
  struct OutLink {
    uint64_t seq = 0;
    bool idle_since_beat = true;
  };
  struct InLink {
    uint64_t next_seq = 1;
    std::map<uint64_t, Message> held;
  };
  std::map<uint32_t, OutLink> out_;  // by remote dc
  std::map<uint32_t, InLink> in_;
};

class ContrarianClient : public EngineClient {
 public:
  ContrarianClient(EngineConfig cfg, Topology topo, uint32_t id, std::unique_ptr<Workload> w);

  const ClientCtx& ctx() const { return ctx_; }
  void preset_ctx(ClientCtx c) { ctx_ = std::move(c); }

 protected:
  void handle(Runtime& rt, const Message& m) override;
  void send_rot(Runtime& rt, uint64_t opid, const std::vector<std::string>& keys) override;
  void send_put(Runtime& rt, uint64_t opid, const std::string& key,
                const std::string& value) override;

 private:
  void fan_out_reads(Runtime& rt, const DcVector& sv);
  void complete_rot(Runtime& rt);

  ClientCtx ctx_;
  std::map<uint32_t, std::vector<std::string>> groups_;  // node -> keys of current rot
  std::map<std::string, MaybeVersion> acc_;
  size_t awaiting_ = 0;
  DcVector rot_sv_;
};

}  // namespace rotkv
