#include "rotkv/contrarian.hpp"

#include <algorithm>
#include <stdexcept>

namespace rotkv {

ContrarianPartition::ContrarianPartition(EngineConfig cfg, Topology topo, uint32_t id)
    : cfg_(cfg),
      topo_(topo),
      id_(id),
      dc_(topo.dc_of(id)),
      idx_(topo.partition_index(id)),
      clock_(cfg.clock_mode()),
      vv_(topo.dcs),
      gss_(topo.dcs),
      peer_vv_(topo.partitions, DcVector(topo.dcs)) {
  if (!topo_.is_partition(id)) throw std::invalid_argument("partition ctor given a client id");
}

void ContrarianPartition::start(Runtime& rt) {
  if (cfg_.stabilization_period_ms > 0)
    rt.set_timer(cfg_.stabilization_period_ms, TimerKind::stabilization);
  if (cfg_.heartbeats && topo_.dcs > 1)
    rt.set_timer(cfg_.heartbeat_period_ms, TimerKind::heartbeat);
  if (cfg_.store_gc_period_ms > 0) rt.set_timer(cfg_.store_gc_period_ms, TimerKind::gc);
}

void ContrarianPartition::on_timer(Runtime& rt, TimerKind k) {
  switch (k) {
    case TimerKind::stabilization:
      broadcast_stability(rt);
      break;
    case TimerKind::heartbeat:
      for (uint32_t j = 0; j < topo_.dcs; j++) {
        if (j == dc_) continue;
        OutLink& link = out_[j];
        if (link.idle_since_beat) {
          Message m;
          m.dst = topo_.partition_node(j, idx_);
          HeartbeatBody hb;
          hb.seq = ++link.seq;
          hb.ts = clock_.tick(rt.physical_now_ms());
          m.body = hb;
          rt.send(std::move(m));
        }
        link.idle_since_beat = true;
      }
      break;
    case TimerKind::gc: {
      DcVector wm(topo_.dcs);
      for (uint32_t i = 0; i < topo_.dcs; i++) {
        int64_t ms = gss_[i].physical_ms() - cfg_.store_gc_retain_ms;
        wm[i] = Timestamp::from_parts(ms < 0 ? 0 : ms, 0);
      }
      store_.gc_all(wm);
      break;
    }
    case TimerKind::alarm:
      break;
  }
}

void ContrarianPartition::on_message(Runtime& rt, const Message& m) {
  switch (m.kind()) {
    case MsgKind::rot_req:
      handle_rot_req(rt, m);
      break;
    case MsgKind::rot_fwd:
      handle_rot_fwd(rt, m);
      break;
    case MsgKind::put_req:
      handle_put(rt, m);
      break;
    case MsgKind::replicate:
    case MsgKind::heartbeat:
      enqueue_replication(rt, m.src, m);
      break;
    case MsgKind::stab_exchange: {
      // Entrywise max: exchanges can arrive out of order, and the stable
      // frontier must never regress.
      const auto& b = std::get<StabBody>(m.body);
      peer_vv_[topo_.partition_index(m.src)].max_with(b.vv);
      recompute_gss();
      break;
    }
    default:
      throw std::logic_error("unexpected message kind at timestamp-stable partition");
  }
}

DcVector ContrarianPartition::pick_sv(Runtime& rt, const ClientCtx& ctx) {
  DcVector sv = gss_;
  sv.max_with(ctx.highest_gss);
  Timestamp now = clock_.tick(rt.physical_now_ms());
  if (now > sv[dc_]) sv[dc_] = now;
  if (ctx.highest_local_ts > sv[dc_]) sv[dc_] = ctx.highest_local_ts;
  return sv;
}

void ContrarianPartition::handle_rot_req(Runtime& rt, const Message& m) {
  const auto& b = std::get<RotReqBody>(m.body);
  switch (b.role) {
    case RotRole::coord_two: {
      DcVector sv = pick_sv(rt, b.ctx);
      Message r;
      r.dst = m.src;
      RotRespBody resp;
      resp.rot = b.rot;
      resp.snapshot_only = true;
      resp.sv = std::move(sv);
      resp.clock_echo = clock_.last_issued();
      r.body = std::move(resp);
      rt.send(std::move(r));
      break;
    }
    case RotRole::read:
      serve_read_or_wait(rt, b.rot, m.src, b.keys, b.sv);
      break;
    case RotRole::coord_direct: {
      DcVector sv = pick_sv(rt, b.ctx);
      for (uint32_t index : b.involved) {
        Message f;
        f.dst = topo_.partition_node(dc_, index);
        RotFwdBody fwd;
        fwd.rot = b.rot;
        fwd.sv = sv;
        f.body = std::move(fwd);
        rt.send(std::move(f));
      }
      serve_read_or_wait(rt, b.rot, m.src, b.keys, sv);
      break;
    }
    case RotRole::read_direct: {
      PendingRot& p = pending_rots_[b.rot];
      p.client = m.src;
      p.keys = b.keys;
      maybe_serve_pending(rt, b.rot);
      break;
    }
    case RotRole::plain:
      throw std::logic_error("plain reads are not part of this engine's protocol");
  }
}

void ContrarianPartition::handle_rot_fwd(Runtime& rt, const Message& m) {
  const auto& b = std::get<RotFwdBody>(m.body);
  pending_rots_[b.rot].sv = b.sv;
  maybe_serve_pending(rt, b.rot);
}

void ContrarianPartition::maybe_serve_pending(Runtime& rt, uint64_t rot) {
  auto it = pending_rots_.find(rot);
  if (it == pending_rots_.end() || !it->second.keys || !it->second.sv) return;
  PendingRot p = std::move(it->second);
  pending_rots_.erase(it);
  serve_read_or_wait(rt, rot, p.client, *p.keys, *p.sv);
}

void ContrarianPartition::serve_read_or_wait(Runtime& rt, uint64_t rot, uint32_t client,
                                             const std::vector<std::string>& keys,
                                             const DcVector& sv) {
  serve_read(rt, rot, client, keys, sv);
}

void ContrarianPartition::serve_read(Runtime& rt, uint64_t rot, uint32_t client,
                                     const std::vector<std::string>& keys, const DcVector& sv) {
  // No local write after this point can be stamped <= sv's local entry.
  clock_.observe(rt.physical_now_ms(), sv[dc_]);

  Message r;
  r.dst = client;
  RotRespBody resp;
  resp.rot = rot;
  resp.sv = sv;
  for (const auto& k : keys) {
    MaybeVersion mv;
    mv.key = k;
    const Version* v = store_.read_at(k, sv);
    if (v) {
      mv.present = true;
      mv.v = *v;
    }
    resp.returns.push_back(std::move(mv));
  }
  resp.clock_echo = clock_.last_issued();
  r.body = std::move(resp);
  rt.send(std::move(r));
}

void ContrarianPartition::handle_put(Runtime& rt, const Message& m) {
  do_put(rt, std::get<PutReqBody>(m.body), m.src);
}

void ContrarianPartition::do_put(Runtime& rt, const PutReqBody& b, uint32_t client) {
  // The new version must dominate everything its writer has seen, in every
  // entry, or convergence would bury a write under its own causal past.
  Timestamp seen = b.ctx.highest_local_ts;
  Timestamp remote = b.ctx.highest_gss.max_entry();
  if (remote > seen) seen = remote;
  Timestamp creation = clock_.update(rt.physical_now_ms(), seen);

  Version v;
  v.key = b.key;
  v.value = b.value;
  v.origin_dc = dc_;
  v.creation_ts = creation;
  v.dv = b.ctx.highest_gss;
  if (v.dv.size() != topo_.dcs) v.dv = DcVector(topo_.dcs);
  v.dv[dc_] = creation;

  store_.install(v);
  if (creation > vv_[dc_]) vv_[dc_] = creation;

  Message r;
  r.dst = client;
  PutRespBody resp;
  resp.opid = b.opid;
  resp.key = b.key;
  resp.ts = creation;
  resp.origin_dc = dc_;
  resp.gss = gss_;
  resp.clock_echo = clock_.last_issued();
  r.body = std::move(resp);
  rt.send(std::move(r));

  replicate_out(rt, v);
}

void ContrarianPartition::replicate_out(Runtime& rt, const Version& v) {
  for (uint32_t j = 0; j < topo_.dcs; j++) {
    if (j == dc_) continue;
    OutLink& link = out_[j];
    link.seq++;
    link.idle_since_beat = false;
    Message m;
    m.dst = topo_.partition_node(j, idx_);
    ReplicateBody body;
    body.seq = link.seq;
    body.v = v;
    m.body = std::move(body);
    rt.send(std::move(m));
  }
}

void ContrarianPartition::enqueue_replication(Runtime& rt, uint32_t src, const Message& m) {
  uint32_t src_dc = topo_.dc_of(src);
  uint64_t seq = m.kind() == MsgKind::replicate ? std::get<ReplicateBody>(m.body).seq
                                                : std::get<HeartbeatBody>(m.body).seq;
  InLink& link = in_[src_dc];
  link.held.emplace(seq, m);
  apply_in_order(rt, src_dc);
}

void ContrarianPartition::apply_in_order(Runtime& rt, uint32_t src_dc) {
  InLink& link = in_[src_dc];
  auto it = link.held.begin();
  while (it != link.held.end() && it->first == link.next_seq) {
    const Message& m = it->second;
    if (m.kind() == MsgKind::replicate) {
      const auto& b = std::get<ReplicateBody>(m.body);
      store_.install(b.v);
      if (b.v.creation_ts > vv_[src_dc]) vv_[src_dc] = b.v.creation_ts;
    } else {
      const auto& b = std::get<HeartbeatBody>(m.body);
      if (b.ts > vv_[src_dc]) vv_[src_dc] = b.ts;
    }
    link.next_seq++;
    it = link.held.erase(it);
  }
  (void)rt;
}

void ContrarianPartition::broadcast_stability(Runtime& rt) {
  // Refresh the own-dc frontier: every local write after this carries a
  // larger timestamp, so the frontier is complete up to this tick.
  Timestamp t = clock_.tick(rt.physical_now_ms());
  if (t > vv_[dc_]) vv_[dc_] = t;
  peer_vv_[idx_] = vv_;
  recompute_gss();

  for (uint32_t p = 0; p < topo_.partitions; p++) {
    if (p == idx_) continue;
    Message m;
    m.dst = topo_.partition_node(dc_, p);
    StabBody b;
    b.vv = vv_;
    m.body = std::move(b);
    rt.send(std::move(m));
  }
}

void ContrarianPartition::recompute_gss() {
  peer_vv_[idx_] = vv_;
  DcVector g = peer_vv_[0];
  for (uint32_t p = 1; p < topo_.partitions; p++) g.min_with(peer_vv_[p]);
  gss_ = g;
}

// --- client ---

ContrarianClient::ContrarianClient(EngineConfig cfg, Topology topo, uint32_t id,
                                   std::unique_ptr<Workload> w)
    : EngineClient(cfg, topo, id, std::move(w)) {
  ctx_.highest_gss = DcVector(topo_.dcs);
}

void ContrarianClient::send_rot(Runtime& rt, uint64_t opid,
                                const std::vector<std::string>& keys) {
  groups_.clear();
  acc_.clear();
  rot_sv_ = DcVector();
  for (const auto& k : keys) groups_[partition_for(k)].push_back(k);

  uint32_t coord = groups_.begin()->first;
  if (cfg_.rot_mode == RotMode::one_and_half) {
    awaiting_ = groups_.size();
    for (const auto& [node, node_keys] : groups_) {
      Message m;
      m.dst = node;
      RotReqBody b;
      b.rot = opid;
      b.keys = node_keys;
      if (node == coord) {
        b.role = RotRole::coord_direct;
        b.ctx = ctx_;
        for (const auto& [other, _] : groups_)
          if (other != coord) b.involved.push_back(topo_.partition_index(other));
      } else {
        b.role = RotRole::read_direct;
      }
      m.body = std::move(b);
      rt.send(std::move(m));
    }
  } else {
    Message m;
    m.dst = coord;
    RotReqBody b;
    b.rot = opid;
    b.role = RotRole::coord_two;
    b.ctx = ctx_;
    m.body = std::move(b);
    rt.send(std::move(m));
  }
}

void ContrarianClient::fan_out_reads(Runtime& rt, const DcVector& sv) {
  awaiting_ = groups_.size();
  for (const auto& [node, node_keys] : groups_) {
    Message m;
    m.dst = node;
    RotReqBody b;
    b.rot = opid_;
    b.role = RotRole::read;
    b.keys = node_keys;
    b.sv = sv;
    m.body = std::move(b);
    rt.send(std::move(m));
  }
}

void ContrarianClient::send_put(Runtime& rt, uint64_t opid, const std::string& key,
                                const std::string& value) {
  Message m;
  m.dst = partition_for(key);
  PutReqBody b;
  b.opid = opid;
  b.key = key;
  b.value = value;
  b.ctx = ctx_;
  m.body = std::move(b);
  rt.send(std::move(m));
}

void ContrarianClient::handle(Runtime& rt, const Message& m) {
  switch (m.kind()) {
    case MsgKind::rot_resp: {
      const auto& b = std::get<RotRespBody>(m.body);
      if (b.rot != opid_) return;  // stale (completed op's late duplicate)
      if (b.snapshot_only) {
        fan_out_reads(rt, b.sv);
        return;
      }
      rot_sv_ = b.sv;
      for (const auto& mv : b.returns) acc_[mv.key] = mv;
      if (--awaiting_ > 0) return;
      complete_rot(rt);
      break;
    }
    case MsgKind::put_resp: {
      const auto& b = std::get<PutRespBody>(m.body);
      if (b.opid != opid_) return;
      if (b.ts > ctx_.highest_local_ts) ctx_.highest_local_ts = b.ts;
      ctx_.highest_gss.max_with(b.gss);
      OpResult r;
      r.put_ts = b.ts;
      r.put_dc = b.origin_dc;
      finish(rt, std::move(r));
      break;
    }
    default:
      throw std::logic_error("unexpected message kind at client");
  }
}

void ContrarianClient::complete_rot(Runtime& rt) {
  ctx_.highest_gss.max_with(rot_sv_);
  if (rot_sv_[dc_] > ctx_.highest_local_ts) ctx_.highest_local_ts = rot_sv_[dc_];
  OpResult r;
  r.sv = rot_sv_;
  for (const auto& k : rot_keys_) r.returns.push_back(acc_[k]);
  finish(rt, std::move(r));
}

}  // namespace rotkv
