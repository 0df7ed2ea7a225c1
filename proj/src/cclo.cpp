#include "rotkv/cclo.hpp"

#include <algorithm>
#include <stdexcept>

namespace rotkv {

namespace {

// Per-client compaction: only a client's newest transaction can still be in
// flight, so a record with a higher seq supersedes a lower one.
void merge_rec(ReaderMap& m, uint32_t client, const ReaderRec& rec) {
  auto [it, fresh] = m.emplace(client, rec);
  if (!fresh && rec.seq >= it->second.seq) it->second = rec;
}

void merge_map(ReaderMap& into, const ReaderMap& from) {
  for (const auto& [c, rec] : from) merge_rec(into, c, rec);
}

}  // namespace

CcloPartition::CcloPartition(EngineConfig cfg, Topology topo, uint32_t id)
    : cfg_(cfg),
      topo_(topo),
      id_(id),
      dc_(topo.dc_of(id)),
      idx_(topo.partition_index(id)),
      clock_(cfg.clock_mode()) {
  if (!topo_.is_partition(id)) throw std::invalid_argument("partition ctor given a client id");
}

void CcloPartition::start(Runtime& rt) {
  if (cfg_.reader_gc_period_ms > 0) rt.set_timer(cfg_.reader_gc_period_ms, TimerKind::gc);
}

void CcloPartition::on_timer(Runtime& rt, TimerKind k) {
  if (k == TimerKind::gc) gc_readers(rt);
}

const KeyReaders* CcloPartition::readers(const std::string& key) const {
  auto it = readers_.find(key);
  return it == readers_.end() ? nullptr : &it->second;
}

void CcloPartition::on_message(Runtime& rt, const Message& m) {
  switch (m.kind()) {
    case MsgKind::rot_req:
      serve_rot(rt, m);
      break;
    case MsgKind::put_req:
      handle_put(rt, m);
      break;
    case MsgKind::readers_check_req:
      handle_readers_check_req(rt, m);
      break;
    case MsgKind::readers_check_resp: {
      const auto& b = std::get<ReadersCheckRespBody>(m.body);
      auto it = pending_puts_.find(b.check);
      if (it == pending_puts_.end()) return;
      rt.counters().readers_check_rotids_cumulative += b.readers.size();
      for (const auto& w : b.readers)
        merge_rec(it->second.merged, w.client, {w.seq, w.read_ts, rt.now_ms()});
      clock_.observe(rt.physical_now_ms(), b.clock_echo);
      it->second.awaiting.erase(m.src);
      if (it->second.awaiting.empty()) finish_local_put(rt, b.check);
      break;
    }
    case MsgKind::replicate:
      handle_replicate(rt, m);
      break;
    case MsgKind::dep_check:
      handle_dep_check(rt, m);
      break;
    default:
      throw std::logic_error("unexpected message kind at one-round partition");
  }
}

// Reads are one round and never wait.  Serving walks the chain newest-first,
// skipping versions this transaction is excluded from; the skip set was
// fixed before those versions became visible, so the reply is immediate.
void CcloPartition::serve_rot(Runtime& rt, const Message& m) {
  const auto& b = std::get<RotReqBody>(m.body);
  if (b.role != RotRole::plain)
    throw std::logic_error("one-round partition got a coordinator-flow read");
  uint32_t client = opid_client(b.rot);
  uint32_t rseq = opid_seq(b.rot);

  Message r;
  r.dst = m.src;
  RotRespBody resp;
  resp.rot = b.rot;
  for (const auto& k : b.keys) {
    MaybeVersion mv;
    mv.key = k;
    KeyReaders& kr = readers_[k];
    auto cit = store_.chains().find(k);
    if (cit != store_.chains().end()) {
      const auto& vs = cit->second.versions();
      for (auto it = vs.rbegin(); it != vs.rend(); ++it) {
        auto eit = kr.excluded.find(version_id(*it));
        if (eit != kr.excluded.end()) {
          auto rec = eit->second.find(client);
          if (rec != eit->second.end() && rec->second.seq == rseq) continue;
        }
        mv.present = true;
        mv.v = *it;
        break;
      }
    }
    resp.returns.push_back(std::move(mv));
    // Record the read (also for reads of nothing: a later first write must
    // still know this transaction saw the pre-write state).
    merge_rec(kr.current, client, {rseq, clock_.tick(rt.physical_now_ms()), rt.now_ms()});
  }
  resp.clock_echo = clock_.last_issued();
  r.body = std::move(resp);
  rt.send(std::move(r));
}

bool CcloPartition::dep_present(const DepEntry& d) const {
  auto cit = store_.chains().find(d.key);
  if (cit == store_.chains().end()) return false;
  for (const auto& v : cit->second.versions())
    if (v.creation_ts == d.ts && v.origin_dc == d.origin_dc) return true;
  return false;
}

std::vector<ReaderWire> CcloPartition::collect_readers(Runtime&,
                                                       const std::vector<std::string>& keys) {
  ReaderMap merged;
  for (const auto& k : keys) {
    auto it = readers_.find(k);
    if (it == readers_.end()) continue;
    merge_map(merged, it->second.current);
    merge_map(merged, it->second.old_sum);
  }
  std::vector<ReaderWire> out;
  out.reserve(merged.size());
  for (const auto& [c, rec] : merged) out.push_back({c, rec.seq, rec.read_ts});
  return out;
}

void CcloPartition::handle_put(Runtime& rt, const Message& m) {
  const auto& b = std::get<PutReqBody>(m.body);
  uint64_t check = next_check_++;
  PendingLocalPut& p = pending_puts_[check];
  p.req = b;
  p.client = m.src;

  if (!b.deps.empty()) rt.counters().readers_checks++;

  std::map<uint32_t, std::vector<std::string>> remote;  // node -> dep keys
  for (const auto& dep : b.deps) {
    uint32_t node = topo_.partition_node(dc_, topo_.locate(dep.key));
    if (node == id_) {
      auto it = readers_.find(dep.key);
      if (it != readers_.end()) {
        merge_map(p.merged, it->second.current);
        merge_map(p.merged, it->second.old_sum);
      }
    } else {
      remote[node].push_back(dep.key);
    }
  }
  for (auto& [node, keys] : remote) {
    p.awaiting.insert(node);
    Message q;
    q.dst = node;
    ReadersCheckReqBody body;
    body.check = check;
    body.keys = std::move(keys);
    q.body = std::move(body);
    rt.send(std::move(q));
  }
  if (p.awaiting.empty()) finish_local_put(rt, check);
}

void CcloPartition::handle_readers_check_req(Runtime& rt, const Message& m) {
  const auto& b = std::get<ReadersCheckReqBody>(m.body);
  Message r;
  r.dst = m.src;
  ReadersCheckRespBody resp;
  resp.check = b.check;
  resp.readers = collect_readers(rt, b.keys);
  resp.clock_echo = clock_.tick(rt.physical_now_ms());
  r.body = std::move(resp);
  rt.send(std::move(r));
}

void CcloPartition::finish_local_put(Runtime& rt, uint64_t check) {
  PendingLocalPut p = std::move(pending_puts_.at(check));
  pending_puts_.erase(check);

  if (!p.req.deps.empty())
    rt.counters().readers_check_rotids_distinct += p.merged.size();

  // Stamp above everything the writer saw; the exclusion set, not the
  // timestamp, is what keeps protected readers away from this version.
  Timestamp creation = clock_.update(rt.physical_now_ms(), p.req.client_ts);
  Version v;
  v.key = p.req.key;
  v.value = p.req.value;
  v.origin_dc = dc_;
  v.creation_ts = creation;
  v.dv = DcVector(topo_.dcs);
  v.dv[dc_] = creation;

  install_with_exclusions(rt, v, std::move(p.merged));

  Message r;
  r.dst = p.client;
  PutRespBody resp;
  resp.opid = p.req.opid;
  resp.key = p.req.key;
  resp.ts = creation;
  resp.origin_dc = dc_;
  resp.clock_echo = creation;
  r.body = std::move(resp);
  rt.send(std::move(r));

  replicate_out(rt, v, p.req.deps);
}

void CcloPartition::install_with_exclusions(Runtime& rt, Version v, ReaderMap from_checks) {
  KeyReaders& kr = readers_[v.key];
  // Readers of the superseded state join the exclusion set: checks on this
  // key must keep reporting them for as long as their transactions can be
  // live, or protection would not chain across writes.
  merge_map(from_checks, kr.current);
  kr.current.clear();
  merge_map(kr.old_sum, from_checks);
  merge_map(kr.excluded[version_id(v)], from_checks);

  clock_.observe(rt.physical_now_ms(), v.creation_ts);
  store_.install(std::move(v));
  on_installed(rt);
}

void CcloPartition::replicate_out(Runtime& rt, const Version& v,
                                  const std::vector<DepEntry>& deps) {
  for (uint32_t j = 0; j < topo_.dcs; j++) {
    if (j == dc_) continue;
    Message m;
    m.dst = topo_.partition_node(j, idx_);
    ReplicateBody body;
    body.seq = ++repl_seq_[j];
    body.v = v;
    body.deps = deps;
    m.body = std::move(body);
    rt.send(std::move(m));
  }
}

// Replicated versions carry the writer's dependency list; this data center
// redoes the check locally (deps must be here, and local readers of them
// must be excluded) before the version becomes visible here.
void CcloPartition::handle_replicate(Runtime& rt, const Message& m) {
  const auto& b = std::get<ReplicateBody>(m.body);
  uint64_t check = next_check_++;
  PendingInstall& p = pending_installs_[check];
  p.v = b.v;

  std::map<uint32_t, std::vector<DepEntry>> remote;
  std::vector<DepEntry> self_missing;
  std::vector<std::string> self_keys;
  for (const auto& dep : b.deps) {
    uint32_t node = topo_.partition_node(dc_, topo_.locate(dep.key));
    if (node == id_) {
      self_keys.push_back(dep.key);
      if (!dep_present(dep)) self_missing.push_back(dep);
    } else {
      remote[node].push_back(dep);
    }
  }

  if (!self_keys.empty()) {
    if (self_missing.empty()) {
      ReaderMap own;
      for (const auto& k : self_keys) {
        auto it = readers_.find(k);
        if (it == readers_.end()) continue;
        merge_map(own, it->second.current);
        merge_map(own, it->second.old_sum);
      }
      merge_map(p.merged, own);
    } else {
      p.awaiting.insert(id_);
      held_checks_.push_back({id_, check, std::move(self_missing), std::move(self_keys)});
    }
  }

  for (auto& [node, deps] : remote) {
    p.awaiting.insert(node);
    Message q;
    q.dst = node;
    DepCheckBody body;
    body.check = check;
    body.deps = std::move(deps);
    q.body = std::move(body);
    rt.send(std::move(q));
  }

  if (p.awaiting.empty()) finish_install(rt, check);
}

void CcloPartition::handle_dep_check(Runtime& rt, const Message& m) {
  const auto& b = std::get<DepCheckBody>(m.body);
  if (b.is_resp) {
    auto it = pending_installs_.find(b.check);
    if (it == pending_installs_.end()) return;
    rt.counters().readers_check_rotids_cumulative += b.readers.size();
    for (const auto& w : b.readers)
      merge_rec(it->second.merged, w.client, {w.seq, w.read_ts, rt.now_ms()});
    clock_.observe(rt.physical_now_ms(), b.clock_echo);
    it->second.awaiting.erase(m.src);
    if (it->second.awaiting.empty()) finish_install(rt, b.check);
    return;
  }

  std::vector<DepEntry> missing;
  std::vector<std::string> keys;
  for (const auto& dep : b.deps) {
    keys.push_back(dep.key);
    if (!dep_present(dep)) missing.push_back(dep);
  }
  if (missing.empty()) {
    Message r;
    r.dst = m.src;
    DepCheckBody resp;
    resp.is_resp = true;
    resp.check = b.check;
    resp.readers = collect_readers(rt, keys);
    resp.clock_echo = clock_.tick(rt.physical_now_ms());
    r.body = std::move(resp);
    rt.send(std::move(r));
  } else {
    held_checks_.push_back({m.src, b.check, std::move(missing), std::move(keys)});
  }
}

void CcloPartition::finish_install(Runtime& rt, uint64_t check) {
  PendingInstall p = std::move(pending_installs_.at(check));
  pending_installs_.erase(check);
  install_with_exclusions(rt, std::move(p.v), std::move(p.merged));
}

// A version just landed: held checks whose missing deps are now all present
// get their (possibly deferred) response.  Responding to a self-check can
// complete an install, which recurses here; restart the scan after each
// delivery so iteration stays valid.
void CcloPartition::on_installed(Runtime& rt) {
  bool progressed = true;
  while (progressed) {
    progressed = false;
    for (size_t i = 0; i < held_checks_.size(); i++) {
      HeldCheck& hc = held_checks_[i];
      std::erase_if(hc.missing, [&](const DepEntry& d) { return dep_present(d); });
      if (!hc.missing.empty()) continue;
      HeldCheck done = std::move(hc);
      held_checks_.erase(held_checks_.begin() + static_cast<ptrdiff_t>(i));
      if (done.src == id_) {
        auto it = pending_installs_.find(done.check);
        if (it != pending_installs_.end()) {
          ReaderMap own;
          for (const auto& k : done.keys) {
            auto rit = readers_.find(k);
            if (rit == readers_.end()) continue;
            merge_map(own, rit->second.current);
            merge_map(own, rit->second.old_sum);
          }
          merge_map(it->second.merged, own);
          it->second.awaiting.erase(id_);
          if (it->second.awaiting.empty()) finish_install(rt, done.check);
        }
      } else {
        Message r;
        r.dst = done.src;
        DepCheckBody resp;
        resp.is_resp = true;
        resp.check = done.check;
        resp.readers = collect_readers(rt, done.keys);
        resp.clock_echo = clock_.tick(rt.physical_now_ms());
        r.body = std::move(resp);
        rt.send(std::move(r));
      }
      progressed = true;
      break;
    }
  }
}

void CcloPartition::gc_readers(Runtime& rt) {
  int64_t horizon = rt.now_ms() - cfg_.reader_gc_horizon_ms;
  if (horizon <= 0) return;
  auto too_old = [&](const auto& entry) { return entry.second.rec_ms < horizon; };
  for (auto it = readers_.begin(); it != readers_.end();) {
    KeyReaders& kr = it->second;
    std::erase_if(kr.current, too_old);
    std::erase_if(kr.old_sum, too_old);
    for (auto eit = kr.excluded.begin(); eit != kr.excluded.end();) {
      std::erase_if(eit->second, too_old);
      if (eit->second.empty())
        eit = kr.excluded.erase(eit);
      else
        ++eit;
    }
    if (kr.current.empty() && kr.old_sum.empty() && kr.excluded.empty())
      it = readers_.erase(it);
    else
      ++it;
  }
}

// --- client ---

CcloClient::CcloClient(EngineConfig cfg, Topology topo, uint32_t id,
                       std::unique_ptr<Workload> w)
    : EngineClient(cfg, topo, id, std::move(w)) {}

void CcloClient::send_rot(Runtime& rt, uint64_t opid, const std::vector<std::string>& keys) {
  acc_.clear();
  std::map<uint32_t, std::vector<std::string>> groups;
  for (const auto& k : keys) groups[partition_for(k)].push_back(k);
  awaiting_ = groups.size();
  for (auto& [node, node_keys] : groups) {
    Message m;
    m.dst = node;
    RotReqBody b;
    b.rot = opid;
    b.role = RotRole::plain;
    b.keys = std::move(node_keys);
    m.body = std::move(b);
    rt.send(std::move(m));
  }
}

void CcloClient::send_put(Runtime& rt, uint64_t opid, const std::string& key,
                          const std::string& value) {
  Message m;
  m.dst = partition_for(key);
  PutReqBody b;
  b.opid = opid;
  b.key = key;
  b.value = value;
  b.client_ts = client_ts_;
  for (const auto& [k, dep] : deps_) b.deps.push_back(dep);
  m.body = std::move(b);
  rt.send(std::move(m));
}

void CcloClient::handle(Runtime& rt, const Message& m) {
  switch (m.kind()) {
    case MsgKind::rot_resp: {
      const auto& b = std::get<RotRespBody>(m.body);
      if (b.rot != opid_) return;
      for (const auto& mv : b.returns) {
        acc_[mv.key] = mv;
        if (!mv.present) continue;
        if (mv.v.creation_ts > client_ts_) client_ts_ = mv.v.creation_ts;
        DepEntry d{mv.key, mv.v.creation_ts, mv.v.origin_dc};
        auto [it, fresh] = deps_.emplace(mv.key, d);
        if (!fresh && std::tie(d.ts, d.origin_dc) > std::tie(it->second.ts, it->second.origin_dc))
          it->second = d;
      }
      if (--awaiting_ > 0) return;
      OpResult r;
      for (const auto& k : rot_keys_) r.returns.push_back(acc_[k]);
      finish(rt, std::move(r));
      break;
    }
    case MsgKind::put_resp: {
      const auto& b = std::get<PutRespBody>(m.body);
      if (b.opid != opid_) return;
      if (b.ts > client_ts_) client_ts_ = b.ts;
      deps_.clear();
      deps_[b.key] = DepEntry{b.key, b.ts, b.origin_dc};
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

}  // namespace rotkv
