#include "rotkv/read_latest.hpp"

#include <stdexcept>

namespace rotkv {

ReadLatestPartition::ReadLatestPartition(EngineConfig cfg, Topology topo, uint32_t id)
    : cfg_(cfg),
      topo_(topo),
      id_(id),
      dc_(topo.dc_of(id)),
      idx_(topo.partition_index(id)),
      clock_(cfg.clock_mode()) {}

void ReadLatestPartition::on_message(Runtime& rt, const Message& m) {
  switch (m.kind()) {
    case MsgKind::rot_req: {
      const auto& b = std::get<RotReqBody>(m.body);
      Message r;
      r.dst = m.src;
      RotRespBody resp;
      resp.rot = b.rot;
      for (const auto& k : b.keys) {
        MaybeVersion mv;
        mv.key = k;
        if (const Version* v = store_.newest(k)) {
          mv.present = true;
          mv.v = *v;
        }
        resp.returns.push_back(std::move(mv));
      }
      resp.clock_echo = clock_.last_issued();
      r.body = std::move(resp);
      rt.send(std::move(r));
      break;
    }
    case MsgKind::put_req: {
      const auto& b = std::get<PutReqBody>(m.body);
      Timestamp creation = clock_.tick(rt.physical_now_ms());
      Version v;
      v.key = b.key;
      v.value = b.value;
      v.origin_dc = dc_;
      v.creation_ts = creation;
      v.dv = DcVector(topo_.dcs);
      v.dv[dc_] = creation;
      store_.install(v);

      Message r;
      r.dst = m.src;
      PutRespBody resp;
      resp.opid = b.opid;
      resp.key = b.key;
      resp.ts = creation;
      resp.origin_dc = dc_;
      resp.clock_echo = creation;
      r.body = std::move(resp);
      rt.send(std::move(r));

      for (uint32_t j = 0; j < topo_.dcs; j++) {
        if (j == dc_) continue;
        Message rep;
        rep.dst = topo_.partition_node(j, idx_);
        ReplicateBody body;
        body.seq = ++repl_seq_[j];
        body.v = v;
        rep.body = std::move(body);
        rt.send(std::move(rep));
      }
      break;
    }
    case MsgKind::replicate:
      store_.install(std::get<ReplicateBody>(m.body).v);
      break;
    default:
      throw std::logic_error("unexpected message kind at latest-read partition");
  }
}

void ReadLatestClient::send_rot(Runtime& rt, uint64_t opid,
                                const std::vector<std::string>& keys) {
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

void ReadLatestClient::send_put(Runtime& rt, uint64_t opid, const std::string& key,
                                const std::string& value) {
  Message m;
  m.dst = partition_for(key);
  PutReqBody b;
  b.opid = opid;
  b.key = key;
  b.value = value;
  m.body = std::move(b);
  rt.send(std::move(m));
}

void ReadLatestClient::handle(Runtime& rt, const Message& m) {
  switch (m.kind()) {
    case MsgKind::rot_resp: {
      const auto& b = std::get<RotRespBody>(m.body);
      if (b.rot != opid_) return;
      for (const auto& mv : b.returns) acc_[mv.key] = mv;
      if (--awaiting_ > 0) return;
      OpResult r;
      for (const auto& k : rot_keys_) r.returns.push_back(acc_[k]);
      finish(rt, std::move(r));
      break;
    }
    case MsgKind::put_resp: {
      const auto& b = std::get<PutRespBody>(m.body);
      if (b.opid != opid_) return;
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
