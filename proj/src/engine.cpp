#include "rotkv/engine.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "rotkv/cclo.hpp"
#include "rotkv/client.hpp"
#include "rotkv/contrarian.hpp"
#include "rotkv/cure.hpp"
#include "rotkv/read_latest.hpp"

namespace rotkv {

const char* engine_name(EngineKind k) {
  switch (k) {
    case EngineKind::contrarian: return "contrarian";
    case EngineKind::cure: return "cure";
    case EngineKind::cclo: return "cclo";
    case EngineKind::read_latest: return "read_latest";
  }
  return "?";
}

EngineKind parse_engine(const std::string& s) {
  if (s == "contrarian") return EngineKind::contrarian;
  if (s == "cure") return EngineKind::cure;
  if (s == "cclo") return EngineKind::cclo;
  if (s == "read_latest") return EngineKind::read_latest;
  throw std::invalid_argument("unknown engine: " + s);
}

const char* rot_mode_name(RotMode m) {
  return m == RotMode::one_and_half ? "one_and_half" : "two_round";
}

RotMode parse_rot_mode(const std::string& s) {
  if (s == "1.5" || s == "one_and_half") return RotMode::one_and_half;
  if (s == "2" || s == "two_round") return RotMode::two_round;
  throw std::invalid_argument("unknown rot mode: " + s);
}

ClockMode EngineConfig::clock_mode() const {
  if (clock_mode_override) return *clock_mode_override;
  switch (engine) {
    case EngineKind::contrarian: return ClockMode::hybrid;
    case EngineKind::cure: return ClockMode::pure_physical;
    case EngineKind::cclo: return ClockMode::pure_logical;
    case EngineKind::read_latest: return ClockMode::hybrid;
  }
  return ClockMode::hybrid;
}

EngineClient::EngineClient(EngineConfig cfg, Topology topo, uint32_t id,
                           std::unique_ptr<Workload> w)
    : cfg_(cfg),
      topo_(topo),
      id_(id),
      dc_(topo.dc_of(id)),
      workload_(std::move(w)),
      probe_(topo.is_prober(id)) {
  if (!topo_.is_client(id)) throw std::invalid_argument("client id names a partition");
}

void EngineClient::start(Runtime& rt) {
  rt_ = &rt;
  workload_->ready(*this);
}

void EngineClient::on_message(Runtime& rt, const Message& m) {
  rt_ = &rt;
  handle(rt, m);
}

void EngineClient::on_alarm(Runtime& rt, uint64_t token) {
  rt_ = &rt;
  workload_->alarm(*this, token);
}

void EngineClient::rot(std::vector<std::string> keys) {
  if (busy()) throw std::logic_error("client already has an op in flight");
  if (keys.empty()) throw std::invalid_argument("rot needs at least one key");
  std::vector<std::string> uniq;
  std::set<std::string> seen;
  for (auto& k : keys)
    if (seen.insert(k).second) uniq.push_back(std::move(k));

  seq_++;
  opid_ = make_opid(id_, seq_);
  op_kind_ = OpKind::rot;
  rot_keys_ = std::move(uniq);
  op_start_ms_ = rt_->now_ms();
  rt_->counters().ops_started++;
  if (!probe_) {
    rt_->counters().rots++;
    rt_->counters().keys_read += rot_keys_.size();
  }

  TraceEvent e;
  e.ev = EvKind::op_start;
  e.op = OpKind::rot;
  e.opid = opid_;
  e.probe = probe_;
  e.keys = rot_keys_;
  rt_->emit(std::move(e));

  send_rot(*rt_, opid_, rot_keys_);
}

void EngineClient::put(std::string key, std::string value) {
  if (busy()) throw std::logic_error("client already has an op in flight");
  seq_++;
  opid_ = make_opid(id_, seq_);
  op_kind_ = OpKind::put;
  put_key_ = key;
  op_start_ms_ = rt_->now_ms();
  rt_->counters().ops_started++;
  if (!probe_) rt_->counters().puts++;

  TraceEvent e;
  e.ev = EvKind::op_start;
  e.op = OpKind::put;
  e.opid = opid_;
  e.probe = probe_;
  e.key = key;
  rt_->emit(std::move(e));

  send_put(*rt_, opid_, key, value);
}

void EngineClient::finish(Runtime& rt, OpResult r) {
  r.opid = opid_;
  r.kind = op_kind_;

  TraceEvent e;
  e.ev = EvKind::op_end;
  e.op = op_kind_;
  e.opid = opid_;
  e.probe = probe_;
  if (op_kind_ == OpKind::rot) {
    for (const auto& mv : r.returns) {
      RetVersion rv;
      rv.key = mv.key;
      rv.present = mv.present;
      if (mv.present) {
        rv.ts = mv.v.creation_ts;
        rv.dc = mv.v.origin_dc;
      }
      e.rets.push_back(std::move(rv));
    }
    e.sv = r.sv;
  } else {
    e.key = put_key_;
    e.vts = r.put_ts;
    e.vdc = r.put_dc;
  }
  rt.emit(std::move(e));

  rt.counters().ops_completed++;
  if (!probe_) {
    int64_t lat = rt.now_ms() - op_start_ms_;
    if (op_kind_ == OpKind::rot)
      rt.counters().rot_latencies_ms.push_back(lat);
    else
      rt.counters().put_latencies_ms.push_back(lat);
  }

  op_kind_ = OpKind::none;
  rot_keys_.clear();
  workload_->done(*this, r);
  if (!busy()) workload_->ready(*this);
}

std::unique_ptr<Node> make_partition(const EngineConfig& cfg, const Topology& topo,
                                     uint32_t node_id) {
  if (!topo.is_partition(node_id)) throw std::invalid_argument("partition id names a client");
  switch (cfg.engine) {
    case EngineKind::contrarian:
      return std::make_unique<ContrarianPartition>(cfg, topo, node_id);
    case EngineKind::cure:
      return std::make_unique<CurePartition>(cfg, topo, node_id);
    case EngineKind::cclo:
      return std::make_unique<CcloPartition>(cfg, topo, node_id);
    case EngineKind::read_latest:
      return std::make_unique<ReadLatestPartition>(cfg, topo, node_id);
  }
  throw std::invalid_argument("unknown engine");
}

std::unique_ptr<Node> make_client(const EngineConfig& cfg, const Topology& topo,
                                  uint32_t node_id, std::unique_ptr<Workload> w) {
  switch (cfg.engine) {
    case EngineKind::contrarian:
    case EngineKind::cure:
      return std::make_unique<ContrarianClient>(cfg, topo, node_id, std::move(w));
    case EngineKind::cclo:
      return std::make_unique<CcloClient>(cfg, topo, node_id, std::move(w));
    case EngineKind::read_latest:
      return std::make_unique<ReadLatestClient>(cfg, topo, node_id, std::move(w));
  }
  throw std::invalid_argument("unknown engine");
}

}  // namespace rotkv
