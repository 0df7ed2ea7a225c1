#include "rotkv/trace.hpp"

#include <json.hpp>

#include <ostream>
#include <sstream>

namespace rotkv {

using nlohmann::ordered_json;

const char* ev_kind_name(EvKind k) {
  switch (k) {
    case EvKind::op_start: return "op_start";
    case EvKind::op_end: return "op_end";
    case EvKind::msg_send: return "msg_send";
    case EvKind::msg_deliver: return "msg_deliver";
    case EvKind::timer: return "timer";
  }
  return "?";
}

const char* timer_kind_name(TimerKind k) {
  switch (k) {
    case TimerKind::stabilization: return "stabilization";
    case TimerKind::heartbeat: return "heartbeat";
    case TimerKind::gc: return "gc";
    case TimerKind::alarm: return "alarm";
  }
  return "?";
}

namespace {

std::string opid_str(uint64_t opid) {
  return "c" + std::to_string(opid_client(opid)) + ":" + std::to_string(opid_seq(opid));
}

uint64_t opid_parse(const std::string& s) {
  auto colon = s.find(':');
  uint32_t client = static_cast<uint32_t>(std::stoul(s.substr(1, colon - 1)));
  uint32_t seq = static_cast<uint32_t>(std::stoul(s.substr(colon + 1)));
  return make_opid(client, seq);
}

std::string hex16(uint64_t v) {
  static const char* d = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; i--, v >>= 4) s[static_cast<size_t>(i)] = d[v & 0xf];
  return s;
}

ordered_json sv_json(const DcVector& v) {
  ordered_json a = ordered_json::array();
  for (size_t i = 0; i < v.size(); i++) a.push_back(v[i].encoded());
  return a;
}

ordered_json event_json(const Topology& topo, const TraceEvent& e) {
  ordered_json j;
  j["t"] = e.t;
  j["node"] = topo.name(e.node);
  j["ev"] = ev_kind_name(e.ev);
  switch (e.ev) {
    case EvKind::op_start:
    case EvKind::op_end:
      j["op"] = e.op == OpKind::rot ? "rot" : "put";
      j["opid"] = opid_str(e.opid);
      if (e.probe) j["probe"] = true;
      if (e.op == OpKind::rot) {
        if (e.ev == EvKind::op_start) {
          j["keys"] = e.keys;
        } else {
          ordered_json rets = ordered_json::array();
          for (const auto& r : e.rets) {
            ordered_json o;
            o["key"] = r.key;
            if (r.present) {
              o["ts"] = r.ts.encoded();
              o["dc"] = r.dc;
            } else {
              o["bot"] = true;
            }
            rets.push_back(std::move(o));
          }
          j["rets"] = std::move(rets);
          if (e.sv.size() > 0) j["sv"] = sv_json(e.sv);
        }
      } else {
        j["key"] = e.key;
        if (e.ev == EvKind::op_end) {
          j["ts"] = e.vts.encoded();
          j["dc"] = e.vdc;
        }
      }
      break;
    case EvKind::msg_send:
    case EvKind::msg_deliver:
      j["mid"] = e.mid;
      j["src"] = topo.name(e.src);
      j["dst"] = topo.name(e.dst);
      j["kind"] = msg_kind_name(e.mkind);
      j["bytes"] = e.bytes;
      j["digest"] = hex16(e.digest);
      if (e.rot != 0) j["rot"] = opid_str(e.rot);
      if (e.vpk >= 0) j["vpk"] = e.vpk;
      break;
    case EvKind::timer:
      j["kind"] = timer_kind_name(e.tkind);
      break;
  }
  return j;
}

EvKind ev_kind_parse(const std::string& s) {
  for (EvKind k : {EvKind::op_start, EvKind::op_end, EvKind::msg_send, EvKind::msg_deliver,
                   EvKind::timer})
    if (s == ev_kind_name(k)) return k;
  throw std::runtime_error("unknown event kind: " + s);
}

MsgKind msg_kind_parse(const std::string& s) {
  for (size_t i = 0; i < kMsgKinds; i++)
    if (s == msg_kind_name(static_cast<MsgKind>(i))) return static_cast<MsgKind>(i);
  throw std::runtime_error("unknown message kind: " + s);
}

TimerKind timer_kind_parse(const std::string& s) {
  for (TimerKind k : {TimerKind::stabilization, TimerKind::heartbeat, TimerKind::gc,
                      TimerKind::alarm})
    if (s == timer_kind_name(k)) return k;
  throw std::runtime_error("unknown timer kind: " + s);
}

}  // namespace

void write_trace_jsonl(std::ostream& os, const TraceMeta& meta, const Topology& topo,
                       const std::vector<TraceEvent>& events) {
  ordered_json m;
  m["meta"] = true;
  m["partitions"] = meta.partitions;
  m["dcs"] = meta.dcs;
  m["clients"] = meta.clients;
  m["engine"] = meta.engine;
  os << m.dump() << "\n";
  for (const auto& e : events) os << event_json(topo, e).dump() << "\n";
}

std::string trace_to_jsonl(const TraceMeta& meta, const Topology& topo,
                           const std::vector<TraceEvent>& events) {
  std::ostringstream os;
  write_trace_jsonl(os, meta, topo, events);
  return os.str();
}

std::pair<TraceMeta, std::vector<TraceEvent>> read_trace_jsonl(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty trace");
  ordered_json m = ordered_json::parse(line);
  if (!m.contains("meta")) throw std::runtime_error("missing trace meta line");
  TraceMeta meta;
  meta.partitions = m.at("partitions").get<uint32_t>();
  meta.dcs = m.at("dcs").get<uint32_t>();
  meta.clients = m.at("clients").get<uint32_t>();
  meta.engine = m.at("engine").get<std::string>();
  Topology topo{meta.partitions, meta.dcs, meta.clients};

  std::vector<TraceEvent> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ordered_json j = ordered_json::parse(line);
    TraceEvent e;
    e.t = j.at("t").get<int64_t>();
    e.node = topo.by_name(j.at("node").get<std::string>());
    if (e.node == topo.node_count()) throw std::runtime_error("unknown node in trace");
    e.ev = ev_kind_parse(j.at("ev").get<std::string>());
    switch (e.ev) {
      case EvKind::op_start:
      case EvKind::op_end: {
        e.op = j.at("op").get<std::string>() == "rot" ? OpKind::rot : OpKind::put;
        e.opid = opid_parse(j.at("opid").get<std::string>());
        e.probe = j.value("probe", false);
        if (e.op == OpKind::rot) {
          if (e.ev == EvKind::op_start) {
            for (const auto& k : j.at("keys")) e.keys.push_back(k.get<std::string>());
          } else {
            for (const auto& r : j.at("rets")) {
              RetVersion rv;
              rv.key = r.at("key").get<std::string>();
              rv.present = !r.value("bot", false);
              if (rv.present) {
                rv.ts = Timestamp(r.at("ts").get<uint64_t>());
                rv.dc = r.at("dc").get<uint32_t>();
              }
              e.rets.push_back(std::move(rv));
            }
            if (j.contains("sv")) {
              const auto& a = j.at("sv");
              e.sv = DcVector(a.size());
              for (size_t i = 0; i < a.size(); i++) e.sv[i] = Timestamp(a[i].get<uint64_t>());
            }
          }
        } else {
          e.key = j.at("key").get<std::string>();
          if (e.ev == EvKind::op_end) {
            e.vts = Timestamp(j.at("ts").get<uint64_t>());
            e.vdc = j.at("dc").get<uint32_t>();
          }
        }
        break;
      }
      case EvKind::msg_send:
      case EvKind::msg_deliver: {
        e.mid = j.at("mid").get<uint64_t>();
        e.src = topo.by_name(j.at("src").get<std::string>());
        e.dst = topo.by_name(j.at("dst").get<std::string>());
        e.mkind = msg_kind_parse(j.at("kind").get<std::string>());
        e.bytes = j.at("bytes").get<uint32_t>();
        e.digest = std::stoull(j.at("digest").get<std::string>(), nullptr, 16);
        if (j.contains("rot")) e.rot = opid_parse(j.at("rot").get<std::string>());
        e.vpk = j.value("vpk", -1);
        break;
      }
      case EvKind::timer:
        e.tkind = timer_kind_parse(j.at("kind").get<std::string>());
        break;
    }
    out.push_back(std::move(e));
  }
  return {meta, std::move(out)};
}

}  // namespace rotkv
