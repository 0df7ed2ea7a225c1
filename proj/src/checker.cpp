#include "rotkv/checker.hpp"

#include <algorithm>
#include <tuple>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace rotkv {

namespace {

// Last-writer-wins order on versions of one key.
using Lww = std::pair<uint64_t, uint32_t>;

Lww lww(Timestamp ts, uint32_t dc) { return {ts.encoded(), dc}; }

std::string opid_str(uint64_t opid) {
  return "c" + std::to_string(opid_client(opid)) + ":" + std::to_string(opid_seq(opid));
}

std::string ver_str(Timestamp ts, uint32_t dc) {
  return std::to_string(ts.encoded()) + "@" + std::to_string(dc);
}

struct Op {
  uint32_t node = 0;
  uint64_t opid = 0;
  OpKind kind = OpKind::none;
  bool probe = false;
  int64_t start_t = -1, end_t = -1;
  bool started = false, ended = false;
  std::vector<std::string> keys;  // rot
  std::vector<RetVersion> rets;   // rot
  std::string key;                // put
  Timestamp vts;
  uint32_t vdc = 0;
};

struct SentMsg {
  uint32_t src = 0, dst = 0;
  MsgKind kind = MsgKind::rot_req;
  uint32_t bytes = 0;
  uint64_t digest = 0;
  int deliveries = 0;
};

}  // namespace

std::vector<std::vector<uint64_t>> ancestor_closure(
    size_t n, const std::vector<std::pair<uint32_t, uint32_t>>& edges) {
  size_t words = (n + 63) / 64;
  std::vector<std::vector<uint64_t>> anc(n, std::vector<uint64_t>(words, 0));
  std::vector<std::vector<uint32_t>> out(n);
  std::vector<uint32_t> indeg(n, 0);
  for (auto [u, v] : edges) {
    out[u].push_back(v);
    indeg[v]++;
  }
  std::vector<uint32_t> ready;
  for (uint32_t v = 0; v < n; v++)
    if (indeg[v] == 0) ready.push_back(v);
  size_t done = 0;
  while (!ready.empty()) {
    uint32_t u = ready.back();
    ready.pop_back();
    done++;
    for (uint32_t v : out[u]) {
      for (size_t w = 0; w < words; w++) anc[v][w] |= anc[u][w];
      anc[v][u >> 6] |= uint64_t{1} << (u & 63);
      if (--indeg[v] == 0) ready.push_back(v);
    }
  }
  if (done != n) return {};  // cycle
  return anc;
}

namespace {

struct Checker {
  const Topology& topo;
  const std::vector<TraceEvent>& trace;
  const CheckOptions& opt;
  CheckReport rep{};

  std::map<uint64_t, Op> ops_by_id{};

  void fail(const std::string& rule, int64_t t, std::string detail) {
    rep.violations.push_back({rule, t, std::move(detail)});
  }

  // ---- pass 1: structure, transport, wire-level properties ----------------

  void scan() {
    std::map<uint64_t, SentMsg> sent;
    std::map<uint32_t, uint64_t> open_op;               // node -> running opid
    std::map<std::pair<uint32_t, uint64_t>, int> seen;  // (node, rot) -> max chain depth seen
    std::map<std::pair<uint32_t, uint64_t>, int64_t> last_enabling;
    std::map<uint64_t, int> depth_by_mid;
    std::map<uint64_t, int> steps_by_rot;
    std::map<uint64_t, std::set<uint32_t>> rot_partitions;

    for (const TraceEvent& e : trace) {
      rep.stats.events++;
      switch (e.ev) {
        case EvKind::op_start: {
          auto [it, fresh] = ops_by_id.try_emplace(e.opid);
          Op& op = it->second;
          if (!fresh && op.started) fail("op-structure", e.t, "duplicate start " + opid_str(e.opid));
          auto open = open_op.find(e.node);
          if (open != open_op.end())
            fail("op-structure", e.t,
                 opid_str(e.opid) + " issued while " + opid_str(open->second) + " is running");
          open_op[e.node] = e.opid;
          op.started = true;
          op.node = e.node;
          op.opid = e.opid;
          op.kind = e.op;
          op.probe = e.probe;
          op.start_t = e.t;
          op.keys = e.keys;
          if (e.op == OpKind::put) op.key = e.key;
          break;
        }
        case EvKind::op_end: {
          auto it = ops_by_id.find(e.opid);
          if (it == ops_by_id.end() || !it->second.started) {
            fail("op-structure", e.t, "end without start " + opid_str(e.opid));
            break;
          }
          Op& op = it->second;
          if (op.ended) fail("op-structure", e.t, "duplicate end " + opid_str(e.opid));
          op.ended = true;
          op.end_t = e.t;
          op.rets = e.rets;
          op.vts = e.vts;
          op.vdc = e.vdc;
          if (op.kind == OpKind::rot) {
            if (op.rets.size() != op.keys.size())
              fail("op-structure", e.t, opid_str(e.opid) + " returned " +
                                            std::to_string(op.rets.size()) + " entries for " +
                                            std::to_string(op.keys.size()) + " keys");
            else
              for (size_t i = 0; i < op.keys.size(); i++)
                if (op.rets[i].key != op.keys[i])
                  fail("op-structure", e.t,
                       opid_str(e.opid) + " entry " + std::to_string(i) + " is for key '" +
                           op.rets[i].key + "', requested '" + op.keys[i] + "'");
          }
          open_op.erase(op.node);
          break;
        }
        case EvKind::msg_send: {
          rep.stats.messages++;
          if (opt.transport) {
            auto [it, fresh] = sent.try_emplace(e.mid);
            if (!fresh)
              fail("transport", e.t, "mid " + std::to_string(e.mid) + " sent twice");
            it->second = SentMsg{e.src, e.dst, e.mkind, e.bytes, e.digest, it->second.deliveries};
          }
          if (e.rot != 0) {
            int d = seen[{e.node, e.rot}] + 1;
            depth_by_mid[e.mid] = d;
            if (opt.nonblocking_reads && e.mkind == MsgKind::rot_resp &&
                topo.is_partition(e.node)) {
              auto le = last_enabling.find({e.node, e.rot});
              if (le == last_enabling.end() || le->second != e.t)
                fail("nonblocking", e.t,
                     topo.name(e.node) + " held the response for " + opid_str(e.rot));
            }
          }
          break;
        }
        case EvKind::msg_deliver: {
          if (opt.transport) {
            auto it = sent.find(e.mid);
            if (it == sent.end()) {
              fail("transport", e.t, "delivery of unsent mid " + std::to_string(e.mid));
            } else {
              SentMsg& s = it->second;
              if (++s.deliveries > 1)
                fail("transport", e.t, "mid " + std::to_string(e.mid) + " delivered twice");
              if (s.dst != e.node || s.dst != e.dst || s.src != e.src || s.kind != e.mkind ||
                  s.bytes != e.bytes || s.digest != e.digest)
                fail("transport", e.t,
                     "mid " + std::to_string(e.mid) + " mutated between send and delivery");
            }
          }
          if (opt.one_version_per_key && e.mkind == MsgKind::rot_resp && e.vpk > 1)
            fail("one-version", e.t, "response for " + opid_str(e.rot) + " carries " +
                                         std::to_string(e.vpk) + " versions of one key");
          if (e.rot != 0) {
            auto dit = depth_by_mid.find(e.mid);
            if (dit != depth_by_mid.end()) {
              int d = dit->second;
              auto key = std::pair{e.node, e.rot};
              if (d > seen[key]) seen[key] = d;
              if (d > steps_by_rot[e.rot]) steps_by_rot[e.rot] = d;
              last_enabling[key] = e.t;
            }
            if ((e.mkind == MsgKind::rot_req || e.mkind == MsgKind::rot_fwd) &&
                topo.is_partition(e.node))
              rot_partitions[e.rot].insert(e.node);
          }
          break;
        }
        case EvKind::timer:
          break;
      }
    }

    for (auto& [rot, d] : steps_by_rot) {
      if (d > rep.stats.max_rot_steps) rep.stats.max_rot_steps = d;
      rep.stats.rot_steps[d]++;
      size_t parts = rot_partitions[rot].size();
      int limit = parts <= 1 ? opt.max_steps_single : opt.max_steps_multi;
      if (limit > 0 && d > limit)
        fail("steps", 0, opid_str(rot) + " took " + std::to_string(d) + " steps across " +
                             std::to_string(parts) + " partitions (limit " +
                             std::to_string(limit) + ")");
    }
  }

  // ---- pass 2: semantic checks over completed operations ------------------

  std::vector<const Op*> ops{};                       // completed, index order
  std::map<uint64_t, size_t> idx_of{};                // opid -> index
  std::map<std::string, std::vector<size_t>> writes_by_key{};
  std::map<std::tuple<std::string, uint64_t, uint32_t>, size_t> writer_of{};
  // Per rot, aligned with rets: the put that created each returned version
  // (nullopt for absent or unresolvable entries; the latter reported once).
  std::map<size_t, std::vector<std::optional<size_t>>> rot_writers{};
  std::vector<std::vector<uint64_t>> anc{};

  const Op& op(size_t i) const { return *ops[i]; }

  bool before(size_t a, size_t b) const { return closure_has(anc, a, b); }

  void build_graph() {
    for (auto& [id, o] : ops_by_id)
      if (o.started && o.ended) {
        idx_of[id] = ops.size();
        ops.push_back(&o);
        rep.stats.ops++;
        if (o.kind == OpKind::rot) {
          rep.stats.rots++;
          if (o.probe) rep.stats.probe_rots++;
        } else if (o.kind == OpKind::put) {
          rep.stats.puts++;
        }
      }

    for (size_t i = 0; i < ops.size(); i++) {
      const Op& o = op(i);
      if (o.kind != OpKind::put) continue;
      writes_by_key[o.key].push_back(i);
      auto [it, fresh] = writer_of.try_emplace({o.key, o.vts.encoded(), o.vdc}, i);
      if (!fresh)
        fail("write-order", o.end_t, "two writes created the same version " + o.key + "=" +
                                         ver_str(o.vts, o.vdc) + " (" +
                                         opid_str(op(it->second).opid) + ", " + opid_str(o.opid) +
                                         ")");
    }

    // Program order: per client in start order (ops at one client are
    // sequential, so start order is completion order).
    std::vector<std::pair<uint32_t, uint32_t>> edges;
    std::map<uint32_t, std::vector<size_t>> by_client;
    for (size_t i = 0; i < ops.size(); i++) by_client[op(i).node].push_back(i);
    for (auto& [node, list] : by_client) {
      std::sort(list.begin(), list.end(), [&](size_t a, size_t b) {
        // opid breaks start-time ties: one client's ops are sequential, so
        // its sequence numbers are the issue order.
        return std::tie(op(a).start_t, op(a).opid) < std::tie(op(b).start_t, op(b).opid);
      });
      for (size_t j = 1; j < list.size(); j++)
        edges.push_back({static_cast<uint32_t>(list[j - 1]), static_cast<uint32_t>(list[j])});
    }
    // Read-from.
    for (size_t i = 0; i < ops.size(); i++) {
      const Op& o = op(i);
      if (o.kind != OpKind::rot) continue;
      auto& writers = rot_writers[i];
      for (const RetVersion& ret : o.rets) {
        std::optional<size_t> w;
        if (ret.present) {
          auto it = writer_of.find({ret.key, ret.ts.encoded(), ret.dc});
          if (it == writer_of.end())
            fail("unknown-version", o.end_t,
                 opid_str(o.opid) + " returned " + ret.key + "=" + ver_str(ret.ts, ret.dc) +
                     " which no completed write created");
          else
            w = it->second;
        }
        writers.push_back(w);
        if (w) edges.push_back({static_cast<uint32_t>(*w), static_cast<uint32_t>(i)});
      }
    }

    anc = ancestor_closure(ops.size(), edges);
    if (anc.size() != ops.size())
      fail("causality-cycle", 0, "program order and read-from form a cycle");
  }

  // Writes on one key must win in causality order: a causally later write
  // may never lose to its own past.
  void check_write_order() {
    for (auto& [key, ws] : writes_by_key)
      for (size_t a : ws)
        for (size_t b : ws) {
          if (a == b || !before(a, b)) continue;
          if (lww(op(a).vts, op(a).vdc) >= lww(op(b).vts, op(b).vdc))
            fail("write-order", op(b).end_t,
                 key + ": " + opid_str(op(b).opid) + "=" + ver_str(op(b).vts, op(b).vdc) +
                     " is causally after " + opid_str(op(a).opid) + "=" +
                     ver_str(op(a).vts, op(a).vdc) + " but does not win");
        }
  }

  // Causal cut: every write in the transaction's causal past is visible, and
  // nothing returned is older than such a write.
  void check_visibility() {
    for (size_t i = 0; i < ops.size(); i++) {
      const Op& r = op(i);
      if (r.kind != OpKind::rot) continue;
      for (const RetVersion& ret : r.rets) {
        auto wit = writes_by_key.find(ret.key);
        if (wit == writes_by_key.end()) continue;
        std::optional<Lww> got;
        if (ret.present) got = lww(ret.ts, ret.dc);
        for (size_t w : wit->second) {
          if (!before(w, i)) continue;
          if (!got || *got < lww(op(w).vts, op(w).vdc))
            fail("stale-read", r.end_t,
                 opid_str(r.opid) + " returned " + ret.key + "=" +
                     (got ? ver_str(ret.ts, ret.dc) : std::string("nothing")) + " though " +
                     opid_str(op(w).opid) + "=" + ver_str(op(w).vts, op(w).vdc) +
                     " is in its causal past");
        }
      }
    }
  }

  // Pairwise snapshot rule: for returned entries X (key kx) and Y (key ky),
  // no write X' on kx may sit causally between X and Y's writer.
  void check_snapshots() {
    for (size_t i = 0; i < ops.size(); i++) {
      const Op& r = op(i);
      if (r.kind != OpKind::rot) continue;
      const auto& writers = rot_writers[i];
      if (writers.size() != r.rets.size()) continue;  // malformed, reported already
      for (size_t xi = 0; xi < r.rets.size(); xi++) {
        for (size_t yi = 0; yi < r.rets.size(); yi++) {
          if (xi == yi || !r.rets[yi].present) continue;
          auto wy = writers[yi];
          if (!wy) continue;
          rep.stats.snapshot_pairs++;
          const std::string& kx = r.rets[xi].key;
          auto wxit = writes_by_key.find(kx);
          if (wxit == writes_by_key.end()) continue;
          std::optional<size_t> wx = writers[xi];  // nullopt: absent entry
          for (size_t wp : wxit->second) {
            if (wx && (wp == *wx || !before(*wx, wp))) continue;
            if (!before(wp, *wy)) continue;
            fail("snapshot", r.end_t,
                 opid_str(r.opid) + " returned " + kx + "=" +
                     (wx ? ver_str(r.rets[xi].ts, r.rets[xi].dc) : std::string("nothing")) +
                     " and " + r.rets[yi].key + "=" +
                     ver_str(r.rets[yi].ts, r.rets[yi].dc) + ", but " + opid_str(op(wp).opid) +
                     "=" + kx + ":" + ver_str(op(wp).vts, op(wp).vdc) +
                     " lies causally between them");
          }
        }
      }
    }
  }

  // Session guarantees, checked directly per client and key: versions seen
  // (read or written) never move backwards.
  void check_sessions() {
    std::map<uint32_t, std::vector<size_t>> by_client;
    for (size_t i = 0; i < ops.size(); i++) by_client[op(i).node].push_back(i);
    for (auto& [node, list] : by_client) {
      std::sort(list.begin(), list.end(), [&](size_t a, size_t b) {
        // opid breaks start-time ties: one client's ops are sequential, so
        // its sequence numbers are the issue order.
        return std::tie(op(a).start_t, op(a).opid) < std::tie(op(b).start_t, op(b).opid);
      });
      std::map<std::string, std::pair<Lww, size_t>> high;  // key -> (version, op idx)
      for (size_t i : list) {
        const Op& o = op(i);
        if (o.kind == OpKind::put) {
          auto cur = high.find(o.key);
          Lww mine = lww(o.vts, o.vdc);
          if (cur == high.end() || cur->second.first < mine) high[o.key] = {mine, i};
        } else if (o.kind == OpKind::rot) {
          for (const RetVersion& ret : o.rets) {
            auto cur = high.find(ret.key);
            if (cur == high.end()) {
              if (ret.present) high[ret.key] = {lww(ret.ts, ret.dc), i};
              continue;
            }
            Lww seen = cur->second.first;
            if (!ret.present) {
              fail("session", o.end_t,
                   opid_str(o.opid) + " returned nothing for " + ret.key + " after " +
                       opid_str(op(cur->second.second).opid) + " saw " +
                       ver_str(Timestamp(seen.first), seen.second));
              continue;
            }
            Lww got = lww(ret.ts, ret.dc);
            if (got < seen)
              fail("session", o.end_t,
                   opid_str(o.opid) + " returned " + ret.key + "=" + ver_str(ret.ts, ret.dc) +
                       " after " + opid_str(op(cur->second.second).opid) + " saw " +
                       ver_str(Timestamp(seen.first), seen.second));
            if (got > seen) high[ret.key] = {got, i};
          }
        }
      }
    }
  }

  // Probes issued after the last write completed and the last replication
  // payload was delivered must return the global winner of every key.
  void check_probes() {
    int64_t settle = -1;
    for (size_t i = 0; i < ops.size(); i++)
      if (op(i).kind == OpKind::put) settle = std::max(settle, op(i).end_t);
    for (const TraceEvent& e : trace)
      if (e.ev == EvKind::msg_deliver &&
          (e.mkind == MsgKind::replicate || e.mkind == MsgKind::dep_check))
        settle = std::max(settle, e.t);

    std::map<std::string, Lww> winner;
    for (auto& [key, ws] : writes_by_key)
      for (size_t w : ws) {
        Lww v = lww(op(w).vts, op(w).vdc);
        auto [it, fresh] = winner.try_emplace(key, v);
        if (!fresh && it->second < v) it->second = v;
      }

    for (size_t i = 0; i < ops.size(); i++) {
      const Op& o = op(i);
      if (o.kind != OpKind::rot || !o.probe || o.start_t <= settle) continue;
      rep.stats.converged_probe_rots++;
      for (const RetVersion& ret : o.rets) {
        auto wit = winner.find(ret.key);
        if (wit == winner.end()) {
          if (ret.present)
            fail("diverged", o.end_t, "probe " + opid_str(o.opid) + " returned " + ret.key +
                                          "=" + ver_str(ret.ts, ret.dc) +
                                          " though the key was never written");
          continue;
        }
        if (!ret.present || lww(ret.ts, ret.dc) != wit->second)
          fail("diverged", o.end_t,
               "probe " + opid_str(o.opid) + " returned " + ret.key + "=" +
                   (ret.present ? ver_str(ret.ts, ret.dc) : std::string("nothing")) +
                   ", global winner is " +
                   ver_str(Timestamp(wit->second.first), wit->second.second));
      }
    }
  }

  CheckReport run() {
    scan();
    build_graph();
    if (anc.size() == ops.size()) {
      if (opt.write_order) check_write_order();
      if (opt.snapshots) {
        check_visibility();
        check_snapshots();
      }
    }
    if (opt.sessions) check_sessions();
    if (opt.converged_probes) check_probes();

    std::sort(rep.violations.begin(), rep.violations.end(),
              [](const Violation& a, const Violation& b) {
                return std::tie(a.t, a.rule, a.detail) < std::tie(b.t, b.rule, b.detail);
              });
    return std::move(rep);
  }
};

}  // namespace

std::string CheckReport::summary() const {
  std::ostringstream os;
  os << (ok() ? "clean" : "violations: " + std::to_string(violations.size())) << " | ops "
     << stats.ops << " (rots " << stats.rots << ", puts " << stats.puts << ", probes "
     << stats.probe_rots << ") | messages " << stats.messages << " | snapshot pairs "
     << stats.snapshot_pairs << " | converged probes " << stats.converged_probe_rots
     << " | max steps " << stats.max_rot_steps;
  size_t shown = std::min<size_t>(violations.size(), 25);
  for (size_t i = 0; i < shown; i++)
    os << "\n  [" << violations[i].rule << "] t=" << violations[i].t << " "
       << violations[i].detail;
  if (violations.size() > shown)
    os << "\n  ... " << (violations.size() - shown) << " more";
  return os.str();
}

CheckReport check_trace(const Topology& topo, const std::vector<TraceEvent>& trace,
                        const CheckOptions& opt) {
  Checker c{topo, trace, opt};
  return c.run();
}

}  // namespace rotkv
