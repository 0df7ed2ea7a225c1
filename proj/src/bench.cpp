#include "rotkv/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rotkv {

using nlohmann::ordered_json;

ZipfGen::ZipfGen(uint32_t n, double z) {
  if (n == 0) throw std::invalid_argument("zipf over an empty domain");
  if (z < 0) throw std::invalid_argument("zipf skew must be >= 0");
  cdf_.resize(n);
  double acc = 0;
  for (uint32_t k = 0; k < n; k++) {
    acc += 1.0 / std::pow(static_cast<double>(k + 1), z);
    cdf_[k] = acc;
  }
  for (double& c : cdf_) c /= acc;
  cdf_.back() = 1.0;  // guard against rounding at the top end
}

uint32_t ZipfGen::sample(uint64_t r) const {
  // 53 uniform bits -> [0, 1); the search finds the first rank covering u.
  double u = static_cast<double>(r >> 11) * 0x1.0p-53;
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<uint32_t>(it - cdf_.begin());
}

double ZipfGen::prob(uint32_t k) const {
  if (k >= cdf_.size()) return 0;
  return k == 0 ? cdf_[0] : cdf_[k] - cdf_[k - 1];
}

double put_op_fraction(double w, uint32_t keys_per_rot) {
  double k = static_cast<double>(keys_per_rot);
  return w * k / (1.0 - w + w * k);
}

std::vector<std::vector<std::string>> build_key_pool(const Topology& topo,
                                                     uint32_t keys_per_partition) {
  std::vector<std::vector<std::string>> pool(topo.partitions);
  uint32_t filled = 0;
  for (uint64_t i = 0; filled < topo.partitions; i++) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08llx", static_cast<unsigned long long>(i));
    std::string k(buf);
    auto& bucket = pool[topo.locate(k)];
    if (bucket.size() < keys_per_partition) {
      bucket.push_back(std::move(k));
      if (bucket.size() == keys_per_partition) filled++;
    }
  }
  return pool;
}

BenchWorkload::BenchWorkload(WorkloadConfig wc, Topology topo,
                             std::shared_ptr<const std::vector<std::vector<std::string>>> pool,
                             std::shared_ptr<WrittenKeys> written, int64_t deadline_ms)
    : wc_(wc),
      topo_(topo),
      pool_(std::move(pool)),
      written_(std::move(written)),
      deadline_ms_(deadline_ms),
      zipf_(wc.keys_per_partition, wc.z),
      perm_(topo.partitions) {
  if (wc_.w < 0 || wc_.w > 1) throw std::invalid_argument("write ratio outside [0, 1]");
  if (wc_.p == 0) throw std::invalid_argument("transactions must touch a partition");
  put_frac_ = put_op_fraction(wc_.w, std::min(wc_.p, topo_.partitions));
  std::iota(perm_.begin(), perm_.end(), 0u);
}

void BenchWorkload::ready(ClientApi& api) {
  int64_t now = api.runtime().now_ms();
  if (now >= deadline_ms_) return;
  if (now == 0 || wc_.think_ms <= 0) {
    issue(api);
    return;
  }
  api.runtime().set_alarm(wc_.think_ms, 0);
}

void BenchWorkload::alarm(ClientApi& api, uint64_t) {
  if (api.busy()) return;  // stale wake-up
  if (api.runtime().now_ms() >= deadline_ms_) return;
  issue(api);
}

void BenchWorkload::done(ClientApi&, const OpResult& r) {
  if (r.kind == OpKind::put) written_->keys.insert(last_put_key_);
}

void BenchWorkload::issue(ClientApi& api) {
  Runtime& rt = api.runtime();
  acc_ += put_frac_;
  if (acc_ >= 1.0) {
    acc_ -= 1.0;
    uint32_t part = static_cast<uint32_t>(rt.rand64() % topo_.partitions);
    const std::string& k = (*pool_)[part][zipf_.sample(rt.rand64())];
    last_put_key_ = k;
    std::string val = "c" + std::to_string(api.client_id());
    val.resize(wc_.value_bytes, 'v');
    api.put(k, std::move(val));
    return;
  }
  uint32_t take = std::min(wc_.p, topo_.partitions);
  for (uint32_t i = 0; i < take; i++) {
    uint32_t j = i + static_cast<uint32_t>(rt.rand64() % (topo_.partitions - i));
    std::swap(perm_[i], perm_[j]);
  }
  std::vector<std::string> keys;
  keys.reserve(take);
  for (uint32_t i = 0; i < take; i++)
    keys.push_back((*pool_)[perm_[i]][zipf_.sample(rt.rand64())]);
  api.rot(std::move(keys));
}

ProbeWorkload::ProbeWorkload(std::shared_ptr<const WrittenKeys> written, int64_t at_ms,
                             int rounds, int64_t gap_ms, uint32_t keys_per_probe)
    : written_(std::move(written)),
      at_ms_(at_ms),
      rounds_(rounds),
      gap_ms_(gap_ms),
      keys_per_probe_(keys_per_probe) {}

void ProbeWorkload::ready(ClientApi& api) {
  if (rounds_ <= 0) return;
  int64_t now = api.runtime().now_ms();
  if (now < at_ms_) {
    api.runtime().set_alarm(at_ms_ - now, 0);
    return;
  }
  issue(api);
}

void ProbeWorkload::alarm(ClientApi& api, uint64_t) {
  if (api.busy() || rounds_ <= 0) return;
  if (api.runtime().now_ms() < at_ms_) return;  // stale wake-up
  issue(api);
}

void ProbeWorkload::done(ClientApi&, const OpResult&) {}

void ProbeWorkload::issue(ClientApi& api) {
  const auto& all = written_->keys;
  if (all.empty()) {
    rounds_ = 0;
    return;
  }
  // Evenly strided sample of the written-key set: deterministic, spread out.
  size_t take = std::min<size_t>(keys_per_probe_, all.size());
  std::vector<std::string> keys;
  keys.reserve(take);
  size_t stride = all.size() / take;
  size_t i = 0, next = 0;
  for (const auto& k : all) {
    if (i++ == next) {
      keys.push_back(k);
      next += stride;
      if (keys.size() == take) break;
    }
  }
  rounds_--;
  at_ms_ = api.runtime().now_ms() + gap_ms_;
  api.rot(std::move(keys));
}

LatencyStats latency_stats(std::vector<int64_t> samples) {
  LatencyStats s;
  s.count = samples.size();
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  double sum = 0;
  for (int64_t v : samples) sum += static_cast<double>(v);
  s.mean = sum / static_cast<double>(samples.size());
  auto pct = [&](double q) {
    size_t i = static_cast<size_t>(q * static_cast<double>(samples.size() - 1) + 0.5);
    return samples[i];
  };
  s.p50 = pct(0.50);
  s.p95 = pct(0.95);
  s.p99 = pct(0.99);
  s.max = samples.back();
  return s;
}

namespace {

size_t ki(MsgKind k) { return static_cast<size_t>(k); }

}  // namespace

Metrics make_metrics(const ExperimentConfig& cfg, const RunResult& rr, const Counters& c) {
  Metrics m;
  m.sim_end_ms = rr.end_time;
  m.rots = c.rots;
  m.puts = c.puts;
  m.ops = c.rots + c.puts;
  uint64_t weighed = c.puts + c.keys_read;  // each key read counts once against w
  m.realized_w = weighed ? static_cast<double>(c.puts) / static_cast<double>(weighed) : 0;
  m.ops_per_sec =
      cfg.duration_ms > 0
          ? static_cast<double>(m.ops) * 1000.0 / static_cast<double>(cfg.duration_ms)
          : 0;
  m.rot_ms = latency_stats(c.rot_latencies_ms);
  m.put_ms = latency_stats(c.put_latencies_ms);
  for (size_t i = 0; i < kMsgKinds; i++) {
    m.msgs_total += c.msgs_sent[i];
    m.bytes_total += c.bytes_sent[i];
  }
  m.msgs_per_op = m.ops ? static_cast<double>(m.msgs_total) / static_cast<double>(m.ops) : 0;
  m.blocked_reads = c.blocked_reads;
  m.blocked_read_ms = c.blocked_read_ms;
  m.blocked_puts = c.blocked_puts;
  m.readers_checks = c.readers_checks;
  m.readers_check_messages = c.readers_check_messages;
  m.readers_check_bytes = c.readers_check_bytes;
  m.readers_check_rotids_cumulative = c.readers_check_rotids_cumulative;
  m.readers_check_rotids_distinct = c.readers_check_rotids_distinct;
  m.rotids_per_check = c.readers_checks ? static_cast<double>(c.readers_check_rotids_distinct) /
                                              static_cast<double>(c.readers_checks)
                                        : 0;
  return m;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  Topology topo{cfg.partitions, cfg.dcs, cfg.clients};
  topo.validate();
  Schedule sched = cfg.schedule;
  sched.record_trace |= cfg.check;  // the checker needs the events
  Simulator sim(topo, sched);

  auto pool = std::make_shared<const std::vector<std::vector<std::string>>>(
      build_key_pool(topo, cfg.workload.keys_per_partition));
  auto written = std::make_shared<WrittenKeys>();

  for (uint32_t d = 0; d < cfg.dcs; d++)
    for (uint32_t p = 0; p < cfg.partitions; p++) {
      uint32_t id = topo.partition_node(d, p);
      sim.add_node(id, make_partition(cfg.engine, topo, id));
    }
  for (uint32_t i = 0; i < cfg.clients; i++) {
    uint32_t id = topo.client_node(i);
    sim.add_node(id, make_client(cfg.engine, topo, id,
                                 std::make_unique<BenchWorkload>(cfg.workload, topo, pool,
                                                                 written, cfg.duration_ms)));
  }
  if (cfg.probes) {
    int64_t at = cfg.probe_at_ms > 0 ? cfg.probe_at_ms : cfg.duration_ms + cfg.drain_ms / 2;
    for (uint32_t d = 0; d < cfg.dcs; d++) {
      uint32_t id = topo.prober_node(d);
      sim.add_node(id, make_client(cfg.engine, topo, id,
                                   std::make_unique<ProbeWorkload>(written, at, 2, 10)));
    }
  }
  for (uint32_t id = 0; id < cfg.clock_offsets.size() && id < topo.partition_count(); id++)
    if (cfg.clock_offsets[id] != 0) sim.set_clock_offset(id, cfg.clock_offsets[id]);

  ExperimentResult res;
  res.topo = topo;
  res.run = sim.run_until_quiescent(cfg.duration_ms + cfg.drain_ms);
  res.counters = sim.merged_counters();
  res.counters.readers_check_messages = res.counters.msgs_sent[ki(MsgKind::readers_check_req)] +
                                        res.counters.msgs_sent[ki(MsgKind::readers_check_resp)] +
                                        res.counters.msgs_sent[ki(MsgKind::dep_check)];
  res.counters.readers_check_bytes = res.counters.bytes_sent[ki(MsgKind::readers_check_req)] +
                                     res.counters.bytes_sent[ki(MsgKind::readers_check_resp)] +
                                     res.counters.bytes_sent[ki(MsgKind::dep_check)];
  res.metrics = make_metrics(cfg, res.run, res.counters);
  res.trace = sim.take_trace();
  if (cfg.check) {
    res.check = check_trace(topo, res.trace, cfg.check_options);
    res.checked = true;
  }
  return res;
}

std::string metrics_csv_header() {
  return "engine,rot_mode,partitions,dcs,clients,seed,duration_ms,w,p,z,value_bytes,"
         "keys_per_partition,ops,rots,puts,realized_w,ops_per_sec,"
         "rot_mean_ms,rot_p50_ms,rot_p95_ms,rot_p99_ms,rot_max_ms,"
         "put_mean_ms,put_p50_ms,put_p95_ms,put_p99_ms,put_max_ms,"
         "msgs_total,bytes_total,msgs_per_op,blocked_reads,blocked_read_ms,blocked_puts,"
         "readers_checks,readers_check_messages,readers_check_bytes,"
         "readers_check_rotids_cumulative,readers_check_rotids_distinct,rotids_per_check,"
         "checked,violations";
}

std::string metrics_csv_row(const ExperimentConfig& cfg, const ExperimentResult& r) {
  const Metrics& m = r.metrics;
  std::ostringstream os;
  os << engine_name(cfg.engine.engine) << ',' << rot_mode_name(cfg.engine.rot_mode) << ','
     << cfg.partitions << ',' << cfg.dcs << ',' << cfg.clients << ',' << cfg.schedule.seed << ','
     << cfg.duration_ms << ',' << fmt(cfg.workload.w) << ',' << cfg.workload.p << ','
     << fmt(cfg.workload.z) << ',' << cfg.workload.value_bytes << ','
     << cfg.workload.keys_per_partition << ',' << m.ops << ',' << m.rots << ',' << m.puts << ','
     << fmt(m.realized_w) << ',' << fmt(m.ops_per_sec) << ',' << fmt(m.rot_ms.mean) << ','
     << m.rot_ms.p50 << ',' << m.rot_ms.p95 << ',' << m.rot_ms.p99 << ',' << m.rot_ms.max << ','
     << fmt(m.put_ms.mean) << ',' << m.put_ms.p50 << ',' << m.put_ms.p95 << ',' << m.put_ms.p99
     << ',' << m.put_ms.max << ',' << m.msgs_total << ',' << m.bytes_total << ','
     << fmt(m.msgs_per_op) << ',' << m.blocked_reads << ',' << m.blocked_read_ms << ','
     << m.blocked_puts << ',' << m.readers_checks << ',' << m.readers_check_messages << ','
     << m.readers_check_bytes << ',' << m.readers_check_rotids_cumulative << ','
     << m.readers_check_rotids_distinct << ',' << fmt(m.rotids_per_check) << ','
     << (r.checked ? 1 : 0) << ',' << (r.checked ? r.check.violations.size() : 0);
  return os.str();
}

std::string metrics_json(const ExperimentConfig& cfg, const ExperimentResult& r) {
  const Metrics& m = r.metrics;
  ordered_json j;
  j["engine"] = engine_name(cfg.engine.engine);
  j["rot_mode"] = rot_mode_name(cfg.engine.rot_mode);
  j["partitions"] = cfg.partitions;
  j["dcs"] = cfg.dcs;
  j["clients"] = cfg.clients;
  j["seed"] = cfg.schedule.seed;
  j["duration_ms"] = cfg.duration_ms;
  j["workload"] = {{"w", cfg.workload.w},
                   {"p", cfg.workload.p},
                   {"z", cfg.workload.z},
                   {"value_bytes", cfg.workload.value_bytes},
                   {"keys_per_partition", cfg.workload.keys_per_partition},
                   {"think_ms", cfg.workload.think_ms}};
  j["ops"] = m.ops;
  j["rots"] = m.rots;
  j["puts"] = m.puts;
  j["realized_w"] = m.realized_w;
  j["ops_per_sec"] = m.ops_per_sec;
  j["rot_ms"] = {{"count", m.rot_ms.count}, {"mean", m.rot_ms.mean}, {"p50", m.rot_ms.p50},
                 {"p95", m.rot_ms.p95},     {"p99", m.rot_ms.p99},   {"max", m.rot_ms.max}};
  j["put_ms"] = {{"count", m.put_ms.count}, {"mean", m.put_ms.mean}, {"p50", m.put_ms.p50},
                 {"p95", m.put_ms.p95},     {"p99", m.put_ms.p99},   {"max", m.put_ms.max}};
  ordered_json per_kind;
  for (size_t i = 0; i < kMsgKinds; i++) {
    if (!r.counters.msgs_sent[i]) continue;
    per_kind[msg_kind_name(static_cast<MsgKind>(i))] = {{"msgs", r.counters.msgs_sent[i]},
                                                        {"bytes", r.counters.bytes_sent[i]}};
  }
  j["messages"] = {{"total", m.msgs_total}, {"bytes", m.bytes_total}, {"per_kind", per_kind}};
  j["blocked"] = {{"reads", m.blocked_reads},
                  {"read_ms", m.blocked_read_ms},
                  {"puts", m.blocked_puts}};
  j["readers_check"] = {{"checks", m.readers_checks},
                        {"messages", m.readers_check_messages},
                        {"bytes", m.readers_check_bytes},
                        {"rotids_cumulative", m.readers_check_rotids_cumulative},
                        {"rotids_distinct", m.readers_check_rotids_distinct},
                        {"rotids_per_check", m.rotids_per_check}};
  if (r.checked) {
    j["check"] = {{"ok", r.check.ok()}, {"violations", r.check.violations.size()}};
  }
  return j.dump();
}

std::string metrics_human(const ExperimentConfig& cfg, const ExperimentResult& r) {
  const Metrics& m = r.metrics;
  std::ostringstream os;
  os << "engine           " << engine_name(cfg.engine.engine) << " ("
     << rot_mode_name(cfg.engine.rot_mode) << ")\n"
     << "topology         " << cfg.partitions << " partitions x " << cfg.dcs << " dcs, "
     << cfg.clients << " clients, seed " << cfg.schedule.seed << "\n"
     << "workload         w=" << fmt(cfg.workload.w) << " p=" << cfg.workload.p
     << " z=" << fmt(cfg.workload.z) << " b=" << cfg.workload.value_bytes << " keys/part="
     << cfg.workload.keys_per_partition << "\n"
     << "ops              " << m.ops << " (" << m.rots << " reads, " << m.puts
     << " writes, realized w=" << fmt(m.realized_w) << ")\n"
     << "throughput       " << fmt(m.ops_per_sec) << " ops/s over " << cfg.duration_ms << " ms\n"
     << "read latency ms  mean=" << fmt(m.rot_ms.mean) << " p50=" << m.rot_ms.p50
     << " p95=" << m.rot_ms.p95 << " p99=" << m.rot_ms.p99 << " max=" << m.rot_ms.max << "\n"
     << "write latency ms mean=" << fmt(m.put_ms.mean) << " p50=" << m.put_ms.p50
     << " p95=" << m.put_ms.p95 << " p99=" << m.put_ms.p99 << " max=" << m.put_ms.max << "\n"
     << "messages         " << m.msgs_total << " (" << m.bytes_total << " bytes, "
     << fmt(m.msgs_per_op) << " per op)\n"
     << "blocked          reads=" << m.blocked_reads << " (" << m.blocked_read_ms
     << " ms) puts=" << m.blocked_puts << "\n"
     << "readers checks   " << m.readers_checks << " checks, " << m.readers_check_messages
     << " msgs, " << m.readers_check_bytes << " bytes, distinct/check="
     << fmt(m.rotids_per_check) << "\n";
  if (r.checked)
    os << "checker          " << (r.check.ok() ? "ok" : "VIOLATIONS") << " ("
       << r.check.violations.size() << " findings)\n";
  return os.str();
}

}  // namespace rotkv
