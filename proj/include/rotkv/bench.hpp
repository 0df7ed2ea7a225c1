#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "rotkv/checker.hpp"
#include "rotkv/engine.hpp"
#include "rotkv/sim.hpp"

namespace rotkv {

// Popularity distribution over ranks 0..n-1 with P(k) proportional to
// 1/(k+1)^z; z = 0 is uniform.  Sampling is a binary search over the CDF.
class ZipfGen {
 public:
  ZipfGen(uint32_t n, double z);
  uint32_t sample(uint64_t r) const;  // r: uniform 64-bit draw
  double prob(uint32_t k) const;      // exact mass of rank k
  uint32_t n() const { return static_cast<uint32_t>(cdf_.size()); }

 private:
  std::vector<double> cdf_;
};

// keys_per_partition names hashing to each partition index, shared by every
// client of a run so key contention is real.
std::vector<std::vector<std::string>> build_key_pool(const Topology& topo,
                                                     uint32_t keys_per_partition);

struct WorkloadConfig {
  // The write mix is counted per key touched: w = puts / (puts + keys read),
  // so a read transaction over p keys weighs p times a put in the balance.
  double w = 0.05;
  uint32_t p = 4;                  // distinct partitions per read transaction
  double z = 0.99;                 // key-popularity skew within a partition
  uint32_t value_bytes = 8;        // written payload size
  uint32_t keys_per_partition = 10000;
  int64_t think_ms = 1;            // pause between completion and next issue
};

// Per-operation put probability that realizes write ratio w when every read
// transaction touches keys_per_rot keys.
double put_op_fraction(double w, uint32_t keys_per_rot);

// Keys confirmed written during a run, shared between the load clients (who
// add) and the convergence probes (who read).
struct WrittenKeys {
  std::set<std::string> keys;
};

// Closed-loop load generator for one client.  The put/read mix follows
// put_op_fraction(w, .) by error diffusion, so the realized ratio converges
// to the target at 1/ops.  All randomness comes from the node's runtime,
// keeping runs seed-deterministic.
class BenchWorkload final : public Workload {
 public:
  BenchWorkload(WorkloadConfig wc, Topology topo,
                std::shared_ptr<const std::vector<std::vector<std::string>>> pool,
                std::shared_ptr<WrittenKeys> written, int64_t deadline_ms);

  void ready(ClientApi& api) override;
  void done(ClientApi& api, const OpResult& r) override;
  void alarm(ClientApi& api, uint64_t token) override;

 private:
  void issue(ClientApi& api);

  WorkloadConfig wc_;
  Topology topo_;
  std::shared_ptr<const std::vector<std::vector<std::string>>> pool_;
  std::shared_ptr<WrittenKeys> written_;
  int64_t deadline_ms_;
  ZipfGen zipf_;
  double put_frac_;               // per-op put probability hitting w
  double acc_ = 0;                // write-debt accumulator
  std::vector<uint32_t> perm_;    // partition shuffle scratch
  std::string last_put_key_;
};

// Issues a few wide reads over written keys late in the run, when every
// replica has converged; the trace checker compares what they saw against
// the last-writer-wins winner.
class ProbeWorkload final : public Workload {
 public:
  ProbeWorkload(std::shared_ptr<const WrittenKeys> written, int64_t at_ms, int rounds,
                int64_t gap_ms, uint32_t keys_per_probe = 8);

  void ready(ClientApi& api) override;
  void done(ClientApi& api, const OpResult& r) override;
  void alarm(ClientApi& api, uint64_t token) override;

 private:
  void issue(ClientApi& api);

  std::shared_ptr<const WrittenKeys> written_;
  int64_t at_ms_;
  int rounds_;
  int64_t gap_ms_;
  uint32_t keys_per_probe_;
};

struct LatencyStats {
  uint64_t count = 0;
  double mean = 0;
  int64_t p50 = 0, p95 = 0, p99 = 0, max = 0;
};

LatencyStats latency_stats(std::vector<int64_t> samples);

struct Metrics {
  int64_t sim_end_ms = 0;
  uint64_t ops = 0, rots = 0, puts = 0;
  double realized_w = 0;
  double ops_per_sec = 0;  // of simulated time over the issue window
  LatencyStats rot_ms, put_ms;

  uint64_t msgs_total = 0, bytes_total = 0;
  double msgs_per_op = 0;

  uint64_t blocked_reads = 0;
  int64_t blocked_read_ms = 0;
  uint64_t blocked_puts = 0;

  uint64_t readers_checks = 0;
  uint64_t readers_check_messages = 0;
  uint64_t readers_check_bytes = 0;
  uint64_t readers_check_rotids_cumulative = 0;
  uint64_t readers_check_rotids_distinct = 0;
  double rotids_per_check = 0;  // distinct readers fenced per checked write
};

struct ExperimentConfig {
  uint32_t partitions = 4;
  uint32_t dcs = 2;
  uint32_t clients = 8;
  EngineConfig engine;
  WorkloadConfig workload;
  Schedule schedule;
  int64_t duration_ms = 300;  // per-client issue window
  int64_t drain_ms = 200;     // extra simulated time for in-flight work
  bool probes = true;
  int64_t probe_at_ms = 0;    // 0: duration + drain / 2
  bool check = false;         // replay the trace through the checker
  CheckOptions check_options;
  // Physical-clock offsets, indexed by node id; applied to partition nodes
  // (clients never read a physical clock).
  std::vector<int64_t> clock_offsets;
};

struct ExperimentResult {
  Topology topo{2, 1, 1};
  RunResult run;
  Counters counters;  // merged; readers-check message/byte sums filled in
  Metrics metrics;
  std::vector<TraceEvent> trace;
  bool checked = false;
  CheckReport check;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Aggregates merged counters into reporting metrics; duration comes from the
// config, latencies and traffic from the counters.  Shared by both backends.
Metrics make_metrics(const ExperimentConfig& cfg, const RunResult& run, const Counters& c);

// Report shapes: a fixed CSV column set, one JSON object per line, or an
// aligned human-readable block.
std::string metrics_csv_header();
std::string metrics_csv_row(const ExperimentConfig& cfg, const ExperimentResult& r);
std::string metrics_json(const ExperimentConfig& cfg, const ExperimentResult& r);
std::string metrics_human(const ExperimentConfig& cfg, const ExperimentResult& r);

}  // namespace rotkv
