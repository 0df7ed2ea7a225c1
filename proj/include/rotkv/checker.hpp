#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rotkv/topology.hpp"
#include "rotkv/trace.hpp"

namespace rotkv {

// Offline trace validation.  The causality relation is rebuilt from the
// client-visible trace alone (program order unioned with read-from, closed
// transitively), so the checks test the consistency contract itself, not the
// engine's internal bookkeeping.
struct CheckOptions {
  bool transport = true;            // sends and deliveries pair up exactly once
  bool snapshots = true;            // causal cut + pairwise snapshot rule
  bool sessions = true;             // per-client monotonic reads, read-your-writes
  bool write_order = true;          // same-key wins order agrees with causality
  bool converged_probes = true;     // quiesced probes return the global winner
  bool one_version_per_key = true;  // rot responses carry at most one version per key

  // Message-chain depth bounds per transaction; 0 disables the check.
  int max_steps_multi = 0;   // transactions touching several partitions
  int max_steps_single = 0;  // transactions touching one partition
  // Every rot response must leave the partition in the same step as the
  // delivery that enabled it (no server-side holding).
  bool nonblocking_reads = false;
};

struct Violation {
  std::string rule;
  int64_t t = 0;
  std::string detail;
};

struct CheckStats {
  size_t events = 0;
  size_t ops = 0, rots = 0, puts = 0, probe_rots = 0;
  size_t messages = 0;
  size_t snapshot_pairs = 0;        // pairwise rule instantiations
  size_t converged_probe_rots = 0;  // probes eligible for the convergence check
  int max_rot_steps = 0;
};

struct CheckReport {
  std::vector<Violation> violations;  // sorted by (t, rule, detail)
  CheckStats stats;

  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

CheckReport check_trace(const Topology& topo, const std::vector<TraceEvent>& trace,
                        const CheckOptions& opt = {});

// Ancestor sets of a DAG as bitset rows (word-packed; row i holds every vertex
// with a path to i).  Returns an empty vector when the edge set has a cycle.
// Exposed so the closure can be verified against an independent oracle.
std::vector<std::vector<uint64_t>> ancestor_closure(
    size_t n, const std::vector<std::pair<uint32_t, uint32_t>>& edges);

inline bool closure_has(const std::vector<std::vector<uint64_t>>& anc, size_t from, size_t to) {
  return (anc[to][from >> 6] >> (from & 63)) & 1;
}

}  // namespace rotkv
