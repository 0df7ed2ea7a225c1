#pragma once

#include <cstdint>
#include <string>

#include "rotkv/storage.hpp"

namespace rotkv {

// Node id layout, fixed for a given (partitions, dcs, clients):
//   [0, dcs*partitions)                      partition dc*partitions+index
//   [dcs*partitions, +clients)               workload clients
//   [dcs*partitions+clients, +dcs)           one prober client per dc
// Clients are pinned to home data center (client index mod dcs).
struct Topology {
  uint32_t partitions = 0;  // per data center
  uint32_t dcs = 1;
  uint32_t clients = 0;

  void validate() const;

  uint32_t partition_count() const { return partitions * dcs; }
  uint32_t node_count() const { return partition_count() + clients + dcs; }

  bool is_partition(uint32_t node) const { return node < partition_count(); }
  bool is_prober(uint32_t node) const { return node >= partition_count() + clients; }
  bool is_client(uint32_t node) const { return !is_partition(node); }

  uint32_t partition_node(uint32_t dc, uint32_t index) const { return dc * partitions + index; }
  uint32_t client_node(uint32_t i) const { return partition_count() + i; }
  uint32_t prober_node(uint32_t dc) const { return partition_count() + clients + dc; }

  uint32_t partition_index(uint32_t node) const { return node % partitions; }
  uint32_t dc_of(uint32_t node) const {
    if (is_partition(node)) return node / partitions;
    if (is_prober(node)) return node - partition_count() - clients;
    return (node - partition_count()) % dcs;
  }

  // Key placement: stable hash modulo the per-dc partition count.
  uint32_t locate(const std::string& key) const {
    return static_cast<uint32_t>(fnv1a64(key) % partitions);
  }

  std::string name(uint32_t node) const;
  // Inverse of name(); returns node_count() when unknown.
  uint32_t by_name(const std::string& s) const;
};

}  // namespace rotkv
