#include "rotkv/topology.hpp"

#include <stdexcept>

namespace rotkv {

void Topology::validate() const {
  if (partitions < 2)
    throw std::invalid_argument("a data center must be split into more than one partition");
  if (dcs < 1) throw std::invalid_argument("at least one data center required");
  if (clients < 1) throw std::invalid_argument("at least one client required");
}

std::string Topology::name(uint32_t node) const {
  if (is_partition(node))
    return "d" + std::to_string(dc_of(node)) + ".p" + std::to_string(partition_index(node));
  if (is_prober(node)) return "probe" + std::to_string(dc_of(node));
  return "c" + std::to_string(node - partition_count());
}

uint32_t Topology::by_name(const std::string& s) const {
  for (uint32_t n = 0; n < node_count(); n++)
    if (name(n) == s) return n;
  return node_count();
}

}  // namespace rotkv
