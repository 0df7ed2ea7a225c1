#include "rotkv/storage.hpp"

#include <algorithm>

namespace rotkv {

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

// Chain order: ascending (creation_ts, origin_dc).
bool chain_less(const Version& a, const Version& b) {
  if (a.creation_ts != b.creation_ts) return a.creation_ts < b.creation_ts;
  return a.origin_dc < b.origin_dc;
}

}  // namespace

bool VersionChain::install(Version v) {
  auto it = std::lower_bound(v_.begin(), v_.end(), v, chain_less);
  if (it != v_.end() && it->same_identity(v)) return false;
  v_.insert(it, std::move(v));
  return true;
}

const Version* VersionChain::read_at(const DcVector& sv) const {
  for (auto it = v_.rbegin(); it != v_.rend(); ++it)
    if (it->dv.leq(sv)) return &*it;
  return nullptr;
}

const Version* VersionChain::read_before(Timestamp t) const {
  for (auto it = v_.rbegin(); it != v_.rend(); ++it)
    if (it->creation_ts <= t) return &*it;
  return nullptr;
}

void VersionChain::gc(const DcVector& low_watermark) {
  const Version* keep = read_at(low_watermark);
  if (keep == nullptr) return;
  size_t idx = static_cast<size_t>(keep - v_.data());
  if (idx > 0) v_.erase(v_.begin(), v_.begin() + static_cast<ptrdiff_t>(idx));
}

bool PartitionStore::install(Version v) {
  return c_[v.key].install(std::move(v));
}

const VersionChain* PartitionStore::find(const std::string& key) const {
  auto it = c_.find(key);
  return it == c_.end() ? nullptr : &it->second;
}

const Version* PartitionStore::read_at(const std::string& key, const DcVector& sv) const {
  const VersionChain* ch = find(key);
  return ch ? ch->read_at(sv) : nullptr;
}

const Version* PartitionStore::read_before(const std::string& key, Timestamp t) const {
  const VersionChain* ch = find(key);
  return ch ? ch->read_before(t) : nullptr;
}

const Version* PartitionStore::newest(const std::string& key) const {
  const VersionChain* ch = find(key);
  return ch ? ch->newest() : nullptr;
}

void PartitionStore::gc_all(const DcVector& low_watermark) {
  for (auto& [k, ch] : c_) ch.gc(low_watermark);
}

}  // namespace rotkv
