#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rotkv/timestamp.hpp"

namespace rotkv {

uint64_t fnv1a64(std::string_view s);

// One immutable key version.  Identity is (key, creation_ts, origin_dc):
// a partition issues strictly increasing creation timestamps, so the pair
// (creation_ts, origin_dc) never repeats for one key.
struct Version {
  std::string key;
  std::string value;
  DcVector dv;          // dependency vector; dv[origin_dc] == creation_ts
  uint32_t origin_dc = 0;
  Timestamp creation_ts;

  bool same_identity(const Version& o) const {
    return creation_ts == o.creation_ts && origin_dc == o.origin_dc && key == o.key;
  }
};

// Versions of one key, kept ascending by (creation_ts, origin_dc).  That
// order is the last-writer-wins order; the last element is the newest.
class VersionChain {
 public:
  // Returns false (and changes nothing) when the version is already present.
  // Redelivery therefore cannot duplicate state.
  bool install(Version v);

  // Newest version whose dependency vector is entrywise <= sv, or nullptr.
  const Version* read_at(const DcVector& sv) const;

  // Newest version with creation_ts <= t, or nullptr.
  const Version* read_before(Timestamp t) const;

  const Version* newest() const { return v_.empty() ? nullptr : &v_.back(); }

  // Drops every version older (in chain order) than the newest one whose
  // dependency vector is <= low_watermark.  Reads at any sv >= low_watermark
  // are unaffected.
  void gc(const DcVector& low_watermark);

  size_t size() const { return v_.size(); }
  const std::vector<Version>& versions() const { return v_; }

 private:
  std::vector<Version> v_;
};

class PartitionStore {
 public:
  bool install(Version v);
  const Version* read_at(const std::string& key, const DcVector& sv) const;
  const Version* read_before(const std::string& key, Timestamp t) const;
  const Version* newest(const std::string& key) const;
  void gc_all(const DcVector& low_watermark);

  const std::map<std::string, VersionChain>& chains() const { return c_; }

 private:
  const VersionChain* find(const std::string& key) const;
  std::map<std::string, VersionChain> c_;
};

}  // namespace rotkv
