#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace rotkv {

// 64-bit timestamp: upper 48 bits hold a millisecond count, lower 16 bits a
// logical counter that disambiguates events within the same millisecond.
// The total order on timestamps is the numeric order of the encoded value.
class Timestamp {
 public:
  static constexpr int kLogicalBits = 16;
  static constexpr uint64_t kLogicalMask = (uint64_t{1} << kLogicalBits) - 1;
  static constexpr uint64_t kMaxLogical = kLogicalMask;

  constexpr Timestamp() = default;
  constexpr explicit Timestamp(uint64_t encoded) : enc_(encoded) {}

  static constexpr Timestamp from_parts(int64_t physical_ms, uint16_t logical) {
    return Timestamp((static_cast<uint64_t>(physical_ms) << kLogicalBits) | logical);
  }

  constexpr uint64_t encoded() const { return enc_; }
  constexpr int64_t physical_ms() const { return static_cast<int64_t>(enc_ >> kLogicalBits); }
  constexpr uint16_t logical() const { return static_cast<uint16_t>(enc_ & kLogicalMask); }
  constexpr bool is_zero() const { return enc_ == 0; }

  constexpr auto operator<=>(const Timestamp&) const = default;

 private:
  uint64_t enc_ = 0;
};

// One timestamp entry per data center.  The same shape serves as a version's
// dependency vector, a partition's version vector, a global stable snapshot
// and a transaction snapshot vector; only the role differs.
class DcVector {
 public:
  DcVector() = default;
  explicit DcVector(size_t dcs) : e_(dcs) {}

  size_t size() const { return e_.size(); }
  Timestamp& operator[](size_t i) { return e_[i]; }
  const Timestamp& operator[](size_t i) const { return e_[i]; }

  // Entrywise comparison; vectors must have equal arity.
  bool leq(const DcVector& o) const {
    for (size_t i = 0; i < e_.size(); i++)
      if (e_[i] > o.e_[i]) return false;
    return true;
  }

  void max_with(const DcVector& o) {
    for (size_t i = 0; i < e_.size(); i++)
      if (o.e_[i] > e_[i]) e_[i] = o.e_[i];
  }

  void min_with(const DcVector& o) {
    for (size_t i = 0; i < e_.size(); i++)
      if (o.e_[i] < e_[i]) e_[i] = o.e_[i];
  }

  Timestamp max_entry() const {
    Timestamp m;
    for (auto t : e_)
      if (t > m) m = t;
    return m;
  }

  bool operator==(const DcVector&) const = default;

  const std::vector<Timestamp>& entries() const { return e_; }

 private:
  std::vector<Timestamp> e_;
};

}  // namespace rotkv
