#pragma once

#include <stdexcept>

#include "rotkv/timestamp.hpp"

namespace rotkv {

enum class ClockMode { hybrid, pure_logical, pure_physical };

// Raised when more than 2^16 events are timestamped within one millisecond.
struct ClockOverflowError : std::runtime_error {
  ClockOverflowError() : std::runtime_error("logical counter overflow within one millisecond") {}
};

// Hybrid logical clock.  Every issued timestamp is strictly greater than the
// previously issued one.
//
//   hybrid:        physical part tracks the physical clock, the logical
//                  counter breaks ties; the clock may run ahead of physical
//                  time when it merges larger incoming timestamps.
//   pure_logical:  the encoded value is a plain counter; the physical input
//                  is ignored.
//   pure_physical: the physical part never exceeds the physical clock, so
//                  incoming timestamps from the future cannot be merged
//                  (callers must wait until the physical clock catches up).
class HlcClock {
 public:
  HlcClock() = default;
  explicit HlcClock(ClockMode mode, Timestamp initial = Timestamp{})
      : mode_(mode), last_(initial) {}

  ClockMode mode() const { return mode_; }
  Timestamp last_issued() const { return last_; }

  // Timestamps a local event: returns a fresh value strictly greater than
  // every previously issued or observed one.
  Timestamp tick(int64_t physical_now_ms);

  // Merges an incoming timestamp and timestamps the merge event.  The result
  // is strictly greater than both the previous state and `incoming`, so the
  // state afterwards is >= incoming.  In pure_physical mode the caller must
  // ensure incoming.physical_ms() <= physical_now_ms.
  Timestamp update(int64_t physical_now_ms, Timestamp incoming);

  // Advances the state to cover `incoming` without issuing a timestamp.
  // Same pure_physical precondition as update().
  void observe(int64_t physical_now_ms, Timestamp incoming);

 private:
  ClockMode mode_ = ClockMode::hybrid;
  Timestamp last_;
};

}  // namespace rotkv
