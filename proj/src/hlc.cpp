#include "rotkv/hlc.hpp"

namespace rotkv {

namespace {

Timestamp bump_logical(Timestamp t) {
  if (t.logical() == Timestamp::kMaxLogical) throw ClockOverflowError{};
  return Timestamp(t.encoded() + 1);
}

}  // namespace

Timestamp HlcClock::tick(int64_t physical_now_ms) {
  switch (mode_) {
    case ClockMode::pure_logical:
      last_ = Timestamp(last_.encoded() + 1);
      return last_;
    case ClockMode::hybrid:
    case ClockMode::pure_physical: {
      if (physical_now_ms > last_.physical_ms()) {
        last_ = Timestamp::from_parts(physical_now_ms, 0);
      } else {
        // pure_physical reaches this branch only when the physical clock
        // has not advanced past the last issued millisecond.
        last_ = bump_logical(last_);
      }
      return last_;
    }
  }
  return last_;
}

Timestamp HlcClock::update(int64_t physical_now_ms, Timestamp incoming) {
  if (mode_ == ClockMode::pure_logical) {
    uint64_t base = last_.encoded() > incoming.encoded() ? last_.encoded() : incoming.encoded();
    last_ = Timestamp(base + 1);
    return last_;
  }
  if (incoming > last_) {
    if (mode_ == ClockMode::pure_physical && incoming.physical_ms() > physical_now_ms)
      throw std::logic_error("pure_physical clock cannot merge a future timestamp");
    last_ = incoming;
  }
  return tick(physical_now_ms);
}

void HlcClock::observe(int64_t physical_now_ms, Timestamp incoming) {
  if (incoming <= last_) return;
  if (mode_ == ClockMode::pure_physical && incoming.physical_ms() > physical_now_ms)
    throw std::logic_error("pure_physical clock cannot merge a future timestamp");
  last_ = incoming;
}

}  // namespace rotkv
