#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "rotkv/hlc.hpp"

using namespace rotkv;

TEST_CASE("timestamp encoding round-trips and orders numerically") {
  Timestamp t = Timestamp::from_parts(1234567, 42);
  CHECK(t.physical_ms() == 1234567);
  CHECK(t.logical() == 42);
  CHECK(t.encoded() == ((uint64_t{1234567} << 16) | 42));

  // Numeric order == (physical, logical) lexicographic order.
  CHECK(Timestamp::from_parts(5, 9) < Timestamp::from_parts(6, 0));
  CHECK(Timestamp::from_parts(5, 9) < Timestamp::from_parts(5, 10));
  CHECK(Timestamp::from_parts(0, 0).is_zero());
}

TEST_CASE("pure_logical tick is a plain counter") {
  HlcClock c(ClockMode::pure_logical, Timestamp(90));
  CHECK(c.tick(0).encoded() == 91);
  CHECK(c.tick(12345).encoded() == 92);  // physical input ignored
}

TEST_CASE("update merges an incoming timestamp") {
  SUBCASE("incoming ahead advances the state past it") {
    HlcClock c(ClockMode::pure_logical, Timestamp(90));
    Timestamp r = c.update(0, Timestamp(100));
    CHECK(r.encoded() == 101);
    CHECK(c.last_issued() >= Timestamp(100));
  }
  SUBCASE("stale incoming leaves only a local tick") {
    HlcClock c(ClockMode::pure_logical, Timestamp(90));
    Timestamp r = c.update(0, Timestamp(40));
    CHECK(r.encoded() == 91);
  }
  SUBCASE("hybrid result exceeds both inputs") {
    HlcClock c(ClockMode::hybrid, Timestamp::from_parts(7, 3));
    Timestamp r = c.update(5, Timestamp::from_parts(7, 9));
    CHECK(r > Timestamp::from_parts(7, 9));
    CHECK(r > Timestamp::from_parts(7, 3));
  }
}

TEST_CASE("hybrid tick tracks the physical clock when it leads") {
  HlcClock c(ClockMode::hybrid, Timestamp::from_parts(10, 7));
  Timestamp r = c.tick(25);
  CHECK(r.physical_ms() == 25);
  CHECK(r.logical() == 0);
  // Within one millisecond only the logical counter moves.
  r = c.tick(25);
  CHECK(r == Timestamp::from_parts(25, 1));
}

// Oracle: replay every issued timestamp and require a strictly increasing
// sequence, over randomized interleavings of tick/update with a monotone
// physical clock.
TEST_CASE("issued timestamps are strictly increasing under random replay") {
  std::mt19937_64 rng(7);
  for (ClockMode mode : {ClockMode::hybrid, ClockMode::pure_logical}) {
    HlcClock c(mode);
    int64_t phys = 0;
    std::vector<Timestamp> issued;
    for (int i = 0; i < 10000; i++) {
      phys += static_cast<int64_t>(rng() % 3);  // physical time never regresses
      if (rng() % 4 == 0) {
        issued.push_back(c.update(phys, Timestamp(rng() % (uint64_t{1} << 24))));
      } else {
        issued.push_back(c.tick(phys));
      }
    }
    for (size_t i = 1; i < issued.size(); i++) CHECK(issued[i - 1] < issued[i]);
  }
}

// Oracle: happens-before implies timestamp order.  Three nodes exchange
// messages; each send ticks the sender, each receive merges at the receiver.
// Every message edge must go from a smaller to a larger timestamp.
TEST_CASE("message exchange preserves happens-before in timestamp order") {
  std::mt19937_64 rng(11);
  HlcClock clocks[3] = {HlcClock(ClockMode::hybrid), HlcClock(ClockMode::hybrid),
                        HlcClock(ClockMode::hybrid)};
  int64_t phys[3] = {0, 0, 0};
  for (int i = 0; i < 5000; i++) {
    int a = static_cast<int>(rng() % 3);
    int b = static_cast<int>((a + 1 + rng() % 2) % 3);
    phys[a] += static_cast<int64_t>(rng() % 2);
    phys[b] += static_cast<int64_t>(rng() % 2);
    Timestamp sent = clocks[a].tick(phys[a]);
    Timestamp received = clocks[b].update(phys[b], sent);
    CHECK(sent < received);
  }
}

TEST_CASE("logical counter overflow within one millisecond is an error") {
  HlcClock c(ClockMode::hybrid, Timestamp::from_parts(50, 0));
  for (int i = 1; i <= 0xFFFF; i++) c.tick(50);
  CHECK(c.last_issued() == Timestamp::from_parts(50, 0xFFFF));
  CHECK_THROWS_AS(c.tick(50), ClockOverflowError);
}

TEST_CASE("pure_physical clock never runs ahead of physical time") {
  HlcClock c(ClockMode::pure_physical);
  Timestamp r = c.tick(10);
  CHECK(r == Timestamp::from_parts(10, 0));
  r = c.tick(10);
  CHECK(r == Timestamp::from_parts(10, 1));
  CHECK(r.physical_ms() <= 10);

  // Merging a timestamp from the clock's future is a caller bug.
  CHECK_THROWS_AS(c.update(10, Timestamp::from_parts(12, 0)), std::logic_error);
  CHECK_THROWS_AS(c.observe(10, Timestamp::from_parts(12, 0)), std::logic_error);

  // Once physical time catches up the merge succeeds.
  Timestamp merged = c.update(12, Timestamp::from_parts(12, 0));
  CHECK(merged == Timestamp::from_parts(12, 1));
}

TEST_CASE("dc vector entrywise operations") {
  DcVector a(2), b(2);
  a[0] = Timestamp(10);
  a[1] = Timestamp(20);
  b[0] = Timestamp(15);
  b[1] = Timestamp(5);
  CHECK_FALSE(a.leq(b));
  DcVector mx = a;
  mx.max_with(b);
  CHECK(mx[0] == Timestamp(15));
  CHECK(mx[1] == Timestamp(20));
  DcVector mn = a;
  mn.min_with(b);
  CHECK(mn[0] == Timestamp(10));
  CHECK(mn[1] == Timestamp(5));
  CHECK(a.leq(mx));
  CHECK(mn.leq(a));
}
