#pragma once

#include "rotkv/contrarian.hpp"

namespace rotkv {

// Physical-clock variant of the timestamp-stable partition.  The clock never
// runs ahead of physical time, so instead of advancing the clock past a
// snapshot this partition *waits*: a read is held until the local clock
// covers the snapshot's local entry, and a put is held until the write can
// be stamped above everything its client has already seen.
class CurePartition : public ContrarianPartition {
 public:
  using ContrarianPartition::ContrarianPartition;

  void on_alarm(Runtime& rt, uint64_t token) override;

 protected:
  void serve_read_or_wait(Runtime& rt, uint64_t rot, uint32_t client,
                          const std::vector<std::string>& keys, const DcVector& sv) override;
  void handle_put(Runtime& rt, const Message& m) override;

 private:
  struct HeldRead {
    uint64_t rot;
    uint32_t client;
    std::vector<std::string> keys;
    DcVector sv;
    int64_t since_ms;
  };
  struct HeldPut {
    Message m;
    Timestamp needed;
    int64_t since_ms;
  };

  void drain(Runtime& rt);

  std::vector<HeldRead> held_reads_;
  std::vector<HeldPut> held_puts_;
};

}  // namespace rotkv
