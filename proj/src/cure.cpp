#include "rotkv/cure.hpp"

namespace rotkv {

void CurePartition::serve_read_or_wait(Runtime& rt, uint64_t rot, uint32_t client,
                                       const std::vector<std::string>& keys,
                                       const DcVector& sv) {
  int64_t pt = rt.physical_now_ms();
  int64_t need = sv[dc_].physical_ms();
  if (need <= pt) {
    serve_read(rt, rot, client, keys, sv);
    return;
  }
  rt.counters().blocked_reads++;
  held_reads_.push_back({rot, client, keys, sv, rt.now_ms()});
  rt.set_alarm(need - pt, 0);
}

void CurePartition::handle_put(Runtime& rt, const Message& m) {
  const auto& b = std::get<PutReqBody>(m.body);
  Timestamp needed = b.ctx.highest_local_ts;
  Timestamp remote = b.ctx.highest_gss.max_entry();
  if (remote > needed) needed = remote;

  int64_t pt = rt.physical_now_ms();
  if (needed.physical_ms() <= pt) {
    do_put(rt, b, m.src);
    return;
  }
  rt.counters().blocked_puts++;
  held_puts_.push_back({m, needed, rt.now_ms()});
  rt.set_alarm(needed.physical_ms() - pt, 0);
}

void CurePartition::on_alarm(Runtime& rt, uint64_t) { drain(rt); }

void CurePartition::drain(Runtime& rt) {
  int64_t pt = rt.physical_now_ms();

  for (size_t i = 0; i < held_reads_.size();) {
    HeldRead& h = held_reads_[i];
    if (h.sv[dc_].physical_ms() <= pt) {
      rt.counters().blocked_read_ms += rt.now_ms() - h.since_ms;
      HeldRead done = std::move(h);
      held_reads_.erase(held_reads_.begin() + static_cast<ptrdiff_t>(i));
      serve_read(rt, done.rot, done.client, done.keys, done.sv);
    } else {
      i++;
    }
  }

  for (size_t i = 0; i < held_puts_.size();) {
    HeldPut& h = held_puts_[i];
    if (h.needed.physical_ms() <= pt) {
      HeldPut done = std::move(h);
      held_puts_.erase(held_puts_.begin() + static_cast<ptrdiff_t>(i));
      do_put(rt, std::get<PutReqBody>(done.m.body), done.m.src);
    } else {
      i++;
    }
  }
}

}  // namespace rotkv
