#include "rotkv/sim.hpp"

#include <stdexcept>
#include <tuple>

namespace rotkv {

namespace {

uint64_t splitmix(uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

void Counters::merge(const Counters& o) {
  for (size_t i = 0; i < kMsgKinds; i++) {
    msgs_sent[i] += o.msgs_sent[i];
    bytes_sent[i] += o.bytes_sent[i];
  }
  ops_started += o.ops_started;
  ops_completed += o.ops_completed;
  rots += o.rots;
  puts += o.puts;
  keys_read += o.keys_read;
  rot_latencies_ms.insert(rot_latencies_ms.end(), o.rot_latencies_ms.begin(),
                          o.rot_latencies_ms.end());
  put_latencies_ms.insert(put_latencies_ms.end(), o.put_latencies_ms.begin(),
                          o.put_latencies_ms.end());
  blocked_reads += o.blocked_reads;
  blocked_read_ms += o.blocked_read_ms;
  blocked_puts += o.blocked_puts;
  readers_checks += o.readers_checks;
  readers_check_messages += o.readers_check_messages;
  readers_check_rotids_cumulative += o.readers_check_rotids_cumulative;
  readers_check_rotids_distinct += o.readers_check_rotids_distinct;
  readers_check_bytes += o.readers_check_bytes;
}

struct Simulator::Ev {
  int64_t t = 0;
  uint64_t seq = 0;
  enum class Type { deliver, timer, alarm } type = Type::deliver;
  uint32_t node = 0;
  Message msg;          // deliver
  TimerKind tkind = TimerKind::stabilization;
  int64_t period = 0;   // timer re-arm
  uint64_t token = 0;   // alarm
  uint32_t bytes = 0;   // deliver: encoded size (trace)
  uint64_t digest = 0;

  static bool after(const Ev& a, const Ev& b) {
    return std::tie(a.t, a.seq) > std::tie(b.t, b.seq);
  }
};

class SimRuntime final : public Runtime {
 public:
  SimRuntime(Simulator* sim, uint32_t id, uint64_t seed)
      : sim_(sim), id_(id), rng_(seed) {}

  uint32_t node_id() const override { return id_; }
  int64_t now_ms() const override { return sim_->now_ms(); }
  int64_t physical_now_ms() const override { return sim_->now_ms() + offset_; }
  void send(Message m) override { sim_->send_from(id_, std::move(m)); }
  void set_timer(int64_t period_ms, TimerKind kind) override {
    sim_->set_timer_for(id_, period_ms, kind);
  }
  void set_alarm(int64_t delay_ms, uint64_t token) override {
    sim_->set_alarm_for(id_, delay_ms, token);
  }
  void emit(TraceEvent e) override {
    if (!sim_->sched_.record_trace) return;
    e.t = sim_->now_ms();
    e.node = id_;
    sim_->trace_.push_back(std::move(e));
  }
  uint64_t rand64() override { return splitmix(rng_); }
  Counters& counters() override { return counters_; }

  int64_t offset_ = 0;

 private:
  Simulator* sim_;
  uint32_t id_;
  uint64_t rng_;
  Counters counters_;
};

struct Simulator::NodeSlot {
  std::unique_ptr<Node> node;
  SimRuntime rt;
  NodeSlot(Simulator* sim, uint32_t id, uint64_t seed, std::unique_ptr<Node> n)
      : node(std::move(n)), rt(sim, id, seed) {}
};

Simulator::Simulator(Topology topo, Schedule sched)
    : topo_(topo), sched_(sched), queue_(&Ev::after) {
  topo_.validate();
  delay_rng_ = sched_.seed ^ 0xd1b54a32d192ed03ull;
  slots_.resize(topo_.node_count());
}

Simulator::~Simulator() = default;

void Simulator::add_node(uint32_t id, std::unique_ptr<Node> n) {
  if (id >= slots_.size()) throw std::invalid_argument("node id outside topology");
  uint64_t s = sched_.seed;
  uint64_t node_seed = splitmix(s) ^ (0x9e3779b97f4a7c15ull * (id + 1));
  slots_[id] = std::make_unique<NodeSlot>(this, id, node_seed, std::move(n));
}

Node* Simulator::node(uint32_t id) {
  return id < slots_.size() && slots_[id] ? slots_[id]->node.get() : nullptr;
}

void Simulator::set_clock_offset(uint32_t node, int64_t offset_ms) {
  if (node >= slots_.size() || !slots_[node]) throw std::invalid_argument("unknown node");
  slots_[node]->rt.offset_ = offset_ms;
}

int64_t Simulator::draw_delay(uint32_t src, uint32_t dst) {
  DelayLaw law = sched_.default_law;
  auto it = sched_.link_overrides.find({src, dst});
  if (it != sched_.link_overrides.end()) law = it->second;
  switch (law.kind) {
    case DelayLaw::Kind::fixed:
      return law.lo;
    case DelayLaw::Kind::uniform:
      return law.lo + static_cast<int64_t>(splitmix(delay_rng_) %
                                           static_cast<uint64_t>(law.hi - law.lo + 1));
    case DelayLaw::Kind::adversarial: {
      int64_t d = law.lo + static_cast<int64_t>(splitmix(delay_rng_) %
                                                static_cast<uint64_t>(law.hi - law.lo + 1));
      if (splitmix(delay_rng_) % 8 == 0) d *= 5;  // straggler: heavy reordering
      return d;
    }
  }
  return law.lo;
}

void Simulator::push(Ev e) {
  e.seq = seq_++;
  queue_.push(std::move(e));
}

void Simulator::send_from(uint32_t src, Message m) {
  if (m.dst >= slots_.size() || !slots_[m.dst])
    throw std::logic_error("send to unknown destination node");
  if (topo_.is_client(src) && topo_.is_client(m.dst))
    throw std::logic_error("clients may not message clients");
  m.src = src;
  m.mid = next_mid_++;

  uint32_t bytes = static_cast<uint32_t>(encoded_size(m));
  uint64_t digest = sched_.compute_digests ? payload_digest(m) : 0;
  auto& c = slots_[src]->rt.counters();
  size_t ki = static_cast<size_t>(m.kind());
  c.msgs_sent[ki]++;
  c.bytes_sent[ki] += bytes;

  if (sched_.record_trace) {
    TraceEvent ev;
    ev.t = now_;
    ev.node = src;
    ev.ev = EvKind::msg_send;
    ev.mid = m.mid;
    ev.src = src;
    ev.dst = m.dst;
    ev.mkind = m.kind();
    ev.bytes = bytes;
    ev.digest = digest;
    ev.rot = rot_of(m);
    ev.vpk = vpk_of(m);
    trace_.push_back(ev);
  }

  Ev e;
  e.t = now_ + draw_delay(src, m.dst);
  e.type = Ev::Type::deliver;
  e.node = m.dst;
  e.bytes = bytes;
  e.digest = digest;
  e.msg = std::move(m);
  push(std::move(e));
}

void Simulator::set_timer_for(uint32_t node, int64_t period_ms, TimerKind kind) {
  if (period_ms <= 0) throw std::invalid_argument("timer period must be positive");
  Ev e;
  e.t = now_ + period_ms;
  e.type = Ev::Type::timer;
  e.node = node;
  e.tkind = kind;
  e.period = period_ms;
  push(std::move(e));
}

void Simulator::set_alarm_for(uint32_t node, int64_t delay_ms, uint64_t token) {
  if (delay_ms < 0) throw std::invalid_argument("alarm delay must be non-negative");
  Ev e;
  e.t = now_ + delay_ms;
  e.type = Ev::Type::alarm;
  e.node = node;
  e.token = token;
  push(std::move(e));
}

RunResult Simulator::run_until_quiescent(int64_t limit_ms) {
  if (!started_) {
    started_ = true;
    for (uint32_t id = 0; id < slots_.size(); id++)
      if (slots_[id]) slots_[id]->node->start(slots_[id]->rt);
  }

  RunResult res;
  while (!queue_.empty()) {
    const Ev& top = queue_.top();
    if (top.t > limit_ms) {
      res.hit_limit = true;
      break;
    }
    Ev e = top;
    queue_.pop();
    now_ = e.t;
    NodeSlot* slot = slots_[e.node].get();
    switch (e.type) {
      case Ev::Type::deliver: {
        if (sched_.record_trace) {
          TraceEvent ev;
          ev.t = now_;
          ev.node = e.node;
          ev.ev = EvKind::msg_deliver;
          ev.mid = e.msg.mid;
          ev.src = e.msg.src;
          ev.dst = e.msg.dst;
          ev.mkind = e.msg.kind();
          ev.bytes = e.bytes;
          ev.digest = e.digest;
          ev.rot = rot_of(e.msg);
          ev.vpk = vpk_of(e.msg);
          trace_.push_back(ev);
        }
        slot->node->on_message(slot->rt, e.msg);
        break;
      }
      case Ev::Type::timer: {
        if (sched_.record_trace) {
          TraceEvent ev;
          ev.t = now_;
          ev.node = e.node;
          ev.ev = EvKind::timer;
          ev.tkind = e.tkind;
          trace_.push_back(ev);
        }
        slot->node->on_timer(slot->rt, e.tkind);
        // Re-arm.
        Ev next;
        next.t = now_ + e.period;
        next.type = Ev::Type::timer;
        next.node = e.node;
        next.tkind = e.tkind;
        next.period = e.period;
        push(std::move(next));
        break;
      }
      case Ev::Type::alarm: {
        if (sched_.record_trace) {
          TraceEvent ev;
          ev.t = now_;
          ev.node = e.node;
          ev.ev = EvKind::timer;
          ev.tkind = TimerKind::alarm;
          trace_.push_back(ev);
        }
        slot->node->on_alarm(slot->rt, e.token);
        break;
      }
    }
  }
  res.end_time = now_;
  for (const auto& s : slots_)
    if (s) res.pending_client_ops += s->rt.counters().ops_started - s->rt.counters().ops_completed;
  return res;
}

Counters Simulator::merged_counters() const {
  Counters total;
  for (const auto& s : slots_)
    if (s) total.merge(s->rt.counters());
  return total;
}

}  // namespace rotkv
