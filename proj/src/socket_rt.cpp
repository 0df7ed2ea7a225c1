#include "rotkv/socket_rt.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace rotkv {

namespace {

uint64_t splitmix(uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Frame layout: [len:4 BE][kind:1][version:1][src:4 LE][dst:4 LE][mid:8 LE]...
// The router routes on dst without decoding the whole frame.
uint32_t frame_dst(const uint8_t* f) {
  return uint32_t(f[10]) | uint32_t(f[11]) << 8 | uint32_t(f[12]) << 16 | uint32_t(f[13]) << 24;
}

// Complete frames in [buf+off, buf+size); returns one frame's total size or 0.
size_t frame_size(const std::vector<uint8_t>& buf, size_t off) {
  if (buf.size() - off < 4) return 0;
  uint32_t body = uint32_t(buf[off]) << 24 | uint32_t(buf[off + 1]) << 16 |
                  uint32_t(buf[off + 2]) << 8 | uint32_t(buf[off + 3]);
  size_t total = size_t(body) + 4;
  return buf.size() - off >= total ? total : 0;
}

void write_all(int fd, const uint8_t* data, size_t len) {
  while (len > 0) {
    ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("socket write: ") + std::strerror(errno));
    }
    data += n;
    len -= size_t(n);
  }
}

}  // namespace

class SocketRuntime final : public Runtime {
 public:
  SocketRuntime(SocketCluster* host, uint32_t id, uint64_t seed, int fd)
      : host_(host), id_(id), rng_(seed), fd_(fd) {}

  uint32_t node_id() const override { return id_; }
  int64_t now_ms() const override { return host_->wall_now_ms(); }
  int64_t physical_now_ms() const override { return now_ms() + offset_; }

  void send(Message m) override {
    if (m.dst >= host_->slots_.size() || !host_->slots_[m.dst])
      throw std::logic_error("send to unknown destination node");
    if (host_->topo_.is_client(id_) && host_->topo_.is_client(m.dst))
      throw std::logic_error("clients may not message clients");
    m.src = id_;
    m.mid = (uint64_t(id_) + 1) << 40 | next_mid_++;

    std::vector<uint8_t> frame = encode(m);
    auto bytes = static_cast<uint32_t>(frame.size());
    size_t ki = static_cast<size_t>(m.kind());
    counters_.msgs_sent[ki]++;
    counters_.bytes_sent[ki] += bytes;

    TraceEvent ev;
    ev.ev = EvKind::msg_send;
    ev.mid = m.mid;
    ev.src = id_;
    ev.dst = m.dst;
    ev.mkind = m.kind();
    ev.bytes = bytes;
    ev.rot = rot_of(m);
    ev.vpk = vpk_of(m);
    emit(std::move(ev));

    write_all(fd_, frame.data(), frame.size());
  }

  void set_timer(int64_t period_ms, TimerKind kind) override {
    if (period_ms <= 0) throw std::invalid_argument("timer period must be positive");
    timers_.push_back({now_ms() + period_ms, period_ms, kind});
  }

  void set_alarm(int64_t delay_ms, uint64_t token) override {
    if (delay_ms < 0) throw std::invalid_argument("alarm delay must be non-negative");
    alarms_.push_back({now_ms() + delay_ms, token});
  }

  void emit(TraceEvent e) override {
    if (!host_->record_trace_) return;
    e.t = now_ms();
    e.node = id_;
    std::lock_guard<std::mutex> lk(host_->trace_mu_);
    host_->trace_.push_back(std::move(e));
  }

  uint64_t rand64() override { return splitmix(rng_); }
  Counters& counters() override { return counters_; }

  // Wall time until the next timer or alarm is due, clamped to [0, cap].
  int64_t poll_budget_ms(int64_t cap) const {
    int64_t next = now_ms() + cap;
    for (const auto& t : timers_) next = std::min(next, t.next);
    for (const auto& a : alarms_) next = std::min(next, a.at);
    return std::max<int64_t>(0, next - now_ms());
  }

  void fire_due(Node& n) {
    int64_t now = now_ms();
    // Index loops: the handlers may add timers or alarms, moving the storage.
    for (size_t i = 0; i < timers_.size(); i++) {
      if (timers_[i].next > now) continue;
      timers_[i].next = now + timers_[i].period;  // re-arm first, no catch-up bursts
      TimerKind kind = timers_[i].kind;
      TraceEvent ev;
      ev.ev = EvKind::timer;
      ev.tkind = kind;
      emit(std::move(ev));
      n.on_timer(*this, kind);
    }
    for (size_t i = 0; i < alarms_.size();) {
      if (alarms_[i].at > now) {
        i++;
        continue;
      }
      uint64_t token = alarms_[i].token;
      alarms_[i] = alarms_.back();
      alarms_.pop_back();
      TraceEvent ev;
      ev.ev = EvKind::timer;
      ev.tkind = TimerKind::alarm;
      emit(std::move(ev));
      n.on_alarm(*this, token);
    }
  }

  int64_t offset_ = 0;

 private:
  struct Periodic {
    int64_t next;
    int64_t period;
    TimerKind kind;
  };
  struct Alarm {
    int64_t at;
    uint64_t token;
  };

  SocketCluster* host_;
  uint32_t id_;
  uint64_t rng_;
  int fd_;
  uint64_t next_mid_ = 1;
  Counters counters_;
  std::vector<Periodic> timers_;
  std::vector<Alarm> alarms_;
};

struct SocketCluster::NodeSlot {
  uint32_t id = 0;
  std::unique_ptr<Node> node;
  std::unique_ptr<SocketRuntime> rt;
  int node_fd = -1;  // node-thread end
  int hub_fd = -1;   // router end
  std::thread thread;

  // Router-side buffers for this node's hub_fd.
  std::vector<uint8_t> in;      // bytes read from the node, partial frames
  size_t in_off = 0;
  std::vector<uint8_t> out;     // bytes pending delivery to the node
  size_t out_off = 0;

  ~NodeSlot() {
    if (node_fd >= 0) ::close(node_fd);
    if (hub_fd >= 0) ::close(hub_fd);
  }
};

SocketCluster::SocketCluster(Topology topo, uint64_t seed)
    : topo_(topo), seed_(seed), t0_(std::chrono::steady_clock::now()) {
  topo_.validate();
  slots_.resize(topo_.node_count());
}

SocketCluster::~SocketCluster() {
  stop_.store(true);
  if (router_.joinable()) router_.join();
  for (auto& s : slots_)
    if (s && s->thread.joinable()) s->thread.join();
}

int64_t SocketCluster::wall_now_ms() const {
  auto d = std::chrono::steady_clock::now() - t0_;
  return std::chrono::duration_cast<std::chrono::milliseconds>(d).count();
}

void SocketCluster::fail(const std::string& what) {
  {
    std::lock_guard<std::mutex> lk(err_mu_);
    if (error_.empty()) error_ = what;
  }
  stop_.store(true);
}

void SocketCluster::add_node(uint32_t id, std::unique_ptr<Node> n) {
  if (id >= slots_.size()) throw std::invalid_argument("node id outside topology");
  if (ran_) throw std::logic_error("nodes must be added before the run");
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0)
    throw std::runtime_error(std::string("socketpair: ") + std::strerror(errno));
  auto slot = std::make_unique<NodeSlot>();
  slot->id = id;
  slot->node = std::move(n);
  slot->node_fd = fds[0];
  slot->hub_fd = fds[1];
  uint64_t s = seed_;
  uint64_t node_seed = splitmix(s) ^ (0x9e3779b97f4a7c15ull * (id + 1));
  slot->rt = std::make_unique<SocketRuntime>(this, id, node_seed, slot->node_fd);
  slots_[id] = std::move(slot);
}

void SocketCluster::set_clock_offset(uint32_t node, int64_t offset_ms) {
  if (node >= slots_.size() || !slots_[node]) throw std::invalid_argument("unknown node");
  slots_[node]->rt->offset_ = offset_ms;
}

void SocketCluster::node_main(NodeSlot& s) {
  try {
    SocketRuntime& rt = *s.rt;
    s.node->start(rt);
    std::vector<uint8_t> chunk(65536);
    std::vector<uint8_t> buf;
    size_t off = 0;
    while (!stop_.load(std::memory_order_relaxed)) {
      struct pollfd pf = {s.node_fd, POLLIN, 0};
      int pr = ::poll(&pf, 1, static_cast<int>(rt.poll_budget_ms(5)));
      if (pr < 0 && errno != EINTR)
        throw std::runtime_error(std::string("poll: ") + std::strerror(errno));
      if (pr > 0 && (pf.revents & (POLLIN | POLLHUP))) {
        ssize_t n = ::recv(s.node_fd, chunk.data(), chunk.size(), 0);
        if (n == 0) break;  // closed: shutting down
        if (n < 0) {
          if (errno == EINTR) continue;
          throw std::runtime_error(std::string("recv: ") + std::strerror(errno));
        }
        buf.insert(buf.end(), chunk.begin(), chunk.begin() + n);
        size_t total;
        while ((total = frame_size(buf, off)) != 0) {
          Message m = decode(buf.data() + off, total);
          off += total;
          TraceEvent ev;
          ev.ev = EvKind::msg_deliver;
          ev.mid = m.mid;
          ev.src = m.src;
          ev.dst = m.dst;
          ev.mkind = m.kind();
          ev.bytes = static_cast<uint32_t>(total);
          ev.rot = rot_of(m);
          ev.vpk = vpk_of(m);
          rt.emit(std::move(ev));
          s.node->on_message(rt, m);
        }
        if (off > 65536 && off * 2 > buf.size()) {
          buf.erase(buf.begin(), buf.begin() + static_cast<long>(off));
          off = 0;
        }
      }
      rt.fire_due(*s.node);
    }
  } catch (const std::exception& e) {
    fail("node " + topo_.name(s.id) + ": " + e.what());
  }
}

void SocketCluster::router_main() {
  try {
    std::vector<NodeSlot*> live;
    for (auto& s : slots_)
      if (s) live.push_back(s.get());
    std::vector<struct pollfd> pfds(live.size());
    std::vector<uint8_t> chunk(65536);

    while (!stop_.load(std::memory_order_relaxed)) {
      for (size_t i = 0; i < live.size(); i++) {
        pfds[i].fd = live[i]->hub_fd;
        pfds[i].events = POLLIN;
        if (live[i]->out.size() > live[i]->out_off) pfds[i].events |= POLLOUT;
        pfds[i].revents = 0;
      }
      int pr = ::poll(pfds.data(), pfds.size(), 5);
      if (pr < 0 && errno != EINTR)
        throw std::runtime_error(std::string("poll: ") + std::strerror(errno));
      if (pr <= 0) continue;

      for (size_t i = 0; i < live.size(); i++) {
        NodeSlot& s = *live[i];
        if (pfds[i].revents & (POLLIN | POLLHUP)) {
          ssize_t n = ::recv(s.hub_fd, chunk.data(), chunk.size(), MSG_DONTWAIT);
          if (n > 0) {
            s.in.insert(s.in.end(), chunk.begin(), chunk.begin() + n);
            size_t total;
            while ((total = frame_size(s.in, s.in_off)) != 0) {
              const uint8_t* f = s.in.data() + s.in_off;
              uint32_t dst = frame_dst(f);
              if (dst >= slots_.size() || !slots_[dst])
                throw std::runtime_error("frame addressed to unknown node");
              NodeSlot& d = *slots_[dst];
              d.out.insert(d.out.end(), f, f + total);
              s.in_off += total;
            }
            if (s.in_off > 65536 && s.in_off * 2 > s.in.size()) {
              s.in.erase(s.in.begin(), s.in.begin() + static_cast<long>(s.in_off));
              s.in_off = 0;
            }
          }
        }
        if ((pfds[i].revents & POLLOUT) && s.out.size() > s.out_off) {
          ssize_t n = ::send(s.hub_fd, s.out.data() + s.out_off, s.out.size() - s.out_off,
                             MSG_DONTWAIT | MSG_NOSIGNAL);
          if (n > 0) {
            s.out_off += size_t(n);
            if (s.out_off == s.out.size()) {
              s.out.clear();
              s.out_off = 0;
            }
          }
        }
      }
    }
  } catch (const std::exception& e) {
    fail(std::string("router: ") + e.what());
  }
}

RunResult SocketCluster::run_for(int64_t wall_ms) {
  if (ran_) throw std::logic_error("a socket cluster runs only once");
  ran_ = true;
  t0_ = std::chrono::steady_clock::now();

  router_ = std::thread([this] { router_main(); });
  for (auto& s : slots_)
    if (s) s->thread = std::thread([this, p = s.get()] { node_main(*p); });

  while (wall_now_ms() < wall_ms && !stop_.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  stop_.store(true);
  router_.join();
  for (auto& s : slots_)
    if (s && s->thread.joinable()) s->thread.join();

  {
    std::lock_guard<std::mutex> lk(err_mu_);
    if (!error_.empty()) throw std::runtime_error(error_);
  }

  RunResult r;
  r.end_time = wall_now_ms();
  r.hit_limit = true;
  Counters c = merged_counters();
  r.pending_client_ops = c.ops_started - c.ops_completed;
  return r;
}

Counters SocketCluster::merged_counters() const {
  Counters all;
  for (const auto& s : slots_)
    if (s) all.merge(s->rt->counters());
  return all;
}

ExperimentResult run_socket_experiment(const ExperimentConfig& cfg) {
  Topology topo{cfg.partitions, cfg.dcs, cfg.clients};
  topo.validate();
  SocketCluster cl(topo, cfg.schedule.seed);
  cl.set_record_trace(cfg.schedule.record_trace || cfg.check);

  auto pool = std::make_shared<const std::vector<std::vector<std::string>>>(
      build_key_pool(topo, cfg.workload.keys_per_partition));

  for (uint32_t d = 0; d < cfg.dcs; d++)
    for (uint32_t p = 0; p < cfg.partitions; p++) {
      uint32_t id = topo.partition_node(d, p);
      cl.add_node(id, make_partition(cfg.engine, topo, id));
    }
  for (uint32_t i = 0; i < cfg.clients; i++) {
    uint32_t id = topo.client_node(i);
    cl.add_node(id, make_client(cfg.engine, topo, id,
                                std::make_unique<BenchWorkload>(cfg.workload, topo, pool,
                                                                std::make_shared<WrittenKeys>(),
                                                                cfg.duration_ms)));
  }
  for (uint32_t id = 0; id < cfg.clock_offsets.size() && id < topo.partition_count(); id++)
    if (cfg.clock_offsets[id] != 0) cl.set_clock_offset(id, cfg.clock_offsets[id]);

  ExperimentResult res;
  res.topo = topo;
  res.run = cl.run_for(cfg.duration_ms + cfg.drain_ms);
  res.counters = cl.merged_counters();
  auto ki = [](MsgKind k) { return static_cast<size_t>(k); };
  res.counters.readers_check_messages = res.counters.msgs_sent[ki(MsgKind::readers_check_req)] +
                                        res.counters.msgs_sent[ki(MsgKind::readers_check_resp)] +
                                        res.counters.msgs_sent[ki(MsgKind::dep_check)];
  res.counters.readers_check_bytes = res.counters.bytes_sent[ki(MsgKind::readers_check_req)] +
                                     res.counters.bytes_sent[ki(MsgKind::readers_check_resp)] +
                                     res.counters.bytes_sent[ki(MsgKind::dep_check)];
  res.metrics = make_metrics(cfg, res.run, res.counters);
  res.trace = cl.take_trace();
  if (cfg.check) {
    res.check = check_trace(topo, res.trace, cfg.check_options);
    res.checked = true;
  }
  return res;
}

std::vector<TraceEvent> SocketCluster::take_trace() {
  std::lock_guard<std::mutex> lk(trace_mu_);
  std::vector<TraceEvent> t = std::move(trace_);
  trace_.clear();
  std::stable_sort(t.begin(), t.end(),
                   [](const TraceEvent& a, const TraceEvent& b) { return a.t < b.t; });
  return t;
}

}  // namespace rotkv
