#pragma once

#include <map>

#include "rotkv/client.hpp"
#include "rotkv/engine.hpp"
#include "rotkv/storage.hpp"

namespace rotkv {

// Baseline with no consistency machinery: reads return each key's newest
// installed version independently, writes are stamped and replicated with no
// dependency bookkeeping.  Exists to give the trace checker something to
// catch (concurrent multi-key reads can observe torn snapshots).
class ReadLatestPartition : public Node {
 public:
  ReadLatestPartition(EngineConfig cfg, Topology topo, uint32_t id);

  void start(Runtime&) override {}
  void on_message(Runtime& rt, const Message& m) override;

 private:
  EngineConfig cfg_;
  Topology topo_;
  uint32_t id_, dc_, idx_;
  HlcClock clock_;
  PartitionStore store_;
  std::map<uint32_t, uint64_t> repl_seq_;
};

class ReadLatestClient : public EngineClient {
 public:
  using EngineClient::EngineClient;

 protected:
  void handle(Runtime& rt, const Message& m) override;
  void send_rot(Runtime& rt, uint64_t opid, const std::vector<std::string>& keys) override;
  void send_put(Runtime& rt, uint64_t opid, const std::string& key,
                const std::string& value) override;

 private:
  std::map<std::string, MaybeVersion> acc_;
  size_t awaiting_ = 0;
};

}  // namespace rotkv
