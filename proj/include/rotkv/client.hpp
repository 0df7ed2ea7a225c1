#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rotkv/engine.hpp"

namespace rotkv {

// Closed-loop client skeleton: op ids, start/end trace events, latency
// accounting, workload callbacks.  Subclasses implement the wire flows and
// call finish() when the outstanding op completes.
class EngineClient : public Node, public ClientApi {
 public:
  EngineClient(EngineConfig cfg, Topology topo, uint32_t id, std::unique_ptr<Workload> w);

  void start(Runtime& rt) final;
  void on_message(Runtime& rt, const Message& m) final;
  void on_alarm(Runtime& rt, uint64_t token) final;

  // ClientApi
  void rot(std::vector<std::string> keys) final;
  void put(std::string key, std::string value) final;
  bool busy() const final { return op_kind_ != OpKind::none; }
  uint32_t client_id() const final { return id_; }
  Runtime& runtime() final { return *rt_; }

 protected:
  virtual void handle(Runtime& rt, const Message& m) = 0;
  virtual void send_rot(Runtime& rt, uint64_t opid, const std::vector<std::string>& keys) = 0;
  virtual void send_put(Runtime& rt, uint64_t opid, const std::string& key,
                        const std::string& value) = 0;

  void finish(Runtime& rt, OpResult r);

  // Nodes in the client's home data center.
  uint32_t partition_for(const std::string& key) const {
    return topo_.partition_node(dc_, topo_.locate(key));
  }

  EngineConfig cfg_;
  Topology topo_;
  uint32_t id_;
  uint32_t dc_;
  uint32_t seq_ = 0;  // opid = (client id, seq)
  OpKind op_kind_ = OpKind::none;
  uint64_t opid_ = 0;
  std::vector<std::string> rot_keys_;  // outstanding rot, request order
  std::string put_key_;                // outstanding put

 private:
  std::unique_ptr<Workload> workload_;
  Runtime* rt_ = nullptr;
  int64_t op_start_ms_ = 0;
  bool probe_;
};

}  // namespace rotkv
