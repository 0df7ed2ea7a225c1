#include "rotkv/message.hpp"

#include <cstring>
#include <map>
#include <stdexcept>

namespace rotkv {

const char* msg_kind_name(MsgKind k) {
  switch (k) {
    case MsgKind::rot_req: return "rot_req";
    case MsgKind::rot_fwd: return "rot_fwd";
    case MsgKind::rot_resp: return "rot_resp";
    case MsgKind::put_req: return "put_req";
    case MsgKind::put_resp: return "put_resp";
    case MsgKind::replicate: return "replicate";
    case MsgKind::dep_check: return "dep_check";
    case MsgKind::readers_check_req: return "readers_check_req";
    case MsgKind::readers_check_resp: return "readers_check_resp";
    case MsgKind::heartbeat: return "heartbeat";
    case MsgKind::stab_exchange: return "stab_exchange";
  }
  return "?";
}

MsgKind kind_of(const Payload& p) {
  return static_cast<MsgKind>(p.index());
}

namespace {

constexpr uint8_t kWireVersion = 1;

struct ByteWriter {
  std::vector<uint8_t>* out;
  void bytes(const void* p, size_t n) {
    const auto* b = static_cast<const uint8_t*>(p);
    out->insert(out->end(), b, b + n);
  }
};

struct CountWriter {
  size_t n = 0;
  void bytes(const void*, size_t k) { n += k; }
};

template <class W> void put_u8(W& w, uint8_t v) { w.bytes(&v, 1); }
template <class W> void put_u16(W& w, uint16_t v) {
  uint8_t b[2] = {uint8_t(v), uint8_t(v >> 8)};
  w.bytes(b, 2);
}
template <class W> void put_u32(W& w, uint32_t v) {
  uint8_t b[4];
  for (int i = 0; i < 4; i++) b[i] = uint8_t(v >> (8 * i));
  w.bytes(b, 4);
}
template <class W> void put_u64(W& w, uint64_t v) {
  uint8_t b[8];
  for (int i = 0; i < 8; i++) b[i] = uint8_t(v >> (8 * i));
  w.bytes(b, 8);
}
template <class W> void put_ts(W& w, Timestamp t) { put_u64(w, t.encoded()); }
template <class W> void put_str(W& w, const std::string& s) {
  put_u32(w, static_cast<uint32_t>(s.size()));
  w.bytes(s.data(), s.size());
}
template <class W> void put_vec(W& w, const DcVector& v) {
  put_u8(w, static_cast<uint8_t>(v.size()));
  for (size_t i = 0; i < v.size(); i++) put_ts(w, v[i]);
}
template <class W> void put_ctx(W& w, const ClientCtx& c) {
  put_ts(w, c.highest_local_ts);
  put_vec(w, c.highest_gss);
}
template <class W> void put_version(W& w, const Version& v) {
  put_str(w, v.key);
  put_str(w, v.value);
  put_vec(w, v.dv);
  put_u8(w, static_cast<uint8_t>(v.origin_dc));
  put_ts(w, v.creation_ts);
}
template <class W> void put_dep(W& w, const DepEntry& d) {
  put_str(w, d.key);
  put_ts(w, d.ts);
  put_u8(w, static_cast<uint8_t>(d.origin_dc));
}
template <class W> void put_reader(W& w, const ReaderWire& r) {
  put_u32(w, r.client);
  put_u32(w, r.seq);
  put_ts(w, r.read_ts);
}

template <class W>
void serialize_body(W& w, const Payload& p) {
  switch (kind_of(p)) {
    case MsgKind::rot_req: {
      const auto& b = std::get<RotReqBody>(p);
      put_u64(w, b.rot);
      put_u8(w, static_cast<uint8_t>(b.role));
      put_u16(w, static_cast<uint16_t>(b.keys.size()));
      for (const auto& k : b.keys) put_str(w, k);
      switch (b.role) {
        case RotRole::read:
          put_vec(w, b.sv);
          break;
        case RotRole::coord_two:
          put_ctx(w, b.ctx);
          break;
        case RotRole::coord_direct:
          put_ctx(w, b.ctx);
          put_u16(w, static_cast<uint16_t>(b.involved.size()));
          for (uint32_t i : b.involved) put_u32(w, i);
          break;
        case RotRole::read_direct:
        case RotRole::plain:
          break;
      }
      break;
    }
    case MsgKind::rot_fwd: {
      const auto& b = std::get<RotFwdBody>(p);
      put_u64(w, b.rot);
      put_vec(w, b.sv);
      break;
    }
    case MsgKind::rot_resp: {
      const auto& b = std::get<RotRespBody>(p);
      put_u64(w, b.rot);
      put_u8(w, b.snapshot_only ? 1 : 0);
      put_vec(w, b.sv);
      put_ts(w, b.clock_echo);
      put_u16(w, static_cast<uint16_t>(b.returns.size()));
      for (const auto& r : b.returns) {
        put_str(w, r.key);
        put_u8(w, r.present ? 1 : 0);
        if (r.present) put_version(w, r.v);
      }
      break;
    }
    case MsgKind::put_req: {
      const auto& b = std::get<PutReqBody>(p);
      put_u64(w, b.opid);
      put_str(w, b.key);
      put_str(w, b.value);
      put_ctx(w, b.ctx);
      put_ts(w, b.client_ts);
      put_u16(w, static_cast<uint16_t>(b.deps.size()));
      for (const auto& d : b.deps) put_dep(w, d);
      break;
    }
    case MsgKind::put_resp: {
      const auto& b = std::get<PutRespBody>(p);
      put_u64(w, b.opid);
      put_str(w, b.key);
      put_ts(w, b.ts);
      put_u8(w, static_cast<uint8_t>(b.origin_dc));
      put_vec(w, b.gss);
      put_ts(w, b.clock_echo);
      break;
    }
    case MsgKind::replicate: {
      const auto& b = std::get<ReplicateBody>(p);
      put_u64(w, b.seq);
      put_version(w, b.v);
      put_u16(w, static_cast<uint16_t>(b.deps.size()));
      for (const auto& d : b.deps) put_dep(w, d);
      break;
    }
    case MsgKind::dep_check: {
      const auto& b = std::get<DepCheckBody>(p);
      put_u8(w, b.is_resp ? 1 : 0);
      put_u64(w, b.check);
      put_u16(w, static_cast<uint16_t>(b.deps.size()));
      for (const auto& d : b.deps) put_dep(w, d);
      put_u32(w, static_cast<uint32_t>(b.readers.size()));
      for (const auto& r : b.readers) put_reader(w, r);
      put_ts(w, b.clock_echo);
      break;
    }
    case MsgKind::readers_check_req: {
      const auto& b = std::get<ReadersCheckReqBody>(p);
      put_u64(w, b.check);
      put_u16(w, static_cast<uint16_t>(b.keys.size()));
      for (const auto& k : b.keys) put_str(w, k);
      break;
    }
    case MsgKind::readers_check_resp: {
      const auto& b = std::get<ReadersCheckRespBody>(p);
      put_u64(w, b.check);
      put_u32(w, static_cast<uint32_t>(b.readers.size()));
      for (const auto& r : b.readers) put_reader(w, r);
      put_ts(w, b.clock_echo);
      break;
    }
    case MsgKind::heartbeat: {
      const auto& b = std::get<HeartbeatBody>(p);
      put_u64(w, b.seq);
      put_ts(w, b.ts);
      break;
    }
    case MsgKind::stab_exchange: {
      const auto& b = std::get<StabBody>(p);
      put_vec(w, b.vv);
      break;
    }
  }
}

template <class W>
void serialize(W& w, const Message& m) {
  put_u8(w, kWireVersion);
  put_u32(w, m.src);
  put_u32(w, m.dst);
  put_u64(w, m.mid);
  serialize_body(w, m.body);
}

struct Reader {
  const uint8_t* p;
  size_t left;
  void need(size_t n) {
    if (left < n) throw std::runtime_error("truncated frame");
  }
  uint8_t u8() {
    need(1);
    left--;
    return *p++;
  }
  uint16_t u16() {
    need(2);
    uint16_t v = uint16_t(p[0]) | uint16_t(p[1]) << 8;
    p += 2;
    left -= 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; i++) v |= uint32_t(p[i]) << (8 * i);
    p += 4;
    left -= 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; i++) v |= uint64_t(p[i]) << (8 * i);
    p += 8;
    left -= 8;
    return v;
  }
  Timestamp ts() { return Timestamp(u64()); }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    left -= n;
    return s;
  }
  DcVector vec() {
    uint8_t n = u8();
    DcVector v(n);
    for (uint8_t i = 0; i < n; i++) v[i] = ts();
    return v;
  }
  ClientCtx ctx() {
    ClientCtx c;
    c.highest_local_ts = ts();
    c.highest_gss = vec();
    return c;
  }
  Version version() {
    Version v;
    v.key = str();
    v.value = str();
    v.dv = vec();
    v.origin_dc = u8();
    v.creation_ts = ts();
    return v;
  }
  DepEntry dep() {
    DepEntry d;
    d.key = str();
    d.ts = ts();
    d.origin_dc = u8();
    return d;
  }
  ReaderWire reader() {
    ReaderWire r;
    r.client = u32();
    r.seq = u32();
    r.read_ts = ts();
    return r;
  }
};

Payload decode_body(MsgKind kind, Reader& r) {
  switch (kind) {
    case MsgKind::rot_req: {
      RotReqBody b;
      b.rot = r.u64();
      b.role = static_cast<RotRole>(r.u8());
      uint16_t nk = r.u16();
      for (uint16_t i = 0; i < nk; i++) b.keys.push_back(r.str());
      switch (b.role) {
        case RotRole::read:
          b.sv = r.vec();
          break;
        case RotRole::coord_two:
          b.ctx = r.ctx();
          break;
        case RotRole::coord_direct: {
          b.ctx = r.ctx();
          uint16_t ni = r.u16();
          for (uint16_t i = 0; i < ni; i++) b.involved.push_back(r.u32());
          break;
        }
        case RotRole::read_direct:
        case RotRole::plain:
          break;
      }
      return b;
    }
    case MsgKind::rot_fwd: {
      RotFwdBody b;
      b.rot = r.u64();
      b.sv = r.vec();
      return b;
    }
    case MsgKind::rot_resp: {
      RotRespBody b;
      b.rot = r.u64();
      b.snapshot_only = r.u8() != 0;
      b.sv = r.vec();
      b.clock_echo = r.ts();
      uint16_t n = r.u16();
      for (uint16_t i = 0; i < n; i++) {
        MaybeVersion mv;
        mv.key = r.str();
        mv.present = r.u8() != 0;
        if (mv.present) mv.v = r.version();
        b.returns.push_back(std::move(mv));
      }
      return b;
    }
    case MsgKind::put_req: {
      PutReqBody b;
      b.opid = r.u64();
      b.key = r.str();
      b.value = r.str();
      b.ctx = r.ctx();
      b.client_ts = r.ts();
      uint16_t n = r.u16();
      for (uint16_t i = 0; i < n; i++) b.deps.push_back(r.dep());
      return b;
    }
    case MsgKind::put_resp: {
      PutRespBody b;
      b.opid = r.u64();
      b.key = r.str();
      b.ts = r.ts();
      b.origin_dc = r.u8();
      b.gss = r.vec();
      b.clock_echo = r.ts();
      return b;
    }
    case MsgKind::replicate: {
      ReplicateBody b;
      b.seq = r.u64();
      b.v = r.version();
      uint16_t n = r.u16();
      for (uint16_t i = 0; i < n; i++) b.deps.push_back(r.dep());
      return b;
    }
    case MsgKind::dep_check: {
      DepCheckBody b;
      b.is_resp = r.u8() != 0;
      b.check = r.u64();
      uint16_t n = r.u16();
      for (uint16_t i = 0; i < n; i++) b.deps.push_back(r.dep());
      uint32_t nr = r.u32();
      for (uint32_t i = 0; i < nr; i++) b.readers.push_back(r.reader());
      b.clock_echo = r.ts();
      return b;
    }
    case MsgKind::readers_check_req: {
      ReadersCheckReqBody b;
      b.check = r.u64();
      uint16_t n = r.u16();
      for (uint16_t i = 0; i < n; i++) b.keys.push_back(r.str());
      return b;
    }
    case MsgKind::readers_check_resp: {
      ReadersCheckRespBody b;
      b.check = r.u64();
      uint32_t n = r.u32();
      for (uint32_t i = 0; i < n; i++) b.readers.push_back(r.reader());
      b.clock_echo = r.ts();
      return b;
    }
    case MsgKind::heartbeat: {
      HeartbeatBody b;
      b.seq = r.u64();
      b.ts = r.ts();
      return b;
    }
    case MsgKind::stab_exchange: {
      StabBody b;
      b.vv = r.vec();
      return b;
    }
  }
  throw std::runtime_error("unknown message kind");
}

}  // namespace

std::vector<uint8_t> encode(const Message& m) {
  std::vector<uint8_t> out;
  out.reserve(64);
  // Placeholder for the big-endian length, filled in below.
  out.insert(out.end(), 4, 0);
  out.push_back(static_cast<uint8_t>(m.kind()));
  ByteWriter w{&out};
  serialize(w, m);
  uint32_t len = static_cast<uint32_t>(out.size() - 4);
  out[0] = uint8_t(len >> 24);
  out[1] = uint8_t(len >> 16);
  out[2] = uint8_t(len >> 8);
  out[3] = uint8_t(len);
  return out;
}

size_t encoded_size(const Message& m) {
  CountWriter w;
  serialize(w, m);
  return w.n + 5;  // length field + kind byte
}

Message decode(const uint8_t* data, size_t len) {
  if (len < 5) throw std::runtime_error("frame too short");
  uint32_t body_len = uint32_t(data[0]) << 24 | uint32_t(data[1]) << 16 | uint32_t(data[2]) << 8 |
                      uint32_t(data[3]);
  if (body_len + 4 != len) throw std::runtime_error("frame length mismatch");
  uint8_t kind_byte = data[4];
  if (kind_byte >= kMsgKinds) throw std::runtime_error("unknown message kind");
  Reader r{data + 5, len - 5};
  if (r.u8() != kWireVersion) throw std::runtime_error("unsupported wire version");
  Message m;
  m.src = r.u32();
  m.dst = r.u32();
  m.mid = r.u64();
  m.body = decode_body(static_cast<MsgKind>(kind_byte), r);
  if (r.left != 0) throw std::runtime_error("trailing bytes in frame");
  return m;
}

uint64_t payload_digest(const Message& m) {
  auto bytes = encode(m);
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

uint64_t rot_of(const Message& m) {
  switch (m.kind()) {
    case MsgKind::rot_req: return std::get<RotReqBody>(m.body).rot;
    case MsgKind::rot_fwd: return std::get<RotFwdBody>(m.body).rot;
    case MsgKind::rot_resp: return std::get<RotRespBody>(m.body).rot;
    default: return 0;
  }
}

int32_t vpk_of(const Message& m) {
  if (m.kind() != MsgKind::rot_resp) return -1;
  const auto& b = std::get<RotRespBody>(m.body);
  if (b.snapshot_only) return -1;
  std::map<std::string, int32_t> per_key;
  for (const auto& r : b.returns)
    if (r.present) per_key[r.key]++;
  int32_t mx = 0;
  for (auto& [k, n] : per_key)
    if (n > mx) mx = n;
  return mx;
}

}  // namespace rotkv
