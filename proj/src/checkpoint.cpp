#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "beatnet/digest.hpp"
#include "beatnet/errors.hpp"
#include "beatnet/model.hpp"

// Checkpoint container, little-endian throughout:
//
//   8   magic "BNETCKPT"
//   u32 container version (1)
//   u32 model kind
//   8 x i32 architecture fields (NetConfig in declaration order)
//   u64 architecture fingerprint
//   u64 iterations, u64 seed
//   u32 tensor count, then per tensor:
//       u32 name length, name bytes,
//       u32 ndim, i32 dims..., u64 payload bytes, f32 payload
//   u32 CRC-32 of everything above
//
// A Mi checkpoint stores the backbone tensors first, then the six head
// tensors, under the backbone's architecture fields.

namespace beatnet {

namespace {

constexpr char kMagic[8] = {'B', 'N', 'E', 'T', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
  char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
               static_cast<char>(v >> 24)};
  buf.append(b, 4);
}

void put_i32(std::string& buf, int32_t v) { put_u32(buf, static_cast<uint32_t>(v)); }

void put_u64(std::string& buf, uint64_t v) {
  put_u32(buf, static_cast<uint32_t>(v));
  put_u32(buf, static_cast<uint32_t>(v >> 32));
}

void put_config(std::string& buf, const NetConfig& cfg) {
  put_i32(buf, cfg.input_length);
  put_i32(buf, cfg.channels);
  put_i32(buf, cfg.kernel);
  put_i32(buf, cfg.residual_blocks);
  put_i32(buf, cfg.pool_size);
  put_i32(buf, cfg.pool_stride);
  put_i32(buf, cfg.fc_width);
  put_i32(buf, cfg.n_classes);
}

void put_tensors(std::string& buf, const std::vector<NamedParam>& params) {
  for (const NamedParam& p : params) {
    put_u32(buf, static_cast<uint32_t>(p.name.size()));
    buf.append(p.name);
    put_u32(buf, static_cast<uint32_t>(p.tensor.rank()));
    for (int d = 0; d < p.tensor.rank(); ++d) put_i32(buf, p.tensor.dim(d));
    const size_t bytes = p.tensor.numel() * sizeof(float);
    put_u64(buf, bytes);
    buf.append(reinterpret_cast<const char*>(p.tensor.data()), bytes);
  }
}

void write_file(const std::string& path, ModelKind kind, const NetConfig& cfg,
                const CheckpointMeta& meta,
                const std::vector<const std::vector<NamedParam>*>& groups) {
  std::string buf;
  buf.append(kMagic, 8);
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<uint32_t>(kind));
  put_config(buf, cfg);
  put_u64(buf, cfg.fingerprint());
  put_u64(buf, meta.iterations);
  put_u64(buf, meta.seed);
  size_t count = 0;
  for (const auto* g : groups) count += g->size();
  put_u32(buf, static_cast<uint32_t>(count));
  for (const auto* g : groups) put_tensors(buf, *g);
  put_u32(buf, crc32(buf.data(), buf.size()));

  // Write-then-rename so a crash never leaves a half-written checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + tmp + "' for writing");
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw IoError("short write to '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

struct Cursor {
  const uint8_t* p;
  size_t n;
  size_t off = 0;

  void need(size_t k) const {
    if (off + k > n)
      throw CheckpointError(CheckpointError::Kind::Truncated,
                            "checkpoint truncated: need " + std::to_string(k) +
                                " bytes at offset " + std::to_string(off) + ", file has " +
                                std::to_string(n));
  }
  uint32_t u32() {
    need(4);
    uint32_t v = static_cast<uint32_t>(p[off]) | static_cast<uint32_t>(p[off + 1]) << 8 |
                 static_cast<uint32_t>(p[off + 2]) << 16 |
                 static_cast<uint32_t>(p[off + 3]) << 24;
    off += 4;
    return v;
  }
  int32_t i32() { return static_cast<int32_t>(u32()); }
  uint64_t u64() {
    const uint64_t lo = u32();
    return lo | static_cast<uint64_t>(u32()) << 32;
  }
  std::string str(size_t k) {
    need(k);
    std::string s(reinterpret_cast<const char*>(p + off), k);
    off += k;
    return s;
  }
  const uint8_t* raw(size_t k) {
    need(k);
    const uint8_t* at = p + off;
    off += k;
    return at;
  }
};

struct StoredTensor {
  std::string name;
  std::vector<int> dims;
  const uint8_t* payload;
  size_t payload_bytes;
};

struct Parsed {
  std::vector<uint8_t> bytes;  // owns what the tensors point into
  ModelKind kind;
  NetConfig cfg;
  CheckpointMeta meta;
  std::vector<StoredTensor> tensors;
};

void bad(const std::string& msg) {
  throw CheckpointError(CheckpointError::Kind::BadValue, msg);
}

Parsed parse_checkpoint(const std::string& path) {
  Parsed out;
  {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    out.bytes.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  }
  const std::vector<uint8_t>& bytes = out.bytes;
  if (bytes.size() < sizeof(kMagic))
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          "file is shorter than the checkpoint magic");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(CheckpointError::Kind::BadMagic,
                          "'" + path + "' is not a checkpoint (bad magic)");

  Cursor c{bytes.data(), bytes.size(), sizeof(kMagic)};
  const uint32_t version = c.u32();
  if (version != kVersion)
    bad("unsupported checkpoint version " + std::to_string(version));
  const uint32_t kind = c.u32();
  if (kind > static_cast<uint32_t>(ModelKind::MiTransfer))
    bad("unknown model kind " + std::to_string(kind));
  out.kind = static_cast<ModelKind>(kind);

  out.cfg.input_length = c.i32();
  out.cfg.channels = c.i32();
  out.cfg.kernel = c.i32();
  out.cfg.residual_blocks = c.i32();
  out.cfg.pool_size = c.i32();
  out.cfg.pool_stride = c.i32();
  out.cfg.fc_width = c.i32();
  out.cfg.n_classes = c.i32();
  const uint64_t fp = c.u64();
  if (fp != out.cfg.fingerprint())
    bad("stored fingerprint does not match the stored architecture fields");

  out.meta.iterations = c.u64();
  out.meta.seed = c.u64();

  const uint32_t count = c.u32();
  if (count > 100000) bad("implausible tensor count " + std::to_string(count));
  out.tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    StoredTensor t;
    const uint32_t name_len = c.u32();
    if (name_len > 4096) bad("implausible tensor name length");
    t.name = c.str(name_len);
    const uint32_t ndim = c.u32();
    if (ndim > 8) bad("tensor '" + t.name + "' has " + std::to_string(ndim) + " dimensions");
    size_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      const int32_t dim = c.i32();
      if (dim <= 0) bad("tensor '" + t.name + "' has a non-positive dimension");
      t.dims.push_back(dim);
      numel *= static_cast<size_t>(dim);
    }
    t.payload_bytes = c.u64();
    if (t.payload_bytes != numel * sizeof(float))
      bad("tensor '" + t.name + "' payload size disagrees with its shape");
    t.payload = c.raw(t.payload_bytes);
    out.tensors.push_back(std::move(t));
  }

  if (c.off + 4 != bytes.size()) {
    if (c.off + 4 > bytes.size())
      throw CheckpointError(CheckpointError::Kind::Truncated,
                            "checkpoint ends before its CRC");
    bad("checkpoint has trailing bytes after its CRC");
  }
  const uint32_t stored_crc = c.u32();
  if (crc32(bytes.data(), bytes.size() - 4) != stored_crc)
    throw CheckpointError(CheckpointError::Kind::ChecksumMismatch,
                          "checkpoint CRC mismatch: the file is damaged");
  return out;
}

// Strict positional match: same tensor names, same shapes, fresh values.
void fill_params(std::vector<NamedParam>& params, const std::vector<StoredTensor>& stored,
                 size_t offset) {
  for (size_t i = 0; i < params.size(); ++i) {
    const StoredTensor& t = stored[offset + i];
    NamedParam& p = params[i];
    if (t.name != p.name)
      bad("tensor " + std::to_string(offset + i) + " is '" + t.name + "', expected '" +
          p.name + "'");
    if (t.dims != p.tensor.shape())
      bad("tensor '" + t.name + "' shape does not match the architecture");
    std::memcpy(p.tensor.data(), t.payload, t.payload_bytes);
  }
}

void check_expected(const Parsed& ps, const std::optional<NetConfig>& expected) {
  if (expected && !(*expected == ps.cfg))
    throw CheckpointError(CheckpointError::Kind::FingerprintMismatch,
                          "architecture fingerprint " + hex64(ps.cfg.fingerprint()) +
                              " does not match expected " + hex64(expected->fingerprint()));
}

}  // namespace

void save_checkpoint(const std::string& path, const ArrhythmiaNet& net,
                     const CheckpointMeta& meta) {
  write_file(path, ModelKind::Arrhythmia, net.config(), meta, {&net.params()});
}

void save_checkpoint(const std::string& path, const MiNet& net, const CheckpointMeta& meta) {
  write_file(path, ModelKind::MiTransfer, net.config(), meta,
             {&net.backbone().params(), &net.head_params()});
}

ModelKind peek_checkpoint_kind(const std::string& path) {
  return parse_checkpoint(path).kind;
}

ArrhythmiaNet load_arrhythmia(const std::string& path, CheckpointMeta* meta,
                              const std::optional<NetConfig>& expected) {
  Parsed ps = parse_checkpoint(path);
  if (ps.kind != ModelKind::Arrhythmia)
    bad("'" + path + "' holds a transfer model, not an arrhythmia classifier");
  check_expected(ps, expected);
  ArrhythmiaNet net(ps.cfg);
  if (ps.tensors.size() != net.params().size())
    bad("checkpoint has " + std::to_string(ps.tensors.size()) + " tensors, architecture wants " +
        std::to_string(net.params().size()));
  fill_params(net.params(), ps.tensors, 0);
  if (meta) *meta = ps.meta;
  return net;
}

MiNet load_mi(const std::string& path, CheckpointMeta* meta,
              const std::optional<NetConfig>& expected) {
  Parsed ps = parse_checkpoint(path);
  if (ps.kind != ModelKind::MiTransfer)
    bad("'" + path + "' holds an arrhythmia classifier, not a transfer model");
  check_expected(ps, expected);
  ArrhythmiaNet backbone(ps.cfg);
  MiNet net(std::move(backbone));
  const size_t nb = net.backbone().params().size();
  if (ps.tensors.size() != nb + net.head_params().size())
    bad("checkpoint tensor count does not match a transfer model");
  // The backbone registry aliases the tensors inside the net, so this fills
  // them in place.
  std::vector<NamedParam> backbone_params = net.backbone().params();
  fill_params(backbone_params, ps.tensors, 0);
  fill_params(net.head_params(), ps.tensors, nb);
  if (meta) *meta = ps.meta;
  return net;
}

ArrhythmiaNet load_backbone(const std::string& path, CheckpointMeta* meta) {
  Parsed ps = parse_checkpoint(path);
  ArrhythmiaNet net(ps.cfg);
  if (ps.tensors.size() < net.params().size())
    bad("checkpoint does not hold a full conv stack");
  fill_params(net.params(), ps.tensors, 0);
  if (meta) *meta = ps.meta;
  return net;
}

}  // namespace beatnet
