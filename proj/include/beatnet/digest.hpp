#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace beatnet {

// Incremental FNV-1a over bytes. Used to fingerprint file contents and
// parameter snapshots in run manifests.
class Fnv64 {
 public:
  void update(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  uint64_t value() const { return h_; }

 private:
  uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline uint64_t fnv1a64(const void* data, size_t len) {
  Fnv64 f;
  f.update(data, len);
  return f.value();
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

// CRC-32 (reflected, polynomial 0xEDB88320), the zlib flavor. Guards the
// checkpoint container against bit rot.
class Crc32 {
 public:
  void update(const void* data, size_t len) {
    static const std::array<uint32_t, 256> table = make_table();
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) crc_ = table[(crc_ ^ p[i]) & 0xFF] ^ (crc_ >> 8);
  }
  uint32_t value() const { return crc_ ^ 0xFFFFFFFFu; }

 private:
  static std::array<uint32_t, 256> make_table() {
    std::array<uint32_t, 256> t{};
    for (uint32_t n = 0; n < 256; ++n) {
      uint32_t c = n;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[n] = c;
    }
    return t;
  }
  uint32_t crc_ = 0xFFFFFFFFu;
};

inline uint32_t crc32(const void* data, size_t len) {
  Crc32 c;
  c.update(data, len);
  return c.value();
}

// FNV-1a of a file's raw bytes; throws IoError if the file cannot be read.
uint64_t fnv1a64_file(const std::string& path);

// "0x" + 16 lowercase hex digits, the spelling manifests use.
std::string hex64(uint64_t v);

}  // namespace beatnet
