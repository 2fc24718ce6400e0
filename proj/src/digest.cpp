#include "beatnet/digest.hpp"

#include <cstdio>
#include <fstream>

#include "beatnet/errors.hpp"

namespace beatnet {

uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for hashing");
  Fnv64 h;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    h.update(buf, static_cast<size_t>(f.gcount()));
  }
  return h.value();
}

std::string hex64(uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace beatnet
