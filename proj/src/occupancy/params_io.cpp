#include <bit>
#include <cmath>
#include <cstring>

#include "stackcount/occupancy.h"

namespace stackcount {
namespace {

static_assert(std::endian::native == std::endian::little,
              "params file I/O assumes a little-endian host");

constexpr char kMagic[4] = {'O', 'C', 'C', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  out.append(b, sizeof(T));
}

template <typename T>
T take(const std::string& in, size_t* off) {
  T v;
  std::memcpy(&v, in.data() + *off, sizeof(T));
  *off += sizeof(T);
  return v;
}

}  // namespace

void save_regressor(const std::string& path, const RegressorParams& p) {
  if (!p.finite()) fail(errc::numeric, "refusing to save non-finite parameters");
  std::string out;
  out.append(kMagic, 4);
  put(out, kVersion);
  put(out, regressor_arch_hash());
  put(out, p.seed);
  put(out, uint64_t(p.param_count()));
  for (auto [ptr, n] : p.spans()) out.append(reinterpret_cast<const char*>(ptr), n * sizeof(float));
  put(out, crc32_bytes(out.data(), out.size()));
  write_file(path, out);
}

RegressorParams load_regressor(const std::string& path) {
  std::string in = read_file(path);
  RegressorParams p = RegressorParams::zeros();
  size_t count = p.param_count();
  size_t expect = 4 + 4 + 8 + 8 + 8 + count * sizeof(float) + 4;
  if (in.size() < 8 || std::memcmp(in.data(), kMagic, 4) != 0)
    fail(errc::config, "not a regressor params file: " + path);
  if (in.size() != expect) fail(errc::config, "truncated regressor params file: " + path);

  uint32_t stored_crc;
  std::memcpy(&stored_crc, in.data() + in.size() - 4, 4);
  if (stored_crc != crc32_bytes(in.data(), in.size() - 4))
    fail(errc::config, "regressor params file failed its checksum: " + path);

  size_t off = 4;
  if (take<uint32_t>(in, &off) != kVersion)
    fail(errc::config, "unsupported regressor params version: " + path);
  if (take<uint64_t>(in, &off) != regressor_arch_hash())
    fail(errc::config, "regressor params architecture mismatch: " + path);
  p.seed = take<uint64_t>(in, &off);
  if (take<uint64_t>(in, &off) != count)
    fail(errc::config, "regressor params count mismatch: " + path);
  for (auto [ptr, n] : p.spans()) {
    std::memcpy(ptr, in.data() + off, n * sizeof(float));
    off += n * sizeof(float);
  }
  if (!p.finite()) fail(errc::numeric, "regressor params not finite: " + path);
  return p;
}

}  // namespace stackcount
