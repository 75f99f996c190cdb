#include "stackcount/util.h"

#include <zlib.h>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

namespace stackcount {

Quat quat_from_mat(const Mat3& m) {
  // Shepperd's method: pick the largest diagonal combination for stability.
  Quat q;
  double tr = m(0, 0) + m(1, 1) + m(2, 2);
  if (tr > 0) {
    double s = std::sqrt(tr + 1.0) * 2;
    q.w = 0.25 * s;
    q.x = (m(2, 1) - m(1, 2)) / s;
    q.y = (m(0, 2) - m(2, 0)) / s;
    q.z = (m(1, 0) - m(0, 1)) / s;
  } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
    double s = std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2)) * 2;
    q.w = (m(2, 1) - m(1, 2)) / s;
    q.x = 0.25 * s;
    q.y = (m(0, 1) + m(1, 0)) / s;
    q.z = (m(0, 2) + m(2, 0)) / s;
  } else if (m(1, 1) > m(2, 2)) {
    double s = std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2)) * 2;
    q.w = (m(0, 2) - m(2, 0)) / s;
    q.x = (m(0, 1) + m(1, 0)) / s;
    q.y = 0.25 * s;
    q.z = (m(1, 2) + m(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1)) * 2;
    q.w = (m(1, 0) - m(0, 1)) / s;
    q.x = (m(0, 2) + m(2, 0)) / s;
    q.y = (m(1, 2) + m(2, 1)) / s;
    q.z = 0.25 * s;
  }
  return q;
}

Mat3 mat_from_quat(const Quat& q) {
  double w = q.w, x = q.x, y = q.y, z = q.z;
  double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (n <= 0) fail(errc::numeric, "zero quaternion");
  w /= n;
  x /= n;
  y /= n;
  z /= n;
  Mat3 m;
  m.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
         2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
  return m;
}

namespace {
int g_default_threads = 1;
}

int default_threads() { return g_default_threads; }
void set_default_threads(int n) { g_default_threads = n < 1 ? 1 : n; }

void parallel_for(int64_t n, int threads, const std::function<void(int64_t, int64_t)>& chunk_fn) {
  if (n <= 0) return;
  if (threads < 1) threads = 1;
  int64_t chunks = std::min<int64_t>(threads, n);
  if (chunks == 1) {
    chunk_fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(size_t(chunks));
  int64_t base = n / chunks, rem = n % chunks;
  int64_t begin = 0;
  for (int64_t c = 0; c < chunks; ++c) {
    int64_t len = base + (c < rem ? 1 : 0);
    int64_t b = begin, e = begin + len;
    begin = e;
    pool.emplace_back([&chunk_fn, b, e] { chunk_fn(b, e); });
  }
  for (auto& t : pool) t.join();
}

uint32_t crc32_bytes(const void* data, size_t n) {
  return uint32_t(::crc32(0L, reinterpret_cast<const Bytef*>(data), uInt(n)));
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_hex64(uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::missing_input, "cannot open file: " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(errc::missing_input, "read failed: " + path);
  return data;
}

void write_file(const std::string& path, std::string_view data) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::generation, "cannot open for writing: " + path);
  out.write(data.data(), std::streamsize(data.size()));
  out.flush();
  if (!out) fail(errc::generation, "write failed: " + path);
}

}  // namespace stackcount
