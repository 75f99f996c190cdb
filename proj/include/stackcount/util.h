#pragma once
// Small foundation layer: 3D math, deterministic RNG, errors, parallel_for,
// hashing and number formatting. Everything here is kept dependency-free and
// bit-reproducible across runs and thread counts.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stackcount {

// ---------------------------------------------------------------------------
// Errors. Each kind maps onto a process exit code at the CLI boundary.

enum class errc {
  config = 2,         // invalid configuration, arguments or malformed inputs
  generation = 3,     // scene/dataset generation failure
  missing_input = 4,  // required file or data absent
  numeric = 5,        // numeric failure: degenerate geometry, non-convergence
};

class error : public std::runtime_error {
 public:
  error(errc kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  errc kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  errc kind_;
};

[[noreturn]] inline void fail(errc kind, const std::string& msg) { throw error(kind, msg); }

// ---------------------------------------------------------------------------
// Vectors and matrices (double precision, row-major 3x3).

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) {
  double n = norm(v);
  return n > 0 ? v / n : Vec3{0, 0, 0};
}
inline Vec3 vmin(const Vec3& a, const Vec3& b) {
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
inline Vec3 vmax(const Vec3& a, const Vec3& b) {
  return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

struct Mat3 {
  // Row-major: m[3*r + c].
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return {}; }
  static Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
    Mat3 a;
    a.m = {r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z};
    return a;
  }
  static Mat3 rot_x(double a) {
    double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r.m = {1, 0, 0, 0, c, -s, 0, s, c};
    return r;
  }
  static Mat3 rot_y(double a) {
    double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r.m = {c, 0, s, 0, 1, 0, -s, 0, c};
    return r;
  }
  static Mat3 rot_z(double a) {
    double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
    return r;
  }

  double operator()(int r, int c) const { return m[3 * r + c]; }
  double& operator()(int r, int c) { return m[3 * r + c]; }

  Vec3 row(int r) const { return {m[3 * r], m[3 * r + 1], m[3 * r + 2]}; }
  Vec3 col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += m[3 * i + k] * o.m[3 * k + j];
        r.m[3 * i + j] = s;
      }
    return r;
  }
  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[3 * i + j] = m[3 * j + i];
    return r;
  }
  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
};

// Rigid transform p -> R*p + t.
struct Rigid {
  Mat3 R;
  Vec3 t;

  Vec3 apply(const Vec3& p) const { return R * p + t; }
  Rigid then(const Rigid& outer) const {  // outer ∘ this
    return {outer.R * R, outer.R * t + outer.t};
  }
  Rigid inverse() const {
    Mat3 rt = R.transposed();
    return {rt, -(rt * t)};
  }
  static Rigid identity() { return {Mat3::identity(), {0, 0, 0}}; }
  static Rigid translate(const Vec3& t) { return {Mat3::identity(), t}; }
};

struct Quat {
  double w = 1, x = 0, y = 0, z = 0;
};

Quat quat_from_mat(const Mat3& m);
Mat3 mat_from_quat(const Quat& q);

struct AABB {
  Vec3 lo{1e300, 1e300, 1e300};
  Vec3 hi{-1e300, -1e300, -1e300};

  bool valid() const { return lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z; }
  void expand(const Vec3& p) {
    lo = vmin(lo, p);
    hi = vmax(hi, p);
  }
  void merge(const AABB& o) {
    lo = vmin(lo, o.lo);
    hi = vmax(hi, o.hi);
  }
  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return (lo + hi) * 0.5; }
  double diagonal() const { return valid() ? norm(hi - lo) : 0.0; }
  AABB intersect(const AABB& o) const {
    AABB r;
    r.lo = vmax(lo, o.lo);
    r.hi = vmin(hi, o.hi);
    return r;
  }
};

// ---------------------------------------------------------------------------
// Deterministic RNG: xoshiro256** seeded through splitmix64. The standard
// <random> distributions are implementation-defined, so every draw used for
// data generation goes through this class.

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  // Derives an independent stream for item `index` of a run seeded with
  // `master`; used so scene i is reproducible regardless of thread count.
  static uint64_t stream(uint64_t master, uint64_t index) {
    uint64_t sm = master ^ (0x9E3779B97F4A7C15ull * (index + 1));
    return splitmix64(sm);
  }

  uint64_t u64() {
    uint64_t r = rotl(s_[1] * 5, 7) * 9;
    uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return r;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return double(u64() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Unbiased integer in [0, n) (Lemire with rejection).
  uint64_t below(uint64_t n) {
    if (n == 0) fail(errc::numeric, "Rng::below(0)");
    uint64_t x = u64();
    __uint128_t m = (__uint128_t)x * n;
    uint64_t l = (uint64_t)m;
    if (l < n) {
      uint64_t t = (0 - n) % n;
      while (l < t) {
        x = u64();
        m = (__uint128_t)x * n;
        l = (uint64_t)m;
      }
    }
    return (uint64_t)(m >> 64);
  }
  int below_int(int n) { return int(below(uint64_t(n))); }

  // Standard normal via Box-Muller; caches the second deviate so the draw
  // count is deterministic.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<uint64_t, 4> s_{};
  double spare_ = 0;
  bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Deterministic parallelism: splits [0, n) into at most `threads` contiguous
// chunks. Chunk boundaries depend only on (n, threads); callers must write to
// disjoint outputs. threads <= 1 runs inline.

void parallel_for(int64_t n, int threads, const std::function<void(int64_t, int64_t)>& chunk_fn);

// Global default thread count (set from CLI/config; defaults to 1).
int default_threads();
void set_default_threads(int n);

// ---------------------------------------------------------------------------
// Hashing / formatting / file helpers.

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

uint32_t crc32_bytes(const void* data, size_t n);

// Shortest round-trip decimal representation of a double (deterministic).
std::string format_double(double v);
std::string format_hex64(uint64_t v);

std::string read_file(const std::string& path);          // throws missing_input
void write_file(const std::string& path, std::string_view data);  // throws generation

}  // namespace stackcount
