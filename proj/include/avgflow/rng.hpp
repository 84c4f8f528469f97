#ifndef AVGFLOW_RNG_HPP
#define AVGFLOW_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace avgflow {

inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

// Seeded generator with named sub-streams. All runtime randomness is derived
// from one run seed; sub-streams let stages draw independently without
// consuming each other's state. Uniform and normal draws are implemented
// directly on top of mt19937_64 so sequences do not depend on the standard
// library's unspecified distribution algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix(seed)) {}

  Rng(std::uint64_t seed, std::string_view stream)
      : engine_(mix(seed ^ fnv1a64(stream))) {}

  Rng(std::uint64_t seed, std::string_view stream, std::uint64_t a, std::uint64_t b = 0)
      : engine_(mix(seed ^ fnv1a64(stream) ^ (a * 0x9e3779b97f4a7c15ull) ^
                    (b * 0xbf58476d1ce4e5b9ull))) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  // Standard normal via Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::MatrixX3d normal_coords(int n) {
    Eigen::MatrixX3d out(n, 3);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < 3; ++c) out(i, c) = normal();
    return out;
  }

  // Haar-uniform rotation from a normalized Gaussian quaternion.
  Eigen::Matrix3d rotation() {
    double q[4];
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (double& qi : q) {
        qi = normal();
        n2 += qi * qi;
      }
    } while (n2 < 1e-12);
    const double inv = 1.0 / std::sqrt(n2);
    const double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
  }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer; decorrelates nearby seeds.
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace avgflow

#endif
