#pragma once

// Seeded random stream with platform-independent output. The engine
// (mt19937_64) has a sequence fixed by the C++ standard; the uniform and
// normal transforms are written out here because the standard library
// distributions are implementation-defined.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace mirrorspoof {

class SeededRng {
 public:
  static constexpr std::string_view kIdentity = "mt19937_64+box-muller";

  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mirrorspoof
