// balcons: small shared types and helpers used across the library.

#ifndef BALCONS_CORE_HPP
#define BALCONS_CORE_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace balcons {

using Vec3 = std::array<double, 3>;
using Vec4 = std::array<double, 4>;
using Vec5 = std::array<double, 5>;
using Mat4 = std::array<std::array<double, 4>, 4>;
using Mat5 = std::array<std::array<double, 5>, 5>;

// Error taxonomy kept deliberately small; the C API maps kinds to codes.
enum class ErrorKind {
  Parse,
  Domain,
  Invalid,
  SingularMap,
  Solver,
  Io,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

// Deterministic 64-bit generator (splitmix64).  All sampled test points and
// report seeds go through this so every platform reproduces identical runs.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
  std::uint64_t state_;
};

Mat4 mat4_identity();
Mat5 mat5_identity();
Mat4 mat4_inverse(const Mat4& m);       // throws SingularMap on singular input
Mat5 mat5_inverse(const Mat5& m);
Vec4 mat4_apply(const Mat4& m, const Vec4& v);
Vec5 mat5_apply(const Mat5& m, const Vec5& v);
double mat4_det(const Mat4& m);

}  // namespace balcons

#endif
