#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lgvmpc {

inline constexpr int kStateDim = 12;
inline constexpr int kInputDim = 4;

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using Mat3 = Eigen::Matrix3d;

// Index layout of the 12-vector col(xi, eta, xi_dot, eta_dot).
namespace idx {
inline constexpr int kPos = 0;
inline constexpr int kAngle = 3;
inline constexpr int kVel = 6;
inline constexpr int kRate = 9;
inline constexpr int kRoll = 3;
inline constexpr int kPitch = 4;
inline constexpr int kYaw = 5;
}  // namespace idx

enum class FaultKind {
  kConfig,
  kSingularAttitude,
  kInfeasibleHover,
  kNonFinite,
  kUndefinedGradient,
  kDimension,
  kParse,
};

const char* to_string(FaultKind kind);

// splitmix64 finalizer; derives independent per-job seeds from one seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Raised for every contract violation in the library. Callers that need to
// keep a loop alive (sample collection, closed-loop runs) catch it and record
// the kind.
class Fault : public std::runtime_error {
 public:
  Fault(FaultKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  FaultKind kind() const noexcept { return kind_; }

 private:
  FaultKind kind_;
};

}  // namespace lgvmpc
