/* SPDX-License-Identifier: Apache-2.0 */
#ifndef VASC_COMMON_HPP
#define VASC_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace vasc {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

using Vec3 = Vector3<double>;
using Index3 = Eigen::Vector3i;

/// Raised for invalid inputs or states that make an operation meaningless.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed configuration or command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Internal unit system: length in um, force in N, time in s.
namespace units {
inline constexpr double kPi = 3.14159265358979323846;
/// 1 mmHg expressed in N/um^2 (133.322 Pa, 1 Pa = 1e-12 N/um^2).
inline constexpr double kMmHg = 1.33322e-10;
/// 1 ml/min expressed in um^3/s.
inline constexpr double kMlPerMin = 1e12 / 60.0;
/// 1 mm^2 expressed in um^2.
inline constexpr double kMm2 = 1e6;

inline constexpr double mmhg_to_internal(double mmhg) { return mmhg * kMmHg; }
inline constexpr double internal_to_mmhg(double p) { return p / kMmHg; }
inline constexpr double ml_per_min_to_internal(double q) { return q * kMlPerMin; }
}  // namespace units

/// Expands a top-level seed into an independent stream seed (splitmix64 of seed + stream).
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + stream * 0x9E3779B97F4A7C15ULL + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace vasc

#endif  // VASC_COMMON_HPP
