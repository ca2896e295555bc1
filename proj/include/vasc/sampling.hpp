/* SPDX-License-Identifier: Apache-2.0 */
#ifndef VASC_SAMPLING_HPP
#define VASC_SAMPLING_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vasc/domain.hpp"

namespace vasc {

struct SamplingConfig {
  int n_terminals = 30000;
  /// Explicit minimum distance (um); when empty it is derived from the cortex volume.
  std::optional<double> r_min;
  /// Calibration constant k in r_min = k * (V / n)^(1/3).
  double r_min_scale = 1.0;
  double r0_mean = 10.08;  // um
  double r0_std = 0.14;    // um
  std::uint64_t seed = 0;

  void check() const;
};

struct TerminalSet {
  std::vector<Vec3> positions;
  std::vector<double> radii;

  std::size_t size() const { return positions.size(); }
};

/// k * (V / n)^(1/3) with V the cortex volume in um^3.
double min_distance_for_count(const VoxelMask& cortex, int n, double scale = 1.0);

struct PoissonSample {
  std::vector<Vec3> points;
  /// Set when fewer than half of the requested points could be placed.
  bool below_half_target = false;
};

/// Bridson dart throwing over the cortex bounding box, filtered to cortex voxels, with
/// a final pass that fills any cortex voxel farther than 2 r_min from every sample.
/// Over-generation is truncated uniformly at random.
PoissonSample poisson_disk_sample(const VoxelMask& cortex, double r_min, int n_target,
                                  std::uint64_t seed);

/// Independent N(mean, std) draws, redrawn while nonpositive.
std::vector<double> sample_terminal_radii(std::size_t n, double mean, double std_dev,
                                          std::uint64_t seed);

struct TerminalSample {
  TerminalSet terminals;
  double r_min = 0.0;
  bool below_half_target = false;
};

/// Positions use stream 0 of `config.seed`, radii stream 1.
TerminalSample sample_terminals(const VoxelMask& cortex, const SamplingConfig& config);

/// CSV with header `x,y,z,radius`, um.
void write_terminals(const TerminalSet& terminals, const std::string& path);
TerminalSet read_terminals(const std::string& path);

}  // namespace vasc

#endif  // VASC_SAMPLING_HPP
