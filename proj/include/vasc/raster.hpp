/* SPDX-License-Identifier: Apache-2.0 */
#ifndef VASC_RASTER_HPP
#define VASC_RASTER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vasc/domain.hpp"
#include "vasc/tree.hpp"

namespace vasc {

/// Straight vessel piece with linearly interpolated radius.
struct TubeSegment {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double ra = 0.0;
  double rb = 0.0;

  double length() const { return (b - a).norm(); }
  void check() const;
};

/// |x - c(t)|^2 - r(t)^2 at the t in [0, L] minimizing it: negative inside the tube.
double tube_value(const TubeSegment& segment, const Vec3& x);

/// One segment per edge with both ends at the edge radius; zero-length edges are dropped.
std::vector<TubeSegment> tree_segments(const VesselTree& tree);

/// Foreground where some segment's tube value is negative at the voxel centre. Each segment
/// is only evaluated inside its radius-padded bounding box.
VoxelMask rasterize(const std::vector<TubeSegment>& segments, const GridGeometry& grid);
VoxelMask rasterize(const VesselTree& tree, const GridGeometry& grid);
/// Same labels, every segment evaluated at every voxel.
VoxelMask rasterize_exhaustive(const std::vector<TubeSegment>& segments, const GridGeometry& grid);

/// Labels as 0/1 floats, plus Gaussian noise, then a fraction `saltpepper_p` of voxels set
/// to 0 or 1 with equal odds, clamped to [0, 1].
ScalarVolume add_noise(const VoxelMask& label, double gaussian_sigma, double saltpepper_p, std::uint64_t seed);

ScalarVolume to_volume(const VoxelMask& label);

/// Maximum along `axis`. The image is indexed by the remaining axes in increasing order.
Eigen::MatrixXf max_intensity_projection(const ScalarVolume& volume, int axis);

/// ASCII graymap, values in [0, 1] mapped to 0..255; rows of the image are PGM columns.
void write_pgm(const Eigen::MatrixXf& image, const std::string& path);

}  // namespace vasc

#endif  // VASC_RASTER_HPP
