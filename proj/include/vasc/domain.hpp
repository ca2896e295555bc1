/* SPDX-License-Identifier: Apache-2.0 */
#ifndef VASC_DOMAIN_HPP
#define VASC_DOMAIN_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vasc/common.hpp"

namespace vasc {

/// Isotropic voxel grid. Voxel (i,j,k) has its center at origin + (index + 0.5) * spacing.
struct GridGeometry {
  Index3 dims{1, 1, 1};
  double spacing = 1.0;  // um
  Vec3 origin = Vec3::Zero();

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims.x()) * dims.y() * dims.z();
  }
  /// Linear offset, x fastest.
  std::size_t offset(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims.y() + j) * dims.x() + i;
  }
  bool contains(const Index3& idx) const {
    return (idx.array() >= 0).all() && (idx.array() < dims.array()).all();
  }
  Vec3 center(int i, int j, int k) const {
    return origin + (Vec3(i, j, k).array() + 0.5).matrix() * spacing;
  }
  /// Index of the voxel containing `p`; nullopt when outside the grid.
  std::optional<Index3> locate(const Vec3& p) const;
  double voxel_volume() const { return spacing * spacing * spacing; }

  void check() const;
  bool operator==(const GridGeometry& o) const {
    return dims == o.dims && spacing == o.spacing && origin == o.origin;
  }
};

/// Dense binary occupancy grid.
class VoxelMask {
 public:
  VoxelMask() = default;
  explicit VoxelMask(const GridGeometry& grid);

  const GridGeometry& grid() const { return grid_; }
  bool at(int i, int j, int k) const { return data_[grid_.offset(i, j, k)] != 0; }
  void set(int i, int j, int k, bool v) { data_[grid_.offset(i, j, k)] = v ? 1 : 0; }
  bool contains_point(const Vec3& p) const;

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  double volume() const { return static_cast<double>(count()) * grid_.voxel_volume(); }

  std::vector<std::uint8_t>& data() { return data_; }
  const std::vector<std::uint8_t>& data() const { return data_; }

  bool operator==(const VoxelMask& o) const { return grid_ == o.grid_ && data_ == o.data_; }

 private:
  GridGeometry grid_;
  std::vector<std::uint8_t> data_;
};

/// Per-voxel Euclidean distance (um) to the nearest background voxel. Voxels outside
/// the grid count as background.
struct DistanceField {
  GridGeometry grid;
  std::vector<double> data;

  double at(int i, int j, int k) const { return data[grid.offset(i, j, k)]; }
  /// Value of the voxel containing `p`; throws when `p` is outside the grid.
  double sample(const Vec3& p) const;
};

struct CortexParams {
  double erosion_radius = 2000.0;    // R1, um
  double exclusion_radius = 5650.0;  // R2, um
  Vec3 root_position = Vec3::Zero();
};

/// Phantom outline: an ellipsoid minus a second ellipsoid pushed into its +x face.
/// Semi-axes are fractions of the half-extent of the grid along each axis.
struct ShapeParams {
  Vec3 semi_axes{0.55, 0.75, 0.9};
  /// Carve semi-axes as fractions of the main semi-axes.
  Vec3 carve_semi_axes{0.5, 0.3, 0.35};
  /// Penetration depth of the carve as a fraction of the x semi-axis; 0 gives a plain ellipsoid.
  double carve_depth = 0.35;
  /// Relative amplitude of the random low-frequency surface undulation.
  double jitter = 0.03;

  static ShapeParams kidney() { return {}; }
  static ShapeParams sphere(double radius_fraction = 0.9) {
    ShapeParams s;
    s.semi_axes = Vec3::Constant(radius_fraction);
    s.carve_depth = 0.0;
    s.jitter = 0.0;
    return s;
  }
};

struct Phantom {
  VoxelMask mask;
  /// Canonical root (hilum) position on the concave face, one voxel inside the mask.
  Vec3 root = Vec3::Zero();
};

Phantom generate_phantom(const Index3& dims, double spacing, const ShapeParams& shape,
                         std::uint64_t seed);

VoxelMask erode(const VoxelMask& mask, double radius);
VoxelMask extract_cortex(const VoxelMask& whole, const CortexParams& params);
DistanceField distance_transform(const VoxelMask& mask);

/// Squared distance in voxel units to the nearest background voxel (exact integers).
std::vector<double> squared_distance_voxels(const VoxelMask& mask);

/// Largest 6-connected foreground component; ties go to the component met first in scan order.
VoxelMask largest_component(const VoxelMask& mask);

// File format: text header `dims X Y Z`, `spacing S`, `origin OX OY OZ`, a blank line,
// then the raw payload with x fastest.
void write_mask(const VoxelMask& mask, const std::string& path);
VoxelMask read_mask(const std::string& path);

struct ScalarVolume {
  GridGeometry grid;
  std::vector<float> data;
};

/// Same header as masks, float32 little-endian payload.
void write_volume(const ScalarVolume& volume, const std::string& path);
ScalarVolume read_volume(const std::string& path);

}  // namespace vasc

#endif  // VASC_DOMAIN_HPP
