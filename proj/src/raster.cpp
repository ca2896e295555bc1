/* SPDX-License-Identifier: Apache-2.0 */
#include "vasc/raster.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vasc/text.hpp"

namespace vasc {

void TubeSegment::check() const {
  if (!a.allFinite() || !b.allFinite()) throw Error("tube segment endpoints must be finite");
  if (!(length() > 0.0)) throw Error("tube segment must have positive length");
  if (!(ra > 0.0) || !(rb > 0.0)) throw Error("tube segment radii must be > 0");
}

double tube_value(const TubeSegment& s, const Vec3& x) {
  const Vec3 axis = s.b - s.a;
  const double len = axis.norm();
  auto value_at = [&](double tau) {
    const double t = len > 0.0 ? tau / len : 0.0;
    const Vec3 c = s.a + t * axis;
    const double r = s.ra + t * (s.rb - s.ra);
    return (x - c).squaredNorm() - r * r;
  };
  if (!(len > 0.0)) return value_at(0.0);
  const Vec3 u = axis / len;
  const double k = (s.rb - s.ra) / len;
  // Stationary point of the quadratic in tau; it is a minimum only when |k| < 1, otherwise
  // the minimum over [0, L] sits on an end.
  if (std::abs(k) < 1.0) {
    const double tau = std::clamp(((x - s.a).dot(u) + k * s.ra) / (1.0 - k * k), 0.0, len);
    return value_at(tau);
  }
  return std::min(value_at(0.0), value_at(len));
}

std::vector<TubeSegment> tree_segments(const VesselTree& tree) {
  std::vector<TubeSegment> out;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const Node& n = tree.node(static_cast<NodeId>(i));
    if (!n.alive || n.parent == kNoNode) continue;
    TubeSegment s{tree.node(n.parent).position, n.position, n.radius, n.radius};
    if (s.length() > 0.0) out.push_back(s);
  }
  return out;
}

namespace {

void label_range(const TubeSegment& s, const GridGeometry& g, const Index3& lo, const Index3& hi,
                 std::vector<std::uint8_t>& data) {
  for (int k = lo.z(); k <= hi.z(); ++k)
    for (int j = lo.y(); j <= hi.y(); ++j)
      for (int i = lo.x(); i <= hi.x(); ++i) {
        const std::size_t o = g.offset(i, j, k);
        if (!data[o] && tube_value(s, g.center(i, j, k)) < 0.0) data[o] = 1;
      }
}

}  // namespace

VoxelMask rasterize(const std::vector<TubeSegment>& segments, const GridGeometry& grid) {
  grid.check();
  VoxelMask mask(grid);
  for (const auto& s : segments) {
    s.check();
    const double r = std::max(s.ra, s.rb);
    const Vec3 bmin = s.a.cwiseMin(s.b) - Vec3::Constant(r);
    const Vec3 bmax = s.a.cwiseMax(s.b) + Vec3::Constant(r);
    Index3 lo, hi;
    bool empty = false;
    for (int ax = 0; ax < 3; ++ax) {
      // Voxel centres inside the box, widened by one voxel against round-off.
      const double fl = (bmin[ax] - grid.origin[ax]) / grid.spacing - 0.5;
      const double fh = (bmax[ax] - grid.origin[ax]) / grid.spacing - 0.5;
      const double l = std::max(std::ceil(fl) - 1.0, 0.0);
      const double h = std::min(std::floor(fh) + 1.0, static_cast<double>(grid.dims[ax] - 1));
      if (l > h) {
        empty = true;
        break;
      }
      lo[ax] = static_cast<int>(l);
      hi[ax] = static_cast<int>(h);
    }
    if (!empty) label_range(s, grid, lo, hi, mask.data());
  }
  return mask;
}

VoxelMask rasterize(const VesselTree& tree, const GridGeometry& grid) {
  return rasterize(tree_segments(tree), grid);
}

VoxelMask rasterize_exhaustive(const std::vector<TubeSegment>& segments, const GridGeometry& grid) {
  grid.check();
  VoxelMask mask(grid);
  for (const auto& s : segments) {
    s.check();
    label_range(s, grid, Index3::Zero(), grid.dims - Index3::Ones(), mask.data());
  }
  return mask;
}

ScalarVolume to_volume(const VoxelMask& label) {
  ScalarVolume v{label.grid(), std::vector<float>(label.data().size())};
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = label.data()[i] ? 1.0f : 0.0f;
  return v;
}

ScalarVolume add_noise(const VoxelMask& label, double gaussian_sigma, double saltpepper_p, std::uint64_t seed) {
  if (!(gaussian_sigma >= 0.0)) throw Error("noise sigma must be >= 0");
  if (!(saltpepper_p >= 0.0 && saltpepper_p <= 1.0)) throw Error("salt-and-pepper fraction must be in [0, 1]");
  ScalarVolume v = to_volume(label);
  if (gaussian_sigma == 0.0 && saltpepper_p == 0.0) return v;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, gaussian_sigma > 0.0 ? gaussian_sigma : 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (float& x : v.data) {
    double val = x;
    if (gaussian_sigma > 0.0) val += gauss(rng);
    if (saltpepper_p > 0.0 && unif(rng) < saltpepper_p) val = unif(rng) < 0.5 ? 0.0 : 1.0;
    x = static_cast<float>(std::clamp(val, 0.0, 1.0));
  }
  return v;
}

Eigen::MatrixXf max_intensity_projection(const ScalarVolume& volume, int axis) {
  if (axis < 0 || axis > 2) throw Error("projection axis must be 0, 1 or 2");
  const GridGeometry& g = volume.grid;
  if (volume.data.size() != g.voxel_count()) throw Error("volume payload does not match its grid");
  const int a = axis == 0 ? 1 : 0;
  const int b = axis == 2 ? 1 : 2;
  Eigen::MatrixXf img = Eigen::MatrixXf::Constant(g.dims[a], g.dims[b], -std::numeric_limits<float>::infinity());
  for (int k = 0; k < g.dims.z(); ++k)
    for (int j = 0; j < g.dims.y(); ++j)
      for (int i = 0; i < g.dims.x(); ++i) {
        const Index3 idx(i, j, k);
        float& px = img(idx[a], idx[b]);
        px = std::max(px, volume.data[g.offset(i, j, k)]);
      }
  return img;
}

void write_pgm(const Eigen::MatrixXf& image, const std::string& path) {
  auto os = text::open_output(path);
  os << "P2\n" << image.rows() << ' ' << image.cols() << "\n255\n";
  for (Eigen::Index c = 0; c < image.cols(); ++c) {
    for (Eigen::Index r = 0; r < image.rows(); ++r) {
      const float v = std::clamp(image(r, c), 0.0f, 1.0f);
      os << (r ? " " : "") << static_cast<int>(std::lround(v * 255.0f));
    }
    os << '\n';
  }
  if (!os) throw Error("failed writing '" + path + "'");
}

}  // namespace vasc
