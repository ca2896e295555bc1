/* SPDX-License-Identifier: Apache-2.0 */
#include "vasc/domain.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace vasc {

// ---------------------------------------------------------------- geometry

std::optional<Index3> GridGeometry::locate(const Vec3& p) const {
  const Vec3 rel = (p - origin) / spacing;
  if (!rel.allFinite()) return std::nullopt;
  Index3 idx(static_cast<int>(std::floor(rel.x())), static_cast<int>(std::floor(rel.y())),
             static_cast<int>(std::floor(rel.z())));
  if (!contains(idx)) return std::nullopt;
  return idx;
}

void GridGeometry::check() const {
  if ((dims.array() < 1).any()) throw Error("grid dims must be >= 1 along every axis");
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw Error("grid spacing must be > 0");
  if (!origin.allFinite()) throw Error("grid origin must be finite");
}

VoxelMask::VoxelMask(const GridGeometry& grid) : grid_(grid) {
  grid_.check();
  data_.assign(grid_.voxel_count(), 0);
}

bool VoxelMask::contains_point(const Vec3& p) const {
  auto idx = grid_.locate(p);
  return idx && at(idx->x(), idx->y(), idx->z());
}

std::size_t VoxelMask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

double DistanceField::sample(const Vec3& p) const {
  auto idx = grid.locate(p);
  if (!idx) throw Error("point outside distance field bounds");
  return at(idx->x(), idx->y(), idx->z());
}

// ---------------------------------------------------------------- distance transform

namespace {

constexpr double kFar = 1e30;

// Felzenszwalb-Huttenlocher lower envelope of parabolas along one line. Foreground
// samples carry kFar (finite) so differences never produce NaN.
void edt_line(const double* f, std::size_t n, double* out, std::vector<int>& v,
              std::vector<double>& z) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  v.resize(n);
  z.resize(n + 1);
  auto intersect = [&](std::size_t q, int p) {
    const double dq = static_cast<double>(q), dp = static_cast<double>(p);
    return ((f[q] + dq * dq) - (f[p] + dp * dp)) / (2.0 * (dq - dp));
  };
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (std::size_t q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = static_cast<int>(q);
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const double d = static_cast<double>(q) - v[k];
    out[q] = d * d + f[v[k]];
  }
}

}  // namespace

std::vector<double> squared_distance_voxels(const VoxelMask& mask) {
  const GridGeometry& g = mask.grid();
  // One voxel of background padding on every side.
  const std::array<std::size_t, 3> p{static_cast<std::size_t>(g.dims.x()) + 2,
                                     static_cast<std::size_t>(g.dims.y()) + 2,
                                     static_cast<std::size_t>(g.dims.z()) + 2};
  const std::array<std::size_t, 3> stride{1, p[0], p[0] * p[1]};
  std::vector<double> field(p[0] * p[1] * p[2], 0.0);
  for (int k = 0; k < g.dims.z(); ++k)
    for (int j = 0; j < g.dims.y(); ++j)
      for (int i = 0; i < g.dims.x(); ++i)
        if (mask.at(i, j, k)) field[(k + 1) * stride[2] + (j + 1) * stride[1] + (i + 1)] = kFar;

  std::vector<double> line, result;
  std::vector<int> v;
  std::vector<double> z;
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t n = p[axis];
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    line.resize(n);
    result.resize(n);
    for (std::size_t u = 0; u < p[a1]; ++u) {
      for (std::size_t w = 0; w < p[a2]; ++w) {
        const std::size_t base = u * stride[a1] + w * stride[a2];
        for (std::size_t q = 0; q < n; ++q) line[q] = field[base + q * stride[axis]];
        edt_line(line.data(), n, result.data(), v, z);
        for (std::size_t q = 0; q < n; ++q) field[base + q * stride[axis]] = result[q];
      }
    }
  }

  std::vector<double> out(g.voxel_count());
  for (int k = 0; k < g.dims.z(); ++k)
    for (int j = 0; j < g.dims.y(); ++j)
      for (int i = 0; i < g.dims.x(); ++i)
        out[g.offset(i, j, k)] = field[(k + 1) * stride[2] + (j + 1) * stride[1] + (i + 1)];
  return out;
}

DistanceField distance_transform(const VoxelMask& mask) {
  DistanceField df;
  df.grid = mask.grid();
  df.data = squared_distance_voxels(mask);
  for (double& d : df.data) d = std::sqrt(d) * df.grid.spacing;
  return df;
}

// ---------------------------------------------------------------- morphology

VoxelMask erode(const VoxelMask& mask, double radius) {
  if (!(radius >= 0.0)) throw Error("erosion radius must be >= 0");
  if (radius == 0.0) return mask;
  // A voxel survives iff no background voxel center lies within `radius` of its center.
  const double r = radius / mask.grid().spacing;
  const double r2 = r * r;
  const std::vector<double> d2 = squared_distance_voxels(mask);
  VoxelMask out(mask.grid());
  for (std::size_t i = 0; i < d2.size(); ++i) out.data()[i] = d2[i] > r2 ? 1 : 0;
  return out;
}

VoxelMask extract_cortex(const VoxelMask& whole, const CortexParams& params) {
  if (whole.empty()) throw Error("cortex extraction needs a nonempty organ mask");
  if (!(params.erosion_radius > 0.0)) throw Error("cortex erosion radius R1 must be > 0");
  if (!(params.exclusion_radius >= 0.0)) throw Error("cortex exclusion radius R2 must be >= 0");

  const VoxelMask core = erode(whole, params.erosion_radius);
  const GridGeometry& g = whole.grid();
  const double r2 = params.exclusion_radius * params.exclusion_radius;
  VoxelMask cortex(g);
  for (int k = 0; k < g.dims.z(); ++k)
    for (int j = 0; j < g.dims.y(); ++j)
      for (int i = 0; i < g.dims.x(); ++i) {
        if (!whole.at(i, j, k) || core.at(i, j, k)) continue;
        if ((g.center(i, j, k) - params.root_position).squaredNorm() > r2) cortex.set(i, j, k, true);
      }
  if (cortex.empty())
    throw Error("cortex extraction produced an empty mask; R1/R2 incompatible with the mask scale");
  return cortex;
}

VoxelMask largest_component(const VoxelMask& mask) {
  const GridGeometry& g = mask.grid();
  std::vector<int> label(g.voxel_count(), 0);
  std::vector<std::size_t> sizes{0};
  std::vector<Index3> stack;
  int next = 0;
  for (int k = 0; k < g.dims.z(); ++k)
    for (int j = 0; j < g.dims.y(); ++j)
      for (int i = 0; i < g.dims.x(); ++i) {
        if (!mask.at(i, j, k) || label[g.offset(i, j, k)] != 0) continue;
        ++next;
        sizes.push_back(0);
        stack.assign(1, Index3(i, j, k));
        label[g.offset(i, j, k)] = next;
        while (!stack.empty()) {
          const Index3 c = stack.back();
          stack.pop_back();
          ++sizes[next];
          static constexpr int kNb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                            {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
          for (const auto& d : kNb) {
            const Index3 n = c + Index3(d[0], d[1], d[2]);
            if (!g.contains(n) || !mask.at(n.x(), n.y(), n.z())) continue;
            int& l = label[g.offset(n.x(), n.y(), n.z())];
            if (l == 0) {
              l = next;
              stack.push_back(n);
            }
          }
        }
      }
  VoxelMask out(g);
  if (next == 0) return out;
  const int best = static_cast<int>(std::max_element(sizes.begin() + 1, sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < label.size(); ++i) out.data()[i] = label[i] == best ? 1 : 0;
  return out;
}

// ---------------------------------------------------------------- phantom

Phantom generate_phantom(const Index3& dims, double spacing, const ShapeParams& shape,
                         std::uint64_t seed) {
  if ((dims.array() < 32).any()) throw Error("phantom dims must be >= 32 along every axis");
  GridGeometry g;
  g.dims = dims;
  g.spacing = spacing;
  g.check();
  if ((shape.semi_axes.array() <= 0).any()) throw Error("phantom semi-axes must be > 0");

  const Vec3 half = dims.cast<double>() * spacing * 0.5;
  const Vec3 center = g.origin + half;
  const Vec3 axes = shape.semi_axes.cwiseProduct(half);
  const Vec3 carve_axes = shape.carve_semi_axes.cwiseProduct(axes);
  const bool carve = shape.carve_depth > 0.0;
  const Vec3 carve_center =
      center + Vec3(axes.x() * (1.0 - shape.carve_depth) + carve_axes.x(), 0.0, 0.0);
  if (carve && (carve_axes.array() <= 0).any()) throw Error("phantom carve semi-axes must be > 0");

  // Surface undulation: three random plane waves over the unit direction.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::array<Vec3, 3> wave_dir;
  std::array<double, 3> wave_freq{}, wave_phase{};
  for (int w = 0; w < 3; ++w) {
    Vec3 d(unif(rng) - 0.5, unif(rng) - 0.5, unif(rng) - 0.5);
    if (d.norm() < 1e-9) d = Vec3::UnitX();
    wave_dir[w] = d.normalized();
    wave_freq[w] = 2.0 + 2.0 * unif(rng);
    wave_phase[w] = 2.0 * units::kPi * unif(rng);
  }
  auto boundary = [&](const Vec3& q) {
    if (shape.jitter == 0.0) return 1.0;
    const double n = q.norm();
    if (n == 0.0) return 1.0;
    const Vec3 u = q / n;
    double s = 0.0;
    for (int w = 0; w < 3; ++w) s += std::sin(wave_freq[w] * units::kPi * u.dot(wave_dir[w]) + wave_phase[w]);
    return 1.0 + shape.jitter * s / 3.0;
  };

  VoxelMask raw(g);
  for (int k = 0; k < dims.z(); ++k)
    for (int j = 0; j < dims.y(); ++j)
      for (int i = 0; i < dims.x(); ++i) {
        const Vec3 p = g.center(i, j, k);
        const Vec3 q = (p - center).cwiseQuotient(axes);
        if (q.norm() > boundary(q)) continue;
        if (carve && (p - carve_center).cwiseQuotient(carve_axes).squaredNorm() < 1.0) continue;
        raw.set(i, j, k, true);
      }

  Phantom out;
  out.mask = largest_component(raw);
  if (out.mask.empty()) throw Error("phantom shape parameters produce an empty mask");

  // Walk inward from the deepest point of the hilum until we sit one voxel inside.
  Vec3 root(center.x() + axes.x() * (1.0 - (carve ? shape.carve_depth : 0.0)), center.y(),
            center.z());
  for (int step = 0; step < dims.x(); ++step) {
    const Vec3 probe = root - Vec3(spacing, 0.0, 0.0);
    if (out.mask.contains_point(root) && out.mask.contains_point(probe)) {
      root = probe;
      break;
    }
    root = probe;
  }
  if (!out.mask.contains_point(root)) throw Error("phantom root position is not inside the mask");
  out.root = root;
  return out;
}

// ---------------------------------------------------------------- file io

namespace {

void write_header(std::ostream& os, const GridGeometry& g) {
  os.precision(17);
  os << "dims " << g.dims.x() << ' ' << g.dims.y() << ' ' << g.dims.z() << '\n'
     << "spacing " << g.spacing << '\n'
     << "origin " << g.origin.x() << ' ' << g.origin.y() << ' ' << g.origin.z() << '\n'
     << '\n';
}

GridGeometry read_header(std::istream& is, const std::string& path) {
  GridGeometry g;
  bool have_dims = false, have_spacing = false, have_origin = false;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "dims") {
      ls >> g.dims.x() >> g.dims.y() >> g.dims.z();
      have_dims = !ls.fail();
    } else if (key == "spacing") {
      // A single value is the only accepted form: grids are isotropic.
      ls >> g.spacing;
      double extra;
      if (ls >> extra) throw Error(path + ": anisotropic spacing is not supported");
      have_spacing = true;
    } else if (key == "origin") {
      ls >> g.origin.x() >> g.origin.y() >> g.origin.z();
      have_origin = !ls.fail();
    } else {
      throw Error(path + ": unknown header key '" + key + "'");
    }
  }
  if (!have_dims || !have_spacing || !have_origin)
    throw Error(path + ": incomplete header (need dims, spacing, origin)");
  g.check();
  return g;
}

}  // namespace

void write_mask(const VoxelMask& mask, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_header(os, mask.grid());
  os.write(reinterpret_cast<const char*>(mask.data().data()),
           static_cast<std::streamsize>(mask.data().size()));
  if (!os) throw Error("failed writing '" + path + "'");
}

VoxelMask read_mask(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open mask '" + path + "'");
  VoxelMask mask(read_header(is, path));
  auto& data = mask.data();
  is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (static_cast<std::size_t>(is.gcount()) != data.size())
    throw Error(path + ": truncated mask payload");
  if (is.peek() != std::char_traits<char>::eof()) throw Error(path + ": trailing bytes after mask payload");
  for (auto b : data)
    if (b > 1) throw Error(path + ": mask payload must contain only 0/1 bytes");
  return mask;
}

void write_volume(const ScalarVolume& volume, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_header(os, volume.grid);
  static_assert(std::endian::native == std::endian::little, "volume payload is little-endian");
  os.write(reinterpret_cast<const char*>(volume.data.data()),
           static_cast<std::streamsize>(volume.data.size() * sizeof(float)));
  if (!os) throw Error("failed writing '" + path + "'");
}

ScalarVolume read_volume(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open volume '" + path + "'");
  ScalarVolume v;
  v.grid = read_header(is, path);
  v.data.resize(v.grid.voxel_count());
  const auto bytes = static_cast<std::streamsize>(v.data.size() * sizeof(float));
  is.read(reinterpret_cast<char*>(v.data.data()), bytes);
  if (is.gcount() != bytes) throw Error(path + ": truncated volume payload");
  return v;
}

}  // namespace vasc
