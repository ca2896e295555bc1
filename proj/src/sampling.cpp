/* SPDX-License-Identifier: Apache-2.0 */
#include "vasc/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vasc/text.hpp"

namespace vasc {

void SamplingConfig::check() const {
  if (n_terminals < 1) throw Error("n_terminals must be >= 1");
  if (r_min && !(*r_min > 0.0)) throw Error("r_min must be > 0");
  if (!(r_min_scale > 0.0)) throw Error("r_min scale must be > 0");
  if (!(r0_mean > 0.0)) throw Error("r0_mean must be > 0");
  if (!(r0_std >= 0.0)) throw Error("r0_std must be >= 0");
}

double min_distance_for_count(const VoxelMask& cortex, int n, double scale) {
  if (n < 1) throw Error("point count must be >= 1");
  if (cortex.empty()) throw Error("cortex mask is empty");
  return scale * std::cbrt(cortex.volume() / n);
}

namespace {

// Uniform background grid over an axis-aligned box, cell size r / sqrt(3), so each
// cell holds at most one sample.
class SampleGrid {
 public:
  SampleGrid(const Vec3& lo, const Vec3& hi, double cell) : lo_(lo), cell_(cell) {
    for (int a = 0; a < 3; ++a) dims_[a] = std::max(1, static_cast<int>(std::ceil((hi[a] - lo[a]) / cell)));
    cells_.assign(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2], -1);
  }

  Index3 cell_of(const Vec3& p) const {
    Index3 c;
    for (int a = 0; a < 3; ++a)
      c[a] = std::clamp(static_cast<int>(std::floor((p[a] - lo_[a]) / cell_)), 0, dims_[a] - 1);
    return c;
  }

  void insert(const Vec3& p, int index) { cells_[offset(cell_of(p))] = index; }

  /// True when some stored sample lies strictly closer than `radius`.
  bool any_within(const Vec3& p, double radius, const std::vector<Vec3>& pts) const {
    const Index3 c = cell_of(p);
    const int reach = static_cast<int>(std::ceil(radius / cell_));
    const double r2 = radius * radius;
    for (int k = std::max(0, c.z() - reach); k <= std::min(dims_[2] - 1, c.z() + reach); ++k)
      for (int j = std::max(0, c.y() - reach); j <= std::min(dims_[1] - 1, c.y() + reach); ++j)
        for (int i = std::max(0, c.x() - reach); i <= std::min(dims_[0] - 1, c.x() + reach); ++i) {
          const int s = cells_[offset(Index3(i, j, k))];
          if (s >= 0 && (pts[static_cast<std::size_t>(s)] - p).squaredNorm() < r2) return true;
        }
    return false;
  }

 private:
  std::size_t offset(const Index3& c) const {
    return (static_cast<std::size_t>(c.z()) * dims_[1] + c.y()) * dims_[0] + c.x();
  }
  Vec3 lo_;
  double cell_;
  int dims_[3];
  std::vector<int> cells_;
};

}  // namespace

PoissonSample poisson_disk_sample(const VoxelMask& cortex, double r_min, int n_target,
                                  std::uint64_t seed) {
  if (!(r_min > 0.0)) throw Error("r_min must be > 0");
  if (n_target < 1) throw Error("target point count must be >= 1");
  const GridGeometry& g = cortex.grid();

  // Bounding box of the cortex voxels (outer voxel faces).
  Index3 imin = g.dims, imax(-1, -1, -1);
  for (int k = 0; k < g.dims.z(); ++k)
    for (int j = 0; j < g.dims.y(); ++j)
      for (int i = 0; i < g.dims.x(); ++i)
        if (cortex.at(i, j, k)) {
          imin = imin.cwiseMin(Index3(i, j, k));
          imax = imax.cwiseMax(Index3(i, j, k));
        }
  if (imax.x() < 0) throw Error("cannot sample an empty cortex");
  const Vec3 lo = g.origin + imin.cast<double>() * g.spacing;
  const Vec3 hi = g.origin + (imax + Index3::Ones()).cast<double>() * g.spacing;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  constexpr int kAttempts = 30;

  std::vector<Vec3> cube;
  SampleGrid grid(lo, hi, r_min / std::sqrt(3.0));
  std::vector<int> active;
  {
    const Vec3 first = lo + (hi - lo).cwiseProduct(Vec3(unif(rng), unif(rng), unif(rng)));
    cube.push_back(first);
    grid.insert(first, 0);
    active.push_back(0);
  }
  while (!active.empty()) {
    const auto slot = static_cast<std::size_t>(unif(rng) * static_cast<double>(active.size())) % active.size();
    const Vec3 base = cube[static_cast<std::size_t>(active[slot])];
    bool placed = false;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
      // Uniform in the spherical shell r..2r.
      const double radius = r_min * std::cbrt(1.0 + 7.0 * unif(rng));
      const double cos_t = 2.0 * unif(rng) - 1.0;
      const double phi = 2.0 * units::kPi * unif(rng);
      const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
      const Vec3 cand = base + radius * Vec3(sin_t * std::cos(phi), sin_t * std::sin(phi), cos_t);
      if ((cand.array() < lo.array()).any() || (cand.array() >= hi.array()).any()) continue;
      if (grid.any_within(cand, r_min, cube)) continue;
      cube.push_back(cand);
      grid.insert(cand, static_cast<int>(cube.size() - 1));
      active.push_back(static_cast<int>(cube.size() - 1));
      placed = true;
      break;
    }
    if (!placed) {
      active[slot] = active.back();
      active.pop_back();
    }
  }

  std::vector<Vec3> kept;
  for (const Vec3& p : cube)
    if (cortex.contains_point(p)) kept.push_back(p);

  // Fill coverage holes left by filtering: any cortex voxel center farther than 2 r_min
  // from every kept sample becomes a sample itself.
  SampleGrid kept_grid(lo, hi, r_min / std::sqrt(3.0));
  for (std::size_t i = 0; i < kept.size(); ++i) kept_grid.insert(kept[i], static_cast<int>(i));
  for (int k = imin.z(); k <= imax.z(); ++k)
    for (int j = imin.y(); j <= imax.y(); ++j)
      for (int i = imin.x(); i <= imax.x(); ++i) {
        if (!cortex.at(i, j, k)) continue;
        const Vec3 c = g.center(i, j, k);
        if (kept_grid.any_within(c, 2.0 * r_min, kept)) continue;
        kept.push_back(c);
        kept_grid.insert(c, static_cast<int>(kept.size() - 1));
      }

  PoissonSample out;
  if (kept.size() > static_cast<std::size_t>(n_target)) {
    std::vector<std::size_t> idx(kept.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(n_target));
    std::sort(idx.begin(), idx.end());
    out.points.reserve(idx.size());
    for (std::size_t i : idx) out.points.push_back(kept[i]);
  } else {
    out.points = std::move(kept);
  }
  out.below_half_target = 2 * out.points.size() < static_cast<std::size_t>(n_target);
  return out;
}

std::vector<double> sample_terminal_radii(std::size_t n, double mean, double std_dev,
                                          std::uint64_t seed) {
  if (!(mean > 0.0)) throw Error("terminal radius mean must be > 0");
  if (!(std_dev >= 0.0)) throw Error("terminal radius std must be >= 0");
  std::vector<double> radii(n, mean);
  if (std_dev == 0.0) return radii;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(mean, std_dev);
  for (double& r : radii) {
    do {
      r = dist(rng);
    } while (!(r > 0.0));
  }
  return radii;
}

TerminalSample sample_terminals(const VoxelMask& cortex, const SamplingConfig& config) {
  config.check();
  TerminalSample out;
  out.r_min = config.r_min ? *config.r_min
                           : min_distance_for_count(cortex, config.n_terminals, config.r_min_scale);
  auto pts = poisson_disk_sample(cortex, out.r_min, config.n_terminals, stream_seed(config.seed, 0));
  out.below_half_target = pts.below_half_target;
  out.terminals.positions = std::move(pts.points);
  out.terminals.radii = sample_terminal_radii(out.terminals.positions.size(), config.r0_mean,
                                              config.r0_std, stream_seed(config.seed, 1));
  return out;
}

void write_terminals(const TerminalSet& terminals, const std::string& path) {
  using text::format_double;
  auto os = text::open_output(path);
  os << "x,y,z,radius\n";
  for (std::size_t i = 0; i < terminals.size(); ++i) {
    const Vec3& p = terminals.positions[i];
    os << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(p.z()) << ','
       << format_double(terminals.radii[i]) << '\n';
  }
  if (!os) throw Error("failed writing '" + path + "'");
}

TerminalSet read_terminals(const std::string& path) {
  const auto t = text::read_csv(path);
  const int cx = t.column("x"), cy = t.column("y"), cz = t.column("z"), cr = t.column("radius");
  if (cx < 0 || cy < 0 || cz < 0 || cr < 0) throw Error(path + ": expected header x,y,z,radius");
  TerminalSet out;
  for (const auto& r : t.rows) {
    out.positions.emplace_back(text::parse_or_throw<double>(r[cx], path),
                               text::parse_or_throw<double>(r[cy], path),
                               text::parse_or_throw<double>(r[cz], path));
    const double radius = text::parse_or_throw<double>(r[cr], path);
    if (!(radius > 0.0)) throw Error(path + ": terminal radius must be > 0");
    out.radii.push_back(radius);
  }
  return out;
}

}  // namespace vasc
