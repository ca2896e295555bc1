/* SPDX-License-Identifier: Apache-2.0 */
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <deque>
#include <fstream>

#include "support.hpp"
#include "vasc/domain.hpp"

using namespace vasc;

namespace {

// Number of 6-connected foreground components, by breadth-first flood fill.
int count_components(const VoxelMask& m) {
  const auto& g = m.grid();
  std::vector<char> seen(g.voxel_count(), 0);
  int comps = 0;
  for (int k = 0; k < g.dims.z(); ++k)
    for (int j = 0; j < g.dims.y(); ++j)
      for (int i = 0; i < g.dims.x(); ++i) {
        if (!m.at(i, j, k) || seen[g.offset(i, j, k)]) continue;
        ++comps;
        std::deque<Index3> q{Index3(i, j, k)};
        seen[g.offset(i, j, k)] = 1;
        while (!q.empty()) {
          const Index3 c = q.front();
          q.pop_front();
          for (int a = 0; a < 3; ++a)
            for (int s : {-1, 1}) {
              Index3 n = c;
              n[a] += s;
              if (!g.contains(n) || !m.at(n.x(), n.y(), n.z()) || seen[g.offset(n.x(), n.y(), n.z())]) continue;
              seen[g.offset(n.x(), n.y(), n.z())] = 1;
              q.push_back(n);
            }
        }
      }
  return comps;
}

// Distance (voxel units) from voxel (i,j,k) to the nearest background voxel centre; voxels
// outside the grid count as background.
double brute_distance(const VoxelMask& m, int i, int j, int k) {
  const auto& g = m.grid();
  if (!m.at(i, j, k)) return 0.0;
  double best = std::min({i + 1.0, j + 1.0, k + 1.0, double(g.dims.x() - i), double(g.dims.y() - j),
                          double(g.dims.z() - k)});
  best *= best;
  for (int z = 0; z < g.dims.z(); ++z)
    for (int y = 0; y < g.dims.y(); ++y)
      for (int x = 0; x < g.dims.x(); ++x)
        if (!m.at(x, y, z)) best = std::min(best, double((x - i) * (x - i) + (y - j) * (y - j) + (z - k) * (z - k)));
  return std::sqrt(best);
}

// Naive erosion: keep a voxel iff every voxel centre within r (voxel units) is foreground
// and inside the grid.
VoxelMask brute_erode(const VoxelMask& m, double r) {
  const auto& g = m.grid();
  VoxelMask out(g);
  const int reach = static_cast<int>(std::ceil(r));
  for (int k = 0; k < g.dims.z(); ++k)
    for (int j = 0; j < g.dims.y(); ++j)
      for (int i = 0; i < g.dims.x(); ++i) {
        if (!m.at(i, j, k)) continue;
        bool keep = true;
        for (int dz = -reach; dz <= reach && keep; ++dz)
          for (int dy = -reach; dy <= reach && keep; ++dy)
            for (int dx = -reach; dx <= reach && keep; ++dx) {
              if (dx * dx + dy * dy + dz * dz > r * r) continue;
              const Index3 n(i + dx, j + dy, k + dz);
              if (!g.contains(n) || !m.at(n.x(), n.y(), n.z())) keep = false;
            }
        out.set(i, j, k, keep);
      }
  return out;
}

bool subset(const VoxelMask& a, const VoxelMask& b) {
  for (std::size_t i = 0; i < a.data().size(); ++i)
    if (a.data()[i] && !b.data()[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("grid maps indices to voxel centres and back") {
  GridGeometry g{Index3(4, 5, 6), 2.5, Vec3(10, -3, 1)};
  for (int k = 0; k < 6; ++k)
    for (int j = 0; j < 5; ++j)
      for (int i = 0; i < 4; ++i) {
        const auto idx = g.locate(g.center(i, j, k));
        REQUIRE(idx);
        CHECK(*idx == Index3(i, j, k));
      }
  CHECK_FALSE(g.locate(Vec3(9.9, 0, 5)));
  CHECK_THROWS_AS((GridGeometry{Index3(0, 1, 1), 1.0, Vec3::Zero()}.check()), Error);
  CHECK_THROWS_AS((GridGeometry{Index3(1, 1, 1), 0.0, Vec3::Zero()}.check()), Error);
}

TEST_CASE("default phantom is one connected kidney-like blob") {
  const Phantom ph = generate_phantom(Index3(64, 64, 64), 100.0, ShapeParams::kidney(), 3);
  const double fill = double(ph.mask.count()) / double(ph.mask.grid().voxel_count());
  CHECK(fill >= 0.1);
  CHECK(fill <= 0.5);
  CHECK(count_components(ph.mask) == 1);
  CHECK(ph.mask.contains_point(ph.root));
}

TEST_CASE("phantom without carve matches the analytic ellipsoid volume") {
  ShapeParams s;
  s.carve_depth = 0.0;
  s.jitter = 0.0;
  const double spacing = 50.0;
  const Phantom ph = generate_phantom(Index3(64, 64, 64), spacing, s, 1);
  const double half = 32 * spacing;
  const double analytic = 4.0 / 3.0 * units::kPi * s.semi_axes.x() * half * s.semi_axes.y() * half *
                          s.semi_axes.z() * half;
  CHECK(std::abs(ph.mask.volume() - analytic) / analytic < 0.05);
}

TEST_CASE("phantom is deterministic per seed and rejects small grids") {
  const auto a = generate_phantom(Index3(40, 40, 40), 100.0, ShapeParams::kidney(), 11);
  const auto b = generate_phantom(Index3(40, 40, 40), 100.0, ShapeParams::kidney(), 11);
  CHECK(a.mask == b.mask);
  CHECK(a.root == b.root);
  CHECK_THROWS_AS(generate_phantom(Index3(31, 64, 64), 100.0, ShapeParams::kidney(), 0), Error);
  ShapeParams bad;
  bad.semi_axes = Vec3(0.0, 0.5, 0.5);
  CHECK_THROWS_AS(generate_phantom(Index3(40, 40, 40), 100.0, bad, 0), Error);
}

TEST_CASE("erosion by zero is the identity") {
  std::mt19937_64 rng(5);
  const VoxelMask m = vt::random_mask(rng, 12, 0.7);
  CHECK(erode(m, 0.0) == m);
  CHECK_THROWS_AS(erode(m, -1.0), Error);
}

TEST_CASE("eroding a solid cube by two voxels leaves the 16-voxel core") {
  const double s = 3.0;
  VoxelMask m(GridGeometry{Index3(24, 24, 24), s, Vec3::Zero()});
  for (int k = 2; k < 22; ++k)
    for (int j = 2; j < 22; ++j)
      for (int i = 2; i < 22; ++i) m.set(i, j, k, true);
  const VoxelMask e = erode(m, 2 * s);
  CHECK(e == brute_erode(m, 2.0));
  CHECK(e.count() == 16u * 16u * 16u);
  for (int k = 4; k < 20; ++k)
    for (int j = 4; j < 20; ++j)
      for (int i = 4; i < 20; ++i) CHECK(e.at(i, j, k));
}

TEST_CASE("erosion is anti-extensive, monotone and matches the ball test") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const VoxelMask a = vt::random_mask(rng, 14, 0.85);
    VoxelMask b = a;
    for (auto& v : b.data())
      if (std::bernoulli_distribution(0.3)(rng)) v = 1;
    const double r = std::uniform_real_distribution<double>(0.5, 3.0)(rng);
    const VoxelMask ea = erode(a, r), eb = erode(b, r);
    CHECK(subset(ea, a));
    CHECK(subset(ea, eb));
    CHECK(ea == brute_erode(a, r));
  }
  // Radius beyond the extent empties the mask without failing.
  VoxelMask full(GridGeometry{Index3(8, 8, 8), 1.0, Vec3::Zero()});
  for (auto& v : full.data()) v = 1;
  CHECK(erode(full, 100.0).empty());
}

TEST_CASE("cortex equals the voxel-wise set comprehension") {
  std::mt19937_64 rng(23);
  const auto ph = generate_phantom(Index3(40, 40, 40), 100.0, ShapeParams::kidney(), 2);
  for (double r2 : {0.0, 600.0, 1200.0}) {
    const CortexParams p{300.0, r2, ph.root};
    const VoxelMask c = extract_cortex(ph.mask, p);
    const VoxelMask eroded = brute_erode(ph.mask, 3.0);
    const auto& g = ph.mask.grid();
    bool same = true;
    for (int k = 0; k < 40; ++k)
      for (int j = 0; j < 40; ++j)
        for (int i = 0; i < 40; ++i) {
          const bool want = ph.mask.at(i, j, k) && !eroded.at(i, j, k) &&
                            (g.center(i, j, k) - ph.root).norm() > r2;
          same = same && (c.at(i, j, k) == want);
        }
    CHECK(same);
  }
}

TEST_CASE("cortex shell thickness, exclusion and failure modes") {
  const auto ph = generate_phantom(Index3(48, 48, 48), 100.0, ShapeParams::sphere(), 0);
  const VoxelMask shell = extract_cortex(ph.mask, {500.0, 0.0, ph.root});
  const DistanceField d = distance_transform(ph.mask);
  for (std::size_t i = 0; i < shell.data().size(); ++i)
    if (shell.data()[i]) CHECK(d.data[i] <= 500.0 + 1e-9);
  CHECK_THROWS_AS(extract_cortex(ph.mask, {500.0, 1e6, ph.root}), Error);
  CHECK_THROWS_AS(extract_cortex(VoxelMask(ph.mask.grid()), {500.0, 0.0, ph.root}), Error);
}

TEST_CASE("full-scale cortex keeps both predicates and opens a hilum gap") {
  const double s = 90.4, R1 = 2000.0, R2 = 5650.0;
  const auto ph = generate_phantom(Index3(128, 128, 128), s, ShapeParams::kidney(), 4);
  const VoxelMask c = extract_cortex(ph.mask, {R1, R2, ph.root});
  REQUIRE_FALSE(c.empty());
  const auto& g = c.grid();
  const int reach = static_cast<int>(std::ceil(R1 / s));
  // Per-voxel re-evaluation on a deterministic sample of whole-mask voxels.
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> pick(0, 127);
  int checked = 0, in_cortex = 0;
  while (checked < 300) {
    const int i = pick(rng), j = pick(rng), k = pick(rng);
    if (!ph.mask.at(i, j, k)) continue;
    ++checked;
    bool near_boundary = false;
    for (int dz = -reach; dz <= reach && !near_boundary; ++dz)
      for (int dy = -reach; dy <= reach && !near_boundary; ++dy)
        for (int dx = -reach; dx <= reach && !near_boundary; ++dx) {
          if ((dx * dx + dy * dy + dz * dz) * s * s > R1 * R1) continue;
          const Index3 n(i + dx, j + dy, k + dz);
          if (!g.contains(n) || !ph.mask.at(n.x(), n.y(), n.z())) near_boundary = true;
        }
    const bool want = near_boundary && (g.center(i, j, k) - ph.root).norm() > R2;
    CHECK(c.at(i, j, k) == want);
    in_cortex += want;
  }
  CHECK(in_cortex > 0);
  // Nothing inside the exclusion ball.
  for (int k = 0; k < 128; ++k)
    for (int j = 0; j < 128; ++j)
      for (int i = 0; i < 128; ++i)
        if (c.at(i, j, k)) REQUIRE((g.center(i, j, k) - ph.root).norm() > R2);
}

TEST_CASE("distance transform: trivial cases") {
  VoxelMask empty(GridGeometry{Index3(6, 6, 6), 2.0, Vec3::Zero()});
  for (double v : distance_transform(empty).data) CHECK(v == 0.0);

  VoxelMask single(GridGeometry{Index3(7, 7, 7), 2.0, Vec3::Zero()});
  single.set(3, 3, 3, true);
  const DistanceField d = distance_transform(single);
  CHECK(d.at(3, 3, 3) == doctest::Approx(2.0));
  CHECK(d.at(3, 3, 4) == 0.0);
}

TEST_CASE("distance transform of a ball peaks near its radius") {
  const int n = 31;
  const double s = 4.0;
  VoxelMask ball(GridGeometry{Index3(n, n, n), s, Vec3::Zero()});
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        if ((i - 15) * (i - 15) + (j - 15) * (j - 15) + (k - 15) * (k - 15) <= 100) ball.set(i, j, k, true);
  const DistanceField d = distance_transform(ball);
  CHECK(std::abs(d.at(15, 15, 15) - 10 * s) <= s);
  CHECK(d.at(15, 15, 15) == doctest::Approx(brute_distance(ball, 15, 15, 15) * s));
}

TEST_CASE("distance transform agrees with brute force on random masks") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 10 + trial;
    const double s = 1.5;
    VoxelMask m = vt::random_mask(rng, n, 0.8, s);
    const DistanceField d = distance_transform(m);
    const double bound = s * n * std::sqrt(3.0);
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const double v = d.at(i, j, k);
          CHECK(std::abs(v - brute_distance(m, i, j, k) * s) < 1e-6);
          CHECK(v <= bound);
          if (!m.at(i, j, k)) CHECK(v == 0.0);
        }
  }
}

TEST_CASE("mask and volume files round-trip and reject malformed input") {
  const auto dir = vt::scratch_dir("domain_io");
  std::mt19937_64 rng(1);
  VoxelMask m = vt::random_mask(rng, 9, 0.4, 1.0 / 3.0);
  const std::string path = (dir / "m.mask").string();
  write_mask(m, path);
  CHECK(read_mask(path) == m);

  ScalarVolume v{m.grid(), std::vector<float>(m.grid().voxel_count())};
  for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = float(i) * 0.25f;
  write_volume(v, (dir / "v.vol").string());
  const ScalarVolume w = read_volume((dir / "v.vol").string());
  CHECK(w.grid == v.grid);
  CHECK(w.data == v.data);

  {
    std::ofstream os(dir / "aniso.mask");
    os << "dims 1 1 1\nspacing 1 2 3\norigin 0 0 0\n\n" << char(1);
  }
  CHECK_THROWS_AS(read_mask((dir / "aniso.mask").string()), Error);
  {
    std::ofstream os(dir / "short.mask");
    os << "dims 2 2 2\nspacing 1\norigin 0 0 0\n\n" << char(1) << char(0);
  }
  CHECK_THROWS_AS(read_mask((dir / "short.mask").string()), Error);
  CHECK_THROWS_AS(read_mask((dir / "missing.mask").string()), Error);
}
