/* SPDX-License-Identifier: Apache-2.0 */
// Shared generators and independent reference implementations for the test suites.
#ifndef VASC_TESTS_SUPPORT_HPP
#define VASC_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "vasc/centerline.hpp"
#include "vasc/cost.hpp"
#include "vasc/domain.hpp"
#include "vasc/gco.hpp"
#include "vasc/sampling.hpp"
#include "vasc/tree.hpp"

namespace vt {

using vasc::NodeId;
using vasc::Vec3;

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("vasc_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline Vec3 random_point(std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  return {u(rng), u(rng), u(rng)};
}

inline vasc::VoxelMask random_mask(std::mt19937_64& rng, int n, double fill, double spacing = 1.0) {
  vasc::VoxelMask m(vasc::GridGeometry{vasc::Index3(n, n, n), spacing, Vec3::Zero()});
  std::bernoulli_distribution b(fill);
  for (auto& v : m.data()) v = b(rng) ? 1 : 0;
  return m;
}

/// Random rooted tree: node 0 is the root with a single child, every later node picks a
/// random earlier non-root parent. Leaves are terminals with radii ~ U(5, 15).
inline vasc::VesselTree random_tree(std::mt19937_64& rng, int n_nodes, double extent = 1000.0) {
  vasc::VesselTree t;
  t.set_root(t.add_node(random_point(rng, extent), vasc::NodeKind::prebuilt));
  for (int i = 1; i < n_nodes; ++i) {
    const NodeId id = t.add_node(random_point(rng, extent), vasc::NodeKind::intermediate);
    std::uniform_int_distribution<int> pick(1, std::max(1, i - 1));
    t.attach(id, i == 1 ? 0 : pick(rng));
  }
  std::uniform_real_distribution<double> r(5.0, 15.0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto& n = t.node(static_cast<NodeId>(i));
    if (i != 0 && n.children.empty()) {
      n.kind = vasc::NodeKind::terminal;
      n.radius = r(rng);
    }
  }
  return t;
}

/// Recursive Strahler order of the edge entering `v`.
inline int strahler_recursive(const vasc::VesselTree& t, NodeId v) {
  const auto& ch = t.node(v).children;
  if (ch.empty()) return 0;
  std::vector<int> o;
  for (NodeId c : ch) o.push_back(strahler_recursive(t, c));
  const int m = *std::max_element(o.begin(), o.end());
  return std::count(o.begin(), o.end(), m) >= 2 ? m + 1 : m;
}

/// Weighted geometric median by Weiszfeld iterations, with the standard anchor test.
inline Vec3 weiszfeld(const std::vector<Vec3>& pts, const std::vector<double>& w) {
  auto f = [&](const Vec3& x) {
    double s = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) s += w[i] * (x - pts[i]).norm();
    return s;
  };
  for (std::size_t k = 0; k < pts.size(); ++k) {
    Vec3 g = Vec3::Zero();
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (i != k && (pts[i] - pts[k]).norm() > 0) g += w[i] * (pts[k] - pts[i]).normalized();
    if (g.norm() <= w[k]) return pts[k];
  }
  Vec3 x = Vec3::Zero();
  double ws = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    x += w[i] * pts[i];
    ws += w[i];
  }
  x /= ws;
  for (int it = 0; it < 20000; ++it) {
    Vec3 num = Vec3::Zero();
    double den = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double d = std::max((x - pts[i]).norm(), 1e-12);
      num += w[i] * pts[i] / d;
      den += w[i] / d;
    }
    const Vec3 nx = num / den;
    if ((nx - x).norm() < 1e-12 * (1 + x.norm())) return nx;
    x = nx;
  }
  (void)f;
  return x;
}

/// Star with a centre `v`, children positions, radii and flows.
struct Star {
  Vec3 v;
  std::vector<Vec3> child;
  std::vector<double> radius;
  std::vector<double> flow;
};

/// Best achievable star cost over every split subset (2 <= |S| <= k-1), by brute force.
/// Cost of the unsplit star.
inline double star_cost(const Star& s, const vasc::CostWeights& w) {
  double c = 0;
  for (std::size_t i = 0; i < s.child.size(); ++i) c += vasc::coefficient(w, s.radius[i], s.flow[i]) * (s.child[i] - s.v).norm();
  return c;
}

inline double exhaustive_split_cost(const Star& s, const vasc::CostWeights& w) {
  const std::size_t k = s.child.size();
  double unsplit = 0;
  for (std::size_t i = 0; i < k; ++i) unsplit += vasc::coefficient(w, s.radius[i], s.flow[i]) * (s.child[i] - s.v).norm();
  double best = unsplit;
  for (unsigned mask = 0; mask < (1u << k); ++mask) {
    const int bits = __builtin_popcount(mask);
    if (bits < 2 || bits > static_cast<int>(k) - 1) continue;
    std::vector<Vec3> pts{s.v};
    std::vector<double> wt{0};
    double r3 = 0, q = 0, rest = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const double c = vasc::coefficient(w, s.radius[i], s.flow[i]);
      if (mask & (1u << i)) {
        pts.push_back(s.child[i]);
        wt.push_back(c);
        r3 += std::pow(s.radius[i], 3);
        q += s.flow[i];
      } else {
        rest += c * (s.child[i] - s.v).norm();
      }
    }
    wt[0] = vasc::coefficient(w, std::cbrt(r3), q);
    const Vec3 x = weiszfeld(pts, wt);
    double c = rest;
    for (std::size_t i = 0; i < pts.size(); ++i) c += wt[i] * (x - pts[i]).norm();
    best = std::min(best, c);
  }
  return best;
}

/// Random star: centre at the origin, k children with terminal-like radii and flows.
inline Star random_star(std::mt19937_64& rng, int k) {
  Star s;
  s.v = Vec3::Zero();
  std::uniform_real_distribution<double> r(8.0, 14.0), q(1.0, 4.0);
  for (int i = 0; i < k; ++i) {
    s.child.push_back(random_point(rng, 1000.0));
    const double rr = r(rng);
    s.radius.push_back(rr);
    s.flow.push_back(q(rng) * 3.89e6 * std::pow(rr / 10.0, 3));
  }
  return s;
}

/// Tree holding the star: prebuilt root at the centre, children as terminals.
inline vasc::VesselTree star_tree(const Star& s) {
  vasc::VesselTree t;
  t.set_root(t.add_node(s.v, vasc::NodeKind::prebuilt));
  for (std::size_t i = 0; i < s.child.size(); ++i) {
    const NodeId id = t.add_node(s.child[i], vasc::NodeKind::terminal);
    t.node(id).radius = s.radius[i];
    t.node(id).flow = s.flow[i];
    t.attach(id, 0);
  }
  return t;
}

/// Maximum total radius over all spanning forests, by enumerating edge subsets.
inline double brute_force_max_spanning(const vasc::CenterlineGraph& g) {
  const std::size_t m = g.edges.size();
  // Number of edges in a spanning forest = nodes - components.
  std::vector<int> comp(g.node_count());
  for (std::size_t i = 0; i < comp.size(); ++i) comp[i] = static_cast<int>(i);
  auto find = [&](auto&& self, int x) -> int { return comp[static_cast<std::size_t>(x)] == x ? x : self(self, comp[static_cast<std::size_t>(x)]); };
  std::size_t components = g.node_count();
  for (const auto& e : g.edges) {
    const int a = find(find, e.a), b = find(find, e.b);
    if (a != b) {
      comp[static_cast<std::size_t>(a)] = b;
      --components;
    }
  }
  const std::size_t need = g.node_count() - components;
  double best = -std::numeric_limits<double>::infinity();
  for (unsigned long mask = 0; mask < (1ul << m); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountl(mask)) != need) continue;
    std::vector<int> p(g.node_count());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<int>(i);
    auto f2 = [&](auto&& self, int x) -> int { return p[static_cast<std::size_t>(x)] == x ? x : self(self, p[static_cast<std::size_t>(x)]); };
    bool acyclic = true;
    double total = 0;
    for (std::size_t e = 0; e < m && acyclic; ++e) {
      if (!(mask & (1ul << e))) continue;
      const int a = f2(f2, g.edges[e].a), b = f2(f2, g.edges[e].b);
      if (a == b) acyclic = false;
      p[static_cast<std::size_t>(a)] = b;
      total += g.edges[e].radius;
    }
    if (acyclic) best = std::max(best, total);
  }
  return best;
}

/// Spherical-shell organ with a synthetic prebuilt artery and sampled terminals.
struct Scenario {
  vasc::VoxelMask whole;
  vasc::VoxelMask cortex;
  vasc::VesselTree prebuilt;
  vasc::TerminalSet terminals;
};

inline Scenario shell_scenario(int n_terminals, int dims, double spacing, std::uint64_t seed,
                               double r1 = 1500.0, double r2 = 1500.0, double min_depth = 1500.0) {
  Scenario s;
  const auto ph = vasc::generate_phantom(vasc::Index3(dims, dims, dims), spacing, vasc::ShapeParams::sphere(),
                                         vasc::stream_seed(seed, 0));
  s.whole = ph.mask;
  vasc::ArteryParams ap;
  ap.min_depth = min_depth;
  const auto graph = vasc::synthesize_centerline(s.whole, ph.root, ap, vasc::stream_seed(seed, 1));
  s.prebuilt = vasc::preprocess_centerline(graph, {0, std::numeric_limits<double>::infinity(), 4});
  s.cortex = vasc::extract_cortex(s.whole, {r1, r2, ph.root});
  vasc::SamplingConfig sc;
  sc.n_terminals = n_terminals;
  sc.r_min_scale = 0.8;
  sc.seed = vasc::stream_seed(seed, 2);
  s.terminals = vasc::sample_terminals(s.cortex, sc).terminals;
  return s;
}

/// Hemodynamics with a fixed per-terminal flow.
inline vasc::HemoConfig hemo_for(std::size_t n_terminals, double terminal_flow = 3.89e6) {
  vasc::HemoConfig h;
  h.inlet_flow = terminal_flow * static_cast<double>(n_terminals);
  return h;
}

/// Random undirected graph; small integer radii produce many ties.
inline vasc::CenterlineGraph random_graph(std::mt19937_64& rng, int n, double p_edge) {
  vasc::CenterlineGraph g;
  for (int i = 0; i < n; ++i) g.add_node(i, random_point(rng, 100.0));
  std::bernoulli_distribution b(p_edge);
  std::uniform_int_distribution<int> r(1, 6);  // small integer radii produce many ties
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (b(rng)) g.add_edge(i, j, r(rng));
  return g;
}

// Random prebuilt tree with prebuilt nodes everywhere, as the preprocessing produces.
inline vasc::VesselTree random_prebuilt(std::mt19937_64& rng, int n) {
  vasc::VesselTree t = random_tree(rng, n);
  for (auto& nd : t.nodes()) {
    nd.kind = vasc::NodeKind::prebuilt;
    if (nd.radius <= 0) nd.radius = 20;
  }
  return t;
}

/// Exact all-pairs minimum distance.
inline double min_pair_distance(const std::vector<vasc::Vec3>& p) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j) best = std::min(best, (p[i] - p[j]).squaredNorm());
  return std::sqrt(best);
}

/// Small sphere-phantom pipeline configuration that runs in a few seconds.
inline std::string smoke_config(const std::string& out_dir, int n_terminals = 200, int iterations = 3,
                                std::uint64_t seed = 7) {
  return "seed = " + std::to_string(seed) + "\nout_dir = " + out_dir + "\nn_terminals = " + std::to_string(n_terminals) +
         "\nmax_depth = 100000\nphantom_dims = 64 64 64\nphantom_spacing = 150\nphantom_shape = sphere\n"
         "artery_min_depth = 1500\ncortex_r1 = 1500\ncortex_r2 = 1500\nrmin_k = 0.8\nmax_iterations = " +
         std::to_string(iterations) + "\nterminal_flow = 3.89e6\n";
}

/// Exact structural and numerical equality.
inline bool identical(const vasc::VesselTree& a, const vasc::VesselTree& b) {
  if (a.size() != b.size() || a.root() != b.root()) return false;
  for (NodeId i = 0; i < static_cast<NodeId>(a.size()); ++i) {
    const auto &x = a.node(i), &y = b.node(i);
    if (x.position != y.position || x.parent != y.parent || x.children != y.children || x.radius != y.radius ||
        x.flow != y.flow || x.kind != y.kind || x.alive != y.alive)
      return false;
  }
  return true;
}

}  // namespace vt

#endif  // VASC_TESTS_SUPPORT_HPP
