/* SPDX-License-Identifier: Apache-2.0 */
#include "vasc/centerline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <Eigen/Geometry>

#include "vasc/text.hpp"

namespace vasc {

// ---------------------------------------------------------------- graph basics

int CenterlineGraph::index_of(std::int64_t id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return -1;
  return static_cast<int>(it - ids.begin());
}

int CenterlineGraph::add_node(std::int64_t id, const Vec3& position) {
  if (!ids.empty() && id <= ids.back()) throw Error("centerline node ids must be added in ascending order");
  ids.push_back(id);
  positions.push_back(position);
  return static_cast<int>(ids.size() - 1);
}

void CenterlineGraph::add_edge(int a, int b, double radius) {
  const int n = static_cast<int>(node_count());
  if (a < 0 || b < 0 || a >= n || b >= n) throw Error("centerline edge references unknown node");
  if (a == b) throw Error("centerline graph cannot contain self loops");
  edges.push_back({a, b, radius});
}

void CenterlineGraph::check() const {
  for (const Vec3& p : positions)
    if (!p.allFinite()) throw Error("centerline node position is not finite");
  for (const Edge& e : edges)
    if (e.a == e.b) throw Error("centerline graph cannot contain self loops");
}

namespace {

struct DisjointSet {
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
    return true;
  }
  std::vector<int> parent;
};

}  // namespace

CenterlineGraph assign_edge_radii(const CenterlineGraph& graph, const DistanceField& field) {
  CenterlineGraph out = graph;
  for (auto& e : out.edges) {
    const auto ia = field.grid.locate(graph.positions[static_cast<std::size_t>(e.a)]);
    const auto ib = field.grid.locate(graph.positions[static_cast<std::size_t>(e.b)]);
    if (!ia || !ib)
      throw Error("centerline node " + std::to_string(graph.ids[static_cast<std::size_t>(!ia ? e.a : e.b)]) +
                  " lies outside the distance field");
    e.radius = 0.5 * (field.at(ia->x(), ia->y(), ia->z()) + field.at(ib->x(), ib->y(), ib->z()));
  }
  return out;
}

CenterlineGraph minimum_spanning_tree(const CenterlineGraph& graph) {
  std::vector<std::size_t> order(graph.edges.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) {
    const auto& e = graph.edges[i];
    return std::make_pair(std::min(e.a, e.b), std::max(e.a, e.b));
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const double rx = graph.edges[x].radius, ry = graph.edges[y].radius;
    if (std::isnan(rx) || std::isnan(ry)) throw Error("minimum spanning tree needs assigned edge radii");
    if (rx != ry) return rx > ry;  // weight = -radius, ascending
    return key(x) < key(y);
  });
  CenterlineGraph out = graph;
  out.edges.clear();
  DisjointSet ds(graph.node_count());
  for (std::size_t i : order) {
    const auto& e = graph.edges[i];
    if (ds.unite(e.a, e.b)) out.edges.push_back(e);
  }
  return out;
}

CenterlineGraph largest_component(const CenterlineGraph& graph) {
  if (graph.node_count() == 0) throw Error("largest component of an empty graph");
  DisjointSet ds(graph.node_count());
  for (const auto& e : graph.edges) ds.unite(e.a, e.b);
  // Roots are the smallest index in each component, so scanning indices ascending and
  // keeping strictly larger sizes applies the smallest-id tie-break.
  std::vector<std::size_t> size(graph.node_count(), 0);
  for (std::size_t i = 0; i < graph.node_count(); ++i) ++size[static_cast<std::size_t>(ds.find(static_cast<int>(i)))];
  int best = -1;
  for (std::size_t i = 0; i < graph.node_count(); ++i)
    if (ds.find(static_cast<int>(i)) == static_cast<int>(i) &&
        (best < 0 || size[i] > size[static_cast<std::size_t>(best)]))
      best = static_cast<int>(i);

  CenterlineGraph out;
  std::vector<int> remap(graph.node_count(), -1);
  for (std::size_t i = 0; i < graph.node_count(); ++i)
    if (ds.find(static_cast<int>(i)) == best) remap[i] = out.add_node(graph.ids[i], graph.positions[i]);
  for (const auto& e : graph.edges)
    if (remap[static_cast<std::size_t>(e.a)] >= 0)
      out.add_edge(remap[static_cast<std::size_t>(e.a)], remap[static_cast<std::size_t>(e.b)], e.radius);
  return out;
}

// ---------------------------------------------------------------- orientation

VesselTree orient_from_root(const CenterlineGraph& graph, std::int64_t root_id) {
  const int root = graph.index_of(root_id);
  if (root < 0) throw Error("root id " + std::to_string(root_id) + " is not in the centerline graph");
  std::vector<std::vector<std::pair<int, std::size_t>>> adj(graph.node_count());
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    const auto& e = graph.edges[i];
    adj[static_cast<std::size_t>(e.a)].push_back({e.b, i});
    adj[static_cast<std::size_t>(e.b)].push_back({e.a, i});
  }
  // Depth-first search from the root; meeting a visited node through a different edge is a cycle.
  std::vector<int> parent(graph.node_count(), -2);
  std::vector<std::size_t> parent_edge(graph.node_count(), 0);
  std::vector<int> stack{root};
  parent[static_cast<std::size_t>(root)] = -1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (auto [w, ei] : adj[static_cast<std::size_t>(v)]) {
      if (parent[static_cast<std::size_t>(v)] >= 0 && ei == parent_edge[static_cast<std::size_t>(v)]) continue;
      if (parent[static_cast<std::size_t>(w)] != -2) throw Error("centerline graph contains a cycle; run the spanning tree first");
      parent[static_cast<std::size_t>(w)] = v;
      parent_edge[static_cast<std::size_t>(w)] = ei;
      stack.push_back(w);
    }
  }

  VesselTree tree;
  std::vector<NodeId> remap(graph.node_count(), kNoNode);
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    if (parent[i] == -2) continue;
    remap[i] = tree.add_node(graph.positions[i], NodeKind::prebuilt);
    tree.node(remap[i]).tag = graph.ids[i];
  }
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    if (parent[i] < 0) continue;
    tree.attach(remap[i], remap[static_cast<std::size_t>(parent[i])]);
    tree.node(remap[i]).radius = graph.edges[parent_edge[i]].radius;
  }
  tree.set_root(remap[static_cast<std::size_t>(root)]);
  return tree;
}

// ---------------------------------------------------------------- tree cleanup

namespace {

// Removes every node flagged in `drop` together with its incoming edge, then compacts.
// Flagged nodes must form complete subtrees.
VesselTree drop_subtrees(VesselTree tree, const std::vector<char>& drop) {
  const auto order = tree.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!drop[static_cast<std::size_t>(*it)]) continue;
    tree.detach(*it);
    tree.remove(*it);
  }
  tree.compact();
  return tree;
}

}  // namespace

VesselTree remove_intermediate_nodes(const VesselTree& input) {
  VesselTree tree = input;
  // Cumulative centerline length represented by each incoming edge.
  std::vector<double> chain_length(tree.size());
  for (std::size_t i = 0; i < tree.size(); ++i) chain_length[i] = tree.edge_length(static_cast<NodeId>(i));

  for (NodeId v : tree.topological_order()) {
    Node& nv = tree.node(v);
    if (v == tree.root() || nv.children.size() != 1) continue;
    const NodeId c = nv.children.front();
    const NodeId p = nv.parent;
    const double l1 = chain_length[static_cast<std::size_t>(v)];
    const double l2 = chain_length[static_cast<std::size_t>(c)];
    const double r1 = nv.radius, r2 = tree.node(c).radius;
    const double r = (l1 + l2) > 0.0 ? (r1 * l1 + r2 * l2) / (l1 + l2) : 0.5 * (r1 + r2);
    tree.detach(c);
    tree.detach(v);
    tree.remove(v);
    tree.attach(c, p);
    tree.node(c).radius = r;
    chain_length[static_cast<std::size_t>(c)] = l1 + l2;
  }
  tree.compact();
  return tree;
}

VesselTree degree_prune(const VesselTree& tree, int max_children) {
  if (max_children < 0) throw Error("max_children must be >= 0");
  const auto order = tree.topological_order();
  std::vector<double> longest(tree.size(), 0.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    for (NodeId c : tree.node(*it).children)
      longest[static_cast<std::size_t>(*it)] = std::max(
          longest[static_cast<std::size_t>(*it)], tree.edge_length(c) + longest[static_cast<std::size_t>(c)]);

  std::vector<char> drop(tree.size(), 0);
  for (NodeId v : order) {
    if (drop[static_cast<std::size_t>(v)]) {
      for (NodeId c : tree.node(v).children) drop[static_cast<std::size_t>(c)] = 1;
      continue;
    }
    std::vector<NodeId> kids = tree.node(v).children;
    if (static_cast<int>(kids.size()) <= max_children) continue;
    auto score = [&](NodeId c) { return tree.edge_length(c) + longest[static_cast<std::size_t>(c)]; };
    std::sort(kids.begin(), kids.end(), [&](NodeId a, NodeId b) {
      const double sa = score(a), sb = score(b);
      return sa != sb ? sa > sb : a < b;
    });
    for (std::size_t i = static_cast<std::size_t>(max_children); i < kids.size(); ++i)
      drop[static_cast<std::size_t>(kids[i])] = 1;
  }
  return drop_subtrees(tree, drop);
}

VesselTree depth_prune(const VesselTree& tree, double max_distance) {
  if (!(max_distance >= 0.0)) throw Error("max depth must be >= 0");
  std::vector<double> dist(tree.size(), 0.0);
  std::vector<char> drop(tree.size(), 0);
  for (NodeId v : tree.topological_order()) {
    const Node& n = tree.node(v);
    if (n.parent == kNoNode) continue;
    dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(n.parent)] + tree.edge_length(v);
    if (dist[static_cast<std::size_t>(v)] > max_distance || drop[static_cast<std::size_t>(n.parent)])
      drop[static_cast<std::size_t>(v)] = 1;
  }
  return drop_subtrees(tree, drop);
}

VesselTree preprocess_centerline(const CenterlineGraph& graph, const PreprocessOptions& options) {
  graph.check();
  const CenterlineGraph forest = minimum_spanning_tree(graph);
  const CenterlineGraph main = largest_component(forest);
  if (main.index_of(options.root_id) < 0)
    throw Error("root id " + std::to_string(options.root_id) + " is not in the largest centerline component");
  VesselTree tree = orient_from_root(main, options.root_id);
  tree = remove_intermediate_nodes(tree);
  tree = degree_prune(tree, options.max_children);
  tree = depth_prune(tree, options.max_depth);
  return remove_intermediate_nodes(tree);
}

// ---------------------------------------------------------------- synthetic skeleton

CenterlineGraph synthesize_centerline(const VoxelMask& whole, const Vec3& root,
                                      const ArteryParams& params, std::uint64_t seed) {
  if (!whole.contains_point(root)) throw Error("artery root must lie inside the organ mask");
  if (!(params.step > 0.0) || !(params.root_radius > 0.0)) throw Error("artery step and radius must be > 0");
  const DistanceField depth = distance_transform(whole);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto random_unit = [&] {
    Vec3 v(gauss(rng), gauss(rng), gauss(rng));
    return v.norm() > 1e-12 ? Vec3(v.normalized()) : Vec3(Vec3::UnitX());
  };
  auto depth_at = [&](const Vec3& p) {
    auto idx = depth.grid.locate(p);
    return idx ? depth.at(idx->x(), idx->y(), idx->z()) : 0.0;
  };

  // Aim at the centroid of the organ.
  Vec3 centroid = Vec3::Zero();
  std::size_t count = 0;
  const GridGeometry& g = whole.grid();
  for (int k = 0; k < g.dims.z(); ++k)
    for (int j = 0; j < g.dims.y(); ++j)
      for (int i = 0; i < g.dims.x(); ++i)
        if (whole.at(i, j, k)) {
          centroid += g.center(i, j, k);
          ++count;
        }
  centroid /= static_cast<double>(count);

  struct Pending {
    int from;
    Vec3 dir;
    double radius;
    int generation;
    int branch;  // index of the first-generation branch this belongs to
  };
  std::vector<Vec3> pos{root};
  std::vector<int> branch_of{-1};
  std::vector<std::pair<int, int>> links;
  std::vector<double> link_radius;
  std::vector<std::vector<int>> chains;  // node indices per grown segment

  const double trunk_length = 0.6 * (centroid - root).norm();
  std::vector<Pending> queue{{0, (centroid - root).normalized(), params.root_radius, 0, -1}};
  int next_branch = 0;
  for (std::size_t q = 0; q < queue.size(); ++q) {
    Pending seg = queue[q];
    const double target = trunk_length * std::pow(0.7, seg.generation);
    int cur = seg.from;
    Vec3 dir = seg.dir;
    double grown = 0.0;
    std::vector<int> chain{cur};
    while (grown < target) {
      dir = (dir + 0.15 * random_unit()).normalized();
      const Vec3 next = pos[static_cast<std::size_t>(cur)] + params.step * dir;
      // Shallow points are only allowed while the vessel is still heading inward.
      const double d_next = depth_at(next);
      if (!whole.contains_point(next) ||
          (d_next < params.min_depth && d_next <= depth_at(pos[static_cast<std::size_t>(cur)])))
        break;
      pos.push_back(next);
      branch_of.push_back(seg.branch);
      const int id = static_cast<int>(pos.size() - 1);
      links.emplace_back(cur, id);
      link_radius.push_back(seg.radius);
      chain.push_back(id);
      cur = id;
      grown += params.step;
    }
    if (chain.size() > 2) chains.push_back(chain);
    if (cur == seg.from || seg.generation + 1 >= params.generations) continue;
    // Two children rotated symmetrically about a random axis perpendicular to the parent.
    Vec3 axis = dir.cross(random_unit());
    if (axis.norm() < 1e-9) axis = dir.unitOrthogonal();
    axis.normalize();
    for (int side = 0; side < 2; ++side) {
      const double angle = (side == 0 ? 1.0 : -1.0) * params.branch_angle * (0.8 + 0.4 * unif(rng));
      const Vec3 child_dir = Eigen::AngleAxisd(angle, axis) * dir;
      const double child_r = seg.radius * std::cbrt(0.5) * (0.9 + 0.2 * unif(rng));
      const int branch = seg.generation == 0 ? next_branch++ : seg.branch;
      queue.push_back({cur, child_dir, child_r, seg.generation + 1, branch});
    }
  }
  for (std::size_t i = 0; i < pos.size(); ++i)
    if (branch_of[i] < 0 && i > 0) branch_of[i] = -1;

  // Loop: closest pair of nodes from different first-generation branches.
  for (int l = 0; l < params.loops; ++l) {
    double best = std::numeric_limits<double>::infinity();
    std::pair<int, int> pick{-1, -1};
    for (std::size_t a = 0; a < pos.size(); ++a)
      for (std::size_t b = a + 1; b < pos.size(); ++b) {
        if (branch_of[a] < 0 || branch_of[b] < 0 || branch_of[a] == branch_of[b]) continue;
        const double d = (pos[a] - pos[b]).norm();
        bool taken = false;
        for (const auto& lk : links)
          if ((lk.first == static_cast<int>(a) && lk.second == static_cast<int>(b)) ||
              (lk.first == static_cast<int>(b) && lk.second == static_cast<int>(a)))
            taken = true;
        if (!taken && d < best) {
          best = d;
          pick = {static_cast<int>(a), static_cast<int>(b)};
        }
      }
    if (pick.first < 0) break;
    links.push_back(pick);
    link_radius.push_back(0.3 * params.root_radius * std::pow(0.5, params.generations / 3.0));
  }

  // Spurs: one-sample side stubs off random chain interiors.
  for (int s = 0; s < params.spurs && !chains.empty(); ++s) {
    const auto& chain = chains[static_cast<std::size_t>(unif(rng) * static_cast<double>(chains.size())) % chains.size()];
    const int at = chain[1 + static_cast<std::size_t>(unif(rng) * static_cast<double>(chain.size() - 2)) % (chain.size() - 2)];
    const Vec3 tip = pos[static_cast<std::size_t>(at)] + params.step * random_unit();
    if (!whole.contains_point(tip)) continue;
    pos.push_back(tip);
    branch_of.push_back(-1);
    links.emplace_back(at, static_cast<int>(pos.size() - 1));
    link_radius.push_back(0.5 * link_radius[static_cast<std::size_t>(at > 0 ? at - 1 : 0)]);
  }

  CenterlineGraph graph;
  for (std::size_t i = 0; i < pos.size(); ++i) graph.add_node(static_cast<std::int64_t>(i), pos[i]);
  for (std::size_t i = 0; i < links.size(); ++i) graph.add_edge(links[i].first, links[i].second, link_radius[i]);
  return graph;
}

// ---------------------------------------------------------------- files

CenterlineGraph read_centerline(const std::string& nodes_path, const std::string& edges_path) {
  const auto nt = text::read_csv(nodes_path);
  const auto et = text::read_csv(edges_path);
  const int cid = nt.column("id"), cx = nt.column("x"), cy = nt.column("y"), cz = nt.column("z"),
            cr = nt.column("radius");
  if (cid < 0 || cx < 0 || cy < 0 || cz < 0) throw Error(nodes_path + ": expected header id,x,y,z[,radius]");
  const int ca = et.column("id_a"), cb = et.column("id_b"), cer = et.column("radius");
  if (ca < 0 || cb < 0) throw Error(edges_path + ": expected header id_a,id_b[,radius]");

  std::map<std::int64_t, std::pair<Vec3, double>> nodes;
  for (const auto& r : nt.rows) {
    const auto id = text::parse_or_throw<std::int64_t>(r[cid], nodes_path);
    const Vec3 p(text::parse_or_throw<double>(r[cx], nodes_path), text::parse_or_throw<double>(r[cy], nodes_path),
                 text::parse_or_throw<double>(r[cz], nodes_path));
    double radius = std::numeric_limits<double>::quiet_NaN();
    if (cr >= 0 && !r[cr].empty()) radius = text::parse_or_throw<double>(r[cr], nodes_path);
    if (!nodes.emplace(id, std::make_pair(p, radius)).second)
      throw Error(nodes_path + ": duplicate node id " + std::to_string(id));
  }
  CenterlineGraph g;
  std::vector<double> node_radius;
  for (const auto& [id, v] : nodes) {
    g.add_node(id, v.first);
    node_radius.push_back(v.second);
  }
  for (const auto& r : et.rows) {
    const int a = g.index_of(text::parse_or_throw<std::int64_t>(r[ca], edges_path));
    const int b = g.index_of(text::parse_or_throw<std::int64_t>(r[cb], edges_path));
    if (a < 0 || b < 0) throw Error(edges_path + ": edge references unknown node id");
    double radius = std::numeric_limits<double>::quiet_NaN();
    if (cer >= 0 && !r[cer].empty()) {
      radius = text::parse_or_throw<double>(r[cer], edges_path);
    } else {
      // Fall back to the mean of the endpoint radii when nodes carry them.
      radius = 0.5 * (node_radius[static_cast<std::size_t>(a)] + node_radius[static_cast<std::size_t>(b)]);
    }
    g.add_edge(a, b, radius);
  }
  g.check();
  return g;
}

void write_centerline(const CenterlineGraph& graph, const std::string& nodes_path,
                      const std::string& edges_path) {
  using text::format_double;
  auto ns = text::open_output(nodes_path);
  ns << "id,x,y,z\n";
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const Vec3& p = graph.positions[i];
    ns << graph.ids[i] << ',' << format_double(p.x()) << ',' << format_double(p.y()) << ','
       << format_double(p.z()) << '\n';
  }
  auto es = text::open_output(edges_path);
  es << "id_a,id_b,radius\n";
  for (const auto& e : graph.edges) {
    es << graph.ids[static_cast<std::size_t>(e.a)] << ',' << graph.ids[static_cast<std::size_t>(e.b)] << ',';
    if (!std::isnan(e.radius)) es << format_double(e.radius);
    es << '\n';
  }
  if (!ns || !es) throw Error("failed writing centerline files");
}

}  // namespace vasc
