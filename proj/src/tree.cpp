/* SPDX-License-Identifier: Apache-2.0 */
#include "vasc/tree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace vasc {

NodeId VesselTree::add_node(const Vec3& position, NodeKind kind) {
  Node n;
  n.position = position;
  n.kind = kind;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

void VesselTree::attach(NodeId child, NodeId parent) {
  Node& c = node(child);
  if (c.parent != kNoNode) throw Error("attach: node already has a parent");
  if (child == parent) throw Error("attach: self loop");
  c.parent = parent;
  node(parent).children.push_back(child);
}

void VesselTree::detach(NodeId child) {
  Node& c = node(child);
  if (c.parent == kNoNode) return;
  auto& siblings = node(c.parent).children;
  siblings.erase(std::find(siblings.begin(), siblings.end(), child));
  c.parent = kNoNode;
}

void VesselTree::remove(NodeId id) {
  Node& n = node(id);
  if (n.parent != kNoNode || !n.children.empty()) throw Error("remove: node is still connected");
  if (id == root_) throw Error("remove: cannot remove the root");
  n.alive = false;
}

std::vector<NodeId> VesselTree::compact() {
  std::vector<NodeId> remap(nodes_.size(), kNoNode);
  NodeId next = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].alive) remap[i] = next++;
  std::vector<Node> kept;
  kept.reserve(static_cast<std::size_t>(next));
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].alive) continue;
    Node n = std::move(nodes_[i]);
    if (n.parent != kNoNode) n.parent = remap[static_cast<std::size_t>(n.parent)];
    for (NodeId& c : n.children) c = remap[static_cast<std::size_t>(c)];
    kept.push_back(std::move(n));
  }
  nodes_ = std::move(kept);
  if (root_ != kNoNode) root_ = remap[static_cast<std::size_t>(root_)];
  return remap;
}

std::size_t VesselTree::live_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.alive; }));
}

std::size_t VesselTree::edge_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) {
    return n.alive && n.parent != kNoNode;
  }));
}

double VesselTree::edge_length(NodeId id) const {
  const Node& n = node(id);
  if (n.parent == kNoNode) return 0.0;
  return (n.position - node(n.parent).position).norm();
}

std::vector<NodeId> VesselTree::terminals() const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].alive && nodes_[i].kind == NodeKind::terminal) out.push_back(static_cast<NodeId>(i));
  return out;
}

std::vector<NodeId> VesselTree::topological_order() const {
  std::vector<NodeId> order;
  if (root_ == kNoNode) return order;
  std::vector<char> seen(nodes_.size(), 0);
  order.push_back(root_);
  seen[static_cast<std::size_t>(root_)] = 1;
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (NodeId c : node(order[head]).children) {
      if (seen[static_cast<std::size_t>(c)]) continue;  // malformed input; validate() reports it
      seen[static_cast<std::size_t>(c)] = 1;
      order.push_back(c);
    }
  }
  return order;
}

double VesselTree::root_radius() const {
  double s = 0.0;
  for (NodeId c : node(root_).children) s += std::pow(node(c).radius, 3);
  return std::cbrt(s);
}

void HemoConfig::check() const {
  if (!(viscosity > 0.0) || !(inlet_flow > 0.0) || !(inlet_pressure > 0.0))
    throw Error("hemodynamic parameters must be strictly positive");
}

// ---------------------------------------------------------------- propagation

void propagate_radii_murray(VesselTree& tree) {
  const auto order = tree.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node& n = tree.node(*it);
    if (*it == tree.root()) continue;
    if (n.children.empty()) {
      if (!(n.radius > 0.0) || !std::isfinite(n.radius))
        throw Error("leaf node " + std::to_string(*it) + " has no radius assigned");
      continue;
    }
    double cubes = 0.0;
    for (NodeId c : n.children) cubes += std::pow(tree.node(c).radius, 3);
    n.radius = std::cbrt(cubes);
  }
}

void propagate_flows(VesselTree& tree, const HemoConfig& config) {
  config.check();
  const auto order = tree.topological_order();
  std::vector<std::int64_t> downstream(tree.size(), 0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Node& n = tree.node(*it);
    if (n.children.empty()) {
      downstream[static_cast<std::size_t>(*it)] = n.kind == NodeKind::terminal ? 1 : 0;
      continue;
    }
    std::int64_t s = 0;
    for (NodeId c : n.children) s += downstream[static_cast<std::size_t>(c)];
    downstream[static_cast<std::size_t>(*it)] = s;
  }
  const std::int64_t total = downstream[static_cast<std::size_t>(tree.root())];
  if (total == 0) throw Error("cannot distribute flow: tree has no terminal nodes");
  const double q0 = config.inlet_flow;
  const double q_terminal = q0 / static_cast<double>(total);
  for (NodeId id : order) {
    if (id == tree.root()) continue;
    const std::int64_t n = downstream[static_cast<std::size_t>(id)];
    tree.node(id).flow = n == total ? q0 : q_terminal * static_cast<double>(n);
  }
}

std::vector<int> strahler_orders(const VesselTree& tree) {
  std::vector<int> order(tree.size(), -1);
  const auto topo = tree.topological_order();
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    const Node& n = tree.node(*it);
    if (n.children.empty()) {
      order[static_cast<std::size_t>(*it)] = 0;
      continue;
    }
    int best = -1, ties = 0;
    for (NodeId c : n.children) {
      const int o = order[static_cast<std::size_t>(c)];
      if (o > best) {
        best = o;
        ties = 1;
      } else if (o == best) {
        ++ties;
      }
    }
    order[static_cast<std::size_t>(*it)] = ties >= 2 ? best + 1 : best;
  }
  if (tree.root() != kNoNode) order[static_cast<std::size_t>(tree.root())] = -1;
  return order;
}

double poiseuille_drop(double viscosity, double length, double flow, double radius) {
  if (!(radius > 0.0)) throw Error("Poiseuille drop needs a positive radius");
  const double r2 = radius * radius;
  return 8.0 * viscosity * length * flow / (units::kPi * r2 * r2);
}

std::vector<double> compute_pressures(const VesselTree& tree, const HemoConfig& config) {
  config.check();
  std::vector<double> p(tree.size(), std::numeric_limits<double>::quiet_NaN());
  const auto order = tree.topological_order();
  for (NodeId id : order) {
    const Node& n = tree.node(id);
    if (id == tree.root()) {
      p[static_cast<std::size_t>(id)] = config.inlet_pressure;
      continue;
    }
    if (!(n.radius > 0.0)) throw Error("nonpositive radius on edge into node " + std::to_string(id));
    p[static_cast<std::size_t>(id)] =
        p[static_cast<std::size_t>(n.parent)] -
        poiseuille_drop(config.viscosity, tree.edge_length(id), n.flow, n.radius);
  }
  return p;
}

// ---------------------------------------------------------------- validation

std::vector<Violation> validate(const VesselTree& tree, const ValidateOptions& options) {
  std::vector<Violation> out;
  auto report = [&](std::string code, NodeId id, std::string msg) {
    out.push_back({std::move(code), id, std::move(msg)});
  };
  const NodeId root = tree.root();
  const auto n = static_cast<NodeId>(tree.size());
  if (root == kNoNode || root >= n || !tree.node(root).alive) {
    report("root", root, "tree has no valid root");
    return out;
  }
  if (tree.node(root).parent != kNoNode) report("root", root, "root has a parent edge");

  for (NodeId id = 0; id < n; ++id) {
    const Node& nd = tree.node(id);
    if (!nd.alive) continue;
    if (!nd.position.allFinite()) report("position", id, "non-finite position");
    if (nd.parent != kNoNode) {
      if (nd.parent < 0 || nd.parent >= n || !tree.node(nd.parent).alive) {
        report("parent", id, "parent is missing or removed");
      } else {
        const auto& sib = tree.node(nd.parent).children;
        if (std::count(sib.begin(), sib.end(), id) != 1)
          report("parent", id, "parent does not list this node exactly once as a child");
      }
    } else if (id != root) {
      report("orphan", id, "non-root node without parent");
    }
    for (NodeId c : nd.children) {
      if (c < 0 || c >= n || !tree.node(c).alive || tree.node(c).parent != id)
        report("child", id, "child " + std::to_string(c) + " does not point back to this node");
    }
    if (nd.kind == NodeKind::terminal && !nd.children.empty())
      report("terminal", id, "terminal node has children");
    if (id != root && nd.parent != kNoNode && (!(nd.radius > 0.0) || !std::isfinite(nd.radius)))
      report("radius", id, "edge into node " + std::to_string(id) + " has nonpositive radius");
  }

  // Reachability and cycles: walk children from the root and count visits.
  std::vector<int> visits(tree.size(), 0);
  std::vector<NodeId> stack{root};
  bool cycle = false;
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    if (++visits[static_cast<std::size_t>(id)] > 1) {
      if (!cycle) report("cycle", id, "node reached twice from the root");
      cycle = true;
      continue;
    }
    for (NodeId c : tree.node(id).children)
      if (c >= 0 && c < n) stack.push_back(c);
  }
  for (NodeId id = 0; id < n; ++id)
    if (tree.node(id).alive && visits[static_cast<std::size_t>(id)] == 0)
      report("unreachable", id, "node not reachable from the root");

  if (!options.hemodynamics || !out.empty()) return out;

  const double tol = options.relative_tolerance;
  for (NodeId id = 0; id < n; ++id) {
    const Node& nd = tree.node(id);
    if (!nd.alive || id == root) continue;
    if (!(nd.flow > 0.0)) report("flow", id, "edge into node " + std::to_string(id) + " has nonpositive flow");
    if (nd.children.empty()) continue;
    double q = 0.0, r3 = 0.0;
    for (NodeId c : nd.children) {
      q += tree.node(c).flow;
      r3 += std::pow(tree.node(c).radius, 3);
    }
    if (std::abs(nd.flow - q) > tol * nd.flow)
      report("kirchhoff", id, "flow not conserved at node " + std::to_string(id));
    const double rp3 = std::pow(nd.radius, 3);
    if (std::abs(rp3 - r3) > tol * rp3)
      report("murray", id, "Murray's law violated at node " + std::to_string(id));
  }
  return out;
}

}  // namespace vasc
