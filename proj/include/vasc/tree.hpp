/* SPDX-License-Identifier: Apache-2.0 */
#ifndef VASC_TREE_HPP
#define VASC_TREE_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vasc/common.hpp"

namespace vasc {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

/// Prebuilt nodes (including the root) come from the image prior and are never moved;
/// terminals are the sampled afferent arteriole ends; intermediates are created by
/// the optimizer.
enum class NodeKind : std::uint8_t { prebuilt, terminal, intermediate };

/// A node plus the vessel (edge) that feeds it. Every non-root node owns exactly one
/// incoming edge, so edges are identified by their child node.
struct Node {
  Vec3 position = Vec3::Zero();
  NodeKind kind = NodeKind::intermediate;
  NodeId parent = kNoNode;
  std::vector<NodeId> children;
  double radius = 0.0;  // incoming edge, um
  double flow = 0.0;    // incoming edge, um^3/s
  /// Caller-defined identifier carried through compaction (e.g. a source graph id).
  std::int64_t tag = -1;
  bool alive = true;
};

/// Rooted directed tree of straight cylindrical vessels. Ids are dense after
/// `compact()`; every pass iterates in ascending id order.
class VesselTree {
 public:
  VesselTree() = default;

  NodeId add_node(const Vec3& position, NodeKind kind);
  /// Adds `child` below `parent`; `child` must currently be detached.
  void attach(NodeId child, NodeId parent);
  void detach(NodeId child);
  /// Marks a detached, childless node as removed. Call `compact()` to renumber.
  void remove(NodeId id);
  /// Drops removed nodes, preserving relative order. Returns old id -> new id (or kNoNode).
  std::vector<NodeId> compact();

  void set_root(NodeId id) { root_ = id; }
  NodeId root() const { return root_; }

  std::size_t size() const { return nodes_.size(); }
  std::size_t live_count() const;
  /// Number of edges among live nodes (live non-root nodes with a parent).
  std::size_t edge_count() const;

  Node& node(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::span<Node> nodes() { return nodes_; }
  std::span<const Node> nodes() const { return nodes_; }

  bool is_leaf(NodeId id) const { return node(id).children.empty(); }
  bool is_fixed(NodeId id) const { return node(id).kind != NodeKind::intermediate; }
  /// Length of the edge entering `id`.
  double edge_length(NodeId id) const;
  /// Live terminal ids, ascending.
  std::vector<NodeId> terminals() const;
  /// Live node ids in an order where every parent precedes its children.
  std::vector<NodeId> topological_order() const;
  /// Cube root of the summed cubed radii of the root's child edges.
  double root_radius() const;

 private:
  std::vector<Node> nodes_;
  NodeId root_ = kNoNode;
};

/// Blood and boundary-condition parameters in internal units.
struct HemoConfig {
  double viscosity = 3.6e-15;                                 // N s / um^2
  double inlet_flow = units::ml_per_min_to_internal(7.0);      // um^3 / s
  double inlet_pressure = units::mmhg_to_internal(100.0);      // N / um^2

  void check() const;
};

/// Murray's law, leaf to root: every internal edge gets r = cbrt(sum of child r^3).
/// Leaf radii are inputs and must be > 0.
void propagate_radii_murray(VesselTree& tree);

/// Kirchhoff's rule with equal terminal flows: each terminal edge carries Q0 / N.
void propagate_flows(VesselTree& tree, const HemoConfig& config);

/// Strahler order of the edge entering each node (root and dead nodes get -1).
std::vector<int> strahler_orders(const VesselTree& tree);

/// Hagen-Poiseuille pressure drop along one vessel.
double poiseuille_drop(double viscosity, double length, double flow, double radius);

/// Node pressures (N/um^2) from a breadth-first sweep starting at the inlet pressure.
std::vector<double> compute_pressures(const VesselTree& tree, const HemoConfig& config);

struct Violation {
  std::string code;  // machine-readable kind, e.g. "cycle", "radius", "murray", "kirchhoff"
  NodeId node = kNoNode;
  std::string message;
};

struct ValidateOptions {
  /// Check positive flows, flow conservation and Murray consistency.
  bool hemodynamics = true;
  double relative_tolerance = 1e-9;
};

std::vector<Violation> validate(const VesselTree& tree, const ValidateOptions& options = {});

// Tree file pair: <prefix>_nodes.csv (id,x,y,z,is_terminal) and <prefix>_edges.csv
// (id,parent_node,child_node,radius,flow,strahler). Node ids are written densely.
void write_tree(const VesselTree& tree, const std::string& prefix);
/// Reads a tree pair. Non-terminal nodes get `default_kind`.
VesselTree read_tree(const std::string& prefix, NodeKind default_kind = NodeKind::prebuilt);
/// Legacy ASCII polydata with per-segment radius, flow, strahler and pressure (mmHg).
void write_vtk(const VesselTree& tree, const HemoConfig& config, const std::string& path);

}  // namespace vasc

#endif  // VASC_TREE_HPP
