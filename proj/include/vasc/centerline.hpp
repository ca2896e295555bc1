/* SPDX-License-Identifier: Apache-2.0 */
#ifndef VASC_CENTERLINE_HPP
#define VASC_CENTERLINE_HPP

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "vasc/domain.hpp"
#include "vasc/tree.hpp"

namespace vasc {

/// Undirected skeleton graph. Nodes are stored densely in ascending source-id order.
struct CenterlineGraph {
  struct Edge {
    int a = 0;
    int b = 0;
    double radius = std::numeric_limits<double>::quiet_NaN();  // um, NaN when unknown
  };

  std::vector<std::int64_t> ids;
  std::vector<Vec3> positions;
  std::vector<Edge> edges;

  std::size_t node_count() const { return positions.size(); }
  /// Dense index of a source id, or -1.
  int index_of(std::int64_t id) const;
  int add_node(std::int64_t id, const Vec3& position);
  void add_edge(int a, int b, double radius = std::numeric_limits<double>::quiet_NaN());
  void check() const;
};

/// Edge radius = mean of the field at both endpoints.
CenterlineGraph assign_edge_radii(const CenterlineGraph& graph, const DistanceField& field);

/// Spanning forest of maximum total radius (Kruskal on weight = -radius). Ties are broken
/// by ascending (min endpoint, max endpoint).
CenterlineGraph minimum_spanning_tree(const CenterlineGraph& graph);

/// Component with the most nodes; ties go to the component holding the smallest node id.
CenterlineGraph largest_component(const CenterlineGraph& graph);

/// Directs an acyclic graph away from `root_id` (a source id). Only the root's component
/// is kept. All nodes become prebuilt; each node's tag is its source id.
VesselTree orient_from_root(const CenterlineGraph& graph, std::int64_t root_id);

/// Collapses single-child chains into straight edges with the length-weighted mean radius.
VesselTree remove_intermediate_nodes(const VesselTree& tree);

/// Keeps at most `max_children` children per node, preferring the longest downstream paths
/// (ties: ascending node id).
VesselTree degree_prune(const VesselTree& tree, int max_children = 4);

/// Keeps nodes whose path length from the root is <= max_distance.
VesselTree depth_prune(const VesselTree& tree, double max_distance);

struct PreprocessOptions {
  std::int64_t root_id = 0;
  double max_depth = std::numeric_limits<double>::infinity();
  int max_children = 4;
};

/// MST -> largest component -> orient -> chain removal -> degree prune -> depth prune ->
/// chain removal. Edge radii must already be assigned.
VesselTree preprocess_centerline(const CenterlineGraph& graph, const PreprocessOptions& options);

/// Synthetic large-artery skeleton for phantoms: a jittered branching tree grown from the
/// root that stays at least `min_depth` inside the organ, plus a small loop and a few spurs
/// so preprocessing has something to clean. Edge radii hold the generating radii.
struct ArteryParams {
  int generations = 4;
  double root_radius = 400.0;   // um
  double step = 150.0;          // um between skeleton samples
  double min_depth = 2000.0;    // um from the organ surface
  double branch_angle = 0.6;    // rad between child and parent direction
  int loops = 1;
  int spurs = 2;
};

CenterlineGraph synthesize_centerline(const VoxelMask& whole, const Vec3& root,
                                      const ArteryParams& params, std::uint64_t seed);

// Ingestion files: nodes `id,x,y,z[,radius]`, edges `id_a,id_b[,radius]`.
CenterlineGraph read_centerline(const std::string& nodes_path, const std::string& edges_path);
void write_centerline(const CenterlineGraph& graph, const std::string& nodes_path,
                      const std::string& edges_path);

}  // namespace vasc

#endif  // VASC_CENTERLINE_HPP
