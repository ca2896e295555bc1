/* SPDX-License-Identifier: Apache-2.0 */
#ifndef VASC_GCO_HPP
#define VASC_GCO_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vasc/cost.hpp"
#include "vasc/sampling.hpp"
#include "vasc/tree.hpp"

namespace vasc {

struct GcoConfig {
  double w_c = 5e-8;            // N / (um^2 s)
  double w_p = 1.0;
  double viscosity_mu = 3.6e-15;  // N s / um^2
  double merge_ratio_threshold = 0.2;
  double merge_abs_epsilon = 1.0;  // um
  /// Strahler threshold used by the prune after iteration i (last entry repeats).
  std::vector<int> prune_order_schedule{2, 2, 1, 1, 1};
  int max_iterations = 5;
  /// Relaxation stops once |grad| <= relax_tolerance * (sum of incident cost coefficients).
  double relax_tolerance = 1e-8;
  int relax_max_steps = 100;
  double min_edge_epsilon = 1e-6;  // um
  /// Relative cost improvement below which the relax/merge/split loop stops.
  double inner_tolerance = 1e-4;
  int inner_max_steps = 10;
  /// Relative change between iterations below which the outer loop stops.
  double convergence_tolerance = 1e-4;
  /// Attach terminals to any prebuilt node instead of prebuilt leaves only.
  bool attach_to_all_prebuilt = false;
  /// Relax independent prebuilt subtrees on worker threads (same result as sequential).
  bool parallel_subtrees = false;
  std::uint64_t seed = 0;

  CostWeights weights() const { return {w_c, w_p, viscosity_mu}; }
  void check() const;
};

/// Terminal node id -> prebuilt node it was attached to at initialization.
struct SubtreeAssignment {
  std::vector<NodeId> terminals;  // ascending
  std::vector<NodeId> anchors;

  NodeId anchor_of(NodeId terminal) const;
};

struct GcoState {
  VesselTree tree;
  SubtreeAssignment assignment;
};

/// Prebuilt nodes keep ids 0..P-1 (after unused branches are trimmed), terminals follow
/// in input order. Each terminal hangs from its nearest prebuilt leaf (ties: lower id).
GcoState initialize(const VesselTree& prebuilt, const TerminalSet& terminals, const GcoConfig& config,
                    const HemoConfig& hemo);

/// Sum of all node-local costs; every vessel is counted at both of its endpoints.
double global_cost(const VesselTree& tree, const GcoConfig& config);

std::vector<EdgeTerm<double>> incident_terms(const VesselTree& tree, NodeId v);
double node_local_cost(const VesselTree& tree, NodeId v, const GcoConfig& config);
Vec3 node_local_cost_gradient(const VesselTree& tree, NodeId v, const GcoConfig& config);

struct StarOptions {
  double tolerance = 1e-8;  // relative to the coefficient sum
  int max_steps = 100;
  double epsilon = 1e-6;
};

struct StarResult {
  Vec3 position = Vec3::Zero();
  double cost = 0.0;
  int steps = 0;
  bool converged = false;
  bool line_search_failed = false;
  /// Index of the anchor the minimum sits on, or -1 when it is off every anchor.
  int anchor = -1;
};

/// Minimizes sum_i coefs[i] * |x - anchors[i]| by BFGS with Armijo backtracking. Minima
/// on an anchor are detected up front by the subgradient condition. The result never
/// costs more than `start`.
StarResult minimize_star(std::span<const Vec3> anchors, std::span<const double> coefs, const Vec3& start,
                         const StarOptions& options);

struct RelaxResult {
  double cost_before = 0.0;
  double cost_after = 0.0;
  bool line_search_failed = false;
};

/// Moves an intermediate node to the minimizer of its local cost.
RelaxResult relax_node(VesselTree& tree, NodeId v, const GcoConfig& config);

struct PassStats {
  int changed = 0;
  int failures = 0;
};

PassStats relax_pass(VesselTree& tree, const GcoConfig& config);
PassStats merge_pass(VesselTree& tree, const GcoConfig& config, const HemoConfig& hemo);

struct SplitCandidate {
  std::vector<NodeId> subset;  // ascending
  Vec3 position = Vec3::Zero();
  /// Cost change of the star at v (negative = improvement).
  double delta = 0.0;
};

/// Pair-cost memo reused while repeatedly splitting the same node.
using SplitCache = std::map<std::pair<NodeId, NodeId>, SplitCandidate>;

/// Greedy subset search at v: best child pair first, then the best single additions while
/// they lower the cost. Returns the candidate only when it lowers the cost.
std::optional<SplitCandidate> best_split(const VesselTree& tree, NodeId v, const GcoConfig& config,
                                         SplitCache* cache = nullptr);

/// Applies `best_split` once. Returns the new node id, or kNoNode when nothing changed.
NodeId split_node(VesselTree& tree, NodeId v, const GcoConfig& config, SplitCache* cache = nullptr);

PassStats split_pass(VesselTree& tree, const GcoConfig& config, const HemoConfig& hemo);

/// Cuts every non-prebuilt edge of Strahler order below `order_threshold` and reattaches
/// each orphaned terminal to the nearest surviving node inside its assigned subtree.
PassStats prune_and_reconnect(VesselTree& tree, const SubtreeAssignment& assignment, int order_threshold,
                              const GcoConfig& config, const HemoConfig& hemo);

struct TraceRecord {
  int iteration = 0;
  std::string phase;  // init, relax, merge, split, prune
  double cost = 0.0;
  std::size_t nodes = 0;
  std::size_t edges = 0;
};

struct GcoResult {
  VesselTree tree;
  SubtreeAssignment assignment;
  std::vector<TraceRecord> trace;
  int relax_failures = 0;
  /// Set when a pass threw; the tree is the last consistent state.
  std::optional<std::string> error;
};

GcoResult run(const VesselTree& prebuilt, const TerminalSet& terminals, const GcoConfig& config,
              const HemoConfig& hemo);

/// CSV `iteration,phase,cost,nodes,edges`.
void write_trace(const std::vector<TraceRecord>& trace, const std::string& path);
std::vector<TraceRecord> read_trace(const std::string& path);

}  // namespace vasc

#endif  // VASC_GCO_HPP
