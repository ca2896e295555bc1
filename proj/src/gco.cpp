/* SPDX-License-Identifier: Apache-2.0 */
#include "vasc/gco.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include <Eigen/Dense>

#include "vasc/text.hpp"

namespace vasc {

void GcoConfig::check() const {
  if (!(w_c >= 0.0) || !(w_p >= 0.0) || (w_c == 0.0 && w_p == 0.0))
    throw ConfigError("w_c and w_p must be >= 0 and not both zero");
  if (!(viscosity_mu > 0.0)) throw ConfigError("viscosity_mu must be > 0");
  if (!(merge_ratio_threshold > 0.0)) throw ConfigError("merge_ratio_threshold must be > 0");
  if (!(merge_abs_epsilon > 0.0)) throw ConfigError("merge_abs_epsilon must be > 0");
  if (prune_order_schedule.empty()) throw ConfigError("prune_order_schedule needs at least one entry");
  for (int t : prune_order_schedule)
    if (t < 0) throw ConfigError("prune order thresholds must be >= 0");
  if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0");
  if (!(relax_tolerance > 0.0) || relax_max_steps < 1) throw ConfigError("relaxation limits must be positive");
  if (!(min_edge_epsilon > 0.0)) throw ConfigError("min_edge_epsilon must be > 0");
  if (!(inner_tolerance > 0.0) || inner_max_steps < 1) throw ConfigError("inner loop limits must be positive");
  if (!(convergence_tolerance > 0.0)) throw ConfigError("convergence_tolerance must be > 0");
}

NodeId SubtreeAssignment::anchor_of(NodeId terminal) const {
  auto it = std::lower_bound(terminals.begin(), terminals.end(), terminal);
  if (it == terminals.end() || *it != terminal) throw Error("node " + std::to_string(terminal) + " has no assignment");
  return anchors[static_cast<std::size_t>(it - terminals.begin())];
}

namespace {

void propagate(VesselTree& tree, const HemoConfig& hemo) {
  propagate_radii_murray(tree);
  propagate_flows(tree, hemo);
}

double edge_coefficient(const VesselTree& tree, NodeId child, const CostWeights& w) {
  const Node& n = tree.node(child);
  return coefficient(w, n.radius, n.flow);
}

// Removes dead-end and pass-through intermediates left behind by topology edits.
void tidy_intermediates(VesselTree& tree) {
  bool changed = true;
  while (changed) {
    changed = false;
    const auto order = tree.topological_order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const NodeId v = *it;
      Node& n = tree.node(v);
      if (n.kind != NodeKind::intermediate || v == tree.root()) continue;
      if (n.children.empty()) {
        tree.detach(v);
        tree.remove(v);
        changed = true;
      } else if (n.children.size() == 1 && n.parent != kNoNode) {
        const NodeId c = n.children.front();
        const NodeId p = n.parent;
        tree.detach(c);
        tree.detach(v);
        tree.remove(v);
        tree.attach(c, p);
        changed = true;
      }
    }
  }
}

// Point at distance delta from `anchor` towards `toward` (or `anchor` itself when they coincide).
Vec3 offset_from(const Vec3& anchor, const Vec3& toward, double delta) {
  const Vec3 d = toward - anchor;
  const double len = d.norm();
  if (!(len > 0.0)) return anchor;
  return anchor + std::min(delta, 0.5 * len) * d / len;
}

}  // namespace

// ------------------------------------------------------------------ cost

std::vector<EdgeTerm<double>> incident_terms(const VesselTree& tree, NodeId v) {
  std::vector<EdgeTerm<double>> terms;
  const Node& n = tree.node(v);
  if (n.parent != kNoNode) terms.push_back({tree.node(n.parent).position, n.radius, n.flow});
  for (NodeId c : n.children) {
    const Node& cn = tree.node(c);
    terms.push_back({cn.position, cn.radius, cn.flow});
  }
  return terms;
}

double node_local_cost(const VesselTree& tree, NodeId v, const GcoConfig& config) {
  const auto terms = incident_terms(tree, v);
  if (terms.empty()) throw Error("node " + std::to_string(v) + " has no incident vessel");
  return local_cost<double>(config.weights(), tree.node(v).position, terms);
}

Vec3 node_local_cost_gradient(const VesselTree& tree, NodeId v, const GcoConfig& config) {
  const auto terms = incident_terms(tree, v);
  return local_cost_gradient<double>(config.weights(), tree.node(v).position, terms, config.min_edge_epsilon);
}

double global_cost(const VesselTree& tree, const GcoConfig& config) {
  const CostWeights w = config.weights();
  // Neumaier summation in ascending id order.
  double sum = 0.0, comp = 0.0;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto id = static_cast<NodeId>(i);
    const Node& n = tree.node(id);
    if (!n.alive || n.parent == kNoNode) continue;
    const double term = edge_cost(w, n.radius, n.flow, tree.edge_length(id));
    const double t = sum + term;
    comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  return 2.0 * (sum + comp);
}

// ------------------------------------------------------------------ star minimization

StarResult minimize_star(std::span<const Vec3> anchors, std::span<const double> coefs, const Vec3& start,
                         const StarOptions& options) {
  if (anchors.size() != coefs.size() || anchors.empty()) throw Error("star needs matching, nonempty anchors");
  const std::size_t n = anchors.size();
  const double eps = options.epsilon;
  double total = 0.0;
  for (double c : coefs) {
    if (!(c >= 0.0)) throw Error("star coefficients must be >= 0");
    total += c;
  }
  auto f = [&](const Vec3& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += coefs[i] * (x - anchors[i]).norm();
    return s;
  };
  // Minimum-norm element of the subdifferential.
  auto grad = [&](const Vec3& x) {
    Vec3 g = Vec3::Zero();
    double pinned = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 d = x - anchors[i];
      const double len = d.norm();
      if (len > eps)
        g += coefs[i] * d / len;
      else
        pinned += coefs[i];
    }
    if (pinned == 0.0) return g;
    const double gn = g.norm();
    if (gn <= pinned) return Vec3(Vec3::Zero());
    return Vec3(g * (1.0 - pinned / gn));
  };

  StarResult res;
  res.position = start;
  res.cost = f(start);
  if (total == 0.0) {
    res.converged = true;
    return res;
  }

  // A minimum on an anchor is characterized by |pull of the others| <= own weight.
  for (std::size_t k = 0; k < n; ++k) {
    bool seen = false;
    for (std::size_t j = 0; j < k; ++j)
      if ((anchors[j] - anchors[k]).norm() <= eps) seen = true;
    if (seen) continue;
    if ((grad(anchors[k])).norm() == 0.0) {
      const double fk = f(anchors[k]);
      if (fk < res.cost) {
        res.position = anchors[k];
        res.cost = fk;
        res.anchor = static_cast<int>(k);
      }
      res.converged = true;
      return res;
    }
  }

  double mean_dist = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_dist += (start - anchors[i]).norm();
  mean_dist /= static_cast<double>(n);
  if (!(mean_dist > 0.0)) mean_dist = 1.0;
  const double scale = mean_dist / total;

  Vec3 x = start;
  double fx = res.cost;
  Vec3 g = grad(x);
  Eigen::Matrix3d H = scale * Eigen::Matrix3d::Identity();
  const double gtol = options.tolerance * total;
  int step = 0;
  for (; step < options.max_steps; ++step) {
    if (g.norm() <= gtol) {
      res.converged = true;
      break;
    }
    Vec3 p = -H * g;
    if (!(p.dot(g) < 0.0)) {
      H = scale * Eigen::Matrix3d::Identity();
      p = -H * g;
    }
    double t = 1.0;
    bool accepted = false;
    Vec3 xn;
    double fn = 0.0;
    const double slope = g.dot(p);
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      xn = x + t * p;
      fn = f(xn);
      if (fn <= fx + 1e-4 * t * slope && fn < fx) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // No measurable decrease left: either at the floating-point floor or stuck.
      if (g.norm() <= 1e-6 * total)
        res.converged = true;
      else
        res.line_search_failed = true;
      break;
    }
    const Vec3 s = xn - x;
    const Vec3 gn = grad(xn);
    const Vec3 y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    x = xn;
    fx = fn;
    g = gn;
    if (s.norm() <= 1e-15 * (1.0 + x.norm())) {
      res.converged = true;
      ++step;
      break;
    }
  }
  res.steps = step;
  res.position = x;
  res.cost = fx;
  return res;
}

// ------------------------------------------------------------------ initialization

GcoState initialize(const VesselTree& prebuilt, const TerminalSet& terminals, const GcoConfig& config,
                    const HemoConfig& hemo) {
  config.check();
  hemo.check();
  if (terminals.size() == 0) throw Error("no terminals to connect");
  if (terminals.radii.size() != terminals.positions.size()) throw Error("terminal radii and positions differ in length");
  if (prebuilt.root() == kNoNode || prebuilt.live_count() == 0) throw Error("prebuilt tree has no root");
  for (const auto& v : validate(prebuilt, {.hemodynamics = false}))
    throw Error("prebuilt tree is invalid: " + v.message);

  VesselTree tree = prebuilt;
  tree.compact();
  for (Node& n : tree.nodes()) n.kind = NodeKind::prebuilt;
  const auto P = static_cast<NodeId>(tree.size());

  std::vector<NodeId> candidates;
  for (NodeId i = 0; i < P; ++i)
    if (config.attach_to_all_prebuilt || tree.is_leaf(i)) candidates.push_back(i);
  if (candidates.empty()) throw Error("prebuilt tree has no leaves");

  std::vector<NodeId> anchor(terminals.size());
  std::vector<char> used(static_cast<std::size_t>(P), 0);
  for (std::size_t t = 0; t < terminals.size(); ++t) {
    const Vec3& p = terminals.positions[t];
    double best = std::numeric_limits<double>::infinity();
    NodeId pick = kNoNode;
    for (NodeId c : candidates) {
      const double d = (tree.node(c).position - p).squaredNorm();
      if (d < best) {
        best = d;
        pick = c;
      }
    }
    anchor[t] = pick;
    used[static_cast<std::size_t>(pick)] = 1;
    if (!(terminals.radii[t] > 0.0)) throw Error("terminal radius must be > 0");
    const NodeId id = tree.add_node(p, NodeKind::terminal);
    tree.node(id).radius = terminals.radii[t];
    tree.attach(id, pick);
  }

  // Prebuilt branches without terminals would carry no flow: trim them, then collapse the
  // pass-through nodes this leaves behind (anchors stay).
  const auto order = tree.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId v = *it;
    if (v >= P || v == tree.root()) continue;
    if (tree.is_leaf(v)) {
      tree.detach(v);
      tree.remove(v);
    }
  }
  for (NodeId v : tree.topological_order()) {
    if (v >= P || v == tree.root() || used[static_cast<std::size_t>(v)]) continue;
    Node& n = tree.node(v);
    if (n.children.size() != 1) continue;
    const NodeId c = n.children.front();
    const NodeId p = n.parent;
    tree.detach(c);
    tree.detach(v);
    tree.remove(v);
    tree.attach(c, p);
  }
  const auto remap = tree.compact();

  GcoState state;
  state.assignment.terminals.reserve(terminals.size());
  for (std::size_t t = 0; t < terminals.size(); ++t) {
    state.assignment.terminals.push_back(remap[static_cast<std::size_t>(P) + t]);
    state.assignment.anchors.push_back(remap[static_cast<std::size_t>(anchor[t])]);
  }
  propagate(tree, hemo);
  state.tree = std::move(tree);
  return state;
}

// ------------------------------------------------------------------ relaxation

RelaxResult relax_node(VesselTree& tree, NodeId v, const GcoConfig& config) {
  Node& n = tree.node(v);
  if (n.kind != NodeKind::intermediate || n.parent == kNoNode || v == tree.root())
    throw Error("only intermediate nodes can be relaxed");
  const CostWeights w = config.weights();
  std::vector<Vec3> anchors;
  std::vector<double> coefs;
  std::vector<NodeId> owner;
  anchors.push_back(tree.node(n.parent).position);
  coefs.push_back(coefficient(w, n.radius, n.flow));
  owner.push_back(n.parent);
  for (NodeId c : n.children) {
    anchors.push_back(tree.node(c).position);
    coefs.push_back(edge_coefficient(tree, c, w));
    owner.push_back(c);
  }
  const Vec3 start = n.position;
  const StarResult star = minimize_star(anchors, coefs, start,
                                        {config.relax_tolerance, config.relax_max_steps, config.min_edge_epsilon});
  RelaxResult out;
  out.cost_before = local_cost<double>(w, start, incident_terms(tree, v));
  out.line_search_failed = star.line_search_failed;

  Vec3 target = star.position;
  if (star.anchor >= 0) {
    // Landing on the parent or an intermediate child is resolved by the next merge; a
    // terminal child cannot absorb the node, so stop just short of it.
    const NodeId o = owner[static_cast<std::size_t>(star.anchor)];
    if (star.anchor > 0 && tree.node(o).kind != NodeKind::intermediate)
      target = offset_from(star.position, start, config.merge_abs_epsilon);
  }
  n.position = target;
  out.cost_after = local_cost<double>(w, target, incident_terms(tree, v));
  if (out.cost_after > out.cost_before) {
    n.position = start;
    out.cost_after = out.cost_before;
  }
  return out;
}

PassStats relax_pass(VesselTree& tree, const GcoConfig& config) {
  std::vector<NodeId> eligible;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto id = static_cast<NodeId>(i);
    const Node& n = tree.node(id);
    if (n.alive && n.kind == NodeKind::intermediate && n.parent != kNoNode) eligible.push_back(id);
  }
  auto relax_list = [&](const std::vector<NodeId>& ids, PassStats& stats) {
    for (NodeId id : ids) {
      const Vec3 before = tree.node(id).position;
      const RelaxResult r = relax_node(tree, id, config);
      if (r.line_search_failed) ++stats.failures;
      if (tree.node(id).position != before) ++stats.changed;
    }
  };

  PassStats stats;
  if (!config.parallel_subtrees) {
    relax_list(eligible, stats);
    return stats;
  }
  // Intermediates only neighbour nodes sharing their nearest non-intermediate ancestor (or
  // that fixed ancestor itself), so groups are independent and each keeps ascending order.
  std::vector<NodeId> group_of(tree.size(), kNoNode);
  for (NodeId v : tree.topological_order()) {
    const Node& n = tree.node(v);
    if (n.kind != NodeKind::intermediate) {
      group_of[static_cast<std::size_t>(v)] = v;
    } else if (n.parent != kNoNode) {
      const NodeId p = n.parent;
      group_of[static_cast<std::size_t>(v)] =
          tree.node(p).kind == NodeKind::intermediate ? group_of[static_cast<std::size_t>(p)] : p;
    }
  }
  std::map<NodeId, std::vector<NodeId>> groups;
  for (NodeId id : eligible) groups[group_of[static_cast<std::size_t>(id)]].push_back(id);
  std::vector<const std::vector<NodeId>*> work;
  for (const auto& kv : groups) work.push_back(&kv.second);
  std::vector<PassStats> partial(work.size());
  std::atomic<std::size_t> next{0};
  const unsigned hw = std::max(2u, std::thread::hardware_concurrency());
  const auto workers = static_cast<unsigned>(std::min<std::size_t>(hw, work.size()));
  std::vector<std::thread> threads;
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  for (unsigned t = 0; t < workers; ++t)
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < work.size(); i = next++) {
        try {
          relax_list(*work[i], partial[i]);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  for (auto& th : threads) th.join();
  if (failure) std::rethrow_exception(failure);
  for (const auto& p : partial) {
    stats.changed += p.changed;
    stats.failures += p.failures;
  }
  return stats;
}

// ------------------------------------------------------------------ merging

PassStats merge_pass(VesselTree& tree, const GcoConfig& config, const HemoConfig& hemo) {
  PassStats stats;
  const std::size_t count = tree.size();
  for (std::size_t i = 0; i < count; ++i) {
    const auto u = static_cast<NodeId>(i);
    const Node& n = tree.node(u);
    if (!n.alive) continue;
    // Incident edges as (length, child endpoint).
    std::vector<std::pair<double, NodeId>> inc;
    if (n.parent != kNoNode) inc.emplace_back(tree.edge_length(u), u);
    for (NodeId c : n.children) inc.emplace_back(tree.edge_length(c), c);
    if (inc.empty()) continue;
    std::sort(inc.begin(), inc.end());
    const auto [shortest, child] = inc.front();
    const bool tiny = shortest < config.merge_abs_epsilon;
    const bool ratio = inc.size() >= 2 && shortest < config.merge_ratio_threshold * inc[1].first;
    if (!(tiny || ratio)) continue;
    if (tree.node(child).kind != NodeKind::intermediate) continue;
    // Contract: the child endpoint disappears and its children move up to the parent end.
    const NodeId p = tree.node(child).parent;
    const std::vector<NodeId> grand = tree.node(child).children;
    for (NodeId g : grand) {
      tree.detach(g);
      tree.attach(g, p);
    }
    tree.detach(child);
    tree.remove(child);
    ++stats.changed;
  }
  tidy_intermediates(tree);
  tree.compact();
  propagate(tree, hemo);
  return stats;
}

// ------------------------------------------------------------------ splitting

namespace {

SplitCandidate evaluate_subset(const VesselTree& tree, NodeId v, const std::vector<NodeId>& subset,
                               const GcoConfig& config) {
  const CostWeights w = config.weights();
  const Vec3& pv = tree.node(v).position;
  double r3 = 0.0, flow = 0.0, unsplit = 0.0;
  std::vector<Vec3> anchors{pv};
  std::vector<double> coefs{0.0};
  Vec3 centroid = pv;
  for (NodeId s : subset) {
    const Node& sn = tree.node(s);
    r3 += sn.radius * sn.radius * sn.radius;
    flow += sn.flow;
    const double c = coefficient(w, sn.radius, sn.flow);
    unsplit += c * (sn.position - pv).norm();
    anchors.push_back(sn.position);
    coefs.push_back(c);
    centroid += sn.position;
  }
  centroid /= static_cast<double>(subset.size() + 1);
  coefs[0] = coefficient(w, std::cbrt(r3), flow);
  const StarResult star = minimize_star(anchors, coefs, centroid,
                                        {config.relax_tolerance, config.relax_max_steps, config.min_edge_epsilon});
  Vec3 pos = star.position;
  if (star.anchor > 0) pos = offset_from(star.position, centroid, config.merge_abs_epsilon);
  double split = 0.0;
  for (std::size_t i = 0; i < anchors.size(); ++i) split += coefs[i] * (pos - anchors[i]).norm();
  SplitCandidate cand;
  cand.subset = subset;
  cand.position = pos;
  cand.delta = star.anchor == 0 ? 0.0 : split - unsplit;
  // Improvements below round-off are not improvements.
  if (cand.delta > -1e-10 * unsplit) cand.delta = std::max(cand.delta, 0.0);
  return cand;
}

}  // namespace

std::optional<SplitCandidate> best_split(const VesselTree& tree, NodeId v, const GcoConfig& config,
                                         SplitCache* cache) {
  const Node& n = tree.node(v);
  if (!n.alive || n.children.size() < 3) return std::nullopt;
  std::vector<NodeId> cands;
  for (NodeId c : n.children)
    if (tree.node(c).kind != NodeKind::prebuilt) cands.push_back(c);
  std::sort(cands.begin(), cands.end());
  if (cands.size() < 2) return std::nullopt;
  const std::size_t max_size = std::min(cands.size(), n.children.size() - 1);

  std::optional<SplitCandidate> best;
  for (std::size_t i = 0; i < cands.size(); ++i)
    for (std::size_t j = i + 1; j < cands.size(); ++j) {
      const auto key = std::make_pair(cands[i], cands[j]);
      SplitCandidate cand;
      if (cache) {
        auto it = cache->find(key);
        if (it == cache->end()) it = cache->emplace(key, evaluate_subset(tree, v, {cands[i], cands[j]}, config)).first;
        cand = it->second;
      } else {
        cand = evaluate_subset(tree, v, {cands[i], cands[j]}, config);
      }
      if (!best || cand.delta < best->delta) best = std::move(cand);
    }

  while (best->subset.size() < max_size) {
    std::optional<SplitCandidate> grown;
    for (NodeId c : cands) {
      if (std::binary_search(best->subset.begin(), best->subset.end(), c)) continue;
      std::vector<NodeId> s = best->subset;
      s.insert(std::upper_bound(s.begin(), s.end(), c), c);
      SplitCandidate cand = evaluate_subset(tree, v, s, config);
      if (!grown || cand.delta < grown->delta) grown = std::move(cand);
    }
    if (!grown || !(grown->delta < best->delta)) break;
    best = std::move(grown);
  }
  if (!(best->delta < 0.0)) return std::nullopt;
  return best;
}

NodeId split_node(VesselTree& tree, NodeId v, const GcoConfig& config, SplitCache* cache) {
  const auto cand = best_split(tree, v, config, cache);
  if (!cand) return kNoNode;
  double r3 = 0.0, flow = 0.0;
  for (NodeId s : cand->subset) {
    const Node& sn = tree.node(s);
    r3 += sn.radius * sn.radius * sn.radius;
    flow += sn.flow;
  }
  const NodeId fresh = tree.add_node(cand->position, NodeKind::intermediate);
  tree.attach(fresh, v);
  tree.node(fresh).radius = std::cbrt(r3);
  tree.node(fresh).flow = flow;
  for (NodeId s : cand->subset) {
    tree.detach(s);
    tree.attach(s, fresh);
  }
  return fresh;
}

PassStats split_pass(VesselTree& tree, const GcoConfig& config, const HemoConfig& hemo) {
  PassStats stats;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto v = static_cast<NodeId>(i);
    if (!tree.node(v).alive) continue;
    SplitCache cache;
    while (split_node(tree, v, config, &cache) != kNoNode) ++stats.changed;
  }
  tree.compact();
  propagate(tree, hemo);
  return stats;
}

// ------------------------------------------------------------------ pruning

PassStats prune_and_reconnect(VesselTree& tree, const SubtreeAssignment& assignment, int order_threshold,
                              const GcoConfig& config, const HemoConfig& hemo) {
  (void)config;
  PassStats stats;
  if (order_threshold <= 0) return stats;
  const auto orders = strahler_orders(tree);
  std::vector<NodeId> cut;
  for (NodeId v : tree.topological_order()) {
    const Node& n = tree.node(v);
    if (n.parent == kNoNode || n.kind == NodeKind::prebuilt) continue;
    if (orders[static_cast<std::size_t>(v)] < order_threshold) cut.push_back(v);
  }
  for (NodeId v : cut) tree.detach(v);
  stats.changed = static_cast<int>(cut.size());

  // Everything no longer reachable from the root is either an orphaned terminal or a
  // discarded intermediate.
  std::vector<char> reachable(tree.size(), 0);
  for (NodeId v : tree.topological_order()) reachable[static_cast<std::size_t>(v)] = 1;
  std::vector<NodeId> orphans;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto id = static_cast<NodeId>(i);
    Node& n = tree.node(id);
    if (!n.alive || reachable[i]) continue;
    if (n.kind == NodeKind::terminal) {
      orphans.push_back(id);
    } else if (n.kind == NodeKind::intermediate) {
      for (NodeId c : std::vector<NodeId>(n.children)) tree.detach(c);
      tree.detach(id);
      tree.remove(id);
    } else {
      throw Error("prune disconnected prebuilt node " + std::to_string(id));
    }
  }
  for (NodeId t : orphans) tree.detach(t);

  // Candidate attachment points per anchor: the anchor plus its surviving non-terminal
  // descendants.
  std::map<NodeId, std::vector<NodeId>> targets;
  for (NodeId t : orphans) {
    const NodeId a = assignment.anchor_of(t);
    if (targets.count(a)) continue;
    std::vector<NodeId> list;
    std::vector<NodeId> stack{a};
    while (!stack.empty()) {
      const NodeId x = stack.back();
      stack.pop_back();
      if (tree.node(x).kind != NodeKind::terminal) list.push_back(x);
      for (NodeId c : tree.node(x).children) stack.push_back(c);
    }
    std::sort(list.begin(), list.end());
    targets.emplace(a, std::move(list));
  }
  for (NodeId t : orphans) {
    const Vec3& p = tree.node(t).position;
    double best = std::numeric_limits<double>::infinity();
    NodeId pick = kNoNode;
    for (NodeId c : targets.at(assignment.anchor_of(t))) {
      const double d = (tree.node(c).position - p).squaredNorm();
      if (d < best) {
        best = d;
        pick = c;
      }
    }
    tree.attach(t, pick);
  }
  tidy_intermediates(tree);
  tree.compact();
  propagate(tree, hemo);
  return stats;
}

// ------------------------------------------------------------------ driver

GcoResult run(const VesselTree& prebuilt, const TerminalSet& terminals, const GcoConfig& config,
              const HemoConfig& hemo) {
  GcoResult result;
  auto record = [&](int iteration, const char* phase) {
    result.trace.push_back({iteration, phase, global_cost(result.tree, config), result.tree.live_count(),
                            result.tree.edge_count()});
  };
  try {
    GcoState state = initialize(prebuilt, terminals, config, hemo);
    result.tree = std::move(state.tree);
    result.assignment = std::move(state.assignment);
  } catch (const std::exception& e) {
    result.error = std::string("initialize: ") + e.what();
    return result;
  }
  record(0, "init");

  // Passes edit a working copy so that an exception leaves the last good tree in place.
  double previous = result.trace.back().cost;
  for (int it = 1; it <= config.max_iterations; ++it) {
    const char* phase = "relax";
    try {
      for (int inner = 0; inner < config.inner_max_steps; ++inner) {
        const double before = global_cost(result.tree, config);
        VesselTree work = result.tree;
        phase = "relax";
        result.relax_failures += relax_pass(work, config).failures;
        result.tree = work;
        record(it, "relax");
        phase = "merge";
        merge_pass(work, config, hemo);
        result.tree = work;
        record(it, "merge");
        phase = "split";
        split_pass(work, config, hemo);
        result.tree = std::move(work);
        record(it, "split");
        const double after = result.trace.back().cost;
        if (before - after < config.inner_tolerance * before) break;
      }
      const double current = result.trace.back().cost;
      if (std::abs(previous - current) < config.convergence_tolerance * previous) break;
      previous = current;
      if (it == config.max_iterations) break;
      phase = "prune";
      const auto& sched = config.prune_order_schedule;
      const int threshold = sched[std::min(static_cast<std::size_t>(it - 1), sched.size() - 1)];
      VesselTree work = result.tree;
      prune_and_reconnect(work, result.assignment, threshold, config, hemo);
      result.tree = std::move(work);
      record(it, "prune");
    } catch (const std::exception& e) {
      result.error = std::string(phase) + " (iteration " + std::to_string(it) + "): " + e.what();
      return result;
    }
  }
  return result;
}

void write_trace(const std::vector<TraceRecord>& trace, const std::string& path) {
  auto os = text::open_output(path);
  os << "iteration,phase,cost,nodes,edges\n";
  for (const auto& r : trace)
    os << r.iteration << ',' << r.phase << ',' << text::format_double(r.cost) << ',' << r.nodes << ',' << r.edges
       << '\n';
  if (!os) throw Error("failed writing '" + path + "'");
}

std::vector<TraceRecord> read_trace(const std::string& path) {
  const auto t = text::read_csv(path);
  const int ci = t.column("iteration"), cp = t.column("phase"), cc = t.column("cost"), cn = t.column("nodes"),
            ce = t.column("edges");
  if (ci < 0 || cp < 0 || cc < 0 || cn < 0 || ce < 0) throw Error(path + ": expected header iteration,phase,cost,nodes,edges");
  std::vector<TraceRecord> out;
  for (const auto& r : t.rows)
    out.push_back({text::parse_or_throw<int>(r[ci], path), r[cp], text::parse_or_throw<double>(r[cc], path),
                   text::parse_or_throw<std::size_t>(r[cn], path), text::parse_or_throw<std::size_t>(r[ce], path)});
  return out;
}

}  // namespace vasc
