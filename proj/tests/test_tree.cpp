/* SPDX-License-Identifier: Apache-2.0 */
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "support.hpp"
#include "vasc/tree.hpp"

using namespace vasc;

namespace {

bool has_code(const std::vector<Violation>& v, const std::string& code) {
  for (const auto& x : v)
    if (x.code == code) return true;
  return false;
}

// Two-level tree: prebuilt root 0 -> node 1 -> terminals 2, 3.
VesselTree small_y() {
  VesselTree t;
  t.set_root(t.add_node(Vec3(0, 0, 0), NodeKind::prebuilt));
  t.attach(t.add_node(Vec3(0, 0, 100), NodeKind::intermediate), 0);
  t.attach(t.add_node(Vec3(50, 0, 200), NodeKind::terminal), 1);
  t.attach(t.add_node(Vec3(-50, 0, 200), NodeKind::terminal), 1);
  t.node(2).radius = 10;
  t.node(3).radius = 12;
  return t;
}

}  // namespace

TEST_CASE("Murray propagation gives the cube-root identity at the root") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    VesselTree t = vt::random_tree(rng, 3 + trial * 7);
    propagate_radii_murray(t);
    double cubes = 0;
    for (NodeId id : t.terminals()) cubes += std::pow(t.node(id).radius, 3);
    CHECK(t.root_radius() == doctest::Approx(std::cbrt(cubes)).epsilon(1e-9));
    CHECK(validate(t, {false, 1e-9}).empty());
  }
}

TEST_CASE("thirty thousand equal terminals give a 313.2 um root") {
  VesselTree t;
  t.set_root(t.add_node(Vec3::Zero(), NodeKind::prebuilt));
  const NodeId trunk = t.add_node(Vec3(0, 0, 1), NodeKind::intermediate);
  t.attach(trunk, 0);
  for (int i = 0; i < 30000; ++i) {
    const NodeId id = t.add_node(Vec3(i, 0, 2), NodeKind::terminal);
    t.node(id).radius = 10.08;
    t.attach(id, trunk);
  }
  propagate_radii_murray(t);
  CHECK(std::abs(t.root_radius() - 313.2) < 0.1);
  CHECK(std::abs(t.root_radius() - 10.08 * std::cbrt(30000.0)) < 1e-9 * 313.2);
}

TEST_CASE("flows split evenly over terminals and are conserved") {
  std::mt19937_64 rng(2);
  HemoConfig h;
  for (int trial = 0; trial < 30; ++trial) {
    VesselTree t = vt::random_tree(rng, 4 + trial * 11);
    propagate_radii_murray(t);
    propagate_flows(t, h);
    const auto term = t.terminals();
    for (NodeId id : term) CHECK(t.node(id).flow == doctest::Approx(h.inlet_flow / double(term.size())));
    // Each edge carries (number of terminals below) * Q0 / N.
    for (NodeId id = 1; id < static_cast<NodeId>(t.size()); ++id) {
      int below = 0;
      for (NodeId leaf : term) {
        NodeId u = leaf;
        while (u != kNoNode && u != id) u = t.node(u).parent;
        below += u == id;
      }
      CHECK(t.node(id).flow == doctest::Approx(below * h.inlet_flow / double(term.size())).epsilon(1e-12));
    }
    CHECK(validate(t).empty());
  }
}

TEST_CASE("Strahler orders match the recursive definition") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const VesselTree t = vt::random_tree(rng, 2 + trial * 5);
    const auto o = strahler_orders(t);
    CHECK(o[0] == -1);
    for (NodeId id = 1; id < static_cast<NodeId>(t.size()); ++id) CHECK(o[static_cast<std::size_t>(id)] == vt::strahler_recursive(t, id));
  }
  // Perfect binary tree of depth 3 below a trunk: trunk has order 3.
  VesselTree b;
  b.set_root(b.add_node(Vec3::Zero(), NodeKind::prebuilt));
  std::vector<NodeId> level{b.add_node(Vec3(0, 0, 1), NodeKind::intermediate)};
  b.attach(level[0], 0);
  for (int d = 0; d < 3; ++d) {
    std::vector<NodeId> next;
    for (NodeId p : level)
      for (int c = 0; c < 2; ++c) {
        const NodeId id = b.add_node(Vec3(c, d, 2), d == 2 ? NodeKind::terminal : NodeKind::intermediate);
        b.attach(id, p);
        next.push_back(id);
      }
    level = next;
  }
  CHECK(strahler_orders(b)[1] == 3);
}

TEST_CASE("Poiseuille drop of the reference segment") {
  // mu = 3.6e-15, l = 100 um, Q = 3.89e6 um^3/s, r = 10 um.
  CHECK(poiseuille_drop(3.6e-15, 100.0, 3.89e6, 10.0) == doctest::Approx(3.566e-9).epsilon(1e-3));
  CHECK(poiseuille_drop(3.6e-15, 100.0, 3.89e6, 10.0) == doctest::Approx(8 * 3.6e-15 * 100 * 3.89e6 / (units::kPi * 1e4)));
  CHECK_THROWS_AS(poiseuille_drop(3.6e-15, 1.0, 1.0, 0.0), Error);
}

TEST_CASE("pressures fall monotonically from the inlet") {
  std::mt19937_64 rng(4);
  HemoConfig h;
  VesselTree t = vt::random_tree(rng, 200);
  propagate_radii_murray(t);
  propagate_flows(t, h);
  const auto p = compute_pressures(t, h);
  CHECK(p[0] == h.inlet_pressure);
  for (NodeId id = 1; id < static_cast<NodeId>(t.size()); ++id) {
    const auto& n = t.node(id);
    CHECK(p[static_cast<std::size_t>(id)] < p[static_cast<std::size_t>(n.parent)]);
    CHECK(p[static_cast<std::size_t>(n.parent)] - p[static_cast<std::size_t>(id)] ==
          doctest::Approx(poiseuille_drop(h.viscosity, t.edge_length(id), n.flow, n.radius)));
  }
}

TEST_CASE("validate reports each structural and hemodynamic defect") {
  VesselTree t = small_y();
  propagate_radii_murray(t);
  propagate_flows(t, HemoConfig{});
  CHECK(validate(t).empty());

  {
    VesselTree bad = t;
    bad.node(2).radius = 0;
    CHECK(has_code(validate(bad), "radius"));
  }
  {
    VesselTree bad = t;
    bad.node(1).radius *= 1.01;
    CHECK(has_code(validate(bad), "murray"));
    CHECK_FALSE(has_code(validate(bad, {false, 1e-9}), "murray"));
  }
  {
    VesselTree bad = t;
    bad.node(2).flow *= 2;
    CHECK(has_code(validate(bad), "kirchhoff"));
  }
  {
    VesselTree bad = t;
    bad.node(1).children.push_back(0);  // back edge without a matching parent link
    CHECK_FALSE(validate(bad).empty());
  }
  {
    VesselTree bad = t;
    bad.node(2).kind = NodeKind::terminal;
    const NodeId x = bad.add_node(Vec3(1, 1, 1), NodeKind::intermediate);
    bad.node(x).radius = 1;
    bad.node(x).flow = 1;
    CHECK(has_code(validate(bad), "orphan"));
  }
  {
    VesselTree bad = t;
    bad.node(2).position.x() = std::nan("");
    CHECK(has_code(validate(bad), "position"));
  }
  {
    VesselTree bad;
    CHECK(has_code(validate(bad), "root"));
  }
}

TEST_CASE("editing primitives keep links consistent") {
  VesselTree t = small_y();
  CHECK_THROWS_AS(t.attach(2, 3), Error);
  CHECK_THROWS_AS(t.remove(2), Error);
  t.detach(3);
  t.remove(3);
  CHECK(t.live_count() == 3);
  const auto map = t.compact();
  CHECK(map[3] == kNoNode);
  CHECK(t.size() == 3);
  CHECK(t.node(1).children == std::vector<NodeId>{2});
  CHECK(t.edge_count() == 2);
  const auto order = t.topological_order();
  CHECK(order.front() == 0);
}

TEST_CASE("propagation rejects missing leaf radii and terminal-free trees") {
  VesselTree t = small_y();
  t.node(3).radius = 0;
  CHECK_THROWS_AS(propagate_radii_murray(t), Error);
  VesselTree lone;
  lone.set_root(lone.add_node(Vec3::Zero(), NodeKind::prebuilt));
  CHECK_THROWS_AS(propagate_flows(lone, HemoConfig{}), Error);
  HemoConfig bad;
  bad.viscosity = 0;
  CHECK_THROWS_AS(bad.check(), Error);
}

TEST_CASE("tree files round-trip ids, geometry and edge data") {
  std::mt19937_64 rng(5);
  VesselTree t = vt::random_tree(rng, 60);
  propagate_radii_murray(t);
  propagate_flows(t, HemoConfig{});
  const auto dir = vt::scratch_dir("tree_io");
  const std::string prefix = (dir / "t").string();
  write_tree(t, prefix);
  const VesselTree b = read_tree(prefix);
  REQUIRE(b.size() == t.size());
  CHECK(b.root() == t.root());
  for (NodeId id = 0; id < static_cast<NodeId>(t.size()); ++id) {
    CHECK(b.node(id).position == t.node(id).position);
    CHECK(b.node(id).parent == t.node(id).parent);
    CHECK((b.node(id).kind == NodeKind::terminal) == (t.node(id).kind == NodeKind::terminal));
    if (id != 0) {
      CHECK(b.node(id).radius == t.node(id).radius);
      CHECK(b.node(id).flow == t.node(id).flow);
    }
  }
  write_vtk(t, HemoConfig{}, (dir / "t.vtk").string());
  std::ifstream vtk(dir / "t.vtk");
  std::string first;
  std::getline(vtk, first);
  CHECK(first.rfind("# vtk DataFile", 0) == 0);

  {
    std::ofstream os(dir / "bad_nodes.csv");
    os << "id,x,y,z,is_terminal\n0,0,0,0,0\n1,0,0,zz,1\n";
    std::ofstream es(dir / "bad_edges.csv");
    es << "id,parent_node,child_node,radius,flow,strahler\n0,0,1,1,1,0\n";
  }
  CHECK_THROWS_AS(read_tree((dir / "bad").string()), Error);
}
