/* SPDX-License-Identifier: Apache-2.0 */
#include <cmath>
#include <fstream>

#include "vasc/text.hpp"
#include "vasc/tree.hpp"

namespace vasc {

namespace {

std::vector<NodeId> dense_ids(const VesselTree& tree) {
  std::vector<NodeId> ids(tree.size(), kNoNode);
  NodeId next = 0;
  for (std::size_t i = 0; i < tree.size(); ++i)
    if (tree.nodes()[i].alive) ids[i] = next++;
  return ids;
}

}  // namespace

void write_tree(const VesselTree& tree, const std::string& prefix) {
  using text::format_double;
  const auto ids = dense_ids(tree);
  const auto order = strahler_orders(tree);

  auto nodes = text::open_output(prefix + "_nodes.csv");
  nodes << "id,x,y,z,is_terminal\n";
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const Node& n = tree.nodes()[i];
    if (!n.alive) continue;
    nodes << ids[i] << ',' << format_double(n.position.x()) << ',' << format_double(n.position.y())
          << ',' << format_double(n.position.z()) << ',' << (n.kind == NodeKind::terminal ? 1 : 0)
          << '\n';
  }

  auto edges = text::open_output(prefix + "_edges.csv");
  edges << "id,parent_node,child_node,radius,flow,strahler\n";
  NodeId edge_id = 0;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const Node& n = tree.nodes()[i];
    if (!n.alive || n.parent == kNoNode) continue;
    edges << edge_id++ << ',' << ids[static_cast<std::size_t>(n.parent)] << ',' << ids[i] << ','
          << format_double(n.radius) << ',' << format_double(n.flow) << ',' << order[i] << '\n';
  }
  if (!nodes || !edges) throw Error("failed writing tree files with prefix '" + prefix + "'");
}

VesselTree read_tree(const std::string& prefix, NodeKind default_kind) {
  const std::string npath = prefix + "_nodes.csv", epath = prefix + "_edges.csv";
  const auto nt = text::read_csv(npath);
  const auto et = text::read_csv(epath);
  const int cid = nt.column("id"), cx = nt.column("x"), cy = nt.column("y"), cz = nt.column("z"),
            cterm = nt.column("is_terminal");
  if (cid < 0 || cx < 0 || cy < 0 || cz < 0 || cterm < 0)
    throw Error(npath + ": expected header id,x,y,z,is_terminal");
  const int ep = et.column("parent_node"), ec = et.column("child_node"), er = et.column("radius"),
            ef = et.column("flow");
  if (ep < 0 || ec < 0 || er < 0 || ef < 0)
    throw Error(epath + ": expected header id,parent_node,child_node,radius,flow,strahler");

  VesselTree tree;
  for (std::size_t row = 0; row < nt.rows.size(); ++row) {
    const auto& r = nt.rows[row];
    const auto id = text::parse_or_throw<long>(r[cid], npath);
    if (id != static_cast<long>(row)) throw Error(npath + ": node ids must be dense and ascending");
    const Vec3 p(text::parse_or_throw<double>(r[cx], npath), text::parse_or_throw<double>(r[cy], npath),
                 text::parse_or_throw<double>(r[cz], npath));
    const int term = text::parse_or_throw<int>(r[cterm], npath);
    tree.add_node(p, term != 0 ? NodeKind::terminal : default_kind);
  }
  const auto n = static_cast<long>(tree.size());
  for (const auto& r : et.rows) {
    const auto parent = text::parse_or_throw<long>(r[ep], epath);
    const auto child = text::parse_or_throw<long>(r[ec], epath);
    if (parent < 0 || parent >= n || child < 0 || child >= n)
      throw Error(epath + ": edge references unknown node");
    if (tree.node(static_cast<NodeId>(child)).parent != kNoNode)
      throw Error(epath + ": node " + std::to_string(child) + " has two parents");
    tree.attach(static_cast<NodeId>(child), static_cast<NodeId>(parent));
    tree.node(static_cast<NodeId>(child)).radius = text::parse_or_throw<double>(r[er], epath);
    tree.node(static_cast<NodeId>(child)).flow = text::parse_or_throw<double>(r[ef], epath);
  }
  NodeId root = kNoNode;
  for (NodeId id = 0; id < static_cast<NodeId>(tree.size()); ++id) {
    if (tree.node(id).parent != kNoNode) continue;
    if (root != kNoNode) throw Error(prefix + ": tree has more than one root");
    root = id;
  }
  if (root == kNoNode) throw Error(prefix + ": tree has no root");
  tree.set_root(root);
  if (tree.topological_order().size() != tree.size())
    throw Error(prefix + ": edges do not form a tree reachable from the root");
  return tree;
}

void write_vtk(const VesselTree& tree, const HemoConfig& config, const std::string& path) {
  using text::format_double;
  const auto ids = dense_ids(tree);
  const auto order = strahler_orders(tree);
  const auto pressure = compute_pressures(tree, config);
  auto os = text::open_output(path);
  const std::size_t npts = tree.live_count(), nedges = tree.edge_count();
  os << "# vtk DataFile Version 3.0\nvascular tree\nASCII\nDATASET POLYDATA\n";
  os << "POINTS " << npts << " double\n";
  for (const Node& n : tree.nodes())
    if (n.alive)
      os << format_double(n.position.x()) << ' ' << format_double(n.position.y()) << ' '
         << format_double(n.position.z()) << '\n';
  os << "LINES " << nedges << ' ' << nedges * 3 << '\n';
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const Node& n = tree.nodes()[i];
    if (n.alive && n.parent != kNoNode) os << "2 " << ids[static_cast<std::size_t>(n.parent)] << ' ' << ids[i] << '\n';
  }
  auto cell_scalars = [&](const char* name, auto value) {
    os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (std::size_t i = 0; i < tree.size(); ++i) {
      const Node& n = tree.nodes()[i];
      if (n.alive && n.parent != kNoNode) os << format_double(value(i)) << '\n';
    }
  };
  os << "CELL_DATA " << nedges << '\n';
  cell_scalars("radius", [&](std::size_t i) { return tree.nodes()[i].radius; });
  cell_scalars("flow", [&](std::size_t i) { return tree.nodes()[i].flow; });
  cell_scalars("strahler", [&](std::size_t i) { return static_cast<double>(order[i]); });
  // Segment pressure is the outlet pressure of the vessel.
  cell_scalars("pressure_mmHg", [&](std::size_t i) { return units::internal_to_mmhg(pressure[i]); });
  os << "POINT_DATA " << npts << "\nSCALARS pressure_mmHg double 1\nLOOKUP_TABLE default\n";
  for (std::size_t i = 0; i < tree.size(); ++i)
    if (tree.nodes()[i].alive) os << format_double(units::internal_to_mmhg(pressure[i])) << '\n';
  if (!os) throw Error("failed writing '" + path + "'");
}

}  // namespace vasc
