/* SPDX-License-Identifier: Apache-2.0 */
// Command-line front end. Every subcommand only reads inputs, calls the library and
// writes the result.

#include <array>
#include <cmath>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "vasc/analysis.hpp"
#include "vasc/config.hpp"
#include "vasc/pipeline.hpp"
#include "vasc/raster.hpp"
#include "vasc/text.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

vasc::Vec3 to_vec(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

}  // namespace

int main(int argc, char** argv) {
  using namespace vasc;
  CLI::App app{"Synthesize, analyze and rasterize arterial trees inside voxelized organs."};
  app.require_subcommand(1);

  // phantom
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic organ mask");
  std::array<int, 3> dims{64, 64, 64};
  double spacing = 150.0;
  std::uint64_t seed = 0;
  std::string shape = "kidney", out, root_out;
  phantom->add_option("--dims", dims, "voxels per axis (>= 32 each)");
  phantom->add_option("--spacing", spacing, "voxel edge length [um]");
  phantom->add_option("--seed", seed, "RNG seed");
  phantom->add_option("--shape", shape, "kidney or sphere")->check(CLI::IsMember({"kidney", "sphere"}));
  phantom->add_option("--out", out, "output mask file")->required();
  phantom->add_option("--root-out", root_out, "CSV receiving the root position x,y,z [um]");

  // cortex
  auto* cortex = app.add_subcommand("cortex", "Approximate the cortex as a surface shell");
  std::string mask_in;
  double r1 = 2000.0, r2 = 5650.0;
  std::array<double, 3> root{0, 0, 0};
  cortex->add_option("--mask", mask_in, "whole-organ mask")->required();
  cortex->add_option("--r1", r1, "erosion radius [um]");
  cortex->add_option("--r2", r2, "exclusion radius around the root [um]");
  cortex->add_option("--root", root, "root position x y z [um]")->required();
  cortex->add_option("--out", out, "output mask file")->required();

  // sample
  auto* sample = app.add_subcommand("sample", "Place terminal nodes in the cortex");
  int n_terminals = 0;
  double rmin = 0.0, rmin_k = 1.0, r0_mean = 10.08, r0_std = 0.14;
  sample->add_option("--cortex", mask_in, "cortex mask")->required();
  sample->add_option("--n", n_terminals, "number of terminals")->required();
  auto* rmin_opt = sample->add_option("--rmin", rmin, "minimum distance [um]; derived from volume when absent");
  sample->add_option("--rmin-k", rmin_k, "calibration factor of the derived minimum distance");
  sample->add_option("--r0-mean", r0_mean, "terminal radius mean [um]");
  sample->add_option("--r0-std", r0_std, "terminal radius standard deviation [um]");
  sample->add_option("--seed", seed, "RNG seed")->required();
  sample->add_option("--out", out, "output terminal CSV")->required();

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "Turn a raw centerline graph into a prebuilt tree");
  std::string nodes, edges, artery, out_prefix;
  std::int64_t root_id = 0;
  double max_depth = 0.0;
  int max_children = 4;
  prep->add_option("--nodes", nodes, "node CSV id,x,y,z[,radius] [um]")->required();
  prep->add_option("--edges", edges, "edge CSV id_a,id_b[,radius] [um]")->required();
  prep->add_option("--root-id", root_id, "id of the inlet node")->required();
  prep->add_option("--max-depth", max_depth, "path length kept from the root [um]")->required();
  prep->add_option("--max-children", max_children, "children kept per node");
  prep->add_option("--artery-mask", artery, "artery mask supplying missing edge radii");
  prep->add_option("--out-prefix", out_prefix, "output tree prefix")->required();

  // build
  auto* build = app.add_subcommand("build", "Grow the full tree by global constructive optimization");
  std::string prebuilt_prefix, terminals_in, config_path, trace_out, vtk_out;
  build->add_option("--prebuilt-prefix", prebuilt_prefix, "prebuilt tree prefix")->required();
  build->add_option("--terminals", terminals_in, "terminal CSV")->required();
  build->add_option("--config", config_path, "key = value configuration")->required();
  build->add_option("--out-prefix", out_prefix, "output tree prefix")->required();
  build->add_option("--trace", trace_out, "convergence trace CSV")->required();
  build->add_option("--vtk", vtk_out, "optional legacy VTK polydata output");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Morphometric and hemodynamic statistics");
  std::string tree_prefix, out_dir;
  analyze->add_option("--tree-prefix", tree_prefix, "tree prefix")->required();
  analyze->add_option("--config", config_path, "key = value configuration")->required();
  analyze->add_option("--out-dir", out_dir, "directory receiving the CSV tables")->required();

  // rasterize
  auto* raster = app.add_subcommand("rasterize", "Voxelize a tree into a label mask");
  std::array<double, 3> origin{0, 0, 0};
  raster->add_option("--tree-prefix", tree_prefix, "tree prefix")->required();
  raster->add_option("--dims", dims, "voxels per axis")->required();
  raster->add_option("--spacing", spacing, "voxel edge length [um]")->required();
  raster->add_option("--origin", origin, "grid origin x y z [um]");
  raster->add_option("--out", out, "output mask file")->required();

  // synthesize
  auto* synth = app.add_subcommand("synthesize", "Noisy image from a label mask");
  std::string label_in, mip_out;
  double sigma = 0.1, sp = 0.01;
  synth->add_option("--label", label_in, "label mask")->required();
  synth->add_option("--sigma", sigma, "Gaussian noise standard deviation (intensity units)");
  synth->add_option("--sp", sp, "salt-and-pepper fraction in [0, 1]");
  synth->add_option("--seed", seed, "RNG seed")->required();
  synth->add_option("--out", out, "output volume file")->required();
  synth->add_option("--mip", mip_out, "optional projection along z as ASCII PGM");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Run every stage from one configuration");
  pipe->add_option("--config", config_path, "key = value configuration")->required();

  // validate-config
  auto* vconf = app.add_subcommand("validate-config", "Report every problem in a configuration file");
  vconf->add_option("path", config_path, "configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*phantom) {
      const ShapeParams sh = shape == "sphere" ? ShapeParams::sphere() : ShapeParams::kidney();
      const Phantom ph = generate_phantom(Index3(dims[0], dims[1], dims[2]), spacing, sh, seed);
      write_mask(ph.mask, out);
      if (!root_out.empty()) {
        auto os = text::open_output(root_out);
        os << "x,y,z\n"
           << text::format_double(ph.root.x()) << ',' << text::format_double(ph.root.y()) << ','
           << text::format_double(ph.root.z()) << '\n';
      }
      std::cout << "root " << text::format_double(ph.root.x()) << ' ' << text::format_double(ph.root.y()) << ' '
                << text::format_double(ph.root.z()) << '\n';
    } else if (*cortex) {
      write_mask(extract_cortex(read_mask(mask_in), {r1, r2, to_vec(root)}), out);
    } else if (*sample) {
      SamplingConfig sc;
      sc.n_terminals = n_terminals;
      if (*rmin_opt) sc.r_min = rmin;
      sc.r_min_scale = rmin_k;
      sc.r0_mean = r0_mean;
      sc.r0_std = r0_std;
      sc.seed = seed;
      const TerminalSample ts = sample_terminals(read_mask(mask_in), sc);
      if (ts.below_half_target)
        std::cerr << "warning: only " << ts.terminals.size() << " of " << n_terminals << " terminals placed\n";
      write_terminals(ts.terminals, out);
      std::cout << "terminals " << ts.terminals.size() << " r_min " << text::format_double(ts.r_min) << '\n';
    } else if (*prep) {
      CenterlineGraph g = read_centerline(nodes, edges);
      if (!artery.empty()) g = assign_edge_radii(g, distance_transform(read_mask(artery)));
      for (const auto& e : g.edges)
        if (std::isnan(e.radius)) throw Error("centerline edges lack radii; pass --artery-mask");
      write_tree(preprocess_centerline(g, {root_id, max_depth, max_children}), out_prefix);
    } else if (*build) {
      const PipelineConfig pc = load_config(config_path, false);
      const TerminalSet terms = read_terminals(terminals_in);
      const HemoConfig hemo = effective_hemo(pc, terms.size());
      const GcoResult res = run(read_tree(prebuilt_prefix), terms, pc.gco, hemo);
      write_trace(res.trace, trace_out);
      if (res.error) throw Error(*res.error);
      write_tree(res.tree, out_prefix);
      if (!vtk_out.empty()) write_vtk(res.tree, hemo, vtk_out);
      std::cout << "cost " << text::format_double(res.trace.back().cost) << " nodes " << res.tree.live_count()
                << '\n';
    } else if (*analyze) {
      const PipelineConfig pc = load_config(config_path, false);
      const VesselTree tree = read_tree(tree_prefix);
      const HemoConfig hemo = effective_hemo(pc, tree.terminals().size());
      export_report(morphometry(tree), hemodynamics(tree, hemo, pc.pressure_bin_mmhg), out_dir);
    } else if (*raster) {
      GridGeometry g{Index3(dims[0], dims[1], dims[2]), spacing, to_vec(origin)};
      write_mask(rasterize(read_tree(tree_prefix), g), out);
    } else if (*synth) {
      const ScalarVolume vol = add_noise(read_mask(label_in), sigma, sp, seed);
      write_volume(vol, out);
      if (!mip_out.empty()) write_pgm(max_intensity_projection(vol, 2), mip_out);
    } else if (*pipe) {
      const auto records = run_pipeline(load_config(config_path, true));
      for (const auto& r : records) std::cout << r.stage << ' ' << text::format_double(r.wall_seconds) << " s\n";
    } else if (*vconf) {
      const auto issues = validate_config(config_path, true);
      for (const auto& i : issues)
        std::cout << config_path << ':' << i.line << ": " << (i.key.empty() ? "" : i.key + ": ") << i.message
                  << '\n';
      return issues.empty() ? 0 : kExitUsage;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
