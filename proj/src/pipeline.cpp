/* SPDX-License-Identifier: Apache-2.0 */
#include "vasc/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "vasc/analysis.hpp"
#include "vasc/raster.hpp"
#include "vasc/text.hpp"

namespace vasc {

namespace fs = std::filesystem;

std::uint64_t hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof(buf));
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

HemoConfig effective_hemo(const PipelineConfig& config, std::size_t n_terminals) {
  HemoConfig h = config.hemo;
  if (config.terminal_flow) h.inlet_flow = *config.terminal_flow * static_cast<double>(n_terminals);
  return h;
}

void write_manifest(const std::vector<StageRecord>& records, const std::string& path) {
  auto os = text::open_output(path);
  auto list = [](const std::vector<std::pair<std::string, std::uint64_t>>& items) {
    std::string s;
    char hex[17];
    for (const auto& [name, h] : items) {
      std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
      s += (s.empty() ? "" : ";") + name + "=" + hex;
    }
    return s;
  };
  os << "stage,inputs,outputs,wall_seconds\n";
  for (const auto& r : records)
    os << r.stage << ',' << list(r.inputs) << ',' << list(r.outputs) << ',' << text::format_double(r.wall_seconds)
       << '\n';
  if (!os) throw Error("failed writing '" + path + "'");
}

std::vector<StageRecord> run_pipeline(const PipelineConfig& config) {
  if (config.out_dir.empty()) throw ConfigError("out_dir is required");
  try {
    fs::create_directories(config.out_dir);
  } catch (const std::exception& e) {
    throw StageError("setup", e.what());
  }
  const fs::path dir(config.out_dir);
  auto out = [&](const std::string& name) { return (dir / name).string(); };

  std::vector<StageRecord> manifest;
  // Runs one stage; `inputs` are hashed before it starts and `outputs` after it ends.
  auto stage = [&](const std::string& name, std::vector<std::string> inputs, std::vector<std::string> outputs,
                   const std::function<void()>& body) {
    StageRecord rec;
    rec.stage = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      for (const auto& p : inputs) {
        if (!fs::exists(p)) throw Error("missing input file '" + p + "'");
        rec.inputs.emplace_back(fs::path(p).filename().string(), hash_file(p));
      }
      body();
      for (const auto& p : outputs) rec.outputs.emplace_back(fs::path(p).filename().string(), hash_file(p));
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      write_manifest(manifest, out("manifest.csv"));
      throw StageError(name, e.what());
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest.push_back(std::move(rec));
  };

  VoxelMask whole;
  Vec3 root = Vec3::Zero();
  CenterlineGraph graph;
  std::int64_t root_id = config.root_id;

  if (config.ingest()) {
    stage("ingest", {config.whole_mask, config.centerline_nodes, config.centerline_edges},
          {out("centerline_nodes.csv"), out("centerline_edges.csv")}, [&] {
            whole = read_mask(config.whole_mask);
            graph = read_centerline(config.centerline_nodes, config.centerline_edges);
            bool missing = false;
            for (const auto& e : graph.edges) missing = missing || std::isnan(e.radius);
            if (missing) {
              if (config.artery_mask.empty()) throw Error("centerline edges lack radii and no artery_mask is given");
              graph = assign_edge_radii(graph, distance_transform(read_mask(config.artery_mask)));
            }
            const int r = graph.index_of(root_id);
            if (r < 0) throw Error("root id " + std::to_string(root_id) + " is not a centerline node");
            root = graph.positions[static_cast<std::size_t>(r)];
            write_centerline(graph, out("centerline_nodes.csv"), out("centerline_edges.csv"));
          });
  } else {
    stage("phantom", {}, {out("whole.mask")}, [&] {
      const ShapeParams shape = config.phantom_shape == "sphere" ? ShapeParams::sphere() : ShapeParams::kidney();
      Phantom ph = generate_phantom(config.phantom_dims, config.phantom_spacing, shape,
                                    stream_seed(config.seed, kStreamPhantom));
      whole = std::move(ph.mask);
      root = ph.root;
      write_mask(whole, out("whole.mask"));
    });
    stage("centerline", {out("whole.mask")},
          {out("artery.mask"), out("centerline_nodes.csv"), out("centerline_edges.csv")}, [&] {
            graph = synthesize_centerline(whole, root, config.artery, stream_seed(config.seed, kStreamCenterline));
            // Stand-in for a segmented artery image: voxelize the skeleton, then measure it.
            std::vector<TubeSegment> segs;
            for (const auto& e : graph.edges) {
              TubeSegment s{graph.positions[static_cast<std::size_t>(e.a)],
                            graph.positions[static_cast<std::size_t>(e.b)], e.radius, e.radius};
              if (s.length() > 0.0) segs.push_back(s);
            }
            const VoxelMask artery = rasterize(segs, whole.grid());
            write_mask(artery, out("artery.mask"));
            graph = assign_edge_radii(graph, distance_transform(artery));
            root_id = 0;
            write_centerline(graph, out("centerline_nodes.csv"), out("centerline_edges.csv"));
          });
  }

  VoxelMask cortex;
  stage("cortex", {}, {out("cortex.mask")}, [&] {
    cortex = extract_cortex(whole, {config.cortex_r1, config.cortex_r2, root});
    write_mask(cortex, out("cortex.mask"));
  });

  TerminalSet terminals;
  stage("sample", {out("cortex.mask")}, {out("terminals.csv")}, [&] {
    SamplingConfig sc = config.sampling;
    sc.seed = stream_seed(config.seed, kStreamSampling);
    TerminalSample ts = sample_terminals(cortex, sc);
    if (ts.below_half_target)
      std::cerr << "warning: only " << ts.terminals.size() << " of " << sc.n_terminals
                << " terminals could be placed\n";
    terminals = std::move(ts.terminals);
    write_terminals(terminals, out("terminals.csv"));
  });

  VesselTree prebuilt;
  stage("preprocess", {out("centerline_nodes.csv"), out("centerline_edges.csv")},
        {out("prebuilt_nodes.csv"), out("prebuilt_edges.csv")}, [&] {
          prebuilt = preprocess_centerline(graph, {root_id, config.max_depth, config.max_children});
          write_tree(prebuilt, out("prebuilt"));
        });

  const HemoConfig hemo = effective_hemo(config, terminals.size());
  VesselTree tree;
  stage("build", {out("prebuilt_nodes.csv"), out("prebuilt_edges.csv"), out("terminals.csv")},
        {out("tree_nodes.csv"), out("tree_edges.csv"), out("trace.csv"), out("tree.vtk")}, [&] {
          GcoConfig gc = config.gco;
          gc.seed = stream_seed(config.seed, kStreamGco);
          GcoResult res = run(prebuilt, terminals, gc, hemo);
          write_trace(res.trace, out("trace.csv"));
          if (res.error) throw Error(*res.error);
          tree = std::move(res.tree);
          write_tree(tree, out("tree"));
          write_vtk(tree, hemo, out("tree.vtk"));
        });

  const std::string report = out("report");
  stage("analyze", {out("tree_nodes.csv"), out("tree_edges.csv")},
        {report + "/per_order.csv", report + "/aa_parent_hist.csv", report + "/aa_pressure_hist.csv",
         report + "/fit.csv", report + "/pressure_summary.csv"},
        [&] { export_report(morphometry(tree), hemodynamics(tree, hemo, config.pressure_bin_mmhg), report); });

  if (config.rasterize) {
    stage("rasterize", {out("tree_nodes.csv"), out("tree_edges.csv")},
          {out("label.mask"), out("image.vol"), out("mip.pgm")}, [&] {
            const VoxelMask label = rasterize(tree, whole.grid());
            write_mask(label, out("label.mask"));
            const ScalarVolume img =
                add_noise(label, config.noise_sigma, config.noise_sp, stream_seed(config.seed, kStreamNoise));
            write_volume(img, out("image.vol"));
            write_pgm(max_intensity_projection(img, 2), out("mip.pgm"));
          });
  }
  write_manifest(manifest, out("manifest.csv"));
  return manifest;
}

}  // namespace vasc
