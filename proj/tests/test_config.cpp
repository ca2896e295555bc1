/* SPDX-License-Identifier: Apache-2.0 */
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>

#include "support.hpp"
#include "vasc/config.hpp"
#include "vasc/pipeline.hpp"

using namespace vasc;
namespace fs = std::filesystem;

namespace {

bool mentions(const std::vector<ConfigIssue>& issues, const std::string& key, const std::string& word) {
  for (const auto& i : issues)
    if (i.key == key && i.message.find(word) != std::string::npos) return true;
  return false;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

TEST_CASE("an empty file lists every missing required key") {
  const ParsedConfig p = parse_config("", true);
  std::set<std::string> missing;
  for (const auto& i : p.issues) {
    CHECK(i.message.find("missing") != std::string::npos);
    missing.insert(i.key);
  }
  std::set<std::string> required;
  for (const auto& k : config_schema())
    if (k.required) required.insert(k.name);
  CHECK(missing == required);
  CHECK(required.count("n_terminals"));
  CHECK(parse_config("", false).issues.empty());
}

TEST_CASE("range violations") {
  CHECK(mentions(parse_config("w_p = -1\n", false).issues, "w_p", "out of range"));
  CHECK(mentions(parse_config("phantom_spacing = 0\n", false).issues, "phantom_spacing", "out of range"));
  CHECK(mentions(parse_config("noise_sp = 1.5\n", false).issues, "noise_sp", "out of range"));
  CHECK(mentions(parse_config("phantom_dims = 16 64 64\n", false).issues, "phantom_dims", "out of range"));
  CHECK(mentions(parse_config("w_c = 0\nw_p = 0\n", false).issues, "w_p", "both be zero"));
}

TEST_CASE("the reference configuration is clean") {
  const std::string text = vt::smoke_config("/tmp/out");
  CHECK(parse_config(text, true).issues.empty());
  const PipelineConfig c = config_from_text(text, true);
  CHECK(c.sampling.n_terminals == 200);
  CHECK(c.gco.max_iterations == 3);
  CHECK(c.phantom_shape == "sphere");
  REQUIRE(c.terminal_flow);
  CHECK(*c.terminal_flow == 3.89e6);
  // Defaults fill everything not written.
  CHECK(c.gco.w_c == 5e-8);
  CHECK(c.gco.viscosity_mu == 3.6e-15);
  CHECK(c.hemo.viscosity == c.gco.viscosity_mu);

  const std::string described = describe_config(c);
  CHECK(parse_config(described, true).issues.empty());
  CHECK(describe_config(config_from_text(described, true)) == described);
}

TEST_CASE("every problem is reported, not just the first") {
  const std::string text =
      "seed = 1\n"
      "out_dir = x\n"
      "bogus = 3\n"
      "n_terminals = many\n"
      "w_p = -1\n"
      "phantom_shape = cube\n"
      "seed = 2\n"
      "no equals sign\n"
      "parallel_subtrees = maybe\n";
  const ParsedConfig p = parse_config(text, true);
  CHECK(mentions(p.issues, "bogus", "unknown"));
  CHECK(mentions(p.issues, "n_terminals", "integer"));
  CHECK(mentions(p.issues, "w_p", "out of range"));
  CHECK(mentions(p.issues, "phantom_shape", "one of"));
  CHECK(mentions(p.issues, "seed", "duplicate"));
  CHECK(mentions(p.issues, "", "key = value"));
  CHECK(mentions(p.issues, "parallel_subtrees", "true or false"));
  CHECK(mentions(p.issues, "max_depth", "missing"));
  for (const auto& i : p.issues)
    if (i.key == "bogus") CHECK(i.line == 3);

  try {
    config_from_text(text, true);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("bogus") != std::string::npos);
    CHECK(what.find("w_p") != std::string::npos);
  }
  CHECK(mentions(parse_config("whole_mask = a.mask\n", false).issues, "centerline_nodes", "together"));
}

TEST_CASE("files: unreadable, commented and valid") {
  const auto dir = vt::scratch_dir("config_files");
  CHECK_THROWS_AS(validate_config((dir / "absent.conf").string()), ConfigError);
  CHECK_THROWS_AS(load_config((dir / "absent.conf").string()), ConfigError);
  {
    std::ofstream os(dir / "ok.conf");
    os << "# reference run\n\n" << vt::smoke_config((dir / "out").string()) << "w_p = 1  # trailing comment\n";
  }
  CHECK(validate_config((dir / "ok.conf").string()).empty());
  CHECK(load_config((dir / "ok.conf").string()).out_dir == (dir / "out").string());
}

TEST_CASE("the pipeline writes every artifact and a complete manifest") {
  const auto dir = vt::scratch_dir("pipeline_smoke");
  PipelineConfig c = config_from_text(vt::smoke_config((dir / "a").string()), true);
  c.rasterize = true;
  const auto records = run_pipeline(c);
  const std::vector<std::string> stages{"phantom", "centerline", "cortex", "sample",
                                        "preprocess", "build", "analyze", "rasterize"};
  REQUIRE(records.size() == stages.size());
  for (std::size_t i = 0; i < stages.size(); ++i) {
    CHECK(records[i].stage == stages[i]);
    CHECK_FALSE(records[i].outputs.empty());
    for (const auto& [name, h] : records[i].outputs) CHECK(h != 0);
  }
  for (const char* f : {"whole.mask", "artery.mask", "cortex.mask", "terminals.csv", "prebuilt_nodes.csv",
                        "tree_nodes.csv", "tree_edges.csv", "trace.csv", "tree.vtk", "report/per_order.csv",
                        "report/fit.csv", "label.mask", "image.vol", "mip.pgm", "manifest.csv"})
    CHECK_MESSAGE(fs::exists(dir / "a" / f), f);

  // Manifest: header plus one line per stage, and the recorded hashes match the files.
  std::ifstream is(dir / "a" / "manifest.csv");
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  CHECK(lines == 1 + static_cast<int>(stages.size()));
  for (const auto& r : records)
    for (const auto& [name, h] : r.outputs)
      if (name.find('/') == std::string::npos && fs::exists(dir / "a" / name)) CHECK(hash_file((dir / "a" / name).string()) == h);

  const VesselTree tree = read_tree((dir / "a" / "tree").string());
  CHECK(tree.terminals().size() == read_terminals((dir / "a" / "terminals.csv").string()).size());
  CHECK(validate(tree).empty());
}

TEST_CASE("identical reruns give identical artifacts") {
  const auto dir = vt::scratch_dir("pipeline_rerun");
  const auto a = run_pipeline(config_from_text(vt::smoke_config((dir / "a").string(), 120, 2), true));
  const auto b = run_pipeline(config_from_text(vt::smoke_config((dir / "b").string(), 120, 2), true));
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].inputs == b[i].inputs);
    CHECK(a[i].outputs == b[i].outputs);
  }
  CHECK(slurp(dir / "a" / "tree_nodes.csv") == slurp(dir / "b" / "tree_nodes.csv"));
  const auto c = run_pipeline(config_from_text(vt::smoke_config((dir / "c").string(), 120, 2, 8), true));
  // The sphere phantom has no random part; the seed shows up from sampling on.
  CHECK(c[0].outputs == a[0].outputs);
  CHECK(c[3].outputs != a[3].outputs);
}

TEST_CASE("a missing input halts the pipeline and names the stage") {
  const auto dir = vt::scratch_dir("pipeline_missing");
  PipelineConfig c = config_from_text(vt::smoke_config((dir / "out").string()), true);
  c.whole_mask = (dir / "nope.mask").string();
  c.centerline_nodes = (dir / "nodes.csv").string();
  c.centerline_edges = (dir / "edges.csv").string();
  try {
    run_pipeline(c);
    FAIL("expected a StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "ingest");
    CHECK(std::string(e.what()).find("nope.mask") != std::string::npos);
  }
  CHECK(fs::exists(dir / "out" / "manifest.csv"));

  // A failure after some stages succeeded keeps their manifest lines.
  PipelineConfig late = config_from_text(vt::smoke_config((dir / "late").string()), true);
  late.cortex_r2 = 1e7;  // excludes the whole organ
  try {
    run_pipeline(late);
    FAIL("expected a StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "cortex");
  }
  std::ifstream is(dir / "late" / "manifest.csv");
  std::string header, first;
  std::getline(is, header);
  std::getline(is, first);
  CHECK(first.rfind("phantom,", 0) == 0);
}
