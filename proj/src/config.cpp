/* SPDX-License-Identifier: Apache-2.0 */
#include "vasc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vasc/text.hpp"

namespace vasc {

namespace {

KeySpec key(std::string name, ValueType type, std::string unit, std::optional<std::string> def, std::string help) {
  KeySpec k;
  k.name = std::move(name);
  k.type = type;
  k.unit = std::move(unit);
  k.default_value = std::move(def);
  k.help = std::move(help);
  return k;
}

KeySpec& at_least(KeySpec& k, double v, bool exclusive = false) {
  k.min = v;
  k.min_exclusive = exclusive;
  return k;
}

std::vector<KeySpec> build_schema() {
  using T = ValueType;
  std::vector<KeySpec> s;
  auto add = [&](KeySpec k) -> KeySpec& { return s.emplace_back(std::move(k)); };

  at_least(add(key("seed", T::integer, "", std::nullopt, "top-level RNG seed")), 0).required = true;
  add(key("out_dir", T::text, "", std::nullopt, "directory receiving all artifacts")).required = true;
  at_least(add(key("n_terminals", T::integer, "", std::nullopt, "number of terminal vessels")), 1).required = true;
  at_least(add(key("max_depth", T::real, "um", std::nullopt, "depth-prune distance of the prebuilt tree")), 0).required =
      true;

  at_least(add(key("phantom_dims", T::int3, "voxels", "64 64 64", "phantom grid size")), 32);
  at_least(add(key("phantom_spacing", T::real, "um", "150", "phantom voxel edge")), 0, true);
  add(key("phantom_shape", T::text, "", "kidney", "phantom shape")).choices = {"kidney", "sphere"};
  add(key("whole_mask", T::text, "", "", "organ mask file; replaces the phantom"));
  add(key("centerline_nodes", T::text, "", "", "centerline node CSV; replaces the synthetic skeleton"));
  add(key("centerline_edges", T::text, "", "", "centerline edge CSV"));
  add(key("artery_mask", T::text, "", "", "artery mask used to assign missing centerline radii"));
  at_least(add(key("root_id", T::integer, "", "0", "centerline id of the inlet node")), 0);
  at_least(add(key("artery_generations", T::integer, "", "4", "synthetic skeleton branching generations")), 1);
  at_least(add(key("artery_root_radius", T::real, "um", "400", "synthetic skeleton inlet radius")), 0, true);
  at_least(add(key("artery_step", T::real, "um", "150", "synthetic skeleton sample spacing")), 0, true);
  at_least(add(key("artery_min_depth", T::real, "um", "2000", "synthetic skeleton clearance from the surface")), 0);
  at_least(add(key("artery_branch_angle", T::real, "rad", "0.6", "synthetic skeleton branching angle")), 0);
  at_least(add(key("artery_loops", T::integer, "", "1", "loops added to the synthetic skeleton")), 0);
  at_least(add(key("artery_spurs", T::integer, "", "2", "spurs added to the synthetic skeleton")), 0);

  at_least(add(key("cortex_r1", T::real, "um", "2000", "cortex erosion radius")), 0, true);
  at_least(add(key("cortex_r2", T::real, "um", "5650", "exclusion radius around the root")), 0);
  at_least(add(key("rmin", T::real, "um", std::nullopt, "terminal minimum distance (default: from volume)")), 0, true);
  at_least(add(key("rmin_k", T::real, "", "1", "calibration factor of the derived minimum distance")), 0, true);
  at_least(add(key("r0_mean", T::real, "um", "10.08", "terminal radius mean")), 0, true);
  at_least(add(key("r0_std", T::real, "um", "0.14", "terminal radius standard deviation")), 0);
  at_least(add(key("max_children", T::integer, "", "4", "children kept per prebuilt node")), 1);

  at_least(add(key("w_c", T::real, "N/(um^2 s)", "5e-8", "volume cost weight")), 0);
  at_least(add(key("w_p", T::real, "", "1", "power cost weight")), 0);
  at_least(add(key("viscosity_mu", T::real, "N s/um^2", "3.6e-15", "blood viscosity")), 0, true);
  at_least(add(key("merge_ratio_threshold", T::real, "", "0.2", "shortest/second-shortest merge ratio")), 0, true);
  at_least(add(key("merge_abs_epsilon", T::real, "um", "1", "absolute merge length")), 0, true);
  add(key("prune_order_schedule", T::int_list, "", "2,2,1,1,1", "Strahler prune threshold per iteration"));
  at_least(add(key("max_iterations", T::integer, "", "5", "outer GCO iterations")), 0);
  at_least(add(key("relax_tolerance", T::real, "", "1e-8", "relative gradient-norm cutoff")), 0, true);
  at_least(add(key("relax_max_steps", T::integer, "", "100", "quasi-Newton steps per relaxation")), 1);
  at_least(add(key("min_edge_epsilon", T::real, "um", "1e-6", "coincidence distance")), 0, true);
  at_least(add(key("inner_tolerance", T::real, "", "1e-4", "relative improvement ending the inner loop")), 0, true);
  at_least(add(key("inner_max_steps", T::integer, "", "10", "inner loop cap")), 1);
  at_least(add(key("convergence_tolerance", T::real, "", "1e-4", "relative change ending the outer loop")), 0, true);
  add(key("attach_to_all_prebuilt", T::boolean, "", "false", "attach terminals to any prebuilt node"));
  add(key("parallel_subtrees", T::boolean, "", "false", "relax prebuilt subtrees concurrently"));

  at_least(add(key("inlet_flow_ml_min", T::real, "ml/min", "7", "inlet flow")), 0, true);
  at_least(add(key("terminal_flow", T::real, "um^3/s", std::nullopt, "per-terminal flow; overrides inlet flow")), 0,
           true);
  at_least(add(key("inlet_pressure_mmHg", T::real, "mmHg", "100", "inlet pressure")), 0, true);
  at_least(add(key("pressure_bin_mmHg", T::real, "mmHg", "1", "outlet pressure histogram bin")), 0, true);

  add(key("rasterize", T::boolean, "", "false", "write label map, noisy image and projection"));
  at_least(add(key("noise_sigma", T::real, "", "0.1", "Gaussian noise level")), 0);
  KeySpec& sp = at_least(add(key("noise_sp", T::real, "", "0.01", "salt-and-pepper fraction")), 0);
  sp.max = 1.0;
  return s;
}

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : config_schema())
    if (k.name == name) return &k;
  return nullptr;
}

std::vector<std::string_view> tokens(std::string_view v) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < v.size()) {
    while (i < v.size() && (v[i] == ',' || v[i] == ' ' || v[i] == '\t')) ++i;
    const std::size_t b = i;
    while (i < v.size() && v[i] != ',' && v[i] != ' ' && v[i] != '\t') ++i;
    if (i > b) out.push_back(v.substr(b, i - b));
  }
  return out;
}

bool parse_bool(std::string_view v, bool& out) {
  if (v == "true" || v == "1") {
    out = true;
    return true;
  }
  if (v == "false" || v == "0") {
    out = false;
    return true;
  }
  return false;
}

// Numeric values of `raw` for range checks; nullopt on a type error.
std::optional<std::vector<double>> numeric_values(const KeySpec& k, const std::string& raw) {
  std::vector<double> out;
  switch (k.type) {
    case ValueType::integer: {
      long long v;
      if (!text::parse(raw, v)) return std::nullopt;
      out.push_back(static_cast<double>(v));
      break;
    }
    case ValueType::real: {
      double v;
      if (!text::parse(raw, v) || !std::isfinite(v)) return std::nullopt;
      out.push_back(v);
      break;
    }
    case ValueType::int_list:
    case ValueType::int3: {
      for (auto t : tokens(raw)) {
        long long v;
        if (!text::parse(t, v)) return std::nullopt;
        out.push_back(static_cast<double>(v));
      }
      if (out.empty() || (k.type == ValueType::int3 && out.size() != 3)) return std::nullopt;
      break;
    }
    case ValueType::boolean: {
      bool b;
      if (!parse_bool(text::trim(raw), b)) return std::nullopt;
      break;
    }
    case ValueType::text:
      break;
  }
  return out;
}

const char* type_name(ValueType t) {
  switch (t) {
    case ValueType::integer: return "an integer";
    case ValueType::real: return "a finite number";
    case ValueType::boolean: return "true or false";
    case ValueType::text: return "text";
    case ValueType::int_list: return "a list of integers";
    case ValueType::int3: return "three integers";
  }
  return "";
}

}  // namespace

const std::vector<KeySpec>& config_schema() {
  static const std::vector<KeySpec> schema = build_schema();
  return schema;
}

ParsedConfig parse_config(const std::string& content, bool require_all) {
  ParsedConfig out;
  std::map<std::string, int> seen;
  std::istringstream is(content);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = text::trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      out.issues.push_back({"", lineno, "expected 'key = value'"});
      continue;
    }
    const std::string name(text::trim(body.substr(0, eq)));
    const std::string raw(text::trim(body.substr(eq + 1)));
    const KeySpec* k = find_key(name);
    if (!k) {
      out.issues.push_back({name, lineno, "unknown key '" + name + "'"});
      continue;
    }
    if (seen.count(name)) {
      out.issues.push_back({name, lineno, "duplicate key '" + name + "' (first on line " +
                                              std::to_string(seen[name]) + ")"});
      continue;
    }
    seen[name] = lineno;
    const auto nums = numeric_values(*k, raw);
    if (!nums) {
      out.issues.push_back({name, lineno, name + " must be " + type_name(k->type) + ", got '" + raw + "'"});
      continue;
    }
    if (k->type == ValueType::text && !k->choices.empty() &&
        std::find(k->choices.begin(), k->choices.end(), raw) == k->choices.end()) {
      std::string allowed;
      for (const auto& c : k->choices) allowed += (allowed.empty() ? "" : ", ") + c;
      out.issues.push_back({name, lineno, name + " must be one of " + allowed + ", got '" + raw + "'"});
      continue;
    }
    bool ok = true;
    for (double v : *nums) {
      if (k->min && (v < *k->min || (k->min_exclusive && v == *k->min))) {
        out.issues.push_back({name, lineno, name + " = " + raw + " is out of range: must be " +
                                                (k->min_exclusive ? "> " : ">= ") + text::format_double(*k->min) +
                                                (k->unit.empty() ? "" : " " + k->unit)});
        ok = false;
        break;
      }
      if (k->max && v > *k->max) {
        out.issues.push_back({name, lineno, name + " = " + raw + " is out of range: must be <= " +
                                                text::format_double(*k->max)});
        ok = false;
        break;
      }
    }
    if (ok) out.values[name] = raw;
  }
  if (require_all)
    for (const auto& k : config_schema())
      if (k.required && !seen.count(k.name)) out.issues.push_back({k.name, 0, "missing required key '" + k.name + "'"});
  // Cross-key rules.
  if (out.values.count("w_c") && out.values.count("w_p") && text::parse_or_throw<double>(out.values["w_c"], "w_c") == 0.0 &&
      text::parse_or_throw<double>(out.values["w_p"], "w_p") == 0.0)
    out.issues.push_back({"w_p", seen["w_p"], "w_c and w_p cannot both be zero"});
  const bool nodes = out.values.count("centerline_nodes") && !out.values["centerline_nodes"].empty();
  const bool edges = out.values.count("centerline_edges") && !out.values["centerline_edges"].empty();
  const bool whole = out.values.count("whole_mask") && !out.values["whole_mask"].empty();
  if (nodes != edges || (nodes && !whole) || (whole && !nodes))
    out.issues.push_back({"centerline_nodes", 0,
                          "whole_mask, centerline_nodes and centerline_edges must be given together"});
  return out;
}

std::vector<ConfigIssue> validate_config(const std::string& path, bool require_all) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), require_all).issues;
}

PipelineConfig config_from_text(const std::string& content, bool require_all) {
  ParsedConfig parsed = parse_config(content, require_all);
  if (!parsed.issues.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& i : parsed.issues)
      msg += "\n  " + (i.line ? "line " + std::to_string(i.line) + ": " : std::string()) + i.message;
    throw ConfigError(msg);
  }
  auto raw = [&](const std::string& name) -> std::optional<std::string> {
    auto it = parsed.values.find(name);
    if (it != parsed.values.end()) return it->second;
    return find_key(name)->default_value;
  };
  auto real = [&](const std::string& name, double& dst) {
    if (auto v = raw(name)) dst = text::parse_or_throw<double>(*v, name);
  };
  auto integer = [&](const std::string& name, auto& dst) {
    if (auto v = raw(name)) dst = static_cast<std::remove_reference_t<decltype(dst)>>(text::parse_or_throw<long long>(*v, name));
  };
  auto boolean = [&](const std::string& name, bool& dst) {
    if (auto v = raw(name)) parse_bool(text::trim(*v), dst);
  };
  auto str = [&](const std::string& name, std::string& dst) {
    if (auto v = raw(name)) dst = *v;
  };

  PipelineConfig c;
  if (auto v = raw("seed")) c.seed = text::parse_or_throw<std::uint64_t>(*v, "seed");
  str("out_dir", c.out_dir);
  integer("n_terminals", c.sampling.n_terminals);
  real("max_depth", c.max_depth);
  if (auto v = raw("phantom_dims")) {
    const auto t = tokens(*v);
    for (int a = 0; a < 3; ++a) c.phantom_dims[a] = text::parse_or_throw<int>(t[static_cast<std::size_t>(a)], "phantom_dims");
  }
  real("phantom_spacing", c.phantom_spacing);
  str("phantom_shape", c.phantom_shape);
  str("whole_mask", c.whole_mask);
  str("centerline_nodes", c.centerline_nodes);
  str("centerline_edges", c.centerline_edges);
  str("artery_mask", c.artery_mask);
  integer("root_id", c.root_id);
  integer("artery_generations", c.artery.generations);
  real("artery_root_radius", c.artery.root_radius);
  real("artery_step", c.artery.step);
  real("artery_min_depth", c.artery.min_depth);
  real("artery_branch_angle", c.artery.branch_angle);
  integer("artery_loops", c.artery.loops);
  integer("artery_spurs", c.artery.spurs);
  real("cortex_r1", c.cortex_r1);
  real("cortex_r2", c.cortex_r2);
  if (auto v = raw("rmin")) c.sampling.r_min = text::parse_or_throw<double>(*v, "rmin");
  real("rmin_k", c.sampling.r_min_scale);
  real("r0_mean", c.sampling.r0_mean);
  real("r0_std", c.sampling.r0_std);
  integer("max_children", c.max_children);

  real("w_c", c.gco.w_c);
  real("w_p", c.gco.w_p);
  real("viscosity_mu", c.gco.viscosity_mu);
  c.hemo.viscosity = c.gco.viscosity_mu;
  real("merge_ratio_threshold", c.gco.merge_ratio_threshold);
  real("merge_abs_epsilon", c.gco.merge_abs_epsilon);
  if (auto v = raw("prune_order_schedule")) {
    c.gco.prune_order_schedule.clear();
    for (auto t : tokens(*v)) c.gco.prune_order_schedule.push_back(text::parse_or_throw<int>(t, "prune_order_schedule"));
  }
  integer("max_iterations", c.gco.max_iterations);
  real("relax_tolerance", c.gco.relax_tolerance);
  integer("relax_max_steps", c.gco.relax_max_steps);
  real("min_edge_epsilon", c.gco.min_edge_epsilon);
  real("inner_tolerance", c.gco.inner_tolerance);
  integer("inner_max_steps", c.gco.inner_max_steps);
  real("convergence_tolerance", c.gco.convergence_tolerance);
  boolean("attach_to_all_prebuilt", c.gco.attach_to_all_prebuilt);
  boolean("parallel_subtrees", c.gco.parallel_subtrees);

  double q_ml = 7.0, p_mmhg = 100.0;
  real("inlet_flow_ml_min", q_ml);
  real("inlet_pressure_mmHg", p_mmhg);
  c.hemo.inlet_flow = units::ml_per_min_to_internal(q_ml);
  c.hemo.inlet_pressure = units::mmhg_to_internal(p_mmhg);
  if (auto v = raw("terminal_flow")) c.terminal_flow = text::parse_or_throw<double>(*v, "terminal_flow");
  real("pressure_bin_mmHg", c.pressure_bin_mmhg);
  boolean("rasterize", c.rasterize);
  real("noise_sigma", c.noise_sigma);
  real("noise_sp", c.noise_sp);
  return c;
}

PipelineConfig load_config(const std::string& path, bool require_all) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return config_from_text(ss.str(), require_all);
}

std::string describe_config(const PipelineConfig& c) {
  using text::format_double;
  std::ostringstream os;
  os << "seed = " << c.seed << '\n'
     << "out_dir = " << c.out_dir << '\n'
     << "n_terminals = " << c.sampling.n_terminals << '\n'
     << "max_depth = " << format_double(c.max_depth) << '\n'
     << "phantom_dims = " << c.phantom_dims.x() << ' ' << c.phantom_dims.y() << ' ' << c.phantom_dims.z() << '\n'
     << "phantom_spacing = " << format_double(c.phantom_spacing) << '\n'
     << "phantom_shape = " << c.phantom_shape << '\n';
  if (c.ingest()) {
    os << "whole_mask = " << c.whole_mask << '\n'
       << "centerline_nodes = " << c.centerline_nodes << '\n'
       << "centerline_edges = " << c.centerline_edges << '\n';
    if (!c.artery_mask.empty()) os << "artery_mask = " << c.artery_mask << '\n';
  }
  os << "root_id = " << c.root_id << '\n'
     << "artery_generations = " << c.artery.generations << '\n'
     << "artery_root_radius = " << format_double(c.artery.root_radius) << '\n'
     << "artery_step = " << format_double(c.artery.step) << '\n'
     << "artery_min_depth = " << format_double(c.artery.min_depth) << '\n'
     << "artery_branch_angle = " << format_double(c.artery.branch_angle) << '\n'
     << "artery_loops = " << c.artery.loops << '\n'
     << "artery_spurs = " << c.artery.spurs << '\n'
     << "cortex_r1 = " << format_double(c.cortex_r1) << '\n'
     << "cortex_r2 = " << format_double(c.cortex_r2) << '\n';
  if (c.sampling.r_min) os << "rmin = " << format_double(*c.sampling.r_min) << '\n';
  os << "rmin_k = " << format_double(c.sampling.r_min_scale) << '\n'
     << "r0_mean = " << format_double(c.sampling.r0_mean) << '\n'
     << "r0_std = " << format_double(c.sampling.r0_std) << '\n'
     << "max_children = " << c.max_children << '\n'
     << "w_c = " << format_double(c.gco.w_c) << '\n'
     << "w_p = " << format_double(c.gco.w_p) << '\n'
     << "viscosity_mu = " << format_double(c.gco.viscosity_mu) << '\n'
     << "merge_ratio_threshold = " << format_double(c.gco.merge_ratio_threshold) << '\n'
     << "merge_abs_epsilon = " << format_double(c.gco.merge_abs_epsilon) << '\n'
     << "prune_order_schedule = ";
  for (std::size_t i = 0; i < c.gco.prune_order_schedule.size(); ++i)
    os << (i ? "," : "") << c.gco.prune_order_schedule[i];
  os << '\n'
     << "max_iterations = " << c.gco.max_iterations << '\n'
     << "relax_tolerance = " << format_double(c.gco.relax_tolerance) << '\n'
     << "relax_max_steps = " << c.gco.relax_max_steps << '\n'
     << "min_edge_epsilon = " << format_double(c.gco.min_edge_epsilon) << '\n'
     << "inner_tolerance = " << format_double(c.gco.inner_tolerance) << '\n'
     << "inner_max_steps = " << c.gco.inner_max_steps << '\n'
     << "convergence_tolerance = " << format_double(c.gco.convergence_tolerance) << '\n'
     << "attach_to_all_prebuilt = " << (c.gco.attach_to_all_prebuilt ? "true" : "false") << '\n'
     << "parallel_subtrees = " << (c.gco.parallel_subtrees ? "true" : "false") << '\n'
     << "inlet_flow_ml_min = " << format_double(c.hemo.inlet_flow / units::kMlPerMin) << '\n'
     << "inlet_pressure_mmHg = " << format_double(units::internal_to_mmhg(c.hemo.inlet_pressure)) << '\n';
  if (c.terminal_flow) os << "terminal_flow = " << format_double(*c.terminal_flow) << '\n';
  os << "pressure_bin_mmHg = " << format_double(c.pressure_bin_mmhg) << '\n'
     << "rasterize = " << (c.rasterize ? "true" : "false") << '\n'
     << "noise_sigma = " << format_double(c.noise_sigma) << '\n'
     << "noise_sp = " << format_double(c.noise_sp) << '\n';
  return os.str();
}

}  // namespace vasc
