/* SPDX-License-Identifier: Apache-2.0 */
#ifndef VASC_CONFIG_HPP
#define VASC_CONFIG_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vasc/centerline.hpp"
#include "vasc/domain.hpp"
#include "vasc/gco.hpp"
#include "vasc/sampling.hpp"
#include "vasc/tree.hpp"

namespace vasc {

enum class ValueType { integer, real, boolean, text, int_list, int3 };

struct KeySpec {
  std::string name;
  ValueType type = ValueType::real;
  std::string unit;  // empty when dimensionless
  std::optional<double> min;
  bool min_exclusive = false;
  std::optional<double> max;
  bool required = false;
  std::optional<std::string> default_value;
  std::vector<std::string> choices;  // allowed text values
  std::string help;
};

/// Every accepted key of the flat `key = value` configuration format.
const std::vector<KeySpec>& config_schema();

struct ConfigIssue {
  std::string key;
  int line = 0;  // 0 when not tied to a line
  std::string message;
};

struct ParsedConfig {
  std::map<std::string, std::string> values;  // raw text, defaults not applied
  std::vector<ConfigIssue> issues;
};

/// Parses and checks syntax, unknown and duplicate keys, types and ranges. With
/// `require_all`, missing required keys are reported too. All problems are collected.
ParsedConfig parse_config(const std::string& text, bool require_all);

/// Reads `path` and returns every problem found; throws only when the file is unreadable.
std::vector<ConfigIssue> validate_config(const std::string& path, bool require_all = true);

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string out_dir;

  // Domain: either a generated phantom or an ingested organ mask plus centerline.
  Index3 phantom_dims{64, 64, 64};
  double phantom_spacing = 150.0;
  std::string phantom_shape = "kidney";
  std::string whole_mask;
  std::string centerline_nodes;
  std::string centerline_edges;
  std::string artery_mask;
  std::int64_t root_id = 0;
  ArteryParams artery;

  double cortex_r1 = 2000.0;
  double cortex_r2 = 5650.0;
  SamplingConfig sampling;
  double max_depth = 0.0;
  int max_children = 4;

  GcoConfig gco;
  HemoConfig hemo;
  /// When set, the inlet flow becomes (terminal count) * terminal_flow.
  std::optional<double> terminal_flow;
  double pressure_bin_mmhg = 1.0;

  bool rasterize = false;
  double noise_sigma = 0.1;
  double noise_sp = 0.01;

  bool ingest() const { return !centerline_nodes.empty(); }
};

/// Parses `text`, throwing ConfigError with every issue when anything is wrong.
PipelineConfig config_from_text(const std::string& text, bool require_all);
PipelineConfig load_config(const std::string& path, bool require_all = true);

/// Reference configuration text with every required key set.
std::string describe_config(const PipelineConfig& config);

}  // namespace vasc

#endif  // VASC_CONFIG_HPP
