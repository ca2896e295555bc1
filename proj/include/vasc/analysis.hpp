/* SPDX-License-Identifier: Apache-2.0 */
#ifndef VASC_ANALYSIS_HPP
#define VASC_ANALYSIS_HPP

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vasc/tree.hpp"

namespace vasc {

struct OrderStats {
  int order = 0;
  std::size_t count = 0;
  double radius_mean = 0.0;  // um
  double radius_std = 0.0;   // population std
  double length_mean = 0.0;  // um
  double length_std = 0.0;
  double area_mm2 = 0.0;     // summed cross sections
  double flow_mean = 0.0;    // um^3/s
};

struct LogLinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

struct MorphometryReport {
  std::vector<OrderStats> per_order;  // orders 0..max, contiguous
  /// (order of the vessel feeding a terminal's parent node, terminal count). Terminals
  /// hanging directly from the root are counted under the highest order.
  std::vector<std::pair<int, std::size_t>> aa_parent_hist;
  /// Absent when fewer than three orders have vessels.
  std::optional<LogLinearFit> fit;
};

struct HistogramBin {
  double lower = 0.0;  // mmHg
  std::size_t count = 0;
};

struct HemodynamicsReport {
  std::vector<std::pair<int, double>> flow_mean;  // per order, um^3/s
  double min_pressure_mmhg = 0.0;
  double max_pressure_mmhg = 0.0;
  double aa_pressure_mean_mmhg = 0.0;
  double aa_pressure_std_mmhg = 0.0;
  std::vector<HistogramBin> aa_pressure_hist;
};

MorphometryReport morphometry(const VesselTree& tree);

/// OLS of ln(count) on order over the nonzero counts; counts[i] belongs to order i.
LogLinearFit log_linear_fit(std::span<const double> counts);

HemodynamicsReport hemodynamics(const VesselTree& tree, const HemoConfig& config, double bin_width_mmhg = 1.0);

struct BranchingAngles {
  std::vector<double> degrees;  // one per (junction, child), ascending node order
  std::vector<NodeId> skipped;  // junctions with a zero-length incident vessel
};

/// Angle between the parent vessel direction and each child vessel direction.
BranchingAngles branching_angles(const VesselTree& tree);

// per_order.csv, aa_parent_hist.csv, aa_pressure_hist.csv, fit.csv and pressure_summary.csv
// in `dir`.
void export_report(const MorphometryReport& morph, const HemodynamicsReport& hemo, const std::string& dir);
std::pair<MorphometryReport, HemodynamicsReport> read_report(const std::string& dir);

}  // namespace vasc

#endif  // VASC_ANALYSIS_HPP
