/* SPDX-License-Identifier: Apache-2.0 */
#include "vasc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>

#include "vasc/text.hpp"

namespace vasc {

namespace {

struct Moments {
  std::size_t n = 0;
  double sum = 0.0;
  double sum_sq_dev = 0.0;
  double mean = 0.0;

  // Welford update; order of insertion is ascending node id, so results are reproducible.
  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    sum_sq_dev += d * (x - mean);
    sum += x;
  }
  double std_dev() const { return n ? std::sqrt(sum_sq_dev / static_cast<double>(n)) : 0.0; }
};

int max_order(const std::vector<int>& orders) {
  int m = -1;
  for (int o : orders) m = std::max(m, o);
  return m;
}

}  // namespace

MorphometryReport morphometry(const VesselTree& tree) {
  MorphometryReport rep;
  const auto orders = strahler_orders(tree);
  const int top = max_order(orders);
  if (top < 0) return rep;
  std::vector<Moments> radius(static_cast<std::size_t>(top) + 1), length(radius.size()), flow(radius.size());
  std::vector<double> area(radius.size(), 0.0);
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const int o = orders[i];
    if (o < 0) continue;
    const Node& n = tree.node(static_cast<NodeId>(i));
    const auto k = static_cast<std::size_t>(o);
    radius[k].add(n.radius);
    length[k].add(tree.edge_length(static_cast<NodeId>(i)));
    flow[k].add(n.flow);
    area[k] += units::kPi * n.radius * n.radius;
  }
  std::vector<double> counts;
  for (std::size_t k = 0; k < radius.size(); ++k) {
    OrderStats s;
    s.order = static_cast<int>(k);
    s.count = radius[k].n;
    s.radius_mean = radius[k].mean;
    s.radius_std = radius[k].std_dev();
    s.length_mean = length[k].mean;
    s.length_std = length[k].std_dev();
    s.area_mm2 = area[k] / units::kMm2;
    s.flow_mean = flow[k].mean;
    rep.per_order.push_back(s);
    counts.push_back(static_cast<double>(s.count));
  }

  std::map<int, std::size_t> hist;
  for (NodeId t : tree.terminals()) {
    const NodeId p = tree.node(t).parent;
    if (p == kNoNode) continue;
    const int o = orders[static_cast<std::size_t>(p)];
    ++hist[o < 0 ? top : o];
  }
  rep.aa_parent_hist.assign(hist.begin(), hist.end());

  if (std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) >= 3)
    rep.fit = log_linear_fit(counts);
  return rep;
}

LogLinearFit log_linear_fit(std::span<const double> counts) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (counts[i] > 0.0) {
      xs.push_back(static_cast<double>(i));
      ys.push_back(std::log(counts[i]));
    }
  if (xs.size() < 3) throw Error("log-linear fit needs at least three nonzero counts");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  LogLinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  // A flat response is fit perfectly by the flat line.
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

HemodynamicsReport hemodynamics(const VesselTree& tree, const HemoConfig& config, double bin_width_mmhg) {
  if (!(bin_width_mmhg > 0.0)) throw Error("pressure bin width must be > 0");
  HemodynamicsReport rep;
  for (const auto& s : morphometry(tree).per_order) rep.flow_mean.emplace_back(s.order, s.flow_mean);

  const auto pressure = compute_pressures(tree, config);
  rep.min_pressure_mmhg = std::numeric_limits<double>::infinity();
  rep.max_pressure_mmhg = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tree.size(); ++i) {
    if (!tree.node(static_cast<NodeId>(i)).alive || std::isnan(pressure[i])) continue;
    const double p = units::internal_to_mmhg(pressure[i]);
    rep.min_pressure_mmhg = std::min(rep.min_pressure_mmhg, p);
    rep.max_pressure_mmhg = std::max(rep.max_pressure_mmhg, p);
  }
  Moments aa;
  std::vector<double> outlet;
  for (NodeId t : tree.terminals()) {
    const double p = units::internal_to_mmhg(pressure[static_cast<std::size_t>(t)]);
    aa.add(p);
    outlet.push_back(p);
  }
  rep.aa_pressure_mean_mmhg = aa.mean;
  rep.aa_pressure_std_mmhg = aa.std_dev();
  if (!outlet.empty()) {
    const auto [lo, hi] = std::minmax_element(outlet.begin(), outlet.end());
    const double first = std::floor(*lo / bin_width_mmhg);
    const auto bins = static_cast<std::size_t>(std::floor(*hi / bin_width_mmhg) - first) + 1;
    rep.aa_pressure_hist.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) rep.aa_pressure_hist[b].lower = (first + static_cast<double>(b)) * bin_width_mmhg;
    for (double p : outlet) {
      auto b = static_cast<std::size_t>(std::floor(p / bin_width_mmhg) - first);
      ++rep.aa_pressure_hist[std::min(b, bins - 1)].count;
    }
  }
  return rep;
}

BranchingAngles branching_angles(const VesselTree& tree) {
  BranchingAngles out;
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto v = static_cast<NodeId>(i);
    const Node& n = tree.node(v);
    if (!n.alive || n.parent == kNoNode || n.children.empty()) continue;
    const Vec3 in = n.position - tree.node(n.parent).position;
    bool degenerate = in.norm() == 0.0;
    for (NodeId c : n.children) degenerate = degenerate || tree.edge_length(c) == 0.0;
    if (degenerate) {
      out.skipped.push_back(v);
      continue;
    }
    for (NodeId c : n.children) {
      const Vec3 dir = tree.node(c).position - n.position;
      const double cosine = std::clamp(in.dot(dir) / (in.norm() * dir.norm()), -1.0, 1.0);
      out.degrees.push_back(std::acos(cosine) * 180.0 / units::kPi);
    }
  }
  return out;
}

// ------------------------------------------------------------------ files

void export_report(const MorphometryReport& morph, const HemodynamicsReport& hemo, const std::string& dir) {
  using text::format_double;
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  std::map<int, double> flows(hemo.flow_mean.begin(), hemo.flow_mean.end());
  {
    auto os = text::open_output((d / "per_order.csv").string());
    os << "order,count,radius_mean,radius_std,length_mean,length_std,area_mm2,flow_mean\n";
    for (const auto& s : morph.per_order) {
      const auto f = flows.find(s.order);
      os << s.order << ',' << s.count << ',' << format_double(s.radius_mean) << ',' << format_double(s.radius_std)
         << ',' << format_double(s.length_mean) << ',' << format_double(s.length_std) << ','
         << format_double(s.area_mm2) << ',' << format_double(f != flows.end() ? f->second : s.flow_mean) << '\n';
    }
  }
  {
    auto os = text::open_output((d / "aa_parent_hist.csv").string());
    os << "parent_order,count\n";
    for (const auto& [o, c] : morph.aa_parent_hist) os << o << ',' << c << '\n';
  }
  {
    auto os = text::open_output((d / "aa_pressure_hist.csv").string());
    os << "bin_mmHg,count\n";
    for (const auto& b : hemo.aa_pressure_hist) os << format_double(b.lower) << ',' << b.count << '\n';
  }
  {
    auto os = text::open_output((d / "fit.csv").string());
    os << "slope,intercept,r2\n";
    if (morph.fit)
      os << format_double(morph.fit->slope) << ',' << format_double(morph.fit->intercept) << ','
         << format_double(morph.fit->r2) << '\n';
  }
  {
    auto os = text::open_output((d / "pressure_summary.csv").string());
    os << "min_mmHg,max_mmHg,aa_mean_mmHg,aa_std_mmHg\n";
    os << format_double(hemo.min_pressure_mmhg) << ',' << format_double(hemo.max_pressure_mmhg) << ','
       << format_double(hemo.aa_pressure_mean_mmhg) << ',' << format_double(hemo.aa_pressure_std_mmhg) << '\n';
    if (!os) throw Error("failed writing report to '" + dir + "'");
  }
}

std::pair<MorphometryReport, HemodynamicsReport> read_report(const std::string& dir) {
  using text::parse_or_throw;
  const std::filesystem::path d(dir);
  MorphometryReport morph;
  HemodynamicsReport hemo;
  {
    const std::string p = (d / "per_order.csv").string();
    const auto t = text::read_csv(p);
    for (const auto& r : t.rows) {
      if (r.size() != 8) throw Error(p + ": expected 8 columns");
      OrderStats s;
      s.order = parse_or_throw<int>(r[0], p);
      s.count = parse_or_throw<std::size_t>(r[1], p);
      s.radius_mean = parse_or_throw<double>(r[2], p);
      s.radius_std = parse_or_throw<double>(r[3], p);
      s.length_mean = parse_or_throw<double>(r[4], p);
      s.length_std = parse_or_throw<double>(r[5], p);
      s.area_mm2 = parse_or_throw<double>(r[6], p);
      s.flow_mean = parse_or_throw<double>(r[7], p);
      morph.per_order.push_back(s);
      hemo.flow_mean.emplace_back(s.order, s.flow_mean);
    }
  }
  {
    const std::string p = (d / "aa_parent_hist.csv").string();
    for (const auto& r : text::read_csv(p).rows)
      morph.aa_parent_hist.emplace_back(parse_or_throw<int>(r.at(0), p), parse_or_throw<std::size_t>(r.at(1), p));
  }
  {
    const std::string p = (d / "aa_pressure_hist.csv").string();
    for (const auto& r : text::read_csv(p).rows)
      hemo.aa_pressure_hist.push_back({parse_or_throw<double>(r.at(0), p), parse_or_throw<std::size_t>(r.at(1), p)});
  }
  {
    const std::string p = (d / "fit.csv").string();
    const auto t = text::read_csv(p);
    if (!t.rows.empty())
      morph.fit = LogLinearFit{parse_or_throw<double>(t.rows[0].at(0), p), parse_or_throw<double>(t.rows[0].at(1), p),
                               parse_or_throw<double>(t.rows[0].at(2), p)};
  }
  {
    const std::string p = (d / "pressure_summary.csv").string();
    const auto t = text::read_csv(p);
    if (t.rows.size() != 1) throw Error(p + ": expected one row");
    hemo.min_pressure_mmhg = parse_or_throw<double>(t.rows[0].at(0), p);
    hemo.max_pressure_mmhg = parse_or_throw<double>(t.rows[0].at(1), p);
    hemo.aa_pressure_mean_mmhg = parse_or_throw<double>(t.rows[0].at(2), p);
    hemo.aa_pressure_std_mmhg = parse_or_throw<double>(t.rows[0].at(3), p);
  }
  return {morph, hemo};
}

}  // namespace vasc
