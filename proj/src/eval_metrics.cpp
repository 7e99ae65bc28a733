#include "treereg/eval_metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "treereg/error.hpp"
#include "treereg/kdtree.hpp"
#include "treereg/tls_simulator.hpp"

namespace treereg {

namespace {

CylinderFit fit_slice(const BranchPairSpec& pair, const PointCloud& cloud, std::span<const std::uint32_t> indices,
                      double h, std::size_t slice, char scan) {
  std::vector<Point3> pts;
  for (const auto i : indices) {
    if (std::abs(cloud[i].z() - h) <= pair.thickness / 2.0) pts.push_back(cloud[i]);
  }
  const auto fail = [&](const std::string& why) {
    return Error(ErrorCode::FitFailed,
                 fmt::format("branch {} slice {} scan {}: {}", pair.branch_id, slice, scan, why));
  };
  if (pts.size() < std::max<std::size_t>(pair.min_points, 9)) {
    throw fail(fmt::format("{} points in slice", pts.size()));
  }
  CylinderFit fit;
  try {
    fit = fit_cylinder_lsq(pts);
  } catch (const Error& e) {
    throw fail(e.what());
  }
  if (std::abs(fit.direction.z()) < 1e-6) throw fail("horizontal axis");
  return fit;
}

}  // namespace

std::vector<double> branch_error(const BranchPairSpec& pair, const PointCloud& cloud_a, const PointCloud& cloud_b) {
  std::vector<double> out;
  for (std::size_t k = 0; k < pair.heights.size(); ++k) {
    const double h = pair.heights[k];
    const CylinderFit fa = fit_slice(pair, cloud_a, pair.indices_a, h, k, 'a');
    const CylinderFit fb = fit_slice(pair, cloud_b, pair.indices_b, h, k, 'b');
    // Both slices share the centre h, so the common z is h itself.
    out.push_back((fa.point_at_height(h) - fb.point_at_height(h)).norm());
  }
  return out;
}

ErrorReport evaluate(std::span<const BranchPairSpec> pairs, const PointCloud& cloud_a, const PointCloud& cloud_b) {
  ErrorReport report;
  for (const auto& p : pairs) {
    BranchResult br;
    br.branch_id = p.branch_id;
    try {
      br.distances = branch_error(p, cloud_a, cloud_b);
      br.ok = true;
      report.distances.insert(report.distances.end(), br.distances.begin(), br.distances.end());
    } catch (const Error& e) {
      br.error = e.what();
    }
    report.branches.push_back(std::move(br));
  }
  if (report.distances.empty()) {
    throw Error(ErrorCode::AllBranchesFailed, fmt::format("none of {} branches could be evaluated", pairs.size()));
  }
  double sum = 0.0;
  for (const double d : report.distances) sum += d;
  report.mean = sum / static_cast<double>(report.distances.size());
  return report;
}

std::vector<BranchPairSpec> branch_pairs_from_labels(const PointCloud& cloud_a, std::span<const int> labels_a,
                                                     const PointCloud& cloud_b, std::span<const int> labels_b,
                                                     double thickness, std::size_t min_points) {
  if (labels_a.size() != cloud_a.size() || labels_b.size() != cloud_b.size()) {
    throw Error(ErrorCode::InvalidArgument, "label count does not match point count");
  }
  const auto is_branch = [](int id) { return id > kTrunkId && id < kFirstLeafId; };
  std::map<int, BranchPairSpec> by_id;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    if (is_branch(labels_a[i])) by_id[labels_a[i]].indices_a.push_back(static_cast<std::uint32_t>(i));
  }
  for (std::size_t i = 0; i < labels_b.size(); ++i) {
    if (is_branch(labels_b[i]) && by_id.count(labels_b[i])) {
      by_id[labels_b[i]].indices_b.push_back(static_cast<std::uint32_t>(i));
    }
  }
  const auto z_extent = [](const PointCloud& c, const std::vector<std::uint32_t>& idx) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto i : idx) {
      lo = std::min(lo, c[i].z());
      hi = std::max(hi, c[i].z());
    }
    return std::pair{lo, hi};
  };
  const auto count_in = [&](const PointCloud& c, const std::vector<std::uint32_t>& idx, double h) {
    return static_cast<std::size_t>(std::count_if(idx.begin(), idx.end(), [&](std::uint32_t i) {
      return std::abs(c[i].z() - h) <= thickness / 2.0;
    }));
  };

  std::vector<BranchPairSpec> out;
  for (auto& [id, spec] : by_id) {
    if (spec.indices_a.empty() || spec.indices_b.empty()) continue;
    const auto [la, ha] = z_extent(cloud_a, spec.indices_a);
    const auto [lb, hb] = z_extent(cloud_b, spec.indices_b);
    const double lo = std::max(la, lb);
    const double hi = std::min(ha, hb);
    if (!(hi - lo > 2.0 * thickness)) continue;
    spec.branch_id = id;
    spec.thickness = thickness;
    spec.min_points = min_points;
    spec.heights = {lo + 0.2 * (hi - lo), lo + 0.5 * (hi - lo), lo + 0.8 * (hi - lo)};
    bool enough = true;
    for (const double h : spec.heights) {
      enough = enough && count_in(cloud_a, spec.indices_a, h) >= min_points &&
               count_in(cloud_b, spec.indices_b, h) >= min_points;
    }
    if (enough) out.push_back(std::move(spec));
  }
  return out;
}

IcpResult icp_register(const PointCloud& target, const PointCloud& reference, const IcpParams& params) {
  if (target.empty() || reference.empty()) throw Error(ErrorCode::EmptyCloud, "ICP input is empty", "icp");
  const KdTree tree(reference.points());
  IcpResult result;
  RigidTransform current = RigidTransform::identity();
  std::vector<double> dist(target.size());
  std::vector<std::size_t> nn(target.size());
  double previous = std::numeric_limits<double>::infinity();

  for (int it = 0; it < params.max_iterations; ++it) {
    for (std::size_t i = 0; i < target.size(); ++i) {
      const auto hit = tree.nearest(current.apply(target[i]));
      nn[i] = hit.index;
      dist[i] = std::sqrt(hit.squared_distance);
    }
    std::vector<double> sorted = dist;
    const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    const double cutoff = params.trim_factor * *mid;

    std::vector<TiePointPair> pairs;
    double sum = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      if (dist[i] > cutoff && cutoff > 0.0) continue;
      pairs.push_back({target[i], reference[nn[i]], 1.0});
      sum += dist[i];
    }
    const double mean = pairs.empty() ? 0.0 : sum / static_cast<double>(pairs.size());
    result.residual_history.push_back(mean);
    result.iterations = it + 1;
    if (std::abs(previous - mean) < params.convergence_eps || mean == 0.0) {
      result.converged = true;
      break;
    }
    previous = mean;
    try {
      current = kabsch_svd(pairs);
    } catch (const Error& e) {
      throw e.with_stage("icp");
    }
  }
  result.transform = current;
  return result;
}

double ground_truth_error(const PointCloud& target, const RigidTransform& estimated, const RigidTransform& truth) {
  if (target.empty()) throw Error(ErrorCode::EmptyCloud, "ground-truth error of an empty cloud");
  double sum = 0.0;
  for (const auto& p : target) sum += (estimated.apply(p) - truth.apply(p)).norm();
  return sum / static_cast<double>(target.size());
}

std::string format_error_table(std::span<const std::string> methods, std::span<const ErrorTableRow> rows) {
  std::size_t first = std::string("Scan pair").size();
  for (const auto& r : rows) first = std::max(first, r.scan_pair.size());
  std::vector<std::size_t> widths;
  for (const auto& m : methods) widths.push_back(std::max<std::size_t>(m.size(), 8));

  std::string out = fmt::format("{:<{}}", "Scan pair", first);
  for (std::size_t c = 0; c < methods.size(); ++c) out += fmt::format("  {:>{}}", methods[c], widths[c]);
  out += '\n';
  for (const auto& r : rows) {
    out += fmt::format("{:<{}}", r.scan_pair, first);
    for (std::size_t c = 0; c < methods.size(); ++c) {
      const double v = c < r.values.size() ? r.values[c] : std::numeric_limits<double>::quiet_NaN();
      out += std::isnan(v) ? fmt::format("  {:>{}}", "-", widths[c]) : fmt::format("  {:>{}.3f}", v, widths[c]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace treereg
