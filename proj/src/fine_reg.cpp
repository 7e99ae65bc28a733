#include "treereg/fine_reg.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>

#include "treereg/error.hpp"

namespace treereg {

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

std::pair<double, double> z_range(const PointCloud& cloud) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "cannot slice an empty cloud");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : cloud) {
    lo = std::min(lo, p.z());
    hi = std::max(hi, p.z());
  }
  return {lo, hi};
}

// Each layer-height axis point is paired with the foot of its perpendicular on
// the other fit's axis (under the current estimate), in both directions. This
// makes the SVD iterate towards a point-to-axis fit, which unlike fixed-height
// points also constrains a vertical offset through inclined axes.
void append_sliding_ties(const ArcFit& target, const ArcFit& reference, const RigidTransform& current,
                         double offset_weight, std::vector<TiePointPair>& out) {
  const Point3& pt = target.tie_points.front();
  const Point3& pr = reference.tie_points.front();
  const Vec3 dt = target.direction.normalized();
  const Vec3 dr = reference.direction.normalized();
  const Point3 pt_now = current.apply(pt);
  const Point3 foot_t = pt + (pr - pt_now).dot(current.rotation * dt) * dt;
  const Point3 foot_r = pr + (pt_now - pr).dot(dr) * dr;
  out.push_back({pt, foot_r, 1.0});
  out.push_back({foot_t, pr, 1.0});
  if (target.tie_points.size() > 1 && reference.tie_points.size() > 1 && offset_weight > 0.0) {
    const double u = (target.tie_points[1] - pt).norm();
    out.push_back({pt + u * dt, foot_r + u * dr, offset_weight});
    out.push_back({foot_t + u * dt, pr + u * dr, offset_weight});
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void SliceParams::validate() const {
  if (!(thickness > 0.0)) throw Error(ErrorCode::InvalidArgument, "slice thickness must be positive");
  if (heights.empty() && layer_count < 1) throw Error(ErrorCode::InvalidArgument, "layer_count must be at least 1");
  for (std::size_t i = 1; i < heights.size(); ++i) {
    if (!(heights[i] > heights[i - 1])) throw Error(ErrorCode::InvalidArgument, "slice heights must increase strictly");
  }
}

std::vector<double> default_slice_heights(const PointCloud& cloud, int layer_count) {
  const auto [lo, hi] = z_range(cloud);
  std::vector<double> out;
  for (int k = 1; k <= layer_count; ++k) out.push_back(lo + (hi - lo) * k / (layer_count + 1.0));
  return out;
}

std::vector<Layer> slice_layers(const PointCloud& cloud, const SliceParams& params) {
  params.validate();
  const auto [lo, hi] = z_range(cloud);
  if (!(hi - lo > 4.0 * params.thickness)) {
    throw Error(ErrorCode::CloudTooShort,
                fmt::format("z extent {:.3f} m is not above 4x the slice thickness", hi - lo));
  }
  const std::vector<double> heights =
      params.heights.empty() ? default_slice_heights(cloud, params.layer_count) : params.heights;
  const double half = params.thickness / 2.0;
  std::vector<Layer> layers;
  for (std::size_t k = 0; k < heights.size(); ++k) {
    Layer layer{static_cast<int>(k), heights[k], params.thickness, {}};
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (std::abs(cloud[i].z() - heights[k]) <= half) layer.indices.push_back(static_cast<std::uint32_t>(i));
    }
    if (layer.indices.empty()) spdlog::info("slice: layer {} at z = {:.3f} is empty", k, heights[k]);
    layers.push_back(std::move(layer));
  }
  return layers;
}

double angular_gap(double a, double b) { return std::abs(wrap_angle(a - b)); }

std::vector<Arc> separate_arcs(const Layer& layer, const PointCloud& cloud, const ScannerSpec& spec,
                               std::size_t min_arc_points, std::size_t* dropped) {
  spec.validate();
  const double da = 3.0 * spec.phi;
  const double db = 3.0 * spec.vartheta;
  const RigidTransform to_local = inverse(cloud.sensor_pose());

  struct Item {
    std::uint32_t index;
    AnglePair angles;
  };
  std::vector<Item> items;
  items.reserve(layer.indices.size());
  for (const auto idx : layer.indices) {
    if (auto a = try_spherical_angles(to_local.apply(cloud[idx]))) items.push_back({idx, *a});
  }
  std::sort(items.begin(), items.end(), [](const Item& l, const Item& r) {
    return std::tie(l.angles.alpha, l.angles.beta, l.index) < std::tie(r.angles.alpha, r.angles.beta, r.index);
  });

  const auto linked = [&](const Item& p, const Item& q) {
    return angular_gap(p.angles.alpha, q.angles.alpha) <= da && std::abs(p.angles.beta - q.angles.beta) <= db;
  };
  // Sweep over alpha; the slack only widens the candidate window, the exact
  // predicate decides.
  const double window = da + 1e-12;
  DisjointSets sets(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size() && items[j].angles.alpha - items[i].angles.alpha <= window; ++j) {
      if (linked(items[i], items[j])) sets.unite(i, j);
    }
  }
  // Pairs straddling ±π.
  const double pi = std::numbers::pi;
  for (std::size_t i = items.size(); i-- > 0 && items[i].angles.alpha > pi - window;) {
    for (std::size_t j = 0; j < i && items[j].angles.alpha < -pi + window; ++j) {
      if (linked(items[i], items[j])) sets.unite(i, j);
    }
  }

  std::vector<std::vector<std::uint32_t>> groups(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) groups[sets.find(i)].push_back(items[i].index);

  std::vector<Arc> arcs;
  std::size_t small = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& g = groups[i];
    if (g.empty()) continue;
    if (g.size() < min_arc_points) {
      ++small;
      continue;
    }
    arcs.push_back({layer.id, std::move(g)});
  }
  if (dropped) *dropped = small;
  return arcs;
}

std::vector<Point3> arc_tie_points(const CircleFit& fit, double layer_height) {
  return {Point3(fit.center.x(), fit.center.y(), layer_height)};
}

std::vector<Point3> arc_tie_points(const CylinderFit& fit, double layer_height, double unit_offset) {
  Vec3 d = fit.direction.normalized();
  if (std::abs(d.z()) < 1e-6) {
    throw Error(ErrorCode::HorizontalAxis, "cylinder axis is horizontal; no point at the layer height");
  }
  if (d.z() < 0.0) d = -d;
  const Point3 p = fit.axis_point + ((layer_height - fit.axis_point.z()) / d.z()) * d;
  return {p, p + unit_offset * d};
}

std::string_view to_string(FitKind kind) { return kind == FitKind::Circle ? "circle" : "cylinder"; }

ArcFit fit_arc(const Arc& arc, const Layer& layer, const PointCloud& cloud, FitKind kind,
               const ArcFitOptions& options) {
  ArcFit out;
  out.layer = layer.id;
  out.layer_height = layer.height_center;
  out.kind = kind;
  out.point_count = arc.indices.size();
  try {
    if (kind == FitKind::Circle) {
      std::vector<Vec2> xy;
      xy.reserve(arc.indices.size());
      for (const auto i : arc.indices) xy.emplace_back(cloud[i].x(), cloud[i].y());
      const CircleFit c = fit_circle_taubin(xy);
      out.tie_points = arc_tie_points(c, layer.height_center);
      out.center = out.tie_points.front();
      out.radius = c.radius;
      out.rms = c.rms;
    } else {
      std::vector<Point3> pts;
      pts.reserve(arc.indices.size());
      for (const auto i : arc.indices) pts.push_back(cloud[i]);
      const CylinderFit c = fit_cylinder_lsq(pts, options.cylinder);
      out.tie_points = arc_tie_points(c, layer.height_center, options.unit_offset);
      out.center = out.tie_points.front();
      out.direction = c.direction;
      out.radius = c.radius;
      out.rms = c.rms;
      out.converged = c.converged;
    }
  } catch (const Error& e) {
    out.accepted = false;
    out.reject_reason = e.what();
    return out;
  }
  if (out.rms > options.max_rms) {
    out.accepted = false;
    out.reject_reason = fmt::format("rms {:.4f} m above {:.4f} m", out.rms, options.max_rms);
  } else if (kind == FitKind::Cylinder && std::acos(std::min(1.0, std::abs(out.direction.z()))) > options.max_tilt) {
    out.accepted = false;
    out.reject_reason = fmt::format("axis tilted {:.1f} deg from vertical", std::acos(std::min(1.0, std::abs(out.direction.z()))) * 180.0 / std::numbers::pi);
  }
  return out;
}

std::vector<ArcFit> verify_arcs(std::vector<ArcFit> fits, double tolerance, double link_margin) {
  int lowest = std::numeric_limits<int>::max();
  for (const auto& f : fits) {
    if (f.accepted) lowest = std::min(lowest, f.layer);
  }
  std::vector<std::size_t> order(fits.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fits[a].layer_height < fits[b].layer_height; });

  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    ArcFit& f = fits[order[oi]];
    if (!f.accepted) continue;
    for (std::size_t oj = 0; oj < oi; ++oj) {
      const ArcFit& low = fits[order[oj]];
      if (!low.accepted || !(low.layer_height < f.layer_height)) continue;
      bool linked = low.kind == FitKind::Circle && low.layer == lowest;
      if (!linked && std::abs(f.direction.z()) >= 1e-6) {
        const Point3 at = f.center + ((low.layer_height - f.center.z()) / f.direction.z()) * f.direction;
        linked = (at - low.center).norm() <= low.radius + f.radius + link_margin;
      }
      if (linked && f.radius > (1.0 + tolerance) * low.radius) {
        f.accepted = false;
        f.reject_reason = fmt::format("radius {:.3f} m exceeds lower fit (layer {}, arc {}) radius {:.3f} m", f.radius,
                                      low.layer, low.arc, low.radius);
        break;
      }
    }
  }
  return fits;
}

CorrespondenceResult correspond_fits(std::span<const ArcFit> target, std::span<const ArcFit> reference,
                                     double max_distance, double offset_weight, double max_axis_angle) {
  struct Candidate {
    double d;
    std::size_t i;
    std::size_t j;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i].tie_points.empty()) continue;
    for (std::size_t j = 0; j < reference.size(); ++j) {
      if (reference[j].tie_points.empty() || target[i].layer != reference[j].layer) continue;
      if (target[i].kind == FitKind::Cylinder && reference[j].kind == FitKind::Cylinder &&
          std::acos(std::clamp(std::abs(target[i].direction.dot(reference[j].direction)), 0.0, 1.0)) > max_axis_angle) {
        continue;
      }
      const double d = (target[i].tie_points.front() - reference[j].tie_points.front()).norm();
      if (d <= max_distance) cands.push_back({d, i, j});
    }
  }
  std::sort(cands.begin(), cands.end(),
            [](const Candidate& a, const Candidate& b) { return std::tie(a.d, a.i, a.j) < std::tie(b.d, b.i, b.j); });

  CorrespondenceResult out;
  std::vector<bool> used_t(target.size(), false);
  std::vector<bool> used_r(reference.size(), false);
  for (const auto& c : cands) {
    if (used_t[c.i] || used_r[c.j]) continue;
    used_t[c.i] = used_r[c.j] = true;
    out.pairs.push_back({c.i, c.j, c.d});
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const FitCorrespondence& a, const FitCorrespondence& b) { return a.target < b.target; });
  for (const auto& p : out.pairs) {
    const auto& tp = target[p.target].tie_points;
    const auto& rp = reference[p.reference].tie_points;
    const std::size_t n = std::min(tp.size(), rp.size());
    for (std::size_t k = 0; k < n; ++k) out.tie_points.push_back({tp[k], rp[k], k == 0 ? 1.0 : offset_weight});
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (!used_t[i]) out.unmatched_target.push_back(i);
  }
  for (std::size_t j = 0; j < reference.size(); ++j) {
    if (!used_r[j]) out.unmatched_reference.push_back(j);
  }
  if (out.pairs.empty()) {
    throw Error(ErrorCode::NoCorrespondences,
                fmt::format("no fit pairs within {:.3f} m ({} target, {} reference fits)", max_distance, target.size(),
                            reference.size()));
  }
  return out;
}

void FineParams::validate() const {
  slice.validate();
  if (!(max_correspondence_distance > 0.0)) throw Error(ErrorCode::InvalidArgument, "correspondence distance must be positive");
  if (!(offset_weight >= 0.0)) throw Error(ErrorCode::InvalidArgument, "offset weight must be non-negative");
  if (!(fit.unit_offset > 0.0)) throw Error(ErrorCode::InvalidArgument, "unit offset must be positive");
  if (!(fit.max_rms > 0.0) || !(fit.max_tilt > 0.0)) throw Error(ErrorCode::InvalidArgument, "fit acceptance limits must be positive");
  if (!(radius_tolerance >= 0.0)) throw Error(ErrorCode::InvalidArgument, "radius tolerance must be non-negative");
  if (rounds < 1) throw Error(ErrorCode::InvalidArgument, "rounds must be at least 1");
}

std::vector<ArcFit> extract_fits(const PointCloud& cloud, const std::vector<Layer>& layers, const ScannerSpec& spec,
                                 const FineParams& params, std::vector<std::size_t>* dropped_per_layer) {
  std::vector<std::vector<Arc>> arcs(layers.size());
  if (dropped_per_layer) dropped_per_layer->assign(layers.size(), 0);
  std::optional<std::size_t> lowest;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    std::size_t dropped = 0;
    arcs[k] = separate_arcs(layers[k], cloud, spec, params.min_arc_points, &dropped);
    if (dropped_per_layer) (*dropped_per_layer)[k] = dropped;
    if (!lowest && !arcs[k].empty()) lowest = k;
  }
  std::vector<ArcFit> fits;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const bool trunk_circle = lowest && *lowest == k && arcs[k].size() == 1;
    for (std::size_t a = 0; a < arcs[k].size(); ++a) {
      ArcFit f = fit_arc(arcs[k][a], layers[k], cloud, trunk_circle ? FitKind::Circle : FitKind::Cylinder, params.fit);
      f.arc = static_cast<int>(a);
      fits.push_back(std::move(f));
    }
  }
  return verify_arcs(std::move(fits), params.radius_tolerance);
}

FineResult fine_register(const PointCloud& target_coarse, const PointCloud& reference, const ScannerSpec& spec,
                         const FineParams& params) {
  params.validate();
  spec.validate();
  FineResult result;
  auto t0 = std::chrono::steady_clock::now();

  SliceParams slice = params.slice;
  std::vector<Layer> layers_t;
  std::vector<Layer> layers_r;
  try {
    if (slice.heights.empty()) slice.heights = default_slice_heights(reference, slice.layer_count);
    layers_r = slice_layers(reference, slice);
    layers_t = slice_layers(target_coarse, slice);
  } catch (const Error& e) {
    throw e.with_stage("fine/slice");
  }
  result.timings["slice"] = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();

  std::vector<std::size_t> dropped_t;
  std::vector<std::size_t> dropped_r;
  try {
    result.target_fits = extract_fits(target_coarse, layers_t, spec, params, &dropped_t);
    result.reference_fits = extract_fits(reference, layers_r, spec, params, &dropped_r);
  } catch (const Error& e) {
    throw e.with_stage("fine/fit");
  }
  for (std::size_t k = 0; k < layers_r.size(); ++k) {
    result.layers.push_back({layers_r[k].id, layers_r[k].height_center, layers_t[k].indices.size(),
                             layers_r[k].indices.size(), dropped_t[k], dropped_r[k]});
  }
  result.timings["fit"] = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();

  std::vector<ArcFit> acc_t;
  std::vector<ArcFit> acc_r;
  std::copy_if(result.target_fits.begin(), result.target_fits.end(), std::back_inserter(acc_t),
               [](const ArcFit& f) { return f.accepted; });
  std::copy_if(result.reference_fits.begin(), result.reference_fits.end(), std::back_inserter(acc_r),
               [](const ArcFit& f) { return f.accepted; });

  RigidTransform current = RigidTransform::identity();
  for (int round = 0; round < params.rounds; ++round) {
    // Correspondences are searched with the target fits moved by the current estimate.
    std::vector<ArcFit> moved = acc_t;
    for (auto& f : moved) {
      for (auto& p : f.tie_points) p = current.apply(p);
      f.direction = current.rotation * f.direction;
    }
    CorrespondenceResult corr;
    try {
      corr = correspond_fits(moved, acc_r, params.max_correspondence_distance, params.offset_weight,
                             params.max_axis_angle);
    } catch (const Error& e) {
      throw e.with_stage("fine/correspond");
    }
    std::vector<TiePointPair> ties;
    for (const auto& p : corr.pairs) {
      const ArcFit& ft = acc_t[p.target];
      const ArcFit& fr = acc_r[p.reference];
      if (params.slide_along_axes && ft.kind == FitKind::Cylinder && fr.kind == FitKind::Cylinder) {
        append_sliding_ties(ft, fr, current, params.offset_weight, ties);
        continue;
      }
      const std::size_t n = std::min(ft.tie_points.size(), fr.tie_points.size());
      for (std::size_t k = 0; k < n; ++k) {
        ties.push_back({ft.tie_points[k], fr.tie_points[k], k == 0 ? 1.0 : params.offset_weight});
      }
    }
    RigidTransform next;
    try {
      next = kabsch_svd(ties);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::TooFewPairs || e.code() == ErrorCode::DegenerateGeometry) {
        throw Error(ErrorCode::TooFewTiePoints,
                    fmt::format("{} tie pairs from {} fit pairs do not determine a rigid transform", ties.size(),
                                corr.pairs.size()),
                    "fine/solve");
      }
      throw e.with_stage("fine/solve");
    }
    const double dt = (next.translation - current.translation).norm();
    const double dr = rotation_angle_between(next.rotation, current.rotation);
    current = next;
    result.tie_points = std::move(ties);
    result.correspondences = std::move(corr.pairs);
    result.rounds_run = round + 1;
    if (dt < 1e-4 && dr < 1e-5 && round > 0) break;
  }
  result.transform = current;
  result.rms_residual = rms_residual(result.tie_points, result.transform);
  result.timings["solve"] = seconds_since(t0);
  spdlog::debug("fine: {} tie points from {} fit pairs, rms {:.4f} m", result.tie_points.size(),
                result.correspondences.size(), result.rms_residual);
  return result;
}

}  // namespace treereg
