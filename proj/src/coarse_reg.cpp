#include "treereg/coarse_reg.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "treereg/error.hpp"

namespace treereg {

namespace {

class StageClock {
 public:
  explicit StageClock(std::map<std::string, double>& sink) : sink_(sink) {}
  void lap(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    sink_[name] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }

 private:
  std::map<std::string, double>& sink_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

template <class F>
auto in_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw e.with_stage(stage);
  }
}

}  // namespace

void CoarseParams::validate() const {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw Error(ErrorCode::InvalidArgument, "theta must be positive");
  if (n_scans < 1) throw Error(ErrorCode::InvalidArgument, "n_scans must be at least 1");
  if (r1 < 0 || r2 < 0) throw Error(ErrorCode::InvalidArgument, "image borders must be non-negative");
  if (pair_count < 1) throw Error(ErrorCode::InvalidArgument, "pair_count must be at least 1");
  if (top_k < 1) throw Error(ErrorCode::InvalidArgument, "top_k must be at least 1");
  if (max_keypoints < top_k) throw Error(ErrorCode::InvalidArgument, "max_keypoints must be at least top_k");
  if (candidate_top_k < 2) throw Error(ErrorCode::InvalidArgument, "candidate_top_k must be at least 2");
  if (!(inlier_threshold > 0.0)) throw Error(ErrorCode::InvalidArgument, "inlier_threshold must be positive");
  if (!(support_cell > 0.0)) throw Error(ErrorCode::InvalidArgument, "support_cell must be positive");
}

std::vector<TiePointPair> lift_matches_to_tie_points(std::span<const MatchPair> matches,
                                                     std::span<const ImagePairView> pairs,
                                                     std::span<const PointCloud* const> clouds_a, const Vec2& center_a,
                                                     std::span<const PointCloud* const> clouds_b,
                                                     const Vec2& center_b) {
  if (clouds_a.size() != pairs.size() || clouds_b.size() != pairs.size()) {
    throw Error(ErrorCode::InvalidArgument, "one cloud per image pair and side is required");
  }
  std::vector<TiePointPair> out;
  out.reserve(matches.size());
  for (const auto& m : matches) {
    const auto id = static_cast<std::size_t>(m.image_pair_id);
    if (m.image_pair_id < 0 || id >= pairs.size()) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("match refers to unknown image pair {}", m.image_pair_id));
    }
    const SphericalImage& ia = pairs[id].a.get();
    const SphericalImage& ib = pairs[id].b.get();
    const Point3 ca = pixel_region_centroid(ia, *clouds_a[id], {m.keypoint_a.x, m.keypoint_a.y});
    const Point3 cb = pixel_region_centroid(ib, *clouds_b[id], {m.keypoint_b.x, m.keypoint_b.y});
    TiePointPair tp;
    tp.target_point = rotate_point_about_vertical_axis(ca, center_a, -ia.source_rotation());
    tp.reference_point = rotate_point_about_vertical_axis(cb, center_b, -ib.source_rotation());
    out.push_back(tp);
  }
  return out;
}

RigidTransform leveled_fit(std::span<const TiePointPair> pairs) {
  if (pairs.size() < 2) throw Error(ErrorCode::TooFewPairs, "leveled alignment needs at least 2 tie-point pairs");
  double wsum = 0.0;
  Vec3 ct = Vec3::Zero();
  Vec3 cr = Vec3::Zero();
  for (const auto& p : pairs) {
    wsum += p.weight;
    ct += p.weight * p.target_point;
    cr += p.weight * p.reference_point;
  }
  if (!(wsum > 0.0)) throw Error(ErrorCode::TooFewPairs, "all tie-point weights are zero");
  ct /= wsum;
  cr /= wsum;
  double sin_sum = 0.0;
  double cos_sum = 0.0;
  double scale = 0.0;
  for (const auto& p : pairs) {
    const Vec2 a = (p.target_point - ct).head<2>();
    const Vec2 b = (p.reference_point - cr).head<2>();
    sin_sum += p.weight * (a.x() * b.y() - a.y() * b.x());
    cos_sum += p.weight * a.dot(b);
    scale += p.weight * a.norm() * b.norm();
  }
  if (!(std::hypot(sin_sum, cos_sum) > 1e-12 * std::max(scale, 1e-300))) {
    throw Error(ErrorCode::DegenerateGeometry, "tie points have no horizontal spread");
  }
  RigidTransform t;
  t.rotation = Eigen::AngleAxisd(std::atan2(sin_sum, cos_sum), Vec3::UnitZ()).toRotationMatrix();
  t.translation = cr - t.rotation * ct;
  return t;
}

namespace {

std::vector<ImageFeatures> sequence_features(const ImageSequence& seq, int max_keypoints) {
  std::vector<ImageFeatures> out;
  out.reserve(seq.entries.size());
  for (const auto& e : seq.entries) {
    try {
      out.push_back(extract_features(e.image, max_keypoints));
    } catch (const Error& err) {
      if (err.code() != ErrorCode::ImageTooSmall) throw;
      out.emplace_back();
    }
  }
  return out;
}

// The bucket holds indices into the rotated copy, which shares the original's
// ordering, so averaging the original points equals un-rotating the centroid.
Point3 original_bucket_centroid(const SphericalImage& img, const PointCloud& original, const Keypoint& kp) {
  const auto members = img.bucket(kp.x, kp.y);
  if (members.empty()) {
    throw Error(ErrorCode::EmptyBucket, fmt::format("pixel ({}, {}) has no source points", kp.x, kp.y));
  }
  Point3 acc = Point3::Zero();
  for (const auto i : members) acc += original[i];
  return acc / static_cast<double>(members.size());
}

// Generic features such as the trunk base recur in many combinations and agree
// with any yaw about the trunk, so support counts occupied cells, not matches.
std::array<long, 3> support_cell(const Point3& p, double size) {
  return {std::lround(p.x() / size), std::lround(p.y() / size), std::lround(p.z() / size)};
}

struct Candidate {
  std::size_t entry_a;
  std::size_t entry_b;
  MatchPair match;
  TiePointPair tie;
};

struct Selection {
  std::vector<MatchPair> matches;
  std::vector<ImagePairView> views;
  std::vector<TiePointPair> ties;
};

/// Score-ranked path: the pair_count best combinations by mean top-k Hamming.
Selection select_best_pairs(const ImageSequence& seq_a, const ImageSequence& seq_b, const PointCloud& target,
                            const PointCloud& reference, const CoarseParams& params, CoarseResult& result) {
  result.image_pairs = select_similar_image_pairs(seq_a, seq_b, params.pair_count, params.top_k, params.max_keypoints);
  Selection sel;
  for (const auto& ip : result.image_pairs) {
    sel.views.push_back({std::cref(seq_a.entries[ip.entry_a].image), std::cref(seq_b.entries[ip.entry_b].image)});
    for (const auto& m : ip.matches) {
      sel.matches.push_back(m);
      sel.ties.push_back({original_bucket_centroid(seq_a.entries[ip.entry_a].image, target, m.keypoint_a),
                          original_bucket_centroid(seq_b.entries[ip.entry_b].image, reference, m.keypoint_b), 1.0});
    }
  }
  return sel;
}

/// Consensus path: pool candidates from all combinations, hypothesise a
/// leveled motion from every candidate pair within one combination and keep
/// the hypothesis with most support.
Selection select_by_consensus(const ImageSequence& seq_a, const ImageSequence& seq_b, const PointCloud& target,
                              const PointCloud& reference, const CoarseParams& params, CoarseResult& result) {
  const auto fa = sequence_features(seq_a, params.max_keypoints);
  const auto fb = sequence_features(seq_b, params.max_keypoints);
  std::vector<Candidate> cands;
  std::vector<std::size_t> group_start;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    for (std::size_t j = 0; j < fb.size(); ++j) {
      if (fa[i].keypoints.empty() || fb[j].keypoints.empty()) continue;
      const auto matches = match_features(fa[i], fb[j], 0);
      group_start.push_back(cands.size());
      int taken = 0;
      for (const auto& m : matches) {
        if (m.hamming > params.max_hamming || taken >= params.candidate_top_k) break;
        ++taken;
        cands.push_back({i, j, m,
                         {original_bucket_centroid(seq_a.entries[i].image, target, m.keypoint_a),
                          original_bucket_centroid(seq_b.entries[j].image, reference, m.keypoint_b), 1.0}});
      }
    }
  }
  group_start.push_back(cands.size());
  result.candidate_count = cands.size();
  if (cands.size() < 4) {
    throw Error(ErrorCode::NoMatchableEntries, fmt::format("only {} candidate matches in all image combinations", cands.size()));
  }

  const double thr = params.inlier_threshold;
  std::size_t best_support = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  RigidTransform best;
  for (std::size_t g = 0; g + 1 < group_start.size(); ++g) {
    for (std::size_t a = group_start[g]; a < group_start[g + 1]; ++a) {
      for (std::size_t b = a + 1; b < group_start[g + 1]; ++b) {
        const TiePointPair two[2] = {cands[a].tie, cands[b].tie};
        if ((two[0].target_point - two[1].target_point).head<2>().norm() < thr) continue;
        const RigidTransform hyp = leveled_fit(two);
        std::set<std::array<long, 3>> cells;
        double cost = 0.0;
        for (const auto& c : cands) {
          const double d = (hyp.apply(c.tie.target_point) - c.tie.reference_point).norm();
          if (d < thr) {
            cells.insert(support_cell(c.tie.target_point, params.support_cell));
            cost += d;
          }
        }
        const std::size_t support = cells.size();
        if (support > best_support || (support == best_support && cost < best_cost)) {
          best_support = support;
          best_cost = cost;
          best = hyp;
        }
      }
    }
  }
  if (best_support < 4) {
    throw Error(ErrorCode::TooFewSurvivors,
                fmt::format("best motion hypothesis is supported by {} distinct cells of {} candidates", best_support,
                            cands.size()));
  }

  // Inliers grouped per combination; combinations ranked by support.
  std::map<std::pair<std::size_t, std::size_t>, std::vector<const Candidate*>> per_combo;
  for (const auto& c : cands) {
    if ((best.apply(c.tie.target_point) - c.tie.reference_point).norm() < thr) {
      per_combo[{c.entry_a, c.entry_b}].push_back(&c);
      ++result.inlier_count;
    }
  }
  std::vector<std::pair<std::pair<std::size_t, std::size_t>, std::vector<const Candidate*>>> ranked(per_combo.begin(),
                                                                                                    per_combo.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& l, const auto& r) { return l.second.size() > r.second.size(); });

  Selection sel;
  std::vector<bool> used_a(fa.size(), false);
  for (const auto& [key, members] : ranked) {
    const int id = static_cast<int>(sel.views.size());
    sel.views.push_back({std::cref(seq_a.entries[key.first].image), std::cref(seq_b.entries[key.second].image)});
    ImagePairMatch ip{key.first, key.second, 0.0, {}};
    for (const Candidate* c : members) {
      MatchPair m = c->match;
      m.image_pair_id = id;
      sel.matches.push_back(m);
      sel.ties.push_back(c->tie);
      ip.matches.push_back(m);
      ip.score += m.hamming;
    }
    ip.score /= static_cast<double>(ip.matches.size());
    if (static_cast<int>(result.image_pairs.size()) < params.pair_count && !used_a[key.first]) {
      used_a[key.first] = true;
      result.image_pairs.push_back(std::move(ip));
    }
  }
  return sel;
}

/// Trimming pass: drop ties whose residual exceeds 3x the median and
/// re-solve, unless that leaves fewer than 4 or a degenerate set. Returns
/// false when nothing changed.
bool trim_and_resolve(CoarseResult& result) {
  std::vector<double> res;
  for (const auto& t : result.tie_points) {
    res.push_back((result.transform.apply(t.target_point) - t.reference_point).norm());
  }
  std::vector<double> sorted = res;
  const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  const double cutoff = 3.0 * *mid + 1e-9;
  std::vector<TiePointPair> kept;
  for (std::size_t i = 0; i < res.size(); ++i) {
    if (res[i] <= cutoff) kept.push_back(result.tie_points[i]);
  }
  if (kept.size() < 4 || kept.size() == result.tie_points.size()) return false;
  try {
    result.transform = kabsch_svd(kept);
    result.tie_points = std::move(kept);
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

CoarseResult coarse_register(const PointCloud& target, const PointCloud& reference, const ScannerSpec& spec,
                             const CoarseParams& params) {
  params.validate();
  spec.validate();
  if (target.empty() || reference.empty()) {
    throw Error(ErrorCode::EmptyCloud, "coarse registration input is empty", "coarse");
  }
  if (target.size() < 1000 || reference.size() < 1000) {
    spdlog::warn("coarse: small inputs ({} / {} points); feature matching may be unreliable", target.size(),
                 reference.size());
  }
  const double steps = 4.0 * std::numbers::pi / params.n_scans / params.theta;
  if (std::abs(steps - std::round(steps)) > 1e-9) {
    spdlog::warn("coarse: theta does not divide 720/n_scans degrees; the rotation sequence is truncated");
  }

  CoarseResult result;
  StageClock clock(result.timings);

  const ImageSequence seq_a = in_stage("coarse/sequence", [&] {
    return generate_image_sequence(target, spec, params.theta, params.n_scans, params.r1, params.r2);
  });
  const ImageSequence seq_b = in_stage("coarse/sequence", [&] {
    if (params.rotate_reference) {
      return generate_image_sequence(reference, spec, params.theta, params.n_scans, params.r1, params.r2);
    }
    ImageSequence s;
    s.theta = params.theta;
    s.n_scans = params.n_scans;
    s.center = horizontal_centroid(reference);
    s.entries.push_back({0.0, project(reference, spec, params.r1, params.r2)});
    return s;
  });
  clock.lap("sequence");

  Selection sel = in_stage("coarse/select_pairs", [&] {
    return params.consensus ? select_by_consensus(seq_a, seq_b, target, reference, params, result)
                            : select_best_pairs(seq_a, seq_b, target, reference, params, result);
  });
  if (result.image_pairs.size() < static_cast<std::size_t>(params.pair_count)) {
    spdlog::warn("coarse: only {} of {} image pairs available", result.image_pairs.size(), params.pair_count);
  }
  result.rotation_a = seq_a.entries[result.image_pairs.front().entry_a].rotation;
  result.rotation_b = seq_b.entries[result.image_pairs.front().entry_b].rotation;
  clock.lap("select_pairs");

  if (params.verification_enabled) {
    result.verification = in_stage("coarse/verify", [&] { return verify_matches(sel.matches, sel.views); });
    std::vector<TiePointPair> kept;
    for (std::size_t k = 0; k < sel.ties.size(); ++k) {
      if (result.verification.kept[k]) kept.push_back(sel.ties[k]);
    }
    sel.ties = std::move(kept);
  }
  clock.lap("verify");

  result.tie_points = std::move(sel.ties);
  if (result.tie_points.size() < 4) {
    throw Error(ErrorCode::TooFewSurvivors,
                fmt::format("{} tie points after verification, at least 4 required", result.tie_points.size()),
                "coarse/lift");
  }
  result.transform = in_stage("coarse/solve", [&] { return kabsch_svd(result.tie_points); });
  for (int pass = 0; params.consensus && pass < 10 && trim_and_resolve(result); ++pass) {
  }
  result.rms_residual = rms_residual(result.tie_points, result.transform);
  clock.lap("solve");
  spdlog::debug("coarse: {} tie points, rms {:.4f} m", result.tie_points.size(), result.rms_residual);
  return result;
}

}  // namespace treereg
