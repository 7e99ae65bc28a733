#include "treereg/image_features.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "treereg/error.hpp"

namespace treereg {

namespace {

// Bresenham circle of radius 3, clockwise from 12 o'clock.
constexpr std::array<std::array<int, 2>, 16> kCircle{{{0, -3},
                                                      {1, -3},
                                                      {2, -2},
                                                      {3, -1},
                                                      {3, 0},
                                                      {3, 1},
                                                      {2, 2},
                                                      {1, 3},
                                                      {0, 3},
                                                      {-1, 3},
                                                      {-2, 2},
                                                      {-3, 1},
                                                      {-3, 0},
                                                      {-3, -1},
                                                      {-2, -2},
                                                      {-1, -3}}};
constexpr int kArcLength = 9;
constexpr int kHarrisHalfBlock = 3;
constexpr double kHarrisK = 0.04;
constexpr int kBoxHalf = 2;

int occ(const SphericalImage& img, int x, int y) { return img.occupied(x, y) ? 1 : 0; }

double harris_response(const SphericalImage& img, int x, int y) {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  for (int dy = -kHarrisHalfBlock; dy <= kHarrisHalfBlock; ++dy) {
    for (int dx = -kHarrisHalfBlock; dx <= kHarrisHalfBlock; ++dx) {
      const int u = x + dx;
      const int v = y + dy;
      const int gx = (occ(img, u + 1, v - 1) + 2 * occ(img, u + 1, v) + occ(img, u + 1, v + 1)) -
                     (occ(img, u - 1, v - 1) + 2 * occ(img, u - 1, v) + occ(img, u - 1, v + 1));
      const int gy = (occ(img, u - 1, v + 1) + 2 * occ(img, u, v + 1) + occ(img, u + 1, v + 1)) -
                     (occ(img, u - 1, v - 1) + 2 * occ(img, u, v - 1) + occ(img, u + 1, v - 1));
      a += gx * gx;
      b += gy * gy;
      c += gx * gy;
    }
  }
  return a * b - c * c - kHarrisK * (a + b) * (a + b);
}

double intensity_centroid_angle(const SphericalImage& img, int x, int y) {
  long m10 = 0;
  long m01 = 0;
  for (int dy = -kPatchRadius; dy <= kPatchRadius; ++dy) {
    for (int dx = -kPatchRadius; dx <= kPatchRadius; ++dx) {
      if (dx * dx + dy * dy > kPatchRadius * kPatchRadius) continue;
      if (img.occupied(x + dx, y + dy)) {
        m10 += dx;
        m01 += dy;
      }
    }
  }
  if (m10 == 0 && m01 == 0) return 0.0;
  return std::atan2(static_cast<double>(m01), static_cast<double>(m10));
}

class OccupancyIntegral {
 public:
  explicit OccupancyIntegral(const SphericalImage& img) : w_(img.width() + 1), sums_(static_cast<std::size_t>(w_) * (img.height() + 1), 0) {
    for (int y = 0; y < img.height(); ++y) {
      int row = 0;
      for (int x = 0; x < img.width(); ++x) {
        row += occ(img, x, y);
        at(x + 1, y + 1) = at(x + 1, y) + row;
      }
    }
  }

  /// Occupied-pixel count of the inclusive box [x0, x1] × [y0, y1].
  int box(int x0, int y0, int x1, int y1) const {
    return at(x1 + 1, y1 + 1) - at(x0, y1 + 1) - at(x1 + 1, y0) + at(x0, y0);
  }

 private:
  int& at(int x, int y) { return sums_[static_cast<std::size_t>(y) * w_ + x]; }
  int at(int x, int y) const { return sums_[static_cast<std::size_t>(y) * w_ + x]; }

  int w_;
  std::vector<int> sums_;
};

bool inside_margin(const SphericalImage& img, int x, int y) {
  return x >= kPatchMargin && y >= kPatchMargin && x < img.width() - kPatchMargin && y < img.height() - kPatchMargin;
}

// Keypoints must carry scan points for lifting, and an occupied pixel with no
// occupied circle neighbour is isolated speckle rather than a corner.
bool liftable_corner(const SphericalImage& img, int x, int y) {
  if (!img.occupied(x, y)) return false;
  return std::any_of(kCircle.begin(), kCircle.end(), [&](const auto& o) { return img.occupied(x + o[0], y + o[1]); });
}

}  // namespace

int hamming_distance(const Descriptor& a, const Descriptor& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) d += std::popcount(a.bits[i] ^ b.bits[i]);
  return d;
}

bool fast_segment_test(const SphericalImage& img, int x, int y) {
  if (x < 3 || y < 3 || x >= img.width() - 3 || y >= img.height() - 3) return false;
  const bool center = img.occupied(x, y);
  // With values in {0, 255} and threshold 1, "brighter" and "darker" both reduce
  // to "circle pixel differs from the centre".
  int run = 0;
  for (int i = 0; i < 16 + kArcLength - 1; ++i) {
    const auto& o = kCircle[static_cast<std::size_t>(i % 16)];
    if (img.occupied(x + o[0], y + o[1]) != center) {
      if (++run >= kArcLength) return true;
    } else {
      run = 0;
    }
  }
  return false;
}

std::vector<Keypoint> detect_keypoints(const SphericalImage& img, int max_count) {
  if (img.width() < kMinImageSize || img.height() < kMinImageSize) {
    throw Error(ErrorCode::ImageTooSmall,
                fmt::format("feature detection needs at least {0}x{0} pixels, got {1}x{2}", kMinImageSize,
                            img.width(), img.height()));
  }
  const int w = img.width();
  const int h = img.height();
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  std::vector<double> response(static_cast<std::size_t>(w) * h, kNone);
  auto resp = [&](int x, int y) -> double& { return response[static_cast<std::size_t>(y) * w + x]; };

  for (int y = kPatchMargin; y < h - kPatchMargin; ++y) {
    for (int x = kPatchMargin; x < w - kPatchMargin; ++x) {
      if (liftable_corner(img, x, y) && fast_segment_test(img, x, y)) resp(x, y) = harris_response(img, x, y);
    }
  }

  std::vector<Keypoint> kps;
  for (int y = kPatchMargin; y < h - kPatchMargin; ++y) {
    for (int x = kPatchMargin; x < w - kPatchMargin; ++x) {
      const double r = resp(x, y);
      if (r == kNone) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const double n = resp(x + dx, y + dy);
          // Ties go to the neighbour earlier in raster order.
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (n > r || (earlier && n == r)) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) kps.push_back({x, y, 0.0, r});
    }
  }

  std::stable_sort(kps.begin(), kps.end(), [](const Keypoint& a, const Keypoint& b) { return a.response > b.response; });
  if (max_count >= 0 && kps.size() > static_cast<std::size_t>(max_count)) kps.resize(static_cast<std::size_t>(max_count));
  for (auto& kp : kps) kp.orientation = intensity_centroid_angle(img, kp.x, kp.y);
  return kps;
}

std::vector<Descriptor> describe(const SphericalImage& img, std::span<const Keypoint> keypoints) {
  for (const auto& kp : keypoints) {
    if (!inside_margin(img, kp.x, kp.y)) {
      throw Error(ErrorCode::KeypointTooCloseToEdge,
                  fmt::format("keypoint ({}, {}) is closer than {} px to the image edge", kp.x, kp.y, kPatchMargin));
    }
  }
  const OccupancyIntegral integral(img);
  const auto pattern = brief_pattern();
  std::vector<Descriptor> out;
  out.reserve(keypoints.size());
  for (const auto& kp : keypoints) {
    const double c = std::cos(kp.orientation);
    const double s = std::sin(kp.orientation);
    auto sample = [&](int px, int py) {
      const int rx = kp.x + static_cast<int>(std::lround(c * px - s * py));
      const int ry = kp.y + static_cast<int>(std::lround(s * px + c * py));
      return integral.box(rx - kBoxHalf, ry - kBoxHalf, rx + kBoxHalf, ry + kBoxHalf);
    };
    Descriptor d;
    for (int i = 0; i < 256; ++i) {
      const auto& pr = pattern[static_cast<std::size_t>(i)];
      if (sample(pr.px, pr.py) < sample(pr.qx, pr.qy)) d.set(i);
    }
    out.push_back(d);
  }
  return out;
}

ImageFeatures extract_features(const SphericalImage& img, int max_keypoints) {
  ImageFeatures f;
  f.keypoints = detect_keypoints(img, max_keypoints);
  f.descriptors = describe(img, f.keypoints);
  return f;
}

std::vector<MatchPair> match_features(const ImageFeatures& a, const ImageFeatures& b, int top_k) {
  const std::size_t need = top_k > 0 ? static_cast<std::size_t>(top_k) : 1;
  if (a.keypoints.size() < need || b.keypoints.size() < need) {
    throw Error(ErrorCode::TooFewKeypoints, fmt::format("matching needs {} keypoints per image, got {} and {}", need,
                                                        a.keypoints.size(), b.keypoints.size()));
  }
  const std::size_t na = a.descriptors.size();
  const std::size_t nb = b.descriptors.size();
  std::vector<int> best_b(na, -1);
  std::vector<int> dist_b(na, 257);
  std::vector<int> best_a(nb, -1);
  std::vector<int> dist_a(nb, 257);
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      const int d = hamming_distance(a.descriptors[i], b.descriptors[j]);
      if (d < dist_b[i]) {
        dist_b[i] = d;
        best_b[i] = static_cast<int>(j);
      }
      if (d < dist_a[j]) {
        dist_a[j] = d;
        best_a[j] = static_cast<int>(i);
      }
    }
  }
  std::vector<MatchPair> matches;
  for (std::size_t i = 0; i < na; ++i) {
    const int j = best_b[i];
    if (j >= 0 && best_a[static_cast<std::size_t>(j)] == static_cast<int>(i)) {
      matches.push_back({a.keypoints[i], b.keypoints[static_cast<std::size_t>(j)], dist_b[i], 0});
    }
  }
  std::sort(matches.begin(), matches.end(), [](const MatchPair& l, const MatchPair& r) {
    return std::tie(l.hamming, l.keypoint_a.x, l.keypoint_a.y, l.keypoint_b.x, l.keypoint_b.y) <
           std::tie(r.hamming, r.keypoint_a.x, r.keypoint_a.y, r.keypoint_b.x, r.keypoint_b.y);
  });
  if (top_k > 0 && matches.size() > static_cast<std::size_t>(top_k)) matches.resize(static_cast<std::size_t>(top_k));
  return matches;
}

std::vector<MatchPair> match_images(const SphericalImage& a, const SphericalImage& b, int top_k, int max_keypoints) {
  return match_features(extract_features(a, max_keypoints), extract_features(b, max_keypoints), top_k);
}

std::vector<ImagePairMatch> select_similar_image_pairs(const ImageSequence& seq_a, const ImageSequence& seq_b,
                                                       int pair_count, int top_k, int max_keypoints) {
  if (seq_a.entries.empty() || seq_b.entries.empty()) {
    throw Error(ErrorCode::NoMatchableEntries, "image sequences are empty");
  }
  auto features_of = [&](const ImageSequence& seq) {
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
  };
  const auto fa = features_of(seq_a);
  const auto fb = features_of(seq_b);

  std::vector<ImagePairMatch> scored;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    for (std::size_t j = 0; j < fb.size(); ++j) {
      std::vector<MatchPair> m;
      try {
        m = match_features(fa[i], fb[j], top_k);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::TooFewKeypoints) throw;
        continue;
      }
      if (m.size() < static_cast<std::size_t>(std::max(top_k, 1))) continue;
      double sum = 0.0;
      for (const auto& mp : m) sum += mp.hamming;
      scored.push_back({i, j, sum / static_cast<double>(m.size()), std::move(m)});
    }
  }
  if (scored.empty()) throw Error(ErrorCode::NoMatchableEntries, "no image combination produced enough matches");

  std::stable_sort(scored.begin(), scored.end(), [](const ImagePairMatch& l, const ImagePairMatch& r) {
    return std::tie(l.score, l.entry_a, l.entry_b) < std::tie(r.score, r.entry_a, r.entry_b);
  });
  std::vector<ImagePairMatch> chosen;
  std::vector<bool> used(fa.size(), false);
  for (auto& s : scored) {
    if (static_cast<int>(chosen.size()) >= pair_count) break;
    if (used[s.entry_a]) continue;
    used[s.entry_a] = true;
    const int id = static_cast<int>(chosen.size());
    for (auto& mp : s.matches) mp.image_pair_id = id;
    chosen.push_back(std::move(s));
  }
  return chosen;
}

std::size_t MatchVerificationReport::kept_count() const {
  return static_cast<std::size_t>(std::count(kept.begin(), kept.end(), true));
}

MatchVerificationReport verify_beta_intervals(std::vector<double> beta_a, std::vector<double> beta_b,
                                              std::size_t min_survivors) {
  if (beta_a.size() != beta_b.size()) throw Error(ErrorCode::InvalidArgument, "beta lists differ in length");
  if (beta_a.size() < 3) {
    throw Error(ErrorCode::TooFewMatches, fmt::format("verification needs at least 3 matches, got {}", beta_a.size()));
  }
  MatchVerificationReport r;
  r.beta_a = std::move(beta_a);
  r.beta_b = std::move(beta_b);
  const std::size_t n = r.beta_a.size();
  r.distances.resize(n);
  for (std::size_t k = 0; k < n; ++k) r.distances[k] = std::abs(r.beta_a[k] - r.beta_b[k]);
  r.mean = std::accumulate(r.distances.begin(), r.distances.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (const double d : r.distances) var += (d - r.mean) * (d - r.mean);
  r.stddev = std::sqrt(var / static_cast<double>(n));
  r.kept.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double d = r.distances[k];
    r.kept[k] = r.stddev == 0.0 || (d > r.mean - r.stddev && d < r.mean + r.stddev);
  }
  if (r.kept_count() < min_survivors) {
    throw Error(ErrorCode::TooFewSurvivors,
                fmt::format("only {} of {} matches survived beta verification", r.kept_count(), n));
  }
  return r;
}

MatchVerificationReport verify_matches(std::span<const MatchPair> matches, std::span<const ImagePairView> pairs,
                                       std::size_t min_survivors) {
  std::vector<double> ba;
  std::vector<double> bb;
  for (const auto& m : matches) {
    if (m.image_pair_id < 0 || static_cast<std::size_t>(m.image_pair_id) >= pairs.size()) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("match refers to unknown image pair {}", m.image_pair_id));
    }
    const auto& ctx = pairs[static_cast<std::size_t>(m.image_pair_id)];
    ba.push_back(ctx.a.get().beta_window(m.keypoint_a.y).lo);
    bb.push_back(ctx.b.get().beta_window(m.keypoint_b.y).lo);
  }
  return verify_beta_intervals(std::move(ba), std::move(bb), min_survivors);
}

void write_match_debug(const SphericalImage& a, const SphericalImage& b, std::span<const MatchPair> matches,
                       const std::filesystem::path& pgm_path, const std::filesystem::path& sidecar_path) {
  const int w = a.width() + b.width();
  const int h = std::max(a.height(), b.height());
  std::vector<std::uint8_t> canvas(static_cast<std::size_t>(w) * h, SphericalImage::kEmpty);
  auto blit = [&](const SphericalImage& img, int x0) {
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        canvas[static_cast<std::size_t>(h - 1 - y) * w + x0 + x] = img.value(x, y);
      }
    }
  };
  blit(a, 0);
  blit(b, a.width());
  write_pgm(w, h, canvas, pgm_path);

  std::ofstream side(sidecar_path);
  if (!side) throw Error(ErrorCode::FileNotFound, fmt::format("cannot open {}", sidecar_path.string()));
  for (const auto& m : matches) {
    side << m.keypoint_a.x << ' ' << m.keypoint_a.y << ' ' << m.keypoint_b.x << ' ' << m.keypoint_b.y << ' '
         << m.hamming << '\n';
  }
}

}  // namespace treereg
