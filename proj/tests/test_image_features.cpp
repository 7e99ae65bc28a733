#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "treereg/error.hpp"
#include "treereg/image_features.hpp"
#include "treereg/tls_simulator.hpp"

using namespace treereg;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

using Raster = std::vector<std::uint8_t>;

Raster empty_raster(int w, int h) { return Raster(static_cast<std::size_t>(w) * h, SphericalImage::kEmpty); }

void fill_rect(Raster& r, int w, int x0, int y0, int x1, int y1) {
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) r[static_cast<std::size_t>(y) * w + x] = SphericalImage::kOccupied;
  }
}

// Random occupied rectangles and strokes: plenty of corners, no isolated pixels.
Raster blobs(std::mt19937_64& rng, int w, int h, int count) {
  Raster r = empty_raster(w, h);
  std::uniform_int_distribution<int> px(20, w - 40);
  std::uniform_int_distribution<int> py(20, h - 40);
  std::uniform_int_distribution<int> size(3, 18);
  for (int i = 0; i < count; ++i) {
    const int x = px(rng), y = py(rng);
    fill_rect(r, w, x, y, x + size(rng), y + size(rng));
  }
  return r;
}

Raster shift_x(const Raster& r, int w, int h, int dx) {
  Raster out = empty_raster(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int sx = x - dx;
      if (sx >= 0 && sx < w) out[static_cast<std::size_t>(y) * w + x] = r[static_cast<std::size_t>(y) * w + sx];
    }
  }
  return out;
}

// Quarter turn: pixel (x, y) of a w×h raster lands at (h − 1 − y, x) in an h×w raster.
Raster rotate_quarter(const Raster& r, int w, int h) {
  Raster out(r.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out[static_cast<std::size_t>(x) * h + (h - 1 - y)] = r[static_cast<std::size_t>(y) * w + x];
  }
  return out;
}

// FAST-9 written out independently: 16-pixel Bresenham circle of radius 3.
bool brute_segment_test(const SphericalImage& img, int x, int y) {
  static constexpr std::array<std::array<int, 2>, 16> circle = {{{0, -3},
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
  if (x < 3 || y < 3 || x + 3 >= img.width() || y + 3 >= img.height()) return false;
  std::array<bool, 16> differs{};
  for (int i = 0; i < 16; ++i) {
    differs[i] = img.occupied(x + circle[i][0], y + circle[i][1]) != img.occupied(x, y);
  }
  for (int start = 0; start < 16; ++start) {
    bool all = true;
    for (int k = 0; k < 9 && all; ++k) all = differs[(start + k) % 16];
    if (all) return true;
  }
  return false;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("detect_keypoints: blank and single-pixel images give nothing") {
  CHECK(detect_keypoints(SphericalImage::from_raster(80, 80, empty_raster(80, 80))).empty());
  Raster one = empty_raster(80, 80);
  one[40 * 80 + 40] = SphericalImage::kOccupied;
  CHECK(detect_keypoints(SphericalImage::from_raster(80, 80, one)).empty());
  CHECK(code_of([] { detect_keypoints(SphericalImage::from_raster(63, 80, empty_raster(63, 80))); }) ==
        ErrorCode::ImageTooSmall);
}

TEST_CASE("detect_keypoints finds the corner of a square") {
  Raster r = empty_raster(100, 100);
  fill_rect(r, 100, 40, 40, 60, 60);
  const SphericalImage img = SphericalImage::from_raster(100, 100, r);
  const auto kps = detect_keypoints(img);
  REQUIRE(!kps.empty());
  for (const auto& [cx, cy] : std::array<std::array<int, 2>, 4>{{{40, 40}, {59, 40}, {40, 59}, {59, 59}}}) {
    const bool near = std::any_of(kps.begin(), kps.end(), [&](const Keypoint& k) {
      return std::abs(k.x - cx) <= 2 && std::abs(k.y - cy) <= 2;
    });
    CHECK(near);
  }
}

TEST_CASE("fast_segment_test agrees with a brute-force segment test") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 4; ++trial) {
    const SphericalImage img = SphericalImage::from_raster(96, 96, blobs(rng, 96, 96, 25));
    for (int y = 0; y < 96; ++y) {
      for (int x = 0; x < 96; ++x) CHECK(fast_segment_test(img, x, y) == brute_segment_test(img, x, y));
    }
  }
}

TEST_CASE("keypoints sit on occupied pixels with mixed 7x7 neighbourhoods") {
  std::mt19937_64 rng(22);
  const SphericalImage img = SphericalImage::from_raster(160, 120, blobs(rng, 160, 120, 40));
  const auto kps = detect_keypoints(img);
  REQUIRE(kps.size() > 10);
  for (const auto& k : kps) {
    CHECK(img.occupied(k.x, k.y));
    CHECK(k.x >= kPatchMargin);
    CHECK(k.y >= kPatchMargin);
    CHECK(k.x < img.width() - kPatchMargin);
    CHECK(k.y < img.height() - kPatchMargin);
    int occupied = 0;
    for (int dy = -3; dy <= 3; ++dy) {
      for (int dx = -3; dx <= 3; ++dx) occupied += img.occupied(k.x + dx, k.y + dy) ? 1 : 0;
    }
    CHECK(occupied > 0);
    CHECK(occupied < 49);
  }
  for (std::size_t i = 1; i < kps.size(); ++i) CHECK(kps[i - 1].response >= kps[i].response);
  CHECK(detect_keypoints(img, 5).size() == 5);
}

TEST_CASE("descriptors are deterministic") {
  std::mt19937_64 rng(23);
  const SphericalImage img = SphericalImage::from_raster(128, 128, blobs(rng, 128, 128, 30));
  const auto kps = detect_keypoints(img);
  CHECK(describe(img, kps) == describe(img, kps));
  const auto pattern = brief_pattern();
  for (const auto& p : pattern) {
    CHECK(std::max({std::abs(p.px), std::abs(p.py), std::abs(p.qx), std::abs(p.qy)}) <= 13);
  }
}

TEST_CASE("describe rejects keypoints near the edge") {
  const SphericalImage img = SphericalImage::from_raster(80, 80, empty_raster(80, 80));
  const std::vector<Keypoint> kp = {{5, 40, 0.0, 1.0}};
  CHECK(code_of([&] { describe(img, kp); }) == ErrorCode::KeypointTooCloseToEdge);
}

TEST_CASE("steered descriptors survive a quarter turn") {
  std::mt19937_64 rng(24);
  const int w = 128, h = 112;
  const Raster r = blobs(rng, w, h, 30);
  const SphericalImage a = SphericalImage::from_raster(w, h, r);
  const SphericalImage b = SphericalImage::from_raster(h, w, rotate_quarter(r, w, h));
  const auto ka = detect_keypoints(a);
  const auto kb = detect_keypoints(b);
  const auto da = describe(a, ka);
  const auto db = describe(b, kb);
  int compared = 0;
  int close = 0;
  for (std::size_t i = 0; i < ka.size(); ++i) {
    const int mx = h - 1 - ka[i].y;
    const int my = ka[i].x;
    for (std::size_t j = 0; j < kb.size(); ++j) {
      if (kb[j].x == mx && kb[j].y == my) {
        ++compared;
        close += hamming_distance(da[i], db[j]) <= 40 ? 1 : 0;
      }
    }
  }
  REQUIRE(compared >= 10);
  CHECK(close >= 0.9 * compared);
}

TEST_CASE("blank and structured patches have distant descriptors") {
  std::mt19937_64 rng(25);
  Raster structured = empty_raster(80, 80);
  std::bernoulli_distribution coin(0.5);
  for (auto& v : structured) v = coin(rng) ? SphericalImage::kOccupied : SphericalImage::kEmpty;
  const std::vector<Keypoint> kp = {{40, 40, 0.0, 1.0}};
  const auto d_blank = describe(SphericalImage::from_raster(80, 80, empty_raster(80, 80)), kp);
  const auto d_full = describe(SphericalImage::from_raster(80, 80, structured), kp);
  CHECK(hamming_distance(d_blank[0], d_full[0]) >= 100);
}

TEST_CASE("self matching") {
  std::mt19937_64 rng(26);
  const SphericalImage img = SphericalImage::from_raster(128, 128, blobs(rng, 128, 128, 30));
  const auto m = match_images(img, img, 5);
  REQUIRE(m.size() == 5);
  for (const auto& p : m) {
    CHECK(p.hamming == 0);
    CHECK(p.keypoint_a.x == p.keypoint_b.x);
    CHECK(p.keypoint_a.y == p.keypoint_b.y);
  }
}

TEST_CASE("matching a shifted image recovers the shift") {
  std::mt19937_64 rng(27);
  const int w = 160, h = 128;
  const Raster r = blobs(rng, w, h, 30);
  const SphericalImage a = SphericalImage::from_raster(w, h, r);
  const SphericalImage b = SphericalImage::from_raster(w, h, shift_x(r, w, h, 5));
  const auto m = match_images(a, b, 5);
  REQUIRE(m.size() == 5);
  int good = 0;
  for (const auto& p : m) {
    good += (std::abs(p.keypoint_b.x - p.keypoint_a.x - 5) <= 1 && std::abs(p.keypoint_b.y - p.keypoint_a.y) <= 1);
  }
  CHECK(good >= 4);
}

Raster noise(std::mt19937_64& rng, int w, int h) {
  std::bernoulli_distribution coin(0.5);
  Raster r = empty_raster(w, h);
  for (auto& v : r) v = coin(rng) ? SphericalImage::kOccupied : SphericalImage::kEmpty;
  return r;
}

// Returned pairs are the best 5 of ~10^5 comparisons, so their mean sits well
// below the typical distance between unrelated descriptors.
TEST_CASE("unrelated random images match poorly") {
  std::mt19937_64 rng(28);
  double returned = 0.0, typical = 0.0;
  int n_returned = 0, n_typical = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const SphericalImage a = SphericalImage::from_raster(128, 128, noise(rng, 128, 128));
    const SphericalImage b = SphericalImage::from_raster(128, 128, noise(rng, 128, 128));
    const ImageFeatures fa = extract_features(a);
    const ImageFeatures fb = extract_features(b);
    for (const auto& p : match_features(fa, fb, 5)) {
      returned += p.hamming;
      ++n_returned;
    }
    for (const auto& da : fa.descriptors) {
      for (const auto& db : fb.descriptors) {
        typical += hamming_distance(da, db);
        ++n_typical;
      }
    }
  }
  REQUIRE(n_returned == 25);
  returned /= n_returned;
  typical /= n_typical;
  MESSAGE("returned mean " << returned << ", all-pairs mean " << typical);
  CHECK(typical >= 90.0);
  CHECK(returned >= 60.0);
}

TEST_CASE("mutual matching is symmetric") {
  std::mt19937_64 rng(29);
  const SphericalImage a = SphericalImage::from_raster(128, 128, blobs(rng, 128, 128, 30));
  const SphericalImage b = SphericalImage::from_raster(128, 128, blobs(rng, 128, 128, 30));
  using Key = std::array<int, 5>;
  std::set<Key> ab, ba;
  for (const auto& p : match_images(a, b, 0)) ab.insert({p.keypoint_a.x, p.keypoint_a.y, p.keypoint_b.x, p.keypoint_b.y, p.hamming});
  for (const auto& p : match_images(b, a, 0)) ba.insert({p.keypoint_b.x, p.keypoint_b.y, p.keypoint_a.x, p.keypoint_a.y, p.hamming});
  CHECK(!ab.empty());
  CHECK(ab == ba);
}

TEST_CASE("match_features needs top_k keypoints on both sides") {
  ImageFeatures few;
  few.keypoints.resize(2);
  few.descriptors.resize(2);
  CHECK(code_of([&] { match_features(few, few, 5); }) == ErrorCode::TooFewKeypoints);
}

TEST_CASE("beta verification") {
  SUBCASE("equal distances keep everything") {
    const auto r = verify_beta_intervals({0.5, 1.5, 2.5, 3.5, 4.5}, {0.75, 1.75, 2.75, 3.75, 4.75});
    CHECK(r.stddev == 0.0);
    CHECK(r.kept_count() == 5);
  }
  SUBCASE("one large distance is the outlier") {
    // d = {0.1, 0.1, 0.1, 0.1, 5.0} ×1e-2: mean 1.08e-2, population σ 1.96e-2.
    const auto r = verify_beta_intervals({0.001, 0.001, 0.001, 0.001, 0.05}, {0, 0, 0, 0, 0});
    CHECK(r.mean == doctest::Approx(0.0108));
    CHECK(r.stddev == doctest::Approx(0.0196));
    CHECK(r.kept == std::vector<bool>{true, true, true, true, false});
  }
  SUBCASE("errors") {
    CHECK(code_of([] { verify_beta_intervals({0.1, 0.2}, {0.1, 0.2}); }) == ErrorCode::TooFewMatches);
    CHECK(code_of([] { verify_beta_intervals({0.0, 0.0, 0.0, 1.0}, {0, 0, 0, 0}); }) == ErrorCode::TooFewSurvivors);
    CHECK(verify_beta_intervals({0.0, 0.0, 0.0, 1.0}, {0, 0, 0, 0}, 0).kept_count() == 3);
  }
}

TEST_CASE("verification never adds matches") {
  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(15), b(15);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = u(rng);
      b[i] = u(rng);
    }
    const auto r = verify_beta_intervals(a, b, 0);
    CHECK(r.kept_count() <= a.size());
  }
}

TEST_CASE("verify_matches reads beta windows from the pixel rows") {
  const ScannerSpec spec = ScannerSpec::from_degrees(0.1, 0.1);
  const SphericalImage img = SphericalImage::blank(spec, 0.0, 0.3, -0.1, 0.2, 8, 8);
  std::vector<MatchPair> matches;
  for (int y : {20, 30, 40, 50, 60}) matches.push_back({{20, y, 0, 0}, {20, y, 0, 0}, 0, 0});
  const std::vector<ImagePairView> views = {{img, img}};
  const auto r = verify_matches(matches, views);
  CHECK(r.kept_count() == 5);
  CHECK(r.beta_a[0] == doctest::Approx(-0.1 + 12 * 2 * 0.1 * kDeg));
  matches.front().image_pair_id = 3;
  CHECK(code_of([&] { verify_matches(matches, views); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("similar image pairs on a simulated tree") {
  TreeParams tp;
  tp.branch_count = 6;
  const TreeModel tree = generate_tree(tp, 3);
  DatasetParams dp;
  dp.spec = ScannerSpec::from_degrees(0.1, 0.1);
  const ScanDataset ds = make_dataset(tree, dp, 3);
  const ImageSequence seq = generate_image_sequence(ds.scans[0].cloud, dp.spec, 10 * kDeg, 3);

  const auto self = select_similar_image_pairs(seq, seq, 3, 5);
  REQUIRE(self.size() == 3);
  std::size_t total = 0;
  std::set<std::size_t> distinct;
  for (std::size_t i = 0; i < self.size(); ++i) {
    CHECK(self[i].entry_a == self[i].entry_b);
    CHECK(self[i].score == 0.0);
    total += self[i].matches.size();
    distinct.insert(self[i].entry_a);
    for (const auto& m : self[i].matches) CHECK(m.image_pair_id == static_cast<int>(i));
  }
  CHECK(total == 15);
  CHECK(distinct.size() == 3);

  std::vector<MatchPair> all;
  std::vector<ImagePairView> views;
  for (const auto& p : self) {
    all.insert(all.end(), p.matches.begin(), p.matches.end());
    views.push_back({seq.entries[p.entry_a].image, seq.entries[p.entry_b].image});
  }
  CHECK(verify_matches(all, views).kept_count() == 15);

  CHECK(code_of([] { select_similar_image_pairs(ImageSequence{}, ImageSequence{}); }) ==
        ErrorCode::NoMatchableEntries);
}
