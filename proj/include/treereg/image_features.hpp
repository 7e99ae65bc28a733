#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "treereg/spherical_projection.hpp"

namespace treereg {

/// Keypoints keep this distance (pixels) from every image edge so the 31×31
/// descriptor patch always fits.
inline constexpr int kPatchMargin = 16;
inline constexpr int kPatchRadius = 15;
inline constexpr int kMinImageSize = 64;

struct Keypoint {
  int x = 0;
  int y = 0;
  double orientation = 0.0;  // radians, intensity-centroid angle
  double response = 0.0;     // Harris measure on occupancy
};

struct Descriptor {
  std::array<std::uint64_t, 4> bits{};

  bool bit(int i) const { return (bits[static_cast<std::size_t>(i) >> 6] >> (i & 63)) & 1U; }
  void set(int i) { bits[static_cast<std::size_t>(i) >> 6] |= std::uint64_t{1} << (i & 63); }
  friend bool operator==(const Descriptor&, const Descriptor&) = default;
};

int hamming_distance(const Descriptor& a, const Descriptor& b);

struct MatchPair {
  Keypoint keypoint_a;
  Keypoint keypoint_b;
  int hamming = 0;
  int image_pair_id = 0;
};

/// One BRIEF comparison: bit = S(p) < S(q) for 5×5 box sums S of occupancy.
struct BriefPair {
  std::int8_t px, py, qx, qy;
};
/// Fixed 256-pair sampling pattern (Gaussian offsets, σ = 31/5, inside radius 13).
std::span<const BriefPair, 256> brief_pattern();

/// Oriented FAST-9 on the binary raster, ranked by Harris response. Only
/// occupied pixels with at least one occupied circle pixel qualify. Throws
/// ImageTooSmall below 64×64.
std::vector<Keypoint> detect_keypoints(const SphericalImage& img, int max_count = 500);

/// Plain FAST-9 segment test at one pixel (threshold 1 on {0,255} values).
bool fast_segment_test(const SphericalImage& img, int x, int y);

/// Steered BRIEF. Throws KeypointTooCloseToEdge.
std::vector<Descriptor> describe(const SphericalImage& img, std::span<const Keypoint> keypoints);

struct ImageFeatures {
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;
};

ImageFeatures extract_features(const SphericalImage& img, int max_keypoints = 500);

/// Mutual-nearest-neighbour Hamming matching; returns up to `top_k` pairs
/// ordered by (hamming, x_a, y_a). Throws TooFewKeypoints when either side has
/// fewer than `top_k` keypoints. `top_k <= 0` returns every mutual pair.
std::vector<MatchPair> match_features(const ImageFeatures& a, const ImageFeatures& b, int top_k);
std::vector<MatchPair> match_images(const SphericalImage& a, const SphericalImage& b, int top_k,
                                    int max_keypoints = 500);

struct ImagePairMatch {
  std::size_t entry_a = 0;
  std::size_t entry_b = 0;
  double score = 0.0;  // mean Hamming distance of the top matches
  std::vector<MatchPair> matches;
};

/// Scores every (entry_a, entry_b) combination by the mean Hamming distance of
/// its top-k matches and keeps the `pair_count` best with distinct entry_a.
/// Match image_pair_id is the index into the returned list.
std::vector<ImagePairMatch> select_similar_image_pairs(const ImageSequence& seq_a, const ImageSequence& seq_b,
                                                       int pair_count = 3, int top_k = 5, int max_keypoints = 500);

struct MatchVerificationReport {
  std::vector<double> beta_a;     // β_1k, lower bound of the beta interval in image a
  std::vector<double> beta_b;     // β_2k
  std::vector<double> distances;  // d_k = |β_1k − β_2k|
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<bool> kept;

  std::size_t kept_count() const;
};

/// Keeps d_k inside the open interval (mean − σ, mean + σ); σ = 0 keeps all.
/// Throws TooFewMatches below 3 entries and TooFewSurvivors below 4 survivors
/// when `min_survivors` > 0.
MatchVerificationReport verify_beta_intervals(std::vector<double> beta_a, std::vector<double> beta_b,
                                              std::size_t min_survivors = 4);

struct ImagePairView {
  std::reference_wrapper<const SphericalImage> a;
  std::reference_wrapper<const SphericalImage> b;
};

/// Beta-interval verification of matches; `pairs[m.image_pair_id]` supplies the
/// angular mapping of each match.
MatchVerificationReport verify_matches(std::span<const MatchPair> matches, std::span<const ImagePairView> pairs,
                                       std::size_t min_survivors = 4);

/// Side-by-side PGM of two images plus a "x_a y_a x_b y_b hamming" sidecar.
void write_match_debug(const SphericalImage& a, const SphericalImage& b, std::span<const MatchPair> matches,
                       const std::filesystem::path& pgm_path, const std::filesystem::path& sidecar_path);

}  // namespace treereg
