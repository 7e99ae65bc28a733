#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treereg/geom_core.hpp"

namespace treereg {

/// Horizontal (phi) and vertical (vartheta) angular step widths of the scanner, radians.
struct ScannerSpec {
  double phi = 0.0;
  double vartheta = 0.0;

  static ScannerSpec from_degrees(double phi_deg, double vartheta_deg);
  /// Throws InvalidArgument unless both steps lie in (0, π/2).
  void validate() const;
};

/// Angles of `p` as seen from the origin. Throws DegeneratePoint for the origin
/// and points on the z axis.
AnglePair spherical_angles(const Point3& p);
std::optional<AnglePair> try_spherical_angles(const Point3& p);

/// Wraps an angle into (−π, π].
double wrap_angle(double a);

struct PixelCoord {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Half-open angular interval [lo, hi).
struct AngularWindow {
  double lo = 0.0;
  double hi = 0.0;
};

/// Binary spherical-projection raster (0 = occupied, 255 = empty), stored
/// row-major with y increasing with beta, plus the source-point indices that
/// fell into every pixel.
class SphericalImage {
 public:
  static constexpr std::uint8_t kOccupied = 0;
  static constexpr std::uint8_t kEmpty = 255;

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int border_x() const noexcept { return r1_; }
  int border_y() const noexcept { return r2_; }
  double alpha_min() const noexcept { return alpha_min_; }
  double alpha_max() const noexcept { return alpha_max_; }
  double beta_min() const noexcept { return beta_min_; }
  double beta_max() const noexcept { return beta_max_; }
  /// Branch-cut centre used to unwrap alpha (0 unless the cloud straddles ±π).
  double alpha_center() const noexcept { return alpha_center_; }
  const ScannerSpec& spec() const noexcept { return spec_; }
  double source_rotation() const noexcept { return source_rotation_; }
  std::size_t dropped_points() const noexcept { return dropped_points_; }
  std::size_t projected_points() const noexcept { return bucket_indices_.size(); }

  const std::vector<std::uint8_t>& raster() const noexcept { return raster_; }
  std::uint8_t value(int x, int y) const { return raster_[index(x, y)]; }
  bool occupied(int x, int y) const { return value(x, y) == kOccupied; }
  bool in_bounds(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  std::size_t occupied_count() const;

  std::span<const std::uint32_t> bucket(int x, int y) const;

  /// Alpha unwrapped around alpha_center(), the convention all windows use.
  double unwrap_alpha(double alpha) const;
  /// Pixel of an angle pair: floor((angle - min) / 2·step) + border, clamped into the raster.
  PixelCoord pixel_of(const AnglePair& angles) const;
  AngularWindow alpha_window(int x) const;
  AngularWindow beta_window(int y) const;

  void set_source_rotation(double rho) { source_rotation_ = rho; }

  /// Builds an image from explicit geometry and an empty raster; used by
  /// `project` and by tests that need a specific angular mapping.
  static SphericalImage blank(const ScannerSpec& spec, double alpha_min, double alpha_max, double beta_min,
                              double beta_max, int r1, int r2, double alpha_center = 0.0);
  /// Raster-only image (no buckets), for feature tests on synthetic patterns.
  static SphericalImage from_raster(int width, int height, std::vector<std::uint8_t> raster);

 private:
  friend SphericalImage project(const PointCloud&, const ScannerSpec&, int, int);

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  int r1_ = 0;
  int r2_ = 0;
  double alpha_min_ = 0.0;
  double alpha_max_ = 0.0;
  double beta_min_ = 0.0;
  double beta_max_ = 0.0;
  double alpha_center_ = 0.0;
  ScannerSpec spec_{};
  double source_rotation_ = 0.0;
  std::size_t dropped_points_ = 0;
  std::vector<std::uint8_t> raster_;
  // CSR buckets: indices of pixel i are bucket_indices_[bucket_offsets_[i] .. bucket_offsets_[i+1]).
  std::vector<std::uint32_t> bucket_offsets_;
  std::vector<std::uint32_t> bucket_indices_;
};

inline constexpr int kDefaultBorder = 8;

/// Projects the cloud (as seen from its frame origin) into a binary image whose
/// pixels cover 2φ × 2ϑ. Degenerate points are dropped and counted.
SphericalImage project(const PointCloud& cloud, const ScannerSpec& spec, int r1 = kDefaultBorder,
                       int r2 = kDefaultBorder);

/// Mean of the 3D points in the pixel's bucket. `cloud` must be the cloud the
/// image was projected from. Throws EmptyBucket.
Point3 pixel_region_centroid(const SphericalImage& img, const PointCloud& cloud, PixelCoord pixel);

struct SequenceEntry {
  double rotation = 0.0;
  SphericalImage image;
};

struct ImageSequence {
  std::vector<SequenceEntry> entries;
  double theta = 0.0;
  int n_scans = 0;
  /// Rotation axis (x̄, ȳ), computed once from the un-rotated cloud.
  Vec2 center = Vec2::Zero();
};

/// Number of rotations ⌊720° / (n_scans·θ)⌋.
int sequence_length(double theta, int n_scans);
/// Rotation angles −360°/n + kθ, k = 0 .. sequence_length − 1.
std::vector<double> sequence_rotations(double theta, int n_scans);

ImageSequence generate_image_sequence(const PointCloud& cloud, const ScannerSpec& spec, double theta, int n_scans,
                                      int r1 = kDefaultBorder, int r2 = kDefaultBorder);

/// Writes a binary P5 PGM. Rows are flipped so that larger beta is at the top.
void write_pgm(const SphericalImage& img, const std::filesystem::path& path);
void write_pgm(int width, int height, std::span<const std::uint8_t> row_major_top_down,
               const std::filesystem::path& path);
/// `<scan>_<rotation_deg>.pgm`, e.g. "scan2_-120.pgm".
std::string sequence_pgm_name(const std::string& scan, double rotation);

}  // namespace treereg
