#include "treereg/spherical_projection.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "treereg/error.hpp"

namespace treereg {

ScannerSpec ScannerSpec::from_degrees(double phi_deg, double vartheta_deg) {
  constexpr double k = std::numbers::pi / 180.0;
  return {phi_deg * k, vartheta_deg * k};
}

void ScannerSpec::validate() const {
  constexpr double half_pi = std::numbers::pi / 2.0;
  if (!(phi > 0.0 && phi < half_pi) || !(vartheta > 0.0 && vartheta < half_pi)) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("angular steps must lie in (0, pi/2), got phi={} vartheta={}", phi, vartheta));
  }
}

double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  if (a > -pi && a <= pi) return a;
  a = std::remainder(a, 2.0 * pi);
  if (a <= -pi) a += 2.0 * pi;
  return a;
}

std::optional<AnglePair> try_spherical_angles(const Point3& p) {
  const double rho = std::hypot(p.x(), p.y());
  if (!(rho > 0.0) || !p.allFinite()) return std::nullopt;
  return AnglePair{std::atan2(p.y(), p.x()), std::atan2(p.z(), rho)};
}

AnglePair spherical_angles(const Point3& p) {
  auto a = try_spherical_angles(p);
  if (!a) {
    throw Error(ErrorCode::DegeneratePoint,
                fmt::format("point ({}, {}, {}) has no azimuth", p.x(), p.y(), p.z()));
  }
  return *a;
}

std::size_t SphericalImage::occupied_count() const {
  return static_cast<std::size_t>(std::count(raster_.begin(), raster_.end(), kOccupied));
}

std::span<const std::uint32_t> SphericalImage::bucket(int x, int y) const {
  if (bucket_offsets_.empty() || !in_bounds(x, y)) return {};
  const std::size_t i = index(x, y);
  return std::span<const std::uint32_t>(bucket_indices_).subspan(bucket_offsets_[i],
                                                                  bucket_offsets_[i + 1] - bucket_offsets_[i]);
}

double SphericalImage::unwrap_alpha(double alpha) const { return alpha_center_ + wrap_angle(alpha - alpha_center_); }

PixelCoord SphericalImage::pixel_of(const AnglePair& a) const {
  const double fx = std::floor((unwrap_alpha(a.alpha) - alpha_min_) / (2.0 * spec_.phi)) + r1_;
  const double fy = std::floor((a.beta - beta_min_) / (2.0 * spec_.vartheta)) + r2_;
  const int x = static_cast<int>(std::clamp(fx, 0.0, static_cast<double>(width_ - 1)));
  const int y = static_cast<int>(std::clamp(fy, 0.0, static_cast<double>(height_ - 1)));
  return {x, y};
}

AngularWindow SphericalImage::alpha_window(int x) const {
  const double lo = alpha_min_ + (x - r1_) * 2.0 * spec_.phi;
  return {lo, lo + 2.0 * spec_.phi};
}

AngularWindow SphericalImage::beta_window(int y) const {
  const double lo = beta_min_ + (y - r2_) * 2.0 * spec_.vartheta;
  return {lo, lo + 2.0 * spec_.vartheta};
}

SphericalImage SphericalImage::blank(const ScannerSpec& spec, double alpha_min, double alpha_max, double beta_min,
                                     double beta_max, int r1, int r2, double alpha_center) {
  spec.validate();
  if (r1 < 0 || r2 < 0) throw Error(ErrorCode::InvalidArgument, "image borders must be nonnegative");
  SphericalImage img;
  img.spec_ = spec;
  img.alpha_min_ = alpha_min;
  img.alpha_max_ = alpha_max;
  img.beta_min_ = beta_min;
  img.beta_max_ = beta_max;
  img.alpha_center_ = alpha_center;
  img.r1_ = r1;
  img.r2_ = r2;
  // Angular span in 2-step pixels plus both borders.
  img.width_ = static_cast<int>(std::ceil((alpha_max - alpha_min) / (2.0 * spec.phi) + 2.0 * r1));
  img.height_ = static_cast<int>(std::ceil((beta_max - beta_min) / (2.0 * spec.vartheta) + 2.0 * r2));
  img.width_ = std::max(img.width_, 1);
  img.height_ = std::max(img.height_, 1);
  img.raster_.assign(static_cast<std::size_t>(img.width_) * img.height_, kEmpty);
  return img;
}

SphericalImage SphericalImage::from_raster(int width, int height, std::vector<std::uint8_t> raster) {
  if (width <= 0 || height <= 0 || raster.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::InvalidArgument, "raster size does not match its dimensions");
  }
  SphericalImage img;
  img.width_ = width;
  img.height_ = height;
  img.spec_ = ScannerSpec::from_degrees(0.06, 0.06);
  img.raster_ = std::move(raster);
  return img;
}

SphericalImage project(const PointCloud& cloud, const ScannerSpec& spec, int r1, int r2) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "cannot project an empty cloud");
  spec.validate();

  std::vector<AnglePair> angles;
  std::vector<std::uint32_t> source;
  angles.reserve(cloud.size());
  source.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (auto a = try_spherical_angles(cloud[i])) {
      angles.push_back(*a);
      source.push_back(static_cast<std::uint32_t>(i));
    }
  }
  if (angles.empty()) throw Error(ErrorCode::AllPointsDegenerate, "every point lies on the scanner z axis");

  auto span_of = [&](double center) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& a : angles) {
      const double u = center + wrap_angle(a.alpha - center);
      lo = std::min(lo, u);
      hi = std::max(hi, u);
    }
    return std::pair{lo, hi};
  };

  double center = 0.0;
  auto [amin, amax] = span_of(center);
  if (amax - amin > std::numbers::pi) {
    double s = 0.0;
    double c = 0.0;
    for (const auto& a : angles) {
      s += std::sin(a.alpha);
      c += std::cos(a.alpha);
    }
    const double mean = std::atan2(s, c);
    auto [lo, hi] = span_of(mean);
    if (hi - lo < amax - amin) {
      center = mean;
      amin = lo;
      amax = hi;
    }
  }
  double bmin = std::numeric_limits<double>::infinity();
  double bmax = -bmin;
  for (const auto& a : angles) {
    bmin = std::min(bmin, a.beta);
    bmax = std::max(bmax, a.beta);
  }

  SphericalImage img = SphericalImage::blank(spec, amin, amax, bmin, bmax, r1, r2, center);
  img.dropped_points_ = cloud.size() - angles.size();

  const std::size_t npix = img.raster_.size();
  std::vector<std::uint32_t> pixel_of_point(angles.size());
  img.bucket_offsets_.assign(npix + 1, 0);
  for (std::size_t k = 0; k < angles.size(); ++k) {
    const PixelCoord px = img.pixel_of(angles[k]);
    const auto i = static_cast<std::uint32_t>(img.index(px.x, px.y));
    pixel_of_point[k] = i;
    ++img.bucket_offsets_[i + 1];
  }
  for (std::size_t i = 0; i < npix; ++i) img.bucket_offsets_[i + 1] += img.bucket_offsets_[i];
  img.bucket_indices_.resize(angles.size());
  std::vector<std::uint32_t> cursor(img.bucket_offsets_.begin(), img.bucket_offsets_.end() - 1);
  for (std::size_t k = 0; k < angles.size(); ++k) {
    const std::uint32_t i = pixel_of_point[k];
    img.bucket_indices_[cursor[i]++] = source[k];
    img.raster_[i] = SphericalImage::kOccupied;
  }
  return img;
}

Point3 pixel_region_centroid(const SphericalImage& img, const PointCloud& cloud, PixelCoord pixel) {
  const auto members = img.bucket(pixel.x, pixel.y);
  if (members.empty()) {
    throw Error(ErrorCode::EmptyBucket, fmt::format("pixel ({}, {}) has no source points", pixel.x, pixel.y));
  }
  Point3 acc = Point3::Zero();
  for (const auto i : members) acc += cloud[i];
  return acc / static_cast<double>(members.size());
}

int sequence_length(double theta, int n_scans) {
  if (!(theta > 0.0) || n_scans < 2) {
    throw Error(ErrorCode::InvalidArgument, "sequence needs theta > 0 and at least 2 scans");
  }
  return static_cast<int>(std::floor(4.0 * std::numbers::pi / (n_scans * theta) + 1e-9));
}

std::vector<double> sequence_rotations(double theta, int n_scans) {
  const int count = sequence_length(theta, n_scans);
  const double start = -2.0 * std::numbers::pi / n_scans;
  std::vector<double> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    double rho = start + k * theta;
    if (std::abs(rho) < 1e-12) rho = 0.0;
    out.push_back(rho);
  }
  return out;
}

ImageSequence generate_image_sequence(const PointCloud& cloud, const ScannerSpec& spec, double theta, int n_scans,
                                      int r1, int r2) {
  ImageSequence seq;
  seq.theta = theta;
  seq.n_scans = n_scans;
  seq.center = horizontal_centroid(cloud);
  for (const double rho : sequence_rotations(theta, n_scans)) {
    SphericalImage img = project(rotate_about_vertical_axis(cloud, seq.center, rho), spec, r1, r2);
    img.set_source_rotation(rho);
    seq.entries.push_back({rho, std::move(img)});
  }
  return seq;
}

void write_pgm(int width, int height, std::span<const std::uint8_t> pixels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FileNotFound, fmt::format("cannot open {} for writing", path.string()));
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_pgm(const SphericalImage& img, const std::filesystem::path& path) {
  std::vector<std::uint8_t> flipped(img.raster().size());
  const auto w = static_cast<std::size_t>(img.width());
  for (int y = 0; y < img.height(); ++y) {
    const auto src = img.raster().begin() + static_cast<std::ptrdiff_t>(y * w);
    std::copy(src, src + static_cast<std::ptrdiff_t>(w),
              flipped.begin() + static_cast<std::ptrdiff_t>((img.height() - 1 - y) * w));
  }
  write_pgm(img.width(), img.height(), flipped, path);
}

std::string sequence_pgm_name(const std::string& scan, double rotation) {
  const double deg = std::round(rotation * 180.0 / std::numbers::pi * 1e6) / 1e6;
  return fmt::format("{}_{:g}.pgm", scan, deg == 0.0 ? 0.0 : deg);
}

}  // namespace treereg
