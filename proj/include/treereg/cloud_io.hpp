#pragma once

#include <filesystem>
#include <vector>

#include "treereg/geom_core.hpp"

namespace treereg {

enum class CloudFormat { Auto, Xyz, Ply };

/// Reads points in file order. XYZ: whitespace-separated x y z per line,
/// '#' comments, extra columns ignored. PLY: ascii or binary_little_endian
/// with float/double x, y, z on the vertex element. Throws FileNotFound,
/// ParseError (with line or byte offset) and EmptyFile.
PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format = CloudFormat::Auto);

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud);

/// One integer label per line.
std::vector<int> load_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);

}  // namespace treereg
