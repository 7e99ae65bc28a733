#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <json.hpp>

#include "treereg/coarse_reg.hpp"
#include "treereg/eval_metrics.hpp"
#include "treereg/fine_reg.hpp"
#include "treereg/tls_simulator.hpp"

namespace treereg {

using Json = nlohmann::ordered_json;

/// {"rotation": 3x3 row-major, "translation": [x, y, z], "frame": "target→reference"}
Json transform_to_json(const RigidTransform& t);
/// Throws ParseError on a missing field, a wrong shape or an invalid rotation.
RigidTransform transform_from_json(const Json& j);

Json coarse_result_to_json(const CoarseResult& r, bool include_timings = true);
Json fine_result_to_json(const FineResult& r, bool include_timings = true);
Json error_report_to_json(const ErrorReport& r);

/// Aligned text table of every fit: layer, arc, kind, centre, radius, rms, status.
std::string format_arc_inventory(std::span<const ArcFit> target, std::span<const ArcFit> reference);

/// Two-space indented, trailing newline. Throws FileNotFound if the directory
/// cannot be written.
void write_json(const std::filesystem::path& path, const Json& j);
/// Throws FileNotFound and ParseError.
Json read_json(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);

/// `scan<k>.xyz` and `scan<k>.labels` per station plus `dataset.json` with the
/// stations, scanner spec, seed, noise and ground-truth transforms into scan 1.
void write_dataset(const std::filesystem::path& dir, const ScanDataset& ds);

struct DatasetFiles {
  ScannerSpec spec;
  std::vector<std::filesystem::path> scans;
  std::vector<std::filesystem::path> labels;
  std::vector<RigidTransform> to_first;  // ground truth, scan k -> scan 1
};

/// Reads a `dataset.json` written by write_dataset; paths are resolved against
/// its directory.
DatasetFiles read_dataset(const std::filesystem::path& manifest);

}  // namespace treereg
