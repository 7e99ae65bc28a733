#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "treereg/coarse_reg.hpp"
#include "treereg/eval_metrics.hpp"
#include "treereg/fine_reg.hpp"
#include "treereg/json_io.hpp"
#include "treereg/tls_simulator.hpp"

namespace treereg {

struct SimulationConfig {
  TreeParams tree;
  DatasetParams dataset;
};

struct PipelineConfig {
  /// scans[0] is the reference; every other scan is registered onto it.
  std::vector<std::filesystem::path> scans;
  /// Optional per-point primitive labels, one file per scan; needed for d̄.
  std::vector<std::filesystem::path> labels;
  /// Optional `dataset.json`; supplies scans, labels, spec and ground truth.
  std::optional<std::filesystem::path> dataset;
  /// When set, a dataset is simulated into `<output_dir>/data` first.
  std::optional<SimulationConfig> simulate;

  ScannerSpec spec = ScannerSpec::from_degrees(0.06, 0.06);
  CoarseParams coarse;
  FineParams fine;
  bool run_icp = true;
  IcpParams icp;
  double eval_thickness = 0.10;
  std::size_t eval_min_points = 20;

  std::filesystem::path output_dir = "treereg_out";
  std::uint64_t seed = 0;
  std::string log_level = "info";
  bool debug_images = false;
  bool parallel_pairs = false;

  /// Throws InvalidArgument and FileNotFound.
  void validate() const;
  Json to_json() const;
};

struct PairOutcome {
  std::size_t target = 0;  // 0-based scan index
  std::string name;        // "2->1"
  bool ok = false;
  std::string error;
  std::string stage;
  std::optional<double> coarse_error;  // d̄ after each stage
  std::optional<double> fine_error;
  std::optional<double> icp_error;
  std::optional<double> coarse_truth_error;  // mean point displacement vs ground truth
  std::optional<double> fine_truth_error;
  std::map<std::string, double> timings;
};

struct ManifestFile {
  std::string path;  // relative to the output directory, '/'-separated
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  Json config;
  std::string version;
  std::vector<PairOutcome> pairs;
  std::vector<ManifestFile> files;
  double total_seconds = 0.0;

  bool success() const;
  Json to_json() const;
};

std::string sha256_hex(const std::filesystem::path& file);

/// Star registration of every scan onto scan 1 (coarse, fine, optional ICP
/// baseline, evaluation), writing per-pair results, `error_table.txt` and
/// `manifest.json` into the output directory. Stage failures abort only their
/// pair and are recorded in the manifest.
RunManifest run_pipeline(const PipelineConfig& config);

}  // namespace treereg
