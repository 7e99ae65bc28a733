#include "treereg/pipeline.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <future>
#include <numbers>

#include "treereg/cloud_io.hpp"
#include "treereg/error.hpp"

namespace treereg {

namespace {

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Inputs {
  ScannerSpec spec;
  std::vector<PointCloud> clouds;
  std::vector<std::vector<int>> labels;  // empty when not available
  std::vector<RigidTransform> truth;     // scan k -> scan 1, empty when unknown
};

Inputs load_inputs(const PipelineConfig& config) {
  Inputs in;
  in.spec = config.spec;
  std::vector<std::filesystem::path> scans = config.scans;
  std::vector<std::filesystem::path> labels = config.labels;
  std::optional<std::filesystem::path> dataset = config.dataset;
  if (config.simulate) {
    const auto dir = config.output_dir / "data";
    const TreeModel model = generate_tree(config.simulate->tree, config.seed);
    write_dataset(dir, make_dataset(model, config.simulate->dataset, config.seed));
    dataset = dir / "dataset.json";
  }
  if (dataset) {
    DatasetFiles files = read_dataset(*dataset);
    in.spec = files.spec;
    scans = files.scans;
    labels = files.labels;
    in.truth = files.to_first;
  }
  for (const auto& p : scans) in.clouds.push_back(load_cloud(p));
  for (std::size_t k = 0; k < labels.size(); ++k) {
    in.labels.push_back(load_labels(labels[k]));
    if (in.labels.back().size() != in.clouds[k].size()) {
      throw Error(ErrorCode::ParseError, fmt::format("{}: {} labels for {} points", labels[k].string(),
                                                     in.labels.back().size(), in.clouds[k].size()));
    }
  }
  return in;
}

PairOutcome register_pair(const PipelineConfig& config, const Inputs& in, std::size_t k) {
  PairOutcome out;
  out.target = k;
  out.name = fmt::format("{}->1", k + 1);
  const auto dir = config.output_dir / fmt::format("pair_{}_1", k + 1);
  std::filesystem::create_directories(dir);
  const PointCloud& reference = in.clouds[0];
  const PointCloud& target = in.clouds[k];
  const bool labelled = !in.labels.empty();
  const bool truth = !in.truth.empty();
  const RigidTransform gt = truth ? compose(inverse(in.truth[0]), in.truth[k]) : RigidTransform{};

  std::string stage = "coarse";
  try {
    auto t0 = std::chrono::steady_clock::now();
    const CoarseResult coarse = coarse_register(target, reference, in.spec, config.coarse);
    out.timings["coarse"] = since(t0);
    write_json(dir / "coarse.json", coarse_result_to_json(coarse, false));
    if (config.debug_images && !coarse.image_pairs.empty()) {
      const auto& ip = coarse.image_pairs.front();
      const auto rot_a = generate_image_sequence(target, in.spec, config.coarse.theta, config.coarse.n_scans,
                                                 config.coarse.r1, config.coarse.r2);
      const auto rot_b = generate_image_sequence(reference, in.spec, config.coarse.theta, config.coarse.n_scans,
                                                 config.coarse.r1, config.coarse.r2);
      if (ip.entry_a < rot_a.entries.size() && ip.entry_b < rot_b.entries.size()) {
        write_match_debug(rot_a.entries[ip.entry_a].image, rot_b.entries[ip.entry_b].image, ip.matches,
                          dir / "matches.pgm", dir / "matches.txt");
      }
    }
    const PointCloud coarse_cloud = apply_transform(target, coarse.transform);

    std::vector<BranchPairSpec> branches;
    if (labelled) {
      branches = branch_pairs_from_labels(reference, in.labels[0], coarse_cloud, in.labels[k], config.eval_thickness,
                                          config.eval_min_points);
    }
    const auto eval = [&](const PointCloud& moved) { return evaluate(branches, reference, moved); };

    ErrorTableRow row{out.name, {}};
    if (labelled) {
      stage = "evaluate";
      const ErrorReport r = eval(coarse_cloud);
      out.coarse_error = r.mean;
      write_json(dir / "error_coarse.json", error_report_to_json(r));
    }

    stage = "fine";
    t0 = std::chrono::steady_clock::now();
    const FineResult fine = fine_register(coarse_cloud, reference, in.spec, config.fine);
    out.timings["fine"] = since(t0);
    write_json(dir / "fine.json", fine_result_to_json(fine, false));
    write_text(dir / "arcs.txt", format_arc_inventory(fine.target_fits, fine.reference_fits));
    const RigidTransform total = compose(fine.transform, coarse.transform);
    write_json(dir / "transform.json", transform_to_json(total));
    const PointCloud fine_cloud = apply_transform(coarse_cloud, fine.transform);
    if (labelled) {
      stage = "evaluate";
      const ErrorReport r = eval(fine_cloud);
      out.fine_error = r.mean;
      write_json(dir / "error_fine.json", error_report_to_json(r));
    }
    if (truth) {
      out.coarse_truth_error = ground_truth_error(target, coarse.transform, gt);
      out.fine_truth_error = ground_truth_error(target, total, gt);
    }

    if (config.run_icp) {
      stage = "icp";
      t0 = std::chrono::steady_clock::now();
      const IcpResult icp = icp_register(coarse_cloud, reference, config.icp);
      out.timings["icp"] = since(t0);
      write_json(dir / "transform_icp.json", transform_to_json(compose(icp.transform, coarse.transform)));
      if (labelled) {
        stage = "evaluate";
        const ErrorReport r = eval(apply_transform(coarse_cloud, icp.transform));
        out.icp_error = r.mean;
        write_json(dir / "error_icp.json", error_report_to_json(r));
      }
    }
    out.ok = true;
  } catch (const Error& e) {
    out.error = e.what();
    out.stage = e.stage().empty() ? stage : e.stage();
    spdlog::error("pair {}: {}", out.name, out.error);
  }
  return out;
}

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

void PipelineConfig::validate() const {
  if (!simulate && !dataset && scans.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "at least two scans (or a dataset) are required");
  }
  if (!labels.empty() && labels.size() != scans.size()) {
    throw Error(ErrorCode::InvalidArgument, "give one label file per scan or none");
  }
  const auto exists = [](const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) throw Error(ErrorCode::FileNotFound, fmt::format("{} does not exist", p.string()));
  };
  if (!simulate) {
    if (dataset) exists(*dataset);
    for (const auto& p : scans) exists(p);
    for (const auto& p : labels) exists(p);
  }
  if (simulate) simulate->tree.validate();
  spec.validate();
  coarse.validate();
  fine.validate();
  if (!(eval_thickness > 0.0)) throw Error(ErrorCode::InvalidArgument, "evaluation slice thickness must be positive");
}

Json PipelineConfig::to_json() const {
  Json paths = Json::array();
  for (const auto& p : scans) paths.push_back(p.generic_string());
  Json label_paths = Json::array();
  for (const auto& p : labels) label_paths.push_back(p.generic_string());
  Json j = {{"scans", paths},
            {"labels", label_paths},
            {"dataset", dataset ? Json(dataset->generic_string()) : Json(nullptr)},
            {"simulate", simulate.has_value()},
            {"seed", seed},
            {"spec", {{"phi_deg", spec.phi * 180.0 / std::numbers::pi},
                      {"vartheta_deg", spec.vartheta * 180.0 / std::numbers::pi}}},
            {"coarse", {{"theta_deg", coarse.theta * 180.0 / std::numbers::pi},
                        {"n_scans", coarse.n_scans},
                        {"pair_count", coarse.pair_count},
                        {"top_k", coarse.top_k},
                        {"verification", coarse.verification_enabled},
                        {"rotate_reference", coarse.rotate_reference},
                        {"consensus", coarse.consensus}}},
            {"fine", {{"layers", fine.slice.layer_count},
                      {"thickness", fine.slice.thickness},
                      {"unit_offset", fine.fit.unit_offset},
                      {"offset_weight", fine.offset_weight},
                      {"rounds", fine.rounds}}},
            {"icp", run_icp},
            {"parallel_pairs", parallel_pairs}};
  return j;
}

bool RunManifest::success() const {
  return !pairs.empty() && std::all_of(pairs.begin(), pairs.end(), [](const PairOutcome& p) { return p.ok; });
}

Json RunManifest::to_json() const {
  Json pj = Json::array();
  for (const auto& p : pairs) {
    Json e = {{"pair", p.name},
              {"ok", p.ok},
              {"coarse_error", opt(p.coarse_error)},
              {"fine_error", opt(p.fine_error)},
              {"icp_error", opt(p.icp_error)},
              {"coarse_truth_error", opt(p.coarse_truth_error)},
              {"fine_truth_error", opt(p.fine_truth_error)}};
    if (!p.ok) {
      e["stage"] = p.stage;
      e["error"] = p.error;
    }
    Json t = Json::object();
    for (const auto& [k, v] : p.timings) t[k] = v;
    e["timings"] = t;
    pj.push_back(e);
  }
  Json fj = Json::array();
  for (const auto& f : files) fj.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  return {{"version", version}, {"success", success()},   {"config", config},
          {"pairs", pj},        {"files", fj},             {"total_seconds", total_seconds}};
}

std::string sha256_hex(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, fmt::format("cannot open {}", file.string()));
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

RunManifest run_pipeline(const PipelineConfig& config) {
  const auto t0 = std::chrono::steady_clock::now();
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  RunManifest manifest;
  manifest.config = config.to_json();
  manifest.version = TREEREG_VERSION;

  const Inputs in = load_inputs(config);
  if (in.clouds.size() < 2) throw Error(ErrorCode::InvalidArgument, "at least two scans are required");

  if (config.debug_images) {
    const auto dir = config.output_dir / "images";
    std::filesystem::create_directories(dir);
    for (std::size_t k = 0; k < in.clouds.size(); ++k) {
      const auto seq = generate_image_sequence(in.clouds[k], in.spec, config.coarse.theta, config.coarse.n_scans,
                                               config.coarse.r1, config.coarse.r2);
      for (const auto& e : seq.entries) {
        write_pgm(e.image, dir / sequence_pgm_name(fmt::format("scan{}", k + 1), e.rotation));
      }
    }
  }

  if (config.parallel_pairs) {
    std::vector<std::future<PairOutcome>> jobs;
    for (std::size_t k = 1; k < in.clouds.size(); ++k) {
      jobs.push_back(std::async(std::launch::async, [&, k] { return register_pair(config, in, k); }));
    }
    for (auto& j : jobs) manifest.pairs.push_back(j.get());
  } else {
    for (std::size_t k = 1; k < in.clouds.size(); ++k) manifest.pairs.push_back(register_pair(config, in, k));
  }

  std::vector<std::string> methods = {"Coarse", "Fine"};
  if (config.run_icp) methods.push_back("ICP");
  std::vector<ErrorTableRow> rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& p : manifest.pairs) {
    ErrorTableRow r{p.name, {p.coarse_error.value_or(nan), p.fine_error.value_or(nan)}};
    if (config.run_icp) r.values.push_back(p.icp_error.value_or(nan));
    rows.push_back(std::move(r));
  }
  write_text(config.output_dir / "error_table.txt", format_error_table(methods, rows));

  std::vector<std::filesystem::path> paths;
  for (const auto& e : std::filesystem::recursive_directory_iterator(config.output_dir)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) {
    manifest.files.push_back({std::filesystem::relative(p, config.output_dir).generic_string(), sha256_hex(p),
                              std::filesystem::file_size(p)});
  }
  manifest.total_seconds = since(t0);
  write_json(config.output_dir / "manifest.json", manifest.to_json());
  return manifest;
}

}  // namespace treereg
