#include "treereg/json_io.hpp"

#include <fmt/format.h>

#include <fstream>
#include <numbers>

#include "treereg/cloud_io.hpp"
#include "treereg/error.hpp"

namespace treereg {

namespace {

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::ParseError, fmt::format("{} must be a 3-vector", what));
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::ParseError, fmt::format("{} entries must be numbers", what));
    v[i] = j[i].get<double>();
  }
  return v;
}

Json ties_json(std::span<const TiePointPair> ties) {
  Json out = Json::array();
  for (const auto& t : ties) {
    out.push_back({{"target", vec_json(t.target_point)}, {"reference", vec_json(t.reference_point)}, {"weight", t.weight}});
  }
  return out;
}

Json timings_json(const std::map<std::string, double>& t) {
  Json out = Json::object();
  for (const auto& [k, v] : t) out[k] = v;
  return out;
}

Json fit_json(const ArcFit& f) {
  Json j = {{"layer", f.layer},
            {"arc", f.arc},
            {"kind", std::string(to_string(f.kind))},
            {"points", f.point_count},
            {"accepted", f.accepted}};
  if (!f.tie_points.empty()) {
    j["center"] = vec_json(f.center);
    if (f.kind == FitKind::Cylinder) j["direction"] = vec_json(f.direction);
    j["radius"] = f.radius;
    j["rms"] = f.rms;
  }
  if (!f.accepted) j["reason"] = f.reject_reason;
  return j;
}

}  // namespace

Json transform_to_json(const RigidTransform& t) {
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r) rot.push_back(Json::array({t.rotation(r, 0), t.rotation(r, 1), t.rotation(r, 2)}));
  return {{"rotation", rot}, {"translation", vec_json(t.translation)}, {"frame", "target→reference"}};
}

RigidTransform transform_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("rotation") || !j.contains("translation")) {
    throw Error(ErrorCode::ParseError, "transform needs \"rotation\" and \"translation\"");
  }
  const Json& rot = j["rotation"];
  if (!rot.is_array() || rot.size() != 3) throw Error(ErrorCode::ParseError, "rotation must be 3 rows");
  RigidTransform t;
  for (int r = 0; r < 3; ++r) t.rotation.row(r) = vec_from(rot[r], "rotation row").transpose();
  t.translation = vec_from(j["translation"], "translation");
  if (!t.is_valid(1e-6)) throw Error(ErrorCode::ParseError, "rotation is not a proper rotation matrix");
  return t;
}

Json coarse_result_to_json(const CoarseResult& r, bool include_timings) {
  Json pairs = Json::array();
  for (const auto& p : r.image_pairs) {
    pairs.push_back({{"entry_a", p.entry_a}, {"entry_b", p.entry_b}, {"score", p.score}, {"matches", p.matches.size()}});
  }
  Json j = transform_to_json(r.transform);
  j["rms_residual"] = r.rms_residual;
  j["rotation_a_deg"] = r.rotation_a * 180.0 / std::numbers::pi;
  j["rotation_b_deg"] = r.rotation_b * 180.0 / std::numbers::pi;
  j["candidates"] = r.candidate_count;
  j["inliers"] = r.inlier_count;
  j["image_pairs"] = pairs;
  j["verification"] = {{"mean", r.verification.mean},
                       {"stddev", r.verification.stddev},
                       {"checked", r.verification.kept.size()},
                       {"kept", r.verification.kept_count()}};
  j["tie_points"] = ties_json(r.tie_points);
  if (include_timings) j["timings"] = timings_json(r.timings);
  return j;
}

Json fine_result_to_json(const FineResult& r, bool include_timings) {
  Json layers = Json::array();
  for (const auto& l : r.layers) {
    layers.push_back({{"id", l.id},
                      {"height", l.height},
                      {"target_points", l.target_points},
                      {"reference_points", l.reference_points},
                      {"target_dropped_components", l.target_dropped_components},
                      {"reference_dropped_components", l.reference_dropped_components}});
  }
  Json tf = Json::array();
  for (const auto& f : r.target_fits) tf.push_back(fit_json(f));
  Json rf = Json::array();
  for (const auto& f : r.reference_fits) rf.push_back(fit_json(f));
  Json corr = Json::array();
  for (const auto& c : r.correspondences) {
    corr.push_back({{"target", c.target}, {"reference", c.reference}, {"distance", c.distance}});
  }
  Json j = transform_to_json(r.transform);
  j["rms_residual"] = r.rms_residual;
  j["rounds"] = r.rounds_run;
  j["layers"] = layers;
  j["target_fits"] = tf;
  j["reference_fits"] = rf;
  j["correspondences"] = corr;
  j["tie_points"] = ties_json(r.tie_points);
  if (include_timings) j["timings"] = timings_json(r.timings);
  return j;
}

Json error_report_to_json(const ErrorReport& r) {
  Json branches = Json::array();
  for (const auto& b : r.branches) {
    Json e = {{"branch", b.branch_id}, {"ok", b.ok}, {"distances", b.distances}};
    if (!b.ok) e["error"] = b.error;
    branches.push_back(e);
  }
  return {{"mean", r.mean}, {"count", r.distances.size()}, {"branches", branches}};
}

std::string format_arc_inventory(std::span<const ArcFit> target, std::span<const ArcFit> reference) {
  std::string out = fmt::format("{:<6} {:>5} {:>4} {:<8} {:>10} {:>10} {:>8} {:>7} {:>7} {}\n", "scan", "layer", "arc",
                                "kind", "x", "y", "radius", "rms", "points", "status");
  const auto rows = [&](std::string_view scan, std::span<const ArcFit> fits) {
    for (const auto& f : fits) {
      const bool fitted = !f.tie_points.empty();
      out += fmt::format("{:<6} {:>5} {:>4} {:<8} {:>10} {:>10} {:>8} {:>7} {:>7} {}\n", scan, f.layer, f.arc,
                         to_string(f.kind), fitted ? fmt::format("{:.3f}", f.center.x()) : "-",
                         fitted ? fmt::format("{:.3f}", f.center.y()) : "-",
                         fitted ? fmt::format("{:.4f}", f.radius) : "-", fitted ? fmt::format("{:.4f}", f.rms) : "-",
                         f.point_count, f.accepted ? "accepted" : "rejected: " + f.reject_reason);
    }
  };
  rows("target", target);
  rows("ref", reference);
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FileNotFound, fmt::format("cannot write {}", path.string()));
  out << text;
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, fmt::format("cannot open {}", path.string()));
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_dataset(const std::filesystem::path& dir, const ScanDataset& ds) {
  std::filesystem::create_directories(dir);
  Json scans = Json::array();
  for (std::size_t k = 0; k < ds.scans.size(); ++k) {
    const std::string cloud = fmt::format("scan{}.xyz", k + 1);
    const std::string labels = fmt::format("scan{}.labels", k + 1);
    write_xyz(dir / cloud, ds.scans[k].cloud);
    write_labels(dir / labels, ds.scans[k].labels);
    scans.push_back({{"cloud", cloud},
                     {"labels", labels},
                     {"points", ds.scans[k].cloud.size()},
                     {"station", vec_json(ds.stations[k].position)},
                     {"yaw", ds.stations[k].yaw},
                     {"to_scan1", transform_to_json(ds.ground_truth(k, 0))}});
  }
  const Json j = {{"seed", ds.seed},
                  {"noise_sigma", ds.noise_sigma},
                  {"spec", {{"phi_deg", ds.spec.phi * 180.0 / std::numbers::pi},
                            {"vartheta_deg", ds.spec.vartheta * 180.0 / std::numbers::pi}}},
                  {"scans", scans}};
  write_json(dir / "dataset.json", j);
}

DatasetFiles read_dataset(const std::filesystem::path& manifest) {
  const Json j = read_json(manifest);
  const auto dir = manifest.parent_path();
  DatasetFiles out;
  try {
    out.spec = ScannerSpec::from_degrees(j.at("spec").at("phi_deg").get<double>(),
                                         j.at("spec").at("vartheta_deg").get<double>());
    for (const auto& s : j.at("scans")) {
      out.scans.push_back(dir / s.at("cloud").get<std::string>());
      out.labels.push_back(dir / s.at("labels").get<std::string>());
      out.to_first.push_back(transform_from_json(s.at("to_scan1")));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, fmt::format("{}: {}", manifest.string(), e.what()));
  }
  return out;
}

}  // namespace treereg
