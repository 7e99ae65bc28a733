#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>

#include "treereg/cloud_io.hpp"
#include "treereg/error.hpp"
#include "treereg/json_io.hpp"
#include "treereg/pipeline.hpp"

using namespace treereg;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct SpecOpts {
  double phi_deg = 0.06;
  double vartheta_deg = 0.06;
  ScannerSpec spec() const { return ScannerSpec::from_degrees(phi_deg, vartheta_deg); }
};

void add_spec(CLI::App* app, SpecOpts& s) {
  app->add_option("--phi-deg", s.phi_deg, "horizontal angular step (degrees)")->capture_default_str();
  app->add_option("--vartheta-deg", s.vartheta_deg, "vertical angular step (degrees)")->capture_default_str();
}

struct CoarseOpts {
  double theta_deg = 10.0;
  int n_scans = 3;
  bool no_verify = false;
  bool ranked_selection = false;
  bool target_only = false;
  CoarseParams params() const {
    CoarseParams p;
    p.theta = theta_deg * kDeg;
    p.n_scans = n_scans;
    p.verification_enabled = !no_verify;
    p.consensus = !ranked_selection;
    p.rotate_reference = !target_only;
    return p;
  }
};

void add_coarse(CLI::App* app, CoarseOpts& c) {
  app->add_option("--theta-deg", c.theta_deg, "sequence rotation step (degrees)")->capture_default_str();
  app->add_option("--n-scans", c.n_scans, "stations around the tree")->capture_default_str();
  app->add_flag("--no-verify", c.no_verify, "skip the beta-interval match verification");
  app->add_flag("--ranked-selection", c.ranked_selection,
                "use the best image pairs by mean Hamming distance instead of match consensus");
  app->add_flag("--rotate-target-only", c.target_only, "do not rotate the reference sequence");
}

struct FineOpts {
  int layers = 3;
  double thickness = 0.10;
  double unit_offset = 1.0;
  double offset_weight = FineParams{}.offset_weight;
  int rounds = FineParams{}.rounds;
  bool fixed_heights = false;
  FineParams params() const {
    FineParams p;
    p.slice.layer_count = layers;
    p.slice.thickness = thickness;
    p.fit.unit_offset = unit_offset;
    p.offset_weight = offset_weight;
    p.rounds = rounds;
    p.slide_along_axes = !fixed_heights;
    return p;
  }
};

void add_fine(CLI::App* app, FineOpts& f) {
  app->add_option("--layers", f.layers, "slice layers")->capture_default_str();
  app->add_option("--thickness", f.thickness, "slice thickness (m)")->capture_default_str();
  app->add_option("--unit-offset", f.unit_offset, "axis offset of the second cylinder tie point (m)")
      ->capture_default_str();
  app->add_option("--offset-weight", f.offset_weight, "weight of offset tie points")->capture_default_str();
  app->add_option("--rounds", f.rounds, "correspondence and solve rounds")->capture_default_str();
  app->add_flag("--fixed-heights", f.fixed_heights, "pair cylinder points at the layer height only");
}

PointCloud load_moved(const fs::path& cloud, const std::string& transform) {
  PointCloud c = load_cloud(cloud);
  if (transform.empty()) return c;
  return apply_transform(c, transform_from_json(read_json(transform)));
}

void set_log_level(const std::string& cli_level) {
  std::string level = cli_level;
  if (const char* env = std::getenv("TREEREG_LOG")) level = env;
  const auto parsed = spdlog::level::from_str(level);
  if (parsed == spdlog::level::off && level != "off") {
    throw Error(ErrorCode::InvalidArgument, fmt::format("unknown log level '{}'", level));
  }
  spdlog::set_level(parsed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse-to-fine registration of terrestrial laser scans of single trees"};
  app.require_subcommand(1);
  app.set_version_flag("--version", TREEREG_VERSION);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off (TREEREG_LOG overrides)")
      ->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "write a simulated multi-station dataset");
  std::uint64_t sim_seed = 0;
  fs::path sim_out;
  DatasetParams sim_params;
  TreeParams tree;
  SpecOpts sim_spec;
  sim->add_option("--seed", sim_seed, "random seed")->capture_default_str();
  sim->add_option("-o,--out", sim_out, "output directory")->required();
  sim->add_option("--stations", sim_params.n_stations, "scanner stations")->capture_default_str();
  sim->add_option("--radius", sim_params.radius, "station distance from the stem (m)")->capture_default_str();
  sim->add_option("--noise", sim_params.noise_sigma, "range noise sigma (m)")->capture_default_str();
  sim->add_option("--height", tree.height, "tree height (m)")->capture_default_str();
  sim->add_option("--branches", tree.branch_count, "branch count")->capture_default_str();
  add_spec(sim, sim_spec);

  // project
  auto* proj = app.add_subcommand("project", "write the rotated image sequence of a scan as PGM files");
  fs::path proj_cloud, proj_out;
  std::string proj_name = "scan";
  SpecOpts proj_spec;
  CoarseOpts proj_seq;
  proj->add_option("cloud", proj_cloud, "XYZ or PLY scan")->required();
  proj->add_option("-o,--out", proj_out, "output directory")->required();
  proj->add_option("--name", proj_name, "file name prefix")->capture_default_str();
  proj->add_option("--theta-deg", proj_seq.theta_deg, "rotation step (degrees)")->capture_default_str();
  proj->add_option("--n-scans", proj_seq.n_scans, "stations around the tree")->capture_default_str();
  add_spec(proj, proj_spec);

  // coarse
  auto* coarse = app.add_subcommand("coarse", "image-feature coarse registration");
  fs::path c_target, c_reference, c_out;
  SpecOpts c_spec;
  CoarseOpts c_opts;
  coarse->add_option("target", c_target, "scan to move")->required();
  coarse->add_option("reference", c_reference, "fixed scan")->required();
  coarse->add_option("-o,--out", c_out, "coarse result JSON")->required();
  add_spec(coarse, c_spec);
  add_coarse(coarse, c_opts);

  // fine
  auto* fine = app.add_subcommand("fine", "stem and branch fit refinement");
  fs::path f_target, f_reference, f_out;
  std::string f_init;
  fs::path f_arcs;
  SpecOpts f_spec;
  FineOpts f_opts;
  fine->add_option("target", f_target, "scan to move")->required();
  fine->add_option("reference", f_reference, "fixed scan")->required();
  fine->add_option("-o,--out", f_out, "fine result JSON")->required();
  fine->add_option("--init", f_init, "transform JSON applied to the target first (e.g. a coarse result)");
  fine->add_option("--arcs", f_arcs, "write the arc inventory table here");
  add_spec(fine, f_spec);
  add_fine(fine, f_opts);

  // register
  auto* reg = app.add_subcommand("register", "coarse then fine registration of one scan pair");
  fs::path r_target, r_reference, r_out;
  SpecOpts r_spec;
  CoarseOpts r_coarse;
  FineOpts r_fine;
  reg->add_option("target", r_target, "scan to move")->required();
  reg->add_option("reference", r_reference, "fixed scan")->required();
  reg->add_option("-o,--out", r_out, "output directory")->required();
  add_spec(reg, r_spec);
  add_coarse(reg, r_coarse);
  add_fine(reg, r_fine);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "branch-centre registration error between two labelled scans");
  fs::path e_ref, e_ref_labels, e_target, e_target_labels, e_out;
  std::string e_transform;
  double e_thickness = 0.10;
  std::size_t e_min_points = 20;
  ev->add_option("reference", e_ref, "fixed scan")->required();
  ev->add_option("reference_labels", e_ref_labels, "labels of the fixed scan")->required();
  ev->add_option("target", e_target, "moved scan")->required();
  ev->add_option("target_labels", e_target_labels, "labels of the moved scan")->required();
  ev->add_option("--transform", e_transform, "transform JSON applied to the target first");
  ev->add_option("-o,--out", e_out, "error report JSON");
  ev->add_option("--thickness", e_thickness, "slice thickness (m)")->capture_default_str();
  ev->add_option("--min-points", e_min_points, "minimum points per slice")->capture_default_str();

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "simulate or load scans, register all onto scan 1, evaluate");
  PipelineConfig pc;
  std::vector<fs::path> p_scans, p_labels;
  std::string p_dataset;
  SpecOpts p_spec;
  CoarseOpts p_coarse;
  FineOpts p_fine;
  bool p_no_icp = false;
  pipe->add_option("--scans", p_scans, "scan files, the first is the reference");
  pipe->add_option("--labels", p_labels, "label files, one per scan");
  pipe->add_option("--dataset", p_dataset, "dataset.json written by simulate");
  pipe->add_option("--seed", pc.seed, "simulate a dataset with this seed when no scans are given")
      ->capture_default_str();
  pipe->add_option("-o,--out", pc.output_dir, "output directory")->required();
  pipe->add_flag("--no-icp", p_no_icp, "skip the ICP baseline");
  pipe->add_flag("--debug-images", pc.debug_images, "write sequence and match PGMs");
  pipe->add_flag("--parallel-pairs", pc.parallel_pairs, "register scan pairs concurrently");
  add_spec(pipe, p_spec);
  add_coarse(pipe, p_coarse);
  add_fine(pipe, p_fine);

  CLI11_PARSE(app, argc, argv);

  try {
    set_log_level(log_level);
    if (sim->parsed()) {
      const ScanDataset ds = [&] {
        DatasetParams dp = sim_params;
        dp.spec = sim_spec.spec();
        return make_dataset(generate_tree(tree, sim_seed), dp, sim_seed);
      }();
      write_dataset(sim_out, ds);
      spdlog::info("wrote {} scans to {}", ds.scans.size(), sim_out.string());
    } else if (proj->parsed()) {
      const PointCloud cloud = load_cloud(proj_cloud);
      const auto seq = generate_image_sequence(cloud, proj_spec.spec(), proj_seq.theta_deg * kDeg, proj_seq.n_scans);
      fs::create_directories(proj_out);
      for (const auto& e : seq.entries) write_pgm(e.image, proj_out / sequence_pgm_name(proj_name, e.rotation));
      spdlog::info("wrote {} images to {}", seq.entries.size(), proj_out.string());
    } else if (coarse->parsed()) {
      const CoarseResult r = coarse_register(load_cloud(c_target), load_cloud(c_reference), c_spec.spec(), c_opts.params());
      write_json(c_out, coarse_result_to_json(r));
    } else if (fine->parsed()) {
      const FineResult r =
          fine_register(load_moved(f_target, f_init), load_cloud(f_reference), f_spec.spec(), f_opts.params());
      write_json(f_out, fine_result_to_json(r));
      if (!f_arcs.empty()) write_text(f_arcs, format_arc_inventory(r.target_fits, r.reference_fits));
    } else if (reg->parsed()) {
      const PointCloud target = load_cloud(r_target);
      const PointCloud reference = load_cloud(r_reference);
      const ScannerSpec spec = r_spec.spec();
      const CoarseResult c = coarse_register(target, reference, spec, r_coarse.params());
      const FineResult f = fine_register(apply_transform(target, c.transform), reference, spec, r_fine.params());
      fs::create_directories(r_out);
      write_json(r_out / "coarse.json", coarse_result_to_json(c));
      write_json(r_out / "fine.json", fine_result_to_json(f));
      write_json(r_out / "transform.json", transform_to_json(compose(f.transform, c.transform)));
      write_text(r_out / "arcs.txt", format_arc_inventory(f.target_fits, f.reference_fits));
    } else if (ev->parsed()) {
      const PointCloud reference = load_cloud(e_ref);
      const PointCloud moved = load_moved(e_target, e_transform);
      const auto pairs = branch_pairs_from_labels(reference, load_labels(e_ref_labels), moved,
                                                  load_labels(e_target_labels), e_thickness, e_min_points);
      const ErrorReport r = evaluate(pairs, reference, moved);
      if (!e_out.empty()) write_json(e_out, error_report_to_json(r));
      std::cout << fmt::format("mean branch-centre distance {:.4f} m over {} slices\n", r.mean, r.distances.size());
    } else if (pipe->parsed()) {
      pc.scans = p_scans;
      pc.labels = p_labels;
      if (!p_dataset.empty()) pc.dataset = p_dataset;
      pc.spec = p_spec.spec();
      if (p_scans.empty() && p_dataset.empty()) {
        pc.simulate = SimulationConfig{};
        pc.simulate->dataset.spec = pc.spec;
      }
      pc.coarse = p_coarse.params();
      pc.fine = p_fine.params();
      pc.run_icp = !p_no_icp;
      pc.log_level = log_level;
      const RunManifest m = run_pipeline(pc);
      for (const auto& p : m.pairs) {
        if (!p.ok) std::cout << fmt::format("{} failed at {}: {}\n", p.name, p.stage, p.error);
      }
      std::cout << std::ifstream(pc.output_dir / "error_table.txt").rdbuf();
      return m.success() ? 0 : 1;
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
