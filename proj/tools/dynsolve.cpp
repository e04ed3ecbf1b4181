// dynsolve: graph/simulate/solve/evaluate pipeline driver.
//
// Exit codes: 0 ok, 1 config error, 2 I/O error, 3 numerical error.

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "dynsolve/em.hpp"
#include "dynsolve/evaluate.hpp"
#include "dynsolve/io.hpp"
#include "dynsolve/mne.hpp"
#include "dynsolve/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dynsolve;

namespace {

struct RunConfig {
  // geometry
  std::string graph_type = "grid";
  int rows = 10;
  int cols = 20;
  int ring_nodes = 200;
  double spacing_mm = 10.0;
  int sensors = 32;
  int refine = 4;
  // simulation
  std::vector<int> patch;
  double patch_radius_mm = 28.0;
  double helmet_lat_deg = 25.0;
  double helmet_lon_deg = 90.0;
  double helmet_angle_deg = 0.0;  // 0 = isotropic sensor directions
  double freq_hz = 10.0;
  double rate_hz = 200.0;
  double duration_s = 1.0;
  double snr = 5.0;
  // solver
  std::string method = "dmapem";
  double phi = 0.95;
  double b = 3.1;
  int max_iters = 30;
  double rel_tol = 1e-5;
  bool update_c0 = true;
  // misc
  std::uint64_t seed = 0;
  bool csv = false;
};

void apply_preset(RunConfig& cfg, const std::string& preset) {
  // desk-scale head analog: 200-node spherical band, 800-node refinement,
  // 32 sensors, 1 s at 200 Hz, power SNR 5
  if (preset == "large-patch") {
    cfg.patch_radius_mm = 36.0;
  } else if (preset == "small-patch") {
    cfg.patch_radius_mm = 9.5;
  } else {
    throw ConfigError("unknown preset: " + preset);
  }
  cfg.graph_type = "sphere";
  cfg.rows = 10;
  cfg.cols = 20;
  cfg.spacing_mm = 30.0;
  cfg.sensors = 32;
  cfg.refine = 4;
  cfg.helmet_lat_deg = 25.0;
  cfg.helmet_lon_deg = 90.0;
  cfg.helmet_angle_deg = 35.0;
  cfg.freq_hz = 10.0;
  cfg.rate_hz = 200.0;
  cfg.duration_s = 1.0;
  cfg.snr = 5.0;
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config file parse error: ") + e.what());
  }
  auto get = [&](const char* key, auto& field) {
    if (doc.contains(key)) field = doc[key].get<std::decay_t<decltype(field)>>();
  };
  get("graph_type", cfg.graph_type);
  get("rows", cfg.rows);
  get("cols", cfg.cols);
  get("ring_nodes", cfg.ring_nodes);
  get("spacing_mm", cfg.spacing_mm);
  get("sensors", cfg.sensors);
  get("refine", cfg.refine);
  get("patch", cfg.patch);
  get("patch_radius_mm", cfg.patch_radius_mm);
  get("helmet_lat_deg", cfg.helmet_lat_deg);
  get("helmet_lon_deg", cfg.helmet_lon_deg);
  get("helmet_angle_deg", cfg.helmet_angle_deg);
  get("freq_hz", cfg.freq_hz);
  get("rate_hz", cfg.rate_hz);
  get("duration_s", cfg.duration_s);
  get("snr", cfg.snr);
  get("method", cfg.method);
  get("phi", cfg.phi);
  get("b", cfg.b);
  get("max_iters", cfg.max_iters);
  get("rel_tol", cfg.rel_tol);
  get("update_c0", cfg.update_c0);
  get("seed", cfg.seed);
}

struct ModelFiles {
  SourceGraph coarse;
  SourceGraph fine;
  Eigen::MatrixXd lf_coarse;
  Eigen::MatrixXd lf_fine;
};

ModelFiles build_geometry(const RunConfig& cfg) {
  ModelFiles mf;
  if (cfg.graph_type == "grid") {
    mf.coarse = make_grid_graph(cfg.rows, cfg.cols, cfg.spacing_mm);
    // refined grid: half spacing, shifted a quarter cell so each coarse node
    // owns a symmetric 2x2 block of fine nodes
    mf.fine = make_grid_graph(2 * cfg.rows, 2 * cfg.cols, cfg.spacing_mm / 2.0);
    mf.fine.positions.col(0).array() -= cfg.spacing_mm / 4.0;
    mf.fine.positions.col(1).array() -= cfg.spacing_mm / 4.0;
  } else if (cfg.graph_type == "sphere") {
    // spacing sets the equatorial arc per longitude cell
    const double radius = cfg.spacing_mm * cfg.cols / (2.0 * 3.14159265358979323846);
    mf.coarse = make_sphere_graph(cfg.rows, cfg.cols, radius);
    mf.fine = make_sphere_graph(2 * cfg.rows, 2 * cfg.cols, radius);
  } else if (cfg.graph_type == "ring") {
    mf.coarse = make_ring_graph(cfg.ring_nodes, cfg.spacing_mm);
    mf.fine = make_ring_graph(cfg.ring_nodes * cfg.refine,
                              cfg.spacing_mm / cfg.refine);
  } else {
    throw ConfigError("unknown graph type: " + cfg.graph_type);
  }
  std::optional<HelmetSpec> helmet;
  if (cfg.helmet_angle_deg > 0.0) {
    const double lat = cfg.helmet_lat_deg * M_PI / 180.0;
    const double lon = cfg.helmet_lon_deg * M_PI / 180.0;
    helmet = HelmetSpec{{std::cos(lat) * std::cos(lon),
                         std::cos(lat) * std::sin(lon), std::sin(lat)},
                        cfg.helmet_angle_deg * M_PI / 180.0};
  }
  const LeadFieldPair pair =
      synth_lead_field_pair(mf.coarse, mf.fine, cfg.sensors, cfg.seed, helmet);
  // joint rescale so coarse columns have mean norm 1 (pure conditioning;
  // recorded in model_meta.json)
  const double mean_norm =
      pair.coarse.colwise().norm().mean();
  mf.lf_coarse = pair.coarse / mean_norm;
  mf.lf_fine = pair.fine / mean_norm;
  return mf;
}

void save_model_files(const std::string& dir, const ModelFiles& mf,
                      const RunConfig& cfg) {
  save_graph_json((fs::path(dir) / "coarse_graph.json").string(), mf.coarse);
  save_graph_json((fs::path(dir) / "fine_graph.json").string(), mf.fine);
  write_dsmx((fs::path(dir) / "leadfield_coarse.dsmx").string(), mf.lf_coarse);
  write_dsmx((fs::path(dir) / "leadfield_fine.dsmx").string(), mf.lf_fine);
  json meta;
  meta["graph_type"] = cfg.graph_type;
  meta["sensors"] = cfg.sensors;
  meta["refine"] = cfg.refine;
  meta["spacing_mm"] = cfg.spacing_mm;
  meta["seed"] = cfg.seed;
  meta["helmet_lat_deg"] = cfg.helmet_lat_deg;
  meta["helmet_lon_deg"] = cfg.helmet_lon_deg;
  meta["helmet_angle_deg"] = cfg.helmet_angle_deg;
  meta["leadfield_normalization"] = "joint scale, mean coarse column norm = 1";
  std::ofstream out((fs::path(dir) / "model_meta.json").string());
  if (!out) throw IoError("cannot write model_meta.json in " + dir);
  out << meta.dump(2) << "\n";
}

ModelFiles load_model_files(const std::string& dir) {
  ModelFiles mf;
  mf.coarse = load_graph_json((fs::path(dir) / "coarse_graph.json").string());
  mf.fine = load_graph_json((fs::path(dir) / "fine_graph.json").string());
  mf.lf_coarse = read_dsmx((fs::path(dir) / "leadfield_coarse.dsmx").string());
  mf.lf_fine = read_dsmx((fs::path(dir) / "leadfield_fine.dsmx").string());
  return mf;
}

Eigen::RowVector3d default_patch_center(const RunConfig& cfg,
                                        const SourceGraph& coarse,
                                        const SourceGraph& fine) {
  Eigen::RowVector3d nominal;
  if (cfg.graph_type == "sphere") {
    // a point on the shell at the helmet's aim latitude/longitude
    const double r = fine.positions.row(0).norm();
    const double lat = cfg.helmet_lat_deg * M_PI / 180.0;
    const double lon = cfg.helmet_lon_deg * M_PI / 180.0;
    nominal = {r * std::cos(lat) * std::cos(lon),
               r * std::cos(lat) * std::sin(lon), r * std::sin(lat)};
  } else {
    nominal = fine.positions.colwise().mean();
  }
  // snap to the nearest coarse node so small patches stay aligned with one
  // aggregation parent
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < coarse.num_nodes(); ++i) {
    const double d = (coarse.positions.row(i) - nominal).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return coarse.positions.row(best);
}

std::vector<int> patch_from_radius(const SourceGraph& fine,
                                   const Eigen::RowVector3d& center,
                                   double radius_mm) {
  std::vector<int> patch;
  for (int i = 0; i < fine.num_nodes(); ++i) {
    if ((fine.positions.row(i) - center).norm() <= radius_mm) {
      patch.push_back(i);
    }
  }
  return patch;
}

json config_echo(const RunConfig& cfg) {
  json doc;
  doc["graph_type"] = cfg.graph_type;
  doc["rows"] = cfg.rows;
  doc["cols"] = cfg.cols;
  doc["spacing_mm"] = cfg.spacing_mm;
  doc["sensors"] = cfg.sensors;
  doc["refine"] = cfg.refine;
  doc["patch_radius_mm"] = cfg.patch_radius_mm;
  doc["helmet_lat_deg"] = cfg.helmet_lat_deg;
  doc["helmet_lon_deg"] = cfg.helmet_lon_deg;
  doc["helmet_angle_deg"] = cfg.helmet_angle_deg;
  doc["freq_hz"] = cfg.freq_hz;
  doc["rate_hz"] = cfg.rate_hz;
  doc["duration_s"] = cfg.duration_s;
  doc["snr"] = cfg.snr;
  doc["method"] = cfg.method;
  doc["phi"] = cfg.phi;
  doc["b"] = cfg.b;
  doc["max_iters"] = cfg.max_iters;
  doc["rel_tol"] = cfg.rel_tol;
  doc["update_c0"] = cfg.update_c0;
  doc["seed"] = cfg.seed;
  return doc;
}

int cmd_graph(const RunConfig& cfg, const std::string& out_dir) {
  const ModelFiles mf = build_geometry(cfg);
  ensure_output_dir(out_dir);
  save_model_files(out_dir, mf, cfg);
  std::cout << "graph: coarse p=" << mf.coarse.num_nodes()
            << " fine p=" << mf.fine.num_nodes() << " sensors=" << cfg.sensors
            << " -> " << out_dir << "\n";
  return 0;
}

int cmd_simulate(const RunConfig& cfg, const std::string& model_dir,
                 const std::string& out_dir) {
  const ModelFiles mf =
      model_dir.empty() ? build_geometry(cfg) : load_model_files(model_dir);

  SimulationConfig sim;
  sim.patch_indices =
      cfg.patch.empty()
          ? patch_from_radius(mf.fine,
                              default_patch_center(cfg, mf.coarse, mf.fine),
                              cfg.patch_radius_mm)
          : cfg.patch;
  sim.waveform_freq_hz = cfg.freq_hz;
  sim.sample_rate_hz = cfg.rate_hz;
  sim.duration_s = cfg.duration_s;
  sim.target_snr = cfg.snr;
  sim.refinement_factor = cfg.refine;
  sim.rng_seed = cfg.seed;

  const SimulationOutput out = simulate_patch(mf.fine, mf.lf_fine, mf.coarse, sim);
  ensure_output_dir(out_dir);
  save_simulation_bundle(out_dir, out, sim, nearest_coarse_map(mf.fine, mf.coarse));
  save_model_files(out_dir, mf, cfg);  // bundle is self-contained for solving
  {
    // fold the full flag echo into the bundle meta
    const std::string meta_path = (fs::path(out_dir) / "meta.json").string();
    json meta;
    std::ifstream in(meta_path);
    in >> meta;
    meta["config"] = config_echo(cfg);
    std::ofstream outf(meta_path);
    outf << meta.dump(2) << "\n";
  }
  if (cfg.csv) {
    write_csv_matrix((fs::path(out_dir) / "observations.csv").string(),
                     out.observations);
    write_csv_matrix((fs::path(out_dir) / "truth.csv").string(),
                     out.true_coarse_sources);
  }
  std::cout << "simulate: achievedSnr=" << out.achieved_snr
            << " seed=" << cfg.seed << " T=" << sim.num_samples()
            << " activePatch=" << sim.patch_indices.size() << " fine nodes -> "
            << out_dir << "\n";
  return 0;
}

int cmd_solve(const RunConfig& cfg, const std::string& bundle_dir,
              const std::string& model_dir, const std::string& out_dir) {
  const SimulationBundle bundle = load_simulation_bundle(bundle_dir);
  const ModelFiles mf =
      load_model_files(model_dir.empty() ? bundle_dir : model_dir);

  const ModelSpec model =
      make_model_spec(mf.lf_coarse, mf.coarse, cfg.phi, cfg.snr, cfg.b);
  const Eigen::MatrixXd& y = bundle.output.observations;

  Eigen::MatrixXd estimates;      // T x p
  Eigen::MatrixXd ci_halfwidths;  // T x p
  std::optional<EmResult> em;

  if (cfg.method == "mne") {
    MneSpec spec;
    spec.lead_field = mf.lf_coarse;
    spec.prior_cov =
        Eigen::MatrixXd::Identity(model.num_sources(), model.num_sources()) /
        model.noise.scale();
    const MneResult r = mne_estimate(spec, y);
    estimates = r.means;
    ci_halfwidths = r.ci_half_width.transpose().replicate(estimates.rows(), 1);
  } else if (cfg.method == "fis" || cfg.method == "dmapem" ||
             cfg.method == "smapem") {
    EmConfig em_cfg;
    em_cfg.max_iters = (cfg.method == "fis") ? 1 : cfg.max_iters;
    em_cfg.rel_tol = cfg.rel_tol;
    em_cfg.update_c0 = cfg.update_c0;
    em = (cfg.method == "smapem") ? smap_em(model, y, em_cfg)
                                  : dmap_em(model, y, em_cfg);
    estimates = em->trajectory.smoothed_means_matrix().bottomRows(
        em->trajectory.T);
    ci_halfwidths = em->trajectory.smoothed_ci_half_widths();
  } else {
    throw ConfigError("unknown method: " + cfg.method);
  }

  ensure_output_dir(out_dir);
  write_dsmx((fs::path(out_dir) / "estimates.dsmx").string(), estimates);
  write_dsmx((fs::path(out_dir) / "ci_halfwidths.dsmx").string(), ci_halfwidths);
  if (em) {
    write_dsmx((fs::path(out_dir) / "nu_map.dsmx").string(), em->nu_map);
    save_em_trace_csv((fs::path(out_dir) / "trace.csv").string(), em->trace);
    save_em_trace_json((fs::path(out_dir) / "trace.json").string(), em->trace);
  }
  if (cfg.csv) {
    write_csv_matrix((fs::path(out_dir) / "estimates.csv").string(), estimates);
    write_csv_matrix((fs::path(out_dir) / "ci_halfwidths.csv").string(),
                     ci_halfwidths);
  }

  json meta = config_echo(cfg);
  meta["bundle"] = bundle_dir;
  meta["truth_fingerprint"] = bundle.truth_fingerprint;
  meta["lambda"] = 1.0 / cfg.snr;
  if (em) {
    meta["iterations"] = em->trace.iterations;
    meta["converged"] = em->trace.converged;
  }
  std::ofstream outf((fs::path(out_dir) / "meta.json").string());
  if (!outf) throw IoError("cannot write meta.json in " + out_dir);
  outf << meta.dump(2) << "\n";

  std::cout << "solve: method=" << cfg.method;
  if (em) {
    std::cout << " iterations=" << em->trace.iterations
              << " converged=" << (em->trace.converged ? "yes" : "no")
              << " finalCost=" << em->trace.iterates.back().cost;
  }
  std::cout << " -> " << out_dir << "\n";
  return 0;
}

int cmd_evaluate(const std::string& bundle_dir,
                 const std::vector<std::string>& estimate_dirs,
                 const std::string& out_dir) {
  const SimulationBundle bundle = load_simulation_bundle(bundle_dir);
  ensure_output_dir(out_dir);

  std::vector<std::pair<std::string, EvalReport>> reports;
  for (const auto& dir : estimate_dirs) {
    const json meta =
        [&] {
          std::ifstream in((fs::path(dir) / "meta.json").string());
          if (!in) throw IoError("cannot open estimates meta.json in " + dir);
          json doc;
          in >> doc;
          return doc;
        }();
    const std::string method =
        meta.contains("method") ? meta["method"].get<std::string>() : dir;
    if (meta.contains("truth_fingerprint") &&
        meta["truth_fingerprint"].get<std::uint64_t>() !=
            bundle.truth_fingerprint) {
      throw ConfigError("truth fingerprint mismatch for " + dir);
    }
    const Eigen::MatrixXd estimates =
        read_dsmx((fs::path(dir) / "estimates.dsmx").string());
    EvalReport rep = evaluate_estimates(estimates, bundle.output.true_coarse_sources,
                                        bundle.output.active_mask);
    const fs::path ci_path = fs::path(dir) / "ci_halfwidths.dsmx";
    if (fs::exists(ci_path)) rep.ci_half_widths = read_dsmx(ci_path.string());
    if (rep.truth_fingerprint != bundle.truth_fingerprint) {
      throw ConfigError("truth fingerprint mismatch between bundle files");
    }
    save_roc_csv((fs::path(out_dir) / (method + "_roc.csv")).string(), rep);
    save_rmse_csv((fs::path(out_dir) / (method + "_rmse.csv")).string(), rep,
                  bundle.output.active_mask);
    save_eval_report_json(
        (fs::path(out_dir) / (method + "_report.json")).string(), rep, method);
    std::cout << "evaluate: " << method << " auc=" << rep.auc
              << " insideMeanRmse=" << rep.inside_mean << "\n";
    reports.emplace_back(method, std::move(rep));
  }

  if (reports.size() >= 2) {
    const MethodComparison cmp = compare_methods(reports);
    const std::string table = format_comparison_table(cmp);
    std::ofstream txt((fs::path(out_dir) / "comparison.txt").string());
    txt << table;
    json doc;
    doc["auc"] = cmp.auc;
    doc["auc_order"] = cmp.auc_order;
    doc["quantile_levels"] = cmp.quantile_levels;
    doc["reduction_pct"] = cmp.reduction_pct;
    std::ofstream js((fs::path(out_dir) / "comparison.json").string());
    js << doc.dump(2) << "\n";
    std::cout << table;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("DYNSOLVE_THREADS")) {
    const int k = std::atoi(threads);
    if (k > 0) Eigen::setNbThreads(k);
  }

  CLI::App app{"dynsolve: dynamic Bayesian source estimation pipeline"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string preset, config_file, out_dir, model_dir, bundle_dir;
  std::vector<std::string> estimate_dirs;
  std::string patch_arg;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_file, "JSON config file");
    sub->add_option("--seed", cfg.seed, "RNG seed");
    sub->add_flag("--csv", cfg.csv, "also write CSV copies of matrices");
    sub->add_option("-o,--out", out_dir, "output directory")->required();
  };

  CLI::App* graph = app.add_subcommand("graph", "generate synthetic graphs and lead fields");
  graph->add_option("--type", cfg.graph_type, "grid | ring");
  graph->add_option("--rows", cfg.rows, "grid rows (coarse)");
  graph->add_option("--cols", cfg.cols, "grid cols (coarse)");
  graph->add_option("--nodes", cfg.ring_nodes, "ring node count (coarse)");
  graph->add_option("--spacing", cfg.spacing_mm, "coarse node spacing, mm");
  graph->add_option("--sensors", cfg.sensors, "sensor count");
  graph->add_option("--refine", cfg.refine, "fine/coarse node ratio");
  graph->add_option("--helmet-lat", cfg.helmet_lat_deg, "helmet aim latitude, deg");
  graph->add_option("--helmet-lon", cfg.helmet_lon_deg, "helmet aim longitude, deg");
  graph->add_option("--helmet-angle", cfg.helmet_angle_deg,
                    "sensor cap half-angle, deg (0 = isotropic)");
  add_common(graph);

  CLI::App* simulate = app.add_subcommand("simulate", "generate a simulation bundle");
  simulate->add_option("--preset", preset, "large-patch | small-patch");
  simulate->add_option("--model-dir", model_dir, "directory from `dynsolve graph`");
  simulate->add_option("--patch", patch_arg, "comma-separated fine-node indices");
  simulate->add_option("--patch-radius", cfg.patch_radius_mm,
                       "active disk radius around the source centroid, mm");
  simulate->add_option("--freq", cfg.freq_hz, "waveform frequency, Hz");
  simulate->add_option("--rate", cfg.rate_hz, "sampling rate, Hz");
  simulate->add_option("--duration", cfg.duration_s, "duration, s");
  simulate->add_option("--snr", cfg.snr, "target power SNR");
  simulate->add_option("--sensors", cfg.sensors, "sensor count");
  simulate->add_option("--helmet-lat", cfg.helmet_lat_deg, "helmet aim latitude, deg");
  simulate->add_option("--helmet-lon", cfg.helmet_lon_deg, "helmet aim longitude, deg");
  simulate->add_option("--helmet-angle", cfg.helmet_angle_deg,
                       "sensor cap half-angle, deg (0 = isotropic)");
  add_common(simulate);

  CLI::App* solve = app.add_subcommand("solve", "estimate sources from a bundle");
  solve->add_option("--method", cfg.method, "mne | fis | smapem | dmapem");
  solve->add_option("--bundle", bundle_dir, "simulation bundle directory")->required();
  solve->add_option("--model-dir", model_dir, "override model files directory");
  solve->add_option("--phi", cfg.phi, "AR coupling strength");
  solve->add_option("--snr", cfg.snr, "assumed power SNR (lambda = 1/snr)");
  solve->add_option("--b", cfg.b, "inverse-gamma hyperparameter");
  solve->add_option("--max-iters", cfg.max_iters, "EM iteration cap");
  solve->add_option("--rel-tol", cfg.rel_tol, "EM relative cost tolerance");
  solve->add_flag("--update-c0,!--no-update-c0", cfg.update_c0,
                  "toggle the C0 heuristic (default on)");
  add_common(solve);

  CLI::App* evaluate = app.add_subcommand("evaluate", "score estimates against truth");
  evaluate->add_option("--bundle", bundle_dir, "simulation bundle directory")->required();
  evaluate->add_option("--estimates", estimate_dirs, "one or more solve output dirs")
      ->required();
  add_common(evaluate);

  // precedence: flags > config file > preset > built-in defaults.
  // After the parse, every field the user did not pass explicitly falls back
  // to the layered (preset, then config file) value.
  try {
    app.parse(argc, argv);
    CLI::App* sub = app.get_subcommands().front();
    RunConfig layered;  // defaults
    if (!preset.empty()) apply_preset(layered, preset);
    if (!config_file.empty()) apply_config_file(layered, config_file);
    auto lay = [&](const char* flag, auto& field, const auto& fallback) {
      // a flag the user passed on this subcommand wins; everything else
      // falls back to the layered value
      const CLI::Option* opt = sub->get_option_no_throw(flag);
      if (opt == nullptr || opt->count() == 0) field = fallback;
    };
    lay("--type", cfg.graph_type, layered.graph_type);
    lay("--rows", cfg.rows, layered.rows);
    lay("--cols", cfg.cols, layered.cols);
    lay("--nodes", cfg.ring_nodes, layered.ring_nodes);
    lay("--spacing", cfg.spacing_mm, layered.spacing_mm);
    lay("--sensors", cfg.sensors, layered.sensors);
    lay("--refine", cfg.refine, layered.refine);
    lay("--patch-radius", cfg.patch_radius_mm, layered.patch_radius_mm);
    lay("--helmet-lat", cfg.helmet_lat_deg, layered.helmet_lat_deg);
    lay("--helmet-lon", cfg.helmet_lon_deg, layered.helmet_lon_deg);
    lay("--helmet-angle", cfg.helmet_angle_deg, layered.helmet_angle_deg);
    lay("--freq", cfg.freq_hz, layered.freq_hz);
    lay("--rate", cfg.rate_hz, layered.rate_hz);
    lay("--duration", cfg.duration_s, layered.duration_s);
    lay("--snr", cfg.snr, layered.snr);
    lay("--method", cfg.method, layered.method);
    lay("--phi", cfg.phi, layered.phi);
    lay("--b", cfg.b, layered.b);
    lay("--max-iters", cfg.max_iters, layered.max_iters);
    lay("--rel-tol", cfg.rel_tol, layered.rel_tol);
    lay("--update-c0", cfg.update_c0, layered.update_c0);
    lay("--seed", cfg.seed, layered.seed);
    if (cfg.patch.empty()) cfg.patch = layered.patch;

    if (!patch_arg.empty()) {
      cfg.patch.clear();
      std::stringstream ss(patch_arg);
      std::string tok;
      while (std::getline(ss, tok, ',')) cfg.patch.push_back(std::stoi(tok));
    }

    if (graph->parsed()) return cmd_graph(cfg, out_dir);
    if (simulate->parsed()) {
      if (model_dir.empty() && preset.empty()) {
        throw ConfigError("simulate needs --preset or --model-dir");
      }
      return cmd_simulate(cfg, model_dir, out_dir);
    }
    if (solve->parsed()) return cmd_solve(cfg, bundle_dir, model_dir, out_dir);
    if (evaluate->parsed()) return cmd_evaluate(bundle_dir, estimate_dirs, out_dir);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
