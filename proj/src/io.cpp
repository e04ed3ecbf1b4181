#include "dynsolve/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace dynsolve {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(sizeof(double) == 8, "DSMX requires 8-byte doubles");

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    T out;
    auto* src = reinterpret_cast<const unsigned char*>(&v);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (size_t i = 0; i < sizeof(T); ++i) dst[i] = src[sizeof(T) - 1 - i];
    return out;
  }
}

template <typename T>
T from_little_endian(T v) {
  return to_little_endian(v);  // same byte reversal
}

void write_file_or_throw(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

json read_json_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::exception& e) {
    throw IoError("json parse error in " + path + ": " + e.what());
  }
}

}  // namespace

void write_dsmx(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out.write("DSMX", 4);
  const std::uint32_t rows = to_little_endian<std::uint32_t>(
      static_cast<std::uint32_t>(m.rows()));
  const std::uint32_t cols = to_little_endian<std::uint32_t>(
      static_cast<std::uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(&rows), 4);
  out.write(reinterpret_cast<const char*>(&cols), 4);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      const double v = to_little_endian<double>(m(i, j));
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

Eigen::MatrixXd read_dsmx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "DSMX", 4) != 0) {
    throw IoError("not a DSMX file: " + path);
  }
  std::uint32_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), 4);
  in.read(reinterpret_cast<char*>(&cols), 4);
  rows = from_little_endian(rows);
  cols = from_little_endian(cols);
  if (!in) throw IoError("truncated DSMX header: " + path);
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) {
      double v;
      in.read(reinterpret_cast<char*>(&v), 8);
      if (!in) throw IoError("truncated DSMX payload: " + path);
      m(i, j) = from_little_endian(v);
    }
  }
  return m;
}

void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  char buf[40];
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << buf;
      if (j + 1 < m.cols()) out << ",";
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

Eigen::MatrixXd read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    size_t start = 0;
    while (start <= line.size()) {
      size_t comma = line.find(',', start);
      if (comma == std::string::npos) comma = line.size();
      try {
        row.push_back(std::stod(line.substr(start, comma - start)));
      } catch (const std::exception&) {
        throw IoError("csv parse error in " + path);
      }
      start = comma + 1;
      if (comma == line.size()) break;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError("ragged csv rows in " + path);
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

namespace {

Eigen::MatrixXd stack_mean_field(const std::vector<Eigen::VectorXd>& field,
                                 int first) {
  const int count = static_cast<int>(field.size()) - first;
  const int p = static_cast<int>(field[first].size());
  Eigen::MatrixXd m(count, p);
  for (int k = 0; k < count; ++k) m.row(k) = field[first + k].transpose();
  return m;
}

Eigen::MatrixXd stack_cov_field(const std::vector<Eigen::MatrixXd>& field,
                                int first) {
  const int count = static_cast<int>(field.size()) - first;
  const int p = static_cast<int>(field[first].rows());
  Eigen::MatrixXd m(count * p, p);
  for (int k = 0; k < count; ++k) m.middleRows(k * p, p) = field[first + k];
  return m;
}

void unstack_mean_field(const Eigen::MatrixXd& m, int first,
                        std::vector<Eigen::VectorXd>& field) {
  for (int k = 0; k < m.rows(); ++k) {
    field[first + k] = m.row(k).transpose();
  }
}

void unstack_cov_field(const Eigen::MatrixXd& m, int first, int p,
                       std::vector<Eigen::MatrixXd>& field) {
  const int count = static_cast<int>(m.rows()) / p;
  for (int k = 0; k < count; ++k) {
    field[first + k] = m.middleRows(k * p, p);
  }
}

}  // namespace

void save_trajectory(const std::string& dir, const StateTrajectory& traj) {
  fs::create_directories(dir);
  json manifest;
  manifest["p"] = traj.p;
  manifest["n"] = traj.n;
  manifest["T"] = traj.T;
  json fields = json::array();

  auto put = [&](const std::string& name, const Eigen::MatrixXd& m, int t0) {
    write_dsmx((fs::path(dir) / (name + ".dsmx")).string(), m);
    fields.push_back({{"name", name}, {"t0", t0}});
  };

  if (traj.has_filtered) {
    put("predicted_mean", stack_mean_field(traj.predicted_mean, 1), 1);
    put("predicted_cov", stack_cov_field(traj.predicted_cov, 1), 1);
    put("filtered_mean", stack_mean_field(traj.filtered_mean, 0), 0);
    put("filtered_cov", stack_cov_field(traj.filtered_cov, 0), 0);
  }
  if (traj.has_smoothed) {
    put("smoothed_mean", stack_mean_field(traj.smoothed_mean, 0), 0);
    put("smoothed_cov", stack_cov_field(traj.smoothed_cov, 0), 0);
    put("smoother_gain", stack_cov_field(traj.smoother_gain, 0), 0);
  }
  if (traj.has_lag_cov) {
    put("lag_cov", stack_cov_field(traj.lag_cov, 1), 1);
  }
  manifest["fields"] = fields;
  write_file_or_throw((fs::path(dir) / "manifest.json").string(),
                      manifest.dump(2) + "\n");
}

StateTrajectory load_trajectory(const std::string& dir) {
  const json manifest = read_json_or_throw((fs::path(dir) / "manifest.json").string());
  StateTrajectory traj;
  traj.p = manifest.at("p").get<int>();
  traj.n = manifest.at("n").get<int>();
  traj.T = manifest.at("T").get<int>();
  const int T = traj.T;
  const int p = traj.p;

  traj.predicted_mean.assign(T + 1, {});
  traj.predicted_cov.assign(T + 1, {});
  traj.filtered_mean.assign(T + 1, {});
  traj.filtered_cov.assign(T + 1, {});
  traj.smoothed_mean.assign(T + 1, {});
  traj.smoothed_cov.assign(T + 1, {});
  traj.smoother_gain.assign(T, {});
  traj.lag_cov.assign(T + 1, {});

  bool any_filtered = false, any_smoothed = false;
  for (const auto& f : manifest.at("fields")) {
    const std::string name = f.at("name").get<std::string>();
    const int t0 = f.at("t0").get<int>();
    const Eigen::MatrixXd m = read_dsmx((fs::path(dir) / (name + ".dsmx")).string());
    if (name == "predicted_mean") {
      unstack_mean_field(m, t0, traj.predicted_mean);
      any_filtered = true;
    } else if (name == "predicted_cov") {
      unstack_cov_field(m, t0, p, traj.predicted_cov);
    } else if (name == "filtered_mean") {
      unstack_mean_field(m, t0, traj.filtered_mean);
      any_filtered = true;
    } else if (name == "filtered_cov") {
      unstack_cov_field(m, t0, p, traj.filtered_cov);
    } else if (name == "smoothed_mean") {
      unstack_mean_field(m, t0, traj.smoothed_mean);
      any_smoothed = true;
    } else if (name == "smoothed_cov") {
      unstack_cov_field(m, t0, p, traj.smoothed_cov);
    } else if (name == "smoother_gain") {
      unstack_cov_field(m, t0, p, traj.smoother_gain);
    } else if (name == "lag_cov") {
      unstack_cov_field(m, t0, p, traj.lag_cov);
      traj.has_lag_cov = true;
    }
  }
  traj.has_filtered = any_filtered;
  traj.has_smoothed = any_smoothed;
  return traj;
}

void ensure_output_dir(const std::string& dir) {
  fs::path d(dir);
  if (d.filename().empty()) d = d.parent_path();  // strip trailing slash
  const fs::path parent = d.parent_path();
  if (!parent.empty() && !fs::exists(parent)) {
    throw IoError("output directory parent does not exist: " + dir);
  }
  std::error_code ec;
  fs::create_directory(d, ec);
  if (!fs::is_directory(d)) {
    throw IoError("cannot create output directory: " + dir);
  }
}

void save_simulation_bundle(const std::string& dir, const SimulationOutput& out,
                            const SimulationConfig& config,
                            const std::vector<int>& coarse_parent) {
  ensure_output_dir(dir);

  write_dsmx((fs::path(dir) / "observations.dsmx").string(), out.observations);
  write_dsmx((fs::path(dir) / "truth.dsmx").string(), out.true_coarse_sources);

  json mask;
  mask["p"] = static_cast<int>(out.active_mask.size());
  mask["active"] = json::array();
  json idx = json::array();
  for (size_t j = 0; j < out.active_mask.size(); ++j) {
    mask["active"].push_back(out.active_mask[j] ? 1 : 0);
    if (out.active_mask[j]) idx.push_back(j);
  }
  mask["active_indices"] = idx;
  write_file_or_throw((fs::path(dir) / "mask.json").string(), mask.dump(2) + "\n");

  json meta;
  meta["patch_indices"] = config.patch_indices;
  meta["waveform_freq_hz"] = config.waveform_freq_hz;
  meta["sample_rate_hz"] = config.sample_rate_hz;
  meta["duration_s"] = config.duration_s;
  meta["target_snr"] = config.target_snr;
  meta["refinement_factor"] = config.refinement_factor;
  meta["rng_seed"] = config.rng_seed;
  meta["achieved_snr"] = out.achieved_snr;
  meta["T"] = config.num_samples();
  meta["truth_fingerprint"] = matrix_fingerprint(out.true_coarse_sources);
  meta["aggregation"] = "nearest-coarse-node-sum";
  meta["coarse_parent"] = coarse_parent;
  write_file_or_throw((fs::path(dir) / "meta.json").string(), meta.dump(2) + "\n");
}

SimulationBundle load_simulation_bundle(const std::string& dir) {
  SimulationBundle bundle;
  bundle.output.observations =
      read_dsmx((fs::path(dir) / "observations.dsmx").string());
  bundle.output.true_coarse_sources =
      read_dsmx((fs::path(dir) / "truth.dsmx").string());

  const json mask = read_json_or_throw((fs::path(dir) / "mask.json").string());
  bundle.output.active_mask.clear();
  for (const auto& v : mask.at("active")) {
    bundle.output.active_mask.push_back(v.get<int>() != 0);
  }

  const json meta = read_json_or_throw((fs::path(dir) / "meta.json").string());
  bundle.config.patch_indices = meta.at("patch_indices").get<std::vector<int>>();
  bundle.config.waveform_freq_hz = meta.at("waveform_freq_hz").get<double>();
  bundle.config.sample_rate_hz = meta.at("sample_rate_hz").get<double>();
  bundle.config.duration_s = meta.at("duration_s").get<double>();
  bundle.config.target_snr = meta.at("target_snr").get<double>();
  bundle.config.refinement_factor = meta.at("refinement_factor").get<int>();
  bundle.config.rng_seed = meta.at("rng_seed").get<std::uint64_t>();
  bundle.output.achieved_snr = meta.at("achieved_snr").get<double>();
  bundle.truth_fingerprint = meta.at("truth_fingerprint").get<std::uint64_t>();
  return bundle;
}

void save_em_trace_csv(const std::string& path, const EmTrace& trace) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  out << "iteration,logLik,logPrior,cost,nuMin,nuMedian,nuMax\n";
  char buf[256];
  for (size_t i = 0; i < trace.iterates.size(); ++i) {
    const auto& it = trace.iterates[i];
    const double nu_min = it.nu.minCoeff();
    const double nu_max = it.nu.maxCoeff();
    const double nu_med = quantile(it.nu, 0.5);
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  i, it.log_lik, it.log_prior, it.cost, nu_min, nu_med, nu_max);
    out << buf;
  }
}

void save_em_trace_json(const std::string& path, const EmTrace& trace) {
  json doc;
  doc["converged"] = trace.converged;
  doc["iterations"] = trace.iterations;
  doc["iterates"] = json::array();
  for (const auto& it : trace.iterates) {
    doc["iterates"].push_back({{"logLik", it.log_lik},
                               {"logPrior", it.log_prior},
                               {"cost", it.cost},
                               {"nuMin", it.nu.minCoeff()},
                               {"nuMedian", quantile(it.nu, 0.5)},
                               {"nuMax", it.nu.maxCoeff()}});
  }
  write_file_or_throw(path, doc.dump(2) + "\n");
}

void save_eval_report_json(const std::string& path, const EvalReport& report,
                           const std::string& method) {
  json doc;
  doc["method"] = method;
  doc["truth_fingerprint"] = report.truth_fingerprint;
  if (report.has_roc) doc["auc"] = report.auc;
  if (report.has_rmse) {
    doc["inside_mean_rmse"] = report.inside_mean;
    json q;
    for (const auto& [level, value] : report.outside_quantiles) {
      char key[16];
      std::snprintf(key, sizeof(key), "%.2f", level);
      q[key] = value;
    }
    doc["outside_rmse_quantiles"] = q;
  }
  if (report.ci_half_widths.size() > 0) {
    doc["ci_half_width_mean"] = report.ci_half_widths.mean();
    doc["ci_half_width_max"] = report.ci_half_widths.maxCoeff();
  }
  doc["quantile_definition"] = "linear interpolation of order statistics";
  write_file_or_throw(path, doc.dump(2) + "\n");
}

void save_roc_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  out << "c,prFA,prD\n";
  char buf[128];
  for (const auto& r : report.roc_points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", r.threshold, r.pr_fa,
                  r.pr_d);
    out << buf;
  }
}

void save_rmse_csv(const std::string& path, const EvalReport& report,
                   const std::vector<bool>& active_mask) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file: " + path);
  out << "dipole,rmse,inside\n";
  char buf[128];
  for (int j = 0; j < report.rmse_per_dipole.size(); ++j) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%d\n", j,
                  report.rmse_per_dipole[j],
                  active_mask[static_cast<size_t>(j)] ? 1 : 0);
    out << buf;
  }
}

}  // namespace dynsolve
