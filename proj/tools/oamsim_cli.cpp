// Command-line driver: configures, seeds, runs, and persists every
// experiment as CSV artifacts plus a JSON summary carrying the config hash
// and master seed.  Exit codes: 0 success, 2 invalid configuration or
// arguments, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oamsim/experiments.hpp"
#include "oamsim/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace oamsim;

namespace {

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out_dir) / name).string();
}

void write_summary(const RunConfig& cfg, const std::string& command,
                   const std::vector<std::string>& artifacts,
                   const json& metrics) {
  json j;
  j["command"] = command;
  j["config"] = json::parse(serialize_config(cfg));
  j["config_hash"] = hash_hex(config_hash(cfg));
  j["seed"] = cfg.seed;
  j["artifacts"] = artifacts;
  j["metrics"] = metrics;
  write_text_file(out_path(cfg, command + "_summary.json"), j.dump(2) + "\n");
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::vector<std::string> header = {"row"};
  for (int c = 0; c < m.cols(); ++c) header.push_back("c" + std::to_string(c));
  CsvWriter csv(path, header);
  for (int r = 0; r < m.rows(); ++r) {
    std::vector<std::string> cells = {CsvWriter::cell(r)};
    for (int c = 0; c < m.cols(); ++c) cells.push_back(CsvWriter::cell(m(r, c)));
    csv.row(cells);
  }
}

void write_chi_csv(const std::string& path, const ProcessMatrix& chi) {
  CsvWriter csv(path, {"row", "col", "re", "im"});
  for (int r = 0; r < chi.chi.rows(); ++r)
    for (int c = 0; c < chi.chi.cols(); ++c)
      csv.row({CsvWriter::cell(r), CsvWriter::cell(c),
               CsvWriter::cell(chi.chi(r, c).real()),
               CsvWriter::cell(chi.chi(r, c).imag())});
}

// ---------------------------------------------------------------------------

void cmd_coupling(const RunConfig& cfg) {
  const CouplingResult res = run_coupling(cfg);
  const std::string csv_path = out_path(cfg, "coupling_timeseries.csv");
  CsvWriter csv(csv_path, {"t", "coupling", "residual", "ao_on"});
  for (std::size_t i = 0; i < res.t.size(); ++i)
    csv.row({CsvWriter::cell(res.t[i]), CsvWriter::cell(res.coupling[i]),
             CsvWriter::cell(res.residual[i]), CsvWriter::cell(res.ao_on[i])});
  json metrics = {{"mean_off", res.mean_off},
                  {"mean_on", res.mean_on},
                  {"greenwood_hz", res.greenwood},
                  {"undersampled", res.undersampled},
                  {"frames", res.t.size()}};
  write_summary(cfg, "coupling", {csv_path}, metrics);
  std::cout << "coupling: mean_off=" << res.mean_off
            << " mean_on=" << res.mean_on << "\n";
}

void cmd_tomography(const RunConfig& cfg) {
  const TomoResult res = run_tomography(cfg);
  std::vector<std::string> artifacts;
  const std::string fid_path = out_path(cfg, "tomography_fidelity.csv");
  CsvWriter csv(fid_path, {"turbulence", "ao", "fidelity"});
  json metrics;
  metrics["d"] = res.d;
  for (const TomoCondition& c : res.conditions) {
    csv.row({CsvWriter::cell(c.turbulence ? 1 : 0),
             CsvWriter::cell(c.ao ? 1 : 0), CsvWriter::cell(c.fidelity)});
    const std::string name = std::string("chi_") +
                             (c.turbulence ? "turb" : "clear") + "_" +
                             (c.ao ? "on" : "off") + ".csv";
    const std::string chi_path = out_path(cfg, name);
    write_chi_csv(chi_path, c.chi);
    artifacts.push_back(chi_path);
    metrics[std::string(c.turbulence ? "turb" : "clear") + "_" +
            (c.ao ? "on" : "off")] = c.fidelity;
  }
  artifacts.insert(artifacts.begin(), fid_path);
  write_summary(cfg, "tomography", artifacts, metrics);
  std::cout << "tomography: d=" << res.d
            << " clear_off=" << res.condition(false, false).fidelity
            << " turb_off=" << res.condition(true, false).fidelity
            << " turb_on=" << res.condition(true, true).fidelity << "\n";
}

void cmd_qkd(const RunConfig& cfg) {
  const QkdSweepResult res = run_qkd(cfg);
  std::vector<std::string> artifacts;
  const std::string qder_path = out_path(cfg, "qkd_qder.csv");
  CsvWriter csv(qder_path,
                {"dimension", "basis", "qder_off", "stderr_off", "qder_on",
                 "stderr_on", "boundary", "secure_off", "secure_on",
                 "key_rate_off", "key_rate_on"});
  json metrics = json::array();
  for (const QkdPoint& pt : res.points) {
    const struct {
      const char* name;
      const BasisQkdResult& off;
      const BasisQkdResult& on;
      const CrosstalkMatrix& c_off;
      const CrosstalkMatrix& c_on;
    } rows[2] = {
        {"oam", pt.off.logical, pt.on.logical, pt.logical_off, pt.logical_on},
        {"ang", pt.off.ang, pt.on.ang, pt.ang_off, pt.ang_on}};
    for (const auto& row : rows) {
      csv.row({CsvWriter::cell(pt.d), CsvWriter::cell(std::string(row.name)),
               CsvWriter::cell(row.off.qder),
               CsvWriter::cell(row.off.qder_std_err),
               CsvWriter::cell(row.on.qder),
               CsvWriter::cell(row.on.qder_std_err),
               CsvWriter::cell(pt.off.threshold),
               CsvWriter::cell(row.off.secure ? 1 : 0),
               CsvWriter::cell(row.on.secure ? 1 : 0),
               CsvWriter::cell(row.off.key_rate),
               CsvWriter::cell(row.on.key_rate)});
      for (const auto* state : {&row.c_off, &row.c_on}) {
        const bool on = state == &row.c_on;
        const std::string name = "crosstalk_d" + std::to_string(pt.d) + "_" +
                                 row.name + (on ? "_on.csv" : "_off.csv");
        const std::string path = out_path(cfg, name);
        write_matrix_csv(path, state->C);
        artifacts.push_back(path);
      }
      metrics.push_back({{"d", pt.d},
                         {"basis", row.name},
                         {"qder_off", row.off.qder},
                         {"qder_on", row.on.qder},
                         {"boundary", pt.off.threshold},
                         {"secure_off", row.off.secure},
                         {"secure_on", row.on.secure}});
    }
  }
  artifacts.insert(artifacts.begin(), qder_path);
  write_summary(cfg, "qkd", artifacts, metrics);
  for (const QkdPoint& pt : res.points)
    std::cout << "qkd: d=" << pt.d << " oam " << pt.off.logical.qder << "->"
              << pt.on.logical.qder << " ang " << pt.off.ang.qder << "->"
              << pt.on.ang.qder << " boundary " << pt.off.threshold << "\n";
}

void cmd_zernike_stats(const RunConfig& cfg) {
  const ZernikeStatsResult res = run_zernike_stats(cfg);
  const std::string csv_path = out_path(cfg, "zernike_sigma.csv");
  std::vector<std::string> header = {"index", "name", "sigma_run"};
  for (int s : res.sweep_settings)
    header.push_back("sigma_setting_" + std::to_string(s));
  CsvWriter csv(csv_path, header);
  for (std::size_t j = 0; j < res.names.size(); ++j) {
    std::vector<std::string> cells = {CsvWriter::cell(static_cast<int>(j + 1)),
                                      CsvWriter::cell(res.names[j]),
                                      CsvWriter::cell(res.run_sigma[j])};
    for (const auto& sweep : res.sweep_sigma)
      cells.push_back(CsvWriter::cell(sweep[j]));
    csv.row(cells);
  }
  json metrics;
  for (int j = 2; j <= 10; ++j)
    metrics[res.names[j - 1]] = res.run_sigma[j - 1];
  write_summary(cfg, "zernike_stats", {csv_path}, metrics);
  std::cout << "zernike-stats: wrote " << res.names.size() << " indices\n";
}

void cmd_fried(const RunConfig& cfg) {
  const FriedResult res = run_fried(cfg);
  const std::string csv_path = out_path(cfg, "fried.csv");
  CsvWriter csv(csv_path, {"frames", "s_mean", "r0_est", "d_over_r0"});
  csv.row({CsvWriter::cell(res.frames), CsvWriter::cell(res.s_mean),
           CsvWriter::cell(res.r0_est), CsvWriter::cell(res.d_over_r0)});
  json metrics = {{"frames", res.frames},
                  {"s_mean", res.s_mean},
                  {"r0_est", res.r0_est},
                  {"d_over_r0", res.d_over_r0}};
  write_summary(cfg, "fried", {csv_path}, metrics);
  std::cout << "fried: r0_est=" << res.r0_est << " D/r0=" << res.d_over_r0
            << "\n";
}

void cmd_gen_screens(const RunConfig& cfg) {
  const GridSpec grid = cfg.grid();
  const bool use_list = !cfg.zernike_sigma.empty();
  if (!use_list && cfg.r0 <= 0.0)
    throw std::invalid_argument("gen-screens: need r0 > 0 or a sigma list");
  const std::string index_path = out_path(cfg, "screens_index.csv");
  CsvWriter csv(index_path, {"index", "file", "seed", "r0", "rms"});
  std::vector<std::string> artifacts = {index_path};
  for (int k = 0; k < cfg.trials; ++k) {
    const std::uint64_t seed = derive_seed(cfg.seed, stream::screens, k);
    const PhaseScreen scr =
        use_list ? gen_screen_zernike(cfg.zernike_sigma, grid, seed,
                                      cfg.ao_pupil)
                 : gen_screen_fft(cfg.r0, grid, seed, cfg.ao_pupil);
    const std::string base = "screen_" + std::to_string(k);
    save_screen(scr, out_path(cfg, base + ".bin"));
    save_screen_png(scr, out_path(cfg, base + ".png"));
    double sum = 0.0, sum2 = 0.0;
    for (double v : scr.phase) {
      sum += v;
      sum2 += v * v;
    }
    const double nn = static_cast<double>(scr.phase.size());
    const double mean = sum / nn;
    const double rms = std::sqrt(std::max(sum2 / nn - mean * mean, 0.0));
    csv.row({CsvWriter::cell(k), CsvWriter::cell(base + ".bin"),
             CsvWriter::cell(seed), CsvWriter::cell(scr.r0),
             CsvWriter::cell(rms)});
    artifacts.push_back(out_path(cfg, base + ".bin"));
  }
  json metrics = {{"count", cfg.trials},
                  {"generator", use_list ? "zernike" : "fft"}};
  write_summary(cfg, "gen_screens", artifacts, metrics);
  std::cout << "gen-screens: wrote " << cfg.trials << " screens\n";
}

// ---------------------------------------------------------------------------

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int trials = 0;
  int threads = 0;
  CLI::Option* config_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* trials_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
};

CommonOpts* add_common(CLI::App* sub,
                       std::vector<std::unique_ptr<CommonOpts>>& store) {
  store.push_back(std::make_unique<CommonOpts>());
  CommonOpts* o = store.back().get();
  o->config_opt = sub->add_option("--config", o->config_path, "Config JSON path");
  o->out_opt = sub->add_option("--out", o->out_dir, "Output directory");
  o->seed_opt = sub->add_option("--seed", o->seed, "Master seed");
  o->trials_opt = sub->add_option("--trials", o->trials, "Trial count");
  o->threads_opt = sub->add_option("--threads", o->threads, "Worker threads");
  return o;
}

RunConfig make_config(const CommonOpts& o) {
  RunConfig cfg =
      o.config_opt->count() ? load_config(o.config_path) : RunConfig{};
  if (o.seed_opt->count()) cfg.seed = o.seed;
  if (o.out_opt->count()) cfg.out_dir = o.out_dir;
  if (o.trials_opt->count()) cfg.trials = o.trials;
  if (o.threads_opt->count()) cfg.threads = o.threads;
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-dimensional OAM link simulator"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-defaults", print_defaults,
               "Print the default config JSON and exit");

  std::vector<std::unique_ptr<CommonOpts>> store;
  CLI::App* coupling = app.add_subcommand(
      "coupling", "Gaussian fiber-coupling time series with mid-run AO start");
  CommonOpts* o_coupling = add_common(coupling, store);
  CLI::App* tomo = app.add_subcommand(
      "tomography", "Process tomography under four turbulence/AO conditions");
  CommonOpts* o_tomo = add_common(tomo, store);
  int tomo_d = 0;
  CLI::Option* tomo_d_opt =
      tomo->add_option("--d", tomo_d, "Hilbert-space dimension (2..5)");
  CLI::App* qkd = app.add_subcommand(
      "qkd", "Crosstalk and QDER sweep over encoding dimensions");
  CommonOpts* o_qkd = add_common(qkd, store);
  std::vector<int> qkd_dims;
  CLI::Option* qkd_dims_opt =
      qkd->add_option("--dims", qkd_dims, "Dimensions to sweep");
  CLI::App* zern = app.add_subcommand(
      "zernike-stats", "Per-index Zernike coefficient scatter");
  CommonOpts* o_zern = add_common(zern, store);
  CLI::App* fried = app.add_subcommand(
      "fried", "Fried parameter estimate from beam wander");
  CommonOpts* o_fried = add_common(fried, store);
  CLI::App* gen = app.add_subcommand("gen-screens",
                                     "Write an ensemble of phase screens");
  CommonOpts* o_gen = add_common(gen, store);

  CLI11_PARSE(app, argc, argv);

  if (print_defaults) {
    std::cout << serialize_config(RunConfig{});
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 2;
  }

  try {
    if (coupling->parsed()) {
      cmd_coupling(make_config(*o_coupling));
    } else if (tomo->parsed()) {
      RunConfig cfg = make_config(*o_tomo);
      if (tomo_d_opt->count()) {
        cfg.tomo_d = tomo_d;
        cfg.validate();
      }
      cmd_tomography(cfg);
    } else if (qkd->parsed()) {
      RunConfig cfg = make_config(*o_qkd);
      if (qkd_dims_opt->count()) {
        cfg.qkd_dims = qkd_dims;
        cfg.validate();
      }
      cmd_qkd(cfg);
    } else if (zern->parsed()) {
      cmd_zernike_stats(make_config(*o_zern));
    } else if (fried->parsed()) {
      cmd_fried(make_config(*o_fried));
    } else if (gen->parsed()) {
      cmd_gen_screens(make_config(*o_gen));
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
