#pragma once

// Run configuration: one structured document covering grid, channel,
// turbulence, AO, and experiment parameters, with JSON round-trip, schema
// validation, and a stable content hash for output summaries.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "oamsim/grid.hpp"

namespace oamsim {

struct RunConfig {
  // grid and beam
  int n = 256;
  double waist = 1.0e-3;       // transmit-mode waist w0, m
  double wavelength = 633e-9;  // m
  double pitch = 0.0;          // 0 -> 8*waist/n

  // channel geometry: free leg, phase screen, free leg, receiver aperture
  double z_before = 0.65;         // m
  double z_after = 0.65;          // m
  double cell_length = 0.3;       // turbulent-cell extent, m (wander baseline)
  double receiver_aperture = 0.0; // diameter, m; 0 disables the hard mask

  // turbulence
  double r0 = 1.1765e-3;            // Fried parameter, m; 0 disables screens
  double wind_speed = 0.01;         // frozen-flow translation, m/s
  std::vector<double> zernike_sigma;  // if nonempty, screens come from this

  // adaptive optics
  double ao_pupil = 4.0e-3;      // WFS/DM pupil diameter, m
  double ref_waist = 1.8e-3;     // reference-beam waist at the transmitter, m
  double f_loop = 200.0;         // Hz
  double gain = 0.4;
  double leak = 0.99;
  double tau = 1e-3;             // reconstructor singular-value cutoff
  double stroke = 20.0;          // rad
  int wfs_nsub = 14;
  double wfs_flux_threshold = 0.05;
  int settle_iterations = 60;    // loop frames run per static realization

  // experiment knobs
  double duration = 100.0;   // coupling run length, s
  double t_on = 10.0;        // AO switch-on time, s
  double fiber_waist = 0.0;  // 0 -> waist
  int tomo_d = 3;
  int ensemble = 100;        // screen realizations for averaged tomography
  std::vector<int> qkd_dims = {2, 4, 6, 8, 10};

  int trials = 100;
  std::uint64_t seed = 12345;
  std::string out_dir = ".";
  int threads = 1;

  double effective_pitch() const { return pitch > 0.0 ? pitch : 8.0 * waist / n; }
  double effective_fiber_waist() const {
    return fiber_waist > 0.0 ? fiber_waist : waist;
  }
  GridSpec grid() const {
    GridSpec g;
    g.n = n;
    g.pitch = effective_pitch();
    g.wavelength = wavelength;
    return g;
  }

  void validate() const {
    auto require = [](bool ok, const std::string& msg) {
      if (!ok) throw std::invalid_argument("config: " + msg);
    };
    require(n >= 32 && (n & (n - 1)) == 0,
            "n must be a power of two >= 32, got " + std::to_string(n));
    require(waist > 0.0, "waist must be > 0");
    require(wavelength > 0.0, "wavelength must be > 0");
    require(pitch >= 0.0, "pitch must be >= 0 (0 selects 8*waist/n)");
    require(z_before >= 0.0 && z_after >= 0.0,
            "propagation distances must be >= 0");
    require(cell_length > 0.0, "cell_length must be > 0");
    require(receiver_aperture >= 0.0, "receiver_aperture must be >= 0");
    require(r0 >= 0.0, "r0 must be >= 0 (0 disables turbulence)");
    require(wind_speed >= 0.0, "wind_speed must be >= 0");
    for (double s : zernike_sigma)
      require(s >= 0.0, "zernike_sigma entries must be >= 0");
    require(ao_pupil > 0.0, "ao_pupil must be > 0");
    require(ref_waist > 0.0, "ref_waist must be > 0");
    require(f_loop > 0.0, "f_loop must be > 0");
    require(gain > 0.0 && gain <= 1.0, "gain must be in (0, 1]");
    require(leak > 0.0 && leak <= 1.0, "leak must be in (0, 1]");
    require(tau > 0.0 && tau < 1.0, "tau must be in (0, 1)");
    require(stroke > 0.0, "stroke must be > 0");
    require(wfs_nsub >= 2, "wfs_nsub must be >= 2");
    require(wfs_flux_threshold > 0.0 && wfs_flux_threshold < 1.0,
            "wfs_flux_threshold must be in (0, 1)");
    require(settle_iterations >= 1, "settle_iterations must be >= 1");
    require(duration > 0.0, "duration must be > 0");
    require(t_on >= 0.0 && t_on <= duration, "t_on must be in [0, duration]");
    require(fiber_waist >= 0.0, "fiber_waist must be >= 0 (0 selects waist)");
    require(tomo_d >= 2 && tomo_d <= 5, "tomo_d must be in {2,3,4,5}");
    require(ensemble >= 1, "ensemble must be >= 1");
    require(!qkd_dims.empty(), "qkd_dims must be non-empty");
    for (int d : qkd_dims)
      require(d >= 2 && d % 2 == 0,
              "qkd_dims entries must be even and >= 2, got " + std::to_string(d));
    require(trials >= 1, "trials must be >= 1");
    require(threads >= 1, "threads must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{
      {"grid", {{"n", c.n}, {"waist", c.waist}, {"wavelength", c.wavelength}, {"pitch", c.pitch}}},
      {"channel",
       {{"z_before", c.z_before},
        {"z_after", c.z_after},
        {"cell_length", c.cell_length},
        {"receiver_aperture", c.receiver_aperture}}},
      {"turbulence",
       {{"r0", c.r0},
        {"wind_speed", c.wind_speed},
        {"zernike_sigma", c.zernike_sigma}}},
      {"ao",
       {{"pupil", c.ao_pupil},
        {"ref_waist", c.ref_waist},
        {"f_loop", c.f_loop},
        {"gain", c.gain},
        {"leak", c.leak},
        {"tau", c.tau},
        {"stroke", c.stroke},
        {"wfs_nsub", c.wfs_nsub},
        {"wfs_flux_threshold", c.wfs_flux_threshold},
        {"settle_iterations", c.settle_iterations}}},
      {"experiment",
       {{"duration", c.duration},
        {"t_on", c.t_on},
        {"fiber_waist", c.fiber_waist},
        {"tomo_d", c.tomo_d},
        {"ensemble", c.ensemble},
        {"qkd_dims", c.qkd_dims}}},
      {"run",
       {{"trials", c.trials},
        {"seed", c.seed},
        {"out_dir", c.out_dir},
        {"threads", c.threads}}}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  const RunConfig defaults;
  auto get = [](const nlohmann::json& obj, const char* key, auto fallback) {
    using T = decltype(fallback);
    if (!obj.contains(key)) return fallback;
    return obj.at(key).template get<T>();
  };
  const auto grid = j.value("grid", nlohmann::json::object());
  c.n = get(grid, "n", defaults.n);
  c.waist = get(grid, "waist", defaults.waist);
  c.wavelength = get(grid, "wavelength", defaults.wavelength);
  c.pitch = get(grid, "pitch", defaults.pitch);
  const auto chan = j.value("channel", nlohmann::json::object());
  c.z_before = get(chan, "z_before", defaults.z_before);
  c.z_after = get(chan, "z_after", defaults.z_after);
  c.cell_length = get(chan, "cell_length", defaults.cell_length);
  c.receiver_aperture = get(chan, "receiver_aperture", defaults.receiver_aperture);
  const auto turb = j.value("turbulence", nlohmann::json::object());
  c.r0 = get(turb, "r0", defaults.r0);
  c.wind_speed = get(turb, "wind_speed", defaults.wind_speed);
  c.zernike_sigma = get(turb, "zernike_sigma", defaults.zernike_sigma);
  const auto ao = j.value("ao", nlohmann::json::object());
  c.ao_pupil = get(ao, "pupil", defaults.ao_pupil);
  c.ref_waist = get(ao, "ref_waist", defaults.ref_waist);
  c.f_loop = get(ao, "f_loop", defaults.f_loop);
  c.gain = get(ao, "gain", defaults.gain);
  c.leak = get(ao, "leak", defaults.leak);
  c.tau = get(ao, "tau", defaults.tau);
  c.stroke = get(ao, "stroke", defaults.stroke);
  c.wfs_nsub = get(ao, "wfs_nsub", defaults.wfs_nsub);
  c.wfs_flux_threshold =
      get(ao, "wfs_flux_threshold", defaults.wfs_flux_threshold);
  c.settle_iterations = get(ao, "settle_iterations", defaults.settle_iterations);
  const auto exp = j.value("experiment", nlohmann::json::object());
  c.duration = get(exp, "duration", defaults.duration);
  c.t_on = get(exp, "t_on", defaults.t_on);
  c.fiber_waist = get(exp, "fiber_waist", defaults.fiber_waist);
  c.tomo_d = get(exp, "tomo_d", defaults.tomo_d);
  c.ensemble = get(exp, "ensemble", defaults.ensemble);
  c.qkd_dims = get(exp, "qkd_dims", defaults.qkd_dims);
  const auto run = j.value("run", nlohmann::json::object());
  c.trials = get(run, "trials", defaults.trials);
  c.seed = get(run, "seed", defaults.seed);
  c.out_dir = get(run, "out_dir", defaults.out_dir);
  c.threads = get(run, "threads", defaults.threads);
}

inline std::string serialize_config(const RunConfig& c) {
  nlohmann::json j = c;
  return j.dump(2) + "\n";
}

inline RunConfig parse_config(const std::string& text) {
  RunConfig c;
  from_json(nlohmann::json::parse(text), c);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// FNV-1a 64 over the canonical serialization (nlohmann objects iterate in
// sorted key order, so the hash is representation-stable).
inline std::uint64_t config_hash(const RunConfig& c) {
  const std::string s = serialize_config(c);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace oamsim
