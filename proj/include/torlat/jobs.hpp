#pragma once

#include "torlat/lattice.hpp"
#include "torlat/maslov.hpp"
#include "torlat/system.hpp"
#include "torlat/types.hpp"
#include "torlat/verify.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace torlat {

struct SamplingConfig {
  int system_check_samples = 100;
  int maslov_initial_samples = 64;
  int fibers = 5;
  int points_per_fiber = 10;
  int mapping_torus_samples = 100;
  double scan_t_max = 25.0;
  double scan_grid_step = 0.25;
  double near_return_threshold = 1.0;
  bool use_analytic_lattice = true;
};

struct JobConfig {
  std::string job;  // periods | monodromy | maslov | refine | s1-action |
                    // mapping-torus-check | full-verify
  std::string system_name;
  ParamMap params;
  std::optional<LoopPath> loop;
  std::optional<Vec> value;
  std::optional<Vec> point;
  std::vector<Vec> hints;
  std::optional<IMat> rho_rows;
  Tolerances tol;
  SamplingConfig sampling;
  std::uint64_t seed = 0;
  std::string report_path;  // empty -> stdout
  std::string plot_dir;     // empty -> no CSV output
  nlohmann::json echo;      // normalized config for the report
};

JobConfig parse_job_config(const nlohmann::json& doc);
JobConfig load_job_config(const std::string& path);

struct Report {
  nlohmann::json doc;
  bool all_pass = false;
};

// Dispatches the configured pipeline and assembles the report (plus CSV plot
// data when a plot directory is configured).  Stage failures become "fail"
// verdicts with the error recorded; they do not throw.
Report run_job(const JobConfig& config);

// Plot data: one row per continuation node / phase sample, 17 significant
// digits, header row first.
void emit_trajectory_csv(const BasisTrajectory& traj, std::ostream& os);
void emit_phase_csv(const MaslovIndexResult& result, std::ostream& os);

}  // namespace torlat
