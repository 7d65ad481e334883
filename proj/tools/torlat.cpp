#include "torlat/jobs.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"torlat - period lattices, monodromy and Maslov indices of integrable systems"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "run a job described by a JSON config");
  std::string config_path;
  std::uint64_t seed_override = 0;
  bool have_seed = false;
  bool verbose = false;
  run->add_option("config", config_path, "path to the job config JSON")->required();
  run->add_option("--seed", seed_override, "override the config seed")
      ->each([&](const std::string&) { have_seed = true; });
  run->add_flag("--verbose", verbose, "progress and timing on stderr");

  CLI11_PARSE(app, argc, argv);

  try {
    torlat::JobConfig cfg = torlat::load_job_config(config_path);
    if (have_seed) {
      cfg.seed = seed_override;
      cfg.echo["seed"] = seed_override;
    }
    if (verbose)
      std::cerr << "torlat: job '" << cfg.job << "' on " << cfg.system_name << ", seed "
                << cfg.seed << "\n";

    const auto t0 = std::chrono::steady_clock::now();
    const torlat::Report report = torlat::run_job(cfg);
    const auto t1 = std::chrono::steady_clock::now();

    if (!cfg.report_path.empty()) {
      std::ofstream os(cfg.report_path);
      if (!os) {
        std::cerr << "torlat: cannot write report to " << cfg.report_path << "\n";
        return 2;
      }
      os << report.doc.dump(2) << "\n";
    } else {
      std::cout << report.doc.dump(2) << "\n";
    }

    for (const auto& [stage, verdict] : report.doc["verdicts"].items())
      std::cerr << "  " << stage << ": " << verdict.get<std::string>() << "\n";
    if (verbose)
      std::cerr << "torlat: wall time "
                << std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()
                << " ms\n";
    return report.all_pass ? 0 : 1;
  } catch (const torlat::Error& e) {
    std::cerr << "torlat: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "torlat: " << e.what() << "\n";
    return 2;
  }
}
