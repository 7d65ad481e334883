#include "torlat/jobs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <set>

namespace torlat {

namespace {

using nlohmann::json;

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

json imat_to_json(const IMat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

json ivec_to_json(const IVec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vec vec_from_json(const json& a, const char* what) {
  if (!a.is_array() || a.empty()) fail(errc::config_invalid, std::string(what) + ": array expected");
  Vec v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) fail(errc::config_invalid, std::string(what) + ": number expected");
    v(i) = a[i].get<double>();
  }
  return v;
}

const std::set<std::string> kJobs = {"periods",   "monodromy", "maslov",
                                     "refine",    "s1-action", "mapping-torus-check",
                                     "full-verify"};

}  // namespace

JobConfig parse_job_config(const json& doc) {
  if (!doc.is_object()) fail(errc::config_invalid, "config must be a JSON object");
  JobConfig cfg;

  if (!doc.contains("job") || !doc["job"].is_string())
    fail(errc::config_invalid, "missing string field 'job'");
  cfg.job = doc["job"].get<std::string>();
  if (!kJobs.count(cfg.job)) fail(errc::config_invalid, "unknown job '" + cfg.job + "'");

  if (!doc.contains("system") || !doc["system"].is_object() || !doc["system"].contains("name"))
    fail(errc::config_invalid, "missing object field 'system' with 'name'");
  cfg.system_name = doc["system"]["name"].get<std::string>();
  if (doc["system"].contains("params")) {
    for (const auto& [key, val] : doc["system"]["params"].items()) {
      std::vector<double> xs;
      if (val.is_number()) {
        xs.push_back(val.get<double>());
      } else if (val.is_array()) {
        for (const auto& x : val) xs.push_back(x.get<double>());
      } else {
        fail(errc::config_invalid, "parameter '" + key + "' must be a number or array");
      }
      cfg.params[key] = xs;
    }
  }

  if (doc.contains("loop")) {
    const json& jl = doc["loop"];
    LoopPath path;
    if (jl.contains("circle")) {
      const json& c = jl["circle"];
      path = LoopPath::circle(vec_from_json(c.at("center"), "loop.circle.center"),
                              c.at("radius").get<double>(), c.value("samples", 64));
    } else if (jl.contains("samples")) {
      for (const auto& s : jl["samples"]) path.samples.push_back(vec_from_json(s, "loop.samples"));
    } else {
      fail(errc::config_invalid, "loop needs 'samples' or 'circle'");
    }
    path.min_critical_distance = jl.value("min_critical_distance", 0.0);
    cfg.loop = path;
  }

  if (doc.contains("value")) cfg.value = vec_from_json(doc["value"], "value");
  if (doc.contains("point")) cfg.point = vec_from_json(doc["point"], "point");
  if (doc.contains("hints"))
    for (const auto& h : doc["hints"]) cfg.hints.push_back(vec_from_json(h, "hints"));

  if (doc.contains("rho")) {
    const json& jr = doc["rho"];
    if (!jr.is_array() || jr.empty() || !jr[0].is_array())
      fail(errc::config_invalid, "rho must be an array of integer rows");
    IMat rows(jr.size(), jr[0].size());
    for (std::size_t i = 0; i < jr.size(); ++i) {
      if (jr[i].size() != jr[0].size()) fail(errc::config_invalid, "ragged rho rows");
      for (std::size_t j = 0; j < jr[i].size(); ++j)
        rows(i, j) = jr[i][j].get<std::int64_t>();
    }
    cfg.rho_rows = rows;
  }

  if (doc.contains("tolerances")) {
    const json& jt = doc["tolerances"];
    cfg.tol.abs_tol = jt.value("abs_tol", cfg.tol.abs_tol);
    cfg.tol.rel_tol = jt.value("rel_tol", cfg.tol.rel_tol);
    cfg.tol.newton_tol = jt.value("newton_tol", cfg.tol.newton_tol);
    cfg.tol.max_newton_iters = jt.value("max_newton_iters", cfg.tol.max_newton_iters);
    cfg.tol.validate();
  }

  if (doc.contains("sampling")) {
    const json& js = doc["sampling"];
    SamplingConfig& s = cfg.sampling;
    s.system_check_samples = js.value("system_check_samples", s.system_check_samples);
    s.maslov_initial_samples = js.value("maslov_initial_samples", s.maslov_initial_samples);
    s.fibers = js.value("fibers", s.fibers);
    s.points_per_fiber = js.value("points_per_fiber", s.points_per_fiber);
    s.mapping_torus_samples = js.value("mapping_torus_samples", s.mapping_torus_samples);
    s.scan_t_max = js.value("scan_t_max", s.scan_t_max);
    s.scan_grid_step = js.value("scan_grid_step", s.scan_grid_step);
    s.near_return_threshold = js.value("near_return_threshold", s.near_return_threshold);
    s.use_analytic_lattice = js.value("use_analytic_lattice", s.use_analytic_lattice);
  }

  cfg.seed = doc.value("seed", 0ULL);
  if (doc.contains("output")) {
    cfg.report_path = doc["output"].value("report", "");
    cfg.plot_dir = doc["output"].value("plot_dir", "");
  }
  if (!cfg.value && !cfg.point)
    fail(errc::config_invalid, "config needs 'value' and/or 'point' to anchor the fiber");
  if ((cfg.job == "monodromy" || cfg.job == "mapping-torus-check") && !cfg.loop)
    fail(errc::config_invalid, "job '" + cfg.job + "' requires a loop");
  if (cfg.job == "refine" && cfg.hints.empty())
    fail(errc::config_invalid, "job 'refine' requires hints");
  cfg.echo = doc;
  cfg.echo["seed"] = cfg.seed;
  return cfg;
}

JobConfig load_job_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(errc::io_failure, "cannot open config '" + path + "'");
  json doc;
  try {
    is >> doc;
  } catch (const json::exception& e) {
    fail(errc::config_invalid, std::string("config parse error: ") + e.what());
  }
  return parse_job_config(doc);
}

namespace {

void csv_row(std::ostream& os, const std::vector<double>& xs) {
  char buf[64];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", xs[i]);
    os << (i ? "," : "") << buf;
  }
  os << "\n";
}

}  // namespace

void emit_trajectory_csv(const BasisTrajectory& traj, std::ostream& os) {
  if (traj.bases.empty()) fail(errc::bad_argument, "empty trajectory");
  const int k = static_cast<int>(traj.bases.front().value.size());
  const int d = static_cast<int>(traj.bases.front().anchor.size());
  const int n = static_cast<int>(traj.bases.front().basis.cols());
  os << "s";
  for (int i = 0; i < k; ++i) os << ",value" << i + 1;
  for (int i = 0; i < d; ++i) os << ",anchor" << i + 1;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) os << ",basis" << i + 1 << j + 1;
  for (int i = 0; i < n; ++i) os << ",residual" << i + 1;
  os << "\n";
  for (std::size_t r = 0; r < traj.bases.size(); ++r) {
    const LatticeBasis& b = traj.bases[r];
    std::vector<double> row{traj.s[r]};
    for (int i = 0; i < k; ++i) row.push_back(b.value(i));
    for (int i = 0; i < d; ++i) row.push_back(b.anchor(i));
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) row.push_back(b.basis(i, j));
    for (int i = 0; i < n; ++i) row.push_back(b.residuals(i));
    csv_row(os, row);
  }
  if (!os) fail(errc::io_failure, "trajectory CSV write failed");
}

void emit_phase_csv(const MaslovIndexResult& result, std::ostream& os) {
  os << "s,unwrapped_phase\n";
  for (const auto& [s, phi] : result.phase_trace) csv_row(os, {s, phi});
  if (!os) fail(errc::io_failure, "phase CSV write failed");
}

namespace {

struct Pipeline {
  const JobConfig& cfg;
  SystemCatalogEntry entry;
  json results = json::object();
  json diagnostics = json::object();
  json verdicts = json::object();

  std::optional<LatticeBasis> basis;
  std::optional<BasisTrajectory> traj;
  std::optional<MonodromyMatrix> mono;
  std::optional<MaslovVector> maslov;
  std::optional<RhoFunctional> rho;
  std::string rho_source;

  explicit Pipeline(const JobConfig& c) : cfg(c), entry(builtin_system(c.system_name, c.params)) {}

  // Runs one stage; exceptions become "fail" verdicts.
  template <class Fn>
  bool stage(const std::string& name, Fn&& fn) {
    try {
      fn();
      verdicts[name] = "pass";
      return true;
    } catch (const Error& e) {
      verdicts[name] = "fail";
      results[name]["error"] = e.what();
      return false;
    }
  }

  void skip(const std::string& name, const std::string& why) {
    verdicts[name] = "skipped";
    results[name]["reason"] = why;
  }

  Vec resolve_anchor() {
    const IntegrableSystem& sys = entry.system;
    Vec p;
    if (cfg.point) {
      p = *cfg.point;
      if (cfg.value) p = track_fiber_point(sys, p, *cfg.value, cfg.tol);
    } else {
      if (!entry.fiber_seed)
        fail(errc::config_invalid, "system has no analytic fiber seed; supply 'point'");
      p = entry.fiber_seed(*cfg.value);
      p = track_fiber_point(sys, p, *cfg.value, cfg.tol);
    }
    if (!sys.in_regular_domain(p)) fail(errc::bad_argument, "anchor is not a regular point");
    return p;
  }

  DetectOptions detect_options(bool hints_only) const {
    DetectOptions opt;
    opt.hints = cfg.hints;
    opt.use_analytic = !hints_only && cfg.sampling.use_analytic_lattice;
    opt.allow_scan = !hints_only;
    opt.t_max = cfg.sampling.scan_t_max;
    opt.grid_step = cfg.sampling.scan_grid_step;
    opt.near_return_threshold = cfg.sampling.near_return_threshold;
    return opt;
  }

  void record_basis(const std::string& key, const LatticeBasis& b) {
    results[key] = {{"anchor", vec_to_json(b.anchor)},
                    {"value", vec_to_json(b.value)},
                    {"basis", mat_to_json(b.basis)},
                    {"residuals", vec_to_json(b.residuals)}};
  }

  void run_system_check() {
    const Vec p = resolve_anchor();
    const SystemCheckReport rep =
        check_system(entry, p, cfg.sampling.system_check_samples, cfg.seed);
    results["system-invariants"] = {{"samples", rep.samples},
                                    {"min_df_rank_ratio", rep.min_df_rank_ratio},
                                    {"min_generator_rank_ratio", rep.min_generator_rank_ratio},
                                    {"max_commutator", rep.max_commutator},
                                    {"max_tangency", rep.max_tangency}};
    if (!rep.pass) fail(errc::bad_argument, "system invariants violated at sampled points");
  }

  void run_periods(bool hints_only) {
    const Vec p = resolve_anchor();
    basis = detect_lattice_basis(entry, p, detect_options(hints_only), cfg.tol);
    record_basis("periods", *basis);
    if (entry.analytic_lattice) {
      const Mat analytic = reduce_basis(entry.analytic_lattice(basis->value));
      results["periods"]["analytic_match_residual"] = (analytic - basis->basis).norm();
    }
  }

  void run_monodromy() {
    if (!cfg.loop) fail(errc::config_invalid, "job requires a loop");
    if (!basis) fail(errc::bad_argument, "no start basis");
    BasisTrajectory t;
    mono = monodromy(entry, *cfg.loop, *basis, cfg.tol, &t);
    traj = std::move(t);
    double max_resid = 0;
    for (const auto& b : traj->bases) max_resid = std::max(max_resid, b.residuals.maxCoeff());
    results["monodromy"] = {{"entries", imat_to_json(mono->entries)},
                            {"pre_round_residual", mono->pre_round_residual},
                            {"trajectory_nodes", traj->bases.size()},
                            {"max_basis_residual", max_resid}};
    if (mono->entries.rows() == 2) {
      const Gl2zClass cls = gl2z_conjugacy_invariant(mono->entries);
      results["monodromy"]["gl2z_class"] = {{"class", cls.cls}, {"k", cls.k}};
    }
    if (entry.prescribed_monodromy &&
        cfg.loop->samples.size() && mono->entries != *entry.prescribed_monodromy)
      results["monodromy"]["prescribed_mismatch"] = imat_to_json(*entry.prescribed_monodromy);
  }

  void run_maslov() {
    if (!basis) fail(errc::bad_argument, "no basis");
    SymplecticStructure S = SymplecticStructure::standard(entry.system.n());
    MaslovSampling ms;
    ms.initial_samples = cfg.sampling.maslov_initial_samples;
    maslov = maslov_vector(entry, *basis, S, ms, cfg.tol);
    json cycles = json::array();
    for (const auto& c : maslov->per_cycle) cycles.push_back(c.samples_used);
    results["maslov"] = {{"indices", ivec_to_json(maslov->indices)},
                         {"winding_residuals", vec_to_json(maslov->winding_residuals)},
                         {"samples_used", cycles}};
  }

  void resolve_rho() {
    if (!basis) fail(errc::bad_argument, "no basis to express the functional on");
    if (cfg.rho_rows) {
      if (cfg.rho_rows->cols() != entry.system.n())
        fail(errc::config_invalid, "rho row length must equal n");
      rho = RhoFunctional{*cfg.rho_rows, *basis};
      rho_source = "config";
    } else if (maslov && !maslov->indices.isZero()) {
      IMat rows(1, maslov->indices.size());
      rows.row(0) = maslov->indices.transpose();
      rho = RhoFunctional{rows, maslov->basis_ref};
      rho_source = "maslov";
    } else {
      fail(errc::bad_argument, "no cycle functional available");
    }
    results["rho"] = {{"rows", imat_to_json(rho->rows)}, {"source", rho_source}};
  }

  void run_rho_invariance() {
    if (!rho || !mono) fail(errc::bad_argument, "needs rho and monodromy");
    const RhoInvarianceReport rep = verify_rho_invariance(rho->rows, mono->entries);
    results["rho-invariance"] = {{"pass", rep.pass},
                                 {"violated_rows", rep.violated_rows},
                                 {"transformed", imat_to_json(rep.transformed)}};
    if (!rep.pass) fail(errc::bad_argument, "functional is not monodromy-invariant");
  }

  void run_kernel_chain() {
    if (!rho) fail(errc::bad_argument, "needs rho");
    const SublatticeChain chain = kernel_chain(rho->rows);
    json levels = json::array();
    for (std::size_t i = 0; i < chain.kernels.size(); ++i)
      levels.push_back({{"kernel", imat_to_json(chain.kernels[i])},
                        {"complement", ivec_to_json(chain.complements[i])},
                        {"splitting_det", chain.splitting_dets[i]}});
    results["kernel-chain"] = {{"levels", levels}};
  }

  void run_s1_action() {
    if (!rho) fail(errc::bad_argument, "needs rho");
    if (!basis) fail(errc::bad_argument, "needs basis");
    const SublatticeChain chain = kernel_chain(rho->rows);
    if (chain.kernels.front().cols() < 1)
      fail(errc::bad_argument, "rho has full rank; kernel is trivial");
    const CircleActionSection section = primitive_section(chain.kernels.front().col(0));

    std::vector<const LatticeBasis*> fibers{&*basis};
    if (traj && cfg.sampling.fibers > 1) {
      fibers.clear();
      const auto& nodes = traj->sample_nodes;
      const int want = std::min<int>(cfg.sampling.fibers, static_cast<int>(nodes.size()));
      for (int i = 0; i < want; ++i)
        fibers.push_back(&traj->bases[nodes[i * (nodes.size() - 1) / std::max(want - 1, 1)]]);
    }

    std::vector<std::future<FreeActionReport>> jobs;
    for (std::size_t i = 0; i < fibers.size(); ++i)
      jobs.push_back(std::async(std::launch::async, [&, i]() {
        return free_circle_action(entry, *fibers[i], section, cfg.tol,
                                  cfg.sampling.points_per_fiber, cfg.seed + i);
      }));
    json per_fiber = json::array();
    for (std::size_t i = 0; i < fibers.size(); ++i) {
      const FreeActionReport rep = jobs[i].get();
      per_fiber.push_back({{"value", vec_to_json(fibers[i]->value)},
                           {"points", rep.points},
                           {"max_closure_residual", rep.max_closure_residual},
                           {"min_freeness_separation", rep.min_freeness_separation}});
    }
    results["s1-action"] = {{"section", ivec_to_json(section.vector)},
                            {"minimal_period_checked", true},
                            {"fibers", per_fiber}};
  }

  void run_mapping_torus() {
    if (!mono || !traj) fail(errc::bad_argument, "needs monodromy trajectory");
    const MappingTorusReport rep =
        mapping_torus_check(*mono, *traj, cfg.sampling.mapping_torus_samples, cfg.seed);
    results["mapping-torus"] = {
        {"samples", rep.samples},
        {"max_identification_residual", rep.max_identification_residual},
        {"max_torus_commutation_residual", rep.max_torus_commutation_residual}};
  }

  void write_plots() {
    if (cfg.plot_dir.empty()) return;
    std::filesystem::create_directories(cfg.plot_dir);
    if (traj) {
      std::ofstream os(cfg.plot_dir + "/trajectory.csv");
      emit_trajectory_csv(*traj, os);
    }
    if (maslov)
      for (std::size_t i = 0; i < maslov->per_cycle.size(); ++i) {
        std::ofstream os(cfg.plot_dir + "/maslov_cycle_" + std::to_string(i + 1) + ".csv");
        emit_phase_csv(maslov->per_cycle[i], os);
      }
  }
};

}  // namespace

Report run_job(const JobConfig& cfg) {
  Pipeline pl(cfg);
  const std::string& job = cfg.job;
  const bool full = job == "full-verify";

  if (full) pl.stage("system-invariants", [&] { pl.run_system_check(); });

  const bool need_basis = true;
  bool have_basis = false;
  if (need_basis)
    have_basis = pl.stage("periods", [&] { pl.run_periods(job == "refine"); });

  const bool wants_loop = full || job == "monodromy" || job == "mapping-torus-check" ||
                          (job == "s1-action" && cfg.loop.has_value());
  bool have_mono = false;
  if (wants_loop && have_basis) {
    if (cfg.loop)
      have_mono = pl.stage("monodromy", [&] { pl.run_monodromy(); });
    else if (full)
      pl.skip("monodromy", "no loop configured");
    else
      pl.stage("monodromy", [&] { pl.run_monodromy(); });  // records the missing-loop error
  }

  const bool wants_maslov = full || job == "maslov" || job == "s1-action";
  if (wants_maslov && have_basis) {
    if (pl.entry.hamiltonian)
      pl.stage("maslov", [&] { pl.run_maslov(); });
    else
      pl.skip("maslov", "system is not Hamiltonian");
  }

  if (full || job == "s1-action") {
    bool have_rho = have_basis && pl.stage("rho", [&] { pl.resolve_rho(); });
    if (have_rho && have_mono)
      pl.stage("rho-invariance", [&] { pl.run_rho_invariance(); });
    else if (have_rho)
      pl.skip("rho-invariance", "no monodromy available");
    if (have_rho) {
      pl.stage("kernel-chain", [&] { pl.run_kernel_chain(); });
      pl.stage("s1-action", [&] { pl.run_s1_action(); });
    }
  }

  if (full || job == "mapping-torus-check") {
    if (have_mono)
      pl.stage("mapping-torus", [&] { pl.run_mapping_torus(); });
    else
      pl.skip("mapping-torus", "no monodromy available");
  }

  pl.write_plots();

  json tol = {{"abs_tol", cfg.tol.abs_tol},
              {"rel_tol", cfg.tol.rel_tol},
              {"newton_tol", cfg.tol.newton_tol},
              {"max_newton_iters", cfg.tol.max_newton_iters}};
  pl.diagnostics["tolerances_used"] = tol;
  pl.diagnostics["seed"] = cfg.seed;

  Report rep;
  rep.all_pass = true;
  for (const auto& [stage, verdict] : pl.verdicts.items())
    if (verdict == "fail") rep.all_pass = false;
  rep.doc = {{"schema_version", 1},
             {"tool", {{"name", "torlat"}, {"version", "0.1.0"}}},
             {"config", cfg.echo},
             {"results", pl.results},
             {"diagnostics", pl.diagnostics},
             {"verdicts", pl.verdicts}};
  return rep;
}

}  // namespace torlat
