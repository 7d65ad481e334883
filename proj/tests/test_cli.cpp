#include "torlat/jobs.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace torlat;
using nlohmann::json;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

json twist_config(double m) {
  return json{
      {"schema_version", 1},
      {"job", "full-verify"},
      {"system", {{"name", "synthetic-twist"}, {"params", {{"m", m}, {"center", {1.0, 1.0}}}}}},
      {"value", {1.5, 1.0}},
      {"loop", {{"circle", {{"center", {1.0, 1.0}}, {"radius", 0.5}, {"samples", 49}}}}},
      {"rho", {{0, 1}}},
      {"seed", 20240809}};
}

json iso_config() {
  return json{{"schema_version", 1},
              {"job", "full-verify"},
              {"system", {{"name", "iso-oscillator"}, {"params", {{"omega", {1.0}}}}}},
              {"value", {0.65, 0.5}},
              {"loop", {{"circle", {{"center", {0.5, 0.5}}, {"radius", 0.15}, {"samples", 24}}}}},
              {"seed", 7}};
}

}  // namespace

TEST_CASE("config validation errors") {
  CHECK_THROWS_AS(parse_job_config(json{{"job", "periods"}}), Error);
  CHECK_THROWS_AS(parse_job_config(json{{"job", "everything"},
                                        {"system", {{"name", "iso-oscillator"}}},
                                        {"value", {0.5, 0.5}}}),
                  Error);
  // monodromy without a loop is a config error
  CHECK_THROWS_AS(parse_job_config(json{{"job", "monodromy"},
                                        {"system", {{"name", "iso-oscillator"}}},
                                        {"value", {0.5, 0.5}}}),
                  Error);
  // refine without hints
  CHECK_THROWS_AS(parse_job_config(json{{"job", "refine"},
                                        {"system", {{"name", "iso-oscillator"}}},
                                        {"value", {0.5, 0.5}}}),
                  Error);
  try {
    parse_job_config(json{{"job", "periods"}});
  } catch (const Error& e) {
    CHECK(e.code() == errc::config_invalid);
  }
}

TEST_CASE("full-verify on synthetic-twist m=1: all pass, maslov skipped") {
  const JobConfig cfg = parse_job_config(twist_config(1.0));
  const Report rep = run_job(cfg);
  CHECK(rep.all_pass);
  const json& v = rep.doc["verdicts"];
  CHECK(v["system-invariants"] == "pass");
  CHECK(v["periods"] == "pass");
  CHECK(v["monodromy"] == "pass");
  CHECK(v["maslov"] == "skipped");
  CHECK(v["rho-invariance"] == "pass");
  CHECK(v["kernel-chain"] == "pass");
  CHECK(v["s1-action"] == "pass");
  CHECK(v["mapping-torus"] == "pass");
  const json& M = rep.doc["results"]["monodromy"]["entries"];
  CHECK(M[0][0] == 1);
  CHECK(M[0][1] == 1);
  CHECK(M[1][0] == 0);
  CHECK(M[1][1] == 1);
}

TEST_CASE("full-verify on iso-oscillator: identity monodromy, maslov (2,2)") {
  const JobConfig cfg = parse_job_config(iso_config());
  const Report rep = run_job(cfg);
  CHECK(rep.all_pass);
  const json& r = rep.doc["results"];
  CHECK(r["monodromy"]["entries"] == json::parse("[[1,0],[0,1]]"));
  CHECK(r["maslov"]["indices"] == json::parse("[2,2]"));
  CHECK(r["rho"]["source"] == "maslov");
  // every configured tolerance is echoed
  const json& tol = rep.doc["diagnostics"]["tolerances_used"];
  CHECK(tol.contains("abs_tol"));
  CHECK(tol.contains("rel_tol"));
  CHECK(tol.contains("newton_tol"));
  CHECK(tol.contains("max_newton_iters"));
  for (const auto& [stage, verdict] : rep.doc["verdicts"].items()) {
    const std::string s = verdict.get<std::string>();
    CHECK((s == "pass" || s == "fail" || s == "skipped"));
  }
}

TEST_CASE("reports are byte-identical for identical config and seed") {
  const JobConfig cfg = parse_job_config(twist_config(1.0));
  const Report a = run_job(cfg);
  const Report b = run_job(cfg);
  CHECK(a.doc.dump(2) == b.doc.dump(2));
}

TEST_CASE("refine job polishes hints without scanning") {
  json doc{{"job", "refine"},
           {"system", {{"name", "aniso-oscillator"}, {"params", {{"omega", {1.0, 2.0}}}}}},
           {"value", {0.4, 0.9}},
           {"hints", {{6.28, 0.001}, {0.001, 3.14}}},
           {"seed", 1}};
  const Report rep = run_job(parse_job_config(doc));
  CHECK(rep.all_pass);
  const json& basis = rep.doc["results"]["periods"]["basis"];
  Mat B(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) B(i, j) = basis[i][j].get<double>();
  Mat expect(2, 2);
  expect << kTwoPi, 0, 0, kTwoPi / 2;
  CHECK(oracle::same_lattice(B, expect, 1e-8));
}

TEST_CASE("module errors surface as fail verdicts") {
  json doc{{"job", "periods"},
           {"system", {{"name", "champagne-bottle"}}},
           {"value", {0.5, 0.8}},
           {"hints", {{0.1, 0.2}}},
           {"sampling", {{"scan_t_max", 0.5}}},  // scan box too small to find returns
           {"seed", 1}};
  const Report rep = run_job(parse_job_config(doc));
  CHECK_FALSE(rep.all_pass);
  CHECK(rep.doc["verdicts"]["periods"] == "fail");
  CHECK(rep.doc["results"]["periods"].contains("error"));
}

TEST_CASE("trajectory CSV matches the analytic twist interpolant") {
  auto tw = builtin_system("synthetic-twist", {{"m", {3.0}}});
  Vec c0(2);
  c0 << 1.5, 1.0;
  const auto B = detect_lattice_basis(tw, tw.fiber_seed(c0));
  Vec cen(2);
  cen << 1.0, 1.0;
  const auto path = LoopPath::circle(cen, 0.5, 49);
  const auto traj = continue_basis(tw, path, B);

  std::ostringstream os;
  emit_trajectory_csv(traj, os);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header.substr(0, 2) == "s,");

  std::size_t rows = 0;
  double phi = 0.0;
  std::string line;
  while (std::getline(is, line)) {
    ++rows;
    std::vector<double> vals;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
    // layout: s, value(2), anchor(4), basis column-major(4), residuals(2)
    REQUIRE(vals.size() == 13);
    double raw = std::atan2(vals[2] - 1.0, vals[1] - 1.0);
    while (raw - phi > M_PI) raw -= kTwoPi;
    while (raw - phi < -M_PI) raw += kTwoPi;
    phi = raw;
    CHECK(std::abs(vals[7] - kTwoPi) < 1e-8);        // basis(0,0)
    CHECK(std::abs(vals[9] - 3.0 * phi) < 1e-8);     // basis(0,1) = m * phi
    CHECK(std::abs(vals[10] - kTwoPi) < 1e-8);       // basis(1,1)
  }
  CHECK(rows == traj.bases.size());
  CHECK(rows >= path.samples.size());
}

TEST_CASE("constant-path CSV has constant columns") {
  auto an = builtin_system("aniso-oscillator", {{"omega", {1.0, 2.0}}});
  Vec c(2);
  c << 0.4, 0.9;
  const auto B = detect_lattice_basis(an, an.fiber_seed(c));
  LoopPath constant;
  constant.samples.assign(6, c);
  const auto traj = continue_basis(an, constant, B);
  std::ostringstream os;
  emit_trajectory_csv(traj, os);
  std::istringstream is(os.str());
  std::string line, first;
  std::getline(is, line);  // header
  std::getline(is, first);
  const auto strip_s = [](const std::string& row) { return row.substr(row.find(',')); };
  while (std::getline(is, line)) CHECK(strip_s(line) == strip_s(first));
}

TEST_CASE("1-DOF maslov phase trace ends 4 pi up") {
  auto osc = oracle::oscillator_1dof();
  auto S = SymplecticStructure::standard(1);
  Vec c(1);
  c << 0.5;
  Vec T(1);
  T << kTwoPi;
  const auto r = maslov_index(osc, osc.fiber_seed(c), T, S);
  std::ostringstream os;
  emit_phase_csv(r, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "s,unwrapped_phase");
  double last = 0;
  while (std::getline(is, line)) last = std::stod(line.substr(line.find(',') + 1));
  CHECK(std::abs(last - 2 * kTwoPi) < 1e-3);
}
