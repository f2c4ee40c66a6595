// wotgrid CLI: `dist` computes the weighted transport distance between two
// grid measures and reports a JSON run record; `verify` runs the property
// suites and emits machine-readable check records.
//
// Exit codes: 0 success / all checks pass, 1 input error, 2 dist did not
// converge (the report is still written).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "wot/experiments.hpp"
#include "wot/measure_io.hpp"
#include "wot/oracles.hpp"
#include "wot/solver.hpp"

namespace {

int env_threads() {
  if (const char* s = std::getenv("WOT_THREADS")) {
    const int n = std::atoi(s);
    if (n >= 1) return n;
  }
  return 1;
}

std::string slice_suffix(int k) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "_t%03d", k);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wotgrid: weighted Wasserstein distances on space-time grids"};
  app.require_subcommand(1);

  // ---- dist ----
  auto* dist = app.add_subcommand("dist", "compute the distance between two measures");
  std::string mu0_path, mu1_path, gamma_arg = "lebesgue", out_path, geodesic_path;
  double p = 2.0, alpha = 1.0;
  int nt = 32;
  wot::SolverConfig cfg;
  cfg.threads = env_threads();
  dist->add_option("--mu0", mu0_path, "first endpoint measure file")->required();
  dist->add_option("--mu1", mu1_path, "second endpoint measure file")->required();
  dist->add_option("--p", p, "exponent p > 1")->required();
  dist->add_option("--alpha", alpha, "mobility exponent in [0,1]")->required();
  dist->add_option("--nt", nt, "number of time intervals")->required();
  dist->add_option("--gamma", gamma_arg, "'lebesgue' or a measure file with gamma's density");
  dist->add_option("--iters", cfg.max_iters, "iteration budget");
  dist->add_option("--tol-obj", cfg.tol_objective, "objective stall tolerance");
  dist->add_option("--tol-con", cfg.tol_constraint, "constraint (DR gap) tolerance");
  dist->add_option("--step", cfg.step, "proximal step");
  dist->add_option("--relax", cfg.relax, "DR relaxation in (0,2)");
  dist->add_option("--seed", cfg.seed, "seed echoed into the report");
  dist->add_option("--threads", cfg.threads, "worker threads for the prox pass");
  dist->add_option("--out", out_path, "also write the JSON report here");
  dist->add_option("--geodesic", geodesic_path, "write geodesic slices to PATH_tNNN");

  // ---- verify ----
  auto* verify = app.add_subcommand("verify", "run a theorem-verification suite");
  std::string suite;
  long long seed = -1;
  wot::SuiteBudget budget;
  budget.threads = env_threads();
  verify->add_option("suite", suite, "suite name or 'all'")->required();
  verify->add_option("--seed", seed, "run a single seed instead of the default set");
  verify->add_option("--nx", budget.nx, "1D cells");
  verify->add_option("--nt", budget.nt, "time intervals");
  verify->add_option("--iters", budget.max_iters, "solver iteration budget");
  verify->add_option("--step", budget.step, "proximal step");
  verify->add_option("--threads", budget.threads, "worker threads");

  CLI11_PARSE(app, argc, argv);

  if (dist->parsed()) {
    try {
      const wot::MeasureField mu0 = wot::parse_measure(mu0_path);
      const wot::MeasureField mu1 = wot::parse_measure(mu1_path);
      if (!mu0.spec.same_space(mu1.spec))
        throw std::invalid_argument("mu0 and mu1 live on different grids");
      wot::GridSpec spec = mu0.spec;
      spec.nt = nt;
      spec.validate();

      wot::ReferenceMeasure gamma = wot::ReferenceMeasure::lebesgue(spec);
      if (gamma_arg != "lebesgue") {
        const wot::MeasureField gfield = wot::parse_measure(gamma_arg);
        if (!gfield.spec.same_space(spec))
          throw std::invalid_argument("gamma grid does not match the measures");
        gamma = wot::ReferenceMeasure::custom(spec, gfield.values);
      }
      const wot::ActionParams params{p, alpha};
      params.validate();

      const wot::GeodesicResult res = wot::solve_distance(mu0, mu1, gamma, params, spec, cfg);
      const nlohmann::json report = wot::run_report(res);
      std::cout << report.dump(2) << "\n";
      if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw std::runtime_error("cannot write report: " + out_path);
        f << report.dump(2) << "\n";
      }
      if (!geodesic_path.empty()) {
        const auto slices = wot::extract_geodesic(res, spec.nt + 1);
        for (size_t k = 0; k < slices.size(); ++k)
          wot::write_measure(geodesic_path + slice_suffix((int)k), slices[k]);
      }
      return res.converged ? 0 : 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }

  // verify
  try {
    std::vector<std::string> suites;
    if (suite == "all") {
      suites = wot::suite_names();
    } else {
      const auto& names = wot::suite_names();
      if (std::find(names.begin(), names.end(), suite) == names.end()) {
        std::cerr << "error: unknown suite '" << suite << "'; valid suites:";
        for (const auto& n : names) std::cerr << " " << n;
        std::cerr << " all\n";
        return 1;
      }
      suites = {suite};
    }

    nlohmann::json arr = nlohmann::json::array();
    bool all_pass = true;
    for (const auto& name : suites) {
      const std::vector<long long> seeds =
          seed >= 0 ? std::vector<long long>{seed} : wot::default_seeds(name);
      const auto records = wot::run_suite(name, seeds, budget);
      all_pass = all_pass && wot::suite_passes(records);
      for (const auto& r : records) arr.push_back(wot::to_json(r));
    }
    std::cout << arr.dump(2) << "\n";
    return all_pass ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
