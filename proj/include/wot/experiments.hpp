#pragma once

// Verification harness: each check instantiates one of the distance's
// structural properties (metric axioms, convexity, subadditivity, scaling,
// comparison bounds, geodesic certificates, heat-flow behavior, gradient
// structure, convolution monotonicity) on generated instances, runs the
// solver and oracles, and emits a pass/fail record with its margin.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wot/action.hpp"
#include "wot/grid.hpp"
#include "wot/oracles.hpp"
#include "wot/solver.hpp"

namespace wot {

// ---------------------------------------------------------------------------
// deterministic generators

/// Minimal deterministic RNG (splitmix64) so records never depend on the
/// standard library's distribution implementations.
struct Rng {
  uint64_t state;
  explicit Rng(uint64_t seed) : state(seed + 0x9e3779b97f4a7c15ULL) {}
  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() { return (next() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  int uniform_int(int a, int b) { return a + (int)(next() % (uint64_t)(b - a + 1)); }
};

struct Bump {
  double cx = 0.5, cy = 0.5, sigma = 0.08, weight = 1.0;
};

inline MeasureField make_measure(const GridSpec& spec, const std::vector<Bump>& bumps,
                                 double background = 0.0, double target_mass = 0.0) {
  MeasureField f;
  f.spec = spec;
  f.values.assign(spec.ncells(), background);
  for (int c = 0; c < spec.ncells(); ++c) {
    const double x = spec.cx(c), y = spec.cy(c);
    for (const auto& b : bumps) {
      double r2 = (x - b.cx) * (x - b.cx);
      if (spec.dim == 2) r2 += (y - b.cy) * (y - b.cy);
      f.values[c] += b.weight * std::exp(-0.5 * r2 / (b.sigma * b.sigma));
    }
  }
  if (target_mass > 0.0) {
    const double m = f.mass();
    for (double& v : f.values) v *= target_mass / m;
  }
  return f;
}

/// Smooth random mixture of 2-3 bumps kept well inside the box.
inline MeasureField random_measure(Rng& rng, const GridSpec& spec, double background,
                                   double target_mass) {
  const int nb = rng.uniform_int(2, 3);
  std::vector<Bump> bumps;
  const double lx = spec.x1 - spec.x0, ly = spec.y1 - spec.y0;
  for (int i = 0; i < nb; ++i) {
    Bump b;
    b.cx = spec.x0 + lx * rng.uniform(0.28, 0.72);
    b.cy = spec.dim == 2 ? spec.y0 + ly * rng.uniform(0.28, 0.72) : 0.5;
    b.sigma = rng.uniform(0.05, 0.09) * lx;
    b.weight = rng.uniform(0.5, 1.5);
    bumps.push_back(b);
  }
  return make_measure(spec, bumps, background, target_mass);
}

/// Equalize masses exactly by rescaling the second field.
inline void equalize_mass(const MeasureField& mu0, MeasureField& mu1) {
  const double s = mu0.mass() / mu1.mass();
  for (double& v : mu1.values) v *= s;
}

/// Mass-1 bump and its exact translate by an integer number of cells.
inline std::pair<MeasureField, MeasureField> translate_pair_1d(const GridSpec& spec,
                                                               double center, double sigma,
                                                               double delta,
                                                               double background = 0.0) {
  const int shift = (int)std::lround(delta / spec.dx());
  MeasureField mu0 = make_measure(spec, {{center, 0.5, sigma, 1.0}}, 0.0, 1.0);
  MeasureField mu1 = mu0;
  std::fill(mu1.values.begin(), mu1.values.end(), 0.0);
  for (int c = 0; c < spec.nx; ++c) {
    const int cc = c + shift;
    if (cc >= 0 && cc < spec.nx) mu1.values[cc] = mu0.values[c];
  }
  for (int c = 0; c < spec.nx; ++c) {
    mu0.values[c] += background;
    mu1.values[c] += background;
  }
  return {mu0, mu1};
}

// ---------------------------------------------------------------------------
// records

struct CheckRecord {
  std::string suite;
  std::string name;
  long long seed = 0;
  nlohmann::json instance;
  double left = 0.0;
  double right = 0.0;
  double rel_slack = 0.0;
  double abs_slack = 0.0;
  double margin = 0.0;
  bool pass = false;
  bool inconclusive = false;
  nlohmann::json diag;
};

inline CheckRecord make_record(std::string suite, std::string name, long long seed,
                               nlohmann::json instance, double left, double right,
                               double rel_slack, double abs_slack,
                               bool inconclusive = false, nlohmann::json diag = {}) {
  CheckRecord r;
  r.suite = std::move(suite);
  r.name = std::move(name);
  r.seed = seed;
  r.instance = std::move(instance);
  r.left = left;
  r.right = right;
  r.rel_slack = rel_slack;
  r.abs_slack = abs_slack;
  r.margin = right * (1.0 + rel_slack) + abs_slack - left;
  r.inconclusive = inconclusive;
  r.pass = !inconclusive && r.margin >= 0.0;
  r.diag = std::move(diag);
  return r;
}

inline nlohmann::json to_json(const CheckRecord& r) {
  return nlohmann::json{{"suite", r.suite},         {"check", r.name},
                        {"seed", r.seed},           {"instance", r.instance},
                        {"left", r.left},           {"right", r.right},
                        {"rel_slack", r.rel_slack}, {"abs_slack", r.abs_slack},
                        {"margin", r.margin},       {"pass", r.pass},
                        {"inconclusive", r.inconclusive}, {"diag", r.diag}};
}

inline bool suite_passes(const std::vector<CheckRecord>& records) {
  if (records.empty()) return false;
  size_t inconclusive = 0;
  for (const auto& r : records) {
    if (r.inconclusive) ++inconclusive;
    else if (!r.pass) return false;
  }
  return inconclusive * 10 <= records.size();
}

// ---------------------------------------------------------------------------
// budgets and suite-wide slack constants

struct SuiteBudget {
  int nx = 48;
  int nt = 16;
  int nx2 = 24;  // per-axis cells for 2D runs
  int nt2 = 10;
  int max_iters = 8000;
  double step = 0.25;
  double relax = 1.8;
  double tol_objective = 1e-8;
  double tol_constraint = 2e-6;
  double cg_tol = 1e-10;
  int threads = 1;

  SolverConfig solver() const {
    SolverConfig cfg;
    cfg.step = step;
    cfg.relax = relax;
    cfg.max_iters = max_iters;
    cfg.tol_objective = tol_objective;
    cfg.tol_constraint = tol_constraint;
    cfg.cg_tol = cg_tol;
    cfg.threads = threads;
    return cfg;
  }
  GridSpec grid1d() const { return GridSpec{1, nx, 1, 0.0, 1.0, 0.0, 1.0, nt}; }
  GridSpec grid2d() const { return GridSpec{2, nx2, nx2, 0.0, 1.0, 0.0, 1.0, nt2}; }
};

// Slack used to turn exact inequalities between true distances into
// testable inequalities between solver approximations. All relative.
namespace slack {
inline constexpr double metric_identity_abs = 1e-4;
inline constexpr double metric_symmetry = 0.01;
inline constexpr double metric_triangle = 0.01;
inline constexpr double convexity_mixture = 0.01;
inline constexpr double subadditivity = 0.02;
inline constexpr double background = 0.01;
inline constexpr double scaling_joint = 0.02;   // pinned by the scaling identity
inline constexpr double scaling_measure = 0.01;
inline constexpr double gamma_monotone = 0.005;
inline constexpr double comparisons = 0.05;
inline constexpr double constant_speed = 0.05;  // max/min action ratio - 1
inline constexpr double mass_spread_abs = 1e-8;
inline constexpr double entropy_chord = 0.01;
inline constexpr double heat_contraction = 0.005;
inline constexpr double heat_energy = 0.05;
inline constexpr double heat_evi = 0.10;
inline constexpr double curl_ratio = 0.10;
inline constexpr double convolution = 0.005;
}  // namespace slack

namespace detail {

inline nlohmann::json instance_json(const GridSpec& g, const ActionParams& ap,
                                    long long seed) {
  nlohmann::json j{{"nx", g.nx}, {"nt", g.nt}, {"dim", g.dim}, {"p", ap.p},
                   {"alpha", ap.alpha}, {"seed", seed}};
  if (g.dim == 2) j["ny"] = g.ny;
  return j;
}

struct SolveOutcome {
  GeodesicResult res;
  bool ok;
};

inline SolveOutcome run_solver(const MeasureField& mu0, const MeasureField& mu1,
                               const ReferenceMeasure& gamma, const ActionParams& ap,
                               const GridSpec& spec, const SolverConfig& cfg) {
  GeodesicResult r = solve_distance(mu0, mu1, gamma, ap, spec, cfg);
  return {std::move(r), true};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// metric axioms (identity, symmetry, triangle)

inline std::vector<CheckRecord> check_metric_axioms(long long seed, const SuiteBudget& B) {
  const GridSpec spec = B.grid1d();
  const ActionParams ap{2.0, 0.5};
  const auto gamma = ReferenceMeasure::lebesgue(spec);
  const auto cfg = B.solver();
  Rng rng(0xA0 + (uint64_t)seed);

  MeasureField mu0 = random_measure(rng, spec, 0.1, 1.0);
  MeasureField mu1 = random_measure(rng, spec, 0.1, 1.0);
  MeasureField mu2 = random_measure(rng, spec, 0.1, 1.0);
  equalize_mass(mu0, mu1);
  equalize_mass(mu0, mu2);

  const auto inst = detail::instance_json(spec, ap, seed);
  std::vector<CheckRecord> out;

  auto rid = solve_distance(mu0, mu0, gamma, ap, spec, cfg);
  out.push_back(make_record("metric", "identity", seed, inst, rid.distance, 0.0, 0.0,
                            slack::metric_identity_abs, !rid.converged,
                            {{"iterations", rid.iterations}}));

  auto r01 = solve_distance(mu0, mu1, gamma, ap, spec, cfg);
  auto r10 = solve_distance(mu1, mu0, gamma, ap, spec, cfg);
  const double wmax = std::max(r01.distance, r10.distance);
  out.push_back(make_record("metric", "symmetry", seed, inst,
                            std::abs(r01.distance - r10.distance) / std::max(wmax, 1e-300),
                            0.0, 0.0, 2.0 * slack::metric_symmetry,
                            !(r01.converged && r10.converged),
                            {{"w01", r01.distance}, {"w10", r10.distance}}));

  auto r12 = solve_distance(mu1, mu2, gamma, ap, spec, cfg);
  auto r02 = solve_distance(mu0, mu2, gamma, ap, spec, cfg);
  out.push_back(make_record(
      "metric", "triangle", seed, inst, r02.distance, r01.distance + r12.distance,
      3.0 * slack::metric_triangle, 0.0,
      !(r01.converged && r12.converged && r02.converged),
      {{"w01", r01.distance}, {"w12", r12.distance}, {"w02", r02.distance}}));
  return out;
}

// ---------------------------------------------------------------------------
// convexity of W^p in the endpoint pair, subadditivity, common background

inline std::vector<CheckRecord> check_convexity_subadditivity(long long seed,
                                                              const SuiteBudget& B) {
  const GridSpec spec = B.grid1d();
  const ActionParams ap{2.0, 0.5};
  const auto gamma = ReferenceMeasure::lebesgue(spec);
  const auto cfg = B.solver();
  Rng rng(0xB0 + (uint64_t)seed);

  MeasureField a0 = random_measure(rng, spec, 0.1, 1.0);
  MeasureField a1 = random_measure(rng, spec, 0.1, 1.0);
  MeasureField b0 = random_measure(rng, spec, 0.1, 1.3);
  MeasureField b1 = random_measure(rng, spec, 0.1, 1.3);
  equalize_mass(a0, a1);
  equalize_mass(b0, b1);

  const auto inst = detail::instance_json(spec, ap, seed);
  std::vector<CheckRecord> out;

  auto rA = solve_distance(a0, a1, gamma, ap, spec, cfg);
  auto rB = solve_distance(b0, b1, gamma, ap, spec, cfg);
  bool conclusive = rA.converged && rB.converged;

  double worst_margin = kInf;
  double wl = 0.0, wr = 0.0;
  nlohmann::json taus = nlohmann::json::array();
  for (double tau : {0.25, 0.5, 0.75}) {
    MeasureField m0 = a0, m1 = a1;
    for (int c = 0; c < spec.ncells(); ++c) {
      m0.values[c] = (1 - tau) * a0.values[c] + tau * b0.values[c];
      m1.values[c] = (1 - tau) * a1.values[c] + tau * b1.values[c];
    }
    auto rt = solve_distance(m0, m1, gamma, ap, spec, cfg);
    conclusive = conclusive && rt.converged;
    const double lhs = rt.distance_p;
    const double rhs = (1 - tau) * rA.distance_p + tau * rB.distance_p;
    taus.push_back({{"tau", tau}, {"lhs", lhs}, {"rhs", rhs}});
    const double m = rhs * (1 + slack::convexity_mixture) - lhs;
    if (m < worst_margin) {
      worst_margin = m;
      wl = lhs;
      wr = rhs;
    }
  }
  out.push_back(make_record("convexity", "mixture", seed, inst, wl, wr,
                            slack::convexity_mixture, 0.0, !conclusive, {{"taus", taus}}));

  MeasureField s0 = a0, s1 = a1;
  for (int c = 0; c < spec.ncells(); ++c) {
    s0.values[c] = a0.values[c] + b0.values[c];
    s1.values[c] = a1.values[c] + b1.values[c];
  }
  auto rS = solve_distance(s0, s1, gamma, ap, spec, cfg);
  out.push_back(make_record("convexity", "subadditive_sum", seed, inst, rS.distance,
                            rA.distance + rB.distance, slack::subadditivity, 0.0,
                            !(rA.converged && rB.converged && rS.converged),
                            {{"wA", rA.distance}, {"wB", rB.distance}}));

  MeasureField g0 = a0, g1 = a1;
  for (int c = 0; c < spec.ncells(); ++c) {
    g0.values[c] += 1.0;
    g1.values[c] += 1.0;
  }
  auto rBg = solve_distance(g0, g1, gamma, ap, spec, cfg);
  out.push_back(make_record("convexity", "background", seed, inst, rBg.distance, rA.distance,
                            slack::background, 0.0, !(rA.converged && rBg.converged),
                            {{"w_plain", rA.distance}, {"w_background", rBg.distance}}));
  return out;
}

// ---------------------------------------------------------------------------
// rescaling identity, measure-scaling branches, gamma monotonicity

inline std::vector<CheckRecord> check_scaling_monotonicity(long long seed,
                                                           const SuiteBudget& B) {
  const GridSpec spec = B.grid1d();
  const ActionParams ap{2.0, 0.5};
  const auto gamma = ReferenceMeasure::lebesgue(spec);
  const auto cfg = B.solver();
  Rng rng(0xC0 + (uint64_t)seed);

  MeasureField mu0 = random_measure(rng, spec, 0.1, 1.0);
  MeasureField mu1 = random_measure(rng, spec, 0.1, 1.0);
  equalize_mass(mu0, mu1);
  const auto inst = detail::instance_json(spec, ap, seed);
  std::vector<CheckRecord> out;

  auto base = solve_distance(mu0, mu1, gamma, ap, spec, cfg);
  bool conclusive = base.converged;

  // W^p_{phi,l*gamma}(l mu0, l mu1) = l W^p_{phi,gamma}(mu0, mu1)
  double worst = 0.0;
  nlohmann::json joint = nlohmann::json::array();
  for (double lam : {0.5, 2.0}) {
    MeasureField s0 = mu0, s1 = mu1;
    for (int c = 0; c < spec.ncells(); ++c) {
      s0.values[c] *= lam;
      s1.values[c] *= lam;
    }
    auto gl = ReferenceMeasure::custom(spec, std::vector<double>(spec.ncells(), lam));
    auto r = solve_distance(s0, s1, gl, ap, spec, cfg);
    conclusive = conclusive && r.converged;
    const double ratio = r.distance_p / (lam * base.distance_p);
    joint.push_back({{"lambda", lam}, {"ratio", ratio}});
    worst = std::max(worst, std::abs(ratio - 1.0));
  }
  out.push_back(make_record("scaling", "joint_rescale", seed, inst, worst, 0.0, 0.0,
                            slack::scaling_joint, !conclusive, {{"ratios", joint}}));

  // fixed gamma: W^p(l mu) <= l^p W^p for l >= 1, <= l W^p for l <= 1
  double worst_margin = kInf, wl = 0.0, wr = 0.0;
  bool conc2 = base.converged;
  nlohmann::json meas = nlohmann::json::array();
  for (double lam : {0.5, 2.0}) {
    MeasureField s0 = mu0, s1 = mu1;
    for (int c = 0; c < spec.ncells(); ++c) {
      s0.values[c] *= lam;
      s1.values[c] *= lam;
    }
    auto r = solve_distance(s0, s1, gamma, ap, spec, cfg);
    conc2 = conc2 && r.converged;
    const double bound =
        (lam >= 1.0 ? std::pow(lam, ap.p) : lam) * base.distance_p;
    meas.push_back({{"lambda", lam}, {"lhs", r.distance_p}, {"rhs", bound}});
    const double m = bound * (1 + slack::scaling_measure) - r.distance_p;
    if (m < worst_margin) {
      worst_margin = m;
      wl = r.distance_p;
      wr = bound;
    }
  }
  out.push_back(make_record("scaling", "measure_rescale", seed, inst, wl, wr,
                            slack::scaling_measure, 0.0, !conc2, {{"cases", meas}}));

  auto g2 = ReferenceMeasure::custom(spec, std::vector<double>(spec.ncells(), 2.0));
  auto r2 = solve_distance(mu0, mu1, g2, ap, spec, cfg);
  out.push_back(make_record("scaling", "gamma_monotone", seed, inst, r2.distance,
                            base.distance, slack::gamma_monotone, 0.0,
                            !(base.converged && r2.converged),
                            {{"w_gamma", base.distance}, {"w_2gamma", r2.distance}}));
  return out;
}

// ---------------------------------------------------------------------------
// comparison bounds against W_{p/theta}, W_p and the dual Sobolev norm

inline std::vector<CheckRecord> check_comparisons(long long seed, const SuiteBudget& B) {
  const GridSpec spec = B.grid1d();
  const ActionParams ap{2.0, 0.5};  // theta = 1.5, kappa = 4
  const auto gamma = ReferenceMeasure::lebesgue(spec);
  const auto cfg = B.solver();
  Rng rng(0xD0 + (uint64_t)seed);

  // densities bounded away from zero: background keeps them in ~[0.5, 3]
  MeasureField mu0 = random_measure(rng, spec, 0.5, 1.5);
  MeasureField mu1 = random_measure(rng, spec, 0.5, 1.5);
  equalize_mass(mu0, mu1);
  const auto inst = detail::instance_json(spec, ap, seed);
  std::vector<CheckRecord> out;

  auto r = solve_distance(mu0, mu1, gamma, ap, spec, cfg);
  const bool inc = !r.converged;
  const double th = ap.theta(), kappa = *ap.kappa();

  // W_{p/theta} <= gamma(box)^(1/kappa) W_{p,alpha}
  const double w_low = wasserstein_1d(mu0, mu1, ap.p / th);
  const double gbox = gamma.total();
  out.push_back(make_record("comparisons", "lower_wasserstein", seed, inst, w_low,
                            std::pow(gbox, 1.0 / kappa) * r.distance, slack::comparisons,
                            0.0, inc, {{"w_p_over_theta", w_low}, {"solver", r.distance}}));

  // W_{p,alpha} <= M^((theta-1)/p) W_p with M an upper density bound
  double M = 0.0, L = kInf;
  for (int c = 0; c < spec.ncells(); ++c) {
    M = std::max({M, mu0.values[c], mu1.values[c]});
    L = std::min({L, mu0.values[c], mu1.values[c]});
  }
  const double w_p = wasserstein_1d(mu0, mu1, ap.p);
  out.push_back(make_record("comparisons", "upper_wasserstein", seed, inst, r.distance,
                            std::pow(M, (th - 1.0) / ap.p) * w_p, slack::comparisons, 0.0,
                            inc, {{"density_max", M}, {"w_p", w_p}}));

  // W_{2,alpha} <= L^(-alpha/2) |mu0 - mu1|_{W^-1,2} with L a lower bound
  const auto sob = sobolev_dual_12(mu0, mu1);
  out.push_back(make_record("comparisons", "upper_sobolev", seed, inst, r.distance,
                            std::pow(L, -ap.alpha / 2.0) * sob.norm, slack::comparisons,
                            0.0, inc, {{"density_min", L}, {"sobolev", sob.norm}}));

  // at alpha = 0 the kappa*-Sobolev bound degenerates to an identity
  out.push_back(make_record("comparisons", "sobolev_identity_alpha0", seed, inst, 0.0, 0.0,
                            0.0, 0.0, false,
                            {{"note", "kappa* = p at alpha = 0; the bound coincides with "
                                      "the alpha = 0 distance definition"}}));
  return out;
}

// ---------------------------------------------------------------------------
// geodesic certificates: constant speed, mass constancy, entropy convexity

inline std::vector<CheckRecord> check_geodesic_properties(const GeodesicResult& r,
                                                          const ActionParams& ap,
                                                          long long seed,
                                                          const nlohmann::json& inst) {
  std::vector<CheckRecord> out;
  const bool inc = !r.converged;

  double lo = kInf, hi = 0.0;
  for (double v : r.per_time_action) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double ratio = hi > 0.0 ? hi / std::max(lo, 1e-300) : 1.0;
  out.push_back(make_record("geodesic", "constant_speed", seed, inst, ratio, 1.0,
                            slack::constant_speed, 0.0, inc,
                            {{"phi_min", lo}, {"phi_max", hi}}));

  out.push_back(make_record("geodesic", "mass_constancy", seed, inst, r.mass_spread(), 0.0,
                            0.0, slack::mass_spread_abs, inc,
                            {{"mass0", r.mass_per_slice.front()}}));

  // entropy chord inequality at every interior slice
  if (ap.alpha > 0.0 && ap.alpha < 1.0) {
    const int NT = r.spec.nt, NC = r.spec.ncells();
    MeasureField slice;
    slice.spec = r.spec;
    slice.values.assign(NC, 0.0);
    auto psi_at = [&](int k) {
      for (int c = 0; c < NC; ++c)
        slice.values[c] = std::max(r.densities[(size_t)k * NC + c], 0.0);
      return entropy_Psi(ap.alpha, slice);
    };
    const double e0 = psi_at(0), e1 = psi_at(NT);
    double wl = 0.0, wr = 1.0, worst = kInf;
    for (int k = 1; k < NT; ++k) {
      const double t = (double)k / NT;
      const double lhs = psi_at(k);
      const double rhs = (1 - t) * e0 + t * e1;
      const double m = rhs * (1 + slack::entropy_chord) - lhs;
      if (m < worst) {
        worst = m;
        wl = lhs;
        wr = rhs;
      }
    }
    out.push_back(make_record("geodesic", "entropy_convexity", seed, inst, wl, wr,
                              slack::entropy_chord, 0.0, inc,
                              {{"psi0", e0}, {"psi1", e1}}));
  }
  return out;
}

inline std::vector<CheckRecord> run_geodesic_suite(long long seed, const SuiteBudget& B) {
  const GridSpec spec = B.grid1d();
  const auto gamma = ReferenceMeasure::lebesgue(spec);
  const auto cfg = B.solver();
  std::vector<CheckRecord> out;
  for (double alpha : {0.3, 0.5, 0.8}) {
    const ActionParams ap{2.0, alpha};
    // two offset bumps of slightly different width
    MeasureField mu0 = make_measure(spec, {{0.32, 0.5, 0.060, 1.0}}, 0.05, 1.0);
    MeasureField mu1 = make_measure(spec, {{0.62, 0.5, 0.075, 1.0}}, 0.05, 1.0);
    equalize_mass(mu0, mu1);
    auto r = solve_distance(mu0, mu1, gamma, ap, spec, cfg);
    auto recs = check_geodesic_properties(r, ap, seed, detail::instance_json(spec, ap, seed));
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// heat flow: distance contraction, energy identity, EVI

namespace detail {

/// Dirichlet-type action Phi_{2,alpha}(u, grad u) with face-averaged density.
inline double dirichlet_action(const MeasureField& u, double alpha) {
  const GridSpec& g = u.spec;
  const ActionParams ap{2.0, alpha};
  std::vector<double> grad(g.nfaces());
  face_gradient(g, u.values, grad);
  double acc = 0.0;
  auto face_pair = [&](int f, int ax) {
    // recover the two adjacent cells from the face index
    if (g.dim == 1) return std::pair<int, int>{f, f + 1};
    if (ax == 0) {
      const int ix = f / g.ny, iy = f % g.ny;
      return std::pair<int, int>{g.cell(ix, iy), g.cell(ix + 1, iy)};
    }
    const int fr = f - g.nfaces_x();
    const int ix = fr / (g.ny - 1), iy = fr % (g.ny - 1);
    return std::pair<int, int>{g.cell(ix, iy), g.cell(ix, iy + 1)};
  };
  for (int f = 0; f < g.nfaces(); ++f) {
    const int ax = (g.dim == 2 && f >= g.nfaces_x()) ? 1 : 0;
    const auto [c0, c1] = face_pair(f, ax);
    const double uf = 0.5 * (u.values[c0] + u.values[c1]);
    const double val = phi_eval_norm(ap, uf, std::abs(grad[f]));
    if (std::isfinite(val)) acc += val;
  }
  return acc * g.vol();
}

}  // namespace detail

inline std::vector<CheckRecord> check_heat_flow(long long seed, const SuiteBudget& B) {
  const GridSpec spec = B.grid1d();
  const ActionParams ap{2.0, 0.5};
  const auto gamma = ReferenceMeasure::lebesgue(spec);
  const auto cfg = B.solver();
  const double tau = 1e-3;
  const int nsteps = 5;
  const auto inst = detail::instance_json(spec, ap, seed);
  Rng rng(0xE0 + (uint64_t)seed);
  (void)rng;

  // wide bumps: the per-step energy balance degrades like tau over the
  // diffusion timescale sigma^2, so keep sigma >= 0.1
  MeasureField mu0 = make_measure(spec, {{0.35, 0.5, 0.11, 1.0}}, 0.3, 1.5);
  MeasureField mu1 = make_measure(spec, {{0.62, 0.5, 0.13, 1.0}}, 0.3, 1.5);
  equalize_mass(mu0, mu1);
  MeasureField sigma_ref = make_measure(spec, {{0.5, 0.5, 0.16, 1.0}}, 0.3, 0.0);
  {
    const double s = mu0.mass() / sigma_ref.mass();
    for (double& v : sigma_ref.values) v *= s;
  }

  std::vector<MeasureField> flow0{mu0}, flow1{mu1};
  for (int j = 0; j < nsteps; ++j) {
    flow0.push_back(heat_step(flow0.back(), tau));
    flow1.push_back(heat_step(flow1.back(), tau));
  }

  std::vector<CheckRecord> out;
  bool conclusive = true;
  std::vector<double> w(nsteps + 1);
  for (int j = 0; j <= nsteps; ++j) {
    auto r = solve_distance(flow0[j], flow1[j], gamma, ap, spec, cfg);
    conclusive = conclusive && r.converged;
    w[j] = r.distance;
  }
  double wl = 0.0, wr = 1.0, worst = kInf;
  for (int j = 0; j < nsteps; ++j) {
    const double m = w[j] * (1 + slack::heat_contraction) - w[j + 1];
    if (m < worst) {
      worst = m;
      wl = w[j + 1];
      wr = w[j];
    }
  }
  out.push_back(make_record("heat", "contraction", seed, inst, wl, wr,
                            slack::heat_contraction, 0.0, !conclusive, {{"w", w}}));

  // energy identity along the flow of mu0:
  // Psi(u_{j+1}) - Psi(u_j) + tau Phi_{2,alpha}(u_mid, grad u_mid) = 0
  double el = 0.0, eabs = 0.0;
  nlohmann::json esteps = nlohmann::json::array();
  for (int j = 0; j < nsteps; ++j) {
    const double psi0 = entropy_Psi(ap.alpha, flow0[j]);
    const double psi1 = entropy_Psi(ap.alpha, flow0[j + 1]);
    MeasureField mid = flow0[j];
    for (int c = 0; c < spec.ncells(); ++c)
      mid.values[c] = 0.5 * (flow0[j].values[c] + flow0[j + 1].values[c]);
    const double diss = tau * detail::dirichlet_action(mid, ap.alpha);
    const double defect = std::abs((psi1 - psi0) + diss);
    const double scale = std::max(std::abs(psi1 - psi0), diss);
    esteps.push_back({{"dpsi", psi1 - psi0}, {"dissipation", diss}});
    if (defect - slack::heat_energy * scale > el - eabs) {
      el = defect;
      eabs = slack::heat_energy * scale;
    }
  }
  out.push_back(make_record("heat", "energy_identity", seed, inst, el, 0.0, 0.0, eabs,
                            false, {{"steps", esteps}}));

  // EVI: (W^2(u_{j+1}, sigma) - W^2(u_j, sigma)) / (2 tau) + Psi(u_{j+1})
  //      <= Psi(sigma) + slack
  std::vector<double> wsig(nsteps + 1);
  bool conc_evi = true;
  for (int j = 0; j <= nsteps; ++j) {
    auto r = solve_distance(flow0[j], sigma_ref, gamma, ap, spec, cfg);
    conc_evi = conc_evi && r.converged;
    wsig[j] = r.distance;
  }
  const double psi_sigma = entropy_Psi(ap.alpha, sigma_ref);
  double evil = 0.0, evir = 0.0, evia = 0.0, worst_evi = kInf;
  for (int j = 0; j < nsteps; ++j) {
    const double quot = (wsig[j + 1] * wsig[j + 1] - wsig[j] * wsig[j]) / (2.0 * tau);
    const double lhs = quot + entropy_Psi(ap.alpha, flow0[j + 1]);
    const double scale = std::max({std::abs(lhs), std::abs(psi_sigma), 1e-12});
    const double m = psi_sigma + slack::heat_evi * scale - lhs;
    if (m < worst_evi) {
      worst_evi = m;
      evil = lhs;
      evir = psi_sigma;
      evia = slack::heat_evi * scale;
    }
  }
  out.push_back(make_record("heat", "evi", seed, inst, evil, evir, 0.0, evia, !conc_evi,
                            {{"w_sigma", wsig}}));
  return out;
}

// ---------------------------------------------------------------------------
// gradient structure: j_p(v) is (discretely) curl-free where the density
// is positive

struct OptimalVelocity {
  GridSpec spec;
  std::vector<double> v;       // ncells * 2
  std::vector<uint8_t> valid;  // density above threshold
  std::vector<double> weight;  // h(rho) g vol per cell
};

inline OptimalVelocity optimal_velocity(const GeodesicResult& r,
                                        const ReferenceMeasure& gamma,
                                        const ActionParams& ap, double eps_frac = 1e-6) {
  const GridSpec& g = r.spec;
  const int NC = g.ncells(), NT = g.nt, NF = g.nfaces();
  const int k = NT / 2;
  PathVariables U;
  U.u.assign(r.densities.begin(), r.densities.end());
  U.m.assign(r.momenta.begin(), r.momenta.end());
  const CenteredVariables V = interpolate(g, U);

  double rho_max = 0.0;
  std::vector<double> rho(NC);
  for (int c = 0; c < NC; ++c) {
    rho[c] = V.a[(size_t)k * NC + c] / gamma.g[c];
    rho_max = std::max(rho_max, rho[c]);
  }
  const double eps = eps_frac * rho_max;

  OptimalVelocity ov;
  ov.spec = g;
  ov.v.assign((size_t)NC * 2, 0.0);
  ov.valid.assign(NC, 0);
  ov.weight.assign(NC, 0.0);
  (void)NF;
  for (int c = 0; c < NC; ++c) {
    if (!(rho[c] > eps)) continue;
    ov.valid[c] = 1;
    const double h = std::pow(rho[c], ap.alpha);
    ov.weight[c] = h * gamma.g[c] * g.vol();
    for (int ax = 0; ax < g.dim; ++ax) {
      const double w = V.b[((size_t)k * NC + c) * g.dim + ax] / gamma.g[c];
      ov.v[(size_t)c * 2 + ax] = w / h;
    }
  }
  return ov;
}

struct CurlDiagnostic {
  double ratio = 0.0;
  double curl_norm = 0.0;
  double field_norm = 0.0;
  int corners = 0;
};

inline CurlDiagnostic curl_diagnostic(const OptimalVelocity& ov, const ActionParams& ap) {
  const GridSpec& g = ov.spec;
  if (g.dim != 2) throw std::invalid_argument("curl_diagnostic: 2D only");
  // p-duality image j_p(v) = |v|^(p-2) v
  std::vector<double> j((size_t)g.ncells() * 2, 0.0);
  double den = 0.0;
  for (int c = 0; c < g.ncells(); ++c) {
    if (!ov.valid[c]) continue;
    const double vx = ov.v[(size_t)c * 2], vy = ov.v[(size_t)c * 2 + 1];
    const double vn = std::hypot(vx, vy);
    const double f = vn > 0.0 ? std::pow(vn, ap.p - 2.0) : 0.0;
    j[(size_t)c * 2] = f * vx;
    j[(size_t)c * 2 + 1] = f * vy;
    den += ov.weight[c] * (j[(size_t)c * 2] * j[(size_t)c * 2] +
                           j[(size_t)c * 2 + 1] * j[(size_t)c * 2 + 1]);
  }
  CurlDiagnostic out;
  double num = 0.0;
  for (int ix = 0; ix + 1 < g.nx; ++ix)
    for (int iy = 0; iy + 1 < g.ny; ++iy) {
      const int c00 = g.cell(ix, iy), c10 = g.cell(ix + 1, iy);
      const int c01 = g.cell(ix, iy + 1), c11 = g.cell(ix + 1, iy + 1);
      if (!(ov.valid[c00] && ov.valid[c10] && ov.valid[c01] && ov.valid[c11])) continue;
      const double curl =
          (j[(size_t)c10 * 2 + 1] + j[(size_t)c11 * 2 + 1] - j[(size_t)c00 * 2 + 1] -
           j[(size_t)c01 * 2 + 1]) /
              (2.0 * g.dx()) -
          (j[(size_t)c01 * 2] + j[(size_t)c11 * 2] - j[(size_t)c00 * 2] -
           j[(size_t)c10 * 2]) /
              (2.0 * g.dy());
      const double w =
          0.25 * (ov.weight[c00] + ov.weight[c10] + ov.weight[c01] + ov.weight[c11]);
      num += w * curl * curl;
      ++out.corners;
    }
  if (out.corners == 0) throw std::invalid_argument("curl_diagnostic: evaluation set empty");
  out.curl_norm = std::sqrt(num);
  out.field_norm = std::sqrt(den);
  out.ratio = out.curl_norm / std::max(out.field_norm, 1e-300);
  return out;
}

inline std::vector<CheckRecord> check_gradient_structure(long long seed,
                                                         const SuiteBudget& B) {
  const GridSpec spec = B.grid2d();
  const auto gamma = ReferenceMeasure::lebesgue(spec);
  auto cfg = B.solver();
  std::vector<CheckRecord> out;

  auto run_case = [&](const std::string& name, const MeasureField& mu0,
                      const MeasureField& mu1, const ActionParams& ap) {
    auto r = solve_distance(mu0, mu1, gamma, ap, spec, cfg);
    const auto ov = optimal_velocity(r, gamma, ap);
    const auto cd = curl_diagnostic(ov, ap);
    out.push_back(make_record("gradient2d", name, seed,
                              detail::instance_json(spec, ap, seed), cd.ratio, 0.0, 0.0,
                              slack::curl_ratio, !r.converged,
                              {{"curl_norm", cd.curl_norm},
                               {"field_norm", cd.field_norm},
                               {"corners", cd.corners}}));
  };

  // radial expansion between concentric bumps: the optimal field is radial
  MeasureField r0 = make_measure(spec, {{0.5, 0.5, 0.11, 1.0}}, 0.02, 1.0);
  MeasureField r1 = make_measure(spec, {{0.5, 0.5, 0.17, 1.0}}, 0.02, 1.0);
  equalize_mass(r0, r1);
  run_case("radial", r0, r1, ActionParams{2.0, 0.5});

  // classical translate: constant velocity on the support
  MeasureField t0 = make_measure(spec, {{0.38, 0.40, 0.09, 1.0}}, 0.0, 1.0);
  MeasureField t1 = make_measure(spec, {{0.58, 0.60, 0.09, 1.0}}, 0.0, 1.0);
  equalize_mass(t0, t1);
  run_case("translate_alpha1", t0, t1, ActionParams{2.0, 1.0});

  // random converged pair, telemetry for the same bound
  Rng rng(0xF0 + (uint64_t)seed);
  MeasureField a = random_measure(rng, spec, 0.05, 1.0);
  MeasureField b = random_measure(rng, spec, 0.05, 1.0);
  equalize_mass(a, b);
  run_case("random_pair", a, b, ActionParams{2.0, 0.5});
  return out;
}

// ---------------------------------------------------------------------------
// convolution monotonicity with the 3-tap kernel [1/4, 1/2, 1/4]

/// Cell-centred smoothing, zero-flux reflection at the boundary
/// (mass-preserving; fixes constants).
inline std::vector<double> convolve_cells(const GridSpec& g, const std::vector<double>& u) {
  std::vector<double> out(u.size());
  auto pass_x = [&](const std::vector<double>& in, std::vector<double>& res) {
    for (int c = 0; c < g.ncells(); ++c) {
      const int ix = g.cell_ix(c), iy = g.cell_iy(c);
      const double lo = in[g.cell(std::max(ix - 1, 0), iy)];
      const double hi = in[g.cell(std::min(ix + 1, g.nx - 1), iy)];
      res[c] = 0.25 * lo + 0.5 * in[c] + 0.25 * hi;
    }
  };
  pass_x(u, out);
  if (g.dim == 2) {
    std::vector<double> tmp = out;
    for (int c = 0; c < g.ncells(); ++c) {
      const int ix = g.cell_ix(c), iy = g.cell_iy(c);
      const double lo = tmp[g.cell(ix, std::max(iy - 1, 0))];
      const double hi = tmp[g.cell(ix, std::min(iy + 1, g.ny - 1))];
      out[c] = 0.25 * lo + 0.5 * tmp[c] + 0.25 * hi;
    }
  }
  return out;
}

inline MeasureField convolve(const MeasureField& mu) {
  MeasureField out = mu;
  out.values = convolve_cells(mu.spec, mu.values);
  return out;
}

inline std::vector<CheckRecord> check_convolution_monotonicity(long long seed,
                                                               const SuiteBudget& B) {
  const GridSpec spec = B.grid1d();
  const ActionParams ap{2.0, 0.5};
  const auto cfg = B.solver();
  const auto inst = detail::instance_json(spec, ap, seed);

  auto [mu0, mu1] = translate_pair_1d(spec, 0.35, 0.06, 0.25, 0.05);
  equalize_mass(mu0, mu1);
  auto gam = ReferenceMeasure::lebesgue(spec);

  std::vector<double> w;
  MeasureField a = mu0, b = mu1;
  ReferenceMeasure gk = gam;
  bool conclusive = true;
  for (int applications = 0; applications <= 2; ++applications) {
    auto r = solve_distance(a, b, gk, ap, spec, cfg);
    conclusive = conclusive && r.converged;
    w.push_back(r.distance);
    a = convolve(a);
    b = convolve(b);
    gk = ReferenceMeasure::custom(spec, convolve_cells(spec, gk.g));
  }

  std::vector<CheckRecord> out;
  out.push_back(make_record("convolution", "monotone_once", seed, inst, w[1], w[0],
                            slack::convolution, 0.0, !conclusive, {{"w", w}}));
  out.push_back(make_record("convolution", "monotone_twice", seed, inst, w[2], w[1],
                            slack::convolution, 0.0, !conclusive, {{"w", w}}));
  return out;
}

// ---------------------------------------------------------------------------
// dispatch

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"metric",     "convexity", "scaling",
                                              "comparisons", "geodesic",  "heat",
                                              "gradient2d", "convolution"};
  return names;
}

inline std::vector<long long> default_seeds(const std::string& suite) {
  if (suite == "metric" || suite == "convexity" || suite == "scaling" ||
      suite == "comparisons")
    return {1, 2, 3, 4, 5};
  return {1};
}

inline std::vector<CheckRecord> run_suite(const std::string& name,
                                          const std::vector<long long>& seeds,
                                          const SuiteBudget& B) {
  std::vector<CheckRecord> out;
  auto append = [&](std::vector<CheckRecord> v) {
    out.insert(out.end(), v.begin(), v.end());
  };
  for (long long s : seeds) {
    if (name == "metric") append(check_metric_axioms(s, B));
    else if (name == "convexity") append(check_convexity_subadditivity(s, B));
    else if (name == "scaling") append(check_scaling_monotonicity(s, B));
    else if (name == "comparisons") append(check_comparisons(s, B));
    else if (name == "geodesic") append(run_geodesic_suite(s, B));
    else if (name == "heat") append(check_heat_flow(s, B));
    else if (name == "gradient2d") append(check_gradient_structure(s, B));
    else if (name == "convolution") append(check_convolution_monotonicity(s, B));
    else throw std::invalid_argument("unknown suite: " + name);
  }
  return out;
}

}  // namespace wot
