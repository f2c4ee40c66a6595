#include <catch2/catch_amalgamated.hpp>

#include "wot/experiments.hpp"
#include "wot/oracles.hpp"
#include "wot/solver.hpp"

using namespace wot;

namespace {
GridSpec grid1d(int nx, int nt) { return GridSpec{1, nx, 1, 0.0, 1.0, 0.0, 1.0, nt}; }

SolverConfig fast_cfg(int iters = 2500) {
  SolverConfig cfg;
  cfg.max_iters = iters;
  cfg.tol_objective = 1e-8;
  cfg.tol_constraint = 1e-6;
  return cfg;
}
}  // namespace

TEST_CASE("identical endpoints give zero distance immediately") {
  GridSpec g = grid1d(32, 8);
  MeasureField mu = make_measure(g, {{0.45, 0.5, 0.08, 1.0}}, 0.1, 1.0);
  auto gamma = ReferenceMeasure::lebesgue(g);
  SolverConfig cfg = fast_cfg(200);
  for (double alpha : {0.0, 0.5, 1.0}) {
    auto r = solve_distance(mu, mu, gamma, ActionParams{2.0, alpha}, g, cfg);
    CHECK(r.converged);
    CHECK(r.iterations <= 200);
    CHECK(r.distance <= 1e-6);
  }
}

TEST_CASE("solver preconditions") {
  GridSpec g = grid1d(16, 4);
  MeasureField mu0 = make_measure(g, {{0.4, 0.5, 0.1, 1.0}}, 0.1, 1.0);
  MeasureField mu1 = make_measure(g, {{0.6, 0.5, 0.1, 1.0}}, 0.1, 2.0);
  auto gamma = ReferenceMeasure::lebesgue(g);
  CHECK_THROWS_AS(solve_distance(mu0, mu1, gamma, ActionParams{2.0, 0.5}, g, fast_cfg()),
                  std::invalid_argument);
  SolverConfig bad = fast_cfg();
  bad.relax = 2.5;
  equalize_mass(mu0, mu1);
  CHECK_THROWS_AS(solve_distance(mu0, mu1, gamma, ActionParams{2.0, 0.5}, g, bad),
                  std::invalid_argument);
}

TEST_CASE("classical translate benchmark at reduced size") {
  GridSpec g = grid1d(32, 16);
  auto [mu0, mu1] = translate_pair_1d(g, 0.35, 0.05, 0.25);
  auto gamma = ReferenceMeasure::lebesgue(g);
  auto r = solve_distance(mu0, mu1, gamma, ActionParams{2.0, 1.0}, g, fast_cfg());
  CHECK(std::abs(r.distance - 0.25) / 0.25 < 0.03);

  // bookkeeping identity between distance_p and the action profile
  double acc = 0.0;
  for (double phi : r.per_time_action) acc += phi * g.dt();
  CHECK(r.distance_p == Catch::Approx(acc).epsilon(1e-10));

  // mass transport consistency
  CHECK(r.mass_spread() <= 1e-8);

  // constant-speed certificate
  double lo = kInf, hi = 0.0;
  for (double phi : r.per_time_action) {
    lo = std::min(lo, phi);
    hi = std::max(hi, phi);
  }
  CHECK(hi / lo <= 1.05);

  SECTION("geodesic endpoints and midpoint") {
    auto slices = extract_geodesic(r, g.nt + 1);
    for (int c = 0; c < g.nx; ++c) {
      CHECK(slices.front().values[c] == mu0.values[c]);
      CHECK(slices.back().values[c] == mu1.values[c]);
    }
    // midpoint bump sits within one cell of the midpoint position
    const auto& mid = slices[g.nt / 2].values;
    int argmax = 0;
    for (int c = 0; c < g.nx; ++c)
      if (mid[c] > mid[argmax]) argmax = c;
    const double xpeak = g.cx(argmax);
    CHECK(std::abs(xpeak - (0.35 + 0.125)) <= g.dx() + 1e-12);
  }

  SECTION("extract_geodesic requires convergence") {
    GeodesicResult bad = r;
    bad.converged = false;
    CHECK_THROWS_AS(extract_geodesic(bad, 5), std::invalid_argument);
  }
}

TEST_CASE("dr_iterate mechanics") {
  GridSpec g = grid1d(24, 8);
  auto gamma = ReferenceMeasure::lebesgue(g);

  SECTION("exact fixed point: one more iteration is a no-op") {
    MeasureField mu = make_measure(g, {{0.5, 0.5, 0.1, 1.0}}, 0.1, 1.0);
    ConstraintSystem cs(g, mu, mu);
    SolverConfig cfg = fast_cfg(300);
    DrState st(cs, ActionParams{2.0, 0.5}, gamma.g, cfg);
    for (int i = 0; i < 50; ++i) dr_iterate(st);
    const auto z_before = st.z;
    dr_iterate(st);
    double moved = 0.0;
    for (size_t i = 0; i < st.z.size(); ++i)
      moved += (st.z[i] - z_before[i]) * (st.z[i] - z_before[i]);
    CHECK(std::sqrt(moved) <= 1e-8 * (1.0 + detail::nrm2(z_before)));
  }

  SECTION("halving the relaxation halves the update norm") {
    auto [mu0, mu1] = translate_pair_1d(g, 0.35, 0.06, 0.25, 0.05);
    equalize_mass(mu0, mu1);
    ConstraintSystem cs(g, mu0, mu1);
    SolverConfig cfg = fast_cfg(100);
    DrState st(cs, ActionParams{2.0, 1.0}, gamma.g, cfg);
    for (int i = 0; i < 20; ++i) dr_iterate(st);

    DrState a = st, b = st;
    a.cfg.relax = 1.0;
    b.cfg.relax = 0.5;
    const auto z0 = st.z;
    dr_iterate(a);
    dr_iterate(b);
    double na = 0.0, nb = 0.0;
    for (size_t i = 0; i < z0.size(); ++i) {
      na += (a.z[i] - z0[i]) * (a.z[i] - z0[i]);
      nb += (b.z[i] - z0[i]) * (b.z[i] - z0[i]);
    }
    CHECK(std::sqrt(nb) == Catch::Approx(0.5 * std::sqrt(na)).epsilon(0.01));
  }

  SECTION("objective at projected iterates is eventually monotone") {
    auto [mu0, mu1] = translate_pair_1d(g, 0.35, 0.06, 0.25);
    ConstraintSystem cs(g, mu0, mu1);
    SolverConfig cfg = fast_cfg(1200);
    cfg.tol_objective = 1e-13;  // run the full budget
    DrState st(cs, ActionParams{2.0, 1.0}, gamma.g, cfg);
    for (int i = 0; i < cfg.max_iters; ++i) dr_iterate(st);
    const auto& tr = st.objective_trace;
    for (size_t i = tr.size() * 3 / 4; i + 1 < tr.size(); ++i)
      CHECK(tr[i + 1] <= tr[i] + 1e-9 * std::max(1.0, std::abs(tr[i])));
  }
}

TEST_CASE("symmetry of the distance") {
  GridSpec g = grid1d(32, 12);
  Rng rng(61);
  MeasureField mu0 = random_measure(rng, g, 0.1, 1.0);
  MeasureField mu1 = random_measure(rng, g, 0.1, 1.0);
  equalize_mass(mu0, mu1);
  auto gamma = ReferenceMeasure::lebesgue(g);
  const ActionParams ap{2.0, 0.5};
  auto cfg = fast_cfg();
  auto f = solve_distance(mu0, mu1, gamma, ap, g, cfg);
  auto b = solve_distance(mu1, mu0, gamma, ap, g, cfg);
  REQUIRE(f.converged);
  REQUIRE(b.converged);
  CHECK(std::abs(f.distance - b.distance) <= 2e-3 * std::max(f.distance, b.distance));
}

TEST_CASE("time reversal maps geodesics to geodesics") {
  GridSpec g = grid1d(24, 10);
  auto [mu0, mu1] = translate_pair_1d(g, 0.35, 0.06, 0.25, 0.05);
  equalize_mass(mu0, mu1);
  auto gamma = ReferenceMeasure::lebesgue(g);
  auto r = solve_distance(mu0, mu1, gamma, ActionParams{2.0, 0.5}, g, fast_cfg());
  REQUIRE(r.converged);

  const int NC = g.ncells(), NT = g.nt, NF = g.nfaces();
  ConstraintSystem swapped(g, mu1, mu0);
  std::vector<double> x(swapped.xsize(), 0.0);
  for (int k = 0; k <= NT; ++k)
    for (int c = 0; c < NC; ++c)
      x[swapped.off_u() + (size_t)k * NC + c] = r.densities[(size_t)(NT - k) * NC + c];
  for (int k = 0; k < NT; ++k)
    for (int f = 0; f < NF; ++f)
      x[swapped.off_m() + (size_t)k * NF + f] = -r.momenta[(size_t)(NT - 1 - k) * NF + f];
  {  // couple the centered variables consistently
    PathVariables U;
    U.u.assign(x.begin() + swapped.off_u(), x.begin() + swapped.off_u() + (size_t)(NT + 1) * NC);
    U.m.assign(x.begin() + swapped.off_m(), x.begin() + swapped.off_m() + (size_t)NT * NF);
    const auto V = interpolate(g, U);
    std::copy(V.a.begin(), V.a.end(), x.begin() + swapped.off_a());
    std::copy(V.b.begin(), V.b.end(), x.begin() + swapped.off_b());
  }
  const auto res = swapped.residual(x);
  const double xn = detail::nrm2(x);
  CHECK(res.continuity <= 1e-9 * (1.0 + xn));
  CHECK(res.endpoint <= 1e-9 * (1.0 + xn));
  CHECK(res.coupling <= 1e-12 * (1.0 + xn));

  // identical action: phi is even in the momentum
  std::vector<double> pt;
  ClipDiagnostics clip;
  const double rev_obj = wot::detail::objective_eval(swapped, ActionParams{2.0, 0.5},
                                                     gamma.g, x, &pt, &clip);
  CHECK(rev_obj == Catch::Approx(r.distance_p).epsilon(1e-12));
}

TEST_CASE("time-step refinement is consistent") {
  GridSpec g8 = grid1d(32, 8), g16 = grid1d(32, 16), g32 = grid1d(32, 32);
  auto gamma8 = ReferenceMeasure::lebesgue(g8);
  auto gamma16 = ReferenceMeasure::lebesgue(g16);
  auto gamma32 = ReferenceMeasure::lebesgue(g32);
  auto [mu0, mu1] = translate_pair_1d(g8, 0.35, 0.06, 0.25, 0.05);
  equalize_mass(mu0, mu1);
  const ActionParams ap{2.0, 0.5};
  auto r8 = solve_distance(mu0, mu1, gamma8, ap, g8, fast_cfg());
  auto r16 = solve_distance(mu0, mu1, gamma16, ap, g16, fast_cfg());
  auto r32 = solve_distance(mu0, mu1, gamma32, ap, g32, fast_cfg(4000));
  REQUIRE(r8.converged);
  REQUIRE(r16.converged);
  REQUIRE(r32.converged);
  CHECK(std::abs(r32.distance_p - r16.distance_p) <=
        0.02 * std::max(r16.distance_p, r32.distance_p));
}

TEST_CASE("solver runs are deterministic") {
  GridSpec g = grid1d(24, 8);
  auto [mu0, mu1] = translate_pair_1d(g, 0.35, 0.06, 0.25, 0.1);
  equalize_mass(mu0, mu1);
  auto gamma = ReferenceMeasure::lebesgue(g);
  auto cfg = fast_cfg(600);
  auto a = solve_distance(mu0, mu1, gamma, ActionParams{2.0, 0.7}, g, cfg);
  auto b = solve_distance(mu0, mu1, gamma, ActionParams{2.0, 0.7}, g, cfg);
  CHECK(a.distance == b.distance);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("thread count does not change the result") {
  GridSpec g = grid1d(64, 16);
  auto [mu0, mu1] = translate_pair_1d(g, 0.35, 0.06, 0.25, 0.1);
  equalize_mass(mu0, mu1);
  auto gamma = ReferenceMeasure::lebesgue(g);
  auto cfg = fast_cfg(400);
  auto a = solve_distance(mu0, mu1, gamma, ActionParams{2.0, 1.0}, g, cfg);
  cfg.threads = 4;
  auto b = solve_distance(mu0, mu1, gamma, ActionParams{2.0, 1.0}, g, cfg);
  CHECK(std::abs(a.distance - b.distance) <= 1e-9 * (1.0 + a.distance));
}
