#include <catch2/catch_amalgamated.hpp>

#include "wot/constraint.hpp"
#include "wot/experiments.hpp"

using namespace wot;

namespace {

GridSpec grid1d(int nx, int nt) { return GridSpec{1, nx, 1, 0.0, 1.0, 0.0, 1.0, nt}; }

std::vector<double> random_x(Rng& rng, const ConstraintSystem& cs) {
  std::vector<double> x(cs.xsize());
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

// Exact affine projection via Gram-Schmidt on the dense constraint rows:
// works on any small system and is independent of the CG path.
std::vector<double> dense_projection(const ConstraintSystem& cs, std::vector<double> x) {
  const size_t N = cs.xsize(), M = cs.lsize();
  std::vector<std::vector<double>> rows;
  std::vector<double> betas;
  std::vector<double> unit(N, 0.0), col(M);
  // assemble A as dense rows
  std::vector<std::vector<double>> A(M, std::vector<double>(N));
  for (size_t j = 0; j < N; ++j) {
    std::fill(unit.begin(), unit.end(), 0.0);
    unit[j] = 1.0;
    cs.apply_A(unit, col);
    for (size_t i = 0; i < M; ++i) A[i][j] = col[i];
  }
  const auto rhs = cs.rhs();
  for (size_t i = 0; i < M; ++i) {
    std::vector<double> r = A[i];
    double b = rhs[i];
    for (size_t k = 0; k < rows.size(); ++k) {
      const double c = detail::dot(r, rows[k]);
      for (size_t j = 0; j < N; ++j) r[j] -= c * rows[k][j];
      b -= c * betas[k];
    }
    const double n = detail::nrm2(r);
    if (n > 1e-10) {
      for (double& v : r) v /= n;
      rows.push_back(r);
      betas.push_back(b / n);
    } else {
      REQUIRE(std::abs(b) < 1e-9);  // redundant row must be consistent
    }
  }
  for (size_t k = 0; k < rows.size(); ++k) {
    const double c = betas[k] - detail::dot(x, rows[k]);
    for (size_t j = 0; j < N; ++j) x[j] += c * rows[k][j];
  }
  return x;
}

}  // namespace

TEST_CASE("constraint system rejects inconsistent endpoints") {
  GridSpec g = grid1d(8, 4);
  MeasureField mu0 = make_measure(g, {{0.4, 0.5, 0.1, 1.0}}, 0.1, 1.0);
  MeasureField mu1 = make_measure(g, {{0.6, 0.5, 0.1, 1.0}}, 0.1, 1.5);
  CHECK_THROWS_AS(ConstraintSystem(g, mu0, mu1), std::invalid_argument);
  equalize_mass(mu0, mu1);
  CHECK_NOTHROW(ConstraintSystem(g, mu0, mu1));
}

TEST_CASE("residual blocks") {
  GridSpec g = grid1d(6, 4);
  MeasureField mu = make_measure(g, {{0.5, 0.5, 0.12, 1.0}}, 0.2, 1.0);

  SECTION("constant-in-time path between equal endpoints is feasible") {
    ConstraintSystem cs(g, mu, mu);
    std::vector<double> x(cs.xsize(), 0.0);
    for (int k = 0; k <= g.nt; ++k)
      for (int c = 0; c < g.ncells(); ++c)
        x[cs.off_u() + (size_t)k * g.ncells() + c] = mu.values[c];
    for (int k = 0; k < g.nt; ++k)
      for (int c = 0; c < g.ncells(); ++c)
        x[cs.off_a() + (size_t)k * g.ncells() + c] = mu.values[c];
    const auto r = cs.residual(x);
    CHECK(r.continuity == Catch::Approx(0.0).margin(1e-14));
    CHECK(r.endpoint == Catch::Approx(0.0).margin(1e-14));
    CHECK(r.coupling == Catch::Approx(0.0).margin(1e-14));
  }

  SECTION("mass must move when endpoints differ") {
    MeasureField mu1 = make_measure(g, {{0.65, 0.5, 0.12, 1.0}}, 0.2, 1.0);
    equalize_mass(mu, mu1);
    ConstraintSystem cs(g, mu, mu1);
    std::vector<double> x(cs.xsize(), 0.0);
    for (int k = 0; k <= g.nt; ++k)
      for (int c = 0; c < g.ncells(); ++c)
        x[cs.off_u() + (size_t)k * g.ncells() + c] = mu.values[c];
    const auto r = cs.residual(x);  // m = 0 but u0 != u1 somewhere in time
    CHECK(r.continuity > 0.0);
  }
}

TEST_CASE("A adjoint identity on random pairs") {
  Rng rng(43);
  GridSpec g1 = grid1d(7, 5);
  GridSpec g2{2, 4, 5, 0.0, 1.0, 0.0, 2.0, 3};
  for (const GridSpec& g : {g1, g2}) {
    MeasureField mu0{g, std::vector<double>(g.ncells(), 1.0)};
    ConstraintSystem cs(g, mu0, mu0);
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> x(cs.xsize()), lam(cs.lsize()), Ax(cs.lsize()), Atl(cs.xsize());
      for (double& v : x) v = rng.uniform(-1.0, 1.0);
      for (double& v : lam) v = rng.uniform(-1.0, 1.0);
      cs.apply_A(x, Ax);
      cs.apply_At(lam, Atl);
      const double lhs = detail::dot(Ax, lam);
      const double rhs = detail::dot(x, Atl);
      CHECK(std::abs(lhs - rhs) <= 1e-12 * (std::abs(lhs) + std::abs(rhs) + 1.0));
    }
  }
}

TEST_CASE("kernel vector annihilates A*") {
  GridSpec g = grid1d(5, 4);
  MeasureField mu{g, std::vector<double>(g.ncells(), 1.0)};
  ConstraintSystem cs(g, mu, mu);
  const auto k = cs.kernel_vector();
  std::vector<double> at(cs.xsize());
  cs.apply_At(k, at);
  CHECK(detail::nrm2(at) < 1e-13);
}

TEST_CASE("projection onto the tiny explicit system") {
  // nx=2, nt=1 on [0,1]: continuity forces the single interior momentum to
  // m = 2 dx, and every other coordinate is pinned by data or coupling.
  GridSpec g{1, 2, 1, 0.0, 1.0, 0.0, 1.0, 1};
  MeasureField mu0{g, {2.0, 0.0}}, mu1{g, {0.0, 2.0}};
  ConstraintSystem cs(g, mu0, mu1);
  ProjectionWorkspace ws;

  std::vector<double> x(cs.xsize(), 0.0);
  project_K(cs, ws, x);

  const double m = x[cs.off_m()];
  CHECK(m == Catch::Approx(2.0 * g.dx()).margin(1e-9));  // = 1

  const auto ref = dense_projection(cs, std::vector<double>(cs.xsize(), 0.0));
  for (size_t i = 0; i < x.size(); ++i) CHECK(x[i] == Catch::Approx(ref[i]).margin(1e-8));

  // projection of a random point agrees with the dense oracle too
  Rng rng(47);
  auto y = random_x(rng, cs);
  auto yref = dense_projection(cs, y);
  project_K(cs, ws, y);
  for (size_t i = 0; i < y.size(); ++i) CHECK(y[i] == Catch::Approx(yref[i]).margin(1e-8));
}

TEST_CASE("projection properties") {
  GridSpec g = grid1d(8, 6);
  MeasureField mu0 = make_measure(g, {{0.35, 0.5, 0.1, 1.0}}, 0.2, 1.0);
  MeasureField mu1 = make_measure(g, {{0.6, 0.5, 0.12, 1.0}}, 0.2, 1.0);
  equalize_mass(mu0, mu1);
  ConstraintSystem cs(g, mu0, mu1);
  Rng rng(53);

  SECTION("feasible points are fixed, projection is idempotent") {
    ProjectionWorkspace ws;
    auto x = random_x(rng, cs);
    project_K(cs, ws, x);
    const auto r = cs.residual(x);
    const double xn = detail::nrm2(x);
    CHECK(r.continuity <= 1e-9 * (1.0 + xn));
    CHECK(r.endpoint <= 1e-9 * (1.0 + xn));
    CHECK(r.coupling <= 1e-9 * (1.0 + xn));

    auto x2 = x;
    project_K(cs, ws, x2);
    double diff = 0.0;
    for (size_t i = 0; i < x.size(); ++i) diff = std::max(diff, std::abs(x2[i] - x[i]));
    CHECK(diff <= 2e-10 * (1.0 + xn));
  }

  SECTION("projection is 1-Lipschitz") {
    for (int rep = 0; rep < 10; ++rep) {
      ProjectionWorkspace wa, wb;
      auto xa = random_x(rng, cs);
      auto xb = random_x(rng, cs);
      std::vector<double> d0(xa.size());
      for (size_t i = 0; i < xa.size(); ++i) d0[i] = xa[i] - xb[i];
      project_K(cs, wa, xa);
      project_K(cs, wb, xb);
      std::vector<double> d1(xa.size());
      for (size_t i = 0; i < xa.size(); ++i) d1[i] = xa[i] - xb[i];
      CHECK(detail::nrm2(d1) <= detail::nrm2(d0) * (1.0 + 1e-8) + 1e-9);
    }
  }

  SECTION("warm start changes iteration counts, not the fixed point") {
    ProjectionWorkspace warm, cold;
    auto x = random_x(rng, cs);
    auto seed_point = random_x(rng, cs);
    project_K(cs, warm, seed_point);  // leaves a warm multiplier behind
    auto xw = x;
    project_K(cs, warm, xw);
    auto xc = x;
    project_K(cs, cold, xc);
    double diff = 0.0;
    for (size_t i = 0; i < x.size(); ++i) diff = std::max(diff, std::abs(xw[i] - xc[i]));
    CHECK(diff <= 1e-8);
  }

  SECTION("feasible mass is constant across slices") {
    ProjectionWorkspace ws;
    auto x = random_x(rng, cs);
    project_K(cs, ws, x);
    const int NC = g.ncells();
    double m0 = 0.0;
    for (int c = 0; c < NC; ++c) m0 += x[cs.off_u() + c];
    for (int k = 1; k <= g.nt; ++k) {
      double mk = 0.0;
      for (int c = 0; c < NC; ++c) mk += x[cs.off_u() + (size_t)k * NC + c];
      CHECK(mk * g.vol() == Catch::Approx(m0 * g.vol()).margin(1e-9));
    }
  }

  SECTION("CG stagnation raises a diagnostic error") {
    ProjectionWorkspace ws;
    ws.cg_max_iters = 1;
    ws.cg_tol = 1e-14;
    auto x = random_x(rng, cs);
    CHECK_THROWS_AS(project_K(cs, ws, x), SolveError);
  }
}
