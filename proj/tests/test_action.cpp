#include <catch2/catch_amalgamated.hpp>

#include "wot/action.hpp"
#include "wot/experiments.hpp"
#include "wot/oracles.hpp"

using namespace wot;

namespace {
double phi1(const ActionParams& ap, double rho, double w) {
  return phi_eval(ap, rho, std::array{w});
}
}  // namespace

TEST_CASE("action parameter relations") {
  for (double p : {1.5, 2.0, 3.0}) {
    for (double alpha : {0.0, 0.3, 0.7, 1.0}) {
      const ActionParams ap{p, alpha};
      ap.validate();
      CHECK(ap.theta() >= 1.0);
      CHECK(ap.theta() <= p);
      CHECK(ap.theta() / p + alpha / ap.q() == Catch::Approx(1.0).epsilon(1e-14));
      if (alpha < 1.0) {
        REQUIRE(ap.kappa().has_value());
        CHECK(*ap.kappa() * (ap.theta() - 1.0) == Catch::Approx(p).epsilon(1e-12));
      } else {
        CHECK_FALSE(ap.kappa().has_value());
      }
    }
  }
  CHECK(ActionParams{2.0, 1.0}.theta() == Catch::Approx(1.0));
  CHECK(ActionParams{2.0, 0.0}.theta() == Catch::Approx(2.0));
  CHECK_THROWS_AS((ActionParams{1.0, 0.5}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((ActionParams{2.0, 1.5}.validate()), std::invalid_argument);
}

TEST_CASE("phi evaluation") {
  CHECK(phi1({2.0, 0.5}, 4.0, 2.0) == Catch::Approx(2.0));  // 4^-1/2 * 4
  CHECK(phi1({2.0, 0.5}, 7.0, 0.0) == 0.0);
  CHECK(phi_eval({2.0, 1.0}, 0.5, std::array{1.0, 1.0}) == Catch::Approx(4.0));
  CHECK(phi1({2.0, 0.5}, -1.0, 0.3) == kInf);
  CHECK(phi1({2.0, 0.5}, 0.0, 0.3) == kInf);
  CHECK(phi1({2.0, 0.5}, 0.0, 0.0) == 0.0);
  CHECK(phi1({3.0, 0.0}, 0.0, 2.0) == Catch::Approx(8.0));  // alpha=0: |w|^p
}

TEST_CASE("phi dual evaluation") {
  CHECK(phi_dual_eval({2.0, 0.5}, 1.0, std::array{3.0, 4.0}) == Catch::Approx(25.0));
  CHECK(phi_dual_eval({2.0, 0.5}, 4.0, std::array{3.0, 0.0}) == Catch::Approx(18.0));
  // concave and nondecreasing in rho
  const ActionParams ap{2.0, 0.5};
  const std::array z{1.2, -0.4};
  double prev = 0.0;
  for (double rho : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    const double v = phi_dual_eval(ap, rho, z);
    CHECK(v >= prev);
    prev = v;
  }
  const double mid = phi_dual_eval(ap, 1.05, z);
  CHECK(mid >= 0.5 * (phi_dual_eval(ap, 0.1, z) + phi_dual_eval(ap, 2.0, z)));
}

TEST_CASE("recession function") {
  CHECK(phi_recession({2.0, 0.5}, 3.0, std::array{0.0}) == 0.0);
  CHECK(phi_recession({2.0, 0.5}, 1.0, std::array{1.0}) == kInf);
  CHECK(phi_recession({2.0, 1.0}, 2.0, std::array{2.0, 0.0}) == Catch::Approx(2.0));
  CHECK(phi_recession({2.0, 1.0}, 0.0, std::array{1.0}) == kInf);
  CHECK(phi_recession({2.0, 1.0}, 0.0, std::array{0.0}) == 0.0);
}

TEST_CASE("homogeneity and monotonicity of phi") {
  Rng rng(23);
  for (int rep = 0; rep < 500; ++rep) {
    const ActionParams ap{rng.uniform(1.3, 3.2), rng.uniform(0.0, 1.0)};
    const double rho = rng.uniform(0.01, 10.0);
    const double w = rng.uniform(-5.0, 5.0);
    const double lam = rng.uniform(0.1, 4.0);

    // p-homogeneity in w
    const double lhs = phi1(ap, rho, lam * w);
    const double rhs = std::pow(std::abs(lam), ap.p) * phi1(ap, rho, w);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (std::abs(lhs) + std::abs(rhs) + 1e-30));

    // joint theta-homogeneity
    const double jl = phi1(ap, lam * rho, lam * w);
    const double jr = std::pow(lam, ap.theta()) * phi1(ap, rho, w);
    CHECK(std::abs(jl - jr) <= 1e-10 * (std::abs(jl) + std::abs(jr) + 1e-30));

    // nonincreasing in rho
    const double rho2 = rho * rng.uniform(1.0, 3.0);
    CHECK(phi1(ap, rho, w) >= phi1(ap, rho2, w) - 1e-12);
  }
}

TEST_CASE("joint convexity of phi on random pairs") {
  Rng rng(29);
  const ActionParams grid_params[] = {{1.5, 0.3}, {2.0, 0.5}, {2.0, 1.0}, {3.0, 0.7}};
  for (const auto& ap : grid_params) {
    for (int rep = 0; rep < 2500; ++rep) {
      const double r0 = rng.uniform(1e-3, 10.0), r1 = rng.uniform(1e-3, 10.0);
      const double w0 = rng.uniform(-5.0, 5.0), w1 = rng.uniform(-5.0, 5.0);
      const double mid = phi1(ap, 0.5 * (r0 + r1), 0.5 * (w0 + w1));
      const double avg = 0.5 * (phi1(ap, r0, w0) + phi1(ap, r1, w1));
      CHECK(mid <= avg + 1e-12 * (1.0 + avg));
    }
  }
}

TEST_CASE("dual-norm identity by dense direction sampling") {
  // sup_z (w . z) / dual(rho,z)^(1/q) equals phi(rho,w)^(1/p)
  const int ndir = 4000;
  for (const ActionParams& ap : {ActionParams{2.0, 0.5}, ActionParams{3.0, 0.3}}) {
    const double rho = 1.7;
    const std::array w{0.8, -0.55};
    double best = 0.0;
    for (int i = 0; i < ndir; ++i) {
      const double t = 2.0 * M_PI * i / ndir;
      for (double scale : {0.5, 1.0, 2.0}) {
        const std::array z{scale * std::cos(t), scale * std::sin(t)};
        const double denom = std::pow(phi_dual_eval(ap, rho, z), 1.0 / ap.q());
        if (denom > 0.0)
          best = std::max(best, (w[0] * z[0] + w[1] * z[1]) / denom);
      }
    }
    const double target = std::pow(phi_eval(ap, rho, w), 1.0 / ap.p);
    CHECK(best == Catch::Approx(target).epsilon(1e-3));
  }
}

TEST_CASE("prox of phi") {
  SECTION("zero momentum projects the density") {
    for (const ActionParams& ap :
         {ActionParams{2.0, 0.5}, ActionParams{2.0, 1.0}, ActionParams{1.5, 0.0}}) {
      auto r = prox_phi(ap, 1.0, 0.7, -2.0, std::array{0.0});
      CHECK(r.rho == 0.0);
      CHECK(r.w[0] == 0.0);
      r = prox_phi(ap, 1.0, 0.7, 1.3, std::array{0.0});
      CHECK(r.rho == Catch::Approx(1.3));
    }
  }

  SECTION("classical case matches the brute-force oracle") {
    const ActionParams ap{2.0, 1.0};
    const auto got = prox_phi(ap, 1.0, 1.0, 1.0, std::array{1.0});
    const auto ref = brute_force_prox(ap, 1.0, 1.0, 1.0, std::array{1.0}, {4.0, 4.0});
    CHECK(got.rho == Catch::Approx(ref.rho).margin(1e-6));
    CHECK(got.w[0] == Catch::Approx(ref.w[0]).margin(1e-6));
  }

  SECTION("interpolated case matches the brute-force oracle") {
    const ActionParams ap{2.0, 0.5};
    const auto got = prox_phi(ap, 1.0, 0.2, 0.5, std::array{0.8});
    const auto ref = brute_force_prox(ap, 1.0, 0.2, 0.5, std::array{0.8}, {4.0, 4.0});
    CHECK(got.rho == Catch::Approx(ref.rho).margin(1e-6));
    CHECK(got.w[0] == Catch::Approx(ref.w[0]).margin(1e-6));
  }

  SECTION("random cross-check against brute force") {
    Rng rng(31);
    for (int rep = 0; rep < 150; ++rep) {
      const double p = std::array{1.5, 2.0, 3.0}[rng.uniform_int(0, 2)];
      const double alpha = std::array{0.0, 0.3, 0.7, 1.0}[rng.uniform_int(0, 3)];
      const ActionParams ap{p, alpha};
      const double g = rng.uniform(0.5, 2.0);
      const double step = rng.uniform(0.05, 2.0);
      const double rb = rng.uniform(-1.0, 2.5);
      const double wb = rng.uniform(-2.0, 2.0);
      const auto got = prox_phi(ap, g, step, rb, std::array{wb});
      const auto ref = brute_force_prox(ap, g, step, rb, std::array{wb},
                                        {8.0 + 4.0 * step, 4.0});
      CHECK(got.rho == Catch::Approx(ref.rho).margin(2e-6));
      CHECK(got.w[0] == Catch::Approx(ref.w[0]).margin(2e-6));
    }
  }

  SECTION("firm nonexpansiveness on random pairs") {
    Rng rng(37);
    for (int rep = 0; rep < 300; ++rep) {
      const ActionParams ap{rng.uniform(1.5, 3.0), rng.uniform(0.0, 1.0)};
      const double g = rng.uniform(0.5, 2.0), step = rng.uniform(0.1, 1.5);
      const double x0 = rng.uniform(-1.0, 2.0), w0 = rng.uniform(-2.0, 2.0);
      const double x1 = rng.uniform(-1.0, 2.0), w1 = rng.uniform(-2.0, 2.0);
      const auto p0 = prox_phi(ap, g, step, x0, std::array{w0});
      const auto p1 = prox_phi(ap, g, step, x1, std::array{w1});
      const double din = std::hypot(x1 - x0, w1 - w0);
      const double dout = std::hypot(p1.rho - p0.rho, p1.w[0] - p0.w[0]);
      CHECK(dout <= din * (1.0 + 1e-9) + 1e-12);
    }
  }

  SECTION("2D momentum stays colinear with the input") {
    const ActionParams ap{2.0, 0.5};
    const auto r = prox_phi(ap, 1.0, 0.4, 0.8, std::array{0.6, -0.8});
    CHECK(r.w[0] * (-0.8) == Catch::Approx(r.w[1] * 0.6).margin(1e-14));
    const double cross = r.w[0] * 0.6 + r.w[1] * (-0.8);
    CHECK(cross > 0.0);  // same direction, shrunk
    CHECK(std::hypot(r.w[0], r.w[1]) <= 1.0);
  }
}

TEST_CASE("entropy functional") {
  GridSpec g{1, 8, 1, 0.0, 1.0, 0.0, 1.0, 2};
  MeasureField zero{g, std::vector<double>(8, 0.0)};
  CHECK(entropy_Psi(0.5, zero) == 0.0);

  MeasureField ones{g, std::vector<double>(8, 1.0)};
  CHECK(entropy_Psi(0.5, ones) == Catch::Approx(4.0 / 3.0));

  Rng rng(41);
  for (int rep = 0; rep < 100; ++rep) {
    const double alpha = rng.uniform(0.05, 0.95);
    MeasureField f0{g, {}}, f1{g, {}}, mid{g, {}};
    for (int c = 0; c < 8; ++c) {
      f0.values.push_back(rng.uniform(0.0, 3.0));
      f1.values.push_back(rng.uniform(0.0, 3.0));
      mid.values.push_back(0.5 * (f0.values[c] + f1.values[c]));
    }
    CHECK(entropy_Psi(alpha, mid) <=
          0.5 * (entropy_Psi(alpha, f0) + entropy_Psi(alpha, f1)) + 1e-12);
  }
  CHECK_THROWS_AS(entropy_Psi(1.0, ones), std::invalid_argument);
}

TEST_CASE("moment functional") {
  GridSpec g{1, 64, 1, -3.0, 3.0, 0.0, 1.0, 2};
  MeasureField zero{g, std::vector<double>(64, 0.0)};
  CHECK(moment(zero, 2.0) == 0.0);

  MeasureField f = make_measure(g, {{0.4, 0.5, 0.2, 1.0}}, 0.0, 2.5);
  CHECK(moment(f, 0.0) == Catch::Approx(f.mass()));

  // point-like bump at |x| = 2 with unit mass: second moment is about 4
  MeasureField bump = make_measure(g, {{2.0, 0.5, 0.02, 1.0}}, 0.0, 1.0);
  CHECK(moment(bump, 2.0) == Catch::Approx(4.0).epsilon(0.01));
}
