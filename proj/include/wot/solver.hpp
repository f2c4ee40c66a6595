#pragma once

// Douglas-Rachford splitting between the pointwise action prox (acting on
// the centered variables, identity on the staggered ones) and projection
// onto the affine continuity set:
//   x = P_K(z),  y = prox_{step F}(2x - z),  z <- z + relax (y - x).
// The primal iterate is the projected point; the objective recorded there
// converges to W^p.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>
#include <vector>

#include "wot/action.hpp"
#include "wot/constraint.hpp"
#include "wot/grid.hpp"

namespace wot {

struct SolverConfig {
  double step = 1.0;          // prox step (lambda)
  double relax = 1.8;         // DR relaxation, in (0,2)
  int max_iters = 20000;
  double tol_objective = 1e-7;  // relative stall over the window
  int stall_window = 100;
  double tol_constraint = 1e-8;  // DR gap |y - x| / (1 + |x|)
  double cg_tol = 1e-10;
  // In-loop projections track the DR gap (inexact splitting); the final
  // polish projection always runs at full precision.
  bool adaptive_cg = true;
  int cg_max_iters = 200000;
  unsigned long long seed = 0;  // reserved; initialization is deterministic
  int threads = 1;

  void validate() const {
    if (!(step > 0.0)) throw std::invalid_argument("SolverConfig: step must be > 0");
    if (!(relax > 0.0 && relax < 2.0))
      throw std::invalid_argument("SolverConfig: relax must be in (0,2)");
    if (!(tol_objective > 0.0 && tol_constraint > 0.0 && cg_tol > 0.0))
      throw std::invalid_argument("SolverConfig: tolerances must be > 0");
    if (max_iters < 1 || stall_window < 1 || threads < 1)
      throw std::invalid_argument("SolverConfig: bad iteration budget");
  }
};

struct ClipDiagnostics {
  double negative_mass_l1 = 0.0;  // L1 mass of clipped negative density
  double flux_on_vacuum = 0.0;    // L1 momentum discarded where density <= 0
};

struct GeodesicResult {
  GridSpec spec;
  ActionParams params;
  double distance = 0.0;
  double distance_p = 0.0;
  std::vector<double> per_time_action;  // Phi_k per time interval
  std::vector<double> mass_per_slice;
  std::vector<double> densities;  // (nt+1) * ncells
  std::vector<double> momenta;    // nt * nfaces
  int iterations = 0;
  bool converged = false;
  Residuals residuals;
  double dr_gap = 0.0;
  ClipDiagnostics clip;
  std::vector<double> objective_trace;
  double wall_time_seconds = 0.0;

  double mass_spread() const {
    double lo = mass_per_slice[0], hi = lo;
    for (double m : mass_per_slice) {
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
    return (hi - lo) / std::max(1e-300, std::abs(hi));
  }
};

namespace detail {

// Objective of the feasible point: sum_k dt sum_c vol g phi(a/g, b/g),
// with tiny negative densities clipped and the discarded amounts recorded.
inline double objective_eval(const ConstraintSystem& cs, const ActionParams& ap,
                             const std::vector<double>& g, std::span<const double> X,
                             std::vector<double>* per_time = nullptr,
                             ClipDiagnostics* clip = nullptr) {
  const int NC = cs.nc(), NT = cs.nt(), D = cs.spec.dim;
  const double vol = cs.spec.vol(), dt = cs.spec.dt();
  const double* a = X.data() + cs.off_a();
  const double* b = X.data() + cs.off_b();
  if (per_time) per_time->assign(NT, 0.0);
  double total = 0.0;
  for (int k = 0; k < NT; ++k) {
    double phik = 0.0;
    for (int c = 0; c < NC; ++c) {
      const double gc = g[c];
      const double ac = a[(size_t)k * NC + c];
      double wn2 = 0.0;
      for (int ax = 0; ax < D; ++ax) {
        const double bv = b[((size_t)k * NC + c) * D + ax];
        wn2 += bv * bv;
      }
      const double wn = std::sqrt(wn2);
      double rho = ac / gc;
      if (rho < 0.0) {
        if (clip) clip->negative_mass_l1 += -ac * vol * dt;
        rho = 0.0;
      }
      const double val = phi_eval_norm(ap, rho, wn / gc);
      if (std::isfinite(val)) {
        phik += gc * val;
      } else if (clip) {
        clip->flux_on_vacuum += wn * vol * dt;
      }
    }
    phik *= vol;
    if (per_time) (*per_time)[k] = phik;
    total += dt * phik;
  }
  return total;
}

inline void prox_pass_range(const ConstraintSystem& cs, const ActionParams& ap,
                            const std::vector<double>& g, double step,
                            std::span<double> X, size_t begin, size_t end) {
  const int NC = cs.nc(), D = cs.spec.dim;
  double* a = X.data() + cs.off_a();
  double* b = X.data() + cs.off_b();
  for (size_t i = begin; i < end; ++i) {
    const int c = (int)(i % NC);
    double wb[2] = {b[i * D], D == 2 ? b[i * D + 1] : 0.0};
    const auto res = prox_phi(ap, g[c], step, a[i], std::span<const double>(wb, (size_t)D));
    a[i] = res.rho;
    for (int ax = 0; ax < D; ++ax) b[i * D + ax] = res.w[ax];
  }
}

// Pointwise prox over all centered nodes. Points are independent, so a
// fixed chunked split is bitwise-reproducible for any thread count.
inline void prox_pass(const ConstraintSystem& cs, const ActionParams& ap,
                      const std::vector<double>& g, double step, int threads,
                      std::span<double> X) {
  const size_t n = (size_t)cs.nt() * cs.nc();
  if (threads <= 1 || n < 1024) {
    prox_pass_range(cs, ap, g, step, X, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  const size_t chunk = (n + threads - 1) / threads;
  for (int t = 1; t < threads; ++t) {
    const size_t lo = std::min(n, t * chunk), hi = std::min(n, (t + 1) * chunk);
    if (lo < hi)
      pool.emplace_back([&, lo, hi] { prox_pass_range(cs, ap, g, step, X, lo, hi); });
  }
  prox_pass_range(cs, ap, g, step, X, 0, std::min(n, chunk));
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// One Douglas-Rachford solve's mutable state.
struct DrState {
  ConstraintSystem cs;
  ProjectionWorkspace ws;
  ActionParams params;
  std::vector<double> g;
  SolverConfig cfg;
  std::vector<double> z, x, y;
  std::vector<double> objective_trace;
  int iter = 0;
  double gap = kInf;

  DrState(const ConstraintSystem& system, const ActionParams& ap,
          const std::vector<double>& gamma_density, const SolverConfig& config)
      : cs(system), params(ap), g(gamma_density), cfg(config) {
    ws.cg_tol = cfg.adaptive_cg ? 1e-6 : cfg.cg_tol;
    ws.cg_max_iters = cfg.cg_max_iters;
    z.assign(cs.xsize(), 0.0);
    x.assign(cs.xsize(), 0.0);
    y.assign(cs.xsize(), 0.0);
    // deterministic start: densities linear in time, zero momentum,
    // centered copies consistent, then one projection
    const int NC = cs.nc(), NT = cs.nt();
    for (int k = 0; k <= NT; ++k) {
      const double t = (double)k / NT;
      for (int c = 0; c < NC; ++c)
        z[cs.off_u() + (size_t)k * NC + c] = (1.0 - t) * cs.u0[c] + t * cs.u1[c];
    }
    for (int k = 0; k < NT; ++k)
      for (int c = 0; c < NC; ++c)
        z[cs.off_a() + (size_t)k * NC + c] =
            0.5 * (z[cs.off_u() + (size_t)k * NC + c] + z[cs.off_u() + (size_t)(k + 1) * NC + c]);
    project_K(cs, ws, z);
  }
};

/// One DR step; records the objective at the projected point.
inline void dr_iterate(DrState& s) {
  if (s.cfg.adaptive_cg)
    s.ws.cg_tol = std::clamp(0.05 * s.gap, s.cfg.cg_tol, 1e-4);
  std::copy(s.z.begin(), s.z.end(), s.x.begin());
  project_K(s.cs, s.ws, s.x);
  s.objective_trace.push_back(detail::objective_eval(s.cs, s.params, s.g, s.x));
  for (size_t i = 0; i < s.z.size(); ++i) s.y[i] = 2.0 * s.x[i] - s.z[i];
  detail::prox_pass(s.cs, s.params, s.g, s.cfg.step, s.cfg.threads, s.y);
  double g2 = 0.0, xn2 = 0.0;
  for (size_t i = 0; i < s.z.size(); ++i) {
    const double d = s.y[i] - s.x[i];
    g2 += d * d;
    xn2 += s.x[i] * s.x[i];
    s.z[i] += s.cfg.relax * d;
  }
  s.gap = std::sqrt(g2) / (1.0 + std::sqrt(xn2));
  ++s.iter;
}

// Converged when the objective at projected points has stalled over the
// window and the projected point is feasible to tol_constraint (the
// projection itself guarantees the latter up to CG accuracy).
inline bool dr_converged(DrState& s) {
  const auto& tr = s.objective_trace;
  const int w = s.cfg.stall_window;
  if ((int)tr.size() <= w) return false;
  const double j0 = tr[tr.size() - 1 - w], j1 = tr.back();
  if (!std::isfinite(j0) || !std::isfinite(j1)) return false;
  if (std::abs(j1 - j0) > s.cfg.tol_objective * std::max(1.0, std::abs(j1))) return false;
  // tighten the candidate point to the contract tolerance before judging
  s.ws.cg_tol = s.cfg.cg_tol;
  project_K(s.cs, s.ws, s.x);
  const Residuals res = s.cs.residual(s.x);
  const double xn = detail::nrm2(s.x);
  const double feas = std::sqrt(res.continuity * res.continuity +
                                res.endpoint * res.endpoint + res.coupling * res.coupling);
  return feas <= s.cfg.tol_constraint * (1.0 + xn);
}

/// Computes W_{p,alpha;gamma}(mu0, mu1) on the given space-time grid,
/// returning the geodesic and diagnostics. Deterministic given the config;
/// non-convergence is reported through the converged flag, not an error.
inline GeodesicResult solve_distance(const MeasureField& mu0, const MeasureField& mu1,
                                     const ReferenceMeasure& gamma, const ActionParams& params,
                                     const GridSpec& spec, const SolverConfig& cfg = {}) {
  const auto t_start = std::chrono::steady_clock::now();
  params.validate();
  cfg.validate();
  spec.validate();
  if (!gamma.spec.same_space(spec))
    throw std::invalid_argument("solve_distance: gamma grid does not match");
  if (!(gamma.g_min > 0.0))
    throw std::invalid_argument("solve_distance: gamma must be strictly positive");

  ConstraintSystem cs(spec, mu0, mu1, 1e-10);
  DrState state(cs, params, gamma.g, cfg);

  bool converged = false;
  while (state.iter < cfg.max_iters) {
    dr_iterate(state);
    if (dr_converged(state)) {
      converged = true;
      break;
    }
  }

  // final polish projection and exact endpoint snap
  GeodesicResult out;
  out.spec = spec;
  out.params = params;
  std::copy(state.z.begin(), state.z.end(), state.x.begin());
  state.ws.cg_tol = std::min(cfg.cg_tol, 1e-12);
  project_K(cs, state.ws, state.x);

  const int NC = cs.nc(), NT = cs.nt(), NF = cs.nf();
  std::copy(cs.u0.begin(), cs.u0.end(), state.x.begin() + cs.off_u());
  std::copy(cs.u1.begin(), cs.u1.end(), state.x.begin() + cs.off_u() + (size_t)NT * NC);
  {  // re-center the coupling variables so V = I(U) holds exactly
    PathVariables U;
    U.u.assign(state.x.begin() + cs.off_u(), state.x.begin() + cs.off_u() + (size_t)(NT + 1) * NC);
    U.m.assign(state.x.begin() + cs.off_m(), state.x.begin() + cs.off_m() + (size_t)NT * NF);
    const CenteredVariables V = interpolate(spec, U);
    std::copy(V.a.begin(), V.a.end(), state.x.begin() + cs.off_a());
    std::copy(V.b.begin(), V.b.end(), state.x.begin() + cs.off_b());
  }

  out.distance_p = detail::objective_eval(cs, params, gamma.g, state.x,
                                          &out.per_time_action, &out.clip);
  out.distance = std::pow(out.distance_p, 1.0 / params.p);
  out.densities.assign(state.x.begin() + cs.off_u(),
                       state.x.begin() + cs.off_u() + (size_t)(NT + 1) * NC);
  out.momenta.assign(state.x.begin() + cs.off_m(),
                     state.x.begin() + cs.off_m() + (size_t)NT * NF);
  out.mass_per_slice.resize(NT + 1);
  for (int k = 0; k <= NT; ++k) {
    double s = 0.0;
    for (int c = 0; c < NC; ++c) s += out.densities[(size_t)k * NC + c];
    out.mass_per_slice[k] = s * spec.vol();
  }
  out.iterations = state.iter;
  out.converged = converged && std::isfinite(out.distance_p);
  out.residuals = cs.residual(state.x);
  out.dr_gap = state.gap;
  out.objective_trace = std::move(state.objective_trace);
  out.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

/// Density snapshots along the geodesic; negatives no larger than 1e-4 of
/// the total mass in L1 are clipped (the clipped amount is reported).
inline std::vector<MeasureField> extract_geodesic(const GeodesicResult& result,
                                                  int k_samples,
                                                  double* clipped_l1 = nullptr) {
  if (!result.converged)
    throw std::invalid_argument("extract_geodesic: run did not converge");
  if (k_samples < 2) throw std::invalid_argument("extract_geodesic: need k_samples >= 2");
  const int NC = result.spec.ncells(), NT = result.spec.nt;
  const double vol = result.spec.vol();
  const double mass_scale = std::max(1e-300, result.mass_per_slice[0]);
  double clipped = 0.0;
  std::vector<MeasureField> slices;
  slices.reserve(k_samples);
  GridSpec sp = result.spec;
  for (int j = 0; j < k_samples; ++j) {
    const int k = (int)std::lround((double)j * NT / (k_samples - 1));
    MeasureField f;
    f.spec = sp;
    f.values.resize(NC);
    for (int c = 0; c < NC; ++c) {
      const double v = result.densities[(size_t)k * NC + c];
      if (v < 0.0) clipped += -v * vol;
      f.values[c] = std::max(v, 0.0);
    }
    slices.push_back(std::move(f));
  }
  if (clipped > 1e-4 * mass_scale)
    throw SolveError("extract_geodesic: excessive negative density (L1 " +
                         std::to_string(clipped) + ")",
                     clipped);
  if (clipped_l1) *clipped_l1 = clipped;
  return slices;
}

}  // namespace wot
