#pragma once

// Independent reference computations the solver is validated against:
// the 1D quantile form of W_p, the dual Sobolev norm via a Neumann
// Poisson solve, an implicit-Euler Neumann heat step, a brute-force
// prox search, and the self-similar dilation curve with its closed-form
// length. These deliberately share no code with the solver path.

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "wot/action.hpp"
#include "wot/grid.hpp"

namespace wot {

/// Piecewise-linear CDF of a 1D grid measure and its generalized inverse.
struct QuantileTable {
  GridSpec spec;
  std::vector<double> cum;  // cumulative mass at cell right edges
  double total = 0.0;

  explicit QuantileTable(const MeasureField& mu) : spec(mu.spec) {
    if (spec.dim != 1) throw std::invalid_argument("QuantileTable: 1D only");
    cum.resize(spec.nx);
    double s = 0.0;
    for (int c = 0; c < spec.nx; ++c) {
      s += mu.values[c] * spec.vol();
      cum[c] = s;
    }
    total = s;
  }

  /// Inverse CDF at s in (0,1) of the mass-normalized measure.
  double inv(double s) const {
    const double target = s * total;
    int lo = 0, hi = spec.nx - 1;
    while (lo < hi) {
      const int mid = (lo + hi) / 2;
      if (cum[mid] >= target) hi = mid;
      else lo = mid + 1;
    }
    const double prev = lo > 0 ? cum[lo - 1] : 0.0;
    const double cell_mass = cum[lo] - prev;
    const double frac = cell_mass > 0.0 ? (target - prev) / cell_mass : 0.0;
    return spec.x0 + (lo + frac) * spec.dx();
  }
};

/// W_p between equal-mass 1D measures by midpoint quadrature of the
/// quantile formula, on the common (unnormalized) mass scale.
inline double wasserstein_1d(const MeasureField& mu0, const MeasureField& mu1, double p,
                             int nodes = 10000) {
  if (!(p >= 1.0)) throw std::invalid_argument("wasserstein_1d: p must be >= 1");
  const double m0 = mu0.mass(), m1 = mu1.mass();
  if (std::abs(m0 - m1) > 1e-10 * std::max({1.0, m0, m1}))
    throw std::invalid_argument("wasserstein_1d: masses differ");
  if (m0 <= 0.0) return 0.0;
  QuantileTable q0(mu0), q1(mu1);
  double acc = 0.0;
  for (int j = 0; j < nodes; ++j) {
    const double s = (j + 0.5) / nodes;
    acc += std::pow(std::abs(q0.inv(s) - q1.inv(s)), p);
  }
  return std::pow(m0 * acc / nodes, 1.0 / p);
}

namespace detail {

// gradient on interior faces: (u[hi] - u[lo]) / d  (equals -divergence^T)
inline void face_gradient(const GridSpec& g, std::span<const double> u,
                          std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> tmp(out.size(), 0.0);
  divergence_adjoint_add(g, u, tmp);
  for (size_t i = 0; i < tmp.size(); ++i) out[i] = -tmp[i];
}

// CG for the SPD operators used by the oracles (dense-free, no precond)
template <class Op>
inline int oracle_cg(const Op& apply, std::span<const double> rhs, std::span<double> x,
                     double rtol, int maxit) {
  const size_t n = rhs.size();
  std::vector<double> r(n), p(n), Ap(n);
  apply(x, Ap);
  for (size_t i = 0; i < n; ++i) r[i] = rhs[i] - Ap[i];
  std::copy(r.begin(), r.end(), p.begin());
  double rs = dot(r, r);
  const double target2 = rtol * rtol * std::max(dot(rhs, rhs), 1e-300);
  int it = 0;
  while (rs > target2) {
    if (it++ >= maxit) throw std::runtime_error("oracle CG stagnated");
    apply(p, Ap);
    const double alpha = rs / dot(p, Ap);
    for (size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    const double rs_new = dot(r, r);
    const double beta = rs_new / rs;
    rs = rs_new;
    for (size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  return it;
}

}  // namespace detail

struct SobolevResult {
  double norm = 0.0;
  std::vector<double> face_momentum;  // optimal w = grad of the potential
};

/// Homogeneous dual Sobolev (pseudo-)distance at p = 2 for gamma = Leb on
/// the box: solves the zero-mean Neumann Poisson problem
/// -Lap u = rho1 - rho0 and returns the L2 norm of its face gradient.
inline SobolevResult sobolev_dual_12(const MeasureField& mu0, const MeasureField& mu1) {
  if (!mu0.spec.same_space(mu1.spec))
    throw std::invalid_argument("sobolev_dual_12: grids differ");
  const GridSpec& g = mu0.spec;
  const double m0 = mu0.mass(), m1 = mu1.mass();
  if (std::abs(m0 - m1) > 1e-10 * std::max({1.0, m0, m1}))
    throw std::invalid_argument("sobolev_dual_12: masses differ");
  const int nc = g.ncells(), nf = g.nfaces();
  std::vector<double> f(nc);
  double mean = 0.0;
  for (int c = 0; c < nc; ++c) {
    f[c] = mu1.values[c] - mu0.values[c];
    mean += f[c];
  }
  mean /= nc;
  for (double& v : f) v -= mean;  // Neumann compatibility gauge

  std::vector<double> grad(nf), u(nc, 0.0);
  auto apply = [&](std::span<const double> in, std::span<double> out) {
    detail::face_gradient(g, in, grad);
    divergence(g, grad, out);
    for (int c = 0; c < nc; ++c) out[c] = -out[c];  // -div grad, SPD on mean-zero
  };
  detail::oracle_cg(apply, std::span<const double>(f), std::span<double>(u), 1e-12,
                    50 * nc + 1000);

  SobolevResult res;
  res.face_momentum.resize(nf);
  detail::face_gradient(g, u, res.face_momentum);
  double s = 0.0;
  for (double w : res.face_momentum) s += w * w;
  res.norm = std::sqrt(s * g.vol());
  return res;
}

/// One implicit Euler step of the Neumann heat equation on the box:
/// (I + tau (-Lap)) u+ = u. Mass-preserving; satisfies the max principle.
inline MeasureField heat_step(const MeasureField& mu, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("heat_step: tau must be > 0");
  const GridSpec& g = mu.spec;
  const int nc = g.ncells(), nf = g.nfaces();
  std::vector<double> grad(nf), lap(nc);
  auto apply = [&](std::span<const double> in, std::span<double> out) {
    detail::face_gradient(g, in, grad);
    divergence(g, grad, out);
    for (int c = 0; c < nc; ++c) out[c] = in[c] - tau * out[c];
  };
  MeasureField out;
  out.spec = g;
  out.values = mu.values;  // warm start at the previous state
  detail::oracle_cg(apply, std::span<const double>(mu.values), std::span<double>(out.values),
                    1e-13, 50 * nc + 1000);
  for (double& v : out.values) v = std::max(v, 0.0);
  return out;
}

struct ProxSearchBox {
  double rho_hi = 4.0;
  double r_hi = 4.0;
};

/// Ground-truth prox by exhaustive grid search over (rho, |w|) followed by
/// coordinate-wise golden-section refinement. Errors out if the minimum
/// sits on the far box edge (box too small).
inline ProxResult brute_force_prox(const ActionParams& ap, double gamma_weight, double step,
                                   double rho_bar, std::span<const double> w_bar,
                                   ProxSearchBox box = {}, int resolution = 256) {
  const double g = gamma_weight;
  const double b = detail::norm_of(w_bar);
  auto obj = [&](double x, double r) {
    const double val = g * phi_eval_norm(ap, x / g, r / g);
    if (!std::isfinite(val)) return kInf;
    const double dx = x - rho_bar, dr = r - b;
    return val + (dx * dx + dr * dr) / (2.0 * step);
  };

  double best_x = std::max(rho_bar, 0.0), best_r = 0.0;
  double best = obj(best_x, best_r);
  int bi = -1, bj = -1;
  for (int i = 0; i <= resolution; ++i) {
    const double x = box.rho_hi * i / resolution;
    for (int j = 0; j <= resolution; ++j) {
      const double r = std::min(box.r_hi, b) * j / resolution;
      const double v = obj(x, r);
      if (v < best) {
        best = v;
        best_x = x;
        best_r = r;
        bi = i;
        bj = j;
      }
    }
  }
  if (bi == resolution || (bj == resolution && std::min(box.r_hi, b) < b))
    throw std::invalid_argument("brute_force_prox: minimizer on search box boundary");

  // coordinate-wise golden-section refinement
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  auto golden = [&](double lo, double hi, const std::function<double(double)>& f) {
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    double fc = f(c), fd = f(d);
    while (hi - lo > 1e-10) {
      if (fc < fd) {
        hi = d;
        d = c;
        fd = fc;
        c = hi - gr * (hi - lo);
        fc = f(c);
      } else {
        lo = c;
        c = d;
        fc = fd;
        d = lo + gr * (hi - lo);
        fd = f(d);
      }
    }
    return 0.5 * (lo + hi);
  };
  const double hx = 2.0 * box.rho_hi / resolution, hr = 2.0 * box.r_hi / resolution;
  for (int cycle = 0; cycle < 40; ++cycle) {
    const double px = best_x, pr = best_r;
    best_x = golden(std::max(0.0, best_x - hx), best_x + hx,
                    [&](double x) { return obj(x, best_r); });
    best_r = golden(std::max(0.0, best_r - hr), std::min(b, best_r + hr),
                    [&](double r) { return obj(best_x, r); });
    if (std::abs(px - best_x) < 1e-9 && std::abs(pr - best_r) < 1e-9 && cycle > 4) break;
  }

  ProxResult out;
  out.dim = (int)w_bar.size();
  out.rho = best_x;
  if (b > 0.0) {
    const double s = best_r / b;
    for (int i = 0; i < out.dim; ++i) out.w[i] = s * w_bar[i];
  }
  return out;
}

struct DilationResult {
  double numeric_length = 0.0;
  double closed_form_length = 0.0;
  double fitted_slope = 0.0;
  double expected_slope = 0.0;
  std::vector<std::array<double, 2>> samples;  // (t, log Phi_t^{1/p})
};

/// Action profile of the self-similar dilation curve
/// rho_t(x) = e^{-d t} rho0(e^{-t} x), nu_t = x rho_t: numerically by grid
/// quadrature of Phi_t = int rho_t^theta |x|^p dx, against the closed form
/// Phi_t^{1/p} = c e^{(1 - d/kappa) t}.
inline DilationResult dilation_curve_length(
    const std::function<double(double, double)>& rho0, int dim, const ActionParams& ap,
    double t_max, double half_width, int quad_n = 2048, int nsamples = 20) {
  if (ap.alpha >= 1.0)
    throw std::invalid_argument("dilation_curve_length: requires alpha < 1");
  if (dim != 1 && dim != 2) throw std::invalid_argument("dilation_curve_length: dim 1 or 2");
  const double th = ap.theta(), p = ap.p;
  const double kappa = *ap.kappa();

  const int n = dim == 1 ? quad_n : (int)std::lround(std::sqrt((double)quad_n) * 8);
  const double h = 2.0 * half_width / n;
  auto phi_at = [&](double t) {
    const double scale = std::exp(-t);
    const double damp = std::exp(-dim * t);
    double acc = 0.0, edge = 0.0, peak = 0.0;
    if (dim == 1) {
      for (int i = 0; i < n; ++i) {
        const double x = -half_width + (i + 0.5) * h;
        const double rho = damp * rho0(scale * x, 0.0);
        const double v = std::pow(rho, th) * std::pow(std::abs(x), p);
        acc += v;
        peak = std::max(peak, rho);
        if (i == 0 || i == n - 1) edge = std::max(edge, rho);
      }
      acc *= h;
    } else {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double x = -half_width + (i + 0.5) * h;
          const double y = -half_width + (j + 0.5) * h;
          const double rho = damp * rho0(scale * x, scale * y);
          acc += std::pow(rho, th) * std::pow(std::hypot(x, y), p);
          peak = std::max(peak, rho);
          if (i == 0 || i == n - 1 || j == 0 || j == n - 1) edge = std::max(edge, rho);
        }
      acc *= h * h;
    }
    if (edge > 1e-10 * peak)
      throw std::invalid_argument("dilation_curve_length: support escapes the box");
    return acc;
  };

  DilationResult res;
  res.expected_slope = 1.0 - dim / kappa;
  if (t_max == 0.0) return res;

  // slope fit on log Phi^{1/p}
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int j = 0; j < nsamples; ++j) {
    const double t = t_max * j / (nsamples - 1);
    const double y = std::log(phi_at(t)) / p;
    res.samples.push_back({t, y});
    sx += t;
    sy += y;
    sxx += t * t;
    sxy += t * y;
  }
  res.fitted_slope = (nsamples * sxy - sx * sy) / (nsamples * sxx - sx * sx);

  // numeric curve length by Simpson quadrature of Phi_t^{1/p}
  const int m = 64;
  double len = 0.0;
  for (int j = 0; j <= m; ++j) {
    const double t = t_max * j / m;
    const double w = (j == 0 || j == m) ? 1.0 : (j % 2 ? 4.0 : 2.0);
    len += w * std::pow(phi_at(t), 1.0 / p);
  }
  res.numeric_length = len * t_max / (3.0 * m);

  const double c = std::pow(phi_at(0.0), 1.0 / p);
  const double s = res.expected_slope;
  res.closed_form_length = c * (std::exp(s * t_max) - 1.0) / s;
  return res;
}

}  // namespace wot
