#pragma once

// The action density phi_{p,alpha}(rho, w) = rho^(theta-p) |w|^p with
// theta = (1-alpha) p + alpha, its dual rho^alpha |z|^q, the recession
// function, the mobility-power entropy, and the pointwise proximal map
// the splitting solver is built on.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "wot/grid.hpp"

namespace wot {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct ActionParams {
  double p = 2.0;
  double alpha = 1.0;

  double q() const { return p / (p - 1.0); }
  double theta() const { return (1.0 - alpha) * p + alpha; }
  // kappa = p/(theta-1) = q/(1-alpha); absent at alpha = 1 (theta = 1).
  std::optional<double> kappa() const {
    if (alpha >= 1.0) return std::nullopt;
    return q() / (1.0 - alpha);
  }
  std::optional<double> kappa_star() const {
    auto k = kappa();
    if (!k || *k <= 1.0) return std::nullopt;
    return *k / (*k - 1.0);
  }

  void validate() const {
    if (!(p > 1.0)) throw std::invalid_argument("ActionParams: p must be > 1");
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw std::invalid_argument("ActionParams: alpha must be in [0,1]");
  }
};

/// Per-cell density of the reference measure gamma w.r.t. Lebesgue.
struct ReferenceMeasure {
  enum class Kind { lebesgue, gibbs, custom };

  Kind kind = Kind::lebesgue;
  GridSpec spec;
  std::vector<double> g;
  double g_min = 1.0;

  static ReferenceMeasure lebesgue(const GridSpec& spec) {
    ReferenceMeasure r;
    r.kind = Kind::lebesgue;
    r.spec = spec;
    r.g.assign(spec.ncells(), 1.0);
    r.g_min = 1.0;
    return r;
  }
  /// gamma = exp(-V) Leb with V sampled at cell centers.
  static ReferenceMeasure gibbs(const GridSpec& spec, const std::vector<double>& V) {
    if ((int)V.size() != spec.ncells())
      throw std::invalid_argument("ReferenceMeasure::gibbs: shape mismatch");
    ReferenceMeasure r;
    r.kind = Kind::gibbs;
    r.spec = spec;
    r.g.resize(V.size());
    for (size_t i = 0; i < V.size(); ++i) r.g[i] = std::exp(-V[i]);
    r.g_min = *std::min_element(r.g.begin(), r.g.end());
    return r;
  }
  static ReferenceMeasure custom(const GridSpec& spec, std::vector<double> g) {
    if ((int)g.size() != spec.ncells())
      throw std::invalid_argument("ReferenceMeasure::custom: shape mismatch");
    ReferenceMeasure r;
    r.kind = Kind::custom;
    r.spec = spec;
    r.g = std::move(g);
    r.g_min = *std::min_element(r.g.begin(), r.g.end());
    if (!(r.g_min > 0.0) || !std::isfinite(r.g_min))
      throw std::invalid_argument("ReferenceMeasure: density must be strictly positive");
    return r;
  }
  double total() const {
    double s = 0.0;
    for (double v : g) s += v;
    return s * spec.vol();
  }
};

namespace detail {
inline double norm_of(std::span<const double> w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return std::sqrt(s);
}
}  // namespace detail

/// phi_{p,alpha}(rho, w) with the extended-value conventions:
/// rho < 0 -> +inf; rho = 0 -> 0 if w = 0, |w|^p if alpha = 0, else +inf.
/// Never NaN; +inf is a value, not an error.
inline double phi_eval_norm(const ActionParams& ap, double rho, double wnorm) {
  if (rho < 0.0) return kInf;
  if (wnorm == 0.0) return 0.0;
  if (ap.alpha == 0.0) return std::pow(wnorm, ap.p);
  if (rho == 0.0) return kInf;
  return std::pow(rho, ap.theta() - ap.p) * std::pow(wnorm, ap.p);
}

inline double phi_eval(const ActionParams& ap, double rho, std::span<const double> w) {
  return phi_eval_norm(ap, rho, detail::norm_of(w));
}

/// Dual density rho^alpha |z|^q (concave and nondecreasing in rho).
inline double phi_dual_eval(const ActionParams& ap, double rho, std::span<const double> z) {
  if (rho < 0.0) throw std::invalid_argument("phi_dual_eval: rho must be >= 0");
  const double zn = detail::norm_of(z);
  if (zn == 0.0) return 0.0;
  const double pw = ap.alpha == 0.0 ? 1.0 : std::pow(rho, ap.alpha);
  return pw * std::pow(zn, ap.q());
}

/// Recession function: for alpha < 1 it is 0 on w = 0 and +inf otherwise;
/// for alpha = 1 phi is 1-homogeneous and coincides with its recession.
inline double phi_recession(const ActionParams& ap, double rho, std::span<const double> w) {
  const double wn = detail::norm_of(w);
  if (ap.alpha < 1.0) return wn == 0.0 ? 0.0 : kInf;
  return phi_eval_norm(ap, rho, wn);
}

struct ProxResult {
  double rho = 0.0;
  std::array<double, 2> w{0.0, 0.0};
  int dim = 1;
};

/// Thrown when the safeguarded scalar solves inside prox_phi cannot
/// bracket a root; carries the offending inputs.
struct ProxError : std::runtime_error {
  explicit ProxError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

// Optimal |w| for fixed rho > 0: solves r + tau p rho^(theta-p) r^(p-1) = b
// on [0, b]. The left side is strictly increasing in r.
inline double prox_inner_radius(const ActionParams& ap, double tau, double x, double b) {
  const double p = ap.p, th = ap.theta();
  if (b == 0.0) return 0.0;
  if (ap.alpha == 0.0 && p == 2.0) return b / (1.0 + 2.0 * tau);
  double coef;  // tau * p * x^(theta-p)
  const double ex = th - p;
  if (ex == 0.0) coef = tau * p;
  else coef = tau * p * std::pow(x, ex);
  if (!std::isfinite(coef) || coef > 1e100) {
    // asymptotic regime: r^(p-1) ~ b / coef
    const double lr = (std::log(b) - std::log(tau * p) - ex * std::log(x)) / (p - 1.0);
    return std::exp(lr);
  }
  if (p == 2.0) return b / (1.0 + coef);
  // safeguarded Newton on F(r) = r + coef r^(p-1) - b, root in (0, b]
  double lo = 0.0, hi = b, r = b / (1.0 + coef);
  if (r <= 0.0 || r >= b) r = 0.5 * b;
  for (int it = 0; it < 200; ++it) {
    const double rp1 = std::pow(r, p - 1.0);
    const double F = r + coef * rp1 - b;
    if (F > 0.0) hi = r;
    else lo = r;
    const double dF = 1.0 + coef * (p - 1.0) * std::pow(r, p - 2.0);
    double rn = r - F / dF;
    if (!(rn > lo && rn < hi)) rn = 0.5 * (lo + hi);
    if (std::abs(rn - r) <= 1e-16 * b) { r = rn; break; }
    r = rn;
  }
  return r;
}

// d/dx of the partially minimized prox objective
//   g(x) = tau phi(x, r*(x)) + (x - xb)^2/2 + (r*(x) - b)^2/2,
// by the envelope theorem: g'(x) = tau (theta-p) x^(theta-p-1) r^p + (x - xb).
// The power product is formed in log space when underflow threatens.
inline double prox_outer_slope(const ActionParams& ap, double tau, double xb, double b,
                               double x, double* r_out = nullptr) {
  const double p = ap.p, th = ap.theta();
  const double r = prox_inner_radius(ap, tau, x, b);
  if (r_out) *r_out = r;
  if (ap.alpha == 0.0) return x - xb;
  double term;
  if (x < 1e-8 || r < 1e-8) {
    if (r <= 0.0) term = 0.0;
    else term = std::exp((th - p - 1.0) * std::log(x) + p * std::log(r));
  } else {
    term = std::pow(x, th - p - 1.0) * std::pow(r, p);
  }
  if (!std::isfinite(term)) return -kInf;  // domain edge, slope points inward
  return (x - xb) - tau * (p - th) * term;
}

}  // namespace detail

/// Proximal map of f(x, y) = g phi(x/g, y/g):
///   argmin over x >= 0, y of f(x, y) + (|x - rho_bar|^2 + |y - w_bar|^2) / (2 step).
/// Uses the reduction prox_{step f}(xb, yb) = g prox_{(step/g) phi}(xb/g, yb/g),
/// eliminates y along w_bar, and solves the remaining scalar equation by
/// safeguarded Newton with a bisection bracket.
inline ProxResult prox_phi(const ActionParams& ap, double gamma_weight, double step,
                           double rho_bar, std::span<const double> w_bar) {
  ap.validate();
  if (!(step > 0.0)) throw std::invalid_argument("prox_phi: step must be > 0");
  if (!(gamma_weight > 0.0)) throw std::invalid_argument("prox_phi: gamma weight must be > 0");
  ProxResult out;
  out.dim = (int)w_bar.size();

  const double g = gamma_weight;
  const double tau = step / g;
  const double xb = rho_bar / g;
  const double b = detail::norm_of(w_bar) / g;
  const double p = ap.p, th = ap.theta();

  double x, r;
  if (b == 0.0) {
    x = std::max(xb, 0.0);
    r = 0.0;
  } else if (ap.alpha == 0.0) {
    x = std::max(xb, 0.0);
    r = detail::prox_inner_radius(ap, tau, 1.0, b);
  } else {
    // bracket [lo, hi] with slope(lo) < 0 <= slope(hi)
    double hi = std::max(1.0, xb + tau * (p - th) * std::pow(b, p)) + 1.0;
    while (detail::prox_outer_slope(ap, tau, xb, b, hi) < 0.0) hi *= 2.0;
    double lo = 0.0;
    bool at_zero = false;
    if (ap.alpha >= 1.0) {
      // slope has a finite limit at 0+; the minimizer may sit on the boundary
      const double c = std::pow(b / (tau * p), 1.0 / (p - 1.0));
      const double slope0 = -tau * (p - 1.0) * std::pow(c, p) - xb;
      if (slope0 >= 0.0) at_zero = true;
    } else {
      lo = std::min(1e-3, 0.5 * hi);
      while (detail::prox_outer_slope(ap, tau, xb, b, lo) >= 0.0) {
        lo *= 0.0625;
        if (lo < 1e-250) { at_zero = true; break; }
      }
    }
    if (at_zero) {
      x = 0.0;
      r = 0.0;
    } else {
      if (!(detail::prox_outer_slope(ap, tau, xb, b, hi) >= 0.0))
        throw ProxError("prox_phi: failed to bracket the stationary point");
      x = 0.5 * (lo + hi);
      // Newton on the slope with bisection safeguard; the slope is
      // increasing in x (the reduced objective is convex).
      for (int it = 0; it < 200; ++it) {
        const double G = detail::prox_outer_slope(ap, tau, xb, b, x, &r);
        if (G > 0.0) hi = x;
        else lo = x;
        const double h = std::max(1e-9 * std::max(1.0, x), 1e-12);
        const double Gp = (detail::prox_outer_slope(ap, tau, xb, b, x + h) - G) / h;
        double xn = (std::isfinite(G) && std::isfinite(Gp) && Gp > 0.0) ? x - G / Gp : 0.5 * (lo + hi);
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        if (std::abs(xn - x) <= 1e-15 * std::max(1.0, x)) { x = xn; break; }
        x = xn;
      }
      r = detail::prox_inner_radius(ap, tau, x, b);
    }
  }

  out.rho = g * x;
  if (b > 0.0 && r > 0.0) {
    const double s = r / b;  // optimal w is colinear with w_bar
    for (int i = 0; i < out.dim; ++i) out.w[i] = s * w_bar[i];
  }
  return out;
}

/// Entropy Psi_alpha(mu) = sum psi_alpha(u) vol with
/// psi_alpha(u) = u^(2-alpha) / ((2-alpha)(1-alpha)), alpha in (0,1).
inline double entropy_psi_density(double alpha, double u) {
  return std::pow(u, 2.0 - alpha) / ((2.0 - alpha) * (1.0 - alpha));
}

inline double entropy_Psi(double alpha, const MeasureField& mu) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("entropy_Psi: alpha must be in (0,1)");
  double s = 0.0;
  for (double v : mu.values) s += entropy_psi_density(alpha, v);
  return s * mu.spec.vol();
}

/// Moment functional: sum u(c) (max(1, |x_c|))^r vol.
inline double moment(const MeasureField& mu, double r) {
  double s = 0.0;
  for (int c = 0; c < mu.spec.ncells(); ++c)
    s += mu.values[c] * std::pow(std::max(1.0, mu.spec.cell_radius(c)), r);
  return s * mu.spec.vol();
}

}  // namespace wot
