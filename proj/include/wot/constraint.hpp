#pragma once

// The affine feasible set of the discretized problem: continuity residual
// (u[k+1]-u[k])/dt + div m[k] = 0 per interval and cell, endpoint data
// u[0] = u0 and u[nt] = u1, and the interpolation coupling V = I(U).
// Euclidean projection onto it is computed matrix-free as
//   X - A* (A A*)^{-1} (A X - rhs)
// with (A A*)^{-1} applied by preconditioned conjugate gradient.
//
// A* has a one-dimensional kernel (the sum of all continuity rows plus
// (1/dt)-weighted endpoint rows); the CG right-hand side is consistent
// exactly when the endpoint masses agree, which is checked up front, and
// the kernel direction is deflated from the residual.

#include <cmath>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wot/grid.hpp"

namespace wot {

struct SolveError : std::runtime_error {
  double achieved = 0.0;
  SolveError(const std::string& msg, double res) : std::runtime_error(msg), achieved(res) {}
};

struct Residuals {
  double continuity = 0.0;
  double endpoint = 0.0;
  double coupling = 0.0;
};

/// Layout of the flat unknown vector X = [u | m | a | b] and of the
/// multiplier vector L = [continuity | endpoint0 | endpoint1 | coupling].
struct ConstraintSystem {
  GridSpec spec;
  std::vector<double> u0, u1;

  ConstraintSystem(const GridSpec& g, const MeasureField& mu0, const MeasureField& mu1,
                   double mass_rtol = 1e-12)
      : spec(g), u0(mu0.values), u1(mu1.values) {
    // nt = 1 is admitted here (useful for tiny explicit systems) even
    // though user-facing grids require nt >= 2
    if (g.nt < 1) throw std::invalid_argument("ConstraintSystem: nt must be >= 1");
    GridSpec gv = g;
    gv.nt = std::max(g.nt, 2);
    gv.validate();
    if (!mu0.spec.same_space(g) || !mu1.spec.same_space(g))
      throw std::invalid_argument("ConstraintSystem: endpoint grids do not match");
    mu0.validate();
    mu1.validate();
    const double m0 = mu0.mass(), m1 = mu1.mass();
    if (std::abs(m0 - m1) > mass_rtol * std::max({1.0, m0, m1}))
      throw std::invalid_argument("ConstraintSystem: endpoint masses differ (" +
                                  std::to_string(m0) + " vs " + std::to_string(m1) + ")");
  }

  int nc() const { return spec.ncells(); }
  int nf() const { return spec.nfaces(); }
  int nt() const { return spec.nt; }

  size_t off_u() const { return 0; }
  size_t off_m() const { return (size_t)(nt() + 1) * nc(); }
  size_t off_a() const { return off_m() + (size_t)nt() * nf(); }
  size_t off_b() const { return off_a() + (size_t)nt() * nc(); }
  size_t xsize() const { return off_b() + (size_t)nt() * nc() * spec.dim; }

  size_t off_cont() const { return 0; }
  size_t off_e0() const { return (size_t)nt() * nc(); }
  size_t off_e1() const { return off_e0() + nc(); }
  size_t off_ca() const { return off_e1() + nc(); }
  size_t off_cb() const { return off_ca() + (size_t)nt() * nc(); }
  size_t lsize() const { return off_cb() + (size_t)nt() * nc() * spec.dim; }

  void apply_A(std::span<const double> X, std::span<double> L) const {
    if (X.size() != xsize() || L.size() != lsize())
      throw std::invalid_argument("apply_A: shape mismatch");
    const int NC = nc(), NF = nf(), NT = nt(), D = spec.dim;
    const double idt = 1.0 / spec.dt();
    const double* u = X.data() + off_u();
    const double* m = X.data() + off_m();
    const double* a = X.data() + off_a();
    const double* b = X.data() + off_b();
    double* cont = L.data() + off_cont();
    double* e0 = L.data() + off_e0();
    double* e1 = L.data() + off_e1();
    double* ca = L.data() + off_ca();
    double* cb = L.data() + off_cb();

    const double idx = 1.0 / spec.dx(), idy = D == 2 ? 1.0 / spec.dy() : 0.0;
    for (int k = 0; k < NT; ++k) {
      const double* uk = u + (size_t)k * NC;
      const double* uk1 = u + (size_t)(k + 1) * NC;
      const double* mk = m + (size_t)k * NF;
      double* ck = cont + (size_t)k * NC;
      double* cak = ca + (size_t)k * NC;
      double* cbk = cb + (size_t)k * NC * D;
      for (int c = 0; c < NC; ++c) {
        const auto f = detail::cell_faces(spec, c);
        double dv = ((f.xhi >= 0 ? mk[f.xhi] : 0.0) - (f.xlo >= 0 ? mk[f.xlo] : 0.0)) * idx;
        cbk[c * D] = b[((size_t)k * NC + c) * D] -
                     0.5 * ((f.xlo >= 0 ? mk[f.xlo] : 0.0) + (f.xhi >= 0 ? mk[f.xhi] : 0.0));
        if (D == 2) {
          dv += ((f.yhi >= 0 ? mk[f.yhi] : 0.0) - (f.ylo >= 0 ? mk[f.ylo] : 0.0)) * idy;
          cbk[c * D + 1] = b[((size_t)k * NC + c) * D + 1] -
                           0.5 * ((f.ylo >= 0 ? mk[f.ylo] : 0.0) + (f.yhi >= 0 ? mk[f.yhi] : 0.0));
        }
        ck[c] = (uk1[c] - uk[c]) * idt + dv;
        cak[c] = a[(size_t)k * NC + c] - 0.5 * (uk[c] + uk1[c]);
      }
    }
    for (int c = 0; c < NC; ++c) {
      e0[c] = u[c];
      e1[c] = u[(size_t)NT * NC + c];
    }
  }

  void apply_At(std::span<const double> L, std::span<double> X) const {
    if (X.size() != xsize() || L.size() != lsize())
      throw std::invalid_argument("apply_At: shape mismatch");
    std::memset(X.data(), 0, X.size() * sizeof(double));
    const int NC = nc(), NF = nf(), NT = nt(), D = spec.dim;
    const double idt = 1.0 / spec.dt();
    double* u = X.data() + off_u();
    double* m = X.data() + off_m();
    double* a = X.data() + off_a();
    double* b = X.data() + off_b();
    const double* cont = L.data() + off_cont();
    const double* e0 = L.data() + off_e0();
    const double* e1 = L.data() + off_e1();
    const double* ca = L.data() + off_ca();
    const double* cb = L.data() + off_cb();

    for (int k = 0; k < NT; ++k) {
      const double* ck = cont + (size_t)k * NC;
      const double* cak = ca + (size_t)k * NC;
      const double* cbk = cb + (size_t)k * NC * D;
      double* uk = u + (size_t)k * NC;
      double* uk1 = u + (size_t)(k + 1) * NC;
      double* mk = m + (size_t)k * NF;
      divergence_adjoint_add(spec, std::span<const double>(ck, NC),
                             std::span<double>(mk, NF));
      for (int c = 0; c < NC; ++c) {
        uk[c] += -ck[c] * idt - 0.5 * cak[c];
        uk1[c] += ck[c] * idt - 0.5 * cak[c];
        a[(size_t)k * NC + c] += cak[c];
        const auto f = detail::cell_faces(spec, c);
        const double bx = cbk[c * D];
        b[((size_t)k * NC + c) * D] += bx;
        if (f.xlo >= 0) mk[f.xlo] -= 0.5 * bx;
        if (f.xhi >= 0) mk[f.xhi] -= 0.5 * bx;
        if (D == 2) {
          const double by = cbk[c * D + 1];
          b[((size_t)k * NC + c) * D + 1] += by;
          if (f.ylo >= 0) mk[f.ylo] -= 0.5 * by;
          if (f.yhi >= 0) mk[f.yhi] -= 0.5 * by;
        }
      }
    }
    for (int c = 0; c < NC; ++c) {
      u[c] += e0[c];
      u[(size_t)NT * NC + c] += e1[c];
    }
  }

  std::vector<double> rhs() const {
    std::vector<double> r(lsize(), 0.0);
    std::copy(u0.begin(), u0.end(), r.begin() + off_e0());
    std::copy(u1.begin(), u1.end(), r.begin() + off_e1());
    return r;
  }

  /// Normalized kernel vector of A* (constant continuity multipliers).
  std::vector<double> kernel_vector() const {
    std::vector<double> k(lsize(), 0.0);
    const double idt = 1.0 / spec.dt();
    for (size_t i = off_cont(); i < off_cont() + (size_t)nt() * nc(); ++i) k[i] = 1.0;
    for (size_t i = off_e0(); i < off_e0() + (size_t)nc(); ++i) k[i] = idt;
    for (size_t i = off_e1(); i < off_e1() + (size_t)nc(); ++i) k[i] = -idt;
    const double n = detail::nrm2(k);
    for (double& v : k) v /= n;
    return k;
  }

  /// Row norms of A A* (Jacobi preconditioner).
  std::vector<double> normal_diagonal() const {
    std::vector<double> d(lsize(), 0.0);
    const int NC = nc(), NT = nt(), D = spec.dim;
    const double idt2 = 1.0 / (spec.dt() * spec.dt());
    const double idx2 = 1.0 / (spec.dx() * spec.dx());
    const double idy2 = D == 2 ? 1.0 / (spec.dy() * spec.dy()) : 0.0;
    for (int c = 0; c < NC; ++c) {
      const auto f = detail::cell_faces(spec, c);
      const int nxf = (f.xlo >= 0) + (f.xhi >= 0);
      const int nyf = (f.ylo >= 0) + (f.yhi >= 0);
      const double cont_d = 2.0 * idt2 + nxf * idx2 + nyf * idy2;
      for (int k = 0; k < NT; ++k) d[off_cont() + (size_t)k * NC + c] = cont_d;
      d[off_e0() + c] = 1.0;
      d[off_e1() + c] = 1.0;
      for (int k = 0; k < NT; ++k) {
        d[off_ca() + (size_t)k * NC + c] = 1.5;
        d[off_cb() + ((size_t)k * NC + c) * D] = 1.0 + 0.25 * nxf;
        if (D == 2) d[off_cb() + ((size_t)k * NC + c) * D + 1] = 1.0 + 0.25 * nyf;
      }
    }
    return d;
  }

  Residuals residual(std::span<const double> X) const {
    std::vector<double> L(lsize());
    apply_A(X, L);
    const auto r = rhs();
    for (size_t i = 0; i < L.size(); ++i) L[i] -= r[i];
    Residuals res;
    res.continuity = detail::nrm2(std::span<const double>(L.data() + off_cont(),
                                                          (size_t)nt() * nc()));
    res.endpoint = detail::nrm2(std::span<const double>(L.data() + off_e0(), 2 * (size_t)nc()));
    res.coupling = detail::nrm2(std::span<const double>(L.data() + off_ca(),
                                                        lsize() - off_ca()));
    return res;
  }
};

/// Buffers and warm-start state for repeated projections. A workspace is
/// bound to one system shape and must not be shared mid-solve.
struct ProjectionWorkspace {
  double cg_tol = 1e-10;
  int cg_max_iters = 200000;
  bool use_jacobi = true;

  std::vector<double> lambda;  // previous dual solution (warm start)
  std::vector<double> rr, zz, pp, App, xtmp, rin;
  std::vector<double> diag, kernel;
  int last_cg_iters = 0;
  long long total_cg_iters = 0;

  void bind(const ConstraintSystem& cs) {
    const size_t L = cs.lsize(), X = cs.xsize();
    if (lambda.size() != L) {
      lambda.assign(L, 0.0);
      rr.resize(L);
      zz.resize(L);
      pp.resize(L);
      App.resize(L);
      rin.resize(L);
      xtmp.resize(X);
      diag = cs.normal_diagonal();
      kernel = cs.kernel_vector();
    }
  }
  void reset() { std::fill(lambda.begin(), lambda.end(), 0.0); }
};

namespace detail {
inline void deflate(std::span<double> v, std::span<const double> k) {
  const double c = dot(v, k);
  for (size_t i = 0; i < v.size(); ++i) v[i] -= c * k[i];
}
}  // namespace detail

/// Euclidean projection of X onto the affine set, in place.
/// Throws SolveError (carrying the achieved residual) on CG stagnation.
inline void project_K(const ConstraintSystem& cs, ProjectionWorkspace& ws,
                      std::span<double> X) {
  ws.bind(cs);
  const size_t L = cs.lsize();
  auto applyAAt = [&](std::span<const double> in, std::span<double> out) {
    cs.apply_At(in, ws.xtmp);
    cs.apply_A(ws.xtmp, out);
  };

  // r_in = A X - rhs, deflated against the kernel of A*
  cs.apply_A(X, ws.rin);
  {
    const auto r = cs.rhs();
    for (size_t i = 0; i < L; ++i) ws.rin[i] -= r[i];
  }
  detail::deflate(ws.rin, ws.kernel);
  const double rhs_norm = detail::nrm2(ws.rin);
  if (rhs_norm == 0.0) return;
  const double target = ws.cg_tol * rhs_norm;

  // PCG on AA* s = r_in, warm-started from the previous multiplier
  std::span<double> s(ws.lambda);
  applyAAt(s, ws.rr);
  for (size_t i = 0; i < L; ++i) ws.rr[i] = ws.rin[i] - ws.rr[i];
  detail::deflate(ws.rr, ws.kernel);

  double rz = 0.0;
  bool restart = true;
  int it = 0;
  double rnorm = detail::nrm2(ws.rr);
  while (rnorm > target) {
    if (it++ >= ws.cg_max_iters)
      throw SolveError("project_K: CG stagnated, relative residual " +
                           std::to_string(rnorm / rhs_norm),
                       rnorm / rhs_norm);
    for (size_t i = 0; i < L; ++i)
      ws.zz[i] = ws.use_jacobi ? ws.rr[i] / ws.diag[i] : ws.rr[i];
    detail::deflate(ws.zz, ws.kernel);
    const double rz_new = detail::dot(ws.rr, ws.zz);
    if (restart) {
      std::copy(ws.zz.begin(), ws.zz.end(), ws.pp.begin());
      restart = false;
    } else {
      const double beta = rz_new / rz;
      for (size_t i = 0; i < L; ++i) ws.pp[i] = ws.zz[i] + beta * ws.pp[i];
    }
    rz = rz_new;
    applyAAt(ws.pp, ws.App);
    const double pAp = detail::dot(ws.pp, ws.App);
    if (!(pAp > 0.0)) break;  // kernel direction exhausted; residual is at floor
    const double alpha = rz / pAp;
    detail::axpy(alpha, ws.pp, s);
    detail::axpy(-alpha, ws.App, ws.rr);
    detail::deflate(ws.rr, ws.kernel);
    rnorm = detail::nrm2(ws.rr);
  }
  ws.last_cg_iters = it;
  ws.total_cg_iters += it;

  cs.apply_At(s, ws.xtmp);
  for (size_t i = 0; i < X.size(); ++i) X[i] -= ws.xtmp[i];
}

}  // namespace wot
