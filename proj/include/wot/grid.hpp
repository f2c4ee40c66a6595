#pragma once

// Rectangular 1D/2D space-time staggered grids and the linear operators
// (divergence, interpolation and their adjoints) used by the discrete
// continuity equation. Densities live on time slices x cell centers,
// momenta on time intervals x interior faces; boundary faces carry zero
// momentum (zero-flux box).

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wot {

struct GridSpec {
  int dim = 1;
  int nx = 0;
  int ny = 1;  // unused when dim == 1
  double x0 = 0.0, x1 = 1.0;
  double y0 = 0.0, y1 = 1.0;
  int nt = 0;

  double dx() const { return (x1 - x0) / nx; }
  double dy() const { return dim == 2 ? (y1 - y0) / ny : 1.0; }
  double dt() const { return 1.0 / nt; }
  double vol() const { return dim == 2 ? dx() * dy() : dx(); }

  int ncells() const { return dim == 2 ? nx * ny : nx; }
  // interior faces only; boundary faces are structurally zero
  int nfaces_x() const { return dim == 2 ? (nx - 1) * ny : nx - 1; }
  int nfaces_y() const { return dim == 2 ? nx * (ny - 1) : 0; }
  int nfaces() const { return nfaces_x() + nfaces_y(); }

  int cell(int ix, int iy = 0) const { return dim == 2 ? ix * ny + iy : ix; }
  int cell_ix(int c) const { return dim == 2 ? c / ny : c; }
  int cell_iy(int c) const { return dim == 2 ? c % ny : 0; }

  double cx(int c) const { return x0 + (cell_ix(c) + 0.5) * dx(); }
  double cy(int c) const { return dim == 2 ? y0 + (cell_iy(c) + 0.5) * dy() : 0.0; }
  double cell_radius(int c) const {
    return dim == 2 ? std::hypot(cx(c), cy(c)) : std::abs(cx(c));
  }

  bool same_space(const GridSpec& o) const {
    return dim == o.dim && nx == o.nx && (dim == 1 || ny == o.ny) &&
           x0 == o.x0 && x1 == o.x1 && (dim == 1 || (y0 == o.y0 && y1 == o.y1));
  }

  void validate() const {
    if (dim != 1 && dim != 2) throw std::invalid_argument("GridSpec: dim must be 1 or 2");
    if (nx < 2) throw std::invalid_argument("GridSpec: nx must be >= 2");
    if (dim == 2 && ny < 2) throw std::invalid_argument("GridSpec: ny must be >= 2");
    if (nt < 2) throw std::invalid_argument("GridSpec: nt must be >= 2");
    if (!(x1 > x0)) throw std::invalid_argument("GridSpec: empty x extent");
    if (dim == 2 && !(y1 > y0)) throw std::invalid_argument("GridSpec: empty y extent");
  }
};

/// A nonnegative grid measure stored as a Lebesgue density per cell.
struct MeasureField {
  GridSpec spec;  // spatial part only; spec.nt is ignored
  std::vector<double> values;

  double mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * spec.vol();
  }
  void validate() const {
    if ((int)values.size() != spec.ncells())
      throw std::invalid_argument("MeasureField: value count != cell count");
    for (double v : values)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::invalid_argument("MeasureField: values must be finite and >= 0");
  }
};

/// Staggered unknowns: u indexed by (time slice, cell), m by (time
/// interval, interior face). Face order per interval: all x-faces, then
/// all y-faces, each indexed by the lower-adjacent cell.
struct PathVariables {
  std::vector<double> u;  // (nt+1) * ncells
  std::vector<double> m;  // nt * nfaces
};

/// Centered copies: a on (interval, cell), b on (interval, cell, axis).
struct CenteredVariables {
  std::vector<double> a;  // nt * ncells
  std::vector<double> b;  // nt * ncells * dim
};

inline PathVariables make_path(const GridSpec& g) {
  return PathVariables{std::vector<double>((g.nt + 1) * g.ncells(), 0.0),
                       std::vector<double>((size_t)g.nt * g.nfaces(), 0.0)};
}

inline CenteredVariables make_centered(const GridSpec& g) {
  return CenteredVariables{std::vector<double>((size_t)g.nt * g.ncells(), 0.0),
                           std::vector<double>((size_t)g.nt * g.ncells() * g.dim, 0.0)};
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
inline double nrm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// Interior-face indices adjacent to cell c along an axis; -1 marks a
// boundary face (zero momentum).
struct CellFaces {
  int xlo, xhi, ylo, yhi;
};

inline CellFaces cell_faces(const GridSpec& g, int c) {
  CellFaces f{-1, -1, -1, -1};
  if (g.dim == 1) {
    f.xlo = c > 0 ? c - 1 : -1;
    f.xhi = c < g.nx - 1 ? c : -1;
  } else {
    const int ix = g.cell_ix(c), iy = g.cell_iy(c);
    f.xlo = ix > 0 ? (ix - 1) * g.ny + iy : -1;
    f.xhi = ix < g.nx - 1 ? ix * g.ny + iy : -1;
    const int off = g.nfaces_x();
    f.ylo = iy > 0 ? off + ix * (g.ny - 1) + (iy - 1) : -1;
    f.yhi = iy < g.ny - 1 ? off + ix * (g.ny - 1) + iy : -1;
  }
  return f;
}

}  // namespace detail

/// Discrete divergence of one interval's staggered momenta:
/// out[c] = sum_axis (m[face+] - m[face-]) / d(axis), boundary faces = 0.
inline void divergence(const GridSpec& g, std::span<const double> m,
                       std::span<double> out) {
  if ((int)m.size() != g.nfaces() || (int)out.size() != g.ncells())
    throw std::invalid_argument("divergence: shape mismatch");
  const double idx = 1.0 / g.dx(), idy = g.dim == 2 ? 1.0 / g.dy() : 0.0;
  for (int c = 0; c < g.ncells(); ++c) {
    const auto f = detail::cell_faces(g, c);
    double d = ((f.xhi >= 0 ? m[f.xhi] : 0.0) - (f.xlo >= 0 ? m[f.xlo] : 0.0)) * idx;
    if (g.dim == 2)
      d += ((f.yhi >= 0 ? m[f.yhi] : 0.0) - (f.ylo >= 0 ? m[f.ylo] : 0.0)) * idy;
    out[c] = d;
  }
}

inline std::vector<double> divergence(const GridSpec& g, const std::vector<double>& m) {
  std::vector<double> out(g.ncells());
  divergence(g, m, out);
  return out;
}

/// Adjoint of divergence, accumulated into m_out (interior faces).
inline void divergence_adjoint_add(const GridSpec& g, std::span<const double> lam,
                                   std::span<double> m_out) {
  if ((int)lam.size() != g.ncells() || (int)m_out.size() != g.nfaces())
    throw std::invalid_argument("divergence_adjoint: shape mismatch");
  const double idx = 1.0 / g.dx(), idy = g.dim == 2 ? 1.0 / g.dy() : 0.0;
  if (g.dim == 1) {
    for (int f = 0; f < g.nx - 1; ++f) m_out[f] += (lam[f] - lam[f + 1]) * idx;
    return;
  }
  for (int ix = 0; ix < g.nx - 1; ++ix)
    for (int iy = 0; iy < g.ny; ++iy)
      m_out[ix * g.ny + iy] += (lam[g.cell(ix, iy)] - lam[g.cell(ix + 1, iy)]) * idx;
  const int off = g.nfaces_x();
  for (int ix = 0; ix < g.nx; ++ix)
    for (int iy = 0; iy < g.ny - 1; ++iy)
      m_out[off + ix * (g.ny - 1) + iy] +=
          (lam[g.cell(ix, iy)] - lam[g.cell(ix, iy + 1)]) * idy;
}

/// Staggered -> centered averaging: a[k] = (u[k]+u[k+1])/2,
/// b[k][c][ax] = mean of the two adjacent face momenta (0 at the boundary).
inline CenteredVariables interpolate(const GridSpec& g, const PathVariables& U) {
  const int nc = g.ncells(), nf = g.nfaces();
  if ((int)U.u.size() != (g.nt + 1) * nc || (int)U.m.size() != g.nt * nf)
    throw std::invalid_argument("interpolate: shape mismatch");
  CenteredVariables V = make_centered(g);
  for (int k = 0; k < g.nt; ++k) {
    const double* u0 = &U.u[(size_t)k * nc];
    const double* u1 = &U.u[(size_t)(k + 1) * nc];
    const double* mk = nf ? &U.m[(size_t)k * nf] : nullptr;
    double* ak = &V.a[(size_t)k * nc];
    double* bk = &V.b[(size_t)k * nc * g.dim];
    for (int c = 0; c < nc; ++c) {
      ak[c] = 0.5 * (u0[c] + u1[c]);
      const auto f = detail::cell_faces(g, c);
      bk[c * g.dim] = 0.5 * ((f.xlo >= 0 ? mk[f.xlo] : 0.0) + (f.xhi >= 0 ? mk[f.xhi] : 0.0));
      if (g.dim == 2)
        bk[c * g.dim + 1] =
            0.5 * ((f.ylo >= 0 ? mk[f.ylo] : 0.0) + (f.yhi >= 0 ? mk[f.yhi] : 0.0));
    }
  }
  return V;
}

/// Exact adjoint of interpolate under the Euclidean inner products.
inline PathVariables interpolate_adjoint(const GridSpec& g, const CenteredVariables& V) {
  const int nc = g.ncells(), nf = g.nfaces();
  if ((int)V.a.size() != g.nt * nc || (int)V.b.size() != (size_t)g.nt * nc * g.dim)
    throw std::invalid_argument("interpolate_adjoint: shape mismatch");
  PathVariables U = make_path(g);
  for (int k = 0; k < g.nt; ++k) {
    const double* ak = &V.a[(size_t)k * nc];
    const double* bk = &V.b[(size_t)k * nc * g.dim];
    double* u0 = &U.u[(size_t)k * nc];
    double* u1 = &U.u[(size_t)(k + 1) * nc];
    double* mk = nf ? &U.m[(size_t)k * nf] : nullptr;
    for (int c = 0; c < nc; ++c) {
      u0[c] += 0.5 * ak[c];
      u1[c] += 0.5 * ak[c];
      const auto f = detail::cell_faces(g, c);
      if (f.xlo >= 0) mk[f.xlo] += 0.5 * bk[c * g.dim];
      if (f.xhi >= 0) mk[f.xhi] += 0.5 * bk[c * g.dim];
      if (g.dim == 2) {
        if (f.ylo >= 0) mk[f.ylo] += 0.5 * bk[c * g.dim + 1];
        if (f.yhi >= 0) mk[f.yhi] += 0.5 * bk[c * g.dim + 1];
      }
    }
  }
  return U;
}

}  // namespace wot
