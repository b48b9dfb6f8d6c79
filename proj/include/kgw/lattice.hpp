#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kgw/errors.hpp"

namespace kgw {

// Multiplet-valued lattice field, shape nt x nx x p, spatial index periodic.
struct Field {
  int nt = 0, nx = 0, p = 1;
  std::vector<double> v;

  Field() = default;
  Field(int nt_, int nx_, int p_) : nt(nt_), nx(nx_), p(p_), v(std::size_t(nt_) * nx_ * p_, 0.0) {}

  int wrap(int j) const {
    j %= nx;
    return j < 0 ? j + nx : j;
  }

  double& at(int i, int j, int c) { return v[(std::size_t(i) * nx + wrap(j)) * p + c]; }
  double at(int i, int j, int c) const { return v[(std::size_t(i) * nx + wrap(j)) * p + c]; }

  bool same_shape(const Field& o) const { return nt == o.nt && nx == o.nx && p == o.p; }

  Field& operator+=(const Field& o) {
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += o.v[k];
    return *this;
  }
  Field& operator-=(const Field& o) {
    for (std::size_t k = 0; k < v.size(); ++k) v[k] -= o.v[k];
    return *this;
  }
  Field& operator*=(double s) {
    for (auto& x : v) x *= s;
    return *this;
  }
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }

  double max_abs() const {
    double m = 0.0;
    for (auto x : v) m = std::max(m, std::abs(x));
    return m;
  }

  // support rows against an absolute threshold
  std::pair<int, int> support_rows(double thresh = 0.0) const {
    int lo = nt, hi = -1;
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < nx; ++j)
        for (int c = 0; c < p; ++c)
          if (std::abs(at(i, j, c)) > thresh) {
            lo = std::min(lo, i);
            hi = std::max(hi, i);
          }
    return {lo, hi};
  }
};

// Scalar (single-component) plane of values, used for metric components.
struct Plane {
  int nt = 0, nx = 0;
  std::vector<double> v;
  Plane() = default;
  Plane(int nt_, int nx_, double fill = 0.0) : nt(nt_), nx(nx_), v(std::size_t(nt_) * nx_, fill) {}
  int wrap(int j) const {
    j %= nx;
    return j < 0 ? j + nx : j;
  }
  double& at(int i, int j) { return v[std::size_t(i) * nx + wrap(j)]; }
  double at(int i, int j) const { return v[std::size_t(i) * nx + wrap(j)]; }
};

enum class GreenKind { retarded, advanced };

// 1+1 dimensional lattice spacetime: spatial circle, temporal margin, metric
// components g_tt > 0, g_tx, g_xx < 0 with det g < 0, fixed external source.
// Values are immutable after construction.
class Lattice {
 public:
  int nt = 0, nx = 0, p = 1;
  double dt = 0, dx = 0;
  double mass = 0;
  int margin = 2;
  Plane gtt, gtx, gxx;
  Field source;  // J
  std::uint64_t id = 0;

  // derived stencil data
  Plane rho;   // sqrt|det g|
  Plane ca;    // rho g^tt
  Plane cb;    // rho g^tx
  Plane cc;    // rho g^xx

  static Lattice make(int nt, int nx, double dt, double dx, double mass, int p, int margin,
                      Plane gtt, Plane gtx, Plane gxx, Field source) {
    Lattice m;
    m.nt = nt;
    m.nx = nx;
    m.dt = dt;
    m.dx = dx;
    m.mass = mass;
    m.p = p;
    m.margin = margin;
    m.gtt = std::move(gtt);
    m.gtx = std::move(gtx);
    m.gxx = std::move(gxx);
    m.source = std::move(source);
    m.id = fresh_id();
    if (nt < 8 || nx < 4 || p < 1 || dt <= 0 || dx <= 0 || mass < 0)
      throw GeometryError("lattice: bad sizes");
    if (margin < 2 || 2 * margin + 4 > nt) throw GeometryError("lattice: margin too large");
    if (!(m.source.nt == nt && m.source.nx == nx && m.source.p == p))
      throw StructuralError("lattice: source shape mismatch");
    m.rho = Plane(nt, nx);
    m.ca = Plane(nt, nx);
    m.cb = Plane(nt, nx);
    m.cc = Plane(nt, nx);
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < nx; ++j) {
        double tt = m.gtt.at(i, j), tx = m.gtx.at(i, j), xx = m.gxx.at(i, j);
        double det = tt * xx - tx * tx;
        if (!(tt > 0.0) || !(det < 0.0) || !(xx < 0.0))
          throw GeometryError("lattice: metric not Lorentzian with spacelike slices");
        double r = std::sqrt(-det);
        m.rho.at(i, j) = r;
        m.ca.at(i, j) = -xx / r;  // rho g^tt
        m.cb.at(i, j) = tx / r;   // rho g^tx
        m.cc.at(i, j) = -tt / r;  // rho g^xx
        // characteristic speeds from g_tt dt^2 + 2 g_tx dt dx + g_xx dx^2 = 0
        double s = std::sqrt(tx * tx - tt * xx);
        double c1 = (-tx + s) / xx, c2 = (-tx - s) / xx;
        double cmax = std::max(std::abs(c1), std::abs(c2));
        if (cmax * dt > dx * (1.0 + 1e-12))
          throw GeometryError("lattice: causal-speed bound violated");
      }
    // explicit solvability: forward coupling strictly diagonally dominant
    for (int i = 0; i + 1 < nt; ++i)
      for (int j = 0; j < nx; ++j) {
        double d = m.fwd_diag(i, j);
        double up = std::abs(m.fwd_up(i, j)), dn = std::abs(m.fwd_dn(i, j));
        if (!(d > 0.0) || up + dn >= d)
          throw GeometryError("lattice: forward stencil not explicitly solvable");
      }
    return m;
  }

  double vol(int i, int j) const { return rho.at(i, j) * dt * dx; }

  // coefficients of phi_{i+1,*} in the stencil centered at (i,j)
  double fwd_diag(int i, int j) const {
    return 0.5 * (ca.at(i, j) + ca.at(i + 1, j)) / (dt * dt);
  }
  double fwd_up(int i, int j) const {
    return (cb.at(i + 1, j) + cb.at(i, j + 1)) / (4.0 * dt * dx);
  }
  double fwd_dn(int i, int j) const {
    return -(cb.at(i + 1, j) + cb.at(i, j - 1)) / (4.0 * dt * dx);
  }

  // rho * (wave operator + m^2), rows 1..nt-2; local in the three time rows
  double weighted_op(const Field& f, int i, int j, int c) const {
    double ap = 0.5 * (ca.at(i, j) + ca.at(i + 1, j));
    double am = 0.5 * (ca.at(i, j) + ca.at(i - 1, j));
    double ttterm = (ap * (f.at(i + 1, j, c) - f.at(i, j, c)) -
                     am * (f.at(i, j, c) - f.at(i - 1, j, c))) /
                    (dt * dt);
    double cp = 0.5 * (cc.at(i, j) + cc.at(i, j + 1));
    double cm = 0.5 * (cc.at(i, j) + cc.at(i, j - 1));
    double xxterm = (cp * (f.at(i, j + 1, c) - f.at(i, j, c)) -
                     cm * (f.at(i, j, c) - f.at(i, j - 1, c))) /
                    (dx * dx);
    double dxp = (f.at(i + 1, j + 1, c) - f.at(i + 1, j - 1, c)) / (2.0 * dx);
    double dxm = (f.at(i - 1, j + 1, c) - f.at(i - 1, j - 1, c)) / (2.0 * dx);
    double txterm = (cb.at(i + 1, j) * dxp - cb.at(i - 1, j) * dxm) / (2.0 * dt);
    double dtp = (f.at(i + 1, j + 1, c) - f.at(i - 1, j + 1, c)) / (2.0 * dt);
    double dtm = (f.at(i + 1, j - 1, c) - f.at(i - 1, j - 1, c)) / (2.0 * dt);
    double xtterm = (cb.at(i, j + 1) * dtp - cb.at(i, j - 1) * dtm) / (2.0 * dx);
    return ttterm + xxterm + txterm + xtterm + rho.at(i, j) * mass * mass * f.at(i, j, c);
  }

 private:
  static std::uint64_t fresh_id() {
    static std::uint64_t counter = 0;
    return ++counter;
  }
};

// Discretized Klein-Gordon operator. Output vanishes on the two boundary
// rows, where the centered stencil does not exist.
inline Field kg_apply(const Lattice& m, const Field& f) {
  if (!(f.nt == m.nt && f.nx == m.nx && f.p == m.p))
    throw StructuralError("kg_apply: shape mismatch");
  Field out(m.nt, m.nx, m.p);
  for (int i = 1; i + 1 < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j)
      for (int c = 0; c < m.p; ++c) out.at(i, j, c) = m.weighted_op(f, i, j, c) / m.rho.at(i, j);
  return out;
}

inline bool interior_supported(const Lattice& m, const Field& f, double thresh = 0.0) {
  auto [lo, hi] = f.support_rows(thresh);
  if (hi < 0) return true;
  return lo >= m.margin && hi <= m.nt - 1 - m.margin;
}

namespace detail {

// cyclic tridiagonal solve (Thomas + Sherman-Morrison); n >= 3
inline void solve_cyclic_tridiag(std::vector<double>& dn, std::vector<double>& diag,
                                 std::vector<double>& up, std::vector<double>& rhs,
                                 std::vector<double>& out) {
  const std::size_t n = diag.size();
  auto thomas = [&](const std::vector<double>& a, const std::vector<double>& b,
                    const std::vector<double>& c, std::vector<double> d) {
    std::vector<double> cp(n), x(n);
    cp[0] = c[0] / b[0];
    d[0] = d[0] / b[0];
    for (std::size_t k = 1; k < n; ++k) {
      double mfac = b[k] - a[k] * cp[k - 1];
      cp[k] = c[k] / mfac;
      d[k] = (d[k] - a[k] * d[k - 1]) / mfac;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t k = n - 1; k-- > 0;) x[k] = d[k] - cp[k] * x[k + 1];
    return x;
  };
  double alpha = dn[0];       // coupling of x0 to x_{n-1}
  double beta = up[n - 1];    // coupling of x_{n-1} to x0
  double gamma = -diag[0];
  std::vector<double> b = diag;
  b[0] -= gamma;
  b[n - 1] -= alpha * beta / gamma;
  std::vector<double> a = dn, c = up;
  a[0] = 0.0;
  c[n - 1] = 0.0;
  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = beta;
  auto y = thomas(a, b, c, rhs);
  auto z = thomas(a, b, c, u);
  double fact = (y[0] + alpha * y[n - 1] / gamma) /
                (1.0 + z[0] + alpha * z[n - 1] / gamma);
  out.resize(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = y[k] - fact * z[k];
}

}  // namespace detail

// Exact discrete inverse of kg_apply with retarded/advanced support: time
// rows are filled by forward (backward) substitution; each step is either a
// pointwise divide or one cyclic tridiagonal solve across the circle.
inline Field green(const Lattice& m, const Field& f, GreenKind kind) {
  if (!(f.nt == m.nt && f.nx == m.nx && f.p == m.p))
    throw StructuralError("green: shape mismatch");
  if (!interior_supported(m, f))
    throw SupportError("green: source touches the temporal margin");
  Field u(m.nt, m.nx, m.p);
  const bool ret = (kind == GreenKind::retarded);
  // retarded: iterate i = 1 .. nt-2 solving for row i+1; advanced mirrors by
  // reversing time (the stencil is symmetric under i+1 <-> i-1 with cb sign
  // handled by the explicit assembly below).
  std::vector<double> dn(m.nx), diag(m.nx), up(m.nx), rhs(m.nx), row(m.nx);
  auto sweep = [&](int i, int inext) {
    for (int c = 0; c < m.p; ++c) {
      bool coupled = false;
      for (int j = 0; j < m.nx; ++j) {
        double dd, uu, ll;
        if (ret) {
          dd = m.fwd_diag(i, j);
          uu = m.fwd_up(i, j);
          ll = m.fwd_dn(i, j);
        } else {
          // coefficients of phi_{i-1,*} in the stencil at (i,j)
          dd = 0.5 * (m.ca.at(i, j) + m.ca.at(i - 1, j)) / (m.dt * m.dt);
          uu = -(m.cb.at(i - 1, j) + m.cb.at(i, j + 1)) / (4.0 * m.dt * m.dx);
          ll = (m.cb.at(i - 1, j) + m.cb.at(i, j - 1)) / (4.0 * m.dt * m.dx);
        }
        diag[j] = dd;
        up[j] = uu;
        dn[j] = ll;
        coupled = coupled || uu != 0.0 || ll != 0.0;
        // residual with the unknown row still zero-filled
        rhs[j] = m.rho.at(i, j) * f.at(i, j, c) - m.weighted_op(u, i, j, c);
      }
      if (!coupled) {
        for (int j = 0; j < m.nx; ++j) u.at(inext, j, c) = rhs[j] / diag[j];
      } else {
        detail::solve_cyclic_tridiag(dn, diag, up, rhs, row);
        for (int j = 0; j < m.nx; ++j) u.at(inext, j, c) = row[j];
      }
    }
  };
  if (ret) {
    for (int i = 1; i + 1 < m.nt; ++i) sweep(i, i + 1);
  } else {
    for (int i = m.nt - 2; i >= 1; --i) sweep(i, i - 1);
  }
  return u;
}

// advanced minus retarded
inline Field e_map(const Lattice& m, const Field& f) {
  return green(m, f, GreenKind::advanced) - green(m, f, GreenKind::retarded);
}

// volume-weighted inner product, fixed summation order
inline double dot_vol(const Lattice& m, const Field& a, const Field& b) {
  if (!a.same_shape(b)) throw StructuralError("dot_vol: shape mismatch");
  double s = 0.0;
  for (int i = 0; i < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j) {
      double w = m.vol(i, j);
      for (int c = 0; c < m.p; ++c) s += w * a.at(i, j, c) * b.at(i, j, c);
    }
  return s;
}

inline double presymp(const Lattice& m, const Field& a, const Field& b) {
  if (!interior_supported(m, a) || !interior_supported(m, b))
    throw SupportError("presymp: arguments must be interior supported");
  return dot_vol(m, a, e_map(m, b));
}

// [(testfn, alpha)] on a given lattice
struct ObservableClass {
  Field testfn;
  double alpha = 0.0;
  std::uint64_t lattice_id = 0;

  static ObservableClass make(const Lattice& m, Field f, double alpha) {
    if (!interior_supported(m, f))
      throw SupportError("observable class: test function not interior supported");
    return {std::move(f), alpha, m.id};
  }
};

struct ClassCompare {
  bool equal = false;
  double e_residual = 0.0;      // relative size of E(phi_A - phi_B)
  double alpha_residual = 0.0;  // alpha defect after the P^* shift
  std::string note;
};

// [(phi_A,a)] = [(phi_B,b)] iff E(phi_A-phi_B) = 0 and the alpha offset is
// the source pairing with the unique compactly supported preimage.
inline ClassCompare class_equal(const Lattice& m, const ObservableClass& A,
                                const ObservableClass& B, double tol = 1e-9) {
  if (A.lattice_id != B.lattice_id) return {false, 0, 0, "different lattices"};
  Field d = A.testfn - B.testfn;
  double dnorm = d.max_abs();
  if (dnorm == 0.0) {
    double ares = std::abs(A.alpha - B.alpha);
    double scale = std::max({1.0, std::abs(A.alpha), std::abs(B.alpha)});
    return {ares <= tol * scale, 0.0, ares, ""};
  }
  Field ed = e_map(m, d);
  double eres = ed.max_abs() / dnorm;
  if (eres > tol) return {false, eres, 0.0, "difference is not an equation image"};
  Field h = green(m, d, GreenKind::retarded);
  double want = dot_vol(m, m.source, h);
  double ares = std::abs((A.alpha - B.alpha) - want);
  double scale = std::max({1.0, std::abs(A.alpha), std::abs(B.alpha), std::abs(want)});
  return {ares <= tol * scale, eres, ares, ""};
}

// forward integration of KG(phi) + J = 0 from data on the two initial rows
inline Field sample_solution(const Lattice& m, const std::vector<double>& row0,
                             const std::vector<double>& row1) {
  if (int(row0.size()) != m.nx * m.p || int(row1.size()) != m.nx * m.p)
    throw StructuralError("sample_solution: bad Cauchy data size");
  Field phi(m.nt, m.nx, m.p);
  for (int j = 0; j < m.nx; ++j)
    for (int c = 0; c < m.p; ++c) {
      phi.at(0, j, c) = row0[std::size_t(j) * m.p + c];
      phi.at(1, j, c) = row1[std::size_t(j) * m.p + c];
    }
  std::vector<double> dn(m.nx), diag(m.nx), up(m.nx), rhs(m.nx), row(m.nx);
  for (int i = 1; i + 1 < m.nt; ++i)
    for (int c = 0; c < m.p; ++c) {
      bool coupled = false;
      for (int j = 0; j < m.nx; ++j) {
        diag[j] = m.fwd_diag(i, j);
        up[j] = m.fwd_up(i, j);
        dn[j] = m.fwd_dn(i, j);
        coupled = coupled || up[j] != 0.0 || dn[j] != 0.0;
        rhs[j] = -m.rho.at(i, j) * m.source.at(i, j, c) - m.weighted_op(phi, i, j, c);
      }
      if (!coupled) {
        for (int j = 0; j < m.nx; ++j) phi.at(i + 1, j, c) = rhs[j] / diag[j];
      } else {
        detail::solve_cyclic_tridiag(dn, diag, up, rhs, row);
        for (int j = 0; j < m.nx; ++j) phi.at(i + 1, j, c) = row[j];
      }
    }
  return phi;
}

// max interior residual of KG(phi) + J
inline double solution_residual(const Lattice& m, const Field& phi) {
  Field r = kg_apply(m, phi);
  double mx = 0.0;
  for (int i = 1; i + 1 < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j)
      for (int c = 0; c < m.p; ++c)
        mx = std::max(mx, std::abs(r.at(i, j, c) + m.source.at(i, j, c)));
  return mx;
}

inline double pairing(const Lattice& m, const ObservableClass& A, const Field& phi,
                      double tol = 1e-6) {
  // residual scale: stencil magnitudes are O(max|phi| / dt^2)
  double scale = std::max(1.0, phi.max_abs()) / (m.dt * m.dt);
  if (solution_residual(m, phi) > tol * scale)
    throw PreconditionError("pairing: field is not a solution");
  return dot_vol(m, A.testfn, phi) + A.alpha;
}

// cubic ramp in the time coordinate: 0 below r0, 1 above r1 (rising) or the
// mirror image (falling)
inline std::vector<double> time_ramp(const Lattice& m, int r0, int r1, bool rising) {
  std::vector<double> chi(std::size_t(m.nt));
  for (int i = 0; i < m.nt; ++i) {
    double u;
    if (i <= r0)
      u = 0.0;
    else if (i >= r1)
      u = 1.0;
    else {
      double t = double(i - r0) / double(r1 - r0);
      u = t * t * (3.0 - 2.0 * t);
    }
    chi[std::size_t(i)] = rising ? u : 1.0 - u;
  }
  return chi;
}

inline Field scale_rows(const Field& f, const std::vector<double>& chi) {
  Field out = f;
  for (int i = 0; i < f.nt; ++i)
    for (int j = 0; j < f.nx; ++j)
      for (int c = 0; c < f.p; ++c) out.at(i, j, c) *= chi[std::size_t(i)];
  return out;
}

// Equivalent representative supported in the row window [lo,hi], which must
// lie entirely above (future=true) or below (future=false) the support of A.
inline ObservableClass move_representative(const Lattice& m, const ObservableClass& A, int lo,
                                           int hi, bool future) {
  if (lo < m.margin || hi > m.nt - 1 - m.margin || hi - lo < 3)
    throw GeometryError("representative: window leaves no room inside the margin");
  auto [slo, shi] = A.testfn.support_rows();
  Field w;
  if (future) {
    if (shi >= 0 && shi > hi) throw GeometryError("representative: support above the window");
    auto chi = time_ramp(m, lo, hi, false);  // 1 below, 0 above
    w = scale_rows(green(m, A.testfn, GreenKind::retarded), chi);
  } else {
    if (slo >= 0 && slo < lo) throw GeometryError("representative: support below the window");
    auto chi = time_ramp(m, lo, hi, true);  // 0 below, 1 above
    w = scale_rows(green(m, A.testfn, GreenKind::advanced), chi);
  }
  Field f = A.testfn - kg_apply(m, w);
  double alpha = A.alpha - dot_vol(m, m.source, w);
  return ObservableClass{std::move(f), alpha, m.id};
}

// Compactly supported perturbation (h, j) of metric and source.
struct Perturbation {
  Plane h_tt, h_tx, h_xx;
  Field j;

  static Perturbation zero(const Lattice& m) {
    return {Plane(m.nt, m.nx), Plane(m.nt, m.nx), Plane(m.nt, m.nx), Field(m.nt, m.nx, m.p)};
  }

  Perturbation scaled(double s) const {
    Perturbation q = *this;
    for (auto& x : q.h_tt.v) x *= s;
    for (auto& x : q.h_tx.v) x *= s;
    for (auto& x : q.h_xx.v) x *= s;
    for (auto& x : q.j.v) x *= s;
    return q;
  }

  bool is_zero() const {
    auto allz = [](const std::vector<double>& v) {
      for (auto x : v)
        if (x != 0.0) return false;
      return true;
    };
    return allz(h_tt.v) && allz(h_tx.v) && allz(h_xx.v) && allz(j.v);
  }

  std::pair<int, int> support_rows() const {
    int lo = h_tt.nt, hi = -1;
    auto scan = [&](const std::vector<double>& v, int nx) {
      for (int k = 0; k < int(v.size()); ++k)
        if (v[std::size_t(k)] != 0.0) {
          int i = k / nx;
          lo = std::min(lo, i);
          hi = std::max(hi, i);
        }
    };
    scan(h_tt.v, h_tt.nx);
    scan(h_tx.v, h_tx.nx);
    scan(h_xx.v, h_xx.nx);
    for (int i = 0; i < j.nt; ++i)
      for (int jj = 0; jj < j.nx; ++jj)
        for (int c = 0; c < j.p; ++c)
          if (j.at(i, jj, c) != 0.0) {
            lo = std::min(lo, i);
            hi = std::max(hi, i);
          }
    return {lo, hi};
  }
};

// (M[h], J + j); construction re-checks all lattice invariants
inline Lattice perturbed(const Lattice& m, const Perturbation& q) {
  Plane tt = m.gtt, tx = m.gtx, xx = m.gxx;
  for (std::size_t k = 0; k < tt.v.size(); ++k) {
    tt.v[k] += q.h_tt.v[k];
    tx.v[k] += q.h_tx.v[k];
    xx.v[k] += q.h_xx.v[k];
  }
  Field src = m.source + q.j;
  return Lattice::make(m.nt, m.nx, m.dt, m.dx, m.mass, m.p, m.margin, std::move(tt),
                       std::move(tx), std::move(xx), std::move(src));
}

inline ObservableClass future_representative(const Lattice& m, const ObservableClass& A,
                                             const Perturbation& pert) {
  auto [plo, phi_] = pert.support_rows();
  int after = (phi_ < 0) ? (m.nt / 2) : phi_;
  return move_representative(m, A, after + 1, m.nt - 1 - m.margin, true);
}

inline ObservableClass past_representative(const Lattice& m, const ObservableClass& A,
                                           const Perturbation& pert) {
  auto [plo, phi_] = pert.support_rows();
  (void)phi_;
  int before = (plo >= m.nt) ? (m.nt / 2) : plo;
  return move_representative(m, A, m.margin, before - 1, false);
}

// Relative Cauchy evolution: move the representative to the future of the
// perturbation on the background, reinterpret on the perturbed object, move
// to the past there, reinterpret back.
inline ObservableClass rce(const Lattice& m, const Perturbation& pert, const ObservableClass& A) {
  Lattice mh = perturbed(m, pert);
  ObservableClass fut = future_representative(m, A, pert);
  ObservableClass on_mh{fut.testfn, fut.alpha, mh.id};
  ObservableClass past = past_representative(mh, on_mh, pert);
  return ObservableClass{past.testfn, past.alpha, m.id};
}

// d/ds pairing(rce(s*pert)(A), phi)|_{s=0} by central differences with one
// Richardson level.
inline double rce_derivative_fd(const Lattice& m, const Perturbation& pert,
                                const ObservableClass& A, const Field& phi_sol,
                                double s = 1e-3) {
  auto P = [&](double sc) {
    if (sc == 0.0) return pairing(m, A, phi_sol);
    return pairing(m, rce(m, pert.scaled(sc), A), phi_sol);
  };
  auto D = [&](double sc) { return (P(sc) - P(-sc)) / (2.0 * sc); };
  double d1 = D(s);
  double d2 = D(0.5 * s);
  return (4.0 * d2 - d1) / 3.0;
}

// Contravariant stress-energy components T^tt, T^tx, T^xx with centered
// derivatives; valid on rows 1..nt-2.
struct StressTensor {
  Plane tt, tx, xx;
};

inline StressTensor stress_energy(const Lattice& m, const Field& phi) {
  StressTensor T{Plane(m.nt, m.nx), Plane(m.nt, m.nx), Plane(m.nt, m.nx)};
  for (int i = 1; i + 1 < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j) {
      double det = m.gtt.at(i, j) * m.gxx.at(i, j) - m.gtx.at(i, j) * m.gtx.at(i, j);
      double uptt = m.gxx.at(i, j) / det;
      double uptx = -m.gtx.at(i, j) / det;
      double upxx = m.gtt.at(i, j) / det;
      double stt = 0, stx = 0, sxx = 0, quad = 0, phi2 = 0, jphi = 0;
      for (int c = 0; c < m.p; ++c) {
        double pt = (phi.at(i + 1, j, c) - phi.at(i - 1, j, c)) / (2.0 * m.dt);
        double px = (phi.at(i, j + 1, c) - phi.at(i, j - 1, c)) / (2.0 * m.dx);
        double gt = uptt * pt + uptx * px;  // nabla^t phi
        double gx = uptx * pt + upxx * px;  // nabla^x phi
        stt += gt * gt;
        stx += gt * gx;
        sxx += gx * gx;
        quad += gt * pt + gx * px;  // nabla_c phi nabla^c phi
        phi2 += phi.at(i, j, c) * phi.at(i, j, c);
        jphi += m.source.at(i, j, c) * phi.at(i, j, c);
      }
      double trace_part = -0.5 * quad + 0.5 * m.mass * m.mass * phi2 + jphi;
      T.tt.at(i, j) = stt + uptt * trace_part;
      T.tx.at(i, j) = stx + uptx * trace_part;
      T.xx.at(i, j) = sxx + upxx * trace_part;
    }
  return T;
}

// gradient terms only; gauge invariant under constant shifts when m = 0
inline StressTensor tilde_stress(const Lattice& m, const Field& phi) {
  StressTensor T{Plane(m.nt, m.nx), Plane(m.nt, m.nx), Plane(m.nt, m.nx)};
  for (int i = 1; i + 1 < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j) {
      double det = m.gtt.at(i, j) * m.gxx.at(i, j) - m.gtx.at(i, j) * m.gtx.at(i, j);
      double uptt = m.gxx.at(i, j) / det;
      double uptx = -m.gtx.at(i, j) / det;
      double upxx = m.gtt.at(i, j) / det;
      double stt = 0, stx = 0, sxx = 0, quad = 0;
      for (int c = 0; c < m.p; ++c) {
        double pt = (phi.at(i + 1, j, c) - phi.at(i - 1, j, c)) / (2.0 * m.dt);
        double px = (phi.at(i, j + 1, c) - phi.at(i, j - 1, c)) / (2.0 * m.dx);
        double gt = uptt * pt + uptx * px;
        double gx = uptx * pt + upxx * px;
        stt += gt * gt;
        stx += gt * gx;
        sxx += gx * gx;
        quad += gt * pt + gx * px;
      }
      T.tt.at(i, j) = stt - 0.5 * uptt * quad;
      T.tx.at(i, j) = stx - 0.5 * uptx * quad;
      T.xx.at(i, j) = sxx - 0.5 * upxx * quad;
    }
  return T;
}

// sum vol h_ab T^ab over rows where T is defined
inline double smear(const Lattice& m, const StressTensor& T, const Plane& h_tt,
                    const Plane& h_tx, const Plane& h_xx) {
  double s = 0.0;
  for (int i = 1; i + 1 < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j)
      s += m.vol(i, j) * (h_tt.at(i, j) * T.tt.at(i, j) + 2.0 * h_tx.at(i, j) * T.tx.at(i, j) +
                          h_xx.at(i, j) * T.xx.at(i, j));
  return s;
}

// <T[h](A), phi>: half the derivative of the smeared stress tensor along the
// propagated direction; exact central difference (the functional is
// quadratic).
inline double stress_pairing(const Lattice& m, const Perturbation& pert,
                             const ObservableClass& A, const Field& phi_sol) {
  Field dir = e_map(m, A.testfn);
  Field plus = phi_sol + dir;
  Field minus = phi_sol - dir;
  double sp = smear(m, stress_energy(m, plus), pert.h_tt, pert.h_tx, pert.h_xx);
  double sm = smear(m, stress_energy(m, minus), pert.h_tt, pert.h_tx, pert.h_xx);
  return 0.5 * (sp - sm) / 2.0;
}

// <J[j](A), phi> = sum vol <j, E(testfn)>
inline double source_pairing(const Lattice& m, const Perturbation& pert,
                             const ObservableClass& A) {
  return dot_vol(m, pert.j, e_map(m, A.testfn));
}

namespace detail {

inline void christoffel(const Lattice& m, int i, int j, double G[2][2][2]) {
  // index order: G[b][a][c] = Gamma^b_{ac}; coordinates (t, x) = (0, 1)
  double g[2][2] = {{m.gtt.at(i, j), m.gtx.at(i, j)}, {m.gtx.at(i, j), m.gxx.at(i, j)}};
  double det = g[0][0] * g[1][1] - g[0][1] * g[0][1];
  double gi[2][2] = {{g[1][1] / det, -g[0][1] / det}, {-g[0][1] / det, g[0][0] / det}};
  // centered metric derivatives d[k][a][b] = d_k g_ab
  double d[2][2][2];
  auto comp = [&](const Plane& pl, int a, int b) {
    d[0][a][b] = (pl.at(i + 1, j) - pl.at(i - 1, j)) / (2.0 * m.dt);
    d[1][a][b] = (pl.at(i, j + 1) - pl.at(i, j - 1)) / (2.0 * m.dx);
  };
  comp(m.gtt, 0, 0);
  comp(m.gtx, 0, 1);
  comp(m.gxx, 1, 1);
  d[0][1][0] = d[0][0][1];
  d[1][1][0] = d[1][0][1];
  for (int b = 0; b < 2; ++b)
    for (int a = 0; a < 2; ++a)
      for (int c = 0; c < 2; ++c) {
        double s = 0.0;
        for (int e = 0; e < 2; ++e) s += gi[b][e] * (d[a][e][c] + d[c][e][a] - d[e][a][c]);
        G[b][a][c] = 0.5 * s;
      }
}

}  // namespace detail

// Per-site residual of nabla_a T^{ab} - <nabla^b J, phi> for b = t, x;
// defined on rows 2..nt-3. Returned as a two-component field.
inline Field divergence_residual(const Lattice& m, const Field& phi) {
  StressTensor T = stress_energy(m, phi);
  Field out(m.nt, m.nx, 2);
  for (int i = 2; i + 2 < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j) {
      double G[2][2][2];
      detail::christoffel(m, i, j, G);
      // divergence of sqrt|g| T^{ab} plus the Gamma^b term
      double div[2];
      auto Tcomp = [&](int a, int b, int ii, int jj) {
        if (a == 0 && b == 0) return T.tt.at(ii, jj);
        if (a == 1 && b == 1) return T.xx.at(ii, jj);
        return T.tx.at(ii, jj);
      };
      for (int b = 0; b < 2; ++b) {
        double dt_term = (m.rho.at(i + 1, j) * Tcomp(0, b, i + 1, j) -
                          m.rho.at(i - 1, j) * Tcomp(0, b, i - 1, j)) /
                         (2.0 * m.dt);
        double dx_term = (m.rho.at(i, j + 1) * Tcomp(1, b, i, j + 1) -
                          m.rho.at(i, j - 1) * Tcomp(1, b, i, j - 1)) /
                         (2.0 * m.dx);
        double gamma_term = 0.0;
        for (int a = 0; a < 2; ++a)
          for (int c = 0; c < 2; ++c) gamma_term += G[b][a][c] * Tcomp(a, c, i, j);
        div[b] = (dt_term + dx_term) / m.rho.at(i, j) + gamma_term;
      }
      // <nabla^b J, phi>
      double det = m.gtt.at(i, j) * m.gxx.at(i, j) - m.gtx.at(i, j) * m.gtx.at(i, j);
      double gi[2][2] = {{m.gxx.at(i, j) / det, -m.gtx.at(i, j) / det},
                         {-m.gtx.at(i, j) / det, m.gtt.at(i, j) / det}};
      double src[2] = {0.0, 0.0};
      for (int c = 0; c < m.p; ++c) {
        double jt = (m.source.at(i + 1, j, c) - m.source.at(i - 1, j, c)) / (2.0 * m.dt);
        double jx = (m.source.at(i, j + 1, c) - m.source.at(i, j - 1, c)) / (2.0 * m.dx);
        double up_t = gi[0][0] * jt + gi[0][1] * jx;
        double up_x = gi[1][0] * jt + gi[1][1] * jx;
        src[0] += up_t * phi.at(i, j, c);
        src[1] += up_x * phi.at(i, j, c);
      }
      out.at(i, j, 0) = div[0] - src[0];
      out.at(i, j, 1) = div[1] - src[1];
    }
  return out;
}

inline double l2_interior(const Lattice& m, const Field& f, int skip) {
  double s = 0.0;
  long n = 0;
  for (int i = skip; i < m.nt - skip; ++i)
    for (int j = 0; j < m.nx; ++j)
      for (int c = 0; c < f.p; ++c) {
        s += f.at(i, j, c) * f.at(i, j, c);
        ++n;
      }
  return n ? std::sqrt(s / double(n)) : 0.0;
}

// Top-form source variant: densities divide by the volume factor.
inline Lattice hodge_variant(const Lattice& m, const Field& jtilde) {
  Field src(m.nt, m.nx, m.p);
  for (int i = 0; i < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j)
      for (int c = 0; c < m.p; ++c) src.at(i, j, c) = jtilde.at(i, j, c) / m.rho.at(i, j);
  return Lattice::make(m.nt, m.nx, m.dt, m.dx, m.mass, m.p, m.margin, m.gtt, m.gtx, m.gxx,
                       std::move(src));
}

inline Field hodge_inverse_source(const Lattice& m) {
  Field jt(m.nt, m.nx, m.p);
  for (int i = 0; i < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j)
      for (int c = 0; c < m.p; ++c) jt.at(i, j, c) = m.source.at(i, j, c) * m.rho.at(i, j);
  return jt;
}

// Union of axis-aligned site rectangles, kept inside the interior. The x
// bounds may run outside [0, nx) to describe intervals crossing the seam of
// the circle; membership tests account for the wrap.
struct CompactRegion {
  struct Rect {
    int t0, t1, x0, x1;  // inclusive bounds
  };
  std::vector<Rect> rects;

  bool contains(int i, int j, int nx = 0) const {
    for (auto& r : rects) {
      if (i < r.t0 || i > r.t1) continue;
      if (j >= r.x0 && j <= r.x1) return true;
      if (nx > 0 && ((j - nx >= r.x0 && j - nx <= r.x1) || (j + nx >= r.x0 && j + nx <= r.x1)))
        return true;
    }
    return false;
  }
};

// site mask of the discrete causal hull J(K): one cell per row widening
inline std::vector<char> causal_hull(const Lattice& m, const CompactRegion& K) {
  auto idx = [&](int i, int j) { return std::size_t(i) * m.nx + std::size_t((j % m.nx + m.nx) % m.nx); };
  std::vector<char> hull(std::size_t(m.nt) * m.nx, 0);
  // future sweep
  std::vector<char> reach(std::size_t(m.nx), 0);
  for (int i = 0; i < m.nt; ++i) {
    std::vector<char> next(std::size_t(m.nx), 0);
    for (int j = 0; j < m.nx; ++j) {
      bool in = K.contains(i, j, m.nx) || reach[std::size_t(j)] ||
                reach[std::size_t((j + 1) % m.nx)] || reach[std::size_t((j - 1 + m.nx) % m.nx)];
      next[std::size_t(j)] = in ? 1 : 0;
      if (in) hull[idx(i, j)] = 1;
    }
    reach = next;
  }
  // past sweep
  std::fill(reach.begin(), reach.end(), 0);
  for (int i = m.nt - 1; i >= 0; --i) {
    std::vector<char> next(std::size_t(m.nx), 0);
    for (int j = 0; j < m.nx; ++j) {
      bool in = K.contains(i, j, m.nx) || reach[std::size_t(j)] ||
                reach[std::size_t((j + 1) % m.nx)] || reach[std::size_t((j - 1 + m.nx) % m.nx)];
      next[std::size_t(j)] = in ? 1 : 0;
      if (in) hull[idx(i, j)] = 1;
    }
    reach = next;
  }
  return hull;
}

inline bool field_supported_in(const Lattice& m, const Field& f, const std::vector<char>& mask,
                               double rel_tol) {
  double mx = f.max_abs();
  if (mx == 0.0) return true;
  for (int i = 0; i < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j) {
      if (mask[std::size_t(i) * m.nx + j]) continue;
      for (int c = 0; c < f.p; ++c)
        if (std::abs(f.at(i, j, c)) > rel_tol * mx) return false;
    }
  return true;
}

struct DynlocReport {
  bool support_condition = false;  // supp E(testfn) inside J(K)
  bool fixed = true;               // all sampled rce leave the class unchanged
  double max_deviation = 0.0;
  std::optional<Perturbation> witness;  // source perturbation changing the class
  double witness_shift = 0.0;
};

// Fixed-point test for perturbations supported in the causal complement of K.
inline DynlocReport dynloc_fixed_test(const Lattice& m, const CompactRegion& K,
                                      const ObservableClass& A,
                                      const std::vector<Perturbation>& samples,
                                      double tol = 1e-9) {
  DynlocReport rep;
  auto hull = causal_hull(m, K);
  Field ef = e_map(m, A.testfn);
  rep.support_condition = field_supported_in(m, ef, hull, tol);
  for (auto& q : samples) {
    auto [qlo, qhi] = q.support_rows();
    (void)qlo;
    (void)qhi;
    ObservableClass out = rce(m, q, A);
    auto cmp = class_equal(m, A, out, tol);
    rep.max_deviation = std::max(rep.max_deviation, std::max(cmp.e_residual, cmp.alpha_residual));
    if (!cmp.equal) rep.fixed = false;
  }
  if (!rep.support_condition) {
    // constructive witness: a source bump where E(testfn) leaks outside J(K)
    double mx = ef.max_abs();
    for (int i = m.margin; i < m.nt - m.margin && !rep.witness; ++i)
      for (int j = 0; j < m.nx && !rep.witness; ++j) {
        if (hull[std::size_t(i) * m.nx + j]) continue;
        for (int c = 0; c < m.p; ++c)
          if (std::abs(ef.at(i, j, c)) > 1e-6 * mx) {
            Perturbation w = Perturbation::zero(m);
            w.j.at(i, j, c) = 1.0;
            rep.witness = w;
            rep.witness_shift = dot_vol(m, w.j, ef);
            break;
          }
      }
  }
  return rep;
}

struct WitnessResult {
  bool ok = false;
  ObservableClass witness;
  double e_residual = 0.0;
  double class_residual = 0.0;
};

// Representative of A supported inside the region O (rows [rows_lo, rows_hi],
// spatial extent checked against O): cut the propagated solution with a time
// ramp inside O and apply the wave operator.
inline WitnessResult kin_dyn_witness(const Lattice& m, const CompactRegion& O, int rows_lo,
                                     int rows_hi, const ObservableClass& A, double tol = 1e-9) {
  WitnessResult res;
  Field u = e_map(m, A.testfn);
  auto chi = time_ramp(m, rows_lo, rows_hi, true);
  Field cut = scale_rows(u, chi);
  Field f = -1.0 * kg_apply(m, cut);
  // support check against O
  double mx = f.max_abs();
  for (int i = 0; i < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j)
      for (int c = 0; c < m.p; ++c)
        if (std::abs(f.at(i, j, c)) > tol * mx && !O.contains(i, j, m.nx)) {
          res.ok = false;
          res.e_residual = 1.0;
          return res;
        }
  Field d = A.testfn - f;
  Field ed = e_map(m, d);
  res.e_residual = ed.max_abs() / std::max(1.0, d.max_abs());
  Field h = green(m, d, GreenKind::retarded);
  double alpha = A.alpha - dot_vol(m, m.source, h);
  res.witness = ObservableClass{std::move(f), alpha, m.id};
  auto cmp = class_equal(m, A, res.witness, tol);
  res.class_residual = std::max(cmp.e_residual, cmp.alpha_residual);
  res.ok = cmp.equal;
  return res;
}

// Corank of the presymplectic Gram matrix over a class family, optionally
// with one constant generator (single) or two (split).
enum class CorankMode { linear_only, single, split };

inline int null_corank_estimate(const Lattice& m, const std::vector<Field>& family,
                                CorankMode mode, double threshold = 1e-8) {
  const int extra = (mode == CorankMode::linear_only) ? 0 : (mode == CorankMode::single ? 1 : 2);
  const int n = int(family.size()) + extra;
  std::vector<Field> props;
  props.reserve(family.size());
  for (auto& f : family) props.push_back(e_map(m, f));
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t a = 0; a < family.size(); ++a)
    for (std::size_t b = 0; b < family.size(); ++b)
      gram(int(a), int(b)) = dot_vol(m, family[a], props[b]);
  // constant generators pair to zero with everything: rows stay zero
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram);
  const auto& sv = svd.singularValues();
  double cut = sv.size() ? sv(0) * threshold : 0.0;
  int rank = 0;
  for (int k = 0; k < sv.size(); ++k)
    if (sv(k) > cut) ++rank;
  return n - rank;
}

inline void field_to_csv(const Lattice& m, const Field& f, const std::string& path) {
  std::ofstream out(path);
  out << "t,x,component,value\n";
  char buf[64];
  for (int i = 0; i < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j)
      for (int c = 0; c < m.p; ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", f.at(i, j, c));
        out << i * m.dt << "," << j * m.dx << "," << c << "," << buf << "\n";
      }
}

// smooth compactly supported bump profile
inline double bump_profile(double r) {
  if (std::abs(r) >= 1.0) return 0.0;
  double c = std::cos(0.5 * M_PI * r);
  double c2 = c * c;
  return c2 * c2 * c2;
}

}  // namespace kgw
