#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "kgw/ccr.hpp"
#include "kgw/errors.hpp"
#include "kgw/lattice.hpp"
#include "kgw/poly.hpp"
#include "kgw/presymp.hpp"

namespace kgw {

// Weyl algebra over a finite family of lattice test functions: generator 0 is
// the constant observable, the rest carry the given test functions with the
// presymplectic form computed from the lattice propagator.
class LatticeWeylSystem {
 public:
  LatticeWeylSystem(const Lattice& m, std::vector<Field> generators, double tol = 1e-9)
      : m_(m), gens_(std::move(generators)), tol_(tol) {
    props_.reserve(gens_.size());
    for (auto& g : gens_) {
      if (!interior_supported(m_, g))
        throw SupportError("weyl system: generator not interior supported");
      props_.push_back(e_map(m_, g));
    }
    const std::size_t n = gens_.size() + 1;
    Mat<double> form(n, n);
    for (std::size_t a = 0; a < gens_.size(); ++a)
      for (std::size_t b = 0; b < gens_.size(); ++b)
        form(a + 1, b + 1) = dot_vol(m_, gens_[a], props_[b]);
    // enforce exact antisymmetry against round-off
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b) {
        double v = 0.5 * (form(a, b) - form(b, a));
        form(a, b) = v;
        form(b, a) = -v;
      }
    std::vector<std::string> labels;
    labels.push_back("const");
    for (std::size_t a = 0; a < gens_.size(); ++a) labels.push_back("phi" + std::to_string(a));
    auto base = PreSympSpace<double>::make(std::move(labels), std::move(form), tol);
    std::vector<double> point(n, 0.0);
    point[0] = 1.0;
    space_ = PointedPreSympSpace<double>::make(std::move(base), std::move(point));
  }

  const Lattice& lattice() const { return m_; }
  const PointedPreSympSpace<double>& space() const { return space_; }
  std::size_t generator_count() const { return gens_.size(); }
  const Field& generator_testfn(std::size_t a) const { return gens_[a]; }

  WeylPolynomial<double> unit() const {
    return WeylPolynomial<double>::constant(space_.base.id, CDouble(1.0));
  }

  WeylPolynomial<double> constant_generator() const {
    return WeylPolynomial<double>::generator(space_.base.id, 0);
  }

  WeylPolynomial<double> generator(std::size_t a) const {
    return WeylPolynomial<double>::generator(space_.base.id, std::uint32_t(a + 1));
  }

  // The field map: an arbitrary interior test function is identified with a
  // registered generator up to the equation-of-motion quotient; the class
  // offset lands on the constant generator.
  WeylPolynomial<double> field_element(const Field& f) const {
    if (!interior_supported(m_, f)) throw SupportError("field_element: not interior supported");
    double fn = f.max_abs();
    // trivial class: f in the image of the equation-of-motion operator
    Field ef = e_map(m_, f);
    if (ef.max_abs() <= tol_ * std::max(1.0, fn)) {
      Field h = green(m_, f, GreenKind::retarded);
      double alpha = -dot_vol(m_, m_.source, h);
      WeylPolynomial<double> out(space_.base.id);
      out.add(Mono{0}, CDouble(alpha));
      return out;
    }
    for (std::size_t a = 0; a < gens_.size(); ++a) {
      Field d = f - gens_[a];
      double dn = d.max_abs();
      if (dn == 0.0) return generator(a);
      Field edd = e_map(m_, d);
      if (edd.max_abs() > tol_ * dn) continue;
      Field h = green(m_, d, GreenKind::retarded);
      double alpha = -dot_vol(m_, m_.source, h);
      WeylPolynomial<double> out = generator(a);
      out.add(Mono{0}, CDouble(alpha));
      return out;
    }
    throw StructuralError("field_element: test function matches no registered class");
  }

 private:
  Lattice m_;
  std::vector<Field> gens_;
  std::vector<Field> props_;
  PointedPreSympSpace<double> space_;
  double tol_;
};

// Site-indexed Weyl algebra for point-split quadratic observables. Generator
// 0 is the constant; the others are unit point evaluations phi_c(site).
class SiteWeylSystem {
 public:
  SiteWeylSystem(const Lattice& m, const std::vector<std::array<int, 3>>& sites) : m_(m) {
    for (std::size_t k = 0; k < sites.size(); ++k) {
      auto [i, j, c] = sites[k];
      index_.emplace(key(i, j, c), std::uint32_t(k + 1));
      sites_.push_back(sites[k]);
    }
    const std::size_t n = sites_.size() + 1;
    Mat<double> form(n, n);
    // E of the (volume normalized) delta at each site, one solve per column
    for (std::size_t b = 0; b < sites_.size(); ++b) {
      auto [bi, bj, bc] = sites_[b];
      Field delta(m_.nt, m_.nx, m_.p);
      delta.at(bi, bj, bc) = 1.0 / m_.vol(bi, bj);
      Field ed = e_map(m_, delta);
      for (std::size_t a = 0; a < sites_.size(); ++a) {
        auto [ai, aj, ac] = sites_[a];
        form(a + 1, b + 1) = ed.at(ai, aj, ac);
      }
    }
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b) {
        double v = 0.5 * (form(a, b) - form(b, a));
        form(a, b) = v;
        form(b, a) = -v;
      }
    std::vector<std::string> labels;
    labels.push_back("const");
    for (std::size_t a = 0; a < sites_.size(); ++a) labels.push_back("x" + std::to_string(a));
    auto base = PreSympSpace<double>::make(std::move(labels), std::move(form), 1e-9);
    std::vector<double> point(n, 0.0);
    point[0] = 1.0;
    space_ = PointedPreSympSpace<double>::make(std::move(base), std::move(point));
  }

  const PointedPreSympSpace<double>& space() const { return space_; }

  std::optional<std::uint32_t> find(int i, int j, int c) const {
    auto it = index_.find(key(i, (j % m_.nx + m_.nx) % m_.nx, c));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::uint32_t at(int i, int j, int c) const {
    auto g = find(i, j, c);
    if (!g) throw StructuralError("site system: site not registered");
    return *g;
  }

  // evaluation point assigning a solution's values to the site generators
  AffinePoint<CDouble> solution_point(const Field& phi) const {
    AffinePoint<CDouble> p;
    p.pointed = true;
    p.values.assign(sites_.size() + 1, CDouble(0.0));
    p.values[0] = CDouble(1.0);
    for (std::size_t a = 0; a < sites_.size(); ++a) {
      auto [i, j, c] = sites_[a];
      p.values[a + 1] = CDouble(phi.at(i, j, c));
    }
    return p;
  }

 private:
  static std::uint64_t key(int i, int j, int c) {
    return (std::uint64_t(std::uint32_t(i)) << 34) | (std::uint64_t(std::uint32_t(j)) << 4) |
           std::uint64_t(std::uint32_t(c));
  }
  Lattice m_;
  std::vector<std::array<int, 3>> sites_;
  std::map<std::uint64_t, std::uint32_t> index_;
  PointedPreSympSpace<double> space_;
};

// Exact commutator with an at most linear element: single contractions only,
// so [x (star) a] = i {x, a}.
template <class T>
WeylPolynomial<T> commutator_linear(const PreSympSpace<T>& sp, const WeylPolynomial<T>& x,
                                    const WeylPolynomial<T>& a) {
  if (a.degree() > 1) throw PreconditionError("commutator_linear: second argument not linear");
  auto br = poisson_bracket(sp, x, a);
  WeylPolynomial<T> out(sp.id);
  for (auto& [m, c] : br.terms()) out.add(m, Cx<T>(scalar_traits<T>::zero(), scalar_traits<T>::one()) * c);
  return out;
}

struct QuantumRceReport {
  double commutator_pairing = 0.0;  // <i [ T(h)/2 + (j,0) *, A], phi>
  double fd_pairing = 0.0;          // finite-difference rce derivative
  double rel_error = 0.0;
  bool ok = false;
};

namespace detail {

inline void collect_sites(const Lattice& m, const Plane& pl, int ring,
                          std::map<std::uint64_t, std::array<int, 3>>& out) {
  for (int i = 0; i < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j) {
      if (pl.at(i, j) == 0.0) continue;
      for (int di = -ring; di <= ring; ++di)
        for (int dj = -ring; dj <= ring; ++dj) {
          int ii = i + di;
          if (ii < 1 || ii >= m.nt - 1) continue;
          int jj = ((j + dj) % m.nx + m.nx) % m.nx;
          for (int c = 0; c < m.p; ++c) {
            std::uint64_t k =
                (std::uint64_t(std::uint32_t(ii)) << 34) | (std::uint64_t(std::uint32_t(jj)) << 4) | std::uint64_t(c);
            out.emplace(k, std::array<int, 3>{ii, jj, c});
          }
        }
    }
}

inline void collect_sites(const Lattice& m, const Field& f, int ring,
                          std::map<std::uint64_t, std::array<int, 3>>& out) {
  for (int i = 0; i < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j) {
      bool nz = false;
      for (int c = 0; c < m.p; ++c) nz = nz || f.at(i, j, c) != 0.0;
      if (!nz) continue;
      for (int di = -ring; di <= ring; ++di)
        for (int dj = -ring; dj <= ring; ++dj) {
          int ii = i + di;
          if (ii < 1 || ii >= m.nt - 1) continue;
          int jj = ((j + dj) % m.nx + m.nx) % m.nx;
          for (int c = 0; c < m.p; ++c) {
            std::uint64_t k =
                (std::uint64_t(std::uint32_t(ii)) << 34) | (std::uint64_t(std::uint32_t(jj)) << 4) | std::uint64_t(c);
            out.emplace(k, std::array<int, 3>{ii, jj, c});
          }
        }
    }
}

// point-split smeared stress tensor plus source term as a polynomial over
// site generators, matching the discretization of stress_energy()
inline WeylPolynomial<double> quadratic_generator(const Lattice& m, const SiteWeylSystem& sys,
                                                  const Perturbation& pert) {
  using P = WeylPolynomial<double>;
  const auto id = sys.space().base.id;
  P W(id);
  auto phi_at = [&](int i, int j, int c) { return P::generator(id, sys.at(i, j, c)); };
  for (int i = 1; i + 1 < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j) {
      double htt = pert.h_tt.at(i, j), htx = pert.h_tx.at(i, j), hxx = pert.h_xx.at(i, j);
      bool has_h = htt != 0.0 || htx != 0.0 || hxx != 0.0;
      bool has_j = false;
      for (int c = 0; c < m.p; ++c) has_j = has_j || pert.j.at(i, j, c) != 0.0;
      if (!has_h && !has_j) continue;
      double w = m.vol(i, j);
      if (has_h) {
        double det = m.gtt.at(i, j) * m.gxx.at(i, j) - m.gtx.at(i, j) * m.gtx.at(i, j);
        double uptt = m.gxx.at(i, j) / det;
        double uptx = -m.gtx.at(i, j) / det;
        double upxx = m.gtt.at(i, j) / det;
        // h_ab g^{ac} g^{bd} and trace pieces assembled per component
        for (int c = 0; c < m.p; ++c) {
          P pt = (1.0 / (2.0 * m.dt)) * (phi_at(i + 1, j, c) - phi_at(i - 1, j, c));
          P px = (1.0 / (2.0 * m.dx)) * (phi_at(i, j + 1, c) - phi_at(i, j - 1, c));
          P gt = uptt * pt + uptx * px;
          P gx = uptx * pt + upxx * px;
          P quad = gt * pt + gx * px;
          P phi0 = phi_at(i, j, c);
          // T^{ab} contracted with h_ab
          P tr = (-0.5) * quad + (0.5 * m.mass * m.mass) * (phi0 * phi0);
          P contr = htt * (gt * gt) + (2.0 * htx) * (gt * gx) + hxx * (gx * gx) +
                    (htt * uptt + 2.0 * htx * uptx + hxx * upxx) * tr;
          // source part of T^{ab}: g^{ab} <J, phi>
          P jterm = (htt * uptt + 2.0 * htx * uptx + hxx * upxx) *
                    (m.source.at(i, j, c) * phi0);
          W += (0.5 * w) * (contr + jterm);
        }
      }
      if (has_j)
        for (int c = 0; c < m.p; ++c)
          if (pert.j.at(i, j, c) != 0.0) W += (w * pert.j.at(i, j, c)) * phi_at(i, j, c);
    }
  return W;
}

}  // namespace detail

// Builds (1/2) T(h) + [(j,0)] over point-evaluation generators, commutes it
// with the linear element of A, and compares the pairing with the
// finite-difference rce derivative.
inline QuantumRceReport quantum_rce_commutator_check(const Lattice& m, const Perturbation& pert,
                                                     const ObservableClass& A,
                                                     const Field& phi_sol, double rel_tol) {
  using P = WeylPolynomial<double>;
  std::map<std::uint64_t, std::array<int, 3>> site_map;
  detail::collect_sites(m, pert.h_tt, 1, site_map);
  detail::collect_sites(m, pert.h_tx, 1, site_map);
  detail::collect_sites(m, pert.h_xx, 1, site_map);
  detail::collect_sites(m, pert.j, 0, site_map);
  detail::collect_sites(m, A.testfn, 0, site_map);
  std::vector<std::array<int, 3>> sites;
  sites.reserve(site_map.size());
  for (auto& [k, s] : site_map) sites.push_back(s);
  SiteWeylSystem sys(m, sites);
  const auto& sp = sys.space().base;

  P W = detail::quadratic_generator(m, sys, pert);
  P Aelem(sp.id);
  Aelem.add(Mono{0}, CDouble(A.alpha));
  for (int i = 0; i < m.nt; ++i)
    for (int j = 0; j < m.nx; ++j)
      for (int c = 0; c < m.p; ++c) {
        double v = A.testfn.at(i, j, c);
        if (v == 0.0) continue;
        Aelem.add(Mono{sys.at(i, j, c)}, CDouble(m.vol(i, j) * v));
      }

  P comm = commutator_linear(sp, W, Aelem);
  // i [ ... ]: multiply by i
  P icomm(sp.id);
  for (auto& [mono, c] : comm.terms()) icomm.add(mono, CDouble(0.0, 1.0) * c);

  auto point = sys.solution_point(phi_sol);
  CDouble val = evaluate(icomm, point);

  QuantumRceReport rep;
  rep.commutator_pairing = val.re;
  rep.fd_pairing = rce_derivative_fd(m, pert, A, phi_sol);
  double scale = std::max(std::abs(rep.fd_pairing), 1e-300);
  rep.rel_error = std::abs(rep.commutator_pairing - rep.fd_pairing) / scale;
  rep.ok = rep.rel_error <= rel_tol && std::abs(val.im) <= 1e-9 * (1.0 + std::abs(val.re));
  return rep;
}

}  // namespace kgw
