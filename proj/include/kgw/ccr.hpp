#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "kgw/errors.hpp"
#include "kgw/poly.hpp"
#include "kgw/presymp.hpp"
#include "kgw/scalar.hpp"

namespace kgw {

// The polynomial CCR algebra keeps the symmetric-algebra representation and
// deforms only the product, so WeylPolynomial shares the Polynomial carrier
// with complex coefficients.
template <class T>
using WeylPolynomial = Polynomial<Cx<T>>;

namespace detail {

template <class T>
Cx<T> i_half_sigma(const PreSympSpace<T>& sp, std::uint32_t u, std::uint32_t v) {
  // (i/2) * sigma(u,v)
  T half = sp.sigma(u, v) / scalar_traits<T>::from_int(2);
  return Cx<T>(scalar_traits<T>::zero(), half);
}

template <class S>
S falling(std::size_t n, std::size_t k) {
  S f = scalar_traits<S>::one();
  for (std::size_t i = 0; i < k; ++i) f *= scalar_traits<S>::from_int(long(n - i));
  return f;
}

template <class S>
S factorial(std::size_t n) {
  S f = scalar_traits<S>::one();
  for (std::size_t i = 2; i <= n; ++i) f *= scalar_traits<S>::from_int(long(i));
  return f;
}

// Star product of two monomials: sum over contraction count matrices between
// the distinct generators of the factors.
template <class T>
void star_mono(const PreSympSpace<T>& sp, const Mono& ma, const Cx<T>& ca, const Mono& mb,
               const Cx<T>& cb, WeylPolynomial<T>& out) {
  using S = Cx<T>;
  auto fa = mono_factors(ma);
  auto fb = mono_factors(mb);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // indices into fa, fb
  for (std::size_t i = 0; i < fa.size(); ++i)
    for (std::size_t j = 0; j < fb.size(); ++j)
      if (!scalar_traits<T>::is_zero(sp.sigma(fa[i].first, fb[j].first))) pairs.emplace_back(i, j);

  std::vector<std::size_t> ra(fa.size(), 0), rb(fb.size(), 0);
  S base = ca * cb;

  std::function<void(std::size_t, S)> rec = [&](std::size_t pi, S coeff) {
    if (pi == pairs.size()) {
      S c = coeff;
      Mono m;
      for (std::size_t i = 0; i < fa.size(); ++i) {
        c *= falling<S>(fa[i].second, ra[i]);
        for (std::size_t r = 0; r < fa[i].second - ra[i]; ++r) m.push_back(fa[i].first);
      }
      for (std::size_t j = 0; j < fb.size(); ++j) {
        c *= falling<S>(fb[j].second, rb[j]);
        for (std::size_t r = 0; r < fb[j].second - rb[j]; ++r) m.push_back(fb[j].first);
      }
      std::sort(m.begin(), m.end());
      out.add(std::move(m), c);
      return;
    }
    auto [i, j] = pairs[pi];
    S w = i_half_sigma(sp, fa[i].first, fb[j].first);
    S power = scalar_traits<S>::one();
    std::size_t cmax = std::min(fa[i].second - ra[i], fb[j].second - rb[j]);
    for (std::size_t c = 0; c <= cmax; ++c) {
      if (c > 0) {
        power *= w;
        ra[i] += 1;
        rb[j] += 1;
      }
      rec(pi + 1, S(coeff * power / factorial<S>(c)));
    }
    ra[i] -= cmax;
    rb[j] -= cmax;
  };
  rec(0, base);
}

}  // namespace detail

template <class T>
WeylPolynomial<T> star_product(const PreSympSpace<T>& sp, const WeylPolynomial<T>& a,
                               const WeylPolynomial<T>& b) {
  a.check_same_space(b);
  if (a.space_id() != sp.id) throw StructuralError("star_product: wrong space");
  WeylPolynomial<T> out(sp.id);
  for (auto& [ma, ca] : a.terms())
    for (auto& [mb, cb] : b.terms()) detail::star_mono(sp, ma, ca, mb, cb, out);
  return out;
}

// Definitional route: reduce both monomials to powers of single vectors by
// polarization and apply the two-generator-power formula, then re-expand.
// Slow; kept as an independent cross-check of star_product.
template <class T>
WeylPolynomial<T> star_product_polarization(const PreSympSpace<T>& sp,
                                            const WeylPolynomial<T>& a,
                                            const WeylPolynomial<T>& b) {
  using S = Cx<T>;
  a.check_same_space(b);
  WeylPolynomial<T> out(sp.id);

  auto vec_sigma = [&](const std::vector<S>& u, const std::vector<S>& v) {
    S s = scalar_traits<S>::zero();
    for (std::size_t i = 0; i < sp.dim; ++i) {
      if (scalar_traits<S>::is_zero(u[i])) continue;
      for (std::size_t j = 0; j < sp.dim; ++j) s += u[i] * S(sp.sigma(i, j)) * v[j];
    }
    return s;
  };
  auto linear_poly = [&](const std::vector<S>& u) {
    WeylPolynomial<T> p(sp.id);
    for (std::size_t i = 0; i < sp.dim; ++i)
      if (!scalar_traits<S>::is_zero(u[i])) p.add(Mono{std::uint32_t(i)}, u[i]);
    return p;
  };
  auto poly_pow = [&](const WeylPolynomial<T>& p, std::size_t k) {
    WeylPolynomial<T> r = WeylPolynomial<T>::constant(sp.id, scalar_traits<S>::one());
    for (std::size_t i = 0; i < k; ++i) r = r * p;
    return r;
  };

  for (auto& [ma, ca] : a.terms())
    for (auto& [mb, cb] : b.terms()) {
      const std::size_t m = ma.size(), n = mb.size();
      if (m == 0 || n == 0) {
        out.add(mono_mul(ma, mb), S(ca * cb));
        continue;
      }
      S norm = S(ca * cb) / (detail::factorial<S>(m) * detail::factorial<S>(n));
      for (std::uint64_t smask = 1; smask < (1ull << m); ++smask)
        for (std::uint64_t tmask = 1; tmask < (1ull << n); ++tmask) {
          std::vector<S> u(sp.dim, scalar_traits<S>::zero());
          std::vector<S> v(sp.dim, scalar_traits<S>::zero());
          std::size_t scount = 0, tcount = 0;
          for (std::size_t i = 0; i < m; ++i)
            if (smask >> i & 1) {
              u[ma[i]] += scalar_traits<S>::one();
              ++scount;
            }
          for (std::size_t j = 0; j < n; ++j)
            if (tmask >> j & 1) {
              v[mb[j]] += scalar_traits<S>::one();
              ++tcount;
            }
          S sign = ((m - scount + n - tcount) % 2 == 0) ? scalar_traits<S>::one()
                                                        : S(-scalar_traits<S>::one());
          S sig = vec_sigma(u, v);
          S half_i_sig = sig * S(Cx<T>(scalar_traits<T>::zero(),
                                       scalar_traits<T>::one() / scalar_traits<T>::from_int(2)));
          S coeff = scalar_traits<S>::one();
          for (std::size_t r = 0; r <= std::min(m, n); ++r) {
            if (r > 0) coeff *= half_i_sig;
            S comb = detail::factorial<S>(m) * detail::factorial<S>(n) /
                     (detail::factorial<S>(r) * detail::factorial<S>(m - r) *
                      detail::factorial<S>(n - r));
            auto term = poly_pow(linear_poly(u), m - r) * poly_pow(linear_poly(v), n - r);
            for (auto& [tm, tc] : term.terms())
              out.add(tm, S(norm * sign * coeff * comb * tc));
            if (r == std::min(m, n)) break;
          }
        }
    }
  return out;
}

// Slowest route: explicit enumeration of all partial pairings between the
// factor positions of the two monomials.
template <class T>
WeylPolynomial<T> star_product_pairing_oracle(const PreSympSpace<T>& sp,
                                              const WeylPolynomial<T>& a,
                                              const WeylPolynomial<T>& b) {
  using S = Cx<T>;
  a.check_same_space(b);
  WeylPolynomial<T> out(sp.id);
  for (auto& [ma, ca] : a.terms())
    for (auto& [mb, cb] : b.terms()) {
      const std::size_t m = ma.size(), n = mb.size();
      for (std::size_t r = 0; r <= std::min(m, n); ++r) {
        std::vector<std::size_t> acomb(r);
        std::function<void(std::size_t, std::size_t)> pick_a = [&](std::size_t start,
                                                                   std::size_t k) {
          if (k == r) {
            // enumerate r-subsets of b positions and bijections
            std::vector<std::size_t> bcomb(r);
            std::function<void(std::size_t, std::size_t)> pick_b = [&](std::size_t bstart,
                                                                       std::size_t kk) {
              if (kk == r) {
                std::vector<std::size_t> perm(bcomb);
                std::sort(perm.begin(), perm.end());
                do {
                  S coeff = S(ca * cb);
                  for (std::size_t l = 0; l < r; ++l)
                    coeff *= detail::i_half_sigma(sp, ma[acomb[l]], mb[perm[l]]);
                  if (scalar_traits<S>::is_zero(coeff)) continue;
                  Mono mono;
                  std::vector<bool> au(m, false), bu(n, false);
                  for (std::size_t l = 0; l < r; ++l) {
                    au[acomb[l]] = true;
                    bu[perm[l]] = true;
                  }
                  for (std::size_t i = 0; i < m; ++i)
                    if (!au[i]) mono.push_back(ma[i]);
                  for (std::size_t j = 0; j < n; ++j)
                    if (!bu[j]) mono.push_back(mb[j]);
                  std::sort(mono.begin(), mono.end());
                  out.add(std::move(mono), coeff);
                } while (std::next_permutation(perm.begin(), perm.end()));
                return;
              }
              for (std::size_t j = bstart; j < n; ++j) {
                bcomb[kk] = j;
                pick_b(j + 1, kk + 1);
              }
            };
            pick_b(0, 0);
            return;
          }
          for (std::size_t i = start; i < m; ++i) {
            acomb[k] = i;
            pick_a(i + 1, k + 1);
          }
        };
        pick_a(0, 0);
      }
    }
  return out;
}

template <class T>
WeylPolynomial<T> commutator(const PreSympSpace<T>& sp, const WeylPolynomial<T>& a,
                             const WeylPolynomial<T>& b) {
  return star_product(sp, a, b) - star_product(sp, b, a);
}

template <class T>
WeylPolynomial<T> involution(const WeylPolynomial<T>& a) {
  WeylPolynomial<T> out(a.space_id());
  for (auto& [m, c] : a.terms()) out.add(m, conj(c));
  return out;
}

// Quotient by the two-sided star ideal generated by (1_V - 1); same normal
// form as the classical vanishing ideal.
template <class S, class T>
Polynomial<S> quantum_ideal_reduce(const PointedPreSympSpace<T>& sp, const Polynomial<S>& a) {
  return ideal_reduce(sp, a);
}

// Same quotient realized by explicit two-sided division against the ideal
// generator instead of substitution.
template <class T>
WeylPolynomial<T> pointed_ccr_reduce(const PointedPreSympSpace<T>& sp,
                                     const WeylPolynomial<T>& a) {
  using S = Cx<T>;
  if (a.space_id() != sp.base.id) throw StructuralError("pointed_ccr_reduce: wrong space");
  const std::uint32_t k = std::uint32_t(sp.pivot_index());
  // ideal generator 1_V - 1
  WeylPolynomial<T> gen(sp.base.id);
  for (std::size_t i = 0; i < sp.base.dim; ++i)
    if (!near_zero(sp.point[i], sp.base.tol)) gen.add(Mono{std::uint32_t(i)}, S(sp.point[i]));
  gen.add(Mono{}, S(-scalar_traits<T>::one()));

  WeylPolynomial<T> r = a;
  for (;;) {
    // largest monomial still containing the pivot generator
    const Mono* target = nullptr;
    S coeff = scalar_traits<S>::zero();
    for (auto it = r.terms().rbegin(); it != r.terms().rend(); ++it) {
      if (mono_count(it->first, k) > 0) {
        target = &it->first;
        coeff = it->second;
        break;
      }
    }
    if (!target) break;
    WeylPolynomial<T> q(sp.base.id);
    q.add(mono_remove(*target, k), S(coeff / S(sp.point[k])));
    // the generator is central, so the two-sided star multiple collapses to
    // the commutative product
    r -= star_product(sp.base, q, gen);
  }
  return r;
}

// Gaussian state data: mean with unit pairing against the distinguished
// direction, symmetric covariance vanishing on it.
template <class T>
struct QuasiFreeState {
  std::vector<T> mean;
  Mat<T> covariance;

  static QuasiFreeState make(const PointedPreSympSpace<T>& sp, std::vector<T> mean_,
                             Mat<T> cov) {
    QuasiFreeState st{std::move(mean_), std::move(cov)};
    const std::size_t n = sp.base.dim;
    if (st.mean.size() != n || st.covariance.rows() != n || st.covariance.cols() != n)
      throw InvalidStateError("quasi-free state: dimension mismatch");
    T pairing = scalar_traits<T>::zero();
    for (std::size_t i = 0; i < n; ++i) pairing += st.mean[i] * sp.point[i];
    if (!near_zero(T(pairing - scalar_traits<T>::one()), sp.base.tol))
      throw InvalidStateError("quasi-free state: mean is not an affine point");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (!near_zero(T(st.covariance(i, j) - st.covariance(j, i)), sp.base.tol))
          throw InvalidStateError("quasi-free state: covariance not symmetric");
      }
    for (std::size_t i = 0; i < n; ++i) {
      T s = scalar_traits<T>::zero();
      for (std::size_t j = 0; j < n; ++j) s += st.covariance(i, j) * sp.point[j];
      if (!near_zero(s, sp.base.tol))
        throw InvalidStateError("quasi-free state: covariance does not kill the point");
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        // |sigma(u,v)| <= 2 sqrt(W(u,u) W(v,v)), compared on squares
        T lhs = sp.base.form(i, j) * sp.base.form(i, j);
        T rhs = scalar_traits<T>::from_int(4) * st.covariance(i, i) * st.covariance(j, j);
        if (scalar_traits<T>::to_double(T(rhs - lhs)) < -sp.base.tol)
          throw InvalidStateError("quasi-free state: positivity violated on basis pair");
      }
    return st;
  }
};

namespace detail {

// centered Wick moment of a symmetric product, means folded in
template <class T>
Cx<T> wick_symmetric(const QuasiFreeState<T>& st, const Mono& m) {
  using S = Cx<T>;
  if (m.empty()) return scalar_traits<S>::one();
  std::uint32_t g = m.front();
  Mono rest(m.begin() + 1, m.end());
  S out = S(st.mean[g]) * wick_symmetric(st, rest);
  for (std::size_t j = 0; j < rest.size(); ++j) {
    T w = st.covariance(g, rest[j]);
    if (scalar_traits<T>::is_zero(w)) continue;
    Mono sub = rest;
    sub.erase(sub.begin() + long(j));
    out += S(w) * wick_symmetric(st, sub);
  }
  return out;
}

}  // namespace detail

template <class T>
Cx<T> state_evaluate(const PointedPreSympSpace<T>& sp, const QuasiFreeState<T>& st,
                     const WeylPolynomial<T>& a) {
  if (a.space_id() != sp.base.id) throw StructuralError("state_evaluate: wrong space");
  Cx<T> out{};
  for (auto& [m, c] : a.terms()) out += c * detail::wick_symmetric(st, m);
  return out;
}

// Independent oracle: moment of an explicitly star-ordered generator string,
// Wick pairing with the complex pair value W(u,v) + (i/2) sigma(u,v).
template <class T>
Cx<T> star_moment_oracle(const PointedPreSympSpace<T>& sp, const QuasiFreeState<T>& st,
                         const std::vector<std::uint32_t>& seq) {
  using S = Cx<T>;
  if (seq.empty()) return scalar_traits<S>::one();
  std::uint32_t g = seq.front();
  std::vector<std::uint32_t> rest(seq.begin() + 1, seq.end());
  S out = S(st.mean[g]) * star_moment_oracle(sp, st, rest);
  for (std::size_t j = 0; j < rest.size(); ++j) {
    S pair(st.covariance(g, rest[j]),
           sp.base.form(g, rest[j]) / scalar_traits<T>::from_int(2));
    if (scalar_traits<S>::is_zero(pair)) continue;
    std::vector<std::uint32_t> sub = rest;
    sub.erase(sub.begin() + long(j));
    out += pair * star_moment_oracle(sp, st, sub);
  }
  return out;
}

// Quantum kappa: generators map to their expectation plus the linearized
// generator; inverse recenters.
template <class T>
WeylPolynomial<T> kappa_q(const PointedPreSympSpace<T>& sp, const Linearization<T>& lin,
                          const WeylPolynomial<T>& a, const QuasiFreeState<T>& omega0) {
  AffinePoint<Cx<T>> base;
  base.pointed = true;
  for (auto& v : omega0.mean) base.values.emplace_back(v);
  return kappa_to_lin(sp, lin, a, base);
}

template <class T>
WeylPolynomial<T> kappa_q_inverse(const PointedPreSympSpace<T>& sp, const Linearization<T>& lin,
                                  const WeylPolynomial<T>& a, const QuasiFreeState<T>& omega0) {
  AffinePoint<Cx<T>> base;
  base.pointed = true;
  for (auto& v : omega0.mean) base.values.emplace_back(v);
  return kappa_from_lin(sp, lin, a, base);
}

// (a (x) b) star (c (x) d) = (a star c) (x) (b star d)
template <class T>
TensorPolynomial<Cx<T>> tensor_star(const PreSympSpace<T>& V, const PreSympSpace<T>& W,
                                    const TensorPolynomial<Cx<T>>& x,
                                    const TensorPolynomial<Cx<T>>& y) {
  using S = Cx<T>;
  TensorPolynomial<S> out(x.left_id(), x.right_id());
  for (auto& [ka, ca] : x.terms())
    for (auto& [kb, cb] : y.terms()) {
      WeylPolynomial<T> la(V.id), lb(V.id), ra(W.id), rb(W.id);
      la.add(ka.first, scalar_traits<S>::one());
      lb.add(kb.first, scalar_traits<S>::one());
      ra.add(ka.second, scalar_traits<S>::one());
      rb.add(kb.second, scalar_traits<S>::one());
      auto left = star_product(V, la, lb);
      auto right = star_product(W, ra, rb);
      S c = S(ca * cb);
      for (auto& [ml, cl] : left.terms())
        for (auto& [mr, cr] : right.terms()) out.add(ml, mr, S(c * cl * cr));
    }
  return out;
}

// All generators to their negative; a star-automorphism of the unquotiented
// algebra that does not descend to the quotient.
template <class S>
Polynomial<S> sign_flip(const Polynomial<S>& a) {
  Polynomial<S> out(a.space_id());
  for (auto& [m, c] : a.terms())
    out.add(m, (m.size() % 2 == 0) ? c : S(-c));
  return out;
}

}  // namespace kgw
