#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <tuple>
#include <utility>
#include <vector>

#include "kgw/ccr.hpp"
#include "kgw/errors.hpp"
#include "kgw/poly.hpp"
#include "kgw/presymp.hpp"
#include "kgw/scalar.hpp"

namespace kgw {

// Antisymmetric form part: strictly increasing index set. Wedging an index
// already present kills the term; otherwise the parity of the insertion
// position supplies the sign.
using FormSet = std::vector<std::uint32_t>;

inline bool wedge_insert(FormSet& f, std::uint32_t g, int& sign) {
  auto it = std::lower_bound(f.begin(), f.end(), g);
  if (it != f.end() && *it == g) return false;
  if ((it - f.begin()) % 2 == 1) sign = -sign;
  f.insert(it, g);
  return true;
}

// Tri-graded element of the Weyl bundle: base-algebra monomial (original
// generator indices, pivot eliminated), fibre monomial and form set (both
// over linearized generator indices).
template <class T>
class BundleElement {
 public:
  using S = Cx<T>;
  using Key = std::tuple<Mono, Mono, FormSet>;
  struct KeyLess {
    bool operator()(const Key& a, const Key& b) const {
      MonoGrlex l;
      if (l(std::get<0>(a), std::get<0>(b))) return true;
      if (l(std::get<0>(b), std::get<0>(a))) return false;
      if (l(std::get<1>(a), std::get<1>(b))) return true;
      if (l(std::get<1>(b), std::get<1>(a))) return false;
      return std::get<2>(a) < std::get<2>(b);
    }
  };
  using Terms = std::map<Key, S, KeyLess>;

  BundleElement() = default;

  void add(Mono a, Mono b, FormSet f, S c) {
    if (scalar_traits<S>::is_zero(c)) return;
    Key k{std::move(a), std::move(b), std::move(f)};
    auto it = terms_.find(k);
    if (it == terms_.end()) {
      terms_.emplace(std::move(k), std::move(c));
    } else {
      it->second += c;
      if (scalar_traits<S>::is_zero(it->second)) terms_.erase(it);
    }
  }

  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  friend BundleElement operator+(const BundleElement& x, const BundleElement& y) {
    BundleElement r = x;
    for (auto& [k, c] : y.terms_) r.add(std::get<0>(k), std::get<1>(k), std::get<2>(k), c);
    return r;
  }

  friend BundleElement operator-(const BundleElement& x, const BundleElement& y) {
    BundleElement r = x;
    for (auto& [k, c] : y.terms_) r.add(std::get<0>(k), std::get<1>(k), std::get<2>(k), S(-c));
    return r;
  }

  friend bool operator==(const BundleElement& x, const BundleElement& y) {
    return x.terms_ == y.terms_;
  }

 private:
  Terms terms_;
};

// Base space data for the bundle machinery: the pointed space, its
// linearization and the Poisson tensor on linearized generators.
template <class T>
struct FedosovContext {
  PointedPreSympSpace<T> space;
  Linearization<T> lin;

  static FedosovContext make(PointedPreSympSpace<T> sp) {
    FedosovContext c{std::move(sp), {}};
    c.lin = linearize(c.space);
    return c;
  }

  T pi(std::uint32_t i, std::uint32_t j) const { return lin.space.form(i, j); }

  std::size_t lin_of(std::size_t orig) const {
    for (std::size_t i = 0; i < lin.index.size(); ++i)
      if (lin.index[i] == orig) return i;
    throw StructuralError("fedosov: generator has no linearized image");
  }
};

template <class T>
BundleElement<T> inject(const FedosovContext<T>& ctx, const Polynomial<Cx<T>>& a) {
  BundleElement<T> w;
  auto red = ideal_reduce(ctx.space, a);
  for (auto& [m, c] : red.terms()) w.add(m, {}, {}, c);
  return w;
}

template <class T>
BundleElement<T> op_delta(const FedosovContext<T>& ctx, const BundleElement<T>& w) {
  (void)ctx;
  BundleElement<T> out;
  for (auto& [k, c] : w.terms()) {
    const auto& [a, b, f] = k;
    for (auto [g, mult] : mono_factors(b)) {
      int sign = 1;
      FormSet nf = f;
      if (!wedge_insert(nf, g, sign)) continue;
      Cx<T> coeff = c * scalar_traits<Cx<T>>::from_int(long(mult));
      if (sign < 0) coeff = -coeff;
      out.add(a, mono_remove(b, g), std::move(nf), coeff);
    }
  }
  return out;
}

template <class T>
BundleElement<T> op_delta_star(const FedosovContext<T>& ctx, const BundleElement<T>& w) {
  (void)ctx;
  BundleElement<T> out;
  for (auto& [k, c] : w.terms()) {
    const auto& [a, b, f] = k;
    for (std::size_t j = 0; j < f.size(); ++j) {
      FormSet nf = f;
      nf.erase(nf.begin() + long(j));
      Cx<T> coeff = (j % 2 == 0) ? c : Cx<T>(-c);
      Mono nb = b;
      nb.insert(std::lower_bound(nb.begin(), nb.end(), f[j]), f[j]);
      out.add(a, std::move(nb), std::move(nf), coeff);
    }
  }
  return out;
}

template <class T>
BundleElement<T> op_delta_inv(const FedosovContext<T>& ctx, const BundleElement<T>& w) {
  BundleElement<T> out;
  for (auto& [k, c] : w.terms()) {
    const auto& [a, b, f] = k;
    std::size_t nm = b.size() + f.size();
    if (nm == 0) continue;
    BundleElement<T> single;
    single.add(a, b, f, c);
    auto ds = op_delta_star(ctx, single);
    Cx<T> inv = scalar_traits<Cx<T>>::one() / scalar_traits<Cx<T>>::from_int(long(nm));
    for (auto& [k2, c2] : ds.terms())
      out.add(std::get<0>(k2), std::get<1>(k2), std::get<2>(k2), Cx<T>(c2 * inv));
  }
  return out;
}

template <class T>
Polynomial<Cx<T>> op_sigma_proj(const FedosovContext<T>& ctx, const BundleElement<T>& w) {
  Polynomial<Cx<T>> out(ctx.space.base.id);
  for (auto& [k, c] : w.terms()) {
    const auto& [a, b, f] = k;
    if (b.empty() && f.empty()) out.add(a, c);
  }
  return out;
}

// Tensor-product connection: fibre generators are parallel, the base
// coefficient is differentiated into the form slot.
template <class T>
BundleElement<T> nabla_w(const FedosovContext<T>& ctx, const BundleElement<T>& w) {
  BundleElement<T> out;
  for (auto& [k, c] : w.terms()) {
    const auto& [a, b, f] = k;
    for (auto [g, mult] : mono_factors(a)) {
      std::uint32_t lg = std::uint32_t(ctx.lin_of(g));
      int sign = 1;
      FormSet nf = f;
      if (!wedge_insert(nf, lg, sign)) continue;
      Cx<T> coeff = c * scalar_traits<Cx<T>>::from_int(long(mult));
      if (sign < 0) coeff = -coeff;
      out.add(mono_remove(a, g), b, std::move(nf), coeff);
    }
  }
  return out;
}

template <class T>
BundleElement<T> fedosov_d(const FedosovContext<T>& ctx, const BundleElement<T>& w) {
  return nabla_w(ctx, w) - op_delta(ctx, w);
}

// Unique solution of  w = a + delta_inv(nabla_w(w)); finitely many rounds
// because each round raises the fibre degree.
template <class T>
BundleElement<T> flat_section(const FedosovContext<T>& ctx, const Polynomial<Cx<T>>& a) {
  BundleElement<T> seed = inject(ctx, a);
  BundleElement<T> w = seed;
  std::size_t cap = a.degree() + 2;
  for (std::size_t it = 0; it < cap; ++it) {
    BundleElement<T> next = seed + op_delta_inv(ctx, nabla_w(ctx, w));
    if (next == w) return w;
    w = std::move(next);
  }
  return w;
}

// Product in W (tensor) Omega: base parts commute, fibre parts star-multiply,
// form parts wedge.
template <class T>
BundleElement<T> fibre_mul(const FedosovContext<T>& ctx, const BundleElement<T>& x,
                           const BundleElement<T>& y) {
  BundleElement<T> out;
  for (auto& [kx, cx] : x.terms())
    for (auto& [ky, cy] : y.terms()) {
      const auto& [ax, bx, fx] = kx;
      const auto& [ay, by, fy] = ky;
      int sign = 1;
      FormSet f = fx;
      bool alive = true;
      // wedge fy onto fx from the left factor's right side
      for (auto g : fy) {
        // appending at the end: count inversions against existing entries
        auto it = std::lower_bound(f.begin(), f.end(), g);
        if (it != f.end() && *it == g) {
          alive = false;
          break;
        }
        std::size_t after = std::size_t(f.end() - it);
        if (after % 2 == 1) sign = -sign;
        f.insert(it, g);
      }
      if (!alive) continue;
      WeylPolynomial<T> pb(ctx.lin.space.id), qb(ctx.lin.space.id);
      pb.add(bx, scalar_traits<Cx<T>>::one());
      qb.add(by, scalar_traits<Cx<T>>::one());
      auto prod = star_product(ctx.lin.space, pb, qb);
      Cx<T> c = cx * cy;
      if (sign < 0) c = -c;
      for (auto& [mb, cb] : prod.terms()) out.add(mono_mul(ax, ay), mb, f, Cx<T>(c * cb));
    }
  return out;
}

template <class T>
Polynomial<Cx<T>> star_fedosov(const FedosovContext<T>& ctx, const Polynomial<Cx<T>>& a,
                               const Polynomial<Cx<T>>& b) {
  return op_sigma_proj(ctx, fibre_mul(ctx, flat_section(ctx, a), flat_section(ctx, b)));
}

namespace detail {

// element of the iterated one-form module: base coefficient with an ordered
// tuple of linearized indices
template <class T>
using TensorTerms = std::map<std::pair<Mono, std::vector<std::uint32_t>>, Cx<T>>;

template <class T>
void tensor_add(TensorTerms<T>& t, Mono a, std::vector<std::uint32_t> tup, Cx<T> c) {
  if (scalar_traits<Cx<T>>::is_zero(c)) return;
  auto key = std::make_pair(std::move(a), std::move(tup));
  auto it = t.find(key);
  if (it == t.end()) {
    t.emplace(std::move(key), std::move(c));
  } else {
    it->second += c;
    if (scalar_traits<Cx<T>>::is_zero(it->second)) t.erase(it);
  }
}

// recursive tensor-connection step: differentiate the base coefficient and
// append the new one-form index in the last slot
template <class T>
TensorTerms<T> nabla_tensor(const FedosovContext<T>& ctx, const TensorTerms<T>& x) {
  TensorTerms<T> out;
  for (auto& [k, c] : x) {
    const auto& [a, tup] = k;
    for (auto [g, mult] : mono_factors(a)) {
      std::uint32_t lg = std::uint32_t(ctx.lin_of(g));
      auto ntup = tup;
      ntup.push_back(lg);
      tensor_add(out, mono_remove(a, g), std::move(ntup),
                 Cx<T>(c * scalar_traits<Cx<T>>::from_int(long(mult))));
    }
  }
  return out;
}

}  // namespace detail

// Direct formula: sum over n of (i/2)^n / n! of the n-fold Poisson-tensor
// contraction of iterated covariant derivatives.
template <class T>
Polynomial<Cx<T>> star_connection(const FedosovContext<T>& ctx, const Polynomial<Cx<T>>& a,
                                  const Polynomial<Cx<T>>& b) {
  using S = Cx<T>;
  auto ra = ideal_reduce(ctx.space, a);
  auto rb = ideal_reduce(ctx.space, b);
  detail::TensorTerms<T> da, db;
  for (auto& [m, c] : ra.terms()) detail::tensor_add(da, m, {}, c);
  for (auto& [m, c] : rb.terms()) detail::tensor_add(db, m, {}, c);

  Polynomial<S> out(ctx.space.base.id);
  S half_i(scalar_traits<T>::zero(), scalar_traits<T>::one() / scalar_traits<T>::from_int(2));
  S prefactor = scalar_traits<S>::one();
  for (std::size_t n = 0;; ++n) {
    if (n > 0) {
      da = detail::nabla_tensor(ctx, da);
      db = detail::nabla_tensor(ctx, db);
      prefactor *= half_i / scalar_traits<S>::from_int(long(n));
    }
    if (da.empty() || db.empty()) break;
    for (auto& [ka, ca] : da)
      for (auto& [kb, cb] : db) {
        S c = prefactor * ca * cb;
        bool alive = true;
        for (std::size_t l = 0; l < n && alive; ++l) {
          T p = ctx.pi(ka.second[l], kb.second[l]);
          if (scalar_traits<T>::is_zero(p))
            alive = false;
          else
            c *= S(p);
        }
        if (alive) out.add(mono_mul(ka.first, kb.first), c);
      }
  }
  return out;
}

namespace detail {

// add coeff * p (x) 1 (x) (first ^ second) with antisymmetric normalization
template <class T>
void add_two_form(BundleElement<T>& out, const Polynomial<Cx<T>>& p, std::uint32_t first,
                  std::uint32_t second, const Cx<T>& scale) {
  if (first == second) return;
  Cx<T> s = (first < second) ? scale : Cx<T>(-scale);
  FormSet f{std::min(first, second), std::max(first, second)};
  for (auto& [m, c] : p.terms()) out.add(m, {}, f, Cx<T>(s * c));
}

// add scale * (dp), each derivative index in a one-element form slot
template <class T>
void add_one_form_d(BundleElement<T>& out, const FedosovContext<T>& ctx,
                    const Polynomial<Cx<T>>& p, const Cx<T>& scale) {
  for (auto& [m, c] : p.terms())
    for (auto [g, mult] : mono_factors(m)) {
      std::uint32_t lg = std::uint32_t(ctx.lin_of(g));
      out.add(mono_remove(m, g), {}, FormSet{lg},
              Cx<T>(scale * c * scalar_traits<Cx<T>>::from_int(long(mult))));
    }
}

}  // namespace detail

// T(omega) = wedge(nabla(omega)) + d(omega) on a one-form a (x) lambda;
// vanishes for the canonical connection.
template <class T>
BundleElement<T> torsion_of(const FedosovContext<T>& ctx, const Polynomial<Cx<T>>& a,
                            std::uint32_t lam) {
  using S = Cx<T>;
  BundleElement<T> out;
  auto red = ideal_reduce(ctx.space, a);
  for (std::size_t i = 0; i < ctx.lin.index.size(); ++i) {
    auto d = red.derivative(std::uint32_t(ctx.lin.index[i]));
    if (d.is_zero()) continue;
    // wedge(nabla): lambda ^ d-index;  d(omega): d-index ^ lambda
    detail::add_two_form(out, d, lam, std::uint32_t(i), scalar_traits<S>::one());
    detail::add_two_form(out, d, std::uint32_t(i), lam, scalar_traits<S>::one());
  }
  return out;
}

// Q(omega, omega') = d Pi(omega,omega') - Pi(nabla omega, omega')
//                  - Pi(omega, nabla omega') on basis one-forms a (x) e_li,
// b (x) e_lj; vanishes by the Leibniz rule.
template <class T>
BundleElement<T> poisson_compat_of(const FedosovContext<T>& ctx, const Polynomial<Cx<T>>& a,
                                   std::uint32_t li, const Polynomial<Cx<T>>& b,
                                   std::uint32_t lj) {
  using S = Cx<T>;
  BundleElement<T> out;
  T pij = ctx.pi(li, lj);
  if (scalar_traits<T>::is_zero(pij)) return out;
  auto ra = ideal_reduce(ctx.space, a);
  auto rb = ideal_reduce(ctx.space, b);
  S plus = S(pij);
  S minus = S(-plus);
  detail::add_one_form_d(out, ctx, ra * rb, plus);
  // nabla terms carry the spectator factor along in the base slot
  BundleElement<T> t1, t2;
  detail::add_one_form_d(t1, ctx, ra, minus);
  detail::add_one_form_d(t2, ctx, rb, minus);
  for (auto& [k, c] : t1.terms())
    for (auto& [mb, cb] : rb.terms())
      out.add(mono_mul(std::get<0>(k), mb), std::get<1>(k), std::get<2>(k), S(c * cb));
  for (auto& [k, c] : t2.terms())
    for (auto& [ma, ca] : ra.terms())
      out.add(mono_mul(std::get<0>(k), ma), std::get<1>(k), std::get<2>(k), S(c * ca));
  return out;
}

}  // namespace kgw
