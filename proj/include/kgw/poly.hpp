#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "kgw/errors.hpp"
#include "kgw/presymp.hpp"
#include "kgw/scalar.hpp"

namespace kgw {

// Monomial over generator indices: sorted multiset stored as a vector.
using Mono = std::vector<std::uint32_t>;

struct MonoGrlex {
  bool operator()(const Mono& a, const Mono& b) const {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  }
};

inline Mono mono_mul(const Mono& a, const Mono& b) {
  Mono m;
  m.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(m));
  return m;
}

// m with one occurrence of g removed; caller guarantees g is present
inline Mono mono_remove(const Mono& m, std::uint32_t g) {
  Mono r = m;
  r.erase(std::find(r.begin(), r.end(), g));
  return r;
}

inline std::size_t mono_count(const Mono& m, std::uint32_t g) {
  auto [lo, hi] = std::equal_range(m.begin(), m.end(), g);
  return std::size_t(hi - lo);
}

inline std::vector<std::pair<std::uint32_t, std::size_t>> mono_factors(const Mono& m) {
  std::vector<std::pair<std::uint32_t, std::size_t>> f;
  for (std::size_t i = 0; i < m.size();) {
    std::size_t j = i;
    while (j < m.size() && m[j] == m[i]) ++j;
    f.emplace_back(m[i], j - i);
    i = j;
  }
  return f;
}

// Element of the symmetric algebra over a presymplectic space; also the value
// carrier for the star-multiplied variant. Plain value type: the space is
// referenced by id only and passed to the operations that need the form.
template <class S>
class Polynomial {
 public:
  using Terms = std::map<Mono, S, MonoGrlex>;

  Polynomial() = default;
  explicit Polynomial(std::uint64_t space_id) : space_id_(space_id) {}

  static Polynomial constant(std::uint64_t space_id, S c) {
    Polynomial p(space_id);
    p.add(Mono{}, std::move(c));
    return p;
  }

  static Polynomial generator(std::uint64_t space_id, std::uint32_t g) {
    Polynomial p(space_id);
    p.add(Mono{g}, scalar_traits<S>::one());
    return p;
  }

  std::uint64_t space_id() const { return space_id_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  std::size_t degree() const {
    std::size_t d = 0;
    for (auto& [m, c] : terms_) d = std::max(d, m.size());
    return d;
  }

  void add(Mono m, S c) {
    if (scalar_traits<S>::is_zero(c)) return;
    auto it = terms_.find(m);
    if (it == terms_.end()) {
      terms_.emplace(std::move(m), std::move(c));
    } else {
      it->second += c;
      if (scalar_traits<S>::is_zero(it->second)) terms_.erase(it);
    }
  }

  S coeff(const Mono& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? scalar_traits<S>::zero() : it->second;
  }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    a.check_same_space(b);
    Polynomial r = a;
    for (auto& [m, c] : b.terms_) r.add(m, c);
    return r;
  }

  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) {
    a.check_same_space(b);
    Polynomial r = a;
    for (auto& [m, c] : b.terms_) r.add(m, -c);
    return r;
  }

  friend Polynomial operator-(const Polynomial& a) {
    Polynomial r(a.space_id_);
    for (auto& [m, c] : a.terms_) r.terms_.emplace(m, -c);
    return r;
  }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    a.check_same_space(b);
    Polynomial r(a.space_id_);
    for (auto& [ma, ca] : a.terms_)
      for (auto& [mb, cb] : b.terms_) r.add(mono_mul(ma, mb), S(ca * cb));
    return r;
  }

  Polynomial& operator+=(const Polynomial& b) { return *this = *this + b; }
  Polynomial& operator-=(const Polynomial& b) { return *this = *this - b; }

  friend Polynomial operator*(const S& c, const Polynomial& a) {
    Polynomial r(a.space_id_);
    for (auto& [m, k] : a.terms_) r.add(m, S(c * k));
    return r;
  }

  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.terms_ == b.terms_;
  }
  friend bool operator!=(const Polynomial& a, const Polynomial& b) { return !(a == b); }

  // d/dg with the usual falling multiplicity
  Polynomial derivative(std::uint32_t g) const {
    Polynomial r(space_id_);
    for (auto& [m, c] : terms_) {
      std::size_t k = mono_count(m, g);
      if (k == 0) continue;
      r.add(mono_remove(m, g), S(scalar_traits<S>::from_int(long(k)) * c));
    }
    return r;
  }

  // unique algebra-homomorphism extension of a generator assignment
  Polynomial map_generators(std::uint64_t new_space_id,
                            const std::function<Polynomial(std::uint32_t)>& img) const {
    Polynomial r(new_space_id);
    for (auto& [m, c] : terms_) {
      Polynomial t = Polynomial::constant(new_space_id, c);
      for (auto g : m) t = t * img(g);
      r += t;
    }
    return r;
  }

  void check_same_space(const Polynomial& b) const {
    if (space_id_ != b.space_id_)
      throw StructuralError("polynomial operation across different spaces");
  }

  std::string str(const std::vector<std::string>& labels) const;

 private:
  std::uint64_t space_id_ = 0;
  Terms terms_;
};

// Assigns a scalar to every generator; on pointed spaces the pairing with the
// distinguished direction must be exactly one.
template <class S>
struct AffinePoint {
  std::vector<S> values;
  bool pointed = false;

  static AffinePoint make(std::vector<S> values_) { return {std::move(values_), false}; }

  template <class T>
  static AffinePoint make_pointed(const PointedPreSympSpace<T>& sp, std::vector<S> values_) {
    AffinePoint p{std::move(values_), true};
    if (p.values.size() != sp.base.dim)
      throw InvalidPointError("affine point: dimension mismatch");
    S pairing = scalar_traits<S>::zero();
    for (std::size_t i = 0; i < p.values.size(); ++i) pairing += p.values[i] * S(sp.point[i]);
    if (!near_zero(S(pairing - scalar_traits<S>::one()), sp.base.tol))
      throw InvalidPointError("affine point: value on distinguished direction is not 1");
    return p;
  }
};

template <class S>
struct LinFunctional {
  std::vector<S> coefficients;
};

// {.,.} on S(V): derivation in both slots, sigma on generators.
template <class S, class T>
Polynomial<S> poisson_bracket(const PreSympSpace<T>& sp, const Polynomial<S>& a,
                              const Polynomial<S>& b) {
  a.check_same_space(b);
  if (a.space_id() != sp.id) throw StructuralError("poisson_bracket: wrong space");
  Polynomial<S> out(sp.id);
  for (auto& [ma, ca] : a.terms()) {
    if (ma.empty()) continue;
    auto fa = mono_factors(ma);
    for (auto& [mb, cb] : b.terms()) {
      if (mb.empty()) continue;
      auto fb = mono_factors(mb);
      for (auto& [ga, ka] : fa)
        for (auto& [gb, kb] : fb) {
          S s = S(sp.sigma(ga, gb));
          if (scalar_traits<S>::is_zero(s)) continue;
          S coeff = ca * cb * s * scalar_traits<S>::from_int(long(ka)) *
                    scalar_traits<S>::from_int(long(kb));
          out.add(mono_mul(mono_remove(ma, ga), mono_remove(mb, gb)), coeff);
        }
    }
  }
  return out;
}

// Unital multiplicative evaluation against an affine point.
template <class S>
S evaluate(const Polynomial<S>& a, const AffinePoint<S>& p) {
  S out = scalar_traits<S>::zero();
  for (auto& [m, c] : a.terms()) {
    S t = c;
    for (auto g : m) {
      if (g >= p.values.size()) throw StructuralError("evaluate: generator out of range");
      t *= p.values[g];
    }
    out += t;
  }
  return out;
}

// Substitution normal form for the ideal generated by (1_V - 1): the pivot
// coordinate of the distinguished point is eliminated.
template <class S, class T>
Polynomial<S> ideal_reduce(const PointedPreSympSpace<T>& sp, const Polynomial<S>& a) {
  if (a.space_id() != sp.base.id) throw StructuralError("ideal_reduce: wrong space");
  const std::size_t k = sp.pivot_index();
  // pivot generator = (1 - sum_{i != k} p_i g_i) / p_k
  Polynomial<S> pivot_image = Polynomial<S>::constant(sp.base.id, scalar_traits<S>::one());
  for (std::size_t i = 0; i < sp.base.dim; ++i) {
    if (i == k) continue;
    if (near_zero(sp.point[i], sp.base.tol)) continue;
    pivot_image -= S(sp.point[i]) * Polynomial<S>::generator(sp.base.id, std::uint32_t(i));
  }
  S inv_pk = scalar_traits<S>::one() / S(sp.point[k]);
  pivot_image = inv_pk * pivot_image;
  return a.map_generators(sp.base.id, [&](std::uint32_t g) {
    if (g == std::uint32_t(k)) return pivot_image;
    return Polynomial<S>::generator(sp.base.id, g);
  });
}

// The linearized space V / span(point): coordinates drop the pivot index.
template <class S>
struct Linearization {
  PreSympSpace<S> space;           // form on the linearized generators
  std::vector<std::size_t> index;  // linearized index -> original generator
  std::size_t pivot;
  std::vector<S> pivot_image;      // image of the pivot generator in lin coords
};

template <class S>
Linearization<S> linearize(const PointedPreSympSpace<S>& sp) {
  Linearization<S> lin;
  lin.pivot = sp.pivot_index();
  Mat<S> f(sp.base.dim - 1, sp.base.dim - 1);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < sp.base.dim; ++i)
    if (i != lin.pivot) {
      lin.index.push_back(i);
      labels.push_back("lin." + sp.base.labels[i]);
    }
  for (std::size_t i = 0; i < lin.index.size(); ++i)
    for (std::size_t j = 0; j < lin.index.size(); ++j)
      f(i, j) = sp.base.form(lin.index[i], lin.index[j]);
  lin.space = PreSympSpace<S>::make(std::move(labels), std::move(f), sp.base.tol);
  lin.pivot_image.assign(lin.index.size(), scalar_traits<S>::zero());
  for (std::size_t i = 0; i < lin.index.size(); ++i)
    lin.pivot_image[i] = S(-sp.point[lin.index[i]] / sp.point[lin.pivot]);
  return lin;
}

// kappa: quotient algebra -> algebra over the linearized space,
// g |-> base(g) + lin(g). Bijective on normal forms.
template <class S, class T>
Polynomial<S> kappa_to_lin(const PointedPreSympSpace<T>& sp, const Linearization<T>& lin,
                           const Polynomial<S>& a, const AffinePoint<S>& base) {
  if (!base.pointed) throw InvalidPointError("kappa_to_lin: base point must be pointed");
  std::vector<std::size_t> to_lin(sp.base.dim, SIZE_MAX);
  for (std::size_t i = 0; i < lin.index.size(); ++i) to_lin[lin.index[i]] = i;
  return a.map_generators(lin.space.id, [&](std::uint32_t g) {
    Polynomial<S> img = Polynomial<S>::constant(lin.space.id, base.values[g]);
    if (g == lin.pivot) {
      for (std::size_t i = 0; i < lin.index.size(); ++i)
        img += S(lin.pivot_image[i]) * Polynomial<S>::generator(lin.space.id, std::uint32_t(i));
    } else {
      img += Polynomial<S>::generator(lin.space.id, std::uint32_t(to_lin[g]));
    }
    return img;
  });
}

// Explicit inverse: lin generator |-> original generator - its base value.
template <class S, class T>
Polynomial<S> kappa_from_lin(const PointedPreSympSpace<T>& sp, const Linearization<T>& lin,
                             const Polynomial<S>& a, const AffinePoint<S>& base) {
  return a.map_generators(sp.base.id, [&](std::uint32_t g) {
    std::uint32_t orig = std::uint32_t(lin.index[g]);
    Polynomial<S> img = Polynomial<S>::generator(sp.base.id, orig);
    img -= Polynomial<S>::constant(sp.base.id, base.values[orig]);
    return img;
  });
}

// g |-> g + c(g) * 1_V-direction on non-distinguished generators. Requires c
// to vanish on the pivot coordinate. The functional may carry the real or the
// complexified scalar.
template <class S, class T, class C>
Polynomial<S> shift_endomorphism(const PointedPreSympSpace<T>& sp, const Polynomial<S>& a,
                                 const LinFunctional<C>& c) {
  if (a.space_id() != sp.base.id) throw StructuralError("shift: wrong space");
  const std::size_t k = sp.pivot_index();
  if (c.coefficients.size() != sp.base.dim)
    throw StructuralError("shift: functional has wrong dimension");
  if (!scalar_traits<C>::is_zero(c.coefficients[k]))
    throw InvalidPointError("shift: functional must vanish on the distinguished generator");
  return a.map_generators(sp.base.id, [&](std::uint32_t g) {
    Polynomial<S> img = Polynomial<S>::generator(sp.base.id, g);
    if (g != k && !scalar_traits<C>::is_zero(c.coefficients[g])) {
      // add c(g) times the distinguished vector
      for (std::size_t i = 0; i < sp.base.dim; ++i) {
        if (near_zero(sp.point[i], sp.base.tol)) continue;
        img += S(S(c.coefficients[g]) * S(sp.point[i])) *
               Polynomial<S>::generator(sp.base.id, std::uint32_t(i));
      }
    }
    return img;
  });
}

// Independent oracle for evaluate(poisson_bracket(a,b), p): contraction of the
// first partial derivatives with the form.
template <class S, class T>
S bracket_derivative_oracle(const PreSympSpace<T>& sp, const Polynomial<S>& a,
                            const Polynomial<S>& b, const AffinePoint<S>& p) {
  S out = scalar_traits<S>::zero();
  for (std::uint32_t i = 0; i < sp.dim; ++i)
    for (std::uint32_t j = 0; j < sp.dim; ++j) {
      S s = S(sp.sigma(i, j));
      if (scalar_traits<S>::is_zero(s)) continue;
      out += evaluate(a.derivative(i), p) * s * evaluate(b.derivative(j), p);
    }
  return out;
}

// Element of CanPois(V) (x) CanPois(W).
template <class S>
class TensorPolynomial {
 public:
  using Key = std::pair<Mono, Mono>;
  struct KeyLess {
    bool operator()(const Key& a, const Key& b) const {
      MonoGrlex l;
      if (l(a.first, b.first)) return true;
      if (l(b.first, a.first)) return false;
      return l(a.second, b.second);
    }
  };
  using Terms = std::map<Key, S, KeyLess>;

  TensorPolynomial() = default;
  TensorPolynomial(std::uint64_t left_id, std::uint64_t right_id)
      : left_id_(left_id), right_id_(right_id) {}

  static TensorPolynomial one(std::uint64_t l, std::uint64_t r) {
    TensorPolynomial t(l, r);
    t.add({}, {}, scalar_traits<S>::one());
    return t;
  }

  void add(Mono a, Mono b, S c) {
    if (scalar_traits<S>::is_zero(c)) return;
    Key k{std::move(a), std::move(b)};
    auto it = terms_.find(k);
    if (it == terms_.end()) {
      terms_.emplace(std::move(k), std::move(c));
    } else {
      it->second += c;
      if (scalar_traits<S>::is_zero(it->second)) terms_.erase(it);
    }
  }

  const Terms& terms() const { return terms_; }
  std::uint64_t left_id() const { return left_id_; }
  std::uint64_t right_id() const { return right_id_; }
  bool is_zero() const { return terms_.empty(); }

  friend TensorPolynomial operator+(const TensorPolynomial& x, const TensorPolynomial& y) {
    TensorPolynomial r = x;
    for (auto& [k, c] : y.terms_) r.add(k.first, k.second, c);
    return r;
  }

  friend TensorPolynomial operator-(const TensorPolynomial& x, const TensorPolynomial& y) {
    TensorPolynomial r = x;
    for (auto& [k, c] : y.terms_) r.add(k.first, k.second, -c);
    return r;
  }

  friend TensorPolynomial operator*(const TensorPolynomial& x, const TensorPolynomial& y) {
    TensorPolynomial r(x.left_id_, x.right_id_);
    for (auto& [ka, ca] : x.terms_)
      for (auto& [kb, cb] : y.terms_)
        r.add(mono_mul(ka.first, kb.first), mono_mul(ka.second, kb.second), S(ca * cb));
    return r;
  }

  friend bool operator==(const TensorPolynomial& x, const TensorPolynomial& y) {
    return x.terms_ == y.terms_;
  }

 private:
  std::uint64_t left_id_ = 0, right_id_ = 0;
  Terms terms_;
};

// {a (x) b, a' (x) b'} = {a,a'} (x) bb' + aa' (x) {b,b'}
template <class S, class T>
TensorPolynomial<S> tensor_bracket(const PreSympSpace<T>& V, const PreSympSpace<T>& W,
                                   const TensorPolynomial<S>& x, const TensorPolynomial<S>& y) {
  TensorPolynomial<S> r(x.left_id(), x.right_id());
  for (auto& [ka, ca] : x.terms())
    for (auto& [kb, cb] : y.terms()) {
      Polynomial<S> la(V.id), lb(V.id), ra(W.id), rb(W.id);
      la.add(ka.first, scalar_traits<S>::one());
      lb.add(kb.first, scalar_traits<S>::one());
      ra.add(ka.second, scalar_traits<S>::one());
      rb.add(kb.second, scalar_traits<S>::one());
      auto bl = poisson_bracket(V, la, lb);
      auto br = poisson_bracket(W, ra, rb);
      S c = S(ca * cb);
      for (auto& [m, k] : bl.terms()) r.add(m, mono_mul(ka.second, kb.second), S(c * k));
      for (auto& [m, k] : br.terms()) r.add(mono_mul(ka.first, kb.first), m, S(c * k));
    }
  return r;
}

// CanPois(V (+) W) -> CanPois(V) (x) CanPois(W): (v,w) |-> v(x)1 + 1(x)w.
// Requires the input space to be a recorded direct sum.
template <class S, class T>
TensorPolynomial<S> tensor_factorize(const PreSympSpace<T>& sum, const PreSympSpace<T>& V,
                                     const PreSympSpace<T>& W, const Polynomial<S>& a) {
  if (!sum.sum_split || *sum.sum_split != V.dim || sum.dim != V.dim + W.dim)
    throw StructuralError("tensor_factorize: space is not a recorded direct sum");
  if (a.space_id() != sum.id) throw StructuralError("tensor_factorize: wrong space");
  TensorPolynomial<S> out(V.id, W.id);
  for (auto& [m, c] : a.terms()) {
    TensorPolynomial<S> t = TensorPolynomial<S>::one(V.id, W.id);
    for (auto g : m) {
      TensorPolynomial<S> gen(V.id, W.id);
      if (g < V.dim)
        gen.add(Mono{g}, Mono{}, scalar_traits<S>::one());
      else
        gen.add(Mono{}, Mono{std::uint32_t(g - V.dim)}, scalar_traits<S>::one());
      t = t * gen;
    }
    for (auto& [k, tc] : t.terms()) out.add(k.first, k.second, S(c * tc));
  }
  return out;
}

template <class S, class T>
Polynomial<S> tensor_recombine(const PreSympSpace<T>& sum, const PreSympSpace<T>& V,
                               const TensorPolynomial<S>& x) {
  Polynomial<S> out(sum.id);
  for (auto& [k, c] : x.terms()) {
    Mono m = k.first;
    for (auto g : k.second) m.push_back(std::uint32_t(g + V.dim));
    std::sort(m.begin(), m.end());
    out.add(std::move(m), c);
  }
  return out;
}

template <class S>
std::string Polynomial<S>::str(const std::vector<std::string>& labels) const {
  if (terms_.empty()) return "0";
  std::string out;
  for (auto& [m, c] : terms_) {
    if (!out.empty()) out += " + ";
    out += "(" + kgw::to_string(scalar_traits<S>::to_double(c)) + ")";
    for (auto g : m) out += "*" + (g < labels.size() ? labels[g] : "g" + std::to_string(g));
  }
  return out;
}

}  // namespace kgw
