#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "kgw/errors.hpp"
#include "kgw/matrix.hpp"
#include "kgw/scalar.hpp"

namespace kgw {

inline std::uint64_t next_space_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

// Finite-dimensional real vector space with an antisymmetric bilinear form.
// S = Rat gives exact mode, S = double floating mode with a tolerance used by
// every rank decision.
template <class S>
struct PreSympSpace {
  std::size_t dim = 0;
  std::vector<std::string> labels;
  Mat<S> form;
  double tol = 1e-9;
  // set by direct_sum: dimension of the first summand
  std::optional<std::size_t> sum_split;
  std::uint64_t id = 0;

  static PreSympSpace make(std::vector<std::string> labels_, Mat<S> form_, double tol_ = 1e-9) {
    PreSympSpace sp;
    sp.dim = labels_.size();
    sp.labels = std::move(labels_);
    sp.form = std::move(form_);
    sp.tol = tol_;
    sp.id = next_space_id();
    if (sp.form.rows() != sp.dim || sp.form.cols() != sp.dim)
      throw StructuralError("presymp space: form shape does not match dim");
    std::set<std::string> seen(sp.labels.begin(), sp.labels.end());
    if (seen.size() != sp.dim) throw StructuralError("presymp space: duplicate basis labels");
    for (std::size_t i = 0; i < sp.dim; ++i)
      for (std::size_t j = 0; j < sp.dim; ++j)
        if (!near_zero(S(sp.form(i, j) + sp.form(j, i)), sp.tol))
          throw StructuralError("presymp space: form is not antisymmetric");
    return sp;
  }

  // standard basis e0..e{n-1} with labels "e0".. and a given form
  static PreSympSpace standard(Mat<S> form_, double tol_ = 1e-9) {
    std::vector<std::string> l;
    for (std::size_t i = 0; i < form_.rows(); ++i) l.push_back("e" + std::to_string(i));
    return make(std::move(l), std::move(form_), tol_);
  }

  const S& sigma(std::size_t i, std::size_t j) const { return form(i, j); }

  S sigma(const std::vector<S>& a, const std::vector<S>& b) const {
    if (a.size() != dim || b.size() != dim) throw StructuralError("sigma: dimension mismatch");
    S s = scalar_traits<S>::zero();
    for (std::size_t i = 0; i < dim; ++i) {
      if (scalar_traits<S>::is_zero(a[i])) continue;
      for (std::size_t j = 0; j < dim; ++j) s += a[i] * form(i, j) * b[j];
    }
    return s;
  }
};

template <class S>
struct PointedPreSympSpace {
  PreSympSpace<S> base;
  std::vector<S> point;  // coordinates of the distinguished null vector

  static PointedPreSympSpace make(PreSympSpace<S> base_, std::vector<S> point_) {
    PointedPreSympSpace p;
    p.base = std::move(base_);
    p.point = std::move(point_);
    if (p.point.size() != p.base.dim)
      throw StructuralError("pointed space: point has wrong dimension");
    bool nonzero = false;
    for (auto& c : p.point) nonzero = nonzero || !near_zero(c, p.base.tol);
    if (!nonzero) throw InvalidPointError("pointed space: distinguished point is zero");
    for (std::size_t i = 0; i < p.base.dim; ++i) {
      S s = scalar_traits<S>::zero();
      for (std::size_t j = 0; j < p.base.dim; ++j) s += p.base.form(i, j) * p.point[j];
      if (!near_zero(s, p.base.tol))
        throw InvalidPointError("pointed space: distinguished point is not null");
    }
    return p;
  }

  // index of the coordinate eliminated by the substitution normal form
  std::size_t pivot_index() const {
    for (std::size_t i = point.size(); i-- > 0;)
      if (!near_zero(point[i], base.tol)) return i;
    throw InvalidPointError("pointed space: zero point");
  }
};

template <class S>
struct PreSympMap {
  PreSympSpace<S> source;
  PreSympSpace<S> target;
  Mat<S> matrix;  // target.dim x source.dim
  std::optional<std::vector<S>> source_point;
  std::optional<std::vector<S>> target_point;

  static PreSympMap make(const PreSympSpace<S>& src, const PreSympSpace<S>& tgt, Mat<S> m) {
    if (m.rows() != tgt.dim || m.cols() != src.dim)
      throw StructuralError("presymp map: matrix shape mismatch");
    return PreSympMap{src, tgt, std::move(m), std::nullopt, std::nullopt};
  }

  static PreSympMap make_pointed(const PointedPreSympSpace<S>& src,
                                 const PointedPreSympSpace<S>& tgt, Mat<S> m) {
    auto map = make(src.base, tgt.base, std::move(m));
    map.source_point = src.point;
    map.target_point = tgt.point;
    return map;
  }

  std::vector<S> apply(const std::vector<S>& v) const { return matrix.apply(v); }
};

struct MorphismReport {
  bool ok = true;
  std::string violation;  // empty when ok
};

template <class S>
MorphismReport check_morphism(const PreSympMap<S>& L) {
  const auto& V = L.source;
  const auto& W = L.target;
  double tol = std::max(V.tol, W.tol);
  if (rank(L.matrix, tol) != V.dim) return {false, "matrix does not have full column rank"};
  for (std::size_t i = 0; i < V.dim; ++i)
    for (std::size_t j = 0; j < V.dim; ++j) {
      std::vector<S> ei(V.dim, scalar_traits<S>::zero()), ej(V.dim, scalar_traits<S>::zero());
      ei[i] = scalar_traits<S>::one();
      ej[j] = scalar_traits<S>::one();
      S lhs = W.sigma(L.apply(ei), L.apply(ej));
      if (!near_zero(S(lhs - V.sigma(i, j)), tol))
        return {false, "form not preserved on basis pair (" + V.labels[i] + "," + V.labels[j] +
                           ")"};
    }
  if (L.source_point) {
    auto img = L.apply(*L.source_point);
    for (std::size_t i = 0; i < W.dim; ++i)
      if (!near_zero(S(img[i] - (*L.target_point)[i]), tol))
        return {false, "distinguished point not preserved"};
  }
  return {};
}

template <class S>
PreSympSpace<S> direct_sum(const PreSympSpace<S>& V, const PreSympSpace<S>& W) {
  std::vector<std::string> labels;
  for (auto& l : V.labels) labels.push_back("L." + l);
  for (auto& l : W.labels) labels.push_back("R." + l);
  Mat<S> f(V.dim + W.dim, V.dim + W.dim);
  for (std::size_t i = 0; i < V.dim; ++i)
    for (std::size_t j = 0; j < V.dim; ++j) f(i, j) = V.form(i, j);
  for (std::size_t i = 0; i < W.dim; ++i)
    for (std::size_t j = 0; j < W.dim; ++j) f(V.dim + i, V.dim + j) = W.form(i, j);
  auto sum = PreSympSpace<S>::make(std::move(labels), std::move(f), std::max(V.tol, W.tol));
  sum.sum_split = V.dim;
  return sum;
}

template <class S>
struct AmalgamatedSum {
  PointedPreSympSpace<S> space;
  PreSympMap<S> inj_left;
  PreSympMap<S> inj_right;
};

// Direct sum with the two distinguished points identified. Coordinates on the
// quotient keep all of V's basis and drop the last coordinate of W's point.
template <class S>
AmalgamatedSum<S> amalgamated_sum(const PointedPreSympSpace<S>& V,
                                  const PointedPreSympSpace<S>& W) {
  const std::size_t nv = V.base.dim, nw = W.base.dim;
  const std::size_t k = W.pivot_index();
  const std::size_t dim = nv + nw - 1;
  double tol = std::max(V.base.tol, W.base.tol);

  // representatives of the quotient basis inside V (+) W
  std::vector<std::vector<S>> rep;
  auto emb = [&](bool left, std::size_t idx) {
    std::vector<S> v(nv + nw, scalar_traits<S>::zero());
    v[left ? idx : nv + idx] = scalar_traits<S>::one();
    return v;
  };
  for (std::size_t i = 0; i < nv; ++i) rep.push_back(emb(true, i));
  for (std::size_t j = 0; j < nw; ++j)
    if (j != k) rep.push_back(emb(false, j));
  // class of W's pivot direction: e_k = (1_V - sum_{j!=k} Wp_j e_j) / Wp_k
  std::vector<S> pivot_rep(nv + nw, scalar_traits<S>::zero());
  for (std::size_t i = 0; i < nv; ++i) pivot_rep[i] = V.point[i] / W.point[k];
  for (std::size_t j = 0; j < nw; ++j)
    if (j != k) pivot_rep[nv + j] = -W.point[j] / W.point[k];

  auto big_sigma = [&](const std::vector<S>& a, const std::vector<S>& b) {
    S s = scalar_traits<S>::zero();
    for (std::size_t i = 0; i < nv; ++i)
      for (std::size_t j = 0; j < nv; ++j) s += a[i] * V.base.form(i, j) * b[j];
    for (std::size_t i = 0; i < nw; ++i)
      for (std::size_t j = 0; j < nw; ++j) s += a[nv + i] * W.base.form(i, j) * b[nv + j];
    return s;
  };

  std::vector<std::string> labels;
  for (auto& l : V.base.labels) labels.push_back("L." + l);
  for (std::size_t j = 0; j < nw; ++j)
    if (j != k) labels.push_back("R." + W.base.labels[j]);
  Mat<S> f(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) f(i, j) = big_sigma(rep[i], rep[j]);
  auto base = PreSympSpace<S>::make(std::move(labels), std::move(f), tol);
  std::vector<S> point(dim, scalar_traits<S>::zero());
  for (std::size_t i = 0; i < nv; ++i) point[i] = V.point[i];
  auto space = PointedPreSympSpace<S>::make(std::move(base), std::move(point));

  Mat<S> mleft(dim, nv);
  for (std::size_t i = 0; i < nv; ++i) mleft(i, i) = scalar_traits<S>::one();
  Mat<S> mright(dim, nw);
  {
    std::size_t row = nv;
    for (std::size_t j = 0; j < nw; ++j) {
      if (j == k) continue;
      mright(row, j) = scalar_traits<S>::one();
      ++row;
    }
    for (std::size_t i = 0; i < nv; ++i) mright(i, k) = pivot_rep[i];
    row = nv;
    for (std::size_t j = 0; j < nw; ++j) {
      if (j == k) continue;
      mright(row, k) = pivot_rep[nv + j];
      ++row;
    }
  }
  auto il = PreSympMap<S>::make_pointed(V, space, std::move(mleft));
  auto ir = PreSympMap<S>::make_pointed(W, space, std::move(mright));
  return {std::move(space), std::move(il), std::move(ir)};
}

namespace detail {

inline std::vector<std::vector<double>> kernel_svd(const Mat<double>& form, double tol) {
  const int n = int(form.rows());
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = form(std::size_t(i), std::size_t(j));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double cut = sv.size() ? sv(0) * tol : 0.0;
  std::vector<std::vector<double>> raw;
  for (int c = 0; c < sv.size(); ++c) {
    if (sv(c) > cut) continue;
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[std::size_t(i)] = svd.matrixV()(i, c);
    raw.push_back(std::move(v));
  }
  if (raw.empty()) return raw;
  // echelonize for a deterministic basis over the input ordering
  Mat<double> rows(raw.size(), std::size_t(n));
  for (std::size_t r = 0; r < raw.size(); ++r)
    for (std::size_t c = 0; c < std::size_t(n); ++c) rows(r, c) = raw[r][c];
  rref(rows, tol);
  std::vector<std::vector<double>> out;
  for (std::size_t r = 0; r < raw.size(); ++r) {
    std::vector<double> v(static_cast<std::size_t>(n));
    bool nz = false;
    for (std::size_t c = 0; c < std::size_t(n); ++c) {
      v[c] = rows(r, c);
      nz = nz || v[c] != 0.0;
    }
    if (nz) out.push_back(std::move(v));
  }
  return out;
}

}  // namespace detail

// Basis of {v : form(v,.) = 0}, reduced echelon over the input ordering.
template <class S>
std::vector<std::vector<S>> null_space(const PreSympSpace<S>& V) {
  if constexpr (scalar_traits<S>::exact) {
    return kernel_basis(V.form);
  } else {
    return detail::kernel_svd(V.form, V.tol);
  }
}

template <class S>
std::size_t null_dim(const PreSympSpace<S>& V) {
  return null_space(V).size();
}

namespace detail {

// columns of the canonical basis in a fixed layout: u1 v1 u2 v2 ... nulls
template <class S>
Mat<S> darboux_matrix(const DarbouxBasis<S>& d, std::size_t n) {
  Mat<S> b(n, n);
  std::size_t c = 0;
  for (auto& pr : d.pairs) {
    for (std::size_t i = 0; i < n; ++i) b(i, c) = pr.first[i];
    ++c;
    for (std::size_t i = 0; i < n; ++i) b(i, c) = pr.second[i];
    ++c;
  }
  for (auto& v : d.null_basis) {
    for (std::size_t i = 0; i < n; ++i) b(i, c) = v[i];
    ++c;
  }
  return b;
}

// Rearrange a Darboux basis so a prescribed null vector becomes the first
// null basis vector.
template <class S>
bool promote_null_vector(DarbouxBasis<S>& d, const std::vector<S>& p, double tol) {
  const std::size_t n = p.size();
  if (d.null_basis.empty()) return false;
  Mat<S> sys(n, d.null_basis.size());
  for (std::size_t j = 0; j < d.null_basis.size(); ++j)
    for (std::size_t i = 0; i < n; ++i) sys(i, j) = d.null_basis[j][i];
  // least-structure solve: append p and row-reduce
  Mat<S> aug(n, d.null_basis.size() + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d.null_basis.size(); ++j) aug(i, j) = sys(i, j);
    aug(i, d.null_basis.size()) = p[i];
  }
  auto pivots = rref(aug, tol);
  if (!pivots.empty() && pivots.back() == d.null_basis.size()) return false;  // p not in span
  std::vector<S> coeff(d.null_basis.size(), scalar_traits<S>::zero());
  for (std::size_t r = 0; r < pivots.size(); ++r) coeff[pivots[r]] = aug(r, d.null_basis.size());
  std::size_t hit = d.null_basis.size();
  for (std::size_t j = 0; j < coeff.size(); ++j)
    if (!near_zero(coeff[j], tol)) {
      hit = j;
      break;
    }
  if (hit == d.null_basis.size()) return false;
  d.null_basis.erase(d.null_basis.begin() + hit);
  d.null_basis.insert(d.null_basis.begin(), p);
  return true;
}

}  // namespace detail

// Constructive isomorphism search: two spaces are isomorphic iff the ranks of
// their forms agree (equal dim assumed); the witness maps canonical bases.
template <class S>
std::optional<PreSympMap<S>> find_isomorphism(const PreSympSpace<S>& V,
                                              const PreSympSpace<S>& W) {
  if (V.dim != W.dim) return std::nullopt;
  double tol = std::max(V.tol, W.tol);
  auto dv = darboux(V.form, tol);
  auto dw = darboux(W.form, tol);
  if (dv.pairs.size() != dw.pairs.size()) return std::nullopt;
  auto bv = detail::darboux_matrix(dv, V.dim);
  auto bw = detail::darboux_matrix(dw, W.dim);
  auto bvi = inverse(bv, tol);
  if (!bvi) return std::nullopt;
  return PreSympMap<S>::make(V, W, bw * (*bvi));
}

template <class S>
std::optional<PreSympMap<S>> find_pointed_isomorphism(const PointedPreSympSpace<S>& V,
                                                      const PointedPreSympSpace<S>& W) {
  if (V.base.dim != W.base.dim) return std::nullopt;
  double tol = std::max(V.base.tol, W.base.tol);
  auto dv = darboux(V.base.form, tol);
  auto dw = darboux(W.base.form, tol);
  if (dv.pairs.size() != dw.pairs.size()) return std::nullopt;
  if (!detail::promote_null_vector(dv, V.point, tol)) return std::nullopt;
  if (!detail::promote_null_vector(dw, W.point, tol)) return std::nullopt;
  auto bv = detail::darboux_matrix(dv, V.base.dim);
  auto bw = detail::darboux_matrix(dw, W.base.dim);
  auto bvi = inverse(bv, tol);
  if (!bvi) return std::nullopt;
  return PreSympMap<S>::make_pointed(V, W, bw * (*bvi));
}

}  // namespace kgw
