#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "kgw/ccr.hpp"
#include "kgw/errors.hpp"
#include "kgw/fedosov.hpp"
#include "kgw/poly.hpp"
#include "kgw/presymp.hpp"
#include "kgw/scalar.hpp"

namespace kgw {

using Json = nlohmann::ordered_json;

namespace detail {

template <class S>
std::string scalar_string(const S& x) {
  return kgw::to_string(x);
}

inline Rat scalar_parse(const std::string& s, Rat*) { return Rat(s); }
inline double scalar_parse(const std::string& s, double*) { return std::stod(s); }

}  // namespace detail

template <class S>
Json space_to_json(const PreSympSpace<S>& sp) {
  Json j;
  j["dim"] = sp.dim;
  j["labels"] = sp.labels;
  std::vector<std::string> form;
  for (std::size_t r = 0; r < sp.dim; ++r)
    for (std::size_t c = 0; c < sp.dim; ++c) form.push_back(detail::scalar_string(sp.form(r, c)));
  j["form"] = form;
  return j;
}

template <class S>
Json space_to_json(const PointedPreSympSpace<S>& sp) {
  Json j = space_to_json(sp.base);
  std::vector<std::string> pt;
  for (auto& x : sp.point) pt.push_back(detail::scalar_string(x));
  j["point"] = pt;
  return j;
}

// "exact" when every numeric string is integral or a fraction; "floating"
// when decimal points or exponents appear. Mixing the two is rejected.
inline std::string detect_scalar_mode(const Json& j) {
  bool exact = false, floating = false;
  auto scan = [&](const Json& arr) {
    for (auto& e : arr) {
      std::string s = e.get<std::string>();
      if (s.find('.') != std::string::npos || s.find('e') != std::string::npos ||
          s.find('E') != std::string::npos)
        floating = true;
      else
        exact = true;
    }
  };
  scan(j.at("form"));
  if (j.contains("point")) scan(j.at("point"));
  if (exact && floating) throw ModeMismatchError("space document mixes exact and floating scalars");
  return floating ? "floating" : "exact";
}

template <class S>
PreSympSpace<S> space_from_json(const Json& j, double tol = 1e-9) {
  std::size_t dim = j.at("dim").get<std::size_t>();
  std::vector<std::string> labels = j.at("labels").get<std::vector<std::string>>();
  Mat<S> form(dim, dim);
  const auto& f = j.at("form");
  if (f.size() != dim * dim) throw StructuralError("space document: form has wrong length");
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < dim; ++c)
      form(r, c) = detail::scalar_parse(f[r * dim + c].get<std::string>(), (S*)nullptr);
  return PreSympSpace<S>::make(std::move(labels), std::move(form), tol);
}

template <class S>
PointedPreSympSpace<S> pointed_space_from_json(const Json& j, double tol = 1e-9) {
  auto base = space_from_json<S>(j, tol);
  std::vector<S> point;
  for (auto& e : j.at("point")) point.push_back(detail::scalar_parse(e.get<std::string>(), (S*)nullptr));
  return PointedPreSympSpace<S>::make(std::move(base), std::move(point));
}

template <class T>
Json poly_to_json(const Polynomial<Cx<T>>& p) {
  Json out = Json::array();
  for (auto& [m, c] : p.terms()) {
    Json t;
    t["monomial"] = m;
    t["re"] = detail::scalar_string(c.re);
    t["im"] = detail::scalar_string(c.im);
    out.push_back(t);
  }
  return out;
}

template <class T>
Json poly_to_json(const Polynomial<T>& p) {
  Json out = Json::array();
  for (auto& [m, c] : p.terms()) {
    Json t;
    t["monomial"] = m;
    t["re"] = detail::scalar_string(c);
    t["im"] = detail::scalar_string(T(0));
    out.push_back(t);
  }
  return out;
}

template <class T>
Polynomial<Cx<T>> weyl_poly_from_json(const Json& j, std::uint64_t space_id) {
  Polynomial<Cx<T>> p(space_id);
  for (auto& t : j) {
    Mono m = t.at("monomial").get<Mono>();
    std::sort(m.begin(), m.end());
    T re = detail::scalar_parse(t.at("re").get<std::string>(), (T*)nullptr);
    T im = detail::scalar_parse(t.at("im").get<std::string>(), (T*)nullptr);
    p.add(std::move(m), Cx<T>(re, im));
  }
  return p;
}

template <class T>
Json state_to_json(const QuasiFreeState<T>& st) {
  Json j;
  std::vector<std::string> means;
  for (auto& x : st.mean) means.push_back(detail::scalar_string(x));
  j["means"] = means;
  std::vector<std::string> cov;
  for (std::size_t r = 0; r < st.covariance.rows(); ++r)
    for (std::size_t c = 0; c < st.covariance.cols(); ++c)
      cov.push_back(detail::scalar_string(st.covariance(r, c)));
  j["covariance"] = cov;
  return j;
}

template <class T>
Json bundle_to_json(const BundleElement<T>& w) {
  Json out = Json::array();
  for (auto& [k, c] : w.terms()) {
    Json t;
    t["a_mono"] = std::get<0>(k);
    t["b_mono"] = std::get<1>(k);
    t["form"] = std::get<2>(k);
    t["re"] = detail::scalar_string(c.re);
    t["im"] = detail::scalar_string(c.im);
    out.push_back(t);
  }
  return out;
}

template <class T>
BundleElement<T> bundle_from_json(const Json& j) {
  BundleElement<T> w;
  for (auto& t : j) {
    Mono a = t.at("a_mono").get<Mono>();
    Mono b = t.at("b_mono").get<Mono>();
    FormSet f = t.at("form").get<FormSet>();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    T re = detail::scalar_parse(t.at("re").get<std::string>(), (T*)nullptr);
    T im = detail::scalar_parse(t.at("im").get<std::string>(), (T*)nullptr);
    w.add(std::move(a), std::move(b), std::move(f), Cx<T>(re, im));
  }
  return w;
}

}  // namespace kgw
