#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

#include "kgw/errors.hpp"
#include "kgw/scalar.hpp"

namespace kgw {

// Small dense row-major matrix over an arbitrary field scalar. Sized for
// desk-scale algebra (dims well below 100), so no effort is spent on blocking.
template <class S>
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), v_(rows * cols, scalar_traits<S>::zero()) {}

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = scalar_traits<S>::one();
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  S& operator()(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }
  const S& operator()(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }

  friend Mat operator*(const Mat& a, const Mat& b) {
    if (a.cols_ != b.rows_) throw StructuralError("matrix product: dimension mismatch");
    Mat c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const S& aik = a(i, k);
        if (scalar_traits<S>::is_zero(aik)) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

  std::vector<S> apply(const std::vector<S>& x) const {
    if (x.size() != cols_) throw StructuralError("matrix apply: dimension mismatch");
    std::vector<S> y(rows_, scalar_traits<S>::zero());
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) y[i] += (*this)(i, j) * x[j];
    return y;
  }

  Mat transposed() const {
    Mat t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  friend bool operator==(const Mat& a, const Mat& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.v_ == b.v_;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<S> v_;
};

// In-place reduced row echelon form. Exact scalars pick the first nonzero
// pivot; floating scalars pick the largest and zero out entries below tol.
// Returns the pivot columns.
template <class S>
std::vector<std::size_t> rref(Mat<S>& m, double tol = 0.0) {
  std::vector<std::size_t> pivots;
  std::size_t r = 0;
  for (std::size_t c = 0; c < m.cols() && r < m.rows(); ++c) {
    std::size_t pr = r;
    if constexpr (scalar_traits<S>::exact) {
      while (pr < m.rows() && scalar_traits<S>::is_zero(m(pr, c))) ++pr;
      if (pr == m.rows()) continue;
    } else {
      for (std::size_t i = r + 1; i < m.rows(); ++i)
        if (scalar_traits<S>::abs2(m(i, c)) > scalar_traits<S>::abs2(m(pr, c))) pr = i;
      if (near_zero(m(pr, c), tol)) {
        for (std::size_t i = r; i < m.rows(); ++i) m(i, c) = scalar_traits<S>::zero();
        continue;
      }
    }
    if (pr != r)
      for (std::size_t j = 0; j < m.cols(); ++j) std::swap(m(pr, j), m(r, j));
    S inv = scalar_traits<S>::one();
    {
      // fields only; all scalars used here support division
      inv = inv / m(r, c);
    }
    for (std::size_t j = 0; j < m.cols(); ++j) m(r, j) = m(r, j) * inv;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      if (i == r) continue;
      S f = m(i, c);
      if (scalar_traits<S>::is_zero(f)) continue;
      for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = m(i, j) - f * m(r, j);
    }
    pivots.push_back(c);
    ++r;
  }
  return pivots;
}

template <class S>
std::size_t rank(Mat<S> m, double tol = 0.0) {
  return rref(m, tol).size();
}

// Kernel basis in reduced echelon form over the input coordinate ordering:
// one vector per free column, with unit entry in that column.
template <class S>
std::vector<std::vector<S>> kernel_basis(Mat<S> m, double tol = 0.0) {
  const std::size_t n = m.cols();
  auto pivots = rref(m, tol);
  std::vector<bool> is_pivot(n, false);
  for (auto c : pivots) is_pivot[c] = true;
  std::vector<std::vector<S>> basis;
  for (std::size_t c = 0; c < n; ++c) {
    if (is_pivot[c]) continue;
    std::vector<S> v(n, scalar_traits<S>::zero());
    v[c] = scalar_traits<S>::one();
    for (std::size_t r = 0; r < pivots.size(); ++r) v[pivots[r]] = -m(r, c);
    basis.push_back(std::move(v));
  }
  return basis;
}

// Solve m x = b for square exact m; nullopt when singular.
template <class S>
std::optional<std::vector<S>> solve_square(Mat<S> m, std::vector<S> b, double tol = 0.0) {
  const std::size_t n = m.rows();
  if (m.cols() != n || b.size() != n) throw StructuralError("solve: dimension mismatch");
  Mat<S> aug(n, n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) aug(i, j) = m(i, j);
    aug(i, n) = b[i];
  }
  auto pivots = rref(aug, tol);
  if (pivots.size() != n || pivots.back() == n) return std::nullopt;
  std::vector<S> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = aug(i, n);
  return x;
}

template <class S>
std::optional<Mat<S>> inverse(const Mat<S>& m, double tol = 0.0) {
  const std::size_t n = m.rows();
  if (m.cols() != n) return std::nullopt;
  Mat<S> aug(n, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) aug(i, j) = m(i, j);
    aug(i, n + i) = scalar_traits<S>::one();
  }
  auto pivots = rref(aug, tol);
  if (pivots.size() != n || pivots.back() >= n) return std::nullopt;
  Mat<S> inv(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) inv(i, j) = aug(i, n + j);
  return inv;
}

// Symplectic Gram-Schmidt for an antisymmetric form given in a basis.
// Produces hyperbolic pairs (u_k, v_k) with form(u_k, v_k) = 1 and a basis of
// the null space; all vectors are expressed over the input basis.
template <class S>
struct DarbouxBasis {
  std::vector<std::pair<std::vector<S>, std::vector<S>>> pairs;
  std::vector<std::vector<S>> null_basis;
};

template <class S>
DarbouxBasis<S> darboux(const Mat<S>& form, double tol = 0.0) {
  const std::size_t n = form.rows();
  auto pairing = [&](const std::vector<S>& a, const std::vector<S>& b) {
    S s = scalar_traits<S>::zero();
    for (std::size_t i = 0; i < n; ++i) {
      if (scalar_traits<S>::is_zero(a[i])) continue;
      for (std::size_t j = 0; j < n; ++j) s += a[i] * form(i, j) * b[j];
    }
    return s;
  };
  std::vector<std::vector<S>> work;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<S> e(n, scalar_traits<S>::zero());
    e[i] = scalar_traits<S>::one();
    work.push_back(std::move(e));
  }
  DarbouxBasis<S> out;
  for (;;) {
    std::size_t bi = work.size(), bj = work.size();
    for (std::size_t i = 0; i < work.size() && bi == work.size(); ++i)
      for (std::size_t j = i + 1; j < work.size(); ++j)
        if (!near_zero(pairing(work[i], work[j]), tol)) {
          bi = i;
          bj = j;
          break;
        }
    if (bi == work.size()) break;
    std::vector<S> u = work[bi];
    std::vector<S> v = work[bj];
    S s = pairing(u, v);
    for (auto& c : v) c = c / s;
    work.erase(work.begin() + bj);
    work.erase(work.begin() + bi);
    for (auto& w : work) {
      S cu = pairing(v, w);   // coefficient along u
      S cv = pairing(u, w);   // coefficient along v
      for (std::size_t k = 0; k < n; ++k) w[k] = w[k] + cu * u[k] - cv * v[k];
    }
    out.pairs.emplace_back(std::move(u), std::move(v));
  }
  out.null_basis = std::move(work);
  return out;
}

}  // namespace kgw
