#pragma once

// Sparse multivariate polynomials over the (x, y, Z) variable blocks used by
// the occupation-measure relaxation, plus the strain coordinates of C.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cgrelax/errors.hpp"

namespace cgrelax {

inline constexpr std::size_t kMaxArity = 16;

/// Describes which variables a polynomial ranges over.
///
/// The elasticity space of dimension n has 2n + n^2 variables laid out as
/// x_1..x_n, y_1..y_n, then Z in row-major order with Z(j, i) = dy_j/dx_i.
/// The strain space holds the n(n+1)/2 independent entries of a symmetric C:
/// diagonal entries first, then the upper off-diagonal entries row by row.
class VariableSpace {
 public:
  enum class Kind : std::uint8_t { generic, elasticity, strain };

  VariableSpace() = default;

  static VariableSpace elasticity(std::size_t n) {
    if (n == 0 || 2 * n + n * n > kMaxArity) {
      throw StructuralError("elasticity space requires 1 <= n <= 3");
    }
    return VariableSpace(Kind::elasticity, n, 2 * n + n * n);
  }
  static VariableSpace strain(std::size_t n) {
    if (n == 0 || n * (n + 1) / 2 > kMaxArity) throw StructuralError("strain space dimension out of range");
    return VariableSpace(Kind::strain, n, n * (n + 1) / 2);
  }
  static VariableSpace generic(std::size_t arity) {
    if (arity > kMaxArity) throw StructuralError("arity exceeds kMaxArity");
    return VariableSpace(Kind::generic, 0, arity);
  }

  Kind kind() const { return kind_; }
  std::size_t dimension() const { return n_; }
  std::size_t arity() const { return arity_; }

  std::size_t x(std::size_t i) const {
    require(Kind::elasticity);
    return i;
  }
  std::size_t y(std::size_t j) const {
    require(Kind::elasticity);
    return n_ + j;
  }
  std::size_t Z(std::size_t row, std::size_t col) const {
    require(Kind::elasticity);
    return 2 * n_ + row * n_ + col;
  }
  /// Index of the symmetric entry C(i, j) == C(j, i).
  std::size_t C(std::size_t i, std::size_t j) const {
    require(Kind::strain);
    if (i > j) std::swap(i, j);
    if (i == j) return i;
    std::size_t k = n_;
    for (std::size_t a = 0; a < i; ++a) k += n_ - a - 1;
    return k + (j - i - 1);
  }
  /// Size of the leading block that box integration acts on.
  std::size_t x_block_size() const { return kind_ == Kind::elasticity ? n_ : arity_; }

  std::string name(std::size_t var) const {
    switch (kind_) {
      case Kind::elasticity:
        if (var < n_) return "x" + std::to_string(var + 1);
        if (var < 2 * n_) return "y" + std::to_string(var - n_ + 1);
        var -= 2 * n_;
        return "Z" + std::to_string(var / n_ + 1) + std::to_string(var % n_ + 1);
      case Kind::strain:
        for (std::size_t i = 0; i < n_; ++i)
          for (std::size_t j = i; j < n_; ++j)
            if (C(i, j) == var) return "C" + std::to_string(i + 1) + std::to_string(j + 1);
        return "C?";
      case Kind::generic:
        break;
    }
    return "t" + std::to_string(var + 1);
  }

  friend bool operator==(const VariableSpace&, const VariableSpace&) = default;

 private:
  VariableSpace(Kind kind, std::size_t n, std::size_t arity)
      : kind_(kind), n_(static_cast<std::uint16_t>(n)), arity_(static_cast<std::uint16_t>(arity)) {}

  void require(Kind k) const {
    if (kind_ != k) throw StructuralError("variable helper used on the wrong kind of space");
  }

  Kind kind_ = Kind::generic;
  std::uint16_t n_ = 0;
  std::uint16_t arity_ = 0;
};

/// Exponent vector of a monomial; fixed inline storage keeps terms allocation free.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::size_t arity) : arity_(static_cast<std::uint8_t>(arity)) {
    if (arity > kMaxArity) throw StructuralError("arity exceeds kMaxArity");
  }
  MultiIndex(std::initializer_list<int> exps) : MultiIndex(exps.size()) {
    std::size_t i = 0;
    for (int e : exps) set(i++, e);
  }
  explicit MultiIndex(const std::vector<int>& exps) : MultiIndex(exps.size()) {
    for (std::size_t i = 0; i < exps.size(); ++i) set(i, exps[i]);
  }
  static MultiIndex unit(std::size_t arity, std::size_t var, int power = 1) {
    MultiIndex m(arity);
    m.set(var, power);
    return m;
  }

  std::size_t arity() const { return arity_; }
  int degree() const { return degree_; }
  int operator[](std::size_t i) const { return e_[i]; }

  void set(std::size_t i, int e) {
    if (i >= arity_) throw StructuralError("exponent index out of range");
    if (e < 0 || e > 255) throw StructuralError("exponent out of range");
    degree_ = static_cast<std::uint16_t>(degree_ - e_[i] + e);
    e_[i] = static_cast<std::uint8_t>(e);
  }

  friend MultiIndex operator+(const MultiIndex& a, const MultiIndex& b) {
    if (a.arity_ != b.arity_) throw StructuralError("multi-index arity mismatch");
    MultiIndex r(a.arity_);
    for (std::size_t i = 0; i < a.arity_; ++i) {
      const int e = a.e_[i] + b.e_[i];
      if (e > 255) throw StructuralError("exponent overflow");
      r.e_[i] = static_cast<std::uint8_t>(e);
    }
    r.degree_ = static_cast<std::uint16_t>(a.degree_ + b.degree_);
    return r;
  }

  std::vector<int> exponents() const { return {e_.begin(), e_.begin() + arity_}; }

  friend bool operator==(const MultiIndex& a, const MultiIndex& b) {
    return a.arity_ == b.arity_ && a.e_ == b.e_;
  }

  std::size_t hash() const {
    std::size_t h = arity_;
    for (std::size_t i = 0; i < arity_; ++i) h = h * 131 + e_[i];
    return h;
  }

 private:
  friend struct GradedLex;
  std::array<std::uint8_t, kMaxArity> e_{};
  std::uint8_t arity_ = 0;
  std::uint16_t degree_ = 0;
};

/// Graded lexicographic order: lower total degree first; within a degree the
/// monomial with the larger exponent on the earlier variable comes first
/// (1, x1, x2, ..., x1^2, x1 x2, ...).
struct GradedLex {
  bool operator()(const MultiIndex& a, const MultiIndex& b) const {
    if (a.degree_ != b.degree_) return a.degree_ < b.degree_;
    for (std::size_t i = 0; i < a.arity_; ++i) {
      if (a.e_[i] != b.e_[i]) return a.e_[i] > b.e_[i];
    }
    return false;
  }
};

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& m) const { return m.hash(); }
};

/// All exponent vectors of the given arity with total degree <= max_degree, graded-lex ordered.
inline std::vector<MultiIndex> monomials_up_to(std::size_t arity, int max_degree) {
  std::vector<MultiIndex> out;
  MultiIndex cur(arity);
  // Enumerate each degree in graded-lex order by recursive descent on the first variable.
  std::function<void(std::size_t, int)> rec = [&](std::size_t var, int remaining) {
    if (var + 1 == arity) {
      cur.set(var, remaining);
      out.push_back(cur);
      cur.set(var, 0);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      cur.set(var, e);
      rec(var + 1, remaining - e);
    }
    cur.set(var, 0);
  };
  for (int d = 0; d <= max_degree; ++d) {
    if (arity == 0) {
      if (d == 0) out.push_back(cur);
      continue;
    }
    rec(0, d);
  }
  return out;
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
};
using Box = std::vector<Interval>;

/// Axis-aligned facet {x_axis = value} of a box; value must equal one of the bounds.
struct Facet {
  std::size_t axis = 0;
  double value = 0.0;
};

template <typename Scalar>
class Polynomial {
 public:
  using Terms = std::map<MultiIndex, Scalar, GradedLex>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Polynomial() = default;
  explicit Polynomial(VariableSpace space) : space_(space) {}

  static Polynomial constant(VariableSpace space, Scalar c) {
    Polynomial p(space);
    p.add_term(MultiIndex(space.arity()), c);
    return p;
  }
  static Polynomial variable(VariableSpace space, std::size_t var) {
    if (var >= space.arity()) throw StructuralError("variable index out of range");
    Polynomial p(space);
    p.add_term(MultiIndex::unit(space.arity(), var), Scalar(1));
    return p;
  }
  static Polynomial monomial(VariableSpace space, const MultiIndex& m, Scalar c = Scalar(1)) {
    if (m.arity() != space.arity()) throw StructuralError("monomial arity does not match space");
    Polynomial p(space);
    p.add_term(m, c);
    return p;
  }

  const VariableSpace& space() const { return space_; }
  const Terms& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }

  int degree() const { return terms_.empty() ? 0 : terms_.rbegin()->first.degree(); }

  Scalar coefficient(const MultiIndex& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? Scalar(0) : it->second;
  }

  /// Accumulates c into the coefficient of m; exact zeros are erased.
  void add_term(const MultiIndex& m, Scalar c) {
    if (m.arity() != space_.arity()) throw StructuralError("monomial arity does not match space");
    if (c == Scalar(0)) return;
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second == Scalar(0)) terms_.erase(it);
    }
  }

  /// True when every term only involves variables in [first, last).
  bool depends_only_on(std::size_t first, std::size_t last) const {
    for (const auto& [m, c] : terms_)
      for (std::size_t i = 0; i < m.arity(); ++i)
        if ((i < first || i >= last) && m[i] != 0) return false;
    return true;
  }

  Polynomial& operator+=(const Polynomial& o) {
    check_space(o);
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) {
    check_space(o);
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
  }
  Polynomial& operator*=(Scalar s) {
    if (s == Scalar(0)) {
      terms_.clear();
      return *this;
    }
    for (auto it = terms_.begin(); it != terms_.end();) {
      it->second *= s;
      if (it->second == Scalar(0)) {
        it = terms_.erase(it);
      } else {
        ++it;
      }
    }
    return *this;
  }
  Polynomial& operator*=(const Polynomial& o) { return *this = *this * o; }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator-(Polynomial a) { return a *= Scalar(-1); }
  friend Polynomial operator*(Polynomial a, Scalar s) { return a *= s; }
  friend Polynomial operator*(Scalar s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    a.check_space(b);
    Polynomial r(a.space_);
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_) r.add_term(ma + mb, ca * cb);
    return r;
  }

  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.space_ == b.space_ && a.terms_ == b.terms_;
  }

  template <typename Derived>
  Scalar operator()(const Eigen::MatrixBase<Derived>& point) const {
    return evaluate(*this, point);
  }

  void check_space(const Polynomial& o) const {
    if (!(space_ == o.space_)) throw StructuralError("polynomials live in different variable spaces");
  }

 private:
  VariableSpace space_;
  Terms terms_;
};

template <typename Scalar>
Polynomial<Scalar> pow(const Polynomial<Scalar>& p, int k) {
  auto r = Polynomial<Scalar>::constant(p.space(), Scalar(1));
  for (int i = 0; i < k; ++i) r = r * p;
  return r;
}

template <typename Scalar>
Polynomial<Scalar> differentiate(const Polynomial<Scalar>& p, std::size_t var) {
  if (var >= p.space().arity()) throw StructuralError("differentiation variable out of range");
  Polynomial<Scalar> r(p.space());
  for (const auto& [m, c] : p.terms()) {
    const int e = m[var];
    if (e == 0) continue;
    MultiIndex d = m;
    d.set(var, e - 1);
    r.add_term(d, c * Scalar(e));
  }
  return r;
}

/// Direct sum of monomial values, terms visited in graded-lex order.
template <typename Scalar, typename Derived>
Scalar evaluate(const Polynomial<Scalar>& p, const Eigen::MatrixBase<Derived>& point) {
  if (static_cast<std::size_t>(point.size()) != p.space().arity()) {
    throw StructuralError("evaluation point has the wrong length");
  }
  Scalar total(0);
  for (const auto& [m, c] : p.terms()) {
    Scalar v = c;
    for (std::size_t i = 0; i < m.arity(); ++i)
      for (int e = 0; e < m[i]; ++e) v *= point(static_cast<Eigen::Index>(i));
    total += v;
  }
  return total;
}

/// Replaces every variable i of p by images[i]; all images share the target space.
template <typename Scalar>
Polynomial<Scalar> substitute(const Polynomial<Scalar>& p, const std::vector<Polynomial<Scalar>>& images,
                              VariableSpace target) {
  if (images.size() != p.space().arity()) throw StructuralError("substitution needs one image per variable");
  for (const auto& img : images)
    if (!(img.space() == target)) throw StructuralError("substituted polynomial outside the target space");
  std::vector<std::vector<Polynomial<Scalar>>> powers(images.size());
  auto power_of = [&](std::size_t var, int e) -> const Polynomial<Scalar>& {
    auto& cache = powers[var];
    if (cache.empty()) cache.push_back(Polynomial<Scalar>::constant(target, Scalar(1)));
    while (static_cast<int>(cache.size()) <= e) cache.push_back(cache.back() * images[var]);
    return cache[static_cast<std::size_t>(e)];
  };
  Polynomial<Scalar> result(target);
  for (const auto& [m, c] : p.terms()) {
    auto term = Polynomial<Scalar>::constant(target, c);
    for (std::size_t i = 0; i < m.arity(); ++i)
      if (m[i] > 0) term = term * power_of(i, m[i]);
    result += term;
  }
  return result;
}

/// Substitutes the listed variables; the others pass through unchanged.
template <typename Scalar>
Polynomial<Scalar> compose(const Polynomial<Scalar>& p, const std::map<std::size_t, Polynomial<Scalar>>& subs) {
  std::vector<Polynomial<Scalar>> images;
  images.reserve(p.space().arity());
  for (std::size_t i = 0; i < p.space().arity(); ++i) {
    auto it = subs.find(i);
    images.push_back(it != subs.end() ? it->second : Polynomial<Scalar>::variable(p.space(), i));
  }
  return substitute(p, images, p.space());
}

namespace detail {
inline double power_integral(double lo, double hi, int k) {
  return (std::pow(hi, k + 1) - std::pow(lo, k + 1)) / (k + 1);
}
}  // namespace detail

/// Integrates the leading box.size() variables over the box; the remaining
/// variables pass through, so the result lives in the same space with those
/// exponents cleared.
template <typename Scalar>
Polynomial<Scalar> integrate_box(const Polynomial<Scalar>& p, const Box& box) {
  if (box.size() > p.space().x_block_size()) throw StructuralError("box has more axes than the x block");
  Polynomial<Scalar> r(p.space());
  for (const auto& [m, c] : p.terms()) {
    Scalar v = c;
    MultiIndex rest = m;
    for (std::size_t i = 0; i < box.size(); ++i) {
      v *= Scalar(detail::power_integral(box[i].lo, box[i].hi, m[i]));
      rest.set(i, 0);
    }
    r.add_term(rest, v);
  }
  return r;
}

/// Box integral of a polynomial that depends on the x block only.
template <typename Scalar>
Scalar integrate_box_value(const Polynomial<Scalar>& p, const Box& box) {
  if (!p.depends_only_on(0, box.size())) throw StructuralError("integrand depends on variables outside the box");
  const auto r = integrate_box(p, box);
  return r.coefficient(MultiIndex(p.space().arity()));
}

/// Integral over the facet {x_axis = value} of the box (surface measure).
template <typename Scalar>
Scalar integrate_facet(const Polynomial<Scalar>& p, const Box& box, const Facet& facet) {
  if (facet.axis >= box.size()) throw StructuralError("facet axis outside the box");
  const auto& iv = box[facet.axis];
  if (facet.value != iv.lo && facet.value != iv.hi) {
    throw StructuralError("facet value is not a bound of the box along its axis");
  }
  if (!p.depends_only_on(0, box.size())) throw StructuralError("facet integrand depends on non-x variables");
  Scalar total(0);
  for (const auto& [m, c] : p.terms()) {
    Scalar v = c;
    for (std::size_t i = 0; i < box.size(); ++i) {
      if (i == facet.axis) {
        for (int e = 0; e < m[i]; ++e) v *= Scalar(facet.value);
      } else {
        v *= Scalar(detail::power_integral(box[i].lo, box[i].hi, m[i]));
      }
    }
    total += v;
  }
  return total;
}

/// The 2n facets of a box as (facet, outward normal sign).
inline std::vector<std::pair<Facet, double>> box_facets(const Box& box) {
  std::vector<std::pair<Facet, double>> out;
  for (std::size_t i = 0; i < box.size(); ++i) {
    out.push_back({Facet{i, box[i].lo}, -1.0});
    out.push_back({Facet{i, box[i].hi}, +1.0});
  }
  return out;
}

inline double box_volume(const Box& box) {
  double v = 1.0;
  for (const auto& iv : box) v *= iv.width();
  return v;
}

using Poly = Polynomial<double>;

}  // namespace cgrelax
