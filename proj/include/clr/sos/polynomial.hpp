#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace clr::sos {

using VarId = std::uint32_t;

/// Sparse monomial: sorted (variable, exponent) pairs with exponents >= 1.
class Monomial {
 public:
  Monomial() = default;
  // Entries may be unsorted or repeat variables; zero exponents are dropped.
  explicit Monomial(std::vector<std::pair<VarId, std::uint32_t>> powers);

  static Monomial one() { return {}; }
  static Monomial var(VarId v, std::uint32_t exponent = 1);

  const std::vector<std::pair<VarId, std::uint32_t>>& powers() const { return powers_; }
  std::uint32_t degree() const { return degree_; }
  std::uint32_t exponent(VarId v) const;
  bool is_one() const { return powers_.empty(); }

  Monomial operator*(const Monomial& other) const;
  double evaluate(std::span<const double> point) const;
  std::string to_string() const;

  friend bool operator==(const Monomial& a, const Monomial& b) {
    return a.powers_ == b.powers_;
  }

 private:
  std::vector<std::pair<VarId, std::uint32_t>> powers_;
  std::uint32_t degree_ = 0;
};

/// Graded-lexicographic order: lower total degree first, then the larger
/// exponent of the lowest-numbered variable first (x0 before x1 before ...).
bool grlex_less(const Monomial& a, const Monomial& b);

struct MonomialHash {
  std::size_t operator()(const Monomial& m) const noexcept;
};

/// All monomials over `vars` of total degree <= max_degree, grlex order.
std::vector<Monomial> monomial_basis(std::span<const VarId> vars, int max_degree);

/// Sparse polynomial. Zero coefficients are never stored.
class Polynomial {
 public:
  using Map = std::unordered_map<Monomial, double, MonomialHash>;

  Polynomial() = default;
  static Polynomial constant(double c);
  static Polynomial variable(VarId v);
  static Polynomial monomial(const Monomial& m, double coef = 1.0);

  const Map& terms() const { return terms_; }
  std::vector<std::pair<Monomial, double>> sorted_terms() const;
  std::uint32_t degree() const;
  bool is_zero() const { return terms_.empty(); }
  double coefficient(const Monomial& m) const;

  void add_term(const Monomial& m, double coef);
  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double s);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);

  Polynomial pow(unsigned e) const;
  double evaluate(std::span<const double> point) const;
  std::string to_string() const;

 private:
  Map terms_;
};

}  // namespace clr::sos
