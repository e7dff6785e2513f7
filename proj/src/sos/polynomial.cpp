#include "clr/sos/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "clr/errors.hpp"

namespace clr::sos {

Monomial::Monomial(std::vector<std::pair<VarId, std::uint32_t>> powers) {
  std::sort(powers.begin(), powers.end());
  for (const auto& [v, e] : powers) {
    if (e == 0) continue;
    if (!powers_.empty() && powers_.back().first == v) {
      powers_.back().second += e;
    } else {
      powers_.emplace_back(v, e);
    }
    degree_ += e;
  }
}

Monomial Monomial::var(VarId v, std::uint32_t exponent) {
  return Monomial({{v, exponent}});
}

std::uint32_t Monomial::exponent(VarId v) const {
  auto it = std::lower_bound(powers_.begin(), powers_.end(), std::make_pair(v, 0U));
  return (it != powers_.end() && it->first == v) ? it->second : 0;
}

Monomial Monomial::operator*(const Monomial& other) const {
  Monomial out;
  out.powers_.reserve(powers_.size() + other.powers_.size());
  auto a = powers_.begin();
  auto b = other.powers_.begin();
  while (a != powers_.end() || b != other.powers_.end()) {
    if (b == other.powers_.end() || (a != powers_.end() && a->first < b->first)) {
      out.powers_.push_back(*a++);
    } else if (a == powers_.end() || b->first < a->first) {
      out.powers_.push_back(*b++);
    } else {
      out.powers_.emplace_back(a->first, a->second + b->second);
      ++a;
      ++b;
    }
  }
  out.degree_ = degree_ + other.degree_;
  return out;
}

double Monomial::evaluate(std::span<const double> point) const {
  double acc = 1.0;
  for (const auto& [v, e] : powers_) {
    if (v >= point.size()) throw InputError("evaluation point misses variable " + std::to_string(v));
    for (std::uint32_t k = 0; k < e; ++k) acc *= point[v];
  }
  return acc;
}

std::string Monomial::to_string() const {
  if (powers_.empty()) return "1";
  std::ostringstream os;
  for (std::size_t i = 0; i < powers_.size(); ++i) {
    if (i) os << "*";
    os << "t" << powers_[i].first;
    if (powers_[i].second > 1) os << "^" << powers_[i].second;
  }
  return os.str();
}

bool grlex_less(const Monomial& a, const Monomial& b) {
  if (a.degree() != b.degree()) return a.degree() < b.degree();
  const auto& pa = a.powers();
  const auto& pb = b.powers();
  std::size_t i = 0;
  while (i < pa.size() && i < pb.size()) {
    if (pa[i].first != pb[i].first) {
      // The monomial that touches the lower-numbered variable has the larger
      // exponent there, so it comes first.
      return pa[i].first < pb[i].first;
    }
    if (pa[i].second != pb[i].second) return pa[i].second > pb[i].second;
    ++i;
  }
  return false;
}

std::size_t MonomialHash::operator()(const Monomial& m) const noexcept {
  std::size_t h = 0x9e3779b97f4a7c15ULL;
  for (const auto& [v, e] : m.powers()) {
    h ^= (static_cast<std::size_t>(v) * 0x100000001b3ULL + e) + 0x9e3779b97f4a7c15ULL +
         (h << 6) + (h >> 2);
  }
  return h;
}

namespace {

void extend_basis(std::span<const VarId> vars, std::size_t start, int remaining,
                  std::vector<std::pair<VarId, std::uint32_t>>& current,
                  std::vector<Monomial>& out) {
  out.emplace_back(current);
  if (remaining == 0) return;
  for (std::size_t i = start; i < vars.size(); ++i) {
    if (!current.empty() && current.back().first == vars[i]) {
      ++current.back().second;
      extend_basis(vars, i, remaining - 1, current, out);
      --current.back().second;
    } else {
      current.emplace_back(vars[i], 1);
      extend_basis(vars, i, remaining - 1, current, out);
      current.pop_back();
    }
  }
}

}  // namespace

std::vector<Monomial> monomial_basis(std::span<const VarId> vars, int max_degree) {
  if (max_degree < 0) throw DegreeError("monomial_basis: negative degree");
  std::vector<VarId> sorted(vars.begin(), vars.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<Monomial> out;
  std::vector<std::pair<VarId, std::uint32_t>> current;
  extend_basis(sorted, 0, max_degree, current, out);
  std::sort(out.begin(), out.end(), grlex_less);
  return out;
}

Polynomial Polynomial::constant(double c) {
  Polynomial p;
  p.add_term(Monomial::one(), c);
  return p;
}

Polynomial Polynomial::variable(VarId v) {
  Polynomial p;
  p.add_term(Monomial::var(v), 1.0);
  return p;
}

Polynomial Polynomial::monomial(const Monomial& m, double coef) {
  Polynomial p;
  p.add_term(m, coef);
  return p;
}

std::vector<std::pair<Monomial, double>> Polynomial::sorted_terms() const {
  std::vector<std::pair<Monomial, double>> out(terms_.begin(), terms_.end());
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return grlex_less(a.first, b.first); });
  return out;
}

std::uint32_t Polynomial::degree() const {
  std::uint32_t d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
  return d;
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Monomial& m, double coef) {
  if (coef == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(m, coef);
  if (!inserted) {
    it->second += coef;
    if (it->second == 0.0) terms_.erase(it);
  }
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  for (const auto& [m, c] : o.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [m, c] : terms_) c *= s;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  Polynomial out;
  for (const auto& [ma, ca] : a.terms_) {
    for (const auto& [mb, cb] : b.terms_) out.add_term(ma * mb, ca * cb);
  }
  return out;
}

Polynomial Polynomial::pow(unsigned e) const {
  Polynomial out = constant(1.0);
  for (unsigned k = 0; k < e; ++k) out = out * *this;
  return out;
}

double Polynomial::evaluate(std::span<const double> point) const {
  double acc = 0.0;
  for (const auto& [m, c] : sorted_terms()) acc += c * m.evaluate(point);
  return acc;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [m, c] : sorted_terms()) {
    if (!first) os << " + ";
    first = false;
    os << c << "*" << m.to_string();
  }
  return os.str();
}

}  // namespace clr::sos
