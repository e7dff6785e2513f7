#include "clr/sos/moments.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "clr/errors.hpp"

namespace clr::sos {

MonomialIndex::MonomialIndex(std::vector<Monomial> monomials) {
  for (auto& m : monomials) insert(m);
}

int MonomialIndex::insert(const Monomial& m) {
  auto [it, inserted] = lookup_.try_emplace(m, static_cast<int>(monomials_.size()));
  if (inserted) monomials_.push_back(m);
  return it->second;
}

int MonomialIndex::find(const Monomial& m) const {
  auto it = lookup_.find(m);
  return it == lookup_.end() ? -1 : it->second;
}

MomentVector::MomentVector(std::shared_ptr<const MonomialIndex> index,
                           std::vector<double> values, int ell, std::vector<VarId> vars)
    : index_(std::move(index)), values_(std::move(values)), ell_(ell), vars_(std::move(vars)) {
  if (values_.size() != index_->size()) {
    throw InputError("moment vector size does not match its monomial index");
  }
  std::sort(vars_.begin(), vars_.end());
  vars_.erase(std::unique(vars_.begin(), vars_.end()), vars_.end());
}

MomentVector MomentVector::from_points(std::span<const VarId> vars, int ell,
                                       const std::vector<std::vector<double>>& points,
                                       const std::vector<double>& weights) {
  if (points.empty()) throw InputError("from_points needs at least one point");
  if (!weights.empty() && weights.size() != points.size()) {
    throw InputError("weights and points differ in length");
  }
  auto basis = monomial_basis(vars, ell);
  auto index = std::make_shared<MonomialIndex>(basis);
  VarId max_var = 0;
  for (auto v : vars) max_var = std::max(max_var, v);
  std::vector<double> values(basis.size(), 0.0);
  std::vector<double> full(static_cast<std::size_t>(max_var) + 1, 0.0);
  const double uniform = 1.0 / static_cast<double>(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) {
    if (points[p].size() != vars.size()) throw InputError("point has wrong dimension");
    for (std::size_t k = 0; k < vars.size(); ++k) full[vars[k]] = points[p][k];
    const double w = weights.empty() ? uniform : weights[p];
    for (std::size_t i = 0; i < basis.size(); ++i) values[i] += w * basis[i].evaluate(full);
  }
  return MomentVector(std::move(index), std::move(values), ell,
                      std::vector<VarId>(vars.begin(), vars.end()));
}

MomentVector MomentVector::point_mass(std::span<const VarId> vars, int ell,
                                      const std::vector<double>& point) {
  return from_points(vars, ell, {point});
}

MomentVector MomentVector::from_map(std::span<const VarId> vars, int ell,
                                    const std::vector<std::pair<Monomial, double>>& entries) {
  auto index = std::make_shared<MonomialIndex>();
  std::vector<double> values;
  for (const auto& [m, val] : entries) {
    const auto before = index->size();
    const int i = index->insert(m);
    if (index->size() == before) {
      values[static_cast<std::size_t>(i)] = val;
    } else {
      values.push_back(val);
    }
  }
  return MomentVector(std::move(index), std::move(values), ell,
                      std::vector<VarId>(vars.begin(), vars.end()));
}

double MomentVector::at(const Monomial& m) const {
  const int i = index_->find(m);
  if (i < 0) throw InputError("moment vector misses monomial " + m.to_string());
  return values_[static_cast<std::size_t>(i)];
}

void MomentVector::set(const Monomial& m, double value) {
  const int i = index_->find(m);
  if (i < 0) throw InputError("moment vector misses monomial " + m.to_string());
  values_[static_cast<std::size_t>(i)] = value;
}

double min_eigenvalue(const Eigen::MatrixXd& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

PseudoDistribution PseudoDistribution::unchecked(MomentVector u) {
  auto basis = monomial_basis(u.vars(), u.ell() / 2);
  return with_blocks(std::move(u), {std::move(basis)});
}

PseudoDistribution PseudoDistribution::with_blocks(MomentVector u,
                                                   std::vector<std::vector<Monomial>> blocks) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& b : blocks) lo = std::min(lo, sos::min_eigenvalue(moment_matrix(u, b)));
  if (blocks.empty()) lo = 0.0;
  return PseudoDistribution{std::move(u), std::move(blocks), lo};
}

PseudoDistribution PseudoDistribution::validated(MomentVector u, double tol) {
  if (std::abs(u.at(Monomial::one()) - 1.0) > tol) {
    throw InputError("pseudo-distribution requires u_0 = 1");
  }
  auto pd = unchecked(std::move(u));
  if (pd.min_eigenvalue < -tol) {
    throw InputError("moment matrix is not PSD (min eigenvalue " +
                     std::to_string(pd.min_eigenvalue) + ")");
  }
  return pd;
}

Eigen::MatrixXd moment_matrix(const MomentVector& u, int ell) {
  return moment_matrix(u, monomial_basis(u.vars(), ell / 2));
}

Eigen::MatrixXd moment_matrix(const MomentVector& u, std::span<const Monomial> basis) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) {
      const double v = u.at(basis[static_cast<std::size_t>(a)] * basis[static_cast<std::size_t>(b)]);
      M(a, b) = v;
      M(b, a) = v;
    }
  }
  return M;
}

Eigen::MatrixXd localizing_matrix(const Polynomial& p, const MomentVector& u, int ell) {
  const int t = static_cast<int>(p.degree());
  const int bdeg = ell / 2 - t;
  if (bdeg < 0) {
    throw DegreeError("localizing matrix: ell/2 - deg(p) = " + std::to_string(bdeg) + " < 0");
  }
  return localizing_matrix(p, u, monomial_basis(u.vars(), bdeg));
}

Eigen::MatrixXd localizing_matrix(const Polynomial& p, const MomentVector& u,
                                  std::span<const Monomial> basis) {
  const auto n = static_cast<Eigen::Index>(basis.size());
  const auto terms = p.sorted_terms();
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) {
      const auto ab = basis[static_cast<std::size_t>(a)] * basis[static_cast<std::size_t>(b)];
      double v = 0.0;
      for (const auto& [gamma, coef] : terms) v += coef * u.at(ab * gamma);
      M(a, b) = v;
      M(b, a) = v;
    }
  }
  return M;
}

double pseudo_expectation(const Polynomial& f, const MomentVector& u) {
  if (static_cast<int>(f.degree()) > u.ell()) {
    throw DegreeError("pseudo_expectation: degree " + std::to_string(f.degree()) +
                      " exceeds ell = " + std::to_string(u.ell()));
  }
  double acc = 0.0;
  for (const auto& [m, c] : f.sorted_terms()) acc += c * u.at(m);
  return acc;
}

double pseudo_expectation(const Polynomial& f, const PseudoDistribution& pd) {
  return pseudo_expectation(f, pd.moments);
}

namespace {

Polynomial random_polynomial(std::span<const Monomial> support, std::mt19937_64& rng) {
  std::normal_distribution<double> coef(0.0, 1.0);
  std::bernoulli_distribution keep(0.7);
  Polynomial p;
  for (const auto& m : support) {
    if (keep(rng)) p.add_term(m, coef(rng));
  }
  if (p.is_zero()) p.add_term(support[rng() % support.size()], 1.0);
  return p;
}

std::vector<VarId> block_variables(const std::vector<Monomial>& basis) {
  std::vector<VarId> vars;
  for (const auto& m : basis) {
    for (const auto& [v, e] : m.powers()) vars.push_back(v);
  }
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  return vars;
}

}  // namespace

PseudoInequalityReport check_pseudo_inequalities(const PseudoDistribution& pd, int trials,
                                                 std::uint64_t rng_seed, double tol) {
  PseudoInequalityReport report;
  report.trials = trials;
  report.min_eigenvalue = pd.min_eigenvalue;
  const int ell = pd.ell();
  if (ell < 2 || pd.blocks.empty()) return report;
  report.almost_triangle_power = ell / 2;

  std::mt19937_64 rng(rng_seed);
  auto check = [&](const char* kind, int trial, double lhs, double rhs) {
    ++report.checks;
    const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
    if (lhs - rhs > tol * scale) report.violations.push_back({kind, trial, lhs, rhs});
  };

  for (int trial = 0; trial < trials; ++trial) {
    const auto& basis = pd.blocks[static_cast<std::size_t>(trial) % pd.blocks.size()];
    const auto vars = block_variables(basis);
    const auto& u = pd.moments;

    // Degree <= ell/2 polynomials drawn from the block's own basis.
    const auto f = random_polynomial(basis, rng);
    const auto g = random_polynomial(basis, rng);
    const double efg = pseudo_expectation(f * g, u);
    check("cauchy_schwarz", trial, efg * efg,
          pseudo_expectation(f * f, u) * pseudo_expectation(g * g, u));

    const auto half = (f + g) * 0.5;
    check("am_gm", trial, efg, pseudo_expectation(half * half, u));

    // Affine a, b so that (a+b)^{2t} stays within degree ell.
    const auto linear = monomial_basis(vars, 1);
    const auto a = random_polynomial(linear, rng);
    const auto b = random_polynomial(linear, rng);
    const unsigned two_t = static_cast<unsigned>(report.almost_triangle_power) * 2;
    const double lhs = pseudo_expectation((a + b).pow(two_t), u);
    const double rhs = std::pow(2.0, two_t) *
                       (pseudo_expectation(a.pow(two_t), u) + pseudo_expectation(b.pow(two_t), u));
    check("almost_triangle", trial, lhs, rhs);
  }
  return report;
}

}  // namespace clr::sos
