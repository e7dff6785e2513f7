#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "clr/sos/polynomial.hpp"

namespace clr::sos {

/// Bijection between monomials and dense indices.
class MonomialIndex {
 public:
  MonomialIndex() = default;
  explicit MonomialIndex(std::vector<Monomial> monomials);

  // Returns the index of m, inserting it when absent.
  int insert(const Monomial& m);
  int find(const Monomial& m) const;  // -1 when absent
  bool contains(const Monomial& m) const { return find(m) >= 0; }
  const Monomial& at(int i) const { return monomials_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return monomials_.size(); }
  const std::vector<Monomial>& monomials() const { return monomials_; }

 private:
  std::vector<Monomial> monomials_;
  std::unordered_map<Monomial, int, MonomialHash> lookup_;
};

/// Truncated moment sequence u_alpha for monomials of degree <= ell.
class MomentVector {
 public:
  MomentVector(std::shared_ptr<const MonomialIndex> index, std::vector<double> values,
               int ell, std::vector<VarId> vars);

  // Full moment sequence of a finitely supported distribution (weights sum to 1).
  static MomentVector from_points(std::span<const VarId> vars, int ell,
                                  const std::vector<std::vector<double>>& points,
                                  const std::vector<double>& weights = {});
  static MomentVector point_mass(std::span<const VarId> vars, int ell,
                                 const std::vector<double>& point);
  static MomentVector from_map(std::span<const VarId> vars, int ell,
                               const std::vector<std::pair<Monomial, double>>& entries);

  int ell() const { return ell_; }
  const std::vector<VarId>& vars() const { return vars_; }
  const MonomialIndex& index() const { return *index_; }
  std::shared_ptr<const MonomialIndex> shared_index() const { return index_; }
  const std::vector<double>& values() const { return values_; }

  bool contains(const Monomial& m) const { return index_->contains(m); }
  // Throws InputError naming the monomial when it is not stored.
  double at(const Monomial& m) const;
  void set(const Monomial& m, double value);

 private:
  std::shared_ptr<const MonomialIndex> index_;
  std::vector<double> values_;
  int ell_;
  std::vector<VarId> vars_;
};

/// Moment information plus the monomial bases whose moment matrices define it.
struct PseudoDistribution {
  MomentVector moments;
  std::vector<std::vector<Monomial>> blocks;
  double min_eigenvalue = 0.0;

  // One full moment-matrix block over all variables; does not validate.
  static PseudoDistribution unchecked(MomentVector u);
  static PseudoDistribution with_blocks(MomentVector u,
                                        std::vector<std::vector<Monomial>> blocks);
  // Throws InputError if any moment-matrix block has eigenvalue below -tol.
  static PseudoDistribution validated(MomentVector u, double tol = 1e-8);

  int ell() const { return moments.ell(); }
  bool is_psd(double tol = 1e-8) const { return min_eigenvalue >= -tol; }
};

Eigen::MatrixXd moment_matrix(const MomentVector& u, int ell);
Eigen::MatrixXd moment_matrix(const MomentVector& u, std::span<const Monomial> basis);

// Basis truncated to total degree <= ell/2 - deg(p); DegreeError when negative.
Eigen::MatrixXd localizing_matrix(const Polynomial& p, const MomentVector& u, int ell);
Eigen::MatrixXd localizing_matrix(const Polynomial& p, const MomentVector& u,
                                  std::span<const Monomial> basis);

double pseudo_expectation(const Polynomial& f, const PseudoDistribution& pd);
double pseudo_expectation(const Polynomial& f, const MomentVector& u);

double min_eigenvalue(const Eigen::MatrixXd& symmetric);

struct InequalityViolation {
  std::string kind;  // "cauchy_schwarz", "almost_triangle", "am_gm"
  int trial = 0;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct PseudoInequalityReport {
  int trials = 0;
  int checks = 0;
  int almost_triangle_power = 0;  // the t used in (a+b)^{2t}
  double min_eigenvalue = 0.0;
  std::vector<InequalityViolation> violations;

  bool passed() const { return violations.empty(); }
};

/// Random-trial checks of inequalities every true distribution satisfies:
///   Cauchy-Schwarz  E[fg]^2 <= E[f^2] E[g^2]
///   almost triangle E[(a+b)^{2t}] <= 2^{2t} (E[a^{2t}] + E[b^{2t}])
///   AM-GM (m=2)     E[ab] <= E[((a+b)/2)^2]
/// A check fails when lhs - rhs > tol * max(1, |lhs|, |rhs|).
PseudoInequalityReport check_pseudo_inequalities(const PseudoDistribution& pd, int trials,
                                                 std::uint64_t rng_seed, double tol = 1e-8);

}  // namespace clr::sos
