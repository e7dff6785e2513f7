#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "clr/core_model.hpp"
#include "clr/preprocess.hpp"
#include "clr/sdp/sdp_problem.hpp"
#include "clr/sos/moments.hpp"
#include "clr/sos/polynomial.hpp"

namespace clr {

/// Indeterminates of the program: the free part of v (its last coordinate is
/// the constant -1), one selector w_j per term and one symmetric Pi_j per term.
class ProgramVariables {
 public:
  ProgramVariables(std::size_t d, std::size_t m);

  std::size_t d_ext() const { return d_ + 2; }
  std::size_t m() const { return m_; }
  std::size_t pi_entries() const { return d_ext() * (d_ext() + 1) / 2; }
  std::size_t count() const;

  sos::VarId v(std::size_t t) const;  // t in [0, d]
  sos::VarId w(std::size_t j) const;
  sos::VarId pi(std::size_t j, std::size_t r, std::size_t s) const;

  // v_t as a polynomial; t = d+1 gives the constant -1.
  sos::Polynomial v_poly(std::size_t t) const;
  sos::Polynomial pi_poly(std::size_t j, std::size_t r, std::size_t s) const;

  // {v_0..v_d, w_j, Pi_j entries}
  std::vector<sos::VarId> clique(std::size_t j) const;
  std::vector<sos::VarId> all() const;
  std::vector<sos::VarId> selectors() const;
  std::string name(sos::VarId id) const;

  // Variable values for a concrete point (v has d+1 free entries).
  std::vector<double> assignment(const Vector& v_free, const std::vector<double>& w,
                                 const std::vector<Matrix>& pis) const;

 private:
  std::size_t d_;
  std::size_t m_;
};

enum class NoiseScaling { literal, sum, mean };

struct BuildOptions {
  bool clique_sparsity = true;
  int loc_degree_cap = 1;    // localizing basis degree cap for the noise and moment rows
  int q_loc_degree_cap = 0;  // same, for the hypercontractivity and variance rows
  NoiseScaling noise_scaling = NoiseScaling::literal;
  bool noise_two_sided = true;
  // Residual second-moment row w_j (kappa sigma^2 |I_j| - sum eps_i^2) >= 0; 0 disables.
  double residual_kappa = 0.0;
  bool idempotency = true;
  int trace_rank = -1;  // adds tr(Pi_j) = r when >= 0
};

// Constraint ids 1..10 follow the program's numbering; the rest are side constraints.
enum ConstraintId : int {
  kCentering = 1,
  kRegression = 2,
  kBudget = 3,
  kBoolean = 4,
  kSubspace = 5,
  kNoise = 6,
  kHypercontractive = 7,
  kVariance = 8,
  kSecondMoment = 9,
  kFourthMoment = 10,
  kNormalization = 11,  // u_0 = 1
  kIdempotent = 12,
  kTrace = 13,
  kResidualVariance = 14,
};

std::string constraint_name(int id);

/// One polynomial constraint before compilation: g = 0 or g >= 0.
struct Generator {
  int constraint_id = 0;
  int term = -1;
  int q_index = -1;
  bool equality = true;
  sos::Polynomial poly;
  std::string label;
};

/// A compiled SDP row: either an equality g * multiplier = 0 or a
/// localizing block of g over `basis`.
struct CompiledRow {
  int generator = 0;
  bool equality = true;
  int index = 0;  // equality row index or block index in the SdpProblem
  sos::Monomial multiplier;
  std::vector<sos::Monomial> basis;
};

struct CompiledProgram {
  sdp::SdpProblem problem;
  ProgramVariables vars;
  std::shared_ptr<sos::MonomialIndex> moments;
  std::vector<std::vector<sos::Monomial>> moment_blocks;
  std::vector<int> moment_block_ids;  // block index of each moment block
  std::vector<Generator> generators;
  std::vector<CompiledRow> rows;
  std::vector<int> handled_elsewhere;  // ids with no rows (1: preprocessing, 2: eliminated)
  std::vector<Matrix> q_family;
  std::vector<std::size_t> term_sizes;
  std::size_t n_prime = 0;
  double mu_n = 0.0;  // budget right-hand side
  int ell = 4;
  ProblemParams params;
  BuildOptions options;

  int moment_var(const sos::Monomial& m) const;  // -1 when absent
  // Pseudo-expectation of a polynomial under the solved moment values.
  double expect(const sos::Polynomial& p, const std::vector<double>& u) const;
  // Fraction w(I_j) = |I_j| E[w_j] / (mu N').
  double term_weight(std::size_t j, const std::vector<double>& u) const;
  // Full moment vector of a point: every indexed monomial evaluated at x.
  std::vector<double> point_moments(const std::vector<double>& x) const;
  sos::PseudoDistribution pseudo_distribution(const std::vector<double>& u) const;
  std::size_t max_degree() const;
};

CompiledProgram build_program(const PreparedDataset& pd, const ProblemParams& params,
                              const std::vector<Matrix>& q_family, int ell,
                              const BuildOptions& opts = {});

std::vector<Matrix> default_q_family(std::size_t d, std::size_t count_random, std::uint64_t seed);

struct RowResidual {
  int row = 0;
  int generator = 0;
  double residual = 0.0;  // |g m| for equalities, max(0, -g) for inequalities
};

// Evaluates every compiled row's polynomial at a concrete point.
std::vector<RowResidual> substitute(const CompiledProgram& cp, const std::vector<double>& x);
double max_residual(const std::vector<RowResidual>& r);

struct ProgramSummary {
  std::size_t variables = 0;
  std::size_t moments = 0;
  std::size_t equalities = 0;
  std::size_t blocks = 0;
  std::size_t inequalities = 0;
  std::size_t largest_block = 0;
  std::vector<std::size_t> rows_per_constraint;  // indexed by constraint id
};
ProgramSummary summarize(const CompiledProgram& cp);

}  // namespace clr
