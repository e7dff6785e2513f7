#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace clr::sdp {

using SparseTerms = std::vector<std::pair<int, double>>;  // (variable index, coefficient)

/// One affine contribution to a block: X(row, col) += coef * u[var], or
/// += coef when var < 0. Only row <= col is stored; the block is symmetric.
struct BlockEntry {
  int row = 0;
  int col = 0;
  int var = -1;
  double coef = 0.0;
};

/// A PSD constraint X(u) >= 0 with X affine in the decision vector.
struct PsdBlock {
  std::string name;
  int dim = 1;
  std::vector<BlockEntry> entries;
};

/// terms . u == rhs (equality) or terms . u <= rhs (inequality).
struct LinearRow {
  SparseTerms terms;
  double rhs = 0.0;
  std::string tag;
};

/// minimize  linear . u + sum_i q_i u_{idx_i}^2  with every q_i >= 0.
struct Objective {
  SparseTerms linear;
  SparseTerms quadratic;
};

struct SdpProblem {
  int num_vars = 0;
  std::vector<PsdBlock> blocks;
  std::vector<LinearRow> equalities;
  std::vector<LinearRow> inequalities;
  Objective objective;

  // Throws InputError on out-of-range indices, non-finite data, bad dims or q_i < 0.
  void validate() const;

  int add_block(PsdBlock b);
  void add_equality(SparseTerms terms, double rhs, std::string tag = {});
  void add_inequality(SparseTerms terms, double rhs, std::string tag = {});
};

enum class Status { optimal, feasible, infeasible, max_iters };
std::string to_string(Status s);

struct SolveOptions {
  double tol = 1e-6;
  int max_iters = 20000;
  double rho = 0.1;
  std::uint64_t seed = 0;
  double sigma = 1e-6;
  double alpha = 1.6;           // over-relaxation
  double eq_rho_scale = 1e3;    // equality rows use rho * eq_rho_scale
  bool adaptive_rho = true;
  int adaptive_rho_interval = 50;
  double adaptive_rho_tolerance = 5.0;
  int scaling_iters = 10;
  int check_interval = 10;
  // Infeasibility: best primal residual over the last window improved by
  // less than stall_improvement (relative) while above stall_threshold.
  int stall_window = 500;
  double stall_improvement = 0.01;
  double stall_threshold = 1e-2;
  // Random initial point scale; 0 starts from the origin (seed then unused).
  double init_scale = 0.0;
  std::vector<double> initial_point;
  bool verbose = false;
};

struct SdpSolution {
  std::vector<double> u;
  Status status = Status::max_iters;
  double primal_residual = 0.0;  // max equality violation (inequalities live in blocks)
  double dual_residual = 0.0;
  double min_block_eigenvalue = 0.0;
  double objective = 0.0;
  int iterations = 0;
  int refactorizations = 0;
};

SdpSolution solve(const SdpProblem& p, const SolveOptions& opts = {});

struct Certificate {
  double max_equality_residual = 0.0;
  double max_inequality_violation = 0.0;
  double min_block_eigenvalue = 0.0;
  std::string worst_block;
  bool ok = false;
};

// Recomputes all residuals and eigenvalues from u alone.
Certificate certify_point(const std::vector<double>& u, const SdpProblem& p, double tol);
bool certify(const SdpSolution& sol, const SdpProblem& p, double tol);

double evaluate_objective(const SdpProblem& p, const std::vector<double>& u);

// Plain-text dump, one record per line:
//   vars N
//   block NAME DIM
//   entry ROW COL VAR COEF        (VAR = -1 for a constant)
//   eq RHS TAG k v1 c1 ... vk ck
//   ineq RHS TAG k v1 c1 ... vk ck
//   obj_lin VAR COEF
//   obj_quad VAR COEF
// Entries belong to the most recent block line. TAG is "-" when empty.
void dump(const SdpProblem& p, std::ostream& os);
SdpProblem load_dump(std::istream& is);

}  // namespace clr::sdp
