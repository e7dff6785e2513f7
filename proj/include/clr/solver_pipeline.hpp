#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clr/core_model.hpp"
#include "clr/preprocess.hpp"
#include "clr/program_builder.hpp"
#include "clr/sdp/sdp_problem.hpp"

namespace clr {

enum class RelaxationObjective {
  l2_weights,    // sum_i E[sel_i]^2
  total_weight,  // sum_i E[sel_i]
};

struct RelaxationOptions {
  sdp::SolveOptions solver;
  RelaxationObjective objective = RelaxationObjective::l2_weights;
  double certify_tol = 1e-4;
};

struct RelaxationResult {
  std::vector<double> u;  // moment values indexed like cp.moments
  sdp::SdpSolution solution;
  sdp::Certificate certificate;
  std::vector<double> selector_expectations;  // E[w_j] per term
  double objective = 0.0;
};

// Throws SolverError when the solver reports infeasibility.
RelaxationResult solve_relaxation(const CompiledProgram& cp, const RelaxationOptions& opts = {});

// E[sel_i] for every prepared sample; sel_i = w_j for the term owning i.
std::vector<double> selection_expectations(const CompiledProgram& cp, const PreparedDataset& pd,
                                           const std::vector<double>& u);

enum class CandidateMode {
  term_local,        // E[w_j Pi_j] / E[w_j]
  weighted_average,  // E[w_j sum_j' w(I_j') Pi_j'] / E[w_j]; needs cross-term moments
};

struct ProjectionCandidate {
  Matrix pi_hat;
  std::size_t source = 0;  // prepared sample index
  std::size_t term = 0;
  double probability = 0.0;
  bool post_processed = false;
  std::size_t rank = 0;
  double spectral_gap = 0.0;
};

struct CandidateSet {
  std::vector<ProjectionCandidate> candidates;  // one per sample with a usable denominator
  std::vector<std::size_t> omitted;             // samples below the threshold
};

CandidateSet extract_candidates(const CompiledProgram& cp, const PreparedDataset& pd,
                                const std::vector<double>& u,
                                CandidateMode mode = CandidateMode::term_local,
                                double threshold_factor = 1e-6);

// Draw probabilities E[sel_i] / (mu N'), after the consistency check.
std::vector<double> selection_probabilities(const CompiledProgram& cp, const PreparedDataset& pd,
                                            const std::vector<double>& u, double tol = 1e-3);

std::vector<std::size_t> sample_multiset(const std::vector<double>& probabilities,
                                         std::size_t count, std::uint64_t seed);
std::vector<std::size_t> sample_multiset(const CompiledProgram& cp, const PreparedDataset& pd,
                                         const std::vector<double>& u, std::size_t count,
                                         std::uint64_t seed, double tol = 1e-3);

std::size_t default_multiset_size(double mu, double c = 4.0);

ProjectionCandidate project_to_projector(const Matrix& m, std::optional<std::size_t> rank_hint = {});

struct RegressionModel {
  Vector v_hat;  // intercept followed by slopes
  std::size_t source = 0;  // index into the candidate list
  KDnf condition;
};

RegressionModel recover_predictor(const ProjectionCandidate& c, double threshold = 0.5);

struct RoundingResult {
  std::vector<std::size_t> multiset;
  std::vector<ProjectionCandidate> list;  // post-processed, one per draw
  std::vector<RegressionModel> models;    // models[k].source indexes list
  std::vector<std::string> failures;      // recovery errors per draw, empty on success
};

// Draws the multiset, post-processes each drawn candidate and recovers predictors.
RoundingResult round_candidates(const CompiledProgram& cp, const PreparedDataset& pd,
                                const std::vector<double>& u, std::size_t count, std::uint64_t seed,
                                std::optional<std::size_t> rank_hint,
                                CandidateMode mode = CandidateMode::term_local);

}  // namespace clr
