#pragma once

#include <string>
#include <vector>

#include "clr/core_model.hpp"
#include "clr/preprocess.hpp"
#include "clr/solver_pipeline.hpp"

namespace clr {

struct LossTable {
  std::vector<double> sample_loss;  // (z - <v, [1, y]>)^2 per prepared sample
  std::vector<double> term_sum;
  std::vector<double> term_mean;    // NaN for empty terms
};

LossTable compute_losses(const RegressionModel& model, const PreparedDataset& pd);

// Greedy weighted cover over the prepared terms. Throws CoverError when the
// eligible terms run out before the coverage target.
KDnf greedy_cover(const LossTable& losses, const PreparedDataset& pd, const ProblemParams& params);

// Prepared-term indices of the literals in c; throws InputError for a term
// that is not part of the family.
std::vector<std::size_t> match_terms(const KDnf& c, const PreparedDataset& pd);

struct PairScore {
  double coverage = 0.0;  // covered prepared points / N'
  std::size_t covered = 0;
  double conditional_mean_loss = 0.0;
  double total_loss = 0.0;
  bool defined = false;   // false for an empty cover
};

PairScore score_pair(const RegressionModel& model, const KDnf& c, const PreparedDataset& pd);

struct PairResult {
  RegressionModel model;
  KDnf condition;
  PairScore score;
  std::size_t index = 0;  // position in the model list
  std::vector<std::string> failures;  // per model, empty on success
};

PairResult best_pair(const std::vector<RegressionModel>& models, const PreparedDataset& pd,
                     const ProblemParams& params);

}  // namespace clr
