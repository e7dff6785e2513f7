#pragma once

#include <cstddef>
#include <vector>

#include "clr/core_model.hpp"

namespace clr {

enum class Centering { mean_zero, empirical_recenter };

/// Dataset after term assignment and point duplication.
///
/// Every duplicated sample belongs to exactly one term, so the terms are
/// pairwise disjoint over `samples`. Originals that satisfy no term are
/// listed in `unassigned` and never enter `samples`.
struct PreparedDataset {
  std::vector<Sample> raw;               // original samples
  std::vector<ExtendedSample> samples;   // one per (original, term) membership
  std::vector<std::size_t> provenance;   // duplicated index -> original index
  std::vector<std::size_t> term_of;      // duplicated index -> term index
  std::vector<Term> terms;
  std::vector<std::size_t> unassigned;
  Centering centering = Centering::mean_zero;
  Vector center;  // subtracted from [y, z] under empirical_recenter (zeros otherwise)

  std::size_t n_prime() const { return samples.size(); }
  std::size_t n_original() const { return raw.size(); }
  std::size_t m() const { return terms.size(); }
  std::size_t d() const;
};

// All width-k conjunctions in lexicographic order (attribute subsets, then
// polarity assignments counted in binary).
std::vector<Term> enumerate_terms(std::size_t n, std::size_t k);

PreparedDataset assign_and_duplicate(const std::vector<Sample>& samples,
                                     const std::vector<Term>& terms);

PreparedDataset prune_small_terms(const PreparedDataset& pd, std::size_t min_size);

PreparedDataset extend_and_center(const PreparedDataset& pd, Centering mode);

}  // namespace clr
