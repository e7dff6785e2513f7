#include "clr/preprocess.hpp"

#include <algorithm>
#include <set>

#include "clr/errors.hpp"

namespace clr {

std::size_t PreparedDataset::d() const {
  if (!raw.empty()) return static_cast<std::size_t>(raw.front().y.size());
  if (!samples.empty()) return samples.front().d();
  return 0;
}

std::vector<Term> enumerate_terms(std::size_t n, std::size_t k) {
  if (k < 1 || k > n) throw InputError("enumerate_terms requires 1 <= k <= n");
  std::vector<Term> out;
  std::vector<std::size_t> subset(k);
  for (std::size_t i = 0; i < k; ++i) subset[i] = i;
  while (true) {
    for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
      std::vector<Literal> lits;
      lits.reserve(k);
      for (std::size_t i = 0; i < k; ++i) {
        // Most significant bit belongs to the first attribute of the subset.
        const auto bit = (mask >> (k - 1 - i)) & 1U;
        lits.push_back({subset[i], static_cast<std::uint8_t>(bit)});
      }
      out.emplace_back(std::move(lits));
    }
    // Next k-subset in lexicographic order.
    std::size_t i = k;
    while (i > 0 && subset[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) break;
    ++subset[i - 1];
    for (std::size_t j = i; j < k; ++j) subset[j] = subset[j - 1] + 1;
  }
  return out;
}

namespace {

// Rebuilds `samples` from raw data for the current provenance and centering.
void rebuild_extended(PreparedDataset& pd) {
  const auto d = pd.d();
  pd.center = Vector::Zero(static_cast<Eigen::Index>(d + 1));
  if (pd.centering == Centering::empirical_recenter) {
    std::set<std::size_t> members(pd.provenance.begin(), pd.provenance.end());
    if (!members.empty()) {
      for (auto i : members) {
        pd.center.head(d) += pd.raw[i].y;
        pd.center[static_cast<Eigen::Index>(d)] += pd.raw[i].z;
      }
      pd.center /= static_cast<double>(members.size());
    }
  }
  pd.samples.clear();
  pd.samples.reserve(pd.provenance.size());
  for (auto orig : pd.provenance) {
    auto e = ExtendedSample::from(pd.raw[orig]);
    e.y_ext.tail(d + 1) -= pd.center;
    e.y_ext[0] = 1.0;
    pd.samples.push_back(std::move(e));
  }
}

}  // namespace

PreparedDataset assign_and_duplicate(const std::vector<Sample>& samples,
                                     const std::vector<Term>& terms) {
  PreparedDataset pd;
  pd.raw = samples;
  pd.terms.reserve(terms.size());
  std::vector<bool> covered(samples.size(), false);
  for (std::size_t j = 0; j < terms.size(); ++j) {
    Term t(terms[j].literals);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (evaluate_term(t, samples[i].x)) {
        t.member_ids.push_back(pd.provenance.size());
        pd.provenance.push_back(i);
        pd.term_of.push_back(j);
        covered[i] = true;
      }
    }
    pd.terms.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!covered[i]) pd.unassigned.push_back(i);
  }
  rebuild_extended(pd);
  return pd;
}

PreparedDataset prune_small_terms(const PreparedDataset& pd, std::size_t min_size) {
  PreparedDataset out;
  out.raw = pd.raw;
  out.centering = pd.centering;
  std::vector<bool> covered(pd.raw.size(), false);
  for (const auto& t : pd.terms) {
    if (t.weight() < min_size) continue;
    Term kept(t.literals);
    const auto j = out.terms.size();
    for (auto dup : t.member_ids) {
      const auto orig = pd.provenance[dup];
      kept.member_ids.push_back(out.provenance.size());
      out.provenance.push_back(orig);
      out.term_of.push_back(j);
      covered[orig] = true;
    }
    out.terms.push_back(std::move(kept));
  }
  for (std::size_t i = 0; i < out.raw.size(); ++i) {
    if (!covered[i]) out.unassigned.push_back(i);
  }
  rebuild_extended(out);
  return out;
}

PreparedDataset extend_and_center(const PreparedDataset& pd, Centering mode) {
  PreparedDataset out = pd;
  out.centering = mode;
  rebuild_extended(out);
  return out;
}

}  // namespace clr
