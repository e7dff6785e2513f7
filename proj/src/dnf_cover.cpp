#include "clr/dnf_cover.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "clr/errors.hpp"

namespace clr {

LossTable compute_losses(const RegressionModel& model, const PreparedDataset& pd) {
  const auto d = pd.d();
  if (static_cast<std::size_t>(model.v_hat.size()) != d + 1) {
    throw InputError("model has " + std::to_string(model.v_hat.size()) + " coefficients, expected " +
                     std::to_string(d + 1));
  }
  LossTable t;
  t.sample_loss.resize(pd.n_prime());
  t.term_sum.assign(pd.m(), 0.0);
  for (std::size_t i = 0; i < pd.n_prime(); ++i) {
    const auto& y = pd.samples[i].y_ext;
    const double r = y[static_cast<Eigen::Index>(d + 1)] - model.v_hat.dot(y.head(static_cast<Eigen::Index>(d + 1)));
    t.sample_loss[i] = r * r;
    t.term_sum[pd.term_of[i]] += r * r;
  }
  t.term_mean.resize(pd.m());
  for (std::size_t j = 0; j < pd.m(); ++j) {
    const auto size = pd.terms[j].member_ids.size();
    t.term_mean[j] = size == 0 ? std::numeric_limits<double>::quiet_NaN()
                               : t.term_sum[j] / static_cast<double>(size);
  }
  return t;
}

KDnf greedy_cover(const LossTable& losses, const PreparedDataset& pd, const ProblemParams& params) {
  if (losses.term_sum.size() != pd.m()) throw InputError("loss table does not match the dataset");
  const double n_prime = static_cast<double>(pd.n_prime());
  const double target = (1.0 - params.gamma / 2.0) * params.mu * n_prime;
  const double cap = (1.0 + params.gamma) * params.mu * params.epsilon_target * n_prime;

  std::vector<std::size_t> eligible;
  for (std::size_t j = 0; j < pd.m(); ++j) {
    if (losses.term_sum[j] <= cap && !pd.terms[j].member_ids.empty()) eligible.push_back(j);
  }
  // Terms are disjoint after duplication, so the gain of a term never changes.
  std::sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) {
    const auto wa = pd.terms[a].member_ids.size();
    const auto wb = pd.terms[b].member_ids.size();
    if (wa != wb) return wa > wb;
    if (losses.term_sum[a] != losses.term_sum[b]) return losses.term_sum[a] < losses.term_sum[b];
    return a < b;
  });

  KDnf out;
  double covered = 0.0;
  double loss = 0.0;
  for (const auto j : eligible) {
    if (covered >= target) break;
    out.terms.push_back(pd.terms[j]);
    covered += static_cast<double>(pd.terms[j].member_ids.size());
    loss += losses.term_sum[j];
  }
  if (covered < target) {
    std::ostringstream os;
    os << "cover failed: eligible terms reach " << covered << " of " << target
       << " required points (loss cap per term " << cap << ")";
    throw CoverError(os.str(), covered / n_prime, loss);
  }
  return out;
}

std::vector<std::size_t> match_terms(const KDnf& c, const PreparedDataset& pd) {
  std::vector<std::size_t> out;
  for (const auto& t : c.terms) {
    bool found = false;
    for (std::size_t j = 0; j < pd.m() && !found; ++j) {
      if (pd.terms[j].literals == t.literals) {
        out.push_back(j);
        found = true;
      }
    }
    if (!found) throw InputError("term " + t.to_string() + " is not in the prepared family");
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

PairScore score_pair(const RegressionModel& model, const KDnf& c, const PreparedDataset& pd) {
  PairScore s;
  const auto ids = match_terms(c, pd);
  std::vector<std::uint8_t> chosen(pd.m(), 0);
  for (auto j : ids) chosen[j] = 1;
  const auto d = static_cast<Eigen::Index>(pd.d());
  for (std::size_t i = 0; i < pd.n_prime(); ++i) {
    if (!chosen[pd.term_of[i]]) continue;
    const auto& y = pd.samples[i].y_ext;
    const double r = y[d + 1] - model.v_hat.dot(y.head(d + 1));
    s.total_loss += r * r;
    ++s.covered;
  }
  s.coverage = pd.n_prime() == 0 ? 0.0 : static_cast<double>(s.covered) / static_cast<double>(pd.n_prime());
  s.defined = s.covered > 0;
  s.conditional_mean_loss = s.defined ? s.total_loss / static_cast<double>(s.covered)
                                      : std::numeric_limits<double>::quiet_NaN();
  return s;
}

PairResult best_pair(const std::vector<RegressionModel>& models, const PreparedDataset& pd,
                     const ProblemParams& params) {
  if (models.empty()) throw InputError("best_pair needs at least one model");
  PairResult best;
  bool have = false;
  std::vector<std::string> failures;
  double best_cov = 0.0;
  double best_loss = 0.0;
  for (std::size_t k = 0; k < models.size(); ++k) {
    try {
      const auto c = greedy_cover(compute_losses(models[k], pd), pd, params);
      const auto sc = score_pair(models[k], c, pd);
      failures.emplace_back();
      const bool better = !have || sc.conditional_mean_loss < best.score.conditional_mean_loss ||
                          (sc.conditional_mean_loss == best.score.conditional_mean_loss &&
                           sc.coverage > best.score.coverage);
      if (better) {
        best.model = models[k];
        best.model.condition = c;
        best.condition = c;
        best.score = sc;
        best.index = k;
        have = true;
      }
    } catch (const CoverError& e) {
      failures.emplace_back(e.what());
      if (e.achieved_coverage() > best_cov) {
        best_cov = e.achieved_coverage();
        best_loss = e.achieved_loss();
      }
    }
  }
  if (!have) {
    std::ostringstream os;
    os << "cover failed for all " << models.size() << " models; first: " << failures.front();
    throw CoverError(os.str(), best_cov, best_loss);
  }
  best.failures = std::move(failures);
  return best;
}

}  // namespace clr
