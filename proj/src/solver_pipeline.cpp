#include "clr/solver_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "clr/errors.hpp"

namespace clr {

using sos::Monomial;
using sos::Polynomial;

namespace {

int selector_moment(const CompiledProgram& cp, std::size_t j) {
  return cp.moment_var(Monomial::var(cp.vars.w(j)));
}

void check_prepared(const CompiledProgram& cp, const PreparedDataset& pd) {
  if (pd.m() != cp.vars.m() || pd.n_prime() != cp.n_prime) {
    throw InputError("prepared dataset does not match the compiled program");
  }
}

}  // namespace

RelaxationResult solve_relaxation(const CompiledProgram& cp, const RelaxationOptions& opts) {
  sdp::SdpProblem p = cp.problem;
  p.objective = {};
  for (std::size_t j = 0; j < cp.vars.m(); ++j) {
    const double size = static_cast<double>(cp.term_sizes[j]);
    if (opts.objective == RelaxationObjective::l2_weights) {
      // |I_j| copies of E[w_j]^2, scaled by 1 / (mu N').
      p.objective.quadratic.emplace_back(selector_moment(cp, j), size / cp.mu_n);
    } else {
      p.objective.linear.emplace_back(selector_moment(cp, j), size / cp.mu_n);
    }
  }
  RelaxationResult res;
  res.solution = sdp::solve(p, opts.solver);
  if (res.solution.status == sdp::Status::infeasible) {
    std::ostringstream os;
    os << "relaxation infeasible: primal residual stalled at " << res.solution.primal_residual
       << " after " << res.solution.iterations << " iterations (min block eigenvalue "
       << res.solution.min_block_eigenvalue << ")";
    throw SolverError(os.str());
  }
  res.u = res.solution.u;
  res.certificate = sdp::certify_point(res.u, p, opts.certify_tol);
  res.objective = res.solution.objective;
  for (std::size_t j = 0; j < cp.vars.m(); ++j) {
    res.selector_expectations.push_back(res.u[static_cast<std::size_t>(selector_moment(cp, j))]);
  }
  return res;
}

std::vector<double> selection_expectations(const CompiledProgram& cp, const PreparedDataset& pd,
                                           const std::vector<double>& u) {
  check_prepared(cp, pd);
  std::vector<double> out(pd.n_prime());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = u.at(static_cast<std::size_t>(selector_moment(cp, pd.term_of[i])));
  }
  return out;
}

CandidateSet extract_candidates(const CompiledProgram& cp, const PreparedDataset& pd,
                                const std::vector<double>& u, CandidateMode mode,
                                double threshold_factor) {
  check_prepared(cp, pd);
  const std::size_t n = cp.vars.d_ext();
  const double threshold = threshold_factor * cp.params.mu;
  const auto sel = selection_expectations(cp, pd, u);

  std::vector<std::optional<Matrix>> per_term(cp.vars.m());
  for (std::size_t j = 0; j < cp.vars.m(); ++j) {
    const double den = u[static_cast<std::size_t>(selector_moment(cp, j))];
    if (!(den > threshold)) continue;
    const Polynomial wj = Polynomial::variable(cp.vars.w(j));
    Matrix num = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t s = r; s < n; ++s) {
        double v = 0.0;
        if (mode == CandidateMode::term_local) {
          v = cp.expect(wj * cp.vars.pi_poly(j, r, s), u);
        } else {
          for (std::size_t k = 0; k < cp.vars.m(); ++k) {
            const double scale = static_cast<double>(cp.term_sizes[k]) / cp.mu_n;
            const auto mono = wj * Polynomial::variable(cp.vars.w(k)) * cp.vars.pi_poly(k, r, s);
            for (const auto& [m, c] : mono.sorted_terms()) {
              if (cp.moment_var(m) < 0) {
                throw InputError("weighted-average candidates need moment " + m.to_string() +
                                 "; build without clique sparsity");
              }
            }
            v += scale * cp.expect(mono, u);
          }
        }
        num(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) = v / den;
        num(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r)) = v / den;
      }
    }
    per_term[j] = std::move(num);
  }

  CandidateSet out;
  for (std::size_t i = 0; i < pd.n_prime(); ++i) {
    const auto j = pd.term_of[i];
    if (!per_term[j]) {
      out.omitted.push_back(i);
      continue;
    }
    ProjectionCandidate c;
    c.pi_hat = *per_term[j];
    c.source = i;
    c.term = j;
    c.probability = sel[i] / cp.mu_n;
    out.candidates.push_back(std::move(c));
  }
  return out;
}

std::vector<double> selection_probabilities(const CompiledProgram& cp, const PreparedDataset& pd,
                                            const std::vector<double>& u, double tol) {
  auto p = selection_expectations(cp, pd, u);
  double sum = 0.0;
  for (auto& x : p) {
    x /= cp.mu_n;
    if (x < -tol) {
      throw ConsistencyError("negative selection probability " + std::to_string(x));
    }
    x = std::max(x, 0.0);
    sum += x;
  }
  if (std::abs(sum - 1.0) > tol) {
    throw ConsistencyError("selection probabilities sum to " + std::to_string(sum) +
                           ", outside 1 +/- " + std::to_string(tol));
  }
  for (auto& x : p) x /= sum;
  return p;
}

std::vector<std::size_t> sample_multiset(const std::vector<double>& probabilities,
                                         std::size_t count, std::uint64_t seed) {
  if (probabilities.empty()) throw InputError("no selection probabilities to sample from");
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> dist(probabilities.begin(), probabilities.end());
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = dist(rng);
  return out;
}

std::vector<std::size_t> sample_multiset(const CompiledProgram& cp, const PreparedDataset& pd,
                                         const std::vector<double>& u, std::size_t count,
                                         std::uint64_t seed, double tol) {
  return sample_multiset(selection_probabilities(cp, pd, u, tol), count, seed);
}

std::size_t default_multiset_size(double mu, double c) {
  if (!(mu > 0.0)) throw InputError("mu must be positive");
  return static_cast<std::size_t>(std::ceil(c / mu - 1e-12));
}

ProjectionCandidate project_to_projector(const Matrix& m, std::optional<std::size_t> rank_hint) {
  if (m.rows() != m.cols()) throw InputError("projector input must be square");
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  const Vector& lam = es.eigenvalues();  // ascending
  const auto n = lam.size();
  Eigen::Index keep = 0;
  if (rank_hint) {
    if (*rank_hint > static_cast<std::size_t>(n)) throw InputError("rank hint exceeds dimension");
    keep = static_cast<Eigen::Index>(*rank_hint);
  } else {
    for (Eigen::Index i = 0; i < n; ++i) keep += lam[i] > 0.5 ? 1 : 0;
  }
  const Matrix V = es.eigenvectors().rightCols(keep);
  ProjectionCandidate c;
  c.pi_hat = V * V.transpose();
  c.post_processed = true;
  c.rank = static_cast<std::size_t>(keep);
  const double lo_kept = keep > 0 ? lam[n - keep] : 1.0;
  const double hi_dropped = keep < n ? lam[n - keep - 1] : 0.0;
  c.spectral_gap = lo_kept - hi_dropped;
  return c;
}

RegressionModel recover_predictor(const ProjectionCandidate& c, double threshold) {
  const auto n = c.pi_hat.rows();
  if (n < 2) throw InputError("projector too small for a predictor");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (c.pi_hat + c.pi_hat.transpose()));
  Eigen::Index best = -1;
  double best_last = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (es.eigenvalues()[i] >= threshold) continue;
    const double last = std::abs(es.eigenvectors()(n - 1, i));
    if (best < 0 || last > best_last) {
      best = i;
      best_last = last;
    }
  }
  if (best < 0) throw NonIdentifiableError("projector has an empty null space");
  if (best_last < 1e-8) {
    throw DegenerateResponseError("null vectors of the projector do not involve the response");
  }
  Vector eta = es.eigenvectors().col(best);
  eta /= -eta[n - 1];
  RegressionModel out;
  out.v_hat = eta.head(n - 1);
  return out;
}

RoundingResult round_candidates(const CompiledProgram& cp, const PreparedDataset& pd,
                                const std::vector<double>& u, std::size_t count, std::uint64_t seed,
                                std::optional<std::size_t> rank_hint, CandidateMode mode) {
  const auto cands = extract_candidates(cp, pd, u, mode);
  std::vector<int> by_sample(pd.n_prime(), -1);
  for (std::size_t k = 0; k < cands.candidates.size(); ++k) {
    by_sample[cands.candidates[k].source] = static_cast<int>(k);
  }
  RoundingResult out;
  out.multiset = sample_multiset(cp, pd, u, count, seed);
  for (const auto i : out.multiset) {
    const int k = by_sample[i];
    if (k < 0) {
      // Zero-probability draws cannot happen; tiny-but-positive ones can.
      out.failures.push_back("sample " + std::to_string(i) + " has no candidate");
      continue;
    }
    const auto& raw = cands.candidates[static_cast<std::size_t>(k)];
    auto pc = project_to_projector(raw.pi_hat, rank_hint);
    pc.source = raw.source;
    pc.term = raw.term;
    pc.probability = raw.probability;
    out.list.push_back(pc);
    try {
      auto model = recover_predictor(pc);
      model.source = out.list.size() - 1;
      out.models.push_back(std::move(model));
      out.failures.emplace_back();
    } catch (const Error& e) {
      out.failures.emplace_back(e.what());
    }
  }
  return out;
}

}  // namespace clr
