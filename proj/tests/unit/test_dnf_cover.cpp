#include "doctest.h"

#include <cmath>
#include <random>

#include "clr/dnf_cover.hpp"
#include "clr/errors.hpp"
#include "clr/harness.hpp"
#include "clr/preprocess.hpp"
#include "clr/synthgen.hpp"

using namespace clr;

namespace {

// One-hot attributes, so sample i lands in exactly the term of its hot attribute.
PreparedDataset one_hot(const std::vector<std::size_t>& sizes, const std::vector<double>& offsets,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Sample> s;
  std::vector<Term> terms;
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    terms.emplace_back(std::vector<Literal>{{t, 1}});
    for (std::size_t k = 0; k < sizes[t]; ++k) {
      Sample a;
      a.x.assign(sizes.size(), 0);
      a.x[t] = 1;
      a.y = Vector::Constant(1, g(rng));
      a.z = 1.0 + a.y[0] + offsets[t];
      s.push_back(a);
    }
  }
  return extend_and_center(assign_and_duplicate(s, terms), Centering::mean_zero);
}

RegressionModel model(double intercept, double slope) {
  RegressionModel m;
  m.v_hat = Vector(2);
  m.v_hat << intercept, slope;
  return m;
}

ProblemParams cover_params(double mu, double eps) {
  ProblemParams p;
  p.mu = mu;
  p.epsilon_target = eps;
  return p;
}

bool eligible(const LossTable& t, std::size_t j, const PreparedDataset& pd, const ProblemParams& p) {
  return t.term_sum[j] <= (1.0 + p.gamma) * p.mu * p.epsilon_target * static_cast<double>(pd.n_prime()) &&
         pd.terms[j].weight() > 0;
}

}  // namespace

TEST_CASE("loss table examples") {
  const auto pd = one_hot({5, 7}, {0.0, 0.0}, 1);
  const auto t = compute_losses(model(1.0, 1.0), pd);
  CHECK(t.term_sum[0] < 1e-24);
  CHECK(t.term_sum[1] < 1e-24);

  std::vector<Sample> s(6);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i].x = {static_cast<std::uint8_t>(i % 2)};
    s[i].y = Vector::Constant(1, static_cast<double>(i));
    s[i].z = 1.0;
  }
  const auto pd1 = extend_and_center(assign_and_duplicate(s, enumerate_terms(1, 1)), Centering::mean_zero);
  for (double l : compute_losses(model(0.0, 0.0), pd1).sample_loss) CHECK(l == 1.0);
  RegressionModel wrong;
  wrong.v_hat = Vector::Zero(3);
  CHECK_THROWS_AS(compute_losses(wrong, pd1), InputError);
}

TEST_CASE("loss table matches a naive recomputation") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<Sample> s(80);
  for (auto& a : s) {
    a.x = {static_cast<std::uint8_t>(rng() & 1U), static_cast<std::uint8_t>(rng() & 1U),
           static_cast<std::uint8_t>(rng() & 1U)};
    a.y = Vector(2);
    a.y << g(rng), g(rng);
    a.z = g(rng);
  }
  const auto pd = extend_and_center(assign_and_duplicate(s, enumerate_terms(3, 2)), Centering::mean_zero);
  RegressionModel m;
  m.v_hat = Vector(3);
  m.v_hat << 0.3, -1.2, 0.7;
  const auto t = compute_losses(m, pd);
  for (std::size_t j = 0; j < pd.m(); ++j) {
    double sum = 0.0;
    for (auto i : pd.terms[j].member_ids) {
      const auto& raw = pd.raw[pd.provenance[i]];
      const double r = raw.z - m.v_hat[0] - m.v_hat[1] * raw.y[0] - m.v_hat[2] * raw.y[1];
      CHECK(t.sample_loss[i] == doctest::Approx(r * r).epsilon(1e-12));
      sum += r * r;
    }
    CHECK(t.term_sum[j] == doctest::Approx(sum).epsilon(1e-12));
    if (!pd.terms[j].member_ids.empty()) {
      CHECK(t.term_mean[j] == doctest::Approx(sum / static_cast<double>(pd.terms[j].weight())));
    }
  }
  for (double l : t.sample_loss) CHECK(l >= 0.0);
}

TEST_CASE("single zero-loss term covers alone") {
  const auto pd = one_hot({20, 5, 5}, {0.0, 3.0, 3.0}, 2);
  const auto p = cover_params(0.6, 0.01);
  const auto c = greedy_cover(compute_losses(model(1.0, 1.0), pd), pd, p);
  REQUIRE(c.t() == 1);
  CHECK(c.terms[0].literals == pd.terms[0].literals);
}

TEST_CASE("two low-loss terms beat a high-loss one") {
  const auto pd = one_hot({10, 8, 12}, {0.0, 0.0, 5.0}, 3);
  const auto p = cover_params(0.6, 0.01);
  const auto t = compute_losses(model(1.0, 1.0), pd);
  const auto c = greedy_cover(t, pd, p);
  REQUIRE(c.t() == 2);
  CHECK(c.terms[0].literals == pd.terms[0].literals);
  CHECK(c.terms[1].literals == pd.terms[1].literals);

  // Brute force: the only eligible subset reaching the target is {0, 1}.
  const double target = (1.0 - p.gamma / 2.0) * p.mu * static_cast<double>(pd.n_prime());
  int reaching = 0;
  for (unsigned mask = 1; mask < 8; ++mask) {
    double cov = 0.0;
    bool ok = true;
    for (std::size_t j = 0; j < 3; ++j) {
      if (!(mask >> j & 1U)) continue;
      ok = ok && eligible(t, j, pd, p);
      cov += static_cast<double>(pd.terms[j].weight());
    }
    if (ok && cov >= target) {
      ++reaching;
      CHECK(mask == 3U);
    }
  }
  CHECK(reaching == 1);
}

TEST_CASE("cover fails when every term is ineligible") {
  const auto pd = one_hot({10, 10}, {4.0, 4.0}, 5);
  const auto p = cover_params(0.5, 0.01);
  try {
    greedy_cover(compute_losses(model(1.0, 1.0), pd), pd, p);
    FAIL("expected a cover failure");
  } catch (const CoverError& e) {
    CHECK(e.achieved_coverage() == 0.0);
    CHECK(e.achieved_loss() == 0.0);
  }
}

TEST_CASE("greedy succeeds whenever an eligible covering subset exists") {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> size(0, 15);
  std::uniform_real_distribution<double> off(0.0, 0.4);
  int existing = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + static_cast<std::size_t>(trial % 11);
    std::vector<std::size_t> sizes(m);
    std::vector<double> offsets(m);
    for (std::size_t j = 0; j < m; ++j) {
      sizes[j] = size(rng);
      offsets[j] = off(rng);
    }
    const auto pd = one_hot(sizes, offsets, static_cast<std::uint64_t>(trial));
    if (pd.n_prime() == 0) continue;
    const auto p = cover_params(0.4, 0.02);
    const auto t = compute_losses(model(1.0, 1.0), pd);
    const double target = (1.0 - p.gamma / 2.0) * p.mu * static_cast<double>(pd.n_prime());
    bool exists = false;
    for (unsigned mask = 1; mask < (1U << m) && !exists; ++mask) {
      double cov = 0.0;
      bool ok = true;
      for (std::size_t j = 0; j < m; ++j) {
        if (!(mask >> j & 1U)) continue;
        ok = ok && eligible(t, j, pd, p);
        cov += static_cast<double>(pd.terms[j].weight());
      }
      exists = ok && cov >= target;
    }
    if (!exists) {
      CHECK_THROWS_AS(greedy_cover(t, pd, p), CoverError);
      continue;
    }
    ++existing;
    const auto c = greedy_cover(t, pd, p);
    double cov = 0.0;
    for (const auto j : match_terms(c, pd)) {
      CHECK(eligible(t, j, pd, p));
      const double before = cov;
      cov += static_cast<double>(pd.terms[j].weight());
      CHECK(cov > before);
    }
    CHECK(cov >= target);
  }
  CHECK(existing > 20);
}

TEST_CASE("score_pair examples") {
  PlantedSpecOptions o;
  o.noise_sigma = 0.05;
  const auto spec = random_planted_spec(o, 8);
  const auto data = generate(spec, 1000, 9);
  const auto pd = extend_and_center(assign_and_duplicate(data.samples, enumerate_terms(4, 1)),
                                    Centering::mean_zero);
  RegressionModel planted;
  planted.v_hat = spec.v_star;
  const auto s = score_pair(planted, spec.c_star, pd);
  CHECK(s.defined);
  CHECK(s.covered == data.truth.inlier_ids.size());
  CHECK(s.conditional_mean_loss <= 2.0 * 0.05 * 0.05);

  const auto empty = score_pair(planted, KDnf{}, pd);
  CHECK(empty.coverage == 0.0);
  CHECK_FALSE(empty.defined);
  CHECK(std::isnan(empty.conditional_mean_loss));

  KDnf all;
  all.terms = enumerate_terms(4, 1);
  const auto full = score_pair(planted, all, pd);
  CHECK(full.coverage == doctest::Approx(1.0));

  KDnf foreign;
  foreign.terms.emplace_back(std::vector<Literal>{{0, 1}, {1, 1}});
  CHECK_THROWS_AS(score_pair(planted, foreign, pd), InputError);
}

TEST_CASE("best_pair picks the planted model") {
  PlantedSpecOptions o;
  o.noise_sigma = 0.05;
  const auto spec = random_planted_spec(o, 10);
  const auto data = generate(spec, 400, 11);
  const auto pd = extend_and_center(assign_and_duplicate(data.samples, enumerate_terms(4, 1)),
                                    Centering::mean_zero);
  auto p = cover_params(static_cast<double>(data.truth.inlier_ids.size()) / static_cast<double>(pd.n_prime()),
                        4.0 * 0.05 * 0.05);
  RegressionModel planted;
  planted.v_hat = spec.v_star;
  RegressionModel off = planted;
  off.v_hat[0] += 3.0;
  const auto best = best_pair({off, planted}, pd, p);
  CHECK(best.index == 1);
  CHECK(best.failures.size() == 2);
  CHECK_FALSE(best.failures[0].empty());
  CHECK(best.failures[1].empty());
  CHECK(best.score.coverage >= (1.0 - p.gamma / 2.0) * p.mu);

  const auto oracle = brute_force_oracle(pd, p);
  REQUIRE(oracle.feasible);
  CHECK(best.score.conditional_mean_loss <= 2.0 * oracle.loss);

  const auto tie = best_pair({planted, planted}, pd, p);
  CHECK(tie.index == 0);
  CHECK_THROWS_AS(best_pair({off}, pd, p), CoverError);
  CHECK_THROWS_AS(best_pair({}, pd, p), InputError);
}
