#include "doctest.h"

#include <random>

#include "clr/core_model.hpp"
#include "clr/errors.hpp"

using namespace clr;

TEST_CASE("evaluate_term basics") {
  CHECK(evaluate_term(Term({{0, 1}}), BitVector{1, 0}));
  CHECK_FALSE(evaluate_term(Term({{0, 1}, {1, 0}}), BitVector{1, 1}));
  CHECK(evaluate_term(Term(std::vector<Literal>{}), BitVector{0, 1, 1}));
  CHECK_THROWS_AS(evaluate_term(Term({{3, 1}}), BitVector{1, 0}), InputError);
  // Bad index is reported even when an earlier literal already failed.
  CHECK_THROWS_AS(evaluate_term(Term({{0, 0}, {5, 1}}), BitVector{1, 0}), InputError);
}

TEST_CASE("term construction rejects repeated attributes") {
  CHECK_THROWS_AS(Term({{1, 0}, {1, 1}}), InputError);
  CHECK_THROWS_AS(Term({{1, 2}}), InputError);
}

TEST_CASE("evaluate_dnf basics") {
  CHECK(evaluate_dnf(KDnf{{Term({{0, 1}})}}, BitVector{1}));
  CHECK_FALSE(evaluate_dnf(KDnf{}, BitVector{1, 0}));
  CHECK(evaluate_dnf(KDnf{{Term({{0, 0}}), Term({{1, 1}})}}, BitVector{1, 1}));
  CHECK_THROWS_AS(evaluate_dnf(KDnf{{Term({{0, 1}}), Term({{4, 1}})}}, BitVector{1, 1}),
                  InputError);
}

TEST_CASE("evaluate_term agrees with a literal-by-literal oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    BitVector x(n);
    for (auto& b : x) b = static_cast<std::uint8_t>(rng() & 1U);
    std::vector<std::size_t> attrs(n);
    for (std::size_t i = 0; i < n; ++i) attrs[i] = i;
    std::shuffle(attrs.begin(), attrs.end(), rng);
    const std::size_t k = rng() % (n + 1);
    std::vector<Literal> lits;
    for (std::size_t i = 0; i < k; ++i) lits.push_back({attrs[i], static_cast<std::uint8_t>(rng() & 1U)});
    int matches = 0;
    for (const auto& l : lits) matches += x[l.attribute] == l.polarity ? 1 : 0;
    CHECK(evaluate_term(Term(lits), x) == (matches == static_cast<int>(k)));
  }
}

TEST_CASE("extended sample round trip") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    Sample s;
    const int d = 1 + static_cast<int>(rng() % 5);
    s.y = Vector(d);
    for (int i = 0; i < d; ++i) s.y[i] = g(rng);
    s.z = g(rng);
    const auto e = ExtendedSample::from(s);
    CHECK(e.y_ext[0] == 1.0);
    CHECK(e.d() == static_cast<std::size_t>(d));
    CHECK(e.predictors() == s.y);
    CHECK(e.response() == s.z);
  }
}

TEST_CASE("problem params validation") {
  ProblemParams p;
  CHECK_NOTHROW(p.validate());
  p.alpha = 0.5;
  CHECK_THROWS_AS(p.validate(), InputError);
  p = {};
  p.ell = 5;
  CHECK_THROWS_AS(p.validate(), InputError);
  p = {};
  p.mu = 0.0;
  CHECK_THROWS_AS(p.validate(), InputError);
  p = {};
  p.sigma = -1.0;
  CHECK_THROWS_AS(p.validate(), InputError);
}

TEST_CASE("planted spec validation") {
  PlantedSpec s;
  s.c_star.terms = {Term({{0, 1}})};
  s.v_star = Vector::Zero(3);
  s.r = 3;
  s.per_term_covariances = {Matrix::Identity(2, 2)};
  CHECK_NOTHROW(s.validate());
  s.r = 4;
  CHECK_THROWS_AS(s.validate(), InputError);
  s.r = 3;
  s.per_term_covariances.push_back(Matrix::Identity(2, 2));
  CHECK_THROWS_AS(s.validate(), InputError);
  s.per_term_covariances = {-Matrix::Identity(2, 2)};
  CHECK_THROWS_AS(s.validate(), InputError);
}
