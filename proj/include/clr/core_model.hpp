#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace clr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using BitVector = std::vector<std::uint8_t>;

/// One observation: Boolean attributes x, predictors y, response z.
struct Sample {
  BitVector x;
  Vector y;
  double z = 0.0;
};

/// The (d+2)-dimensional working vector [1, y, z].
struct ExtendedSample {
  Vector y_ext;

  static ExtendedSample from(const Sample& s);
  std::size_t d() const { return static_cast<std::size_t>(y_ext.size()) - 2; }
  Vector predictors() const { return y_ext.segment(1, y_ext.size() - 2); }
  double response() const { return y_ext[y_ext.size() - 1]; }
};

struct Literal {
  std::size_t attribute = 0;
  std::uint8_t polarity = 1;

  friend bool operator==(const Literal&, const Literal&) = default;
};

/// A conjunction of literals plus the (duplicated) sample ids it owns.
struct Term {
  std::vector<Literal> literals;
  std::vector<std::size_t> member_ids;

  Term() = default;
  explicit Term(std::vector<Literal> lits);

  std::size_t weight() const { return member_ids.size(); }
  std::size_t width() const { return literals.size(); }
  std::string to_string() const;
};

/// Disjunction of terms. An empty DNF evaluates to false.
struct KDnf {
  std::vector<Term> terms;

  std::size_t t() const { return terms.size(); }
  std::size_t max_width() const;
  std::string to_string() const;
};

// Throws InputError when a literal indexes past x.
bool evaluate_term(const Term& term, const BitVector& x);
bool evaluate_dnf(const KDnf& c, const BitVector& x);

/// Parameters of the conditional regression program. `mu` is the fraction
/// of the prepared (post-duplication) dataset that the condition must cover.
struct ProblemParams {
  double mu = 0.3;
  double sigma = 0.0;
  double C = 8.0;
  double alpha = 1.0;
  double beta = 1.0;
  double delta = 0.05;
  double gamma = 0.1;
  double epsilon_target = 0.0;
  int ell = 4;
  int h = 2;

  void validate() const;
};

/// Non-conditioned population behaviour in generated instances.
struct OutlierModel {
  bool flip_slopes = true;
  double noise_multiplier = 10.0;
  // Absolute noise floor; keeps outliers off every hyperplane when noise_sigma is 0.
  double noise_floor = 0.5;
  double predictor_scale = 1.0;
};

/// Ground-truth description of a planted instance.
struct PlantedSpec {
  KDnf c_star;
  Vector v_star;  // intercept followed by d slopes
  std::size_t r = 0;
  std::vector<Matrix> per_term_covariances;
  double noise_sigma = 0.0;
  OutlierModel outlier_model;

  std::size_t d() const { return static_cast<std::size_t>(v_star.size()) - 1; }
  void validate() const;
};

}  // namespace clr
