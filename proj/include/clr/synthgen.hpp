#pragma once

#include <cstdint>
#include <vector>

#include "clr/core_model.hpp"

namespace clr {

struct GroundTruth {
  Vector v_star;  // intercept followed by slopes
  KDnf c_star;
  std::size_t r = 0;
  Matrix pi_star;                   // (d+2) x (d+2) projector onto the inlier hyperplane
  std::vector<Matrix> per_term_pi;  // one per planted term
  std::vector<Matrix> per_term_second_moment;  // population E[y y'] of noise-free extended inliers
  std::vector<std::size_t> inlier_ids;
  std::vector<std::size_t> inlier_term;  // planted term of each inlier
  std::vector<double> noise;             // drawn residual per sample (outliers included)
  double noise_sigma = 0.0;
};

struct GeneratedData {
  std::vector<Sample> samples;
  GroundTruth truth;
};

struct GenerateOptions {
  std::size_t n_attributes = 4;
  double inlier_fraction = 0.3;
  bool isotropic = false;  // (y, z) uniform on the hyperplane; ignores per-term covariances
  int max_rejections = 10000;
};

// Draws inliers from the planted terms (exactly one each) and outliers from the complement.
GeneratedData generate(const PlantedSpec& spec, std::size_t n_samples, std::uint64_t seed,
                       const GenerateOptions& opts = {});

// Extended-space projector onto {y : <(v, -1), y> = 0}.
Matrix hyperplane_projector(const Vector& v_star);

struct PlantedSpecOptions {
  std::size_t n_attributes = 4;
  std::size_t k = 1;
  std::size_t d = 2;
  std::size_t terms = 2;
  double noise_sigma = 0.0;
  double spectral_gap = 0.5;  // min pairwise ||Sigma_j - Sigma_j'||_2
  double spectrum_lo = 0.25;
  double spectrum_hi = 1.0;
  double slope_scale = 1.0;
  int max_rejections = 10000;
};

// Random planted specification: terms over disjoint attributes, a random predictor,
// and per-term covariances with distinct rotated spectra.
PlantedSpec random_planted_spec(const PlantedSpecOptions& o, std::uint64_t seed);

double min_pairwise_spectral_gap(const std::vector<Matrix>& covs);

struct CovarianceCheck {
  std::vector<double> distances;  // per planted term, Frobenius
  std::vector<std::size_t> counts;
  bool passed = true;
};

// Empirical vs population second moment of the noise-free extended inliers of each term.
CovarianceCheck empirical_covariance_check(const std::vector<Sample>& samples,
                                           const GroundTruth& truth, double tol);

}  // namespace clr
