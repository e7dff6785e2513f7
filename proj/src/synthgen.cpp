#include "clr/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "clr/errors.hpp"

namespace clr {

namespace {

Vector gaussian(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = g(rng);
  return out;
}

Matrix random_rotation(std::mt19937_64& rng, Eigen::Index n) {
  Matrix A(n, n);
  for (Eigen::Index c = 0; c < n; ++c) A.col(c) = gaussian(rng, n);
  Eigen::HouseholderQR<Matrix> qr(A);
  Matrix Q = qr.householderQ();
  // Fix column signs so the draw is Haar distributed.
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < n; ++c) {
    if (R(c, c) < 0) Q.col(c) *= -1.0;
  }
  return Q;
}

Matrix sqrt_psd(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

void random_bits(std::mt19937_64& rng, BitVector& x) {
  for (auto& b : x) b = static_cast<std::uint8_t>(rng() & 1U);
}

std::size_t count_satisfied(const KDnf& c, const BitVector& x) {
  std::size_t n = 0;
  for (const auto& t : c.terms) n += evaluate_term(t, x) ? 1 : 0;
  return n;
}

}  // namespace

Matrix hyperplane_projector(const Vector& v_star) {
  const auto n = v_star.size() + 1;
  Vector eta(n);
  eta.head(v_star.size()) = v_star;
  eta[n - 1] = -1.0;
  eta.normalize();
  return Matrix::Identity(n, n) - eta * eta.transpose();
}

GeneratedData generate(const PlantedSpec& spec, std::size_t n_samples, std::uint64_t seed,
                       const GenerateOptions& opts) {
  spec.validate();
  if (!(opts.inlier_fraction > 0.0 && opts.inlier_fraction <= 1.0)) {
    throw InputError("inlier_fraction must lie in (0, 1]");
  }
  if (spec.c_star.terms.empty()) throw InputError("planted condition has no terms");
  for (const auto& t : spec.c_star.terms) {
    for (const auto& l : t.literals) {
      if (l.attribute >= opts.n_attributes) throw InputError("planted literal exceeds n_attributes");
    }
  }
  const auto d = static_cast<Eigen::Index>(spec.d());
  const double v0 = spec.v_star[0];
  const Vector slopes = spec.v_star.tail(d);
  const std::size_t t = spec.c_star.t();

  std::vector<Matrix> roots;
  for (const auto& cov : spec.per_term_covariances) roots.push_back(sqrt_psd(cov));
  // Isotropic mode: (y, z - v0) uniform on {z = <slopes, y>}.
  Vector normal(d + 1);
  normal.head(d) = slopes;
  normal[d] = -1.0;
  normal.normalize();
  const Matrix iso = Matrix::Identity(d + 1, d + 1) - normal * normal.transpose();

  GeneratedData out;
  auto& gt = out.truth;
  gt.v_star = spec.v_star;
  gt.c_star = spec.c_star;
  gt.r = spec.r;
  gt.noise_sigma = spec.noise_sigma;
  gt.pi_star = hyperplane_projector(spec.v_star);
  gt.per_term_pi.assign(t, gt.pi_star);

  // Second moment of [1, y, v0 + <slopes, y>].
  Matrix T = Matrix::Zero(d + 2, d + 1);
  T.topRows(d + 1).setIdentity();
  T.row(d + 1) = spec.v_star.transpose();
  for (std::size_t j = 0; j < t; ++j) {
    Matrix M = Matrix::Zero(d + 1, d + 1);
    M(0, 0) = 1.0;
    if (opts.isotropic) {
      M.bottomRightCorner(d, d) = iso.topLeftCorner(d, d);
    } else {
      M.bottomRightCorner(d, d) = spec.per_term_covariances[j];
    }
    gt.per_term_second_moment.push_back(T * M * T.transpose());
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  const auto n_in = static_cast<std::size_t>(std::llround(opts.inlier_fraction * static_cast<double>(n_samples)));
  std::vector<std::uint8_t> is_inlier(n_samples, 0);
  std::fill(is_inlier.begin(), is_inlier.begin() + static_cast<std::ptrdiff_t>(std::min(n_in, n_samples)), 1);
  std::shuffle(is_inlier.begin(), is_inlier.end(), rng);

  const double out_sigma = std::max(spec.outlier_model.noise_multiplier * spec.noise_sigma,
                                    spec.outlier_model.noise_floor);
  const Vector out_slopes = spec.outlier_model.flip_slopes ? Vector(-slopes) : slopes;

  std::size_t next_term = 0;
  out.samples.resize(n_samples);
  gt.noise.resize(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    Sample& s = out.samples[i];
    s.x.resize(opts.n_attributes);
    if (is_inlier[i]) {
      const std::size_t j = next_term++ % t;
      const auto& term = spec.c_star.terms[j];
      int tries = 0;
      while (true) {
        random_bits(rng, s.x);
        for (const auto& l : term.literals) s.x[l.attribute] = l.polarity;
        if (count_satisfied(spec.c_star, s.x) == 1) break;
        if (++tries >= opts.max_rejections) {
          throw InputError("cannot draw attributes satisfying exactly one planted term");
        }
      }
      double z0;
      if (opts.isotropic) {
        const Vector p = iso * gaussian(rng, d + 1);
        s.y = p.head(d);
        z0 = p[d];
      } else {
        s.y = roots[j] * gaussian(rng, d);
        z0 = slopes.dot(s.y);
      }
      const double e = spec.noise_sigma * g(rng);
      s.z = v0 + z0 + e;
      gt.noise[i] = e;
      gt.inlier_ids.push_back(i);
      gt.inlier_term.push_back(j);
    } else {
      int tries = 0;
      while (true) {
        random_bits(rng, s.x);
        if (count_satisfied(spec.c_star, s.x) == 0) break;
        if (++tries >= opts.max_rejections) {
          throw InputError("cannot draw attributes avoiding the planted condition");
        }
      }
      s.y = spec.outlier_model.predictor_scale * gaussian(rng, d);
      const double e = out_sigma * g(rng);
      s.z = v0 + out_slopes.dot(s.y) + e;
      gt.noise[i] = e;
    }
  }
  return out;
}

double min_pairwise_spectral_gap(const std::vector<Matrix>& covs) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < covs.size(); ++a) {
    for (std::size_t b = a + 1; b < covs.size(); ++b) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(covs[a] - covs[b], Eigen::EigenvaluesOnly);
      best = std::min(best, es.eigenvalues().cwiseAbs().maxCoeff());
    }
  }
  return best;
}

PlantedSpec random_planted_spec(const PlantedSpecOptions& o, std::uint64_t seed) {
  if (o.terms * o.k > o.n_attributes) {
    throw InputError("planted terms need terms * k <= n_attributes distinct attributes");
  }
  if (o.d < 1 || o.k < 1 || o.terms < 1) throw InputError("d, k and terms must be >= 1");
  if (!(o.spectrum_lo >= 0.0 && o.spectrum_hi >= o.spectrum_lo)) {
    throw InputError("spectrum bounds must satisfy 0 <= lo <= hi");
  }
  std::mt19937_64 rng(seed);
  PlantedSpec spec;
  std::vector<std::size_t> attrs(o.n_attributes);
  std::iota(attrs.begin(), attrs.end(), 0);
  std::shuffle(attrs.begin(), attrs.end(), rng);
  for (std::size_t j = 0; j < o.terms; ++j) {
    std::vector<Literal> lits;
    for (std::size_t i = 0; i < o.k; ++i) {
      lits.push_back({attrs[j * o.k + i], static_cast<std::uint8_t>(rng() & 1U)});
    }
    std::sort(lits.begin(), lits.end(), [](const Literal& a, const Literal& b) { return a.attribute < b.attribute; });
    spec.c_star.terms.emplace_back(std::move(lits));
  }

  std::uniform_real_distribution<double> mag(0.5, 1.5);
  const auto d = static_cast<Eigen::Index>(o.d);
  spec.v_star = Vector(d + 1);
  for (Eigen::Index i = 0; i <= d; ++i) {
    spec.v_star[i] = o.slope_scale * mag(rng) * ((rng() & 1U) ? 1.0 : -1.0);
  }
  spec.r = o.d + 1;
  spec.noise_sigma = o.noise_sigma;

  std::uniform_real_distribution<double> spec_draw(o.spectrum_lo, o.spectrum_hi);
  auto draw = [&] {
    Vector lam(d);
    for (Eigen::Index i = 0; i < d; ++i) lam[i] = spec_draw(rng);
    const Matrix R = random_rotation(rng, d);
    const Matrix S = R * lam.asDiagonal() * R.transpose();
    return Matrix(0.5 * (S + S.transpose()));
  };
  // An early draw can make the gap unreachable for later ones, so failures restart the whole set.
  const int per_term = 100;
  int tries = 0;
  while (spec.per_term_covariances.size() < o.terms) {
    spec.per_term_covariances.clear();
    for (std::size_t j = 0; j < o.terms; ++j) {
      bool placed = false;
      for (int a = 0; a < per_term && !placed; ++a) {
        auto trial = spec.per_term_covariances;
        trial.push_back(draw());
        if (trial.size() < 2 || min_pairwise_spectral_gap(trial) >= o.spectral_gap) {
          spec.per_term_covariances = std::move(trial);
          placed = true;
        }
      }
      if (!placed) break;
    }
    if (spec.per_term_covariances.size() < o.terms && ++tries >= o.max_rejections) {
      throw InputError("cannot reach the requested spectral gap with the given spectrum range");
    }
  }
  spec.validate();
  return spec;
}

CovarianceCheck empirical_covariance_check(const std::vector<Sample>& samples,
                                           const GroundTruth& truth, double tol) {
  CovarianceCheck rep;
  const std::size_t t = truth.per_term_second_moment.size();
  if (t == 0) return rep;
  const auto n = truth.per_term_second_moment[0].rows();
  std::vector<Matrix> acc(t, Matrix::Zero(n, n));
  rep.counts.assign(t, 0);
  for (std::size_t k = 0; k < truth.inlier_ids.size(); ++k) {
    const auto i = truth.inlier_ids[k];
    const auto j = truth.inlier_term[k];
    const auto& s = samples.at(i);
    Vector y(n);
    y[0] = 1.0;
    y.segment(1, n - 2) = s.y;
    y[n - 1] = s.z - truth.noise[i];
    const Vector py = truth.per_term_pi[j] * y;
    acc[j] += py * py.transpose();
    ++rep.counts[j];
  }
  for (std::size_t j = 0; j < t; ++j) {
    double dist = std::numeric_limits<double>::infinity();
    if (rep.counts[j] > 0) {
      dist = (acc[j] / static_cast<double>(rep.counts[j]) - truth.per_term_second_moment[j]).norm();
    }
    rep.distances.push_back(dist);
    if (!(dist <= tol)) rep.passed = false;
  }
  return rep;
}

}  // namespace clr
