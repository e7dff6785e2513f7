#include "clr/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "clr/errors.hpp"

namespace clr {

ExtendedSample ExtendedSample::from(const Sample& s) {
  const auto d = s.y.size();
  ExtendedSample e;
  e.y_ext.resize(d + 2);
  e.y_ext[0] = 1.0;
  e.y_ext.segment(1, d) = s.y;
  e.y_ext[d + 1] = s.z;
  return e;
}

Term::Term(std::vector<Literal> lits) : literals(std::move(lits)) {
  for (std::size_t a = 0; a < literals.size(); ++a) {
    for (std::size_t b = a + 1; b < literals.size(); ++b) {
      if (literals[a].attribute == literals[b].attribute) {
        throw InputError("term repeats attribute " +
                         std::to_string(literals[a].attribute));
      }
    }
    if (literals[a].polarity > 1) throw InputError("literal polarity must be 0 or 1");
  }
}

std::string Term::to_string() const {
  if (literals.empty()) return "TRUE";
  std::ostringstream os;
  for (std::size_t i = 0; i < literals.size(); ++i) {
    if (i) os << " & ";
    os << (literals[i].polarity ? "" : "!") << "x" << literals[i].attribute;
  }
  return os.str();
}

std::size_t KDnf::max_width() const {
  std::size_t w = 0;
  for (const auto& t : terms) w = std::max(w, t.width());
  return w;
}

std::string KDnf::to_string() const {
  if (terms.empty()) return "FALSE";
  std::ostringstream os;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) os << " | ";
    os << "(" << terms[i].to_string() << ")";
  }
  return os.str();
}

bool evaluate_term(const Term& term, const BitVector& x) {
  bool ok = true;
  for (const auto& lit : term.literals) {
    if (lit.attribute >= x.size()) {
      throw InputError("literal attribute " + std::to_string(lit.attribute) +
                       " out of range for x of length " +
                       std::to_string(x.size()));
    }
    // Keep scanning after a mismatch so bad indices are always reported.
    ok = ok && (x[lit.attribute] == lit.polarity);
  }
  return ok;
}

bool evaluate_dnf(const KDnf& c, const BitVector& x) {
  bool any = false;
  for (const auto& t : c.terms) any = evaluate_term(t, x) || any;
  return any;
}

void ProblemParams::validate() const {
  auto in_open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!(mu > 0.0 && mu <= 1.0)) throw InputError("mu must lie in (0, 1]");
  if (!in_open_unit(delta)) throw InputError("delta must lie in (0, 1)");
  if (!in_open_unit(gamma)) throw InputError("gamma must lie in (0, 1)");
  if (sigma < 0 || C < 0 || alpha < 0 || beta < 0 || epsilon_target < 0) {
    throw InputError("sigma, C, alpha, beta, epsilon_target must be >= 0");
  }
  if (alpha < 1.0) throw InputError("alpha must be >= 1 (intercept coordinate)");
  if (ell < 4 || ell % 2 != 0) throw InputError("ell must be even and >= 4");
  if (h != 2) throw InputError("hypercontractivity order h is fixed to 2");
}

void PlantedSpec::validate() const {
  if (v_star.size() < 2) throw InputError("v_star needs an intercept and >= 1 slope");
  if (per_term_covariances.size() != c_star.t()) {
    throw InputError("need one covariance per planted term");
  }
  const auto dd = static_cast<Eigen::Index>(d());
  for (const auto& cov : per_term_covariances) {
    if (cov.rows() != dd || cov.cols() != dd) {
      throw InputError("per-term covariance has wrong shape");
    }
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
      throw InputError("per-term covariance is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    if (es.eigenvalues().minCoeff() < -1e-10) {
      throw InputError("per-term covariance is not PSD");
    }
  }
  if (r > d() + 1) throw InputError("planted subspace dimension r exceeds d+1");
  if (noise_sigma < 0) throw InputError("noise_sigma must be >= 0");
}

}  // namespace clr
