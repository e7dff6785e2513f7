#include <algorithm>
#include <cmath>
#include <iostream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "clr/errors.hpp"
#include "clr/sdp/sdp_problem.hpp"

namespace clr::sdp {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Vec = Eigen::VectorXd;

int svec_size(int dim) { return dim * (dim + 1) / 2; }

// Column-major lower-triangle position of (r, c) with r >= c.
int svec_index(int dim, int r, int c) {
  if (r < c) std::swap(r, c);
  return c * dim - c * (c - 1) / 2 + (r - c);
}

bool finite(double v) { return std::isfinite(v); }

Eigen::MatrixXd block_matrix(const PsdBlock& b, const std::vector<double>& u) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(b.dim, b.dim);
  for (const auto& e : b.entries) {
    const double v = e.var < 0 ? e.coef : e.coef * u[static_cast<std::size_t>(e.var)];
    X(e.row, e.col) += v;
    if (e.row != e.col) X(e.col, e.row) += v;
  }
  return X;
}

double min_eig(const Eigen::MatrixXd& X) {
  if (X.size() == 0) return 0.0;
  if (X.rows() == 1) return X(0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

double dot(const SparseTerms& t, const std::vector<double>& u) {
  double acc = 0.0;
  for (const auto& [i, c] : t) acc += c * u[static_cast<std::size_t>(i)];
  return acc;
}

// The problem in OSQP form: z = A x, z in C, C = {b} x prod_k (PSD_k - c_k).
struct ConicForm {
  int n = 0;
  int n_eq = 0;
  SpMat A;
  Vec b_eq;
  Vec shift;                    // c over cone rows, indexed by row (zeros on eq rows)
  std::vector<int> block_start;  // first row of each cone block
  std::vector<int> block_dim;
  Vec P;  // diagonal of P (objective is 0.5 x'Px + q'x)
  Vec q;
};

ConicForm to_conic(const SdpProblem& p) {
  ConicForm f;
  f.n = p.num_vars;
  f.n_eq = static_cast<int>(p.equalities.size());
  std::vector<Eigen::Triplet<double>> trip;
  int row = 0;
  std::vector<double> b;
  for (const auto& eq : p.equalities) {
    for (const auto& [i, c] : eq.terms) trip.emplace_back(row, i, c);
    b.push_back(eq.rhs);
    ++row;
  }
  std::vector<double> shift(static_cast<std::size_t>(row), 0.0);

  auto add_block = [&](const PsdBlock& blk) {
    f.block_start.push_back(row);
    f.block_dim.push_back(blk.dim);
    shift.resize(static_cast<std::size_t>(row + svec_size(blk.dim)), 0.0);
    for (const auto& e : blk.entries) {
      const int r = row + svec_index(blk.dim, e.row, e.col);
      const double s = e.row == e.col ? 1.0 : kSqrt2;
      if (e.var < 0) {
        shift[static_cast<std::size_t>(r)] += s * e.coef;
      } else {
        trip.emplace_back(r, e.var, s * e.coef);
      }
    }
    row += svec_size(blk.dim);
  };
  for (const auto& blk : p.blocks) add_block(blk);
  for (const auto& ineq : p.inequalities) {
    PsdBlock slack{ineq.tag, 1, {}};
    slack.entries.push_back({0, 0, -1, ineq.rhs});
    for (const auto& [i, c] : ineq.terms) slack.entries.push_back({0, 0, i, -c});
    add_block(slack);
  }

  f.A.resize(row, f.n);
  f.A.setFromTriplets(trip.begin(), trip.end());
  f.A.makeCompressed();
  f.b_eq = Eigen::Map<Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
  f.shift = Eigen::Map<Vec>(shift.data(), static_cast<Eigen::Index>(shift.size()));
  f.P = Vec::Zero(f.n);
  f.q = Vec::Zero(f.n);
  for (const auto& [i, c] : p.objective.linear) f.q[i] += c;
  for (const auto& [i, c] : p.objective.quadratic) f.P[i] += 2.0 * c;
  return f;
}

// Projects v (svec of a dim x dim matrix) onto the PSD cone in place.
void project_psd(double* v, int dim, Eigen::MatrixXd& work) {
  if (dim == 1) {
    v[0] = std::max(v[0], 0.0);
    return;
  }
  work.resize(dim, dim);
  int k = 0;
  for (int c = 0; c < dim; ++c) {
    for (int r = c; r < dim; ++r, ++k) {
      const double x = r == c ? v[k] : v[k] / kSqrt2;
      work(r, c) = x;
      work(c, r) = x;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(work);
  const auto& ev = es.eigenvalues();
  if (ev[0] >= 0.0) return;
  int first_pos = 0;
  while (first_pos < dim && ev[first_pos] <= 0.0) ++first_pos;
  if (first_pos == dim) {
    std::fill(v, v + svec_size(dim), 0.0);
    return;
  }
  const auto& V = es.eigenvectors();
  const int npos = dim - first_pos;
  Eigen::MatrixXd Vp = V.rightCols(npos) * ev.tail(npos).cwiseSqrt().asDiagonal();
  work.noalias() = Vp * Vp.transpose();
  k = 0;
  for (int c = 0; c < dim; ++c) {
    for (int r = c; r < dim; ++r, ++k) v[k] = r == c ? work(r, c) : kSqrt2 * work(r, c);
  }
}

double inf_norm(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

class Admm {
 public:
  Admm(const SdpProblem& p, const SolveOptions& o) : prob_(p), opts_(o), f_(to_conic(p)) {
    rows_ = static_cast<int>(f_.A.rows());
    scale();
    build_gram();
  }

  SdpSolution run();

 private:
  void scale();
  void build_gram();
  void factorize();
  void project(Vec& v) const;
  std::vector<double> unscaled_x() const;
  bool set_rho(double rho);

  const SdpProblem& prob_;
  SolveOptions opts_;
  ConicForm f_;
  int rows_ = 0;

  // Scaled data.
  SpMat As_;
  SpMat AsT_;
  Vec Ps_, qs_, bs_, shift_s_;
  Vec D_, E_;
  double cost_scale_ = 1.0;

  SpMat gram_;  // A' R0 A with R0 = 1 on cone rows, eq_rho_scale on equality rows
  Eigen::SimplicialLDLT<SpMat> ldlt_;
  bool analyzed_ = false;
  double rho_ = 0.1;
  Vec rho_vec_;
  int refactorizations_ = 0;

  Vec x_, z_, y_;
};

void Admm::scale() {
  const int n = f_.n;
  D_ = Vec::Ones(n);
  E_ = Vec::Ones(rows_);
  As_ = f_.A;
  Ps_ = f_.P;
  qs_ = f_.q;
  for (int it = 0; it < opts_.scaling_iters; ++it) {
    Vec col = Ps_.cwiseAbs();
    Vec rown = Vec::Zero(rows_);
    for (int j = 0; j < As_.outerSize(); ++j) {
      for (SpMat::InnerIterator itr(As_, j); itr; ++itr) {
        const double a = std::abs(itr.value());
        col[j] = std::max(col[j], a);
        rown[itr.row()] = std::max(rown[itr.row()], a);
      }
    }
    // One scale per cone block keeps the cone invariant.
    for (std::size_t k = 0; k < f_.block_start.size(); ++k) {
      const int s = f_.block_start[k], len = svec_size(f_.block_dim[k]);
      const double mx = rown.segment(s, len).maxCoeff();
      rown.segment(s, len).setConstant(mx);
    }
    Vec dcol(n), erow(rows_);
    for (int j = 0; j < n; ++j) dcol[j] = col[j] < 1e-8 ? 1.0 : 1.0 / std::sqrt(col[j]);
    for (int i = 0; i < rows_; ++i) erow[i] = rown[i] < 1e-8 ? 1.0 : 1.0 / std::sqrt(rown[i]);
    As_ = erow.asDiagonal() * As_ * dcol.asDiagonal();
    Ps_ = dcol.cwiseProduct(Ps_).cwiseProduct(dcol);
    qs_ = dcol.cwiseProduct(qs_);
    D_ = D_.cwiseProduct(dcol);
    E_ = E_.cwiseProduct(erow);
  }
  const double qn = inf_norm(qs_);
  const double pn = n ? Ps_.cwiseAbs().mean() : 0.0;
  const double cmax = std::max(qn, pn);
  cost_scale_ = cmax > 1e-8 ? std::clamp(1.0 / cmax, 1e-4, 1e4) : 1.0;
  Ps_ *= cost_scale_;
  qs_ *= cost_scale_;
  bs_ = E_.head(f_.n_eq).cwiseProduct(f_.b_eq);
  shift_s_ = E_.cwiseProduct(f_.shift);
  As_.makeCompressed();
  AsT_ = As_.transpose();
}

void Admm::build_gram() {
  Vec r0 = Vec::Ones(rows_);
  r0.head(f_.n_eq).setConstant(opts_.eq_rho_scale);
  gram_ = (AsT_ * r0.asDiagonal() * As_).pruned();
}

void Admm::factorize() {
  SpMat K = rho_ * gram_;
  Vec diag = Ps_.array() + opts_.sigma;
  for (int j = 0; j < f_.n; ++j) K.coeffRef(j, j) += diag[j];
  K.makeCompressed();
  if (!analyzed_) {
    ldlt_.analyzePattern(K);
    analyzed_ = true;
  }
  ldlt_.factorize(K);
  if (ldlt_.info() != Eigen::Success) throw SolverError("KKT factorization failed");
  ++refactorizations_;
}

bool Admm::set_rho(double rho) {
  rho = std::clamp(rho, 1e-6, 1e6);
  rho_ = rho;
  rho_vec_ = Vec::Constant(rows_, rho);
  rho_vec_.head(f_.n_eq).setConstant(rho * opts_.eq_rho_scale);
  factorize();
  return true;
}

void Admm::project(Vec& v) const {
  v.head(f_.n_eq) = bs_;
  thread_local Eigen::MatrixXd work;
  for (std::size_t k = 0; k < f_.block_start.size(); ++k) {
    const int s = f_.block_start[k], dim = f_.block_dim[k], len = svec_size(dim);
    v.segment(s, len) += shift_s_.segment(s, len);
    project_psd(v.data() + s, dim, work);
    v.segment(s, len) -= shift_s_.segment(s, len);
  }
}

std::vector<double> Admm::unscaled_x() const {
  Vec x = D_.cwiseProduct(x_);
  return {x.data(), x.data() + x.size()};
}

SdpSolution Admm::run() {
  const int n = f_.n;
  x_ = Vec::Zero(n);
  if (!opts_.initial_point.empty()) {
    if (static_cast<int>(opts_.initial_point.size()) != n) {
      throw InputError("initial point has wrong dimension");
    }
    x_ = Eigen::Map<const Vec>(opts_.initial_point.data(), n).cwiseQuotient(D_);
  } else if (opts_.init_scale > 0.0) {
    std::mt19937_64 rng(opts_.seed);
    std::normal_distribution<double> g(0.0, opts_.init_scale);
    for (int j = 0; j < n; ++j) x_[j] = g(rng) / D_[j];
  }
  z_ = As_ * x_;
  project(z_);
  y_ = Vec::Zero(rows_);
  set_rho(opts_.rho);

  SdpSolution sol;
  Vec xt(n), zt(rows_), zr(rows_), rhs(n), z_prev(rows_), Ax(rows_), Aty(n);
  const double a = opts_.alpha;
  const Vec Einv = E_.cwiseInverse();
  const Vec Dinv = D_.cwiseInverse();
  const Vec q_unscaled = f_.q;

  std::vector<std::pair<int, double>> history;  // (iteration, primal residual)
  double best_before = std::numeric_limits<double>::infinity();
  std::size_t hist_cursor = 0;

  int it = 0;
  for (it = 1; it <= opts_.max_iters; ++it) {
    rhs = opts_.sigma * x_ - qs_ + AsT_ * (rho_vec_.cwiseProduct(z_) - y_);
    xt = ldlt_.solve(rhs);
    zt = As_ * xt;
    x_ = a * xt + (1.0 - a) * x_;
    zr = a * zt + (1.0 - a) * z_;
    z_prev = z_;
    z_ = zr + y_.cwiseQuotient(rho_vec_);
    project(z_);
    y_ += rho_vec_.cwiseProduct(zr - z_);

    const bool check = it % opts_.check_interval == 0 || it == opts_.max_iters;
    const bool adapt = opts_.adaptive_rho && it % opts_.adaptive_rho_interval == 0;
    if (!check && !adapt) continue;

    Ax = As_ * x_;
    Aty = AsT_ * y_;
    const Vec rp_s = Ax - z_;
    const Vec rd_s = Ps_.cwiseProduct(x_) + qs_ + Aty;

    if (check) {
      const double rp = inf_norm(Einv.cwiseProduct(rp_s));
      const double rd = inf_norm(Dinv.cwiseProduct(rd_s)) / cost_scale_;
      const double ax = inf_norm(Einv.cwiseProduct(Ax));
      const double zz = inf_norm(Einv.cwiseProduct(z_));
      const double px = inf_norm(Dinv.cwiseProduct(Ps_.cwiseProduct(x_))) / cost_scale_;
      const double aty = inf_norm(Dinv.cwiseProduct(Aty)) / cost_scale_;
      const double qq = inf_norm(q_unscaled);
      sol.dual_residual = rd;
      if (opts_.verbose && it % (opts_.check_interval * 50) == 0) {
        std::cerr << "admm it=" << it << " rp=" << rp << " rd=" << rd << " rho=" << rho_ << "\n";
      }
      const bool prim_ok = rp <= opts_.tol + opts_.tol * std::max(ax, zz);
      const bool dual_ok = rd <= opts_.tol + opts_.tol * std::max({px, aty, qq});
      if (prim_ok && dual_ok) {
        const auto u = unscaled_x();
        const auto cert = certify_point(u, prob_, opts_.tol);
        if (cert.ok) {
          sol.status = Status::optimal;
          break;
        }
      }
      history.emplace_back(it, rp);
      while (hist_cursor < history.size() && history[hist_cursor].first <= it - opts_.stall_window) {
        best_before = std::min(best_before, history[hist_cursor].second);
        ++hist_cursor;
      }
      if (it >= 2 * opts_.stall_window && std::isfinite(best_before)) {
        double best_recent = std::numeric_limits<double>::infinity();
        for (std::size_t h = hist_cursor; h < history.size(); ++h) {
          best_recent = std::min(best_recent, history[h].second);
        }
        if (best_recent > opts_.stall_threshold &&
            best_recent > best_before * (1.0 - opts_.stall_improvement)) {
          sol.status = Status::infeasible;
          break;
        }
      }
    }
    if (adapt) {
      const double prim_rel =
          inf_norm(rp_s) / std::max({inf_norm(Ax), inf_norm(z_), 1e-10});
      const double dual_rel = inf_norm(rd_s) / std::max({inf_norm(Ps_.cwiseProduct(x_)),
                                                         inf_norm(Aty), inf_norm(qs_), 1e-10});
      const double proposal = rho_ * std::sqrt(prim_rel / std::max(dual_rel, 1e-12));
      if (proposal > rho_ * opts_.adaptive_rho_tolerance ||
          proposal < rho_ / opts_.adaptive_rho_tolerance) {
        set_rho(proposal);
      }
    }
  }

  sol.iterations = std::min(it, opts_.max_iters);
  sol.u = unscaled_x();
  sol.refactorizations = refactorizations_;
  const auto cert = certify_point(sol.u, prob_, opts_.tol);
  sol.primal_residual = std::max(cert.max_equality_residual, cert.max_inequality_violation);
  sol.min_block_eigenvalue = cert.min_block_eigenvalue;
  sol.objective = evaluate_objective(prob_, sol.u);
  if (sol.status == Status::max_iters && cert.ok) sol.status = Status::feasible;
  return sol;
}

}  // namespace

std::string to_string(Status s) {
  switch (s) {
    case Status::optimal:
      return "optimal";
    case Status::feasible:
      return "feasible";
    case Status::infeasible:
      return "infeasible";
    case Status::max_iters:
      return "max_iters";
  }
  return "unknown";
}

void SdpProblem::validate() const {
  if (num_vars < 0) throw InputError("negative variable count");
  auto check_terms = [&](const SparseTerms& t, const std::string& where) {
    for (const auto& [i, c] : t) {
      if (i < 0 || i >= num_vars) throw InputError(where + ": variable index out of range");
      if (!finite(c)) throw InputError(where + ": non-finite coefficient");
    }
  };
  for (const auto& b : blocks) {
    if (b.dim < 1) throw InputError("block " + b.name + " has dimension < 1");
    for (const auto& e : b.entries) {
      if (e.row < 0 || e.col < 0 || e.row >= b.dim || e.col >= b.dim) {
        throw InputError("block " + b.name + ": entry position out of range");
      }
      if (e.var >= num_vars) throw InputError("block " + b.name + ": variable out of range");
      if (!finite(e.coef)) throw InputError("block " + b.name + ": non-finite coefficient");
    }
  }
  for (const auto& r : equalities) {
    check_terms(r.terms, "equality " + r.tag);
    if (!finite(r.rhs)) throw InputError("equality " + r.tag + ": non-finite rhs");
  }
  for (const auto& r : inequalities) {
    check_terms(r.terms, "inequality " + r.tag);
    if (!finite(r.rhs)) throw InputError("inequality " + r.tag + ": non-finite rhs");
  }
  check_terms(objective.linear, "objective");
  check_terms(objective.quadratic, "objective");
  for (const auto& [i, c] : objective.quadratic) {
    if (c < 0.0) throw InputError("quadratic objective coefficient must be >= 0");
  }
}

int SdpProblem::add_block(PsdBlock b) {
  blocks.push_back(std::move(b));
  return static_cast<int>(blocks.size()) - 1;
}

void SdpProblem::add_equality(SparseTerms terms, double rhs, std::string tag) {
  equalities.push_back({std::move(terms), rhs, std::move(tag)});
}

void SdpProblem::add_inequality(SparseTerms terms, double rhs, std::string tag) {
  inequalities.push_back({std::move(terms), rhs, std::move(tag)});
}

double evaluate_objective(const SdpProblem& p, const std::vector<double>& u) {
  double v = dot(p.objective.linear, u);
  for (const auto& [i, c] : p.objective.quadratic) {
    const double x = u[static_cast<std::size_t>(i)];
    v += c * x * x;
  }
  return v;
}

Certificate certify_point(const std::vector<double>& u, const SdpProblem& p, double tol) {
  Certificate c;
  if (static_cast<int>(u.size()) != p.num_vars) {
    throw InputError("certify: point has wrong dimension");
  }
  for (const auto& r : p.equalities) {
    c.max_equality_residual = std::max(c.max_equality_residual, std::abs(dot(r.terms, u) - r.rhs));
  }
  for (const auto& r : p.inequalities) {
    c.max_inequality_violation = std::max(c.max_inequality_violation, dot(r.terms, u) - r.rhs);
  }
  c.min_block_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& b : p.blocks) {
    const double e = min_eig(block_matrix(b, u));
    if (e < c.min_block_eigenvalue) {
      c.min_block_eigenvalue = e;
      c.worst_block = b.name;
    }
  }
  if (p.blocks.empty()) c.min_block_eigenvalue = 0.0;
  c.ok = c.max_equality_residual <= tol && c.max_inequality_violation <= tol &&
         c.min_block_eigenvalue >= -tol;
  return c;
}

bool certify(const SdpSolution& sol, const SdpProblem& p, double tol) {
  if (static_cast<int>(sol.u.size()) != p.num_vars) return false;
  return certify_point(sol.u, p, tol).ok;
}

SdpSolution solve(const SdpProblem& p, const SolveOptions& opts) {
  p.validate();
  if (opts.tol <= 0.0 || opts.max_iters < 1 || opts.rho <= 0.0) {
    throw InputError("solve: tol, max_iters and rho must be positive");
  }
  Admm admm(p, opts);
  return admm.run();
}

namespace {

std::string tag_out(const std::string& t) {
  if (t.empty()) return "-";
  std::string s = t;
  std::replace(s.begin(), s.end(), ' ', '_');
  return s;
}

void write_row(std::ostream& os, const char* kind, const LinearRow& r) {
  os << kind << ' ' << r.rhs << ' ' << tag_out(r.tag) << ' ' << r.terms.size();
  for (const auto& [i, c] : r.terms) os << ' ' << i << ' ' << c;
  os << '\n';
}

}  // namespace

void dump(const SdpProblem& p, std::ostream& os) {
  const auto old = os.precision(17);
  os << "vars " << p.num_vars << '\n';
  for (const auto& b : p.blocks) {
    os << "block " << tag_out(b.name) << ' ' << b.dim << '\n';
    for (const auto& e : b.entries) {
      os << "entry " << e.row << ' ' << e.col << ' ' << e.var << ' ' << e.coef << '\n';
    }
  }
  for (const auto& r : p.equalities) write_row(os, "eq", r);
  for (const auto& r : p.inequalities) write_row(os, "ineq", r);
  for (const auto& [i, c] : p.objective.linear) os << "obj_lin " << i << ' ' << c << '\n';
  for (const auto& [i, c] : p.objective.quadratic) os << "obj_quad " << i << ' ' << c << '\n';
  os.precision(old);
}

SdpProblem load_dump(std::istream& is) {
  SdpProblem p;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    auto fail = [&] { throw InputError("dump line " + std::to_string(lineno) + " malformed"); };
    if (kind == "vars") {
      if (!(ls >> p.num_vars)) fail();
    } else if (kind == "block") {
      PsdBlock b;
      if (!(ls >> b.name >> b.dim)) fail();
      p.blocks.push_back(std::move(b));
    } else if (kind == "entry") {
      if (p.blocks.empty()) fail();
      BlockEntry e;
      if (!(ls >> e.row >> e.col >> e.var >> e.coef)) fail();
      p.blocks.back().entries.push_back(e);
    } else if (kind == "eq" || kind == "ineq") {
      LinearRow r;
      std::size_t k = 0;
      if (!(ls >> r.rhs >> r.tag >> k)) fail();
      if (r.tag == "-") r.tag.clear();
      for (std::size_t t = 0; t < k; ++t) {
        int i;
        double c;
        if (!(ls >> i >> c)) fail();
        r.terms.emplace_back(i, c);
      }
      (kind == "eq" ? p.equalities : p.inequalities).push_back(std::move(r));
    } else if (kind == "obj_lin" || kind == "obj_quad") {
      int i;
      double c;
      if (!(ls >> i >> c)) fail();
      (kind == "obj_lin" ? p.objective.linear : p.objective.quadratic).emplace_back(i, c);
    } else {
      fail();
    }
  }
  p.validate();
  return p;
}

}  // namespace clr::sdp
