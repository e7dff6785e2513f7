#include "clr/program_builder.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

#include "clr/errors.hpp"

namespace clr {

using sos::Monomial;
using sos::Polynomial;
using sos::VarId;

ProgramVariables::ProgramVariables(std::size_t d, std::size_t m) : d_(d), m_(m) {}

std::size_t ProgramVariables::count() const { return (d_ + 1) + m_ * (1 + pi_entries()); }

VarId ProgramVariables::v(std::size_t t) const {
  if (t > d_) throw InputError("v index out of range (the last coordinate is pinned)");
  return static_cast<VarId>(t);
}

VarId ProgramVariables::w(std::size_t j) const {
  if (j >= m_) throw InputError("term index out of range");
  return static_cast<VarId>((d_ + 1) + j * (1 + pi_entries()));
}

VarId ProgramVariables::pi(std::size_t j, std::size_t r, std::size_t s) const {
  const auto n = d_ext();
  if (r >= n || s >= n) throw InputError("Pi index out of range");
  if (r > s) std::swap(r, s);
  // Row-major upper triangle.
  const std::size_t off = r * n - r * (r - 1) / 2 + (s - r);
  return static_cast<VarId>(w(j) + 1 + off);
}

Polynomial ProgramVariables::v_poly(std::size_t t) const {
  if (t == d_ + 1) return Polynomial::constant(-1.0);
  return Polynomial::variable(v(t));
}

Polynomial ProgramVariables::pi_poly(std::size_t j, std::size_t r, std::size_t s) const {
  return Polynomial::variable(pi(j, r, s));
}

std::vector<VarId> ProgramVariables::clique(std::size_t j) const {
  std::vector<VarId> out;
  for (std::size_t t = 0; t <= d_; ++t) out.push_back(v(t));
  out.push_back(w(j));
  for (std::size_t k = 0; k < pi_entries(); ++k) out.push_back(w(j) + 1 + static_cast<VarId>(k));
  return out;
}

std::vector<VarId> ProgramVariables::all() const {
  std::vector<VarId> out(count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<VarId>(i);
  return out;
}

std::vector<VarId> ProgramVariables::selectors() const {
  std::vector<VarId> out;
  for (std::size_t j = 0; j < m_; ++j) out.push_back(w(j));
  return out;
}

std::string ProgramVariables::name(VarId id) const {
  if (id <= d_) return "v" + std::to_string(id);
  const std::size_t rel = id - (d_ + 1);
  const std::size_t j = rel / (1 + pi_entries());
  const std::size_t k = rel % (1 + pi_entries());
  if (k == 0) return "w" + std::to_string(j);
  const auto n = d_ext();
  std::size_t off = k - 1;
  for (std::size_t r = 0; r < n; ++r) {
    if (off < n - r) return "Pi" + std::to_string(j) + "_" + std::to_string(r) + std::to_string(r + off);
    off -= n - r;
  }
  return "?";
}

std::vector<double> ProgramVariables::assignment(const Vector& v_free, const std::vector<double>& ws,
                                                 const std::vector<Matrix>& pis) const {
  if (static_cast<std::size_t>(v_free.size()) != d_ + 1 || ws.size() != m_ || pis.size() != m_) {
    throw InputError("assignment has wrong dimensions");
  }
  std::vector<double> x(count(), 0.0);
  for (std::size_t t = 0; t <= d_; ++t) x[v(t)] = v_free[static_cast<Eigen::Index>(t)];
  for (std::size_t j = 0; j < m_; ++j) {
    x[w(j)] = ws[j];
    for (std::size_t r = 0; r < d_ext(); ++r) {
      for (std::size_t s = r; s < d_ext(); ++s) {
        x[pi(j, r, s)] = pis[j](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
      }
    }
  }
  return x;
}

std::string constraint_name(int id) {
  switch (id) {
    case kCentering: return "centering";
    case kRegression: return "regression";
    case kBudget: return "budget";
    case kBoolean: return "boolean";
    case kSubspace: return "subspace";
    case kNoise: return "noise";
    case kHypercontractive: return "hypercontractive";
    case kVariance: return "variance";
    case kSecondMoment: return "second_moment";
    case kFourthMoment: return "fourth_moment";
    case kNormalization: return "normalization";
    case kIdempotent: return "idempotent";
    case kTrace: return "trace";
    case kResidualVariance: return "residual_variance";
    default: return "constraint" + std::to_string(id);
  }
}

int CompiledProgram::moment_var(const Monomial& m) const { return moments->find(m); }

double CompiledProgram::expect(const Polynomial& p, const std::vector<double>& u) const {
  double acc = 0.0;
  for (const auto& [m, c] : p.sorted_terms()) {
    const int i = moments->find(m);
    if (i < 0) throw InputError("moment " + m.to_string() + " is not part of the program");
    acc += c * u[static_cast<std::size_t>(i)];
  }
  return acc;
}

double CompiledProgram::term_weight(std::size_t j, const std::vector<double>& u) const {
  const int i = moments->find(Monomial::var(vars.w(j)));
  return static_cast<double>(term_sizes.at(j)) * u[static_cast<std::size_t>(i)] / mu_n;
}

std::vector<double> CompiledProgram::point_moments(const std::vector<double>& x) const {
  std::vector<double> u(moments->size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = moments->at(static_cast<int>(i)).evaluate(x);
  return u;
}

sos::PseudoDistribution CompiledProgram::pseudo_distribution(const std::vector<double>& u) const {
  sos::MomentVector mv(moments, u, ell, vars.all());
  return sos::PseudoDistribution::with_blocks(std::move(mv), moment_blocks);
}

std::size_t CompiledProgram::max_degree() const {
  std::size_t deg = 0;
  for (const auto& r : rows) {
    const auto& g = generators[static_cast<std::size_t>(r.generator)].poly;
    std::size_t extra = r.multiplier.degree();
    for (const auto& b : r.basis) extra = std::max<std::size_t>(extra, 2 * b.degree());
    deg = std::max<std::size_t>(deg, g.degree() + extra);
  }
  for (const auto& b : moment_blocks) {
    for (const auto& m : b) deg = std::max<std::size_t>(deg, 2 * m.degree());
  }
  return deg;
}

namespace {

struct TermData {
  std::size_t size = 0;
  Vector S1;       // sum of a_i, a_i = [1, y_i]
  double Sz = 0;   // sum of z_i
  Matrix S2;       // sum a_i a_i'
  Vector Sza;      // sum z_i a_i
  double Szz = 0;  // sum z_i^2
  Matrix span;     // orthonormal basis of span{a_i}, one column per direction
  std::vector<Vector> points;  // full extended samples
};

TermData term_data(const PreparedDataset& pd, std::size_t j) {
  const auto d = pd.d();
  const auto da = static_cast<Eigen::Index>(d + 1);
  TermData t;
  t.S1 = Vector::Zero(da);
  t.S2 = Matrix::Zero(da, da);
  t.Sza = Vector::Zero(da);
  const auto& ids = pd.terms[j].member_ids;
  t.size = ids.size();
  Matrix stacked(static_cast<Eigen::Index>(ids.size()), da);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto& y = pd.samples[ids[k]].y_ext;
    const Vector a = y.head(da);
    const double z = y[da];
    t.S1 += a;
    t.Sz += z;
    t.S2 += a * a.transpose();
    t.Sza += z * a;
    t.Szz += z * z;
    stacked.row(static_cast<Eigen::Index>(k)) = a.transpose();
    t.points.push_back(y);
  }
  if (!ids.empty()) {
    Eigen::JacobiSVD<Matrix> svd(stacked, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cut = 1e-10 * std::max(1.0, sv[0]);
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv[rank] > cut) ++rank;
    t.span = svd.matrixV().leftCols(rank);
  } else {
    t.span = Matrix(da, 0);
  }
  return t;
}

class Builder {
 public:
  Builder(const PreparedDataset& pd, const ProblemParams& params, const std::vector<Matrix>& q,
          int ell, const BuildOptions& opts)
      : pd_(pd), params_(params), q_(q), ell_(ell), opts_(opts),
        cp_{sdp::SdpProblem{}, ProgramVariables(pd.d(), pd.m()), nullptr, {}, {}, {}, {}, {}, {}, {}, 0, 0.0, ell, params, opts} {}

  CompiledProgram build();

 private:
  void make_moments();
  void make_generators();
  void compile();
  std::vector<VarId> scope(int term) const;
  int add_generator(int id, int term, int q, bool equality, Polynomial p, std::string label);
  sdp::SparseTerms row_terms(const Polynomial& g, const Monomial& mult, int gen) const;
  void compile_equality(int gen, const std::vector<Monomial>& multipliers);
  void compile_localizing(int gen, int cap);

  const PreparedDataset& pd_;
  const ProblemParams& params_;
  const std::vector<Matrix>& q_;
  int ell_;
  BuildOptions opts_;
  CompiledProgram cp_;
  std::vector<TermData> data_;
};

std::vector<VarId> Builder::scope(int term) const {
  if (!opts_.clique_sparsity) return cp_.vars.all();
  if (term < 0) return cp_.vars.selectors();
  return cp_.vars.clique(static_cast<std::size_t>(term));
}

void Builder::make_moments() {
  auto index = std::make_shared<sos::MonomialIndex>();
  const auto& vars = cp_.vars;
  if (opts_.clique_sparsity) {
    for (std::size_t j = 0; j < vars.m(); ++j) {
      const auto cl = vars.clique(j);
      for (const auto& mono : sos::monomial_basis(cl, ell_)) index->insert(mono);
      cp_.moment_blocks.push_back(sos::monomial_basis(cl, ell_ / 2));
    }
    const auto sel = vars.selectors();
    for (const auto& mono : sos::monomial_basis(sel, ell_)) index->insert(mono);
    if (vars.m() > 1) cp_.moment_blocks.push_back(sos::monomial_basis(sel, ell_ / 2));
    if (vars.m() == 0) {
      std::vector<VarId> vonly;
      for (std::size_t t = 0; t <= pd_.d(); ++t) vonly.push_back(vars.v(t));
      for (const auto& mono : sos::monomial_basis(vonly, ell_)) index->insert(mono);
      cp_.moment_blocks.push_back(sos::monomial_basis(vonly, ell_ / 2));
    }
  } else {
    const auto all = vars.all();
    for (const auto& mono : sos::monomial_basis(all, ell_)) index->insert(mono);
    cp_.moment_blocks.push_back(sos::monomial_basis(all, ell_ / 2));
  }
  cp_.moments = index;
  cp_.problem.num_vars = static_cast<int>(index->size());
}

int Builder::add_generator(int id, int term, int q, bool equality, Polynomial p, std::string label) {
  if (static_cast<int>(p.degree()) > ell_) {
    throw DegreeError("constraint " + std::to_string(id) + " (" + constraint_name(id) +
                      ") has degree " + std::to_string(p.degree()) + " > ell = " +
                      std::to_string(ell_));
  }
  cp_.generators.push_back({id, term, q, equality, std::move(p), std::move(label)});
  return static_cast<int>(cp_.generators.size()) - 1;
}

void Builder::make_generators() {
  const auto& vars = cp_.vars;
  const std::size_t d = pd_.d();
  const std::size_t n = vars.d_ext();
  const double muN = cp_.mu_n;
  const Polynomial one = Polynomial::constant(1.0);

  // Budget.
  {
    Polynomial b = Polynomial::constant(-muN);
    for (std::size_t j = 0; j < vars.m(); ++j) {
      b.add_term(Monomial::var(vars.w(j)), static_cast<double>(data_[j].size));
    }
    add_generator(kBudget, -1, -1, true, std::move(b), "budget");
  }

  for (std::size_t j = 0; j < vars.m(); ++j) {
    const auto& td = data_[j];
    const int jj = static_cast<int>(j);
    const Polynomial wj = Polynomial::variable(vars.w(j));
    const double Ij = static_cast<double>(td.size);
    auto P = [&](std::size_t r, std::size_t s) { return vars.pi_poly(j, r, s); };

    add_generator(kBoolean, jj, -1, true, wj * wj - wj, "w^2 - w");

    // Denoised point for direction a: [a, <v_free, a>].
    for (Eigen::Index c = 0; c < td.span.cols(); ++c) {
      const Vector a = td.span.col(c);
      std::vector<Polynomial> ytil(n);
      for (std::size_t s = 0; s <= d; ++s) ytil[s] = Polynomial::constant(a[static_cast<Eigen::Index>(s)]);
      for (std::size_t t = 0; t <= d; ++t) ytil[d + 1] += a[static_cast<Eigen::Index>(t)] * vars.v_poly(t);
      for (std::size_t r = 0; r < n; ++r) {
        Polynomial row;
        for (std::size_t s = 0; s < n; ++s) {
          Polynomial coef = P(r, s);
          if (r == s) coef -= one;
          row += coef * ytil[s];
        }
        add_generator(kSubspace, jj, -1, true, wj * row,
                      "subspace r=" + std::to_string(r) + " dir=" + std::to_string(c));
      }
    }

    // Sum of residuals eps_i = z_i - <v_free, a_i>.
    Polynomial eps_sum = Polynomial::constant(td.Sz);
    for (std::size_t t = 0; t <= d; ++t) eps_sum -= td.S1[static_cast<Eigen::Index>(t)] * vars.v_poly(t);
    double bound = 0.0;
    switch (opts_.noise_scaling) {
      case NoiseScaling::literal: bound = params_.sigma / Ij; break;
      case NoiseScaling::sum: bound = params_.sigma; break;
      case NoiseScaling::mean: bound = params_.sigma * Ij; break;
    }
    add_generator(kNoise, jj, -1, false, wj * (Polynomial::constant(bound) - eps_sum), "noise upper");
    if (opts_.noise_two_sided) {
      add_generator(kNoise, jj, -1, false, wj * (Polynomial::constant(bound) + eps_sum), "noise lower");
    }

    if (opts_.residual_kappa > 0.0) {
      Polynomial rss = Polynomial::constant(td.Szz);
      for (std::size_t t = 0; t <= d; ++t) {
        const auto et = static_cast<Eigen::Index>(t);
        rss -= 2.0 * td.Sza[et] * vars.v_poly(t);
        for (std::size_t u = 0; u <= d; ++u) {
          rss += td.S2(et, static_cast<Eigen::Index>(u)) * (vars.v_poly(t) * vars.v_poly(u));
        }
      }
      const double cap = opts_.residual_kappa * params_.sigma * params_.sigma * Ij;
      add_generator(kResidualVariance, jj, -1, false, wj * (Polynomial::constant(cap) - rss),
                    "residual variance");
    }

    for (std::size_t qi = 0; qi < q_.size(); ++qi) {
      const Matrix& Q = q_[qi];
      double A1 = 0.0, A2 = 0.0;
      for (const auto& y : td.points) {
        const double qv = y.dot(Q * y);
        A1 += qv;
        A2 += qv * qv;
      }
      Polynomial tau;
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t s = 0; s < n; ++s) {
          const double c = Q(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s));
          if (c != 0.0) tau += c * P(r, s);
        }
      }
      // C A2 - sum_i (q_i - tau)^2 = (C - 1) A2 + 2 tau A1 - |I_j| tau^2
      Polynomial hc = Polynomial::constant((params_.C - 1.0) * A2) + (2.0 * A1) * tau - Ij * (tau * tau);
      add_generator(kHypercontractive, jj, static_cast<int>(qi), false, (1.0 / muN) * (wj * hc),
                    "hypercontractive q=" + std::to_string(qi));

      // ||Pi Q Pi||_F^2 reduces to tr(Q Pi Q Pi) modulo Pi^2 = Pi.
      std::vector<Polynomial> QP(n * n);
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t c = 0; c < n; ++c) {
          Polynomial e;
          for (std::size_t b = 0; b < n; ++b) {
            const double qab = Q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
            if (qab != 0.0) e += qab * P(b, c);
          }
          QP[a * n + c] = std::move(e);
        }
      }
      Polynomial tr;
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t c = 0; c < n; ++c) tr += QP[a * n + c] * QP[c * n + a];
      }
      add_generator(kVariance, jj, static_cast<int>(qi), false,
                    params_.C * tr - (A2 / muN) * wj, "variance q=" + std::to_string(qi));
    }

    for (std::size_t r = 0; r < n; ++r) {
      double m2 = 0.0, m4 = 0.0;
      for (const auto& y : td.points) {
        const double v2 = y[static_cast<Eigen::Index>(r)] * y[static_cast<Eigen::Index>(r)];
        m2 += v2;
        m4 += v2 * v2;
      }
      add_generator(kSecondMoment, jj, -1, false, wj * (Ij * params_.alpha - m2),
                    "second moment r=" + std::to_string(r));
      add_generator(kFourthMoment, jj, -1, false, wj * (Ij * params_.beta - m4),
                    "fourth moment r=" + std::to_string(r));
    }

    if (opts_.idempotency) {
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t s = r; s < n; ++s) {
          Polynomial e = Polynomial() - P(r, s);
          for (std::size_t t = 0; t < n; ++t) e += P(r, t) * P(t, s);
          add_generator(kIdempotent, jj, -1, true, std::move(e),
                        "idempotent " + std::to_string(r) + std::to_string(s));
        }
      }
    }
    if (opts_.trace_rank >= 0) {
      Polynomial tr = Polynomial::constant(-static_cast<double>(opts_.trace_rank));
      for (std::size_t r = 0; r < n; ++r) tr += P(r, r);
      add_generator(kTrace, jj, -1, true, std::move(tr), "trace");
    }
  }
}

sdp::SparseTerms Builder::row_terms(const Polynomial& g, const Monomial& mult, int gen) const {
  sdp::SparseTerms out;
  for (const auto& [mono, c] : g.sorted_terms()) {
    const auto prod = mono * mult;
    const int idx = cp_.moments->find(prod);
    if (idx < 0) {
      const auto& G = cp_.generators[static_cast<std::size_t>(gen)];
      throw DegreeError("constraint " + std::to_string(G.constraint_id) + " (" +
                        constraint_name(G.constraint_id) + ") needs moment " + prod.to_string() +
                        " outside the relaxation");
    }
    out.emplace_back(idx, c);
  }
  return out;
}

void Builder::compile_equality(int gen, const std::vector<Monomial>& multipliers) {
  const auto& g = cp_.generators[static_cast<std::size_t>(gen)].poly;
  if (g.is_zero()) return;
  for (const auto& m : multipliers) {
    auto terms = row_terms(g, m, gen);
    double mx = 0.0;
    for (const auto& t : terms) mx = std::max(mx, std::abs(t.second));
    for (auto& t : terms) t.second /= mx;
    cp_.rows.push_back({gen, true, static_cast<int>(cp_.problem.equalities.size()), m, {}});
    cp_.problem.add_equality(std::move(terms), 0.0,
                             constraint_name(cp_.generators[static_cast<std::size_t>(gen)].constraint_id));
  }
}

void Builder::compile_localizing(int gen, int cap) {
  const auto& G = cp_.generators[static_cast<std::size_t>(gen)];
  const int bdeg = std::min((ell_ - static_cast<int>(G.poly.degree())) / 2, cap);
  auto basis = sos::monomial_basis(scope(G.term), std::max(bdeg, 0));
  sdp::PsdBlock blk;
  blk.name = constraint_name(G.constraint_id) + "_t" + std::to_string(G.term) +
             (G.q_index >= 0 ? "_q" + std::to_string(G.q_index) : std::string());
  blk.dim = static_cast<int>(basis.size());
  double mx = 0.0;
  for (int a = 0; a < blk.dim; ++a) {
    for (int b = a; b < blk.dim; ++b) {
      const auto ab = basis[static_cast<std::size_t>(a)] * basis[static_cast<std::size_t>(b)];
      for (const auto& [idx, c] : row_terms(G.poly, ab, gen)) {
        blk.entries.push_back({b, a, idx, c});
        mx = std::max(mx, std::abs(c));
      }
    }
  }
  if (mx > 0.0) {
    for (auto& e : blk.entries) e.coef /= mx;
  }
  cp_.rows.push_back({gen, false, static_cast<int>(cp_.problem.blocks.size()), Monomial::one(), basis});
  cp_.problem.add_block(std::move(blk));
}

void Builder::compile() {
  const auto& vars = cp_.vars;
  // Moment blocks and normalization.
  for (std::size_t k = 0; k < cp_.moment_blocks.size(); ++k) {
    const auto& basis = cp_.moment_blocks[k];
    sdp::PsdBlock blk;
    blk.name = "moment" + std::to_string(k);
    blk.dim = static_cast<int>(basis.size());
    for (int a = 0; a < blk.dim; ++a) {
      for (int b = a; b < blk.dim; ++b) {
        const int idx = cp_.moments->find(basis[static_cast<std::size_t>(a)] * basis[static_cast<std::size_t>(b)]);
        blk.entries.push_back({b, a, idx, 1.0});
      }
    }
    cp_.moment_block_ids.push_back(cp_.problem.add_block(std::move(blk)));
  }
  cp_.problem.add_equality({{cp_.moments->find(Monomial::one()), 1.0}}, 1.0,
                           constraint_name(kNormalization));

  for (int gen = 0; gen < static_cast<int>(cp_.generators.size()); ++gen) {
    const auto& G = cp_.generators[static_cast<std::size_t>(gen)];
    const int slack = ell_ - static_cast<int>(G.poly.degree());
    if (G.equality) {
      compile_equality(gen, sos::monomial_basis(scope(G.term), slack));
      if (opts_.clique_sparsity && G.constraint_id == kBoolean && vars.m() > 1) {
        // Cross-term products live only in the selector block.
        std::vector<Monomial> extra;
        const auto own = vars.w(static_cast<std::size_t>(G.term));
        for (const auto& m : sos::monomial_basis(vars.selectors(), slack)) {
          bool only_own = true;
          for (const auto& [v, e] : m.powers()) only_own = only_own && v == own;
          if (!only_own) extra.push_back(m);
        }
        compile_equality(gen, extra);
      }
    } else {
      const bool q_row = G.constraint_id == kHypercontractive || G.constraint_id == kVariance;
      compile_localizing(gen, q_row ? opts_.q_loc_degree_cap : opts_.loc_degree_cap);
    }
  }
}

CompiledProgram Builder::build() {
  if (ell_ < 4 || ell_ % 2 != 0) {
    throw DegreeError("ell = " + std::to_string(ell_) +
                      " is too small: constraint 5 (subspace) has degree 3 and needs ell >= 4");
  }
  params_.validate();
  cp_.q_family = q_;
  for (std::size_t j = 0; j < pd_.m(); ++j) {
    data_.push_back(term_data(pd_, j));
    cp_.term_sizes.push_back(data_.back().size);
  }
  cp_.n_prime = pd_.n_prime();
  cp_.mu_n = params_.mu * static_cast<double>(pd_.n_prime());
  if (cp_.mu_n <= 0.0) throw InputError("budget mu N' must be positive (empty dataset?)");
  cp_.handled_elsewhere = {kCentering, kRegression};
  make_moments();
  make_generators();
  compile();
  if (static_cast<int>(cp_.max_degree()) > ell_) {
    throw DegreeError("degree audit failed: compiled degree " + std::to_string(cp_.max_degree()) +
                      " exceeds ell");
  }
  return std::move(cp_);
}

}  // namespace

CompiledProgram build_program(const PreparedDataset& pd, const ProblemParams& params,
                              const std::vector<Matrix>& q_family, int ell, const BuildOptions& opts) {
  const auto n = static_cast<Eigen::Index>(pd.d() + 2);
  for (const auto& Q : q_family) {
    if (Q.rows() != n || Q.cols() != n) throw InputError("q_family matrix has wrong shape");
    if (!Q.isApprox(Q.transpose(), 1e-12)) throw InputError("q_family matrix is not symmetric");
  }
  Builder b(pd, params, q_family, ell, opts);
  return b.build();
}

std::vector<Matrix> default_q_family(std::size_t d, std::size_t count_random, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(d + 2);
  std::vector<Matrix> out;
  for (Eigen::Index r = 0; r < n; ++r) {
    Matrix Q = Matrix::Zero(n, n);
    Q(r, r) = 1.0;
    out.push_back(Q);
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index s = r + 1; s < n; ++s) {
      Matrix Q = Matrix::Zero(n, n);
      Q(r, s) = Q(s, r) = 0.5;
      out.push_back(Q / Q.norm());
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (std::size_t k = 0; k < count_random; ++k) {
    Matrix A(n, n);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = g(rng);
    Matrix Q = 0.5 * (A + A.transpose());
    out.push_back(Q / Q.norm());
  }
  return out;
}

std::vector<RowResidual> substitute(const CompiledProgram& cp, const std::vector<double>& x) {
  std::vector<double> gval(cp.generators.size());
  for (std::size_t g = 0; g < gval.size(); ++g) gval[g] = cp.generators[g].poly.evaluate(x);
  std::vector<RowResidual> out;
  out.reserve(cp.rows.size());
  for (std::size_t r = 0; r < cp.rows.size(); ++r) {
    const auto& row = cp.rows[r];
    const double g = gval[static_cast<std::size_t>(row.generator)];
    const double res = row.equality ? std::abs(g * row.multiplier.evaluate(x)) : std::max(0.0, -g);
    out.push_back({static_cast<int>(r), row.generator, res});
  }
  return out;
}

double max_residual(const std::vector<RowResidual>& r) {
  double m = 0.0;
  for (const auto& x : r) m = std::max(m, x.residual);
  return m;
}

ProgramSummary summarize(const CompiledProgram& cp) {
  ProgramSummary s;
  s.variables = cp.vars.count();
  s.moments = cp.moments->size();
  s.equalities = cp.problem.equalities.size();
  s.blocks = cp.problem.blocks.size();
  s.inequalities = cp.problem.inequalities.size();
  for (const auto& b : cp.problem.blocks) s.largest_block = std::max<std::size_t>(s.largest_block, b.dim);
  s.rows_per_constraint.assign(kResidualVariance + 1, 0);
  s.rows_per_constraint[kNormalization] = 1;
  for (const auto& r : cp.rows) {
    ++s.rows_per_constraint[static_cast<std::size_t>(cp.generators[static_cast<std::size_t>(r.generator)].constraint_id)];
  }
  return s;
}

}  // namespace clr
