#include "clr/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "clr/errors.hpp"

namespace clr {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size() || !std::isfinite(v)) {
    throw InputError("line " + std::to_string(line) + ": '" + s + "' is not a finite number");
  }
  return v;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Reads an object section, rejecting keys without a handler.
void read_section(const Json& j, const std::string& where,
                  const std::map<std::string, std::function<void(const Json&)>>& handlers) {
  if (!j.is_object()) throw InputError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    const auto it = handlers.find(key);
    if (it == handlers.end()) throw InputError("unknown config key '" + where + "." + key + "'");
    try {
      it->second(value);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("config key '" + where + "." + key + "': " + e.what());
    }
  }
}

template <typename T>
std::function<void(const Json&)> set(T& target) {
  return [&target](const Json& v) { target = v.get<T>(); };
}

std::string noise_scaling_name(NoiseScaling s) {
  switch (s) {
    case NoiseScaling::literal: return "literal";
    case NoiseScaling::sum: return "sum";
    case NoiseScaling::mean: return "mean";
  }
  return "literal";
}

NoiseScaling noise_scaling_from(const std::string& s) {
  if (s == "literal") return NoiseScaling::literal;
  if (s == "sum") return NoiseScaling::sum;
  if (s == "mean") return NoiseScaling::mean;
  throw InputError("unknown noise_scaling '" + s + "'");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const SizeError*>(&e)) return 5;
  if (dynamic_cast<const CoverError*>(&e)) return 4;
  if (dynamic_cast<const InputError*>(&e)) return 2;
  return 3;
}

}  // namespace

void write_dataset_csv(const std::vector<Sample>& samples, std::ostream& os) {
  if (samples.empty()) throw InputError("cannot write an empty dataset");
  const auto n = samples.front().x.size();
  const auto d = static_cast<std::size_t>(samples.front().y.size());
  for (std::size_t a = 0; a < n; ++a) os << "x" << a + 1 << ",";
  for (std::size_t t = 0; t < d; ++t) os << "y" << t + 1 << ",";
  os << "z\n";
  for (const auto& s : samples) {
    if (s.x.size() != n || static_cast<std::size_t>(s.y.size()) != d) {
      throw InputError("samples have inconsistent dimensions");
    }
    for (auto b : s.x) os << (b ? '1' : '0') << ',';
    for (Eigen::Index t = 0; t < s.y.size(); ++t) os << fmt_double(s.y[t]) << ',';
    os << fmt_double(s.z) << '\n';
  }
}

std::vector<Sample> read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("dataset is empty");
  const auto header = split(line, ',');
  std::size_t n = 0, d = 0;
  std::size_t c = 0;
  while (c < header.size() && header[c] == "x" + std::to_string(n + 1)) {
    ++n;
    ++c;
  }
  while (c < header.size() && header[c] == "y" + std::to_string(d + 1)) {
    ++d;
    ++c;
  }
  if (c + 1 != header.size() || header[c] != "z" || d == 0) {
    throw InputError("line 1: header must be x1..xn,y1..yd,z with d >= 1");
  }
  std::vector<Sample> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw InputError("line " + std::to_string(lineno) + ": expected " +
                       std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
    }
    Sample s;
    s.x.resize(n);
    for (std::size_t a = 0; a < n; ++a) {
      if (cells[a] != "0" && cells[a] != "1") {
        throw InputError("line " + std::to_string(lineno) + ": attribute x" + std::to_string(a + 1) +
                         " must be 0 or 1");
      }
      s.x[a] = cells[a] == "1" ? 1 : 0;
    }
    s.y.resize(static_cast<Eigen::Index>(d));
    for (std::size_t t = 0; t < d; ++t) s.y[static_cast<Eigen::Index>(t)] = parse_double(cells[n + t], lineno);
    s.z = parse_double(cells[n + d], lineno);
    out.push_back(std::move(s));
  }
  if (out.empty()) throw InputError("dataset has no rows");
  return out;
}

std::vector<Sample> read_dataset_csv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open dataset '" + path + "'");
  return read_dataset_csv(f);
}

Json vector_to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw InputError("expected a numeric array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

Json matrix_to_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_to_json(m.row(r).transpose()));
  return a;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw InputError("expected a nonempty matrix");
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const auto row = vector_from_json(j[r]);
    if (row.size() != m.cols()) throw InputError("ragged matrix");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

Json dnf_to_json(const KDnf& c) {
  Json terms = Json::array();
  for (const auto& t : c.terms) {
    Json lits = Json::array();
    for (const auto& l : t.literals) lits.push_back({l.attribute, static_cast<int>(l.polarity)});
    terms.push_back(lits);
  }
  return terms;
}

KDnf dnf_from_json(const Json& j) {
  if (!j.is_array()) throw InputError("condition must be a list of literal lists");
  KDnf c;
  for (const auto& t : j) {
    std::vector<Literal> lits;
    for (const auto& l : t) {
      if (!l.is_array() || l.size() != 2) throw InputError("literal must be [attribute, polarity]");
      const int pol = l[1].get<int>();
      if (pol != 0 && pol != 1) throw InputError("literal polarity must be 0 or 1");
      lits.push_back({l[0].get<std::size_t>(), static_cast<std::uint8_t>(pol)});
    }
    c.terms.emplace_back(std::move(lits));
  }
  return c;
}

Json truth_to_json(const GroundTruth& t) {
  Json j;
  j["v_star"] = vector_to_json(t.v_star);
  j["c_star"] = dnf_to_json(t.c_star);
  j["r"] = t.r;
  j["inlier_ids"] = t.inlier_ids;
  j["noise_sigma"] = t.noise_sigma;
  return j;
}

GroundTruth truth_from_json(const Json& j) {
  GroundTruth t;
  try {
    t.v_star = vector_from_json(j.at("v_star"));
    t.c_star = dnf_from_json(j.at("c_star"));
    t.r = j.at("r").get<std::size_t>();
    t.inlier_ids = j.at("inlier_ids").get<std::vector<std::size_t>>();
    t.noise_sigma = j.at("noise_sigma").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("ground-truth sidecar: ") + e.what());
  }
  if (t.v_star.size() < 2) throw InputError("v_star needs an intercept and at least one slope");
  t.pi_star = hyperplane_projector(t.v_star);
  return t;
}

ProblemParams ExperimentConfig::default_params() {
  ProblemParams p;
  p.sigma = 0.02;
  // Heterogeneous planted terms need C up to about 60 before the planted point is feasible.
  p.C = 80.0;
  p.alpha = 20.0;
  p.beta = 2000.0;
  p.epsilon_target = 4.0 * p.sigma * p.sigma;
  return p;
}

PlantedSpecOptions ExperimentConfig::default_planted() {
  PlantedSpecOptions o;
  o.noise_sigma = 0.02;
  return o;
}

BuildOptions ExperimentConfig::default_build() {
  BuildOptions b;
  b.noise_scaling = NoiseScaling::mean;
  b.residual_kappa = 2.0;
  return b;
}

sdp::SolveOptions ExperimentConfig::default_solver() {
  sdp::SolveOptions o;
  o.tol = 1e-5;
  o.max_iters = 6000;
  return o;
}

void ExperimentConfig::validate() const {
  ProblemParams p = params;
  p.validate();
  if (!(multiset_c > 0.0)) throw InputError("multiset_c must be positive");
  if (seeds.empty()) throw InputError("config needs at least one seed");
  if (dataset_path.empty() && n_samples == 0) throw InputError("n_samples must be positive");
  if (k < 1) throw InputError("k must be >= 1");
  if (!truth_path.empty() && dataset_path.empty()) {
    throw InputError("truth path given without a dataset path");
  }
}

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  if (!c.dataset_path.empty()) j["dataset"] = c.dataset_path;
  if (!c.truth_path.empty()) j["truth"] = c.truth_path;
  j["generator"] = {
      {"n_attributes", c.planted.n_attributes}, {"k", c.planted.k},
      {"d", c.planted.d}, {"terms", c.planted.terms},
      {"noise_sigma", c.planted.noise_sigma}, {"spectral_gap", c.planted.spectral_gap},
      {"spectrum_lo", c.planted.spectrum_lo}, {"spectrum_hi", c.planted.spectrum_hi},
      {"slope_scale", c.planted.slope_scale}, {"inlier_fraction", c.generate.inlier_fraction},
      {"isotropic", c.generate.isotropic}, {"n_samples", c.n_samples},
      {"outlier", {{"flip_slopes", c.outlier.flip_slopes},
                   {"noise_multiplier", c.outlier.noise_multiplier},
                   {"noise_floor", c.outlier.noise_floor},
                   {"predictor_scale", c.outlier.predictor_scale}}}};
  j["k"] = c.k;
  j["prune_min"] = c.prune_min;
  j["centering"] = c.centering == Centering::mean_zero ? "mean_zero" : "empirical_recenter";
  j["params"] = {{"mu", c.params.mu},       {"sigma", c.params.sigma}, {"C", c.params.C},
                 {"alpha", c.params.alpha}, {"beta", c.params.beta},   {"delta", c.params.delta},
                 {"gamma", c.params.gamma}, {"epsilon_target", c.params.epsilon_target},
                 {"h", c.params.h}};
  j["degree"] = c.params.ell;
  j["build"] = {{"clique_sparsity", c.build.clique_sparsity},
                {"loc_degree_cap", c.build.loc_degree_cap},
                {"q_loc_degree_cap", c.build.q_loc_degree_cap},
                {"noise_scaling", noise_scaling_name(c.build.noise_scaling)},
                {"noise_two_sided", c.build.noise_two_sided},
                {"residual_kappa", c.build.residual_kappa},
                {"idempotency", c.build.idempotency},
                {"trace_rank", c.build.trace_rank}};
  j["trace_row"] = c.trace_row;
  j["q_random"] = c.q_random;
  j["solver"] = {{"tol", c.solver.tol},
                 {"max_iters", c.solver.max_iters},
                 {"rho", c.solver.rho},
                 {"sigma", c.solver.sigma},
                 {"alpha", c.solver.alpha},
                 {"eq_rho_scale", c.solver.eq_rho_scale},
                 {"adaptive_rho", c.solver.adaptive_rho},
                 {"scaling_iters", c.solver.scaling_iters},
                 {"stall_window", c.solver.stall_window},
                 {"stall_improvement", c.solver.stall_improvement},
                 {"stall_threshold", c.solver.stall_threshold}};
  j["objective"] = c.objective == RelaxationObjective::l2_weights ? "l2_weights" : "total_weight";
  j["candidates"] = c.candidates == CandidateMode::term_local ? "term_local" : "weighted_average";
  j["multiset_c"] = c.multiset_c;
  j["rank"] = c.rank ? Json(*c.rank) : Json(nullptr);
  j["frobenius_tol"] = c.frobenius_tol;
  j["predictor_tol"] = c.predictor_tol;
  j["loss_factor"] = c.loss_factor;
  j["seeds"] = c.seeds;
  if (!c.output_path.empty()) j["output"] = c.output_path;
  j["timings"] = c.timings;
  return j;
}

ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  std::string centering = "mean_zero";
  std::string objective = "l2_weights";
  std::string candidates = "term_local";
  std::string noise_scaling = noise_scaling_name(c.build.noise_scaling);
  read_section(j, "config", {
      {"dataset", set(c.dataset_path)},
      {"truth", set(c.truth_path)},
      {"generator", [&](const Json& g) {
         read_section(g, "generator", {
             {"n_attributes", set(c.planted.n_attributes)},
             {"k", set(c.planted.k)},
             {"d", set(c.planted.d)},
             {"terms", set(c.planted.terms)},
             {"noise_sigma", set(c.planted.noise_sigma)},
             {"spectral_gap", set(c.planted.spectral_gap)},
             {"spectrum_lo", set(c.planted.spectrum_lo)},
             {"spectrum_hi", set(c.planted.spectrum_hi)},
             {"slope_scale", set(c.planted.slope_scale)},
             {"inlier_fraction", set(c.generate.inlier_fraction)},
             {"isotropic", set(c.generate.isotropic)},
             {"n_samples", set(c.n_samples)},
             {"outlier", [&](const Json& o) {
                read_section(o, "generator.outlier", {
                    {"flip_slopes", set(c.outlier.flip_slopes)},
                    {"noise_multiplier", set(c.outlier.noise_multiplier)},
                    {"noise_floor", set(c.outlier.noise_floor)},
                    {"predictor_scale", set(c.outlier.predictor_scale)},
                });
              }},
         });
       }},
      {"k", set(c.k)},
      {"prune_min", set(c.prune_min)},
      {"centering", set(centering)},
      {"params", [&](const Json& p) {
         read_section(p, "params", {
             {"mu", set(c.params.mu)},
             {"sigma", set(c.params.sigma)},
             {"C", set(c.params.C)},
             {"alpha", set(c.params.alpha)},
             {"beta", set(c.params.beta)},
             {"delta", set(c.params.delta)},
             {"gamma", set(c.params.gamma)},
             {"epsilon_target", set(c.params.epsilon_target)},
             {"h", set(c.params.h)},
         });
       }},
      {"degree", set(c.params.ell)},
      {"build", [&](const Json& b) {
         read_section(b, "build", {
             {"clique_sparsity", set(c.build.clique_sparsity)},
             {"loc_degree_cap", set(c.build.loc_degree_cap)},
             {"q_loc_degree_cap", set(c.build.q_loc_degree_cap)},
             {"noise_scaling", set(noise_scaling)},
             {"noise_two_sided", set(c.build.noise_two_sided)},
             {"residual_kappa", set(c.build.residual_kappa)},
             {"idempotency", set(c.build.idempotency)},
             {"trace_rank", set(c.build.trace_rank)},
         });
       }},
      {"trace_row", set(c.trace_row)},
      {"q_random", set(c.q_random)},
      {"solver", [&](const Json& s) {
         read_section(s, "solver", {
             {"tol", set(c.solver.tol)},
             {"max_iters", set(c.solver.max_iters)},
             {"rho", set(c.solver.rho)},
             {"sigma", set(c.solver.sigma)},
             {"alpha", set(c.solver.alpha)},
             {"eq_rho_scale", set(c.solver.eq_rho_scale)},
             {"adaptive_rho", set(c.solver.adaptive_rho)},
             {"scaling_iters", set(c.solver.scaling_iters)},
             {"stall_window", set(c.solver.stall_window)},
             {"stall_improvement", set(c.solver.stall_improvement)},
             {"stall_threshold", set(c.solver.stall_threshold)},
         });
       }},
      {"objective", set(objective)},
      {"candidates", set(candidates)},
      {"multiset_c", set(c.multiset_c)},
      {"rank", [&](const Json& r) {
         if (r.is_null()) {
           c.rank.reset();
         } else {
           c.rank = r.get<std::size_t>();
         }
       }},
      {"frobenius_tol", set(c.frobenius_tol)},
      {"predictor_tol", set(c.predictor_tol)},
      {"loss_factor", set(c.loss_factor)},
      {"seeds", set(c.seeds)},
      {"output", set(c.output_path)},
      {"timings", set(c.timings)},
  });
  if (centering == "mean_zero") {
    c.centering = Centering::mean_zero;
  } else if (centering == "empirical_recenter") {
    c.centering = Centering::empirical_recenter;
  } else {
    throw InputError("unknown centering '" + centering + "'");
  }
  if (objective == "l2_weights") {
    c.objective = RelaxationObjective::l2_weights;
  } else if (objective == "total_weight") {
    c.objective = RelaxationObjective::total_weight;
  } else {
    throw InputError("unknown objective '" + objective + "'");
  }
  if (candidates == "term_local") {
    c.candidates = CandidateMode::term_local;
  } else if (candidates == "weighted_average") {
    c.candidates = CandidateMode::weighted_average;
  } else {
    throw InputError("unknown candidate mode '" + candidates + "'");
  }
  c.build.noise_scaling = noise_scaling_from(noise_scaling);
  c.generate.n_attributes = c.planted.n_attributes;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

OracleResult brute_force_oracle(const PreparedDataset& pd, const ProblemParams& params) {
  const std::size_t m = pd.m();
  if (m > 15) throw SizeError("brute-force oracle supports at most 15 terms, got " + std::to_string(m));
  const auto d = static_cast<Eigen::Index>(pd.d());
  const auto da = d + 1;
  std::vector<Matrix> S2(m, Matrix::Zero(da, da));
  std::vector<Vector> Sza(m, Vector::Zero(da));
  std::vector<double> Szz(m, 0.0);
  for (std::size_t i = 0; i < pd.n_prime(); ++i) {
    const auto& y = pd.samples[i].y_ext;
    const auto j = pd.term_of[i];
    const Vector a = y.head(da);
    S2[j] += a * a.transpose();
    Sza[j] += y[da] * a;
    Szz[j] += y[da] * y[da];
  }
  const double need = params.mu * static_cast<double>(pd.n_prime()) - 1e-9;

  OracleResult best;
  double best_mean = 0.0;
  for (std::size_t mask = 1; mask < (std::size_t{1} << m); ++mask) {
    std::size_t covered = 0;
    Matrix A = Matrix::Zero(da, da);
    Vector b = Vector::Zero(da);
    double c = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!((mask >> j) & 1U)) continue;
      covered += pd.terms[j].member_ids.size();
      A += S2[j];
      b += Sza[j];
      c += Szz[j];
    }
    if (static_cast<double>(covered) < need || covered == 0) continue;
    const Vector v = A.completeOrthogonalDecomposition().solve(b);
    const double total = std::max(0.0, c - 2.0 * v.dot(b) + v.dot(A * v));
    const double mean = total / static_cast<double>(covered);
    if (!best.feasible || mean < best_mean) {
      best.feasible = true;
      best_mean = mean;
      best.v = v;
      best.terms.clear();
      for (std::size_t j = 0; j < m; ++j) {
        if ((mask >> j) & 1U) best.terms.push_back(j);
      }
    }
  }
  if (!best.feasible) return best;
  // Exact recomputation for the winner.
  std::vector<std::uint8_t> chosen(m, 0);
  for (auto j : best.terms) {
    chosen[j] = 1;
    best.condition.terms.push_back(Term(pd.terms[j].literals));
  }
  for (std::size_t i = 0; i < pd.n_prime(); ++i) {
    if (!chosen[pd.term_of[i]]) continue;
    const auto& y = pd.samples[i].y_ext;
    const double r = y[da] - best.v.dot(y.head(da));
    best.total_loss += r * r;
    ++best.covered;
  }
  best.loss = best.total_loss / static_cast<double>(best.covered);
  return best;
}

double frobenius_error(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InputError("frobenius_error: shape mismatch");
  }
  return (a - b).norm();
}

Instance load_instance(const ExperimentConfig& cfg, std::uint64_t seed) {
  Instance inst;
  if (!cfg.dataset_path.empty()) {
    inst.samples = read_dataset_csv_file(cfg.dataset_path);
    if (!cfg.truth_path.empty()) {
      std::ifstream f(cfg.truth_path);
      if (!f) throw InputError("cannot open ground truth '" + cfg.truth_path + "'");
      Json j;
      try {
        j = Json::parse(f);
      } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("ground truth is not valid JSON: ") + e.what());
      }
      inst.truth = truth_from_json(j);
    }
    return inst;
  }
  auto spec = random_planted_spec(cfg.planted, mix_seed(seed, 0));
  spec.outlier_model = cfg.outlier;
  auto gd = generate(spec, cfg.n_samples, mix_seed(seed, 1), cfg.generate);
  inst.samples = std::move(gd.samples);
  inst.truth = std::move(gd.truth);
  return inst;
}

PreparedDataset prepare(const ExperimentConfig& cfg, const std::vector<Sample>& samples) {
  if (samples.empty()) throw InputError("dataset is empty");
  auto pd = assign_and_duplicate(samples, enumerate_terms(samples.front().x.size(), cfg.k));
  if (cfg.prune_min > 0) pd = prune_small_terms(pd, cfg.prune_min);
  return extend_and_center(pd, cfg.centering);
}

ProblemParams program_params(const ExperimentConfig& cfg, const PreparedDataset& pd) {
  if (pd.n_prime() == 0) throw InputError("no sample satisfies any term");
  ProblemParams p = cfg.params;
  p.mu = cfg.params.mu * static_cast<double>(pd.n_original()) / static_cast<double>(pd.n_prime());
  return p;
}

CompiledProgram build_for(const ExperimentConfig& cfg, const PreparedDataset& pd, std::uint64_t seed) {
  const auto q = default_q_family(pd.d(), cfg.q_random, mix_seed(seed, 2));
  BuildOptions opts = cfg.build;
  if (cfg.trace_row && opts.trace_rank < 0) {
    opts.trace_rank = static_cast<int>(cfg.rank.value_or(pd.d() + 1));
  }
  return build_program(pd, program_params(cfg, pd), q, cfg.params.ell, opts);
}

std::vector<double> planted_assignment(const CompiledProgram& cp, const PreparedDataset& pd,
                                       const GroundTruth& truth) {
  if (static_cast<std::size_t>(truth.v_star.size()) != pd.d() + 1) {
    throw InputError("ground truth does not match the dataset dimension");
  }
  std::vector<double> w(pd.m(), 0.0);
  for (const auto& t : truth.c_star.terms) {
    bool found = false;
    for (std::size_t j = 0; j < pd.m(); ++j) {
      if (pd.terms[j].literals == t.literals) {
        w[j] = 1.0;
        found = true;
      }
    }
    if (!found) throw InputError("planted term " + t.to_string() + " is not in the prepared family");
  }
  return cp.vars.assignment(truth.v_star, w, std::vector<Matrix>(pd.m(), truth.pi_star));
}

PlantedConstants planted_constants(const PreparedDataset& pd, const GroundTruth& truth,
                                   const std::vector<Matrix>& q_family, double mu_n) {
  PlantedConstants out;
  const Matrix& P = truth.pi_star;
  for (const auto& t : truth.c_star.terms) {
    for (std::size_t j = 0; j < pd.m(); ++j) {
      if (pd.terms[j].literals != t.literals || pd.terms[j].member_ids.empty()) continue;
      const auto& ids = pd.terms[j].member_ids;
      const double size = static_cast<double>(ids.size());
      for (const auto& Q : q_family) {
        const double tau = (Q * P).trace();
        double a2 = 0.0, dev = 0.0;
        for (auto i : ids) {
          const auto& y = pd.samples[i].y_ext;
          const double q = y.dot(Q * y);
          a2 += q * q;
          dev += (q - tau) * (q - tau);
        }
        if (a2 > 0.0) out.C = std::max(out.C, dev / a2);
        const double f = (P * Q * P).squaredNorm();
        if (a2 > 1e-12 * size) {
          out.C = std::max(out.C, f > 0.0 ? a2 / (mu_n * f) : std::numeric_limits<double>::infinity());
        }
      }
      for (Eigen::Index r = 0; r < P.rows(); ++r) {
        double m2 = 0.0, m4 = 0.0;
        for (auto i : ids) {
          const double v = pd.samples[i].y_ext[r];
          m2 += v * v;
          m4 += v * v * v * v;
        }
        out.alpha = std::max(out.alpha, m2 / size);
        out.beta = std::max(out.beta, m4 / size);
      }
    }
  }
  return out;
}

Json residual_report(const CompiledProgram& cp, const std::vector<double>& x) {
  std::map<int, double> worst;
  double overall = 0.0;
  for (const auto& r : substitute(cp, x)) {
    const int id = cp.generators[static_cast<std::size_t>(r.generator)].constraint_id;
    worst[id] = std::max(worst[id], r.residual);
    overall = std::max(overall, r.residual);
  }
  Json per = Json::object();
  for (const auto& [id, v] : worst) per[constraint_name(id)] = v;
  return {{"max_residual", overall}, {"per_constraint", per}};
}

RunOutcome run_end_to_end(const ExperimentConfig& cfg, std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  RunOutcome out;
  Json& rep = out.report;
  rep["schema_version"] = kReportSchemaVersion;
  rep["seed"] = seed;
  rep["config"] = config_to_json(cfg);
  Json timings = Json::object();
  std::string stage = "load";
  auto t0 = clock::now();
  auto lap = [&](const std::string& name) {
    const auto t1 = clock::now();
    timings[name] = std::chrono::duration<double>(t1 - t0).count();
    t0 = t1;
  };

  try {
    const auto inst = load_instance(cfg, seed);
    lap("load");
    stage = "preprocess";
    const auto pd = prepare(cfg, inst.samples);
    const auto params = program_params(cfg, pd);
    rep["dataset"] = {{"n_original", pd.n_original()}, {"n_prime", pd.n_prime()},
                      {"m", pd.m()},                   {"d", pd.d()},
                      {"unassigned", pd.unassigned.size()}, {"mu_prime", params.mu}};
    lap("preprocess");

    stage = "build";
    const auto cp = build_for(cfg, pd, seed);
    const auto sm = summarize(cp);
    rep["program"] = {{"moments", sm.moments}, {"equalities", sm.equalities},
                      {"blocks", sm.blocks},   {"largest_block", sm.largest_block},
                      {"generators", cp.generators.size()}};
    if (inst.truth && cfg.centering == Centering::mean_zero) {
      try {
        rep["planted"] = residual_report(cp, planted_assignment(cp, pd, *inst.truth));
      } catch (const InputError& e) {
        rep["planted"] = {{"error", e.what()}};
      }
    }
    lap("build");

    stage = "solve";
    RelaxationOptions ro;
    ro.solver = cfg.solver;
    ro.objective = cfg.objective;
    const auto rel = solve_relaxation(cp, ro);
    rep["solver"] = {{"status", sdp::to_string(rel.solution.status)},
                     {"iterations", rel.solution.iterations},
                     {"primal_residual", rel.solution.primal_residual},
                     {"dual_residual", rel.solution.dual_residual},
                     {"min_block_eigenvalue", rel.solution.min_block_eigenvalue},
                     {"objective", rel.objective},
                     {"certified", rel.certificate.ok}};
    Json sel = Json::array();
    for (std::size_t j = 0; j < pd.m(); ++j) {
      sel.push_back({{"term", pd.terms[j].to_string()},
                     {"size", cp.term_sizes[j]},
                     {"expectation", rel.selector_expectations[j]},
                     {"weight", cp.term_weight(j, rel.u)}});
    }
    rep["selectors"] = sel;
    lap("solve");

    stage = "rounding";
    const std::size_t rank = cfg.rank.value_or(pd.d() + 1);
    const auto count = default_multiset_size(cfg.params.mu, cfg.multiset_c);
    const auto rr = round_candidates(cp, pd, rel.u, count, mix_seed(seed, 3), rank, cfg.candidates);
    Json cands = Json::array();
    double best_frob = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rr.list.size(); ++k) {
      const auto& c = rr.list[k];
      Json cj = {{"source", c.source}, {"term", c.term}, {"probability", c.probability},
                 {"rank", c.rank}, {"spectral_gap", c.spectral_gap}};
      if (inst.truth) {
        const double e = frobenius_error(c.pi_hat, inst.truth->pi_star);
        cj["frobenius_error"] = e;
        best_frob = std::min(best_frob, e);
      }
      cands.push_back(cj);
    }
    Json models = Json::array();
    for (const auto& mdl : rr.models) models.push_back(vector_to_json(mdl.v_hat));
    rep["rounding"] = {{"multiset", rr.multiset}, {"candidates", cands}, {"models", models}};
    if (inst.truth) rep["rounding"]["best_frobenius_error"] = best_frob;
    lap("rounding");
    if (rr.models.empty()) {
      throw NonIdentifiableError("no candidate yielded a predictor");
    }

    stage = "cover";
    Json success;
    if (inst.truth) {
      success["frobenius"] = best_frob <= cfg.frobenius_tol;
    }
    try {
      const auto pr = best_pair(rr.models, pd, params);
      rep["cover"] = {{"status", "ok"},
                      {"model_index", pr.index},
                      {"v_hat", vector_to_json(pr.model.v_hat)},
                      {"condition", dnf_to_json(pr.condition)},
                      {"condition_text", pr.condition.to_string()},
                      {"coverage", pr.score.coverage},
                      {"covered", pr.score.covered},
                      {"conditional_mean_loss", pr.score.conditional_mean_loss},
                      {"total_loss", pr.score.total_loss}};
      if (inst.truth) {
        const double rel_err = (pr.model.v_hat - inst.truth->v_star).norm() / inst.truth->v_star.norm();
        const double sigma = inst.truth->noise_sigma;
        rep["cover"]["predictor_relative_error"] = rel_err;
        success["predictor"] = rel_err <= cfg.predictor_tol;
        success["loss"] = pr.score.conditional_mean_loss <= cfg.loss_factor * sigma * sigma + 1e-12;
      }
      rep["status"] = "ok";
    } catch (const CoverError& e) {
      rep["cover"] = {{"status", "failed"},
                      {"error", e.what()},
                      {"achieved_coverage", e.achieved_coverage()},
                      {"achieved_loss", e.achieved_loss()}};
      if (inst.truth) {
        success["predictor"] = false;
        success["loss"] = false;
      }
      rep["status"] = "cover_failed";
      out.exit_code = 4;
    }
    lap("cover");

    stage = "oracle";
    if (pd.m() <= 15) {
      const auto orc = brute_force_oracle(pd, params);
      rep["oracle"] = {{"feasible", orc.feasible}};
      if (orc.feasible) {
        rep["oracle"]["condition"] = dnf_to_json(orc.condition);
        rep["oracle"]["v"] = vector_to_json(orc.v);
        rep["oracle"]["loss"] = orc.loss;
        rep["oracle"]["covered"] = orc.covered;
      }
    } else {
      rep["oracle"] = {{"feasible", nullptr}, {"skipped", "m > 15"}};
    }
    lap("oracle");

    if (inst.truth) {
      bool all = true;
      for (const auto& [k, v] : success.items()) all = all && v.get<bool>();
      success["all"] = all;
      rep["success"] = success;
      rep["truth"] = {{"v_star", vector_to_json(inst.truth->v_star)},
                      {"c_star", dnf_to_json(inst.truth->c_star)}};
    }
  } catch (const std::exception& e) {
    rep["status"] = "failed";
    rep["failed_stage"] = stage;
    rep["error"] = e.what();
    out.exit_code = exit_code_for(e);
  }
  if (cfg.timings) rep["timings"] = timings;
  return out;
}

Json aggregate_reports(const std::vector<Json>& reports) {
  Json agg;
  agg["schema_version"] = kReportSchemaVersion;
  std::size_t ok = 0, all = 0, frob = 0, pred = 0, loss = 0, with_truth = 0;
  std::vector<double> frob_errors;
  Json rows = Json::array();
  for (const auto& r : reports) {
    if (r.value("status", "") == "ok") ++ok;
    if (r.contains("success")) {
      ++with_truth;
      const auto& s = r["success"];
      all += s.value("all", false) ? 1 : 0;
      frob += s.value("frobenius", false) ? 1 : 0;
      pred += s.value("predictor", false) ? 1 : 0;
      loss += s.value("loss", false) ? 1 : 0;
    }
    if (r.contains("rounding") && r["rounding"].contains("best_frobenius_error")) {
      frob_errors.push_back(r["rounding"]["best_frobenius_error"].get<double>());
    }
    rows.push_back({{"seed", r.value("seed", std::uint64_t{0})}, {"status", r.value("status", "")}});
  }
  agg["runs"] = reports.size();
  agg["ok"] = ok;
  agg["with_truth"] = with_truth;
  agg["success_all"] = all;
  agg["success_frobenius"] = frob;
  agg["success_predictor"] = pred;
  agg["success_loss"] = loss;
  if (!frob_errors.empty()) {
    std::sort(frob_errors.begin(), frob_errors.end());
    agg["median_best_frobenius_error"] = frob_errors[frob_errors.size() / 2];
  }
  agg["per_seed"] = rows;
  return agg;
}

std::string aggregate_csv(const std::vector<Json>& reports) {
  std::ostringstream os;
  os << "seed,status,best_frobenius_error,predictor_relative_error,conditional_mean_loss,coverage,success\n";
  auto num = [](const Json& obj, const char* key) {
    return obj.is_object() && obj.contains(key) && obj[key].is_number() ? fmt_double(obj[key].get<double>())
                                                                        : std::string();
  };
  for (const auto& r : reports) {
    const Json empty = Json::object();
    const Json& rounding = r.contains("rounding") ? r["rounding"] : empty;
    const Json& cover = r.contains("cover") ? r["cover"] : empty;
    os << r.value("seed", std::uint64_t{0}) << ',' << r.value("status", "") << ','
       << num(rounding, "best_frobenius_error") << ',' << num(cover, "predictor_relative_error") << ','
       << num(cover, "conditional_mean_loss") << ',' << num(cover, "coverage") << ','
       << (r.contains("success") ? (r["success"].value("all", false) ? "1" : "0") : "") << '\n';
  }
  return os.str();
}

}  // namespace clr
