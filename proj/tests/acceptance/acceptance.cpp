// Acceptance suite: one PASS/FAIL line per criterion on stdout, details on stderr.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "clr/dnf_cover.hpp"
#include "clr/errors.hpp"
#include "clr/harness.hpp"
#include "clr/preprocess.hpp"
#include "clr/program_builder.hpp"
#include "clr/sdp/sdp_problem.hpp"
#include "clr/solver_pipeline.hpp"
#include "clr/sos/moments.hpp"

using namespace clr;

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

bool report_line(int id, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  return ok;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Criterion 1 ---------------------------------------------------------------

bool moments_suite() {
  const auto t0 = clock_type::now();
  std::mt19937_64 rng(20240101);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  int violations = 0, bad_psd = 0, checks = 0;
  double worst_eig = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 1000; ++trial) {
    const int nvars = 1 + trial % 3;
    const int ell = 2 * (1 + (trial / 3) % 3);
    const int kind = (trial / 9) % 3;
    std::vector<sos::VarId> vars;
    for (int v = 0; v < nvars; ++v) vars.push_back(v);
    std::vector<std::vector<double>> pts;
    std::vector<double> weights;
    if (kind == 2) {
      const int atoms = 1 + static_cast<int>(rng() % 4);
      double total = 0.0;
      for (int a = 0; a < atoms; ++a) {
        std::vector<double> p(static_cast<std::size_t>(nvars));
        for (auto& c : p) c = 2.0 * unif(rng);
        pts.push_back(p);
        weights.push_back(0.1 + std::abs(unif(rng)));
        total += weights.back();
      }
      for (auto& w : weights) w /= total;
    } else {
      for (int i = 0; i < 60; ++i) {
        std::vector<double> p(static_cast<std::size_t>(nvars));
        for (auto& c : p) c = kind == 0 ? g(rng) : unif(rng);
        pts.push_back(p);
      }
    }
    const auto u = sos::MomentVector::from_points(vars, ell, pts, weights);
    const double eig = sos::min_eigenvalue(sos::moment_matrix(u, ell));
    worst_eig = std::min(worst_eig, eig);
    if (eig < -1e-8) ++bad_psd;
    const auto rep = sos::check_pseudo_inequalities(sos::PseudoDistribution::unchecked(u), 5,
                                                    static_cast<std::uint64_t>(trial), 1e-8);
    violations += static_cast<int>(rep.violations.size());
    checks += rep.checks;
  }
  const double secs = seconds_since(t0);
  return report_line(1, bad_psd == 0 && violations == 0 && secs <= 60.0,
                     "1000 moment vectors, " + std::to_string(checks) + " inequality checks, " +
                         std::to_string(violations) + " violations, min eigenvalue " +
                         fmt("%.3g", worst_eig) + ", " + fmt("%.1f s", secs));
}

// Criterion 2 ---------------------------------------------------------------

sdp::SdpProblem two_by_two() {
  sdp::SdpProblem p;
  p.num_vars = 3;
  p.add_block({"X", 2, {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}, {1, 1, 2, 1.0}}});
  return p;
}

bool sdp_suite() {
  const auto t0 = clock_type::now();
  sdp::SolveOptions o;
  o.tol = 1e-9;
  o.max_iters = 50000;
  double worst = 0.0;
  bool statuses = true;

  // max X12 with unit diagonal: -1
  auto a = two_by_two();
  a.add_equality({{0, 1.0}}, 1.0);
  a.add_equality({{2, 1.0}}, 1.0);
  a.objective.linear = {{1, 1.0}};
  auto sa = sdp::solve(a, o);
  worst = std::max(worst, std::abs(sa.objective + 1.0));
  statuses = statuses && sa.status == sdp::Status::optimal;

  // min X11 with X12 = 1, X22 = 2: 1/2
  auto b = two_by_two();
  b.add_equality({{1, 1.0}}, 1.0);
  b.add_equality({{2, 1.0}}, 2.0);
  b.objective.linear = {{0, 1.0}};
  auto sb = sdp::solve(b, o);
  worst = std::max(worst, std::abs(sb.objective - 0.5));
  statuses = statuses && sb.status == sdp::Status::optimal;

  // min u^2 - 2u with u <= 1/2: -3/4
  sdp::SdpProblem c;
  c.num_vars = 1;
  c.objective.linear = {{0, -2.0}};
  c.objective.quadratic = {{0, 1.0}};
  c.add_inequality({{0, 1.0}}, 0.5);
  auto sc = sdp::solve(c, o);
  worst = std::max(worst, std::abs(sc.objective + 0.75));
  statuses = statuses && sc.status == sdp::Status::optimal;

  auto d = two_by_two();
  d.add_equality({{0, 1.0}}, 1.0);
  d.add_equality({{2, 1.0}}, 1.0);
  d.add_equality({{1, 1.0}}, 2.0);
  const bool flagged = sdp::solve(d).status == sdp::Status::infeasible;

  const double secs = seconds_since(t0);
  return report_line(2, statuses && worst <= 1e-6 && flagged && secs <= 10.0,
                     "max |objective - closed form| " + fmt("%.2e", worst) + ", infeasible " +
                         (flagged ? "flagged" : "missed") + ", " + fmt("%.2f s", secs));
}

// Criteria 3 and 4 ----------------------------------------------------------

// Constants raised until the planted point satisfies every row with margin.
ExperimentConfig calibrated(ExperimentConfig cfg, const PreparedDataset& pd, const GroundTruth& truth,
                            std::uint64_t seed, PlantedConstants* out = nullptr) {
  const auto cp0 = build_for(cfg, pd, seed);
  const auto k = planted_constants(pd, truth, cp0.q_family, cp0.mu_n);
  if (out) *out = k;
  cfg.params.C = std::max(cfg.params.C, 1.25 * k.C);
  cfg.params.alpha = std::max(cfg.params.alpha, 1.25 * k.alpha);
  cfg.params.beta = std::max(cfg.params.beta, 1.25 * k.beta);
  return cfg;
}

ExperimentConfig planted_config(double sigma) {
  ExperimentConfig cfg;
  cfg.planted.noise_sigma = sigma;
  cfg.params.sigma = sigma;
  cfg.params.epsilon_target = 4.0 * sigma * sigma;
  return cfg;
}

bool planted_feasibility(int seeds) {
  const auto t0 = clock_type::now();
  int ok = 0, calibrated_up = 0;
  double worst = 0.0;
  for (int s = 1; s <= seeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    auto cfg = planted_config(0.0);
    const auto inst = load_instance(cfg, seed);
    const auto pd = prepare(cfg, inst.samples);
    PlantedConstants k;
    const auto cal = calibrated(cfg, pd, *inst.truth, seed, &k);
    if (k.C > cfg.params.C || k.alpha > cfg.params.alpha || k.beta > cfg.params.beta) ++calibrated_up;
    const auto cp = build_for(cal, pd, seed);
    const auto x = planted_assignment(cp, pd, *inst.truth);
    const double r = max_residual(substitute(cp, x));
    const bool cert = sdp::certify_point(cp.point_moments(x), cp.problem, 1e-8).ok;
    worst = std::max(worst, r);
    const bool pass = r <= 1e-8 && cert && pd.m() <= 8 && std::isfinite(k.C);
    ok += pass ? 1 : 0;
    std::cerr << "  [3] seed " << seed << " m=" << pd.m() << " residual " << r << " certify "
              << cert << " planted C " << k.C << " alpha " << k.alpha << " beta " << k.beta << "\n";
  }
  const double secs = seconds_since(t0);
  return report_line(3, ok == seeds && secs <= 60.0,
                     std::to_string(ok) + "/" + std::to_string(seeds) + " instances, max residual " +
                         fmt("%.2e", worst) + ", defaults raised on " + std::to_string(calibrated_up) +
                         ", " + fmt("%.1f s", secs));
}

bool weight_lower_bound(int seeds) {
  const auto t0 = clock_type::now();
  int ok = 0;
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (int s = 1; s <= seeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    auto cfg = planted_config(0.02);
    const auto inst = load_instance(cfg, seed);
    const auto pd = prepare(cfg, inst.samples);
    cfg = calibrated(cfg, pd, *inst.truth, seed);
    const auto cp = build_for(cfg, pd, seed);
    RelaxationOptions ro;
    ro.solver = cfg.solver;
    ro.objective = cfg.objective;
    double ratio = 0.0;
    std::string status;
    try {
      const auto rel = solve_relaxation(cp, ro);
      status = sdp::to_string(rel.solution.status);
      const auto sel = selection_expectations(cp, pd, rel.u);
      // Mass on the points the planted assignment selects: duplicates living in a term of c*.
      const auto planted_terms = match_terms(inst.truth->c_star, pd);
      const std::set<std::size_t> planted(planted_terms.begin(), planted_terms.end());
      double inlier_mass = 0.0;
      for (std::size_t i = 0; i < pd.n_prime(); ++i) {
        if (planted.count(pd.term_of[i])) inlier_mass += sel[i];
      }
      const double mu = cp.params.mu;
      ratio = inlier_mass / (mu * mu * static_cast<double>(pd.n_prime()));
    } catch (const Error& e) {
      status = e.what();
    }
    worst_ratio = std::min(worst_ratio, ratio);
    ok += ratio >= 0.95 ? 1 : 0;
    std::cerr << "  [4] seed " << seed << " status " << status << " inlier mass / mu'^2 N' " << ratio
              << " (" << fmt("%.1f s", seconds_since(t0)) << ")\n";
  }
  const int need = (seeds * 18 + 19) / 20;
  return report_line(4, ok >= need,
                     std::to_string(ok) + "/" + std::to_string(seeds) + " seeds with ratio >= 0.95 (need " +
                         std::to_string(need) + "), min ratio " + fmt("%.3f", worst_ratio) + ", " +
                         fmt("%.1f s", seconds_since(t0)));
}

// Criteria 5 and 8 ----------------------------------------------------------

bool end_to_end(int seeds, std::string* first_report) {
  const auto t0 = clock_type::now();
  const ExperimentConfig cfg;
  int ok = 0;
  double slowest = 0.0;
  for (int s = 1; s <= seeds; ++s) {
    const auto ts = clock_type::now();
    const auto out = run_end_to_end(cfg, static_cast<std::uint64_t>(s));
    const double secs = seconds_since(ts);
    slowest = std::max(slowest, secs);
    const auto& r = out.report;
    if (s == 1 && first_report) *first_report = r.dump(2);
    const bool pass = r.contains("success") && r["success"].value("all", false);
    ok += pass ? 1 : 0;
    std::cerr << "  [5] seed " << s << " status " << r.value("status", std::string("?"));
    if (r.contains("rounding")) std::cerr << " frobenius " << r["rounding"].value("best_frobenius_error", -1.0);
    if (r.contains("cover") && r["cover"].contains("predictor_relative_error")) {
      std::cerr << " predictor " << r["cover"]["predictor_relative_error"].get<double>()
                << " loss " << r["cover"].value("conditional_mean_loss", -1.0);
    }
    std::cerr << (pass ? " ok" : " miss") << " (" << fmt("%.1f s", secs) << ")\n";
  }
  const int need = (seeds * 16 + 19) / 20;
  return report_line(5, ok >= need && slowest <= 300.0,
                     std::to_string(ok) + "/" + std::to_string(seeds) + " seeds recovered (need " +
                         std::to_string(need) + "), slowest seed " + fmt("%.1f s", slowest) + ", total " +
                         fmt("%.0f s", seconds_since(t0)));
}

bool determinism(const std::string& first_default) {
  int same = 0, total = 0;
  ExperimentConfig small;
  small.planted.n_attributes = 2;
  small.generate.n_attributes = 2;
  small.planted.d = 1;
  small.planted.terms = 1;
  small.n_samples = 60;
  small.q_random = 1;
  small.solver.max_iters = 300;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ++total;
    same += run_end_to_end(small, seed).report.dump(2) == run_end_to_end(small, seed).report.dump(2) ? 1 : 0;
  }
  if (!first_default.empty()) {
    ++total;
    same += run_end_to_end(ExperimentConfig{}, 1).report.dump(2) == first_default ? 1 : 0;
  }
  return report_line(8, same == total,
                     std::to_string(same) + "/" + std::to_string(total) + " reruns byte-identical");
}

// Criterion 6 ---------------------------------------------------------------

bool cover_guarantee() {
  int qualifying = 0, covered = 0, bounded = 0, tried = 0;
  double worst_ratio = 0.0;
  for (std::uint64_t seed = 1; qualifying < 50 && seed <= 500; ++seed) {
    ++tried;
    ExperimentConfig cfg;
    cfg.planted.n_attributes = 5;
    cfg.generate.n_attributes = 5;
    cfg.planted.terms = 1 + seed % 2;
    cfg.planted.noise_sigma = 0.05;
    cfg.n_samples = 150;
    const auto inst = load_instance(cfg, seed);
    const auto pd = prepare(cfg, inst.samples);
    if (pd.m() > 10) continue;
    auto params = program_params(cfg, pd);
    params.epsilon_target = 4.0 * 0.05 * 0.05;
    const auto orc = brute_force_oracle(pd, params);
    if (!orc.feasible) continue;
    RegressionModel model;
    model.v_hat = orc.v;
    const auto losses = compute_losses(model, pd);

    const double mu_n = params.mu * static_cast<double>(pd.n_prime());
    const double target = (1.0 - params.gamma / 2.0) * mu_n;
    const double cap = (1.0 + params.gamma) * params.epsilon_target * mu_n;
    bool exists = false;
    for (unsigned mask = 1; mask < (1U << pd.m()) && !exists; ++mask) {
      double cov = 0.0;
      bool eligible = true;
      for (std::size_t j = 0; j < pd.m(); ++j) {
        if (!(mask >> j & 1U)) continue;
        eligible = eligible && losses.term_sum[j] <= cap && pd.terms[j].weight() > 0;
        cov += static_cast<double>(pd.terms[j].weight());
      }
      exists = eligible && cov >= target;
    }
    if (!exists) continue;
    ++qualifying;
    try {
      const auto c = greedy_cover(losses, pd, params);
      const auto sc = score_pair(model, c, pd);
      const bool cov_ok = static_cast<double>(sc.covered) >= target;
      const double bound = 10.0 * static_cast<double>(c.t()) * std::log(mu_n) *
                           (orc.total_loss + params.epsilon_target * mu_n);
      covered += cov_ok ? 1 : 0;
      bounded += sc.total_loss <= bound ? 1 : 0;
      worst_ratio = std::max(worst_ratio, sc.total_loss / bound);
    } catch (const CoverError& e) {
      std::cerr << "  [6] seed " << seed << " greedy failed: " << e.what() << "\n";
    }
  }
  return report_line(6, qualifying == 50 && covered == 50 && bounded == 50,
                     std::to_string(qualifying) + " qualifying instances of " + std::to_string(tried) +
                         ", coverage " + std::to_string(covered) + "/50, loss bound " +
                         std::to_string(bounded) + "/50, worst loss/bound " + fmt("%.3f", worst_ratio));
}

// Criterion 7 ---------------------------------------------------------------

bool preprocessing_invariants() {
  std::mt19937_64 rng(777);
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 5;
    const std::size_t k = 1 + rng() % std::min<std::size_t>(3, n);
    const std::size_t N = 10 + rng() % 191;
    const auto family = enumerate_terms(n, k);
    KDnf c_star;
    const std::size_t t = 1 + rng() % 3;
    for (std::size_t j = 0; j < t; ++j) c_star.terms.push_back(family[rng() % family.size()]);

    std::normal_distribution<double> g;
    std::vector<Sample> samples(N);
    std::size_t n_good = 0;
    std::vector<std::uint8_t> good(N, 0);
    for (std::size_t i = 0; i < N; ++i) {
      samples[i].x.resize(n);
      for (auto& b : samples[i].x) b = static_cast<std::uint8_t>(rng() & 1U);
      samples[i].y = Vector::Constant(1, g(rng));
      samples[i].z = g(rng);
      good[i] = evaluate_dnf(c_star, samples[i].x) ? 1 : 0;
      n_good += good[i];
    }
    const auto pd = extend_and_center(assign_and_duplicate(samples, family), Centering::mean_zero);
    const std::size_t m = pd.m();
    const std::size_t np = pd.n_prime();

    bool disjoint = true;
    std::vector<int> seen(np, 0);
    for (std::size_t j = 0; j < m; ++j) {
      for (auto i : pd.terms[j].member_ids) {
        disjoint = disjoint && i < np && pd.term_of[i] == j;
        if (i < np) ++seen[i];
      }
    }
    disjoint = disjoint && std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
    // Each original lands once in every term it satisfies.
    std::vector<std::set<std::size_t>> homes(N);
    for (std::size_t i = 0; i < np; ++i) {
      disjoint = disjoint && homes[pd.provenance[i]].insert(pd.term_of[i]).second &&
                 evaluate_term(pd.terms[pd.term_of[i]], samples[pd.provenance[i]].x);
    }
    std::size_t np_good = 0;
    for (std::size_t i = 0; i < np; ++i) np_good += good[pd.provenance[i]];

    const bool size_ok = np <= m * N;
    const bool ratio_ok = np_good * m * N >= n_good * np;
    ok += disjoint && size_ok && ratio_ok ? 1 : 0;
  }
  return report_line(7, ok == 100, std::to_string(ok) + "/100 datasets satisfy all invariants");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  int seeds = 20;
  app.add_option("--only", only, "Criteria to run (default: all)");
  app.add_option("--seeds", seeds, "Seeds for criteria 3, 4 and 5")->check(CLI::Range(1, 1000));
  CLI11_PARSE(app, argc, argv);
  auto want = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  bool all = true;
  auto guarded = [&](int id, auto&& fn) {
    if (!want(id)) return;
    try {
      all = fn() && all;
    } catch (const std::exception& e) {
      all = report_line(id, false, std::string("exception: ") + e.what()) && all;
    }
  };
  guarded(1, [] { return moments_suite(); });
  guarded(2, [] { return sdp_suite(); });
  guarded(3, [&] { return planted_feasibility(seeds); });
  guarded(6, [] { return cover_guarantee(); });
  guarded(7, [] { return preprocessing_invariants(); });
  std::string first;
  guarded(5, [&] { return end_to_end(seeds, &first); });
  guarded(4, [&] { return weight_lower_bound(seeds); });
  guarded(8, [&] { return determinism(first); });
  return all ? 0 : 1;
}
