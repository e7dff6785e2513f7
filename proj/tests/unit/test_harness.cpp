#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "clr/errors.hpp"
#include "clr/harness.hpp"

using namespace clr;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.planted.n_attributes = 2;
  c.planted.d = 1;
  c.planted.terms = 1;
  c.planted.noise_sigma = 0.02;
  c.generate.n_attributes = 2;
  c.n_samples = 60;
  c.q_random = 1;
  c.solver.max_iters = 300;
  return c;
}

PreparedDataset planted_pd(std::uint64_t seed, double sigma, GroundTruth* truth = nullptr) {
  PlantedSpecOptions o;
  o.noise_sigma = sigma;
  const auto spec = random_planted_spec(o, seed);
  const auto data = generate(spec, 200, seed + 3);
  if (truth) *truth = data.truth;
  return extend_and_center(assign_and_duplicate(data.samples, enumerate_terms(4, 1)), Centering::mean_zero);
}

}  // namespace

TEST_CASE("dataset CSV round trip") {
  const auto spec = random_planted_spec({}, 1);
  const auto data = generate(spec, 40, 2);
  std::stringstream ss;
  write_dataset_csv(data.samples, ss);
  const std::string text = ss.str();
  CHECK(text.rfind("x1,x2,x3,x4,y1,y2,z\n", 0) == 0);
  const auto back = read_dataset_csv(ss);
  REQUIRE(back.size() == data.samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].x == data.samples[i].x);
    CHECK(back[i].y == data.samples[i].y);
    CHECK(back[i].z == data.samples[i].z);
  }
  std::stringstream again;
  write_dataset_csv(back, again);
  CHECK(again.str() == text);
}

TEST_CASE("dataset CSV errors") {
  auto read = [](const std::string& s) {
    std::istringstream is(s);
    return read_dataset_csv(is);
  };
  CHECK_THROWS_AS(read(""), InputError);
  CHECK_THROWS_AS(read("x1,z\n1,2\n"), InputError);
  CHECK_THROWS_AS(read("x1,y1,z\n"), InputError);
  CHECK_THROWS_AS(read("x1,y1,z\n2,0.5,1\n"), InputError);
  CHECK_THROWS_AS(read("x1,y1,z\n1,abc,1\n"), InputError);
  CHECK_THROWS_AS(read("x1,y1,z\n1,nan,1\n"), InputError);
  try {
    read("x1,y1,z\n1,0.5,1\n0,0.5\n");
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  const auto ok = read("y1,z\n0.5,1\n\n-2,3e-1\n");
  REQUIRE(ok.size() == 2);
  CHECK(ok[1].x.empty());
  CHECK(ok[1].z == 0.3);
  CHECK_THROWS_AS(read_dataset_csv_file("/nonexistent/data.csv"), InputError);
}

TEST_CASE("ground-truth sidecar round trip") {
  const auto spec = random_planted_spec({}, 5);
  const auto data = generate(spec, 50, 6);
  const auto j = truth_to_json(data.truth);
  for (const char* key : {"v_star", "c_star", "r", "inlier_ids", "noise_sigma"}) CHECK(j.contains(key));
  const auto back = truth_from_json(Json::parse(j.dump()));
  CHECK(back.v_star == data.truth.v_star);
  CHECK(back.c_star.to_string() == data.truth.c_star.to_string());
  CHECK(back.r == data.truth.r);
  CHECK(back.inlier_ids == data.truth.inlier_ids);
  CHECK((back.pi_star - data.truth.pi_star).norm() < 1e-14);
  CHECK_THROWS_AS(truth_from_json(Json::parse(R"({"v_star": [1, 2]})")), InputError);
  CHECK_THROWS_AS(dnf_from_json(Json::parse("[[[0, 2]]]")), InputError);
}

TEST_CASE("config JSON round trip and validation") {
  auto c = small_config();
  c.seeds = {3, 4};
  c.rank = 2;
  c.objective = RelaxationObjective::total_weight;
  const auto j = config_to_json(c);
  const auto back = config_from_json(j);
  CHECK(config_to_json(back).dump() == j.dump());
  CHECK(back.seeds == c.seeds);
  CHECK(back.rank == c.rank);
  CHECK(back.objective == RelaxationObjective::total_weight);

  CHECK(config_from_json(Json::object()).n_samples == ExperimentConfig{}.n_samples);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"bogus": 1})")), InputError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"params": {"muu": 0.3}})")), InputError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"solver": {"tol": "x"}})")), InputError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"objective": "max"})")), InputError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"degree": 3})")), InputError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"seeds": []})")), InputError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), InputError);
}

TEST_CASE("brute-force oracle examples") {
  GroundTruth truth;
  const auto pd = planted_pd(1, 0.0, &truth);
  ProblemParams p;
  p.mu = static_cast<double>(truth.inlier_ids.size()) / static_cast<double>(pd.n_prime());
  const auto r = brute_force_oracle(pd, p);
  REQUIRE(r.feasible);
  CHECK(r.loss <= 1e-12);
  CHECK(r.condition.to_string() == truth.c_star.to_string());
  CHECK((r.v - truth.v_star).norm() < 1e-8);
  CHECK(static_cast<double>(r.covered) >= p.mu * static_cast<double>(pd.n_prime()) - 1e-9);

  p.mu = 1.01;
  CHECK_FALSE(brute_force_oracle(pd, p).feasible);

  // One term only: it must be returned when it reaches the coverage floor.
  std::vector<Sample> s(8);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i].x = {1};
    s[i].y = Vector::Constant(1, static_cast<double>(i));
    s[i].z = 2.0 * static_cast<double>(i) + 0.1 * static_cast<double>(i % 2);
  }
  const auto one = extend_and_center(assign_and_duplicate(s, {Term({{0, 1}})}), Centering::mean_zero);
  p.mu = 1.0;
  const auto r1 = brute_force_oracle(one, p);
  REQUIRE(r1.feasible);
  CHECK(r1.terms == std::vector<std::size_t>{0});
  CHECK(r1.covered == 8);

  std::vector<Sample> wide(20);
  std::mt19937_64 rng(1);
  for (auto& a : wide) {
    a.x = {static_cast<std::uint8_t>(rng() & 1U), static_cast<std::uint8_t>(rng() & 1U),
           static_cast<std::uint8_t>(rng() & 1U), static_cast<std::uint8_t>(rng() & 1U)};
    a.y = Vector::Constant(1, 1.0);
    a.z = 0.0;
  }
  const auto big = extend_and_center(assign_and_duplicate(wide, enumerate_terms(4, 2)), Centering::mean_zero);
  REQUIRE(big.m() == 24);
  p.mu = 0.1;
  CHECK_THROWS_AS(brute_force_oracle(big, p), SizeError);
}

TEST_CASE("oracle loss matches a direct least-squares fit of its subset") {
  const auto pd = planted_pd(2, 0.1);
  ProblemParams p;
  p.mu = 0.1;
  const auto r = brute_force_oracle(pd, p);
  REQUIRE(r.feasible);
  Matrix A(static_cast<Eigen::Index>(r.covered), 3);
  Vector b(static_cast<Eigen::Index>(r.covered));
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < pd.n_prime(); ++i) {
    if (std::find(r.terms.begin(), r.terms.end(), pd.term_of[i]) == r.terms.end()) continue;
    A.row(row) = pd.samples[i].y_ext.head(3).transpose();
    b[row] = pd.samples[i].y_ext[3];
    ++row;
  }
  const Vector v = A.colPivHouseholderQr().solve(b);
  CHECK((v - r.v).norm() < 1e-8);
  CHECK(r.loss == doctest::Approx((A * v - b).squaredNorm() / static_cast<double>(row)).epsilon(1e-10));
}

TEST_CASE("frobenius_error examples") {
  Matrix a = Matrix::Zero(3, 3), b = Matrix::Zero(3, 3);
  a(0, 0) = 1.0;
  b(1, 1) = 1.0;
  CHECK(frobenius_error(a, b) == doctest::Approx(std::sqrt(2.0)));
  CHECK(frobenius_error(a, a) == 0.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 20; ++t) {
    Matrix x(4, 5), y(4, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x.data()[i] = g(rng);
      y.data()[i] = g(rng);
    }
    double s = 0.0;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 5; ++c) s += (x(r, c) - y(r, c)) * (x(r, c) - y(r, c));
    }
    CHECK(std::abs(frobenius_error(x, y) - std::sqrt(s)) <= 1e-12);
  }
  CHECK_THROWS_AS(frobenius_error(a, Matrix::Zero(2, 3)), InputError);
}

TEST_CASE("planted assignment diagnostics") {
  auto cfg = small_config();
  cfg.planted.noise_sigma = 0.0;
  cfg.params.sigma = 0.0;
  const auto inst = load_instance(cfg, 4);
  const auto pd = prepare(cfg, inst.samples);
  const auto mu_n = program_params(cfg, pd).mu * static_cast<double>(pd.n_prime());
  CHECK(mu_n == doctest::Approx(cfg.params.mu * static_cast<double>(pd.n_original())));
  const auto q = default_q_family(pd.d(), cfg.q_random, 1);
  const auto k = planted_constants(pd, *inst.truth, q, mu_n);
  REQUIRE(std::isfinite(k.C));

  // Just above the constants every row holds; just below, some row binds.
  cfg.params.C = 1.01 * k.C;
  cfg.params.alpha = 1.01 * k.alpha;
  cfg.params.beta = 1.01 * k.beta;
  auto cp = build_program(pd, program_params(cfg, pd), q, 4, [&] {
    auto b = cfg.build;
    b.trace_rank = 2;
    return b;
  }());
  const auto x = planted_assignment(cp, pd, *inst.truth);
  const auto rep = residual_report(cp, x);
  INFO(rep.dump());
  CHECK(rep["max_residual"].get<double>() <= 1e-8);
  CHECK(rep["per_constraint"].contains("budget"));

  cfg.params.C = 0.99 * k.C;
  cp = build_program(pd, program_params(cfg, pd), q, 4, cfg.build);
  CHECK(max_residual(substitute(cp, x)) > 1e-8);
  cfg.params.C = 1.01 * k.C;
  cfg.params.beta = 0.99 * k.beta;
  cp = build_program(pd, program_params(cfg, pd), q, 4, cfg.build);
  CHECK(max_residual(substitute(cp, x)) > 1e-8);
}

TEST_CASE("end-to-end runs are deterministic") {
  const auto cfg = small_config();
  const auto a = run_end_to_end(cfg, 7);
  const auto b = run_end_to_end(cfg, 7);
  CHECK(a.report.dump(2) == b.report.dump(2));
  CHECK(a.exit_code == b.exit_code);
  CHECK(a.report["schema_version"] == kReportSchemaVersion);
  CHECK(a.report["config"].dump() == config_to_json(cfg).dump());
  CHECK_FALSE(a.report.contains("timings"));
  CHECK(a.report.contains("solver"));
  CHECK(a.report.contains("planted"));

  auto timed = cfg;
  timed.timings = true;
  CHECK(run_end_to_end(timed, 7).report.contains("timings"));

  const auto agg = aggregate_reports({a.report, b.report});
  CHECK(agg["runs"] == 2);
  const auto csv = aggregate_csv({a.report, b.report});
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("impossible coverage gives a failing report") {
  auto cfg = small_config();
  cfg.params.mu = 0.99;
  const auto r = run_end_to_end(cfg, 2);
  CHECK(r.exit_code != 0);
  CHECK(r.report["status"] != "ok");
  if (r.report["status"] == "failed") CHECK(r.report.contains("failed_stage"));
}

TEST_CASE("missing dataset reports an input failure") {
  auto cfg = small_config();
  cfg.dataset_path = "/nonexistent/data.csv";
  const auto r = run_end_to_end(cfg, 1);
  CHECK(r.exit_code == 2);
  CHECK(r.report["failed_stage"] == "load");
}
