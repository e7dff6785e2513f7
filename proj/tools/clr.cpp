#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "clr/errors.hpp"
#include "clr/harness.hpp"

namespace {

using clr::Json;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> degree;
  std::string out;
  std::string format = "json";
  std::string data;
};

clr::ExperimentConfig load(const Common& c) {
  clr::ExperimentConfig cfg = c.config.empty() ? clr::ExperimentConfig{} : clr::load_config(c.config);
  if (c.degree) cfg.params.ell = *c.degree;
  if (c.seed) cfg.seeds = {*c.seed};
  if (!c.data.empty()) cfg.dataset_path = c.data;
  cfg.validate();
  return cfg;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw clr::InputError("cannot write '" + path + "'");
  f << text;
}

Json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw clr::InputError("cannot open '" + path + "'");
  try {
    return Json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw clr::InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

int cmd_gen(const Common& c, std::string truth_path) {
  auto cfg = load(c);
  if (c.out.empty()) throw clr::InputError("gen needs --out");
  cfg.dataset_path.clear();
  const auto inst = clr::load_instance(cfg, cfg.seeds.front());
  std::ostringstream os;
  clr::write_dataset_csv(inst.samples, os);
  emit(os.str(), c.out);
  if (truth_path.empty()) truth_path = c.out + ".truth.json";
  emit(clr::truth_to_json(*inst.truth).dump(2) + "\n", truth_path);
  return 0;
}

int cmd_terms(const Common& c) {
  const auto cfg = load(c);
  if (cfg.dataset_path.empty()) throw clr::InputError("terms needs --data");
  const auto pd = clr::prepare(cfg, clr::read_dataset_csv_file(cfg.dataset_path));
  if (c.format == "csv") {
    std::ostringstream os;
    os << "term,size\n";
    for (const auto& t : pd.terms) os << t.to_string() << ',' << t.weight() << '\n';
    emit(os.str(), c.out);
  } else {
    Json j;
    j["n_original"] = pd.n_original();
    j["n_prime"] = pd.n_prime();
    j["unassigned"] = pd.unassigned.size();
    Json terms = Json::array();
    for (const auto& t : pd.terms) terms.push_back({{"term", t.to_string()}, {"size", t.weight()}});
    j["terms"] = terms;
    emit(j.dump(2) + "\n", c.out);
  }
  return 0;
}

int cmd_solve(const Common& c) {
  const auto cfg = load(c);
  const auto seed = cfg.seeds.front();
  const auto inst = clr::load_instance(cfg, seed);
  const auto pd = clr::prepare(cfg, inst.samples);
  const auto cp = clr::build_for(cfg, pd, seed);
  clr::RelaxationOptions ro;
  ro.solver = cfg.solver;
  ro.objective = cfg.objective;
  const auto rel = clr::solve_relaxation(cp, ro);
  const auto rr = clr::round_candidates(cp, pd, rel.u, clr::default_multiset_size(cfg.params.mu, cfg.multiset_c),
                                        seed, cfg.rank.value_or(pd.d() + 1), cfg.candidates);
  Json j;
  j["schema_version"] = clr::kReportSchemaVersion;
  j["seed"] = seed;
  j["solver"] = {{"status", clr::sdp::to_string(rel.solution.status)},
                 {"iterations", rel.solution.iterations},
                 {"primal_residual", rel.solution.primal_residual}};
  Json cands = Json::array();
  for (const auto& pc : rr.list) {
    cands.push_back({{"source", pc.source}, {"term", pc.term}, {"rank", pc.rank},
                     {"spectral_gap", pc.spectral_gap}, {"pi_hat", clr::matrix_to_json(pc.pi_hat)}});
  }
  j["candidates"] = cands;
  Json models = Json::array();
  for (const auto& m : rr.models) models.push_back({{"source", m.source}, {"v_hat", clr::vector_to_json(m.v_hat)}});
  j["models"] = models;
  emit(j.dump(2) + "\n", c.out);
  return rel.solution.status == clr::sdp::Status::optimal || rel.solution.status == clr::sdp::Status::feasible ? 0 : 3;
}

int cmd_cover(const Common& c, const std::string& candidates_path) {
  const auto cfg = load(c);
  if (cfg.dataset_path.empty()) throw clr::InputError("cover needs --data");
  const auto pd = clr::prepare(cfg, clr::read_dataset_csv_file(cfg.dataset_path));
  const auto params = clr::program_params(cfg, pd);
  const auto cj = read_json(candidates_path);
  std::vector<clr::RegressionModel> models;
  try {
    for (const auto& m : cj.at("models")) {
      clr::RegressionModel rm;
      rm.v_hat = clr::vector_from_json(m.at("v_hat"));
      rm.source = m.value("source", std::size_t{0});
      models.push_back(rm);
    }
  } catch (const nlohmann::json::exception& e) {
    throw clr::InputError(std::string("candidates file: ") + e.what());
  }
  Json pairs = Json::array();
  for (std::size_t k = 0; k < models.size(); ++k) {
    Json p = {{"model", k}};
    try {
      const auto cond = clr::greedy_cover(clr::compute_losses(models[k], pd), pd, params);
      const auto s = clr::score_pair(models[k], cond, pd);
      p["condition"] = cond.to_string();
      p["coverage"] = s.coverage;
      p["conditional_mean_loss"] = s.conditional_mean_loss;
    } catch (const clr::CoverError& e) {
      p["error"] = e.what();
    }
    pairs.push_back(p);
  }
  const auto best = clr::best_pair(models, pd, params);
  Json j;
  j["pairs"] = pairs;
  j["best"] = {{"model", best.index},
               {"v_hat", clr::vector_to_json(best.model.v_hat)},
               {"condition", clr::dnf_to_json(best.condition)},
               {"coverage", best.score.coverage},
               {"conditional_mean_loss", best.score.conditional_mean_loss}};
  emit(j.dump(2) + "\n", c.out);
  return 0;
}

int cmd_oracle(const Common& c) {
  const auto cfg = load(c);
  const auto inst = clr::load_instance(cfg, cfg.seeds.front());
  const auto pd = clr::prepare(cfg, inst.samples);
  const auto res = clr::brute_force_oracle(pd, clr::program_params(cfg, pd));
  Json j = {{"feasible", res.feasible}};
  if (res.feasible) {
    j["condition"] = clr::dnf_to_json(res.condition);
    j["condition_text"] = res.condition.to_string();
    j["v"] = clr::vector_to_json(res.v);
    j["loss"] = res.loss;
    j["covered"] = res.covered;
  }
  emit(j.dump(2) + "\n", c.out);
  return res.feasible ? 0 : 4;
}

int cmd_run(const Common& c) {
  const auto cfg = load(c);
  std::vector<Json> reports;
  int code = 0;
  for (const auto seed : cfg.seeds) {
    auto r = clr::run_end_to_end(cfg, seed);
    if (code == 0) code = r.exit_code;
    reports.push_back(std::move(r.report));
  }
  const std::string out = c.out.empty() ? cfg.output_path : c.out;
  if (c.format == "csv") {
    emit(clr::aggregate_csv(reports), out);
  } else if (reports.size() == 1) {
    emit(reports.front().dump(2) + "\n", out);
  } else {
    emit(Json(reports).dump(2) + "\n", out);
  }
  return code;
}

int cmd_report(const Common& c, const std::vector<std::string>& inputs) {
  std::vector<Json> reports;
  for (const auto& p : inputs) {
    auto j = read_json(p);
    if (j.is_array()) {
      for (auto& r : j) reports.push_back(std::move(r));
    } else {
      reports.push_back(std::move(j));
    }
  }
  if (c.format == "csv") {
    emit(clr::aggregate_csv(reports), c.out);
  } else {
    emit(clr::aggregate_reports(reports).dump(2) + "\n", c.out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional linear regression via sum-of-squares relaxation"};
  app.require_subcommand(1);
  Common c;
  std::string truth_path, candidates_path;
  std::vector<std::string> inputs;

  auto add_common = [&](CLI::App* sub, bool data) {
    sub->add_option("--config", c.config, "Experiment config (JSON)");
    sub->add_option("--seed", c.seed, "Seed override");
    sub->add_option("--degree", c.degree, "Relaxation degree (even, >= 4)");
    sub->add_option("--out", c.out, "Output path (stdout when omitted)");
    sub->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
    if (data) sub->add_option("--data", c.data, "Dataset CSV");
  };
  auto* gen = app.add_subcommand("gen", "Generate a planted dataset and ground-truth sidecar");
  add_common(gen, false);
  gen->add_option("--truth", truth_path, "Sidecar path (default <out>.truth.json)");
  auto* terms = app.add_subcommand("terms", "Term statistics of a dataset");
  add_common(terms, true);
  auto* solve = app.add_subcommand("solve", "Solve the relaxation and list candidates");
  add_common(solve, true);
  auto* cover = app.add_subcommand("cover", "Find conditions for candidate predictors");
  add_common(cover, true);
  cover->add_option("--candidates", candidates_path, "Output of solve")->required();
  auto* oracle = app.add_subcommand("oracle", "Brute-force best condition and predictor");
  add_common(oracle, true);
  auto* run = app.add_subcommand("run", "End-to-end run per seed");
  add_common(run, true);
  auto* report = app.add_subcommand("report", "Aggregate seed reports");
  add_common(report, false);
  report->add_option("reports", inputs, "Report files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen(c, truth_path);
    if (*terms) return cmd_terms(c);
    if (*solve) return cmd_solve(c);
    if (*cover) return cmd_cover(c, candidates_path);
    if (*oracle) return cmd_oracle(c);
    if (*run) return cmd_run(c);
    if (*report) return cmd_report(c, inputs);
  } catch (const clr::SizeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const clr::CoverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const clr::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
