#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "clr/core_model.hpp"
#include "clr/dnf_cover.hpp"
#include "clr/preprocess.hpp"
#include "clr/program_builder.hpp"
#include "clr/solver_pipeline.hpp"
#include "clr/synthgen.hpp"

namespace clr {

using Json = nlohmann::ordered_json;

inline constexpr int kReportSchemaVersion = 1;

// Dataset CSV: header x1..xn,y1..yd,z.
void write_dataset_csv(const std::vector<Sample>& samples, std::ostream& os);
std::vector<Sample> read_dataset_csv(std::istream& is);
std::vector<Sample> read_dataset_csv_file(const std::string& path);

Json truth_to_json(const GroundTruth& t);
// Reconstructs v*, c*, r, inlier ids, sigma and Pi*; per-term fields stay empty.
GroundTruth truth_from_json(const Json& j);

struct ExperimentConfig {
  // Data source: a generator spec unless dataset_path is set.
  std::string dataset_path;
  std::string truth_path;
  PlantedSpecOptions planted = default_planted();
  GenerateOptions generate;
  OutlierModel outlier;
  std::size_t n_samples = 400;

  std::size_t k = 1;
  std::size_t prune_min = 0;
  Centering centering = Centering::mean_zero;

  // mu is the fraction of the original samples; the program uses mu N / N'.
  ProblemParams params = default_params();
  BuildOptions build = default_build();
  bool trace_row = true;  // tr(Pi_j) = rank, unless build.trace_rank is set
  std::size_t q_random = 8;
  sdp::SolveOptions solver = default_solver();
  RelaxationObjective objective = RelaxationObjective::l2_weights;
  CandidateMode candidates = CandidateMode::term_local;
  double multiset_c = 4.0;
  std::optional<std::size_t> rank;  // projector rank; default d + 1

  double frobenius_tol = 0.3;
  double predictor_tol = 0.1;
  double loss_factor = 10.0;  // covered loss <= factor * sigma^2

  std::vector<std::uint64_t> seeds{1};
  std::string output_path;
  bool timings = false;  // wall-clock in reports breaks byte-identical reruns

  void validate() const;
  static ProblemParams default_params();
  static PlantedSpecOptions default_planted();
  static BuildOptions default_build();
  static sdp::SolveOptions default_solver();
};

Json config_to_json(const ExperimentConfig& c);
// Unknown keys are rejected.
ExperimentConfig config_from_json(const Json& j);
ExperimentConfig load_config(const std::string& path);

struct OracleResult {
  bool feasible = false;
  KDnf condition;
  Vector v;
  double loss = 0.0;        // conditional mean loss
  double total_loss = 0.0;
  std::size_t covered = 0;
  std::vector<std::size_t> terms;
};

// Exhaustive search over term subsets covering >= mu N' points; OLS per subset.
OracleResult brute_force_oracle(const PreparedDataset& pd, const ProblemParams& params);

double frobenius_error(const Matrix& a, const Matrix& b);

// Generated or loaded raw data for one seed.
struct Instance {
  std::vector<Sample> samples;
  std::optional<GroundTruth> truth;
};
Instance load_instance(const ExperimentConfig& cfg, std::uint64_t seed);

PreparedDataset prepare(const ExperimentConfig& cfg, const std::vector<Sample>& samples);
// Program-level parameters: mu rescaled to the prepared dataset.
ProblemParams program_params(const ExperimentConfig& cfg, const PreparedDataset& pd);
CompiledProgram build_for(const ExperimentConfig& cfg, const PreparedDataset& pd, std::uint64_t seed);

// Planted point of the program: v*, w_j = 1 on the terms of c*, Pi* for every term.
// Throws InputError when a planted term is not in the prepared family.
std::vector<double> planted_assignment(const CompiledProgram& cp, const PreparedDataset& pd,
                                       const GroundTruth& truth);
// Largest row residual at a point, overall and per constraint name.
Json residual_report(const CompiledProgram& cp, const std::vector<double>& x);

struct PlantedConstants {
  double C = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
};
// Smallest C, alpha and beta under which the planted assignment satisfies the
// hypercontractive, variance and moment rows; C is infinite when a variance row
// has Pi* Q Pi* = 0 but data mass along Q.
PlantedConstants planted_constants(const PreparedDataset& pd, const GroundTruth& truth,
                                   const std::vector<Matrix>& q_family, double mu_n);

struct RunOutcome {
  Json report;
  int exit_code = 0;  // CLI exit code implied by the run
};

// Never throws for stage failures; the report carries the failing stage.
RunOutcome run_end_to_end(const ExperimentConfig& cfg, std::uint64_t seed);

Json aggregate_reports(const std::vector<Json>& reports);
std::string aggregate_csv(const std::vector<Json>& reports);

Json matrix_to_json(const Matrix& m);
Json vector_to_json(const Vector& v);
Matrix matrix_from_json(const Json& j);
Vector vector_from_json(const Json& j);
Json dnf_to_json(const KDnf& c);
KDnf dnf_from_json(const Json& j);

}  // namespace clr
