#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "propauction/equilibrium.hpp"
#include "propauction/model.hpp"
#include "propauction/payments.hpp"
#include "propauction/rng.hpp"
#include "propauction/welfare.hpp"

namespace propauction {

struct Distribution {
  enum class Kind { uniform, log_uniform, point, choice };
  Kind kind = Kind::point;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> values;  // choice

  static Distribution uniform(double lo, double hi);
  static Distribution log_uniform(double lo, double hi);
  static Distribution point(double value);
  static Distribution choice(std::vector<double> values);

  void validate(const char* what) const;
  double sample(Rng& rng) const;
  double min_value() const;
};

struct CountRange {
  std::size_t min = 1;
  std::size_t max = 1;
};

struct GeneratorSpec {
  CountRange agents{2, 3};
  CountRange items{1, 3};
  std::vector<ValuationKind> kinds{ValuationKind::linear};  // drawn uniformly per agent
  Distribution value = Distribution::uniform(0.1, 1.0);
  Distribution budget = Distribution::uniform(0.2, 2.0);
  Distribution rho = Distribution::choice({0.0, 1.0});
  Distribution exponent = Distribution::point(0.5);  // power-sum q, per item
  Distribution shift = Distribution::point(1.0);     // log-sum s, per agent

  void validate() const;
};

Instance generate_instance(const GeneratorSpec& spec, std::uint64_t seed);

enum class InitKind { default_init, random };

struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  GeneratorSpec generator;
  MechanismSpec mechanism;
  bool eps_auto = false;  // eps = 1 / (n - 1) for each instance
  DynamicsParams dynamics;
  InitKind init = InitKind::default_init;
  std::size_t restarts = 1;
  double grid_step = 1.0 / 16.0;
  double grid_budget = 2e7;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string output_path;
  std::string output_format = "csv";

  void validate() const;
};

struct ResultsRow {
  std::size_t instance_id = 0;
  std::size_t restart = 0;
  std::string mechanism;
  std::size_t n = 0;
  std::size_t m = 0;
  double eps = 0.0;
  double lw_eq = 0.0;
  double opt = 0.0;
  double opt_grid = 0.0;
  double dual_obj = 0.0;
  double dual_min_slack = 0.0;
  bool dual_feasible = false;
  double ratio = 0.0;
  double certified_ratio = 0.0;
  bool converged = false;
  std::size_t rounds = 0;
  double max_kkt = 0.0;
  std::uint64_t seed = 0;
  std::string status;  // ok | no-certificate | error
  std::string error;

  bool operator==(const ResultsRow&) const;
};

using ResultsTable = std::vector<ResultsRow>;

/// Theorem envelope for the mechanism of a row: 2 for standard, 1 + eps for power / modified.
double certified_bound(const std::string& mechanism, double eps);

/// Mechanism used for an instance with `agents` bidders under `config`.
MechanismSpec mechanism_for(const ExperimentConfig& config, std::size_t agents);

/// Rows for one trial, one per restart. Never throws: failures are recorded in the rows.
ResultsTable run_trial(const ExperimentConfig& config, std::size_t trial);

ResultsTable run_experiment(const ExperimentConfig& config);

struct SweepRow {
  std::size_t n = 0;
  double eps = 0.0;
  double bound = 0.0;
  std::size_t rows = 0;
  std::size_t converged = 0;
  double max_ratio = 0.0;
  double max_certified_ratio = 0.0;
  bool within_bound = true;
};

std::vector<SweepRow> poa_sweep_n(const ExperimentConfig& config, const std::vector<std::size_t>& n_values,
                                  std::optional<double> eps_override = std::nullopt);

struct SearchSpec {
  std::size_t agents = 2;
  std::size_t items = 1;
  std::size_t budget = 200;  // local-search iterations
  double value_lo = 1e-2;
  double value_hi = 1e3;
  double budget_lo = 0.1;
  double budget_hi = 100.0;
  double rho = 1.0;
  double step = 1.0;  // log-scale perturbation width
};

struct SearchResult {
  Instance instance;
  BidMatrix equilibrium{0, 0};
  double ratio = 0.0;
  double lw_eq = 0.0;
  double opt = 0.0;
  std::size_t evaluations = 0;
  std::vector<double> trace;  // best ratio after each iteration
};

/// Equilibrium PoA of `instance` under `mech`: 0 when dynamics does not converge.
struct InstanceRatio {
  double ratio = 0.0;
  double lw_eq = 0.0;
  double opt = 0.0;
  bool converged = false;
  BidMatrix bids{0, 0};
};
InstanceRatio evaluate_instance_ratio(const Instance& instance, const MechanismSpec& mech);

SearchResult lower_bound_search(const MechanismSpec& mech, const SearchSpec& spec, std::uint64_t seed);

/// CSV with the fixed header `results_csv_header()`; doubles as %.17g, non-finite as inf / nan.
std::string results_csv_header();
void write_results_csv(std::ostream& out, const ResultsTable& table);
ResultsTable read_results_csv(std::istream& in);

void export_results(const ResultsTable& table, const std::string& path, const std::string& format);
ResultsTable import_results(const std::string& path, const std::string& format);

struct VerifyReport {
  std::size_t rows = 0;
  std::size_t converged = 0;
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks the welfare contracts row by row.
VerifyReport verify_results(const ResultsTable& table);

}  // namespace propauction
