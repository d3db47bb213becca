#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "propauction/conversion.hpp"
#include "propauction/equilibrium.hpp"
#include "propauction/errors.hpp"
#include "propauction/harness.hpp"
#include "propauction/serialization.hpp"

using namespace propauction;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format;
  std::optional<std::size_t> workers;
  std::optional<double> grid_step;
  std::optional<double> eps;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  auto* c = cmd->add_option("--config", f.config, "JSON config file");
  if (config_required) c->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "master seed (overrides the config)");
  cmd->add_option("--out", f.out, "output path ('-' for stdout)");
  cmd->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--workers", f.workers, "worker threads (0 = all cores)");
  cmd->add_option("--grid-step", f.grid_step, "welfare grid step (1/step must be an integer)");
  cmd->add_option("--eps", f.eps, "mechanism eps (power / modified)");
}

ExperimentConfig apply(ExperimentConfig cfg, const CommonFlags& f) {
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.output_path = f.out;
  if (!f.format.empty()) cfg.output_format = f.format;
  if (f.workers) cfg.workers = *f.workers;
  if (f.grid_step) cfg.grid_step = *f.grid_step;
  if (f.eps) {
    cfg.mechanism.eps = *f.eps;
    cfg.eps_auto = false;
  }
  cfg.validate();
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
}

void emit_table(const ResultsTable& table, const std::string& path, const std::string& format) {
  if (path.empty() || path == "-") {
    if (format == "json") {
      Json rows = Json::array();
      for (const auto& r : table) rows.push_back(to_json(r));
      std::cout << Json{{"schema_version", ExperimentConfig::kSchemaVersion}, {"rows", rows}}.dump(2) << '\n';
    } else {
      write_results_csv(std::cout, table);
    }
    return;
  }
  export_results(table, path, format);
}

void summarize(const ResultsTable& table) {
  std::size_t converged = 0, errors = 0;
  double worst_ratio = 0.0, worst_cert = 0.0;
  for (const auto& r : table) {
    if (r.status == "error") ++errors;
    if (!r.converged) continue;
    ++converged;
    worst_ratio = std::max(worst_ratio, r.ratio);
    if (r.status == "ok") worst_cert = std::max(worst_cert, r.certified_ratio);
  }
  std::fprintf(stderr, "rows %zu, converged %zu, errors %zu, max ratio %.6g, max certified ratio %.6g\n",
               table.size(), converged, errors, worst_ratio, worst_cert);
}

ExperimentConfig default_sweep_config() {
  ExperimentConfig cfg;
  cfg.mechanism = MechanismSpec::power(1.0);
  cfg.eps_auto = true;
  // Strongly concave value-maximizers: weaker curvature rarely admits a feasible power equilibrium.
  cfg.generator.items = {1, 1};
  cfg.generator.kinds = {ValuationKind::power_sum};
  cfg.generator.exponent = Distribution::uniform(0.05, 0.2);
  cfg.generator.rho = Distribution::point(1.0);
  cfg.generator.value = Distribution::uniform(0.2, 1.0);
  cfg.generator.budget = Distribution::uniform(1.0, 3.0);
  cfg.trials = 20;
  cfg.grid_step = 1.0 / 8.0;
  return cfg;
}

std::vector<std::size_t> parse_n_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    const auto dash = tok.find('-');
    if (dash != std::string::npos) {
      const std::size_t lo = std::stoul(tok.substr(0, dash));
      const std::size_t hi = std::stoul(tok.substr(dash + 1));
      for (std::size_t n = lo; n <= hi; ++n) out.push_back(n);
    } else if (!tok.empty()) {
      out.push_back(std::stoul(tok));
    }
  }
  if (out.empty()) throw UsageError("empty list of n values");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proportional auction equilibria and liquid-welfare certificates"};
  app.require_subcommand(1);

  CommonFlags run_f;
  auto* run = app.add_subcommand("run", "run an experiment config and write the results table");
  add_common(run, run_f, true);

  CommonFlags sweep_f;
  std::string n_values = "2,3,5";
  std::optional<std::size_t> sweep_trials;
  auto* sweep = app.add_subcommand("sweep", "worst observed ratio per n at eps = 1/(n-1)");
  add_common(sweep, sweep_f, false);
  sweep->add_option("--n", n_values, "n values, e.g. 2,3,5 or 2-6");
  sweep->add_option("--trials", sweep_trials, "trials per n");

  CommonFlags search_f;
  SearchSpec search_spec;
  auto* search = app.add_subcommand("search", "local search for instances with a large equilibrium ratio");
  add_common(search, search_f, false);
  search->add_option("--budget", search_spec.budget, "local-search iterations");
  search->add_option("--agents", search_spec.agents, "number of agents");
  search->add_option("--items", search_spec.items, "number of items");
  search->add_option("--value-max", search_spec.value_hi, "largest valuation coefficient");

  CommonFlags verify_f;
  std::string results_path;
  auto* verify = app.add_subcommand("verify", "re-check a results file (and re-run its config if given)");
  add_common(verify, verify_f, false);
  verify->add_option("--results", results_path, "results file")->required()->check(CLI::ExistingFile);

  CommonFlags convert_f;
  std::size_t draws = 100000;
  auto* convert = app.add_subcommand("convert", "randomized conversion demo with a Monte Carlo check");
  add_common(convert, convert_f, false);
  convert->add_option("--draws", draws, "Monte Carlo draws");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      const ExperimentConfig cfg = apply(load_experiment_config(run_f.config), run_f);
      const ResultsTable table = run_experiment(cfg);
      emit_table(table, cfg.output_path, cfg.output_format);
      summarize(table);
      return 0;
    }
    if (*sweep) {
      ExperimentConfig cfg = sweep_f.config.empty() ? default_sweep_config() : load_experiment_config(sweep_f.config);
      cfg.output_path.clear();
      std::optional<double> eps = sweep_f.eps;
      sweep_f.eps.reset();
      cfg = apply(cfg, sweep_f);
      if (sweep_trials) cfg.trials = *sweep_trials;
      const auto rows = poa_sweep_n(cfg, parse_n_list(n_values), eps);
      std::ostringstream text;
      if (cfg.output_format == "json") {
        Json arr = Json::array();
        for (const auto& r : rows) arr.push_back(to_json(r));
        text << arr.dump(2) << '\n';
      } else {
        text << "n,eps,bound,rows,converged,max_ratio,max_certified_ratio,within_bound\n";
        for (const auto& r : rows) {
          char buf[256];
          std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%zu,%zu,%.17g,%.17g,%s\n", r.n, r.eps, r.bound, r.rows,
                        r.converged, r.max_ratio, r.max_certified_ratio, r.within_bound ? "true" : "false");
          text << buf;
        }
      }
      write_text(sweep_f.out, text.str());
      return 0;
    }
    if (*search) {
      const std::uint64_t seed = search_f.seed.value_or(0);
      const SearchResult res = lower_bound_search(MechanismSpec::standard(), search_spec, seed);
      Json j = to_json(res);
      j["seed"] = seed;
      write_text(search_f.out, j.dump(2) + "\n");
      std::fprintf(stderr, "best ratio %.6f after %zu evaluations\n", res.ratio, res.evaluations);
      return 0;
    }
    if (*verify) {
      const std::string format = verify_f.format.empty() ? "csv" : verify_f.format;
      const ResultsTable table = import_results(results_path, format);
      const VerifyReport rep = verify_results(table);
      for (const auto& v : rep.violations) std::cout << "VIOLATION " << v << '\n';
      std::cout << "rows " << rep.rows << ", converged " << rep.converged << ", violations "
                << rep.violations.size() << '\n';
      bool ok = rep.ok();
      if (!verify_f.config.empty()) {
        const ExperimentConfig cfg = apply(load_experiment_config(verify_f.config), verify_f);
        const ResultsTable rerun = run_experiment(cfg);
        const bool same = rerun == table;
        std::cout << (same ? "re-run matches results file\n" : "re-run DIFFERS from results file\n");
        ok = ok && same;
      }
      return ok ? 0 : 1;
    }
    if (*convert) {
      const std::uint64_t seed = convert_f.seed.value_or(0);
      std::optional<Instance> inst;
      if (!convert_f.config.empty()) {
        std::ifstream in(convert_f.config);
        if (!in) throw std::runtime_error("cannot open " + convert_f.config);
        inst.emplace(instance_from_json(Json::parse(in)));
      } else {
        GeneratorSpec gen;
        gen.rho = Distribution::point(1.0);
        gen.budget = Distribution::uniform(1.0, 5.0);
        inst.emplace(generate_instance(gen, seed));
      }
      const MechanismSpec mech = MechanismSpec::standard();
      const EquilibriumResult eq = best_response_dynamics(*inst, mech, default_init(*inst, mech));
      const ExpectationCheck check = expectation_check(*inst, eq.bids, mech, draws, seed, convert_f.workers.value_or(1));
      Json j = to_json(check);
      j["instance"] = to_json(*inst);
      j["bids"] = to_json(eq.bids);
      j["seed"] = seed;
      write_text(convert_f.out, j.dump(2) + "\n");
      return check.passes ? 0 : 1;
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
