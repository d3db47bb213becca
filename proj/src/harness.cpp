#include "propauction/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "propauction/errors.hpp"
#include "propauction/serialization.hpp"

namespace propauction {

// ---------------------------------------------------------------------------------------------
// Instance generation

Distribution Distribution::uniform(double lo, double hi) {
  Distribution d;
  d.kind = Kind::uniform;
  d.lo = lo;
  d.hi = hi;
  return d;
}

Distribution Distribution::log_uniform(double lo, double hi) {
  Distribution d = uniform(lo, hi);
  d.kind = Kind::log_uniform;
  return d;
}

Distribution Distribution::point(double value) {
  Distribution d;
  d.kind = Kind::point;
  d.lo = d.hi = value;
  return d;
}

Distribution Distribution::choice(std::vector<double> values) {
  Distribution d;
  d.kind = Kind::choice;
  d.values = std::move(values);
  return d;
}

void Distribution::validate(const char* what) const {
  auto fail = [&](const std::string& why) { throw UsageError(std::string(what) + " distribution: " + why); };
  switch (kind) {
    case Kind::uniform:
      if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) fail("needs finite lo <= hi");
      break;
    case Kind::log_uniform:
      if (!(lo > 0.0) || !std::isfinite(hi) || lo > hi) fail("needs 0 < lo <= hi");
      break;
    case Kind::point:
      if (!std::isfinite(lo)) fail("needs a finite value");
      break;
    case Kind::choice:
      if (values.empty()) fail("needs at least one value");
      for (double v : values) {
        if (!std::isfinite(v)) fail("values must be finite");
      }
      break;
  }
}

double Distribution::sample(Rng& rng) const {
  switch (kind) {
    case Kind::uniform:
      return rng.uniform(lo, hi);
    case Kind::log_uniform:
      return std::exp(rng.uniform(std::log(lo), std::log(hi)));
    case Kind::point:
      return lo;
    case Kind::choice:
      return values[rng.below(values.size())];
  }
  return lo;
}

double Distribution::min_value() const {
  if (kind == Kind::choice) return *std::min_element(values.begin(), values.end());
  return lo;
}

namespace {

double max_value(const Distribution& d) {
  if (d.kind == Distribution::Kind::choice) return *std::max_element(d.values.begin(), d.values.end());
  return d.hi;
}

}  // namespace

void GeneratorSpec::validate() const {
  if (agents.min < 1 || agents.min > agents.max) throw UsageError("agent range must satisfy 1 <= min <= max");
  if (items.min < 1 || items.min > items.max) throw UsageError("item range must satisfy 1 <= min <= max");
  if (kinds.empty()) throw UsageError("generator needs at least one valuation kind");
  value.validate("value");
  budget.validate("budget");
  rho.validate("rho");
  exponent.validate("exponent");
  shift.validate("shift");
  if (value.min_value() < 0.0) throw UsageError("valuation coefficients must be nonnegative");
  if (!(budget.min_value() > 0.0)) throw UsageError("budgets must be positive");
  if (rho.min_value() < 0.0 || max_value(rho) > 1.0) throw UsageError("rho must lie in [0, 1]");
  if (!(exponent.min_value() > 0.0) || max_value(exponent) > 1.0) {
    throw UsageError("power-sum exponents must lie in (0, 1]");
  }
  if (!(shift.min_value() > 0.0)) throw UsageError("log-sum shift must be positive");
}

Instance generate_instance(const GeneratorSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const std::size_t n = spec.agents.min + rng.below(spec.agents.max - spec.agents.min + 1);
  const std::size_t m = spec.items.min + rng.below(spec.items.max - spec.items.min + 1);
  std::vector<AgentSpec> agents;
  for (std::size_t i = 0; i < n; ++i) {
    const ValuationKind kind = spec.kinds[rng.below(spec.kinds.size())];
    std::vector<double> coeffs(m);
    for (auto& c : coeffs) c = spec.value.sample(rng);
    ValuationSpec val = ValuationSpec::linear(coeffs);
    if (kind == ValuationKind::power_sum) {
      std::vector<double> q(m);
      for (auto& x : q) x = spec.exponent.sample(rng);
      val = ValuationSpec::power_sum(coeffs, q);
    } else if (kind == ValuationKind::log_sum) {
      val = ValuationSpec::log_sum(coeffs, spec.shift.sample(rng));
    }
    const double budget = spec.budget.sample(rng);
    const double rho = spec.rho.sample(rng);
    agents.emplace_back(std::move(val), budget, rho);
  }
  return Instance(std::move(agents), m);
}

// ---------------------------------------------------------------------------------------------
// Experiments

void ExperimentConfig::validate() const {
  generator.validate();
  if (restarts == 0) throw UsageError("restarts must be at least 1");
  AssignmentGrid(grid_step, grid_budget);
  if (output_format != "csv" && output_format != "json") {
    throw UsageError("output format must be csv or json");
  }
  if (!eps_auto && (mechanism.scheme == Scheme::power || mechanism.scheme == Scheme::modified)) {
    for (std::size_t n = std::max<std::size_t>(2, generator.agents.min); n <= generator.agents.max; ++n) {
      mechanism.validate(n);
    }
  }
}

double certified_bound(const std::string& mechanism, double eps) {
  if (mechanism == "standard") return 2.0;
  if (mechanism == "power" || mechanism == "modified") return 1.0 + eps;
  return std::numeric_limits<double>::infinity();
}

MechanismSpec mechanism_for(const ExperimentConfig& config, std::size_t agents) {
  MechanismSpec mech = config.mechanism;
  if (config.eps_auto && agents >= 2) mech.eps = 1.0 / static_cast<double>(agents - 1);
  return mech;
}

namespace {

BidMatrix random_init(const Instance& instance, const MechanismSpec& mech, Rng& rng) {
  const auto n = static_cast<Index>(instance.agents());
  const auto m = static_cast<Index>(instance.items());
  BidMatrix init(n, m);
  for (Index i = 0; i < n; ++i) {
    const double w = instance.agent(static_cast<std::size_t>(i)).budget();
    for (Index j = 0; j < m; ++j) {
      double b = rng.uniform() * w / static_cast<double>(m);
      if (mech.scheme == Scheme::modified) b = std::min(b, mech.bid_cap);
      init.set(i, j, b);
    }
  }
  return init;
}

double ratio_of(double num, double den) {
  if (den > 0.0) return num / den;
  return num > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
}

}  // namespace

ResultsTable run_trial(const ExperimentConfig& config, std::size_t trial) {
  const std::uint64_t seed = derive_seed(config.seed, trial);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ResultsRow base;
  base.instance_id = trial;
  base.mechanism = std::string(to_string(config.mechanism.scheme));
  base.seed = seed;
  base.eps = nan;
  base.lw_eq = base.opt = base.opt_grid = base.dual_obj = base.dual_min_slack = nan;
  base.ratio = base.certified_ratio = base.max_kkt = nan;

  ResultsTable rows;
  std::optional<Instance> instance;
  try {
    instance.emplace(generate_instance(config.generator, seed));
  } catch (const std::exception& e) {
    base.status = "error";
    base.error = e.what();
    rows.push_back(base);
    return rows;
  }
  base.n = instance->agents();
  base.m = instance->items();
  const MechanismSpec mech = mechanism_for(config, base.n);
  if (mech.scheme == Scheme::power || mech.scheme == Scheme::modified) base.eps = mech.eps;

  // Welfare optima do not depend on the restart.
  std::optional<double> opt_concave;
  std::optional<double> opt_grid;
  const AssignmentGrid grid(config.grid_step, config.grid_budget);

  for (std::size_t r = 0; r < config.restarts; ++r) {
    ResultsRow row = base;
    row.restart = r;
    try {
      BidMatrix init = default_init(*instance, mech);
      if (config.init == InitKind::random || r > 0) {
        Rng rng(derive_seed(seed, r + 1));
        init = random_init(*instance, mech, rng);
      }
      DynamicsParams dyn = config.dynamics;
      dyn.seed = derive_seed(derive_seed(seed, config.dynamics.seed), 1000 + r);
      const EquilibriumResult eq = best_response_dynamics(*instance, mech, init, dyn);
      row.converged = eq.converged;
      row.rounds = eq.rounds;
      row.max_kkt = eq.max_kkt_residual();
      row.lw_eq = liquid_welfare(*instance, eq.allocation);
      if (!opt_concave) opt_concave = optimal_lw_concave(*instance).value;
      if (!opt_grid) {
        const bool fits = grid_assignment_count(base.n, base.m, grid) <= grid.budget();
        opt_grid = fits ? optimal_lw_grid(*instance, grid).value : nan;
      }
      row.opt_grid = *opt_grid;
      row.opt = std::isnan(*opt_grid) ? *opt_concave : std::max(*opt_concave, *opt_grid);
      row.ratio = ratio_of(row.opt, row.lw_eq);

      std::optional<DualCertificate> cert;
      try {
        if (mech.scheme == Scheme::standard) {
          cert = build_dual_standard(*instance, eq);
        } else if (mech.scheme == Scheme::power || mech.scheme == Scheme::modified) {
          cert = build_dual_power(*instance, eq);
        }
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      if (cert) {
        const FeasibilityReport feas = check_dual_feasibility(*cert, *instance, grid);
        row.dual_obj = cert->objective;
        row.dual_min_slack = feas.min_slack;
        row.dual_feasible = feas.feasible;
        row.certified_ratio = ratio_of(row.dual_obj, row.lw_eq);
        row.status = "ok";
      } else {
        row.status = "no-certificate";
      }
      if (!eq.threshold_ok && row.error.empty()) row.error = eq.warnings.front();
    } catch (const std::exception& e) {
      row.status = "error";
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

ResultsTable run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<ResultsTable> per_trial(config.trials);
  std::size_t workers = config.workers == 0 ? std::thread::hardware_concurrency() : config.workers;
  workers = std::max<std::size_t>(1, std::min(workers, config.trials));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t t = next++; t < config.trials; t = next++) per_trial[t] = run_trial(config, t);
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  ResultsTable out;
  for (auto& rows : per_trial) {
    for (auto& r : rows) out.push_back(std::move(r));
  }
  return out;
}

std::vector<SweepRow> poa_sweep_n(const ExperimentConfig& config, const std::vector<std::size_t>& n_values,
                                  std::optional<double> eps_override) {
  if (config.mechanism.scheme != Scheme::power && config.mechanism.scheme != Scheme::modified) {
    throw UsageError("the sweep needs the power or modified mechanism");
  }
  std::vector<SweepRow> out;
  for (std::size_t n : n_values) {
    if (n < 2) throw UsageError("sweep values of n must be at least 2");
    ExperimentConfig cfg = config;
    cfg.generator.agents = {n, n};
    cfg.eps_auto = !eps_override.has_value();
    if (eps_override) cfg.mechanism.eps = *eps_override;
    SweepRow row;
    row.n = n;
    row.eps = mechanism_for(cfg, n).eps;
    row.bound = 1.0 + row.eps;
    for (const ResultsRow& r : run_experiment(cfg)) {
      ++row.rows;
      if (!r.converged || r.status != "ok") continue;
      ++row.converged;
      row.max_ratio = std::max(row.max_ratio, r.ratio);
      row.max_certified_ratio = std::max(row.max_certified_ratio, r.certified_ratio);
      if (!(r.certified_ratio <= row.bound + 1e-6) || !(r.ratio <= r.certified_ratio + 1e-6)) {
        row.within_bound = false;
      }
    }
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Lower-bound search

InstanceRatio evaluate_instance_ratio(const Instance& instance, const MechanismSpec& mech) {
  InstanceRatio out;
  DynamicsParams dyn;
  dyn.max_rounds = 500;
  const EquilibriumResult eq = best_response_dynamics(instance, mech, default_init(instance, mech), dyn);
  out.converged = eq.converged;
  out.bids = eq.bids;
  out.lw_eq = liquid_welfare(instance, eq.allocation);
  out.opt = optimal_lw_concave(instance).value;
  if (instance.agents() * instance.items() <= 6) {
    out.opt = std::max(out.opt, optimal_lw_grid(instance, AssignmentGrid(1.0 / 16.0)).value);
  }
  out.ratio = out.converged ? ratio_of(out.opt, out.lw_eq) : 0.0;
  return out;
}

namespace {

struct SearchPoint {
  std::vector<std::vector<double>> values;
  std::vector<double> budgets;
};

Instance build_search_instance(const SearchPoint& p, double rho) {
  std::vector<AgentSpec> agents;
  for (std::size_t i = 0; i < p.budgets.size(); ++i) {
    agents.emplace_back(ValuationSpec::linear(p.values[i]), p.budgets[i], rho);
  }
  return Instance(std::move(agents), p.values.front().size());
}

}  // namespace

SearchResult lower_bound_search(const MechanismSpec& mech, const SearchSpec& spec, std::uint64_t seed) {
  if (mech.scheme != Scheme::standard) throw UsageError("lower-bound search runs on the standard mechanism");
  if (spec.agents < 1 || spec.items < 1) throw UsageError("search needs at least one agent and one item");
  if (!(spec.value_lo > 0.0 && spec.value_lo <= spec.value_hi && spec.budget_lo > 0.0 &&
        spec.budget_lo <= spec.budget_hi)) {
    throw UsageError("search ranges must be positive with lo <= hi");
  }
  Rng rng(seed);
  auto log_draw = [&](double lo, double hi) { return std::exp(rng.uniform(std::log(lo), std::log(hi))); };
  auto fresh = [&] {
    SearchPoint p;
    p.values.assign(spec.agents, std::vector<double>(spec.items));
    p.budgets.resize(spec.agents);
    for (std::size_t i = 0; i < spec.agents; ++i) {
      for (auto& v : p.values[i]) v = log_draw(spec.value_lo, spec.value_hi);
      p.budgets[i] = log_draw(spec.budget_lo, spec.budget_hi);
    }
    return p;
  };
  auto perturb = [&](const SearchPoint& base) {
    SearchPoint p = base;
    auto jiggle = [&](double x, double lo, double hi) {
      return std::clamp(x * std::exp(spec.step * (2.0 * rng.uniform() - 1.0)), lo, hi);
    };
    for (std::size_t i = 0; i < spec.agents; ++i) {
      for (auto& v : p.values[i]) v = jiggle(v, spec.value_lo, spec.value_hi);
      p.budgets[i] = jiggle(p.budgets[i], spec.budget_lo, spec.budget_hi);
    }
    return p;
  };

  SearchPoint current = fresh();
  Instance current_instance = build_search_instance(current, spec.rho);
  InstanceRatio current_ratio = evaluate_instance_ratio(current_instance, mech);
  SearchResult best{current_instance, BidMatrix(0, 0), 0.0, 0.0, 0.0, 0, {}};
  best.equilibrium = current_ratio.bids;
  best.ratio = current_ratio.ratio;
  best.lw_eq = current_ratio.lw_eq;
  best.opt = current_ratio.opt;
  best.evaluations = 1;

  for (std::size_t it = 0; it < spec.budget; ++it) {
    const SearchPoint candidate = rng.uniform() < 0.2 ? fresh() : perturb(current);
    const Instance inst = build_search_instance(candidate, spec.rho);
    const InstanceRatio r = evaluate_instance_ratio(inst, mech);
    ++best.evaluations;
    if (r.ratio > current_ratio.ratio) {
      current = candidate;
      current_ratio = r;
      if (r.ratio > best.ratio) {
        best.instance = inst;
        best.equilibrium = r.bids;
        best.ratio = r.ratio;
        best.lw_eq = r.lw_eq;
        best.opt = r.opt;
      }
    }
    best.trace.push_back(best.ratio);
  }
  return best;
}

// ---------------------------------------------------------------------------------------------
// Results I/O

bool ResultsRow::operator==(const ResultsRow& o) const {
  auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
  return instance_id == o.instance_id && restart == o.restart && mechanism == o.mechanism && n == o.n &&
         m == o.m && same(eps, o.eps) && same(lw_eq, o.lw_eq) && same(opt, o.opt) &&
         same(opt_grid, o.opt_grid) && same(dual_obj, o.dual_obj) && same(dual_min_slack, o.dual_min_slack) &&
         dual_feasible == o.dual_feasible && same(ratio, o.ratio) && same(certified_ratio, o.certified_ratio) &&
         converged == o.converged && rounds == o.rounds && same(max_kkt, o.max_kkt) && seed == o.seed &&
         status == o.status && error == o.error;
}

std::string results_csv_header() {
  return "instance_id,restart,mechanism,n,m,eps,lw_eq,opt,opt_grid,dual_obj,dual_min_slack,"
         "dual_feasible,ratio,certified_ratio,converged,rounds,max_kkt,seed,status,error";
}

namespace {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double x = std::stod(s, &used);
  if (used != s.size()) throw UsageError("bad number '" + s + "' in results file");
  return x;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') {
      out += "\"\"";
    } else if (c == '\n' || c == '\r') {
      out += ' ';
    } else {
      out += c;
    }
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw UsageError("bad boolean '" + s + "' in results file");
}

}  // namespace

void write_results_csv(std::ostream& out, const ResultsTable& table) {
  out << results_csv_header() << '\n';
  for (const ResultsRow& r : table) {
    out << r.instance_id << ',' << r.restart << ',' << r.mechanism << ',' << r.n << ',' << r.m << ','
        << format_double(r.eps) << ',' << format_double(r.lw_eq) << ',' << format_double(r.opt) << ','
        << format_double(r.opt_grid) << ',' << format_double(r.dual_obj) << ','
        << format_double(r.dual_min_slack) << ',' << (r.dual_feasible ? "true" : "false") << ','
        << format_double(r.ratio) << ',' << format_double(r.certified_ratio) << ','
        << (r.converged ? "true" : "false") << ',' << r.rounds << ',' << format_double(r.max_kkt) << ','
        << r.seed << ',' << r.status << ',' << quote(r.error) << '\n';
  }
}

ResultsTable read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != results_csv_header()) {
    throw UsageError("results file does not start with the expected header");
  }
  ResultsTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 20) throw UsageError("results row has " + std::to_string(f.size()) + " fields, expected 20");
    ResultsRow r;
    r.instance_id = std::stoull(f[0]);
    r.restart = std::stoull(f[1]);
    r.mechanism = f[2];
    r.n = std::stoull(f[3]);
    r.m = std::stoull(f[4]);
    r.eps = parse_double(f[5]);
    r.lw_eq = parse_double(f[6]);
    r.opt = parse_double(f[7]);
    r.opt_grid = parse_double(f[8]);
    r.dual_obj = parse_double(f[9]);
    r.dual_min_slack = parse_double(f[10]);
    r.dual_feasible = parse_bool(f[11]);
    r.ratio = parse_double(f[12]);
    r.certified_ratio = parse_double(f[13]);
    r.converged = parse_bool(f[14]);
    r.rounds = std::stoull(f[15]);
    r.max_kkt = parse_double(f[16]);
    r.seed = std::stoull(f[17]);
    r.status = f[18];
    r.error = f[19];
    table.push_back(std::move(r));
  }
  return table;
}

void export_results(const ResultsTable& table, const std::string& path, const std::string& format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  if (format == "csv") {
    write_results_csv(out, table);
  } else if (format == "json") {
    Json rows = Json::array();
    for (const auto& r : table) rows.push_back(to_json(r));
    out << Json{{"schema_version", ExperimentConfig::kSchemaVersion}, {"rows", rows}}.dump(2) << '\n';
  } else {
    throw UsageError("unknown results format '" + format + "'");
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

ResultsTable import_results(const std::string& path, const std::string& format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  if (format == "csv") return read_results_csv(in);
  if (format == "json") {
    Json j;
    in >> j;
    ResultsTable table;
    for (const auto& r : j.at("rows")) table.push_back(results_row_from_json(r));
    return table;
  }
  throw UsageError("unknown results format '" + format + "'");
}

VerifyReport verify_results(const ResultsTable& table) {
  VerifyReport rep;
  for (const ResultsRow& r : table) {
    ++rep.rows;
    const std::string where = "instance " + std::to_string(r.instance_id) + " restart " + std::to_string(r.restart);
    if (r.status == "error") continue;
    if (std::isfinite(r.ratio) && r.ratio < 1.0 - 1e-9) {
      rep.violations.push_back(where + ": ratio " + format_double(r.ratio) + " below 1");
    }
    if (!r.converged) continue;
    ++rep.converged;
    if (r.status != "ok") continue;
    if (!r.dual_feasible) {
      rep.violations.push_back(where + ": certificate infeasible (min slack " + format_double(r.dual_min_slack) + ")");
      continue;
    }
    if (r.ratio > r.certified_ratio + 1e-6) {
      rep.violations.push_back(where + ": ratio above certified ratio");
    }
    const double bound = certified_bound(r.mechanism, r.eps);
    if (r.certified_ratio > bound + 1e-6) {
      rep.violations.push_back(where + ": certified ratio " + format_double(r.certified_ratio) +
                               " above bound " + format_double(bound));
    }
  }
  return rep;
}

}  // namespace propauction
