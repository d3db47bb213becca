#include "propauction/serialization.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "propauction/errors.hpp"

namespace propauction {

namespace {

const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw UsageError(std::string("missing key '") + key + "'");
  return j.at(key);
}

std::vector<double> number_list(const Json& j) {
  if (!j.is_array()) throw UsageError("expected a list of numbers");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(number_from_json(x));
  return out;
}

Json number_list_to_json(const std::vector<double>& xs) {
  Json arr = Json::array();
  for (double x : xs) arr.push_back(number_to_json(x));
  return arr;
}

}  // namespace

Json number_to_json(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double number_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw UsageError("expected a number, got " + j.dump());
}

// ---------------------------------------------------------------------------------------------
// Model

Json to_json(const ValuationSpec& v) {
  Json j{{"kind", std::string(to_string(v.kind()))}, {"coeffs", number_list_to_json(v.coeffs())}};
  if (v.kind() == ValuationKind::power_sum) j["q"] = number_list_to_json(v.exponents());
  if (v.kind() == ValuationKind::log_sum) j["s"] = v.shift();
  return j;
}

ValuationSpec valuation_from_json(const Json& j) {
  const ValuationKind kind = valuation_kind_from_string(require(j, "kind").get<std::string>());
  std::vector<double> coeffs = number_list(require(j, "coeffs"));
  switch (kind) {
    case ValuationKind::linear:
      return ValuationSpec::linear(std::move(coeffs));
    case ValuationKind::power_sum: {
      const Json& q = require(j, "q");
      std::vector<double> qs = q.is_array() ? number_list(q) : std::vector<double>(coeffs.size(), q.get<double>());
      return ValuationSpec::power_sum(std::move(coeffs), std::move(qs));
    }
    case ValuationKind::log_sum:
      return ValuationSpec::log_sum(std::move(coeffs), j.value("s", 1.0));
  }
  throw UsageError("unknown valuation kind");
}

Json to_json(const AgentSpec& a) {
  Json j = to_json(a.valuation());
  j["budget"] = a.budget();
  j["rho"] = a.rho();
  return j;
}

Json to_json(const Instance& inst) {
  Json agents = Json::array();
  for (const auto& a : inst.agent_list()) agents.push_back(to_json(a));
  return Json{{"items", inst.items()}, {"agents", agents}};
}

Instance instance_from_json(const Json& j) {
  std::vector<AgentSpec> agents;
  for (const auto& a : require(j, "agents")) {
    agents.emplace_back(valuation_from_json(a), require(a, "budget").get<double>(), require(a, "rho").get<double>());
  }
  const std::size_t items = j.contains("items") ? j.at("items").get<std::size_t>()
                                                 : (agents.empty() ? 0 : agents.front().valuation().items());
  return Instance(std::move(agents), items);
}

Json to_json(const BidMatrix& bids) {
  Json rows = Json::array();
  for (Index i = 0; i < bids.agents(); ++i) rows.push_back(bids.row(i));
  return rows;
}

BidMatrix bids_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw UsageError("bids must be a non-empty list of rows");
  const auto n = static_cast<Index>(j.size());
  const auto m = static_cast<Index>(j.at(0).size());
  Eigen::MatrixXd values(n, m);
  for (Index i = 0; i < n; ++i) {
    const auto row = number_list(j.at(static_cast<std::size_t>(i)));
    if (static_cast<Index>(row.size()) != m) throw UsageError("bid rows have different lengths");
    for (Index j2 = 0; j2 < m; ++j2) values(i, j2) = row[static_cast<std::size_t>(j2)];
  }
  return BidMatrix(values);
}

// ---------------------------------------------------------------------------------------------
// Mechanism and solver parameters

Json to_json(const MechanismSpec& mech, bool eps_auto) {
  Json j{{"scheme", std::string(to_string(mech.scheme))},
         {"eps", eps_auto ? Json(nullptr) : Json(mech.eps)},
         {"bid_cap", mech.bid_cap},
         {"quad_rel_tol", mech.quadrature.rel_tol},
         {"quad_max_subdiv", mech.quadrature.max_subdivisions}};
  if (mech.scheme == Scheme::general) {
    j["general"] = {{"exponent", mech.general_exponent},
                    {"scale", mech.general_scale},
                    {"entry_scale", mech.general_entry_scale}};
  }
  return j;
}

MechanismSpec mechanism_from_json(const Json& j, bool* eps_auto) {
  const Scheme scheme = scheme_from_string(require(j, "scheme").get<std::string>());
  QuadratureSettings quad;
  quad.rel_tol = j.value("quad_rel_tol", quad.rel_tol);
  quad.max_subdivisions = j.value("quad_max_subdiv", quad.max_subdivisions);
  const bool auto_eps = !j.contains("eps") || j.at("eps").is_null();
  if (eps_auto) *eps_auto = auto_eps && (scheme == Scheme::power || scheme == Scheme::modified);
  const double eps = auto_eps ? 0.0 : j.at("eps").get<double>();
  MechanismSpec mech;
  switch (scheme) {
    case Scheme::standard:
      mech = MechanismSpec::standard();
      break;
    case Scheme::power:
      mech = MechanismSpec::power(eps);
      break;
    case Scheme::modified:
      mech = MechanismSpec::modified(eps, j.value("bid_cap", 1.0));
      break;
    case Scheme::general: {
      const Json& g = require(j, "general");
      mech = MechanismSpec::general_power_family(require(g, "exponent").get<double>(), g.value("scale", 1.0),
                                                 g.value("entry_scale", 0.0), quad);
      break;
    }
  }
  mech.quadrature = quad;
  return mech;
}

Json to_json(const SolverParams& p) {
  return Json{{"max_iters", p.max_iters},
              {"kkt_tol", p.kkt_tol},
              {"uncontested_bid", p.uncontested_bid},
              {"grid_step", p.grid_step},
              {"bid_upper_strategy", std::string(to_string(p.bid_upper_strategy))},
              {"bid_upper", p.bid_upper}};
}

SolverParams solver_params_from_json(const Json& j) {
  SolverParams p;
  p.max_iters = j.value("max_iters", p.max_iters);
  p.kkt_tol = j.value("kkt_tol", p.kkt_tol);
  p.uncontested_bid = j.value("uncontested_bid", p.uncontested_bid);
  p.grid_step = j.value("grid_step", p.grid_step);
  if (j.contains("bid_upper_strategy")) {
    p.bid_upper_strategy = bid_upper_strategy_from_string(j.at("bid_upper_strategy").get<std::string>());
  }
  p.bid_upper = j.value("bid_upper", p.bid_upper);
  return p;
}

Json to_json(const DynamicsParams& p) {
  return Json{{"schedule", std::string(to_string(p.schedule))},
              {"nash_tol", p.nash_tol},
              {"move_tol", p.move_tol},
              {"max_rounds", p.max_rounds},
              {"seed", p.seed},
              {"damping", p.damping}};
}

DynamicsParams dynamics_params_from_json(const Json& j) {
  DynamicsParams p;
  if (j.contains("schedule")) p.schedule = schedule_from_string(j.at("schedule").get<std::string>());
  p.nash_tol = j.value("nash_tol", p.nash_tol);
  p.move_tol = j.value("move_tol", p.move_tol);
  p.max_rounds = j.value("max_rounds", p.max_rounds);
  p.seed = j.value("seed", p.seed);
  p.damping = j.value("damping", p.damping);
  return p;
}

// ---------------------------------------------------------------------------------------------
// Generator and experiment configuration

Json to_json(const Distribution& d) {
  switch (d.kind) {
    case Distribution::Kind::uniform:
      return Json{{"dist", "uniform"}, {"lo", d.lo}, {"hi", d.hi}};
    case Distribution::Kind::log_uniform:
      return Json{{"dist", "log-uniform"}, {"lo", d.lo}, {"hi", d.hi}};
    case Distribution::Kind::point:
      return Json{{"dist", "point"}, {"value", d.lo}};
    case Distribution::Kind::choice:
      return Json{{"dist", "choice"}, {"values", d.values}};
  }
  return Json();
}

Distribution distribution_from_json(const Json& j) {
  if (j.is_number()) return Distribution::point(j.get<double>());
  const auto kind = require(j, "dist").get<std::string>();
  if (kind == "uniform") return Distribution::uniform(require(j, "lo").get<double>(), require(j, "hi").get<double>());
  if (kind == "log-uniform") {
    return Distribution::log_uniform(require(j, "lo").get<double>(), require(j, "hi").get<double>());
  }
  if (kind == "point") return Distribution::point(require(j, "value").get<double>());
  if (kind == "choice") return Distribution::choice(number_list(require(j, "values")));
  throw UsageError("unknown distribution '" + kind + "'");
}

namespace {

Json range_to_json(const CountRange& r) { return Json{{"min", r.min}, {"max", r.max}}; }

CountRange range_from_json(const Json& j) {
  if (j.is_number_integer()) {
    const auto v = j.get<std::size_t>();
    return {v, v};
  }
  return {require(j, "min").get<std::size_t>(), require(j, "max").get<std::size_t>()};
}

}  // namespace

Json to_json(const GeneratorSpec& g) {
  Json kinds = Json::array();
  for (auto k : g.kinds) kinds.push_back(std::string(to_string(k)));
  return Json{{"agents", range_to_json(g.agents)}, {"items", range_to_json(g.items)},
              {"kinds", kinds},                    {"value", to_json(g.value)},
              {"budget", to_json(g.budget)},       {"rho", to_json(g.rho)},
              {"exponent", to_json(g.exponent)},   {"shift", to_json(g.shift)}};
}

GeneratorSpec generator_from_json(const Json& j) {
  GeneratorSpec g;
  if (j.contains("agents")) g.agents = range_from_json(j.at("agents"));
  if (j.contains("items")) g.items = range_from_json(j.at("items"));
  if (j.contains("kinds")) {
    g.kinds.clear();
    for (const auto& k : j.at("kinds")) g.kinds.push_back(valuation_kind_from_string(k.get<std::string>()));
  }
  if (j.contains("value")) g.value = distribution_from_json(j.at("value"));
  if (j.contains("budget")) g.budget = distribution_from_json(j.at("budget"));
  if (j.contains("rho")) g.rho = distribution_from_json(j.at("rho"));
  if (j.contains("exponent")) g.exponent = distribution_from_json(j.at("exponent"));
  if (j.contains("shift")) g.shift = distribution_from_json(j.at("shift"));
  g.validate();
  return g;
}

Json to_json(const ExperimentConfig& c) {
  Json dyn = to_json(c.dynamics);
  dyn["init"] = c.init == InitKind::random ? "random" : "default";
  dyn["restarts"] = c.restarts;
  return Json{{"schema_version", ExperimentConfig::kSchemaVersion},
              {"trials", c.trials},
              {"seed", c.seed},
              {"workers", c.workers},
              {"generator", to_json(c.generator)},
              {"mechanism", to_json(c.mechanism, c.eps_auto)},
              {"dynamics", dyn},
              {"solver", to_json(c.dynamics.solver)},
              {"welfare", {{"grid_step", c.grid_step}, {"grid_budget", c.grid_budget}}},
              {"output", {{"path", c.output_path}, {"format", c.output_format}}}};
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  const int version = require(j, "schema_version").get<int>();
  if (version != ExperimentConfig::kSchemaVersion) {
    throw UsageError("unsupported schema_version " + std::to_string(version));
  }
  ExperimentConfig c;
  c.trials = j.value("trials", c.trials);
  c.seed = j.value("seed", c.seed);
  c.workers = j.value("workers", c.workers);
  if (j.contains("generator")) c.generator = generator_from_json(j.at("generator"));
  if (j.contains("mechanism")) c.mechanism = mechanism_from_json(j.at("mechanism"), &c.eps_auto);
  if (j.contains("dynamics")) {
    const Json& d = j.at("dynamics");
    c.dynamics = dynamics_params_from_json(d);
    const auto init = d.value("init", std::string("default"));
    if (init == "random") {
      c.init = InitKind::random;
    } else if (init == "default") {
      c.init = InitKind::default_init;
    } else {
      throw UsageError("unknown init '" + init + "'");
    }
    c.restarts = d.value("restarts", c.restarts);
  }
  if (j.contains("solver")) c.dynamics.solver = solver_params_from_json(j.at("solver"));
  if (j.contains("welfare")) {
    c.grid_step = j.at("welfare").value("grid_step", c.grid_step);
    c.grid_budget = j.at("welfare").value("grid_budget", c.grid_budget);
  }
  if (j.contains("output")) {
    c.output_path = j.at("output").value("path", c.output_path);
    c.output_format = j.at("output").value("format", c.output_format);
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw UsageError("config " + path + " is not valid JSON: " + e.what());
  }
  return experiment_config_from_json(j);
}

// ---------------------------------------------------------------------------------------------
// Reports

Json to_json(const DualCertificate& c) {
  return Json{{"alpha", number_list_to_json(c.alpha)},
              {"beta", number_list_to_json(c.beta)},
              {"objective", number_to_json(c.objective)},
              {"tag", std::string(to_string(c.tag))}};
}

DualCertificate certificate_from_json(const Json& j) {
  DualCertificate c;
  c.alpha = number_list(require(j, "alpha"));
  c.beta = number_list(require(j, "beta"));
  c.objective = number_from_json(require(j, "objective"));
  c.tag = certificate_tag_from_string(require(j, "tag").get<std::string>());
  return c;
}

Json to_json(const FeasibilityReport& r) {
  Json worst = Json::array();
  for (const auto& p : r.worst) worst.push_back(Json::array({p.agent, p.item, p.fraction}));
  return Json{{"min_slack", number_to_json(r.min_slack)}, {"worst", worst}, {"feasible", r.feasible}};
}

Json to_json(const ConversionReport& r) {
  return Json{{"agent", r.agent},
              {"mean_value", number_to_json(r.mean_value)},
              {"mean_payment", number_to_json(r.mean_payment)},
              {"expected_value", number_to_json(r.expected_value)},
              {"expected_payment", number_to_json(r.expected_payment)},
              {"sigma_value", number_to_json(r.sigma_value)},
              {"sigma_payment", number_to_json(r.sigma_payment)},
              {"draws", r.draws},
              {"seed", r.seed},
              {"passes", r.passes}};
}

Json to_json(const ExpectationCheck& r) {
  Json agents = Json::array();
  for (const auto& a : r.agents) agents.push_back(to_json(a));
  return Json{{"rng", std::string(kRngName)}, {"passes", r.passes}, {"agents", agents}};
}

Json to_json(const ResultsRow& r) {
  return Json{{"instance_id", r.instance_id},
              {"restart", r.restart},
              {"mechanism", r.mechanism},
              {"n", r.n},
              {"m", r.m},
              {"eps", number_to_json(r.eps)},
              {"lw_eq", number_to_json(r.lw_eq)},
              {"opt", number_to_json(r.opt)},
              {"opt_grid", number_to_json(r.opt_grid)},
              {"dual_obj", number_to_json(r.dual_obj)},
              {"dual_min_slack", number_to_json(r.dual_min_slack)},
              {"dual_feasible", r.dual_feasible},
              {"ratio", number_to_json(r.ratio)},
              {"certified_ratio", number_to_json(r.certified_ratio)},
              {"converged", r.converged},
              {"rounds", r.rounds},
              {"max_kkt", number_to_json(r.max_kkt)},
              {"seed", r.seed},
              {"status", r.status},
              {"error", r.error}};
}

ResultsRow results_row_from_json(const Json& j) {
  ResultsRow r;
  r.instance_id = require(j, "instance_id").get<std::size_t>();
  r.restart = require(j, "restart").get<std::size_t>();
  r.mechanism = require(j, "mechanism").get<std::string>();
  r.n = require(j, "n").get<std::size_t>();
  r.m = require(j, "m").get<std::size_t>();
  r.eps = number_from_json(require(j, "eps"));
  r.lw_eq = number_from_json(require(j, "lw_eq"));
  r.opt = number_from_json(require(j, "opt"));
  r.opt_grid = number_from_json(require(j, "opt_grid"));
  r.dual_obj = number_from_json(require(j, "dual_obj"));
  r.dual_min_slack = number_from_json(require(j, "dual_min_slack"));
  r.dual_feasible = require(j, "dual_feasible").get<bool>();
  r.ratio = number_from_json(require(j, "ratio"));
  r.certified_ratio = number_from_json(require(j, "certified_ratio"));
  r.converged = require(j, "converged").get<bool>();
  r.rounds = require(j, "rounds").get<std::size_t>();
  r.max_kkt = number_from_json(require(j, "max_kkt"));
  r.seed = require(j, "seed").get<std::uint64_t>();
  r.status = require(j, "status").get<std::string>();
  r.error = require(j, "error").get<std::string>();
  return r;
}

Json to_json(const SearchResult& r) {
  return Json{{"instance", to_json(r.instance)},
              {"equilibrium", to_json(r.equilibrium)},
              {"ratio", number_to_json(r.ratio)},
              {"lw_eq", number_to_json(r.lw_eq)},
              {"opt", number_to_json(r.opt)},
              {"evaluations", r.evaluations},
              {"trace", number_list_to_json(r.trace)}};
}

Json to_json(const SweepRow& r) {
  return Json{{"n", r.n},
              {"eps", r.eps},
              {"bound", r.bound},
              {"rows", r.rows},
              {"converged", r.converged},
              {"max_ratio", number_to_json(r.max_ratio)},
              {"max_certified_ratio", number_to_json(r.max_certified_ratio)},
              {"within_bound", r.within_bound}};
}

}  // namespace propauction
