#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "propauction/agent_solver.hpp"
#include "propauction/conversion.hpp"
#include "propauction/equilibrium.hpp"
#include "propauction/errors.hpp"
#include "propauction/harness.hpp"
#include "propauction/serialization.hpp"
#include "propauction/welfare.hpp"

namespace py = pybind11;
using namespace propauction;

namespace {

Json parse(const std::string& text) { return Json::parse(text); }

py::dict equilibrium_dict(const EquilibriumResult& eq) {
  py::dict d;
  d["bids"] = eq.bids.values();
  d["allocation"] = eq.allocation.shares;
  d["payments"] = eq.payments.values;
  d["rounds"] = eq.rounds;
  d["converged"] = eq.converged;
  d["feasible"] = eq.feasible;
  d["threshold_ok"] = eq.threshold_ok;
  d["improvements"] = eq.improvements;
  d["max_kkt_residual"] = eq.max_kkt_residual();
  d["movement_trace"] = eq.movement_trace;
  d["warnings"] = eq.warnings;
  return d;
}

MechanismSpec mechanism_arg(const std::string& scheme, double eps, double bid_cap) {
  switch (scheme_from_string(scheme)) {
    case Scheme::standard: return MechanismSpec::standard();
    case Scheme::power: return MechanismSpec::power(eps);
    case Scheme::modified: return MechanismSpec::modified(eps, bid_cap);
    case Scheme::general: break;
  }
  throw UsageError("the general scheme is available through mechanism JSON only");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Proportional auction equilibria, liquid welfare optima and dual certificates";

  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_RuntimeError);

  py::class_<ValuationSpec>(m, "Valuation")
      .def_static("linear", &ValuationSpec::linear, py::arg("coeffs"))
      .def_static("power_sum", &ValuationSpec::power_sum, py::arg("coeffs"), py::arg("exponents"))
      .def_static("log_sum", &ValuationSpec::log_sum, py::arg("coeffs"), py::arg("shift"))
      .def_property_readonly("kind", [](const ValuationSpec& v) { return std::string(to_string(v.kind())); })
      .def_property_readonly("items", &ValuationSpec::items)
      .def("value", [](const ValuationSpec& v, std::vector<double> d) { return eval_valuation(v, d); })
      .def("gradient", [](const ValuationSpec& v, std::vector<double> d) { return eval_gradient(v, d); });

  py::class_<AgentSpec>(m, "Agent")
      .def(py::init<ValuationSpec, double, double>(), py::arg("valuation"), py::arg("budget"), py::arg("rho"))
      .def_property_readonly("valuation", &AgentSpec::valuation)
      .def_property_readonly("budget", &AgentSpec::budget)
      .def_property_readonly("rho", &AgentSpec::rho);

  py::class_<Instance>(m, "Instance")
      .def(py::init<std::vector<AgentSpec>, std::size_t>(), py::arg("agents"), py::arg("items"))
      .def_property_readonly("agents", &Instance::agents)
      .def_property_readonly("items", &Instance::items)
      .def("agent", &Instance::agent, py::arg("i"))
      .def("to_json", [](const Instance& i) { return to_json(i).dump(); })
      .def_static("from_json", [](const std::string& s) { return instance_from_json(parse(s)); })
      .def("__eq__", [](const Instance& a, const Instance& b) { return a == b; });

  m.def("allocate", [](const Eigen::MatrixXd& bids) { return allocate_proportional(BidMatrix(bids)).shares; },
        py::arg("bids"));
  m.def(
      "payments",
      [](const Eigen::MatrixXd& bids, const std::string& scheme, double eps, double bid_cap) {
        return mechanism_payments(mechanism_arg(scheme, eps, bid_cap), BidMatrix(bids)).values;
      },
      py::arg("bids"), py::arg("scheme") = "standard", py::arg("eps") = 1.0, py::arg("bid_cap") = 1.0);
  m.def(
      "power_payments_quadrature",
      [](const Eigen::MatrixXd& bids, double eps) {
        const double k = static_cast<double>(bids.rows() - 1) * eps;
        return payment_general_quadrature(BidMatrix(bids), power_family_pricing(1.0 + k, 1.0, 1.0 / k)).values;
      },
      py::arg("bids"), py::arg("eps"));
  m.def(
      "price_identity_residual",
      [](const Eigen::MatrixXd& bids, double eps) {
        return price_identity_residual(BidMatrix(bids), MechanismSpec::power(eps));
      },
      py::arg("bids"), py::arg("eps"));

  m.def(
      "best_response",
      [](const Instance& inst, const Eigen::MatrixXd& profile, Index agent, const std::string& scheme, double eps,
         double bid_cap) {
        const auto r = best_response(inst, BidMatrix(profile), agent, mechanism_arg(scheme, eps, bid_cap));
        py::dict d;
        d["bids"] = r.bids;
        d["objective"] = r.objective;
        d["feasible"] = r.feasible;
        d["kkt_residual"] = r.kkt_residual;
        d["price_weight"] = r.price_weight;
        d["budget_active"] = r.active.budget;
        d["ros_active"] = r.active.ros;
        return d;
      },
      py::arg("instance"), py::arg("profile"), py::arg("agent"), py::arg("scheme") = "standard", py::arg("eps") = 1.0,
      py::arg("bid_cap") = 1.0);

  m.def(
      "equilibrium",
      [](const Instance& inst, const std::string& scheme, double eps, double bid_cap, const std::string& schedule,
         std::size_t max_rounds, std::uint64_t seed) {
        const MechanismSpec mech = mechanism_arg(scheme, eps, bid_cap);
        DynamicsParams p;
        p.schedule = schedule_from_string(schedule);
        p.max_rounds = max_rounds;
        p.seed = seed;
        return equilibrium_dict(best_response_dynamics(inst, mech, default_init(inst, mech), p));
      },
      py::arg("instance"), py::arg("scheme") = "standard", py::arg("eps") = 1.0, py::arg("bid_cap") = 1.0,
      py::arg("schedule") = "round-robin", py::arg("max_rounds") = 2000, py::arg("seed") = 0);

  m.def(
      "optimal_liquid_welfare",
      [](const Instance& inst, double grid_step) {
        const auto c = optimal_lw_concave(inst);
        py::dict d;
        d["value"] = c.value;
        d["allocation"] = c.allocation.shares;
        d["converged"] = c.converged;
        if (grid_step > 0.0) d["grid_value"] = optimal_lw_grid(inst, AssignmentGrid(grid_step)).value;
        return d;
      },
      py::arg("instance"), py::arg("grid_step") = 0.0);

  m.def(
      "poa_report",
      [](const Instance& inst, const Eigen::MatrixXd& bids, const std::string& scheme, double eps, double bid_cap,
         double grid_step) {
        const MechanismSpec mech = mechanism_arg(scheme, eps, bid_cap);
        const EquilibriumResult eq = evaluate_profile(inst, mech, BidMatrix(bids), 1e-8);
        const DualCertificate cert =
            mech.scheme == Scheme::standard ? build_dual_standard(inst, eq) : build_dual_power(inst, eq);
        const PoaReport r = poa_report(inst, eq, cert, AssignmentGrid(grid_step));
        py::dict d;
        d["certificate"] = to_json(cert).dump();
        d["lw_eq"] = r.lw_eq;
        d["opt"] = r.opt;
        d["opt_grid"] = r.opt_grid;
        d["dual_obj"] = r.dual_obj;
        d["ratio"] = r.ratio;
        d["certified_ratio"] = r.certified_ratio;
        d["dual_feasible"] = r.feasibility.feasible;
        d["dual_min_slack"] = r.feasibility.min_slack;
        return d;
      },
      py::arg("instance"), py::arg("bids"), py::arg("scheme") = "standard", py::arg("eps") = 1.0,
      py::arg("bid_cap") = 1.0, py::arg("grid_step") = 1.0 / 16.0);

  m.def(
      "expectation_check",
      [](const Instance& inst, const Eigen::MatrixXd& bids, std::size_t draws, std::uint64_t seed) {
        return to_json(expectation_check(inst, BidMatrix(bids), MechanismSpec::standard(), draws, seed)).dump();
      },
      py::arg("instance"), py::arg("bids"), py::arg("draws"), py::arg("seed") = 0);

  m.def(
      "generate_instance",
      [](const std::string& generator_json, std::uint64_t seed) {
        return generate_instance(generator_from_json(parse(generator_json)), seed);
      },
      py::arg("generator_json"), py::arg("seed"));

  m.def(
      "run_experiment_csv",
      [](const std::string& config_json) {
        const ExperimentConfig cfg = experiment_config_from_json(parse(config_json));
        ResultsTable table;
        {
          py::gil_scoped_release release;
          table = run_experiment(cfg);
        }
        std::ostringstream out;
        write_results_csv(out, table);
        return out.str();
      },
      py::arg("config_json"));

  m.def("results_csv_header", &results_csv_header);
  m.attr("RNG_NAME") = std::string(kRngName);
}
