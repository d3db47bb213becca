#include "propauction/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "propauction/errors.hpp"
#include "propauction/rng.hpp"

namespace propauction {

std::string_view to_string(Schedule s) {
  switch (s) {
    case Schedule::round_robin:
      return "round-robin";
    case Schedule::random_permutation:
      return "random-permutation";
    case Schedule::simultaneous:
      return "simultaneous";
  }
  return "?";
}

Schedule schedule_from_string(std::string_view name) {
  if (name == "round-robin") return Schedule::round_robin;
  if (name == "random-permutation") return Schedule::random_permutation;
  if (name == "simultaneous") return Schedule::simultaneous;
  throw UsageError("unknown schedule '" + std::string(name) + "'");
}

double EquilibriumResult::max_kkt_residual() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < kkt.size(); ++i) {
    if (!kkt_errors[i].empty()) continue;
    worst = std::max(worst, kkt[i].max_residual);
  }
  return worst;
}

BidMatrix default_init(const Instance& instance, const MechanismSpec& mech) {
  const auto n = static_cast<Index>(instance.agents());
  const auto m = static_cast<Index>(instance.items());
  BidMatrix init(n, m);
  for (Index i = 0; i < n; ++i) {
    double b = instance.agent(static_cast<std::size_t>(i)).budget() / (2.0 * static_cast<double>(m));
    if (mech.scheme == Scheme::modified) b = std::min(b, mech.bid_cap);
    for (Index j = 0; j < m; ++j) init.set(i, j, b);
  }
  return init;
}

namespace {

BestResponseResult best_response_or_iterate(const Instance& instance, const BidMatrix& bids,
                                            Index agent, const MechanismSpec& mech,
                                            const SolverParams& solver, std::string* note) {
  try {
    return best_response(instance, bids, agent, mech, solver);
  } catch (const BestResponseError& e) {
    if (note) *note = e.what();
    return e.best();
  }
}

}  // namespace

std::vector<DeviationCheck> verify_epsilon_nash(const Instance& instance, const MechanismSpec& mech,
                                                const BidMatrix& bids, double delta,
                                                const SolverParams& solver) {
  std::vector<DeviationCheck> out(instance.agents());
  for (std::size_t i = 0; i < instance.agents(); ++i) {
    const auto a = static_cast<Index>(i);
    const AgentView view(instance, bids, a, mech);
    std::vector<double> eff(instance.items());
    for (std::size_t j = 0; j < eff.size(); ++j) {
      eff[j] = view.effective_from_raw(bids(a, static_cast<Index>(j)));
    }
    const double current = view.objective(eff);
    const BestResponseResult br = best_response_or_iterate(instance, bids, a, mech, solver, nullptr);
    DeviationCheck& c = out[i];
    c.feasible = view.constraints(eff).feasible;
    c.improvement = br.feasible ? br.objective - current : 0.0;
    c.passes = std::isinf(delta) || c.improvement <= delta;
  }
  return out;
}

EquilibriumResult evaluate_profile(const Instance& instance, const MechanismSpec& mech,
                                   const BidMatrix& bids, double nash_tol,
                                   const SolverParams& solver) {
  EquilibriumResult r;
  r.mechanism = mech;
  r.bids = bids;
  r.allocation = mechanism_allocation(mech, bids);
  r.payments = mechanism_payments(mech, bids);
  const std::size_t n = instance.agents();
  r.kkt.resize(n);
  r.kkt_errors.assign(n, "");
  for (std::size_t i = 0; i < n; ++i) {
    try {
      r.kkt[i] = kkt_residual(instance, bids, mech, static_cast<Index>(i));
    } catch (const std::exception& e) {
      r.kkt_errors[i] = e.what();
    }
  }
  const auto checks = verify_epsilon_nash(instance, mech, bids, nash_tol, solver);
  r.improvements.resize(n);
  r.agent_feasible.resize(n);
  bool passes = true;
  r.feasible = true;
  for (std::size_t i = 0; i < n; ++i) {
    r.improvements[i] = checks[i].improvement;
    r.agent_feasible[i] = checks[i].feasible;
    passes = passes && checks[i].passes;
    r.feasible = r.feasible && checks[i].feasible;
  }
  r.converged = passes && r.feasible;

  if (mech.scheme == Scheme::modified) {
    const double threshold = mech.threshold(n);
    for (Index j = 0; j < bids.items(); ++j) {
      bool above = false;
      for (Index i = 0; i < bids.agents(); ++i) above = above || bids(i, j) > threshold;
      if (!above) {
        r.threshold_ok = false;
        r.warnings.push_back("item " + std::to_string(j) + " has no raw bid above the threshold");
      }
    }
  }
  return r;
}

EquilibriumResult best_response_dynamics(const Instance& instance, const MechanismSpec& mech,
                                         const BidMatrix& init, const DynamicsParams& params) {
  const std::size_t n = instance.agents();
  if (init.agents() != static_cast<Index>(n) ||
      init.items() != static_cast<Index>(instance.items())) {
    throw UsageError("initial bids do not match the instance shape");
  }
  mech.validate(n);
  if (!(params.damping > 0.0 && params.damping <= 1.0)) throw UsageError("damping must lie in (0, 1]");

  BidMatrix bids = init;
  Rng rng(params.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> trace;
  std::vector<std::string> notes;
  double movement = std::numeric_limits<double>::infinity();
  std::size_t rounds = 0;

  while (rounds < params.max_rounds) {
    if (params.schedule == Schedule::random_permutation) {
      for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
    }
    movement = 0.0;
    const BidMatrix before = bids;
    for (std::size_t i : order) {
      const auto a = static_cast<Index>(i);
      std::string note;
      const BidMatrix& seen = params.schedule == Schedule::simultaneous ? before : bids;
      BestResponseResult br = best_response_or_iterate(instance, seen, a, mech, params.solver, &note);
      if (!note.empty() && notes.size() < 8) notes.push_back(note);
      for (Index j = 0; j < bids.items(); ++j) {
        double& b = br.bids[static_cast<std::size_t>(j)];
        movement = std::max(movement, std::abs(b - before(a, j)));
        if (params.damping < 1.0) b = (1.0 - params.damping) * before(a, j) + params.damping * b;
      }
      bids.set_row(a, br.bids);
    }
    ++rounds;
    trace.push_back(movement);
    if (movement <= params.move_tol) break;
  }

  EquilibriumResult r = evaluate_profile(instance, mech, bids, params.nash_tol, params.solver);
  r.rounds = rounds;
  r.last_movement = movement;
  r.movement_trace = std::move(trace);
  for (auto& s : notes) r.warnings.push_back(std::move(s));
  if (!(movement <= params.move_tol)) {
    std::ostringstream msg;
    msg << "bid movement " << movement << " above tolerance after " << rounds << " rounds";
    r.warnings.push_back(msg.str());
  }
  return r;
}

ConvexityProbeReport convexity_probe(std::size_t agents, double eps, std::size_t samples,
                                     std::uint64_t seed) {
  if (agents < 2 || !(eps > 0.0)) throw UsageError("convexity probe needs n >= 2 and eps > 0");
  ConvexityProbeReport rep;
  rep.exponent = static_cast<double>(agents - 1) * eps;
  rep.samples = samples;
  rep.min_second_difference = std::numeric_limits<double>::infinity();
  const double k = rep.exponent;
  auto pay = [k](double x, double c) { return c * std::pow(x + c, k) / k; };
  Rng rng(seed);
  for (std::size_t s = 0; s < samples; ++s) {
    const double c = rng.uniform(0.05, 2.0);
    const double x = rng.uniform(0.05, 2.0);
    const double h = 1e-2 * (x + c);
    const double second = (pay(x + h, c) - 2.0 * pay(x, c) + pay(x - h, c)) / (h * h);
    if (second < rep.min_second_difference) {
      rep.min_second_difference = second;
      if (second < -1e-8) rep.worst = std::make_pair(x, c);
    }
  }
  rep.passes = !(rep.min_second_difference < -1e-8);
  if (samples == 0) rep.min_second_difference = 0.0;
  return rep;
}

}  // namespace propauction
