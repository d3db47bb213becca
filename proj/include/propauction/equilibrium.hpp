#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "propauction/agent_solver.hpp"
#include "propauction/model.hpp"
#include "propauction/payments.hpp"

namespace propauction {

enum class Schedule { round_robin, random_permutation, simultaneous };

std::string_view to_string(Schedule s);
Schedule schedule_from_string(std::string_view name);

struct DynamicsParams {
  Schedule schedule = Schedule::round_robin;
  double nash_tol = 1e-8;
  double move_tol = 1e-12;
  std::size_t max_rounds = 2000;
  std::uint64_t seed = 0;
  double damping = 1.0;  // new bids = (1 - damping) * old + damping * best response
  SolverParams solver;
};

struct EquilibriumResult {
  MechanismSpec mechanism;
  BidMatrix bids{0, 0};
  AllocationMatrix allocation;
  PaymentMatrix payments;
  std::vector<KktReport> kkt;
  std::vector<std::string> kkt_errors;  // empty string when the report was computed
  std::size_t rounds = 0;
  double last_movement = 0.0;
  std::vector<double> movement_trace;  // max bid movement per round
  bool converged = false;
  std::vector<double> improvements;  // best-response gain per agent at termination
  std::vector<bool> agent_feasible;
  bool feasible = false;
  bool threshold_ok = true;  // modified: every item has a raw bid above the threshold
  std::vector<std::string> warnings;

  double max_kkt_residual() const;
};

/// b_ij = W_i / (2m), clipped to the public bound for the modified mechanism.
BidMatrix default_init(const Instance& instance, const MechanismSpec& mech);

EquilibriumResult best_response_dynamics(const Instance& instance, const MechanismSpec& mech,
                                         const BidMatrix& init, const DynamicsParams& params = {});

struct DeviationCheck {
  double improvement = 0.0;
  bool passes = false;
  bool feasible = false;  // the agent's current bids satisfy Budget and RoS
};

std::vector<DeviationCheck> verify_epsilon_nash(const Instance& instance, const MechanismSpec& mech,
                                                const BidMatrix& bids, double delta,
                                                const SolverParams& solver = {});

/// Fills allocation, payments, KKT reports and the deviation check for `bids`.
EquilibriumResult evaluate_profile(const Instance& instance, const MechanismSpec& mech,
                                   const BidMatrix& bids, double nash_tol,
                                   const SolverParams& solver = {});

struct ConvexityProbeReport {
  double exponent = 0.0;  // (n - 1) eps
  std::size_t samples = 0;
  double min_second_difference = 0.0;
  bool passes = true;
  std::optional<std::pair<double, double>> worst;  // (own bid, others' total)
};

/// Samples normalized second differences of the power-family payment in the own bid.
/// Accepts exponents the mechanism itself would reject.
ConvexityProbeReport convexity_probe(std::size_t agents, double eps, std::size_t samples,
                                     std::uint64_t seed = 0);

}  // namespace propauction
