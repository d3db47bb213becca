#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "propauction/errors.hpp"
#include "propauction/model.hpp"
#include "propauction/payments.hpp"

namespace propauction {

enum class BidUpperStrategy {
  budget,  // per item: the bid at which that item's payment alone exhausts the budget (cap W for modified)
  fixed,   // SolverParams::bid_upper for every item
};

std::string_view to_string(BidUpperStrategy s);
BidUpperStrategy bid_upper_strategy_from_string(std::string_view name);

struct SolverParams {
  std::size_t max_iters = 200;  // bisection steps per bracket
  double kkt_tol = 1e-7;
  double uncontested_bid = 1e-9;  // effective bid placed on an item nobody else bids on
  double grid_step = 1e-3;        // grid oracle resolution
  BidUpperStrategy bid_upper_strategy = BidUpperStrategy::budget;
  double bid_upper = 10.0;  // used when bid_upper_strategy == fixed
};

struct ActiveConstraints {
  bool budget = false;
  bool ros = false;
  std::vector<bool> lower;  // b_ij = 0 (at or below the threshold for modified)
  std::vector<bool> upper;  // raw bid at the public cap W (modified only)
};

struct BestResponseResult {
  std::vector<double> bids;  // raw bids, length m
  double objective = 0.0;
  ActiveConstraints active;
  std::size_t iterations = 0;
  double kkt_residual = 0.0;
  bool feasible = true;
  double price_weight = 0.0;  // kappa: the bid maximizes v - kappa * payments
};

/// Recovered Lagrange multipliers at a bid vector.
struct KktReport {
  double lambda = 0.0;  // budget
  double mu = 0.0;      // return on spend
  std::vector<double> xi;    // b_ij >= 0
  std::vector<double> zeta;  // raw bid <= W (modified)
  std::vector<double> stationarity;  // per item, divided by (1 + mu)
  double budget_complementarity = 0.0;  // lambda * budget slack
  double ros_complementarity = 0.0;     // mu * RoS slack
  double max_residual = 0.0;
};

/// One agent's view of a bid profile: everything it needs to evaluate a unilateral deviation.
class AgentView {
 public:
  AgentView(const Instance& instance, const BidMatrix& profile, Index agent,
            const MechanismSpec& mech);

  std::size_t items() const { return others_.size(); }
  std::size_t agents() const { return n_; }
  const AgentSpec& agent() const { return *agent_; }
  const MechanismSpec& mechanism() const { return *mech_; }
  double others(std::size_t j) const { return others_[j]; }

  double effective_from_raw(double raw) const;
  double raw_from_effective(double effective) const;

  double share(std::size_t j, double effective) const;
  double value(std::span<const double> effective) const;
  double item_payment(std::size_t j, double effective) const;
  double item_marginal_payment(std::size_t j, double effective) const;
  double total_payment(std::span<const double> effective) const;
  /// d share / d effective bid.
  double share_slope(std::size_t j, double effective) const;
  /// Largest effective bid considered on item j.
  double upper(std::size_t j, const SolverParams& params) const;
  double cap_effective() const;  // W - threshold for modified, +inf otherwise

  double objective(std::span<const double> effective) const;
  ConstraintReport constraints(std::span<const double> effective) const;

 private:
  const AgentSpec* agent_;
  const MechanismSpec* mech_;
  std::size_t n_;
  std::vector<double> others_;
};

/// v_i(d_i) - rho_i * sum_j p_ij when agent `agent` replaces its row of `profile` by `own_bids`.
double agent_objective(const Instance& instance, std::span<const double> own_bids,
                       const BidMatrix& profile, Index agent, const MechanismSpec& mech);

/// Exact best response to the other rows of `profile`.
///
/// For separable valuations the optimum maximizes v - kappa * payments for the smallest
/// kappa >= rho at which the maximizer satisfies Budget and RoS; kappa is found by bisection
/// and each item's bid by bisection on its first-order condition.
BestResponseResult best_response(const Instance& instance, const BidMatrix& profile, Index agent,
                                 const MechanismSpec& mech, const SolverParams& params = {});

struct GridOracleResult {
  BestResponseResult best;
  double lipschitz = 0.0;  // max |objective difference| / step between grid neighbours
  std::size_t evaluated = 0;
};

/// Exhaustive search over raw bids {0, step, 2 step, ..., upper} (upper itself included) for
/// m <= 2. Ties go to the lexicographically smallest bid vector. With no feasible grid point
/// the least-infeasible one is returned with `feasible == false`.
GridOracleResult best_response_grid_oracle(const Instance& instance, const BidMatrix& profile,
                                           Index agent, const MechanismSpec& mech,
                                           double grid_step, double bid_upper);

/// Raw-bid grid upper bound used by the oracle when none is given.
double default_bid_upper(const Instance& instance, const BidMatrix& profile, Index agent,
                         const MechanismSpec& mech, const SolverParams& params);

KktReport kkt_residual(const Instance& instance, const BidMatrix& bids, const MechanismSpec& mech,
                       Index agent);

/// Thrown when the solver cannot certify its iterate. Carries the best iterate found.
class BestResponseError : public NumericError {
 public:
  BestResponseError(const std::string& what, BestResponseResult best)
      : NumericError(what), best_(std::move(best)) {}
  const BestResponseResult& best() const { return best_; }

 private:
  BestResponseResult best_;
};

}  // namespace propauction
