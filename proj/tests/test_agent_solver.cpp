#include <doctest.h>

#include <cmath>

#include "propauction/agent_solver.hpp"
#include "propauction/errors.hpp"
#include "support.hpp"

using namespace propauction;
using support::bids_from;

namespace {

Instance two_bidders(double v, double rho, double budget = 10.0) {
  return support::single_item({v, 1.0}, {budget, 10.0}, {rho, 1.0});
}

}  // namespace

TEST_CASE("agent objective") {
  const BidMatrix profile = bids_from({{1.0}, {1.0}});
  const std::vector<double> own{1.0};
  CHECK(agent_objective(two_bidders(4.0, 1.0), own, profile, 0, MechanismSpec::standard()) == doctest::Approx(1.0));
  CHECK(agent_objective(two_bidders(4.0, 0.0), own, profile, 0, MechanismSpec::standard()) == doctest::Approx(2.0));
  const std::vector<double> zero{0.0};
  CHECK(agent_objective(two_bidders(4.0, 1.0), zero, profile, 0, MechanismSpec::standard()) == 0.0);
}

TEST_CASE("utility maximizer best response against a single opponent") {
  const auto br = best_response(two_bidders(4.0, 1.0), bids_from({{0.5}, {1.0}}), 0, MechanismSpec::standard());
  CHECK(br.feasible);
  CHECK(br.bids[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(br.objective == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_FALSE(br.active.budget);
  CHECK(br.kkt_residual <= 1e-7);
}

TEST_CASE("valuation maximizer bids until return on spend binds") {
  const auto br = best_response(two_bidders(4.0, 0.0), bids_from({{0.5}, {1.0}}), 0, MechanismSpec::standard());
  CHECK(br.feasible);
  CHECK(br.bids[0] == doctest::Approx(3.0).epsilon(1e-5));
  CHECK(br.active.ros);
}

TEST_CASE("an agent with zero value bids nothing") {
  const Instance inst = support::single_item({0.0, 1.0}, {10.0, 10.0}, {1.0, 1.0});
  const auto br = best_response(inst, bids_from({{0.5}, {1.0}}), 0, MechanismSpec::standard());
  CHECK(br.bids[0] == 0.0);
}

TEST_CASE("budget binds for a rich valuation") {
  const auto br = best_response(two_bidders(100.0, 1.0, 2.0), bids_from({{0.5}, {1.0}}), 0, MechanismSpec::standard());
  CHECK(br.feasible);
  CHECK(br.bids[0] == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(br.active.budget);
}

TEST_CASE("grid oracle reproduces the closed-form best responses") {
  for (double rho : {0.0, 1.0}) {
    const Instance inst = two_bidders(4.0, rho);
    const auto grid = best_response_grid_oracle(inst, bids_from({{0.5}, {1.0}}), 0, MechanismSpec::standard(), 1e-4, 10.0);
    CHECK(grid.best.feasible);
    CHECK(grid.best.bids[0] == doctest::Approx(rho == 1.0 ? 1.0 : 3.0).epsilon(2e-4));
  }
}

TEST_CASE("grid oracle edge cases") {
  const Instance inst = two_bidders(4.0, 1.0);
  const auto coarse = best_response_grid_oracle(inst, bids_from({{0.5}, {1.0}}), 0, MechanismSpec::standard(), 5.0, 2.0);
  CHECK((coarse.best.bids[0] == 0.0 || coarse.best.bids[0] == 2.0));

  const Instance poor = support::single_item({1.0, 1.0}, {1e-6, 10.0}, {1.0, 1.0});
  const auto infeasible =
      best_response_grid_oracle(poor, bids_from({{0.5}, {2.0}}), 0, MechanismSpec::power(1.0), 1e-2, 1.0);
  CHECK_FALSE(infeasible.best.feasible);

  std::vector<AgentSpec> agents{support::linear_agent({1, 1, 1}, 1.0, 1.0), support::linear_agent({1, 1, 1}, 1.0, 1.0)};
  const Instance three(agents, 3);
  CHECK_THROWS_AS(best_response_grid_oracle(three, BidMatrix(2, 3), 0, MechanismSpec::standard(), 0.1, 1.0), UsageError);
}

TEST_CASE("multiplier recovery") {
  const auto at_opt = kkt_residual(two_bidders(4.0, 1.0), bids_from({{1.0}, {1.0}}), MechanismSpec::standard(), 0);
  CHECK(at_opt.lambda == 0.0);
  CHECK(at_opt.mu == 0.0);
  CHECK(at_opt.max_residual <= 1e-12);

  const auto perturbed = kkt_residual(two_bidders(4.0, 1.0), bids_from({{1.2}, {1.0}}), MechanismSpec::standard(), 0);
  CHECK(perturbed.max_residual > 0.01);

  const auto binding = kkt_residual(two_bidders(4.0, 0.0), bids_from({{3.0}, {1.0}}), MechanismSpec::standard(), 0);
  CHECK(binding.mu > 0.0);
  CHECK(binding.lambda == 0.0);
  CHECK(binding.max_residual <= 1e-6);

  CHECK_THROWS_AS(kkt_residual(two_bidders(4.0, 1.0), bids_from({{1.0}, {0.0}}), MechanismSpec::power(1.0), 0),
                  PreconditionError);
}

TEST_CASE("continuous best response is never beaten by the grid") {
  Rng rng(53);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng.below(3);
    const std::size_t m = 1 + rng.below(2);
    std::vector<AgentSpec> agents;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> c(m), q(m);
      for (std::size_t j = 0; j < m; ++j) {
        c[j] = rng.uniform(0.2, 2.0);
        q[j] = rng.uniform(0.3, 1.0);
      }
      agents.emplace_back(ValuationSpec::power_sum(c, q), rng.uniform(0.3, 2.0), rng.below(2) ? 1.0 : 0.0);
    }
    const Instance inst(agents, m);
    const MechanismSpec mech = MechanismSpec::standard();
    const BidMatrix profile = support::random_bids(rng, static_cast<Index>(n), static_cast<Index>(m), 0.05, 1.0);
    const double step = m == 1 ? 1e-3 : 1e-2;
    const auto br = best_response(inst, profile, 0, mech);
    const auto grid =
        best_response_grid_oracle(inst, profile, 0, mech, step, default_bid_upper(inst, profile, 0, mech, {}));
    REQUIRE(br.feasible);
    CHECK(br.objective >= grid.best.objective - 1e-9);
    CHECK(br.objective <= grid.best.objective + 10.0 * step * grid.lipschitz + 1e-9);

    const AgentView view(inst, profile, 0, mech);
    std::vector<double> eff(m);
    for (std::size_t j = 0; j < m; ++j) eff[j] = view.effective_from_raw(br.bids[j]);
    const auto cons = view.constraints(eff);
    CHECK(cons.budget_slack >= -1e-9);
    CHECK(cons.ros_slack >= -1e-9);
    CHECK(br.objective >= view.objective(std::vector<double>(m, 0.0)) - 1e-12);
  }
}

TEST_CASE("power-scheme best response satisfies its first-order condition") {
  const Instance inst = support::single_item({1.0, 1.0}, {10.0, 10.0}, {1.0, 1.0});
  const MechanismSpec mech = MechanismSpec::power(1.0);
  const auto br = best_response(inst, bids_from({{0.1}, {0.3}}), 0, mech);
  REQUIRE(br.feasible);
  // v c / (x + c)^2 = c (x + c)^{k - 1} with k = 1 gives (x + c)^2 = v
  CHECK(br.bids[0] + 0.3 == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("strategy names round-trip") {
  CHECK(bid_upper_strategy_from_string(to_string(BidUpperStrategy::fixed)) == BidUpperStrategy::fixed);
  CHECK_THROWS_AS(bid_upper_strategy_from_string("huge"), UsageError);
}
