#include <doctest.h>

#include <cmath>

#include "propauction/conversion.hpp"
#include "propauction/errors.hpp"
#include "propauction/rng.hpp"
#include "support.hpp"

using namespace propauction;
using support::bids_from;

TEST_CASE("a lone bidder always wins and pays its divisible payment") {
  const BidMatrix b = bids_from({{0.7}, {0.0}});
  const auto pay = payment_standard(b);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto out = sample_outcome(b, pay, s);
    CHECK(out.winners[0] == 0);
    CHECK(out.charges[0] == doctest::Approx(0.7));
    CHECK(out.seed == s);
  }
}

TEST_CASE("win frequencies follow bid shares") {
  const BidMatrix b = bids_from({{1.0}, {1.0}});
  const auto pay = payment_standard(b);
  const int draws = 100000;
  int wins = 0;
  for (int k = 0; k < draws; ++k) wins += sample_outcome(b, pay, derive_seed(7, static_cast<std::uint64_t>(k))).winners[0] == 0;
  const double sigma = std::sqrt(0.25 / draws);
  CHECK(std::abs(static_cast<double>(wins) / draws - 0.5) <= 3.0 * sigma);
}

TEST_CASE("charge times win probability equals the divisible payment") {
  Rng rng(79);
  for (int trial = 0; trial < 100; ++trial) {
    const BidMatrix b = support::random_bids(rng, 3, 2, 0.1, 2.0);
    const auto pay = payment_power_closed_form(b, 3, 0.5);
    const auto out = sample_outcome(b, pay, static_cast<std::uint64_t>(trial));
    for (Index j = 0; j < 2; ++j) {
      const Index w = out.winners[static_cast<std::size_t>(j)];
      const double prob = b(w, j) / b.column_total(j);
      CHECK(out.charges[static_cast<std::size_t>(j)] * prob == doctest::Approx(pay.values(w, j)).epsilon(1e-13));
    }
  }
}

TEST_CASE("conversion preconditions") {
  const BidMatrix zero = bids_from({{0.0}, {0.0}});
  CHECK_THROWS_AS(sample_outcome(zero, payment_standard(zero), 1), PreconditionError);
  std::vector<AgentSpec> agents{AgentSpec(ValuationSpec::power_sum({1.0}, {0.5}), 1.0, 1.0),
                                support::linear_agent({1.0}, 1.0, 1.0)};
  CHECK_THROWS_AS(expectation_check(Instance(agents, 1), bids_from({{0.5}, {0.5}}), MechanismSpec::standard(), 10, 1),
                  UsageError);
}

TEST_CASE("Monte Carlo means match the divisible outcome") {
  std::vector<AgentSpec> agents{support::linear_agent({1.0, 0.5}, 2.0, 1.0), support::linear_agent({0.8, 1.2}, 2.0, 0.0),
                                support::linear_agent({0.3, 0.9}, 2.0, 1.0)};
  const Instance inst(agents, 2);
  const BidMatrix b = bids_from({{0.3, 0.1}, {0.2, 0.4}, {0.1, 0.3}});
  const auto rep = expectation_check(inst, b, MechanismSpec::standard(), 100000, 5);
  CHECK(rep.passes);
  for (const auto& a : rep.agents) {
    CHECK(a.draws == 100000);
    CHECK(a.sigma_value > 0.0);
    CHECK(std::abs(a.mean_payment - a.expected_payment) <= 4.0 * a.sigma_payment + 1e-12);
  }
  const auto again = expectation_check(inst, b, MechanismSpec::standard(), 100000, 5, 4);
  for (std::size_t i = 0; i < rep.agents.size(); ++i) {
    CHECK(rep.agents[i].mean_value == again.agents[i].mean_value);
    CHECK(rep.agents[i].mean_payment == again.agents[i].mean_payment);
  }
  const auto one = expectation_check(inst, b, MechanismSpec::standard(), 1, 5);
  CHECK(one.agents.size() == 3);
  CHECK(one.agents[0].draws == 1);
}

TEST_CASE("single-bidder items have no variance") {
  std::vector<AgentSpec> agents{support::linear_agent({1.0, 2.0}, 5.0, 1.0), support::linear_agent({1.0, 2.0}, 5.0, 1.0)};
  const Instance inst(agents, 2);
  const BidMatrix b = bids_from({{0.5, 0.0}, {0.0, 0.25}});
  const auto rep = expectation_check(inst, b, MechanismSpec::standard(), 1000, 3);
  CHECK(rep.passes);
  for (const auto& a : rep.agents) {
    CHECK(a.sigma_value == 0.0);
    CHECK(a.mean_value == doctest::Approx(a.expected_value).epsilon(1e-14));
    CHECK(a.mean_payment == doctest::Approx(a.expected_payment).epsilon(1e-14));
  }
}
