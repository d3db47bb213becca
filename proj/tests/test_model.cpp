#include <doctest.h>

#include <cmath>

#include "propauction/errors.hpp"
#include "propauction/model.hpp"
#include "support.hpp"

using namespace propauction;
using support::bids_from;

TEST_CASE("valuations evaluate the separable forms") {
  const auto lin = ValuationSpec::linear({3.0, 1.0});
  const std::vector<double> half{0.5, 0.5};
  CHECK(eval_valuation(lin, half) == doctest::Approx(2.0));

  const auto log1 = ValuationSpec::log_sum({1.0}, 1.0);
  const std::vector<double> one{1.0};
  CHECK(eval_valuation(log1, one) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const std::vector<double> zeros{0.0, 0.0};
  CHECK(eval_valuation(ValuationSpec::power_sum({2.0, 3.0}, {0.3, 0.9}), zeros) == 0.0);
  CHECK(eval_valuation(ValuationSpec::log_sum({2.0, 3.0}, 0.1), zeros) == 0.0);
  CHECK(eval_valuation(lin, zeros) == 0.0);
}

TEST_CASE("valuation gradients") {
  const auto lin = ValuationSpec::linear({3.0, 1.0});
  const std::vector<double> d{0.2, 0.7};
  const auto g = eval_gradient(lin, d);
  CHECK(g[0] == 3.0);
  CHECK(g[1] == 1.0);

  const auto ps = ValuationSpec::power_sum({1.0}, {0.5});
  const std::vector<double> quarter{0.25};
  CHECK(eval_gradient(ps, quarter)[0] == doctest::Approx(1.0).epsilon(1e-14));
  const std::vector<double> zero{0.0};
  CHECK(std::isinf(eval_gradient(ps, zero)[0]));
}

TEST_CASE("gradients match central finite differences") {
  Rng rng(11);
  const double h = 1e-5;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 1 + rng.below(3);
    std::vector<double> c(m), q(m), d(m);
    for (std::size_t j = 0; j < m; ++j) {
      c[j] = rng.uniform(0.1, 5.0);
      q[j] = rng.uniform(0.1, 1.0);
      d[j] = rng.uniform(0.05, 0.95);
    }
    const ValuationSpec vals[] = {ValuationSpec::linear(c), ValuationSpec::power_sum(c, q),
                                  ValuationSpec::log_sum(c, rng.uniform(0.05, 2.0))};
    for (const auto& v : vals) {
      const auto g = eval_gradient(v, d);
      for (std::size_t j = 0; j < m; ++j) {
        auto up = d, dn = d;
        up[j] += h;
        dn[j] -= h;
        const double fd = (eval_valuation(v, up) - eval_valuation(v, dn)) / (2 * h);
        CHECK(support::close_rel(g[j], fd, 1e-6));
      }
    }
  }
}

TEST_CASE("valuation input validation") {
  CHECK_THROWS_AS(ValuationSpec::linear({}), DomainError);
  CHECK_THROWS_AS(ValuationSpec::linear({-1.0}), DomainError);
  CHECK_THROWS_AS(ValuationSpec::power_sum({1.0}, {1.5}), DomainError);
  CHECK_THROWS_AS(ValuationSpec::power_sum({1.0}, {0.0}), DomainError);
  CHECK_THROWS_AS(ValuationSpec::log_sum({1.0}, 0.0), DomainError);
  const auto lin = ValuationSpec::linear({1.0});
  const std::vector<double> bad{1.5};
  CHECK_THROWS_AS(eval_valuation(lin, bad), DomainError);
  const std::vector<double> wrong_len{0.5, 0.5};
  CHECK_THROWS_AS(eval_valuation(lin, wrong_len), DomainError);
  CHECK_THROWS_AS(AgentSpec(lin, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(AgentSpec(lin, 1.0, 1.5), DomainError);
  CHECK_THROWS_AS(Instance({}, 1), DomainError);
  CHECK_THROWS_AS(Instance({AgentSpec(lin, 1.0, 1.0)}, 2), DomainError);
  BidMatrix b(2, 1);
  CHECK_THROWS_AS(b.set(0, 0, -1.0), DomainError);
  CHECK_THROWS_AS(b.set(0, 0, std::nan("")), DomainError);
}

TEST_CASE("proportional allocation") {
  const auto a = allocate_proportional(bids_from({{1}, {1}, {1}, {1}}));
  for (Index i = 0; i < 4; ++i) CHECK(a.shares(i, 0) == 0.25);
  CHECK_FALSE(a.degenerate[0]);

  const auto b = allocate_proportional(bids_from({{2}, {6}}));
  CHECK(b.shares(0, 0) == doctest::Approx(0.25));
  CHECK(b.shares(1, 0) == doctest::Approx(0.75));

  const auto z = allocate_proportional(bids_from({{0}, {0}}));
  CHECK(z.shares(0, 0) == 0.5);
  CHECK(z.shares(1, 0) == 0.5);
  CHECK(z.degenerate[0]);
}

TEST_CASE("allocation shares sum to one and are monotone in own bid") {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.below(5));
    const Index m = 1 + static_cast<Index>(rng.below(4));
    BidMatrix bids = support::random_bids(rng, n, m, 0.0, 3.0);
    const auto base = allocate_proportional(bids);
    for (Index j = 0; j < m; ++j) CHECK(base.shares.col(j).sum() == doctest::Approx(1.0).epsilon(1e-14));

    const Index i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    const Index j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(m)));
    bids.set(i, j, bids(i, j) + rng.uniform(0.01, 1.0));
    const auto up = allocate_proportional(bids);
    CHECK(up.shares(i, j) > base.shares(i, j));
    for (Index k = 0; k < n; ++k) {
      if (k != i) CHECK(up.shares(k, j) <= base.shares(k, j));
    }
  }
}

TEST_CASE("constraint slacks") {
  const AgentSpec a1 = support::linear_agent({1.0, 1.0}, 1.0, 1.0);
  const std::vector<double> p1{0.3, 0.3};
  const auto r1 = check_constraints(a1, p1, 0.7);
  CHECK(r1.budget_slack == doctest::Approx(0.4));
  CHECK(r1.ros_slack == doctest::Approx(0.1));
  CHECK(r1.feasible);

  const AgentSpec a2 = support::linear_agent({1.0}, 0.5, 1.0);
  const std::vector<double> p2{0.6};
  const auto r2 = check_constraints(a2, p2, 1.0);
  CHECK(r2.budget_slack == doctest::Approx(-0.1));
  CHECK_FALSE(r2.feasible);

  const std::vector<double> p0{0.0, 0.0};
  const auto r3 = check_constraints(a1, p0, 0.0);
  CHECK(r3.budget_slack == 1.0);
  CHECK(r3.ros_slack == 0.0);
  CHECK(r3.feasible);
}

TEST_CASE("liquid welfare caps each value at the budget") {
  const Instance inst = support::single_item({3.0, 1.0}, {1.0, 2.0}, {1.0, 1.0});
  AllocationMatrix half{Eigen::MatrixXd::Constant(2, 1, 0.5), {false}};
  CHECK(liquid_welfare(inst, half) == doctest::Approx(1.5));
  AllocationMatrix first{Eigen::MatrixXd(2, 1), {false}};
  first.shares << 1.0, 0.0;
  CHECK(liquid_welfare(inst, first) == doctest::Approx(1.0));
}
