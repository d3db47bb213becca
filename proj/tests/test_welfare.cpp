#include <doctest.h>

#include <cmath>

#include "propauction/equilibrium.hpp"
#include "propauction/errors.hpp"
#include "propauction/welfare.hpp"
#include "support.hpp"

using namespace propauction;
using support::bids_from;

namespace {

Instance dominant(double w2) { return support::single_item({1.0, 2.0}, {10.0, w2}, {1.0, 1.0}); }

// Two agents, one item: fine scan of d in [0, 1].
double scan_two_agents(const Instance& inst) {
  double best = 0.0;
  const int steps = 200000;
  for (int k = 0; k <= steps; ++k) {
    const double d = static_cast<double>(k) / steps;
    const double a = std::min(inst.agent(0).budget(), inst.agent(0).valuation().item_value(0, d));
    const double b = std::min(inst.agent(1).budget(), inst.agent(1).valuation().item_value(0, 1.0 - d));
    best = std::max(best, a + b);
  }
  return best;
}

Instance random_instance(Rng& rng, std::size_t n, std::size_t m, bool hybrid = false) {
  std::vector<AgentSpec> agents;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> c(m), q(m);
    for (std::size_t j = 0; j < m; ++j) {
      c[j] = rng.uniform(0.1, 1.0);
      q[j] = rng.uniform(0.3, 1.0);
    }
    const double rho = hybrid ? rng.uniform(0.0, 1.0) : (rng.below(2) ? 1.0 : 0.0);
    if (rng.below(2)) {
      agents.emplace_back(ValuationSpec::linear(c), rng.uniform(0.2, 2.0), rho);
    } else {
      agents.emplace_back(ValuationSpec::power_sum(c, q), rng.uniform(0.2, 2.0), rho);
    }
  }
  return Instance(agents, m);
}

}  // namespace

TEST_CASE("concave welfare optimum on small instances") {
  const auto a = optimal_lw_concave(dominant(10.0));
  CHECK(a.value == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(a.allocation.shares(1, 0) == doctest::Approx(1.0).epsilon(1e-6));
  const auto b = optimal_lw_concave(dominant(0.5));
  CHECK(b.value == doctest::Approx(1.25).epsilon(1e-8));
  CHECK(b.allocation.shares(0, 0) == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(optimal_lw_concave(support::single_item({0.0, 0.0}, {1.0, 1.0}, {1.0, 1.0})).value == 0.0);
}

TEST_CASE("concave optimum matches a fine scan") {
  Rng rng(61);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<AgentSpec> agents;
    for (int i = 0; i < 2; ++i) {
      const double c = rng.uniform(0.1, 3.0);
      const double w = rng.uniform(0.1, 2.0);
      switch (rng.below(3)) {
        case 0: agents.emplace_back(ValuationSpec::linear({c}), w, 1.0); break;
        case 1: agents.emplace_back(ValuationSpec::power_sum({c}, {rng.uniform(0.2, 1.0)}), w, 1.0); break;
        default: agents.emplace_back(ValuationSpec::log_sum({c}, rng.uniform(0.05, 2.0)), w, 1.0); break;
      }
    }
    const Instance inst(agents, 1);
    const double scan = scan_two_agents(inst);
    const double opt = optimal_lw_concave(inst).value;
    CHECK(opt >= scan - 1e-9);
    CHECK(opt <= scan + 1e-5);
  }
}

TEST_CASE("grid welfare optimum") {
  const auto g = optimal_lw_grid(dominant(0.5), AssignmentGrid(0.25));
  CHECK(g.value == doctest::Approx(1.25));
  CHECK(g.allocation.shares(0, 0) == doctest::Approx(0.75));

  std::vector<AgentSpec> agents{support::linear_agent({3.0, 1.0}, 10.0, 1.0), support::linear_agent({1.0, 2.0}, 10.0, 1.0)};
  CHECK(optimal_lw_grid(Instance(agents, 2), AssignmentGrid(1.0)).value == doctest::Approx(5.0));

  std::vector<AgentSpec> single{support::linear_agent({0.5, 0.7}, 1.0, 1.0)};
  CHECK(optimal_lw_grid(Instance(single, 2), AssignmentGrid(0.125)).value == doctest::Approx(1.0));

  CHECK_THROWS_AS(AssignmentGrid(0.3), UsageError);
  Rng rng(1);
  const Instance big = random_instance(rng, 6, 3);
  CHECK_THROWS_AS(optimal_lw_grid(big, AssignmentGrid(1.0 / 16.0)), UsageError);
  CHECK(grid_assignment_count(2, 1, AssignmentGrid(0.25)) == 5.0);
  CHECK(grid_assignment_count(3, 2, AssignmentGrid(0.5)) == 36.0);
}

TEST_CASE("concave optimum dominates the grid optimum") {
  Rng rng(67);
  for (int trial = 0; trial < 40; ++trial) {
    const Instance inst = random_instance(rng, 2 + rng.below(2), 1 + rng.below(2));
    const double grid = optimal_lw_grid(inst, AssignmentGrid(1.0 / 16.0)).value;
    const double conc = optimal_lw_concave(inst).value;
    CHECK(conc >= grid - 1e-7);
  }
}

TEST_CASE("standard certificate on the symmetric Kelly equilibrium") {
  const Instance inst = support::single_item({1.0, 1.0}, {10.0, 10.0}, {1.0, 1.0});
  const auto eq = evaluate_profile(inst, MechanismSpec::standard(), bids_from({{0.25}, {0.25}}), 1e-8);
  const auto cert = build_dual_standard(inst, eq);
  CHECK(cert.alpha[0] == doctest::Approx(0.5));
  CHECK(cert.beta[0] == doctest::Approx(0.75));
  CHECK(cert.beta[1] == doctest::Approx(0.75));
  CHECK(cert.objective == doctest::Approx(2.0));
  CHECK(cert.tag == CertificateTag::standard_pm);
  CHECK(check_dual_feasibility(cert, inst, AssignmentGrid(1.0 / 16.0)).feasible);
  const auto rep = poa_report(inst, eq, cert, AssignmentGrid(1.0 / 16.0));
  CHECK(rep.ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.certified_ratio == doctest::Approx(2.0));
}

TEST_CASE("standard certificate branches") {
  const Instance capped = support::single_item({10.0, 1.0}, {0.5, 10.0}, {1.0, 0.0});
  const auto eq = evaluate_profile(capped, MechanismSpec::standard(), bids_from({{0.4}, {0.3}}), 1e-8);
  const auto cert = build_dual_standard(capped, eq);
  CHECK(cert.beta[0] == 0.5);
  CHECK(cert.beta[1] == doctest::Approx(0.3 / 0.7));

  const Instance hybrid = support::single_item({1.0, 1.0}, {1.0, 1.0}, {0.5, 1.0});
  const auto eh = evaluate_profile(hybrid, MechanismSpec::standard(), bids_from({{0.2}, {0.3}}), 1e-8);
  CHECK_THROWS_AS(build_dual_standard(hybrid, eh), UsageError);
}

TEST_CASE("power certificate") {
  std::vector<AgentSpec> agents{AgentSpec(ValuationSpec::power_sum({1.0}, {0.5}), 100.0, 1.0),
                                support::linear_agent({1.0}, 100.0, 1.0)};
  const Instance inst(agents, 1);
  const auto eq = evaluate_profile(inst, MechanismSpec::power(1.0), bids_from({{1.0}, {3.0}}), 1e-8);
  const auto cert = build_dual_power(inst, eq);
  CHECK(cert.alpha[0] == doctest::Approx(16.0));
  CHECK(cert.beta[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(cert.beta[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cert.tag == CertificateTag::power_pm);

  const Instance capped = support::single_item({5.0, 5.0}, {0.1, 0.2}, {1.0, 1.0});
  const auto ec = evaluate_profile(capped, MechanismSpec::power(1.0), bids_from({{0.3}, {0.5}}), 1e-8);
  const auto cc = build_dual_power(capped, ec);
  CHECK(cc.objective == doctest::Approx(0.64 + 0.3));

  const auto zero = evaluate_profile(capped, MechanismSpec::power(1.0), bids_from({{0.0}, {0.0}}), 1e-8);
  CHECK_THROWS_AS(build_dual_power(capped, zero), PreconditionError);
}

TEST_CASE("dual feasibility checks") {
  const Instance zero = support::single_item({0.0, 0.0}, {1.0, 1.0}, {1.0, 1.0});
  const DualCertificate none{{0.0}, {0.0, 0.0}, 0.0, CertificateTag::standard_pm};
  CHECK(check_dual_feasibility(none, zero, AssignmentGrid(0.25)).min_slack == 0.0);

  const Instance inst = dominant(0.5);
  const auto eq = best_response_dynamics(inst, MechanismSpec::standard(), default_init(inst, MechanismSpec::standard()));
  REQUIRE(eq.converged);
  auto cert = build_dual_standard(inst, eq);
  CHECK(check_dual_feasibility(cert, inst, AssignmentGrid(1.0 / 16.0)).feasible);
  cert.beta[1] -= 1.0;
  const auto bad = check_dual_feasibility(cert, inst, AssignmentGrid(1.0 / 16.0));
  CHECK_FALSE(bad.feasible);
  REQUIRE_FALSE(bad.worst.empty());
  CHECK(bad.worst[0].agent == 1);
}

TEST_CASE("certificates from standard equilibria obey the welfare bounds") {
  Rng rng(71);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Instance inst = random_instance(rng, 2 + rng.below(2), 1 + rng.below(2));
    const MechanismSpec mech = MechanismSpec::standard();
    const auto eq = best_response_dynamics(inst, mech, default_init(inst, mech));
    if (!eq.converged) continue;
    ++checked;
    const AssignmentGrid grid(1.0 / 16.0);
    const auto cert = build_dual_standard(inst, eq);
    const auto rep = poa_report(inst, eq, cert, grid);
    CHECK(rep.feasibility.feasible);
    CHECK(rep.dual_obj >= rep.opt_grid - 1e-8);
    CHECK(joint_duality_gap(cert, inst, grid) >= -1e-8);
    CHECK(rep.ratio <= rep.certified_ratio + 1e-6);
    CHECK(rep.certified_ratio <= 2.0 + 1e-6);
    CHECK(rep.ratio >= 1.0 - 1e-9);
    for (std::size_t i = 0; i < inst.agents(); ++i) {
      const auto d = eq.allocation.row(static_cast<Index>(i));
      const double capped_value = std::min(inst.agent(i).budget(), eval_valuation(inst.agent(i).valuation(), d));
      CHECK(eq.bids.values().row(static_cast<Index>(i)).sum() + cert.beta[i] <= 2.0 * capped_value + 1e-8);
    }
  }
  CHECK(checked >= 24);
}

TEST_CASE("certificates from power equilibria obey the welfare bounds") {
  Rng rng(73);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 2 + rng.below(2);
    std::vector<AgentSpec> agents;
    for (std::size_t i = 0; i < n; ++i) {
      agents.emplace_back(ValuationSpec::power_sum({rng.uniform(0.2, 1.0)}, {rng.uniform(0.05, 0.2)}),
                          rng.uniform(1.0, 3.0), 1.0);
    }
    const Instance inst(agents, 1);
    const MechanismSpec mech = MechanismSpec::power(1.0 / static_cast<double>(n - 1));
    const auto eq = best_response_dynamics(inst, mech, default_init(inst, mech));
    if (!eq.converged) continue;
    ++checked;
    const auto cert = build_dual_power(inst, eq);
    const auto rep = poa_report(inst, eq, cert, AssignmentGrid(1.0 / 16.0));
    CHECK(rep.feasibility.feasible);
    CHECK(rep.dual_obj <= (1.0 + mech.eps) * rep.lw_eq + 1e-8);
    CHECK(rep.ratio <= rep.certified_ratio + 1e-6);
    for (std::size_t i = 0; i < n; ++i) {
      const auto d = eq.allocation.row(static_cast<Index>(i));
      CHECK(cert.beta[i] <= std::min(inst.agent(i).budget(), eval_valuation(inst.agent(i).valuation(), d)) + 1e-12);
    }
  }
  CHECK(checked >= 20);
}

TEST_CASE("undefined ratio when the equilibrium has no welfare") {
  const Instance inst = support::single_item({0.0, 0.0}, {1.0, 1.0}, {1.0, 1.0});
  const auto eq = evaluate_profile(inst, MechanismSpec::standard(), bids_from({{0.0}, {0.0}}), 1e-8);
  const DualCertificate cert{{0.0}, {0.0, 0.0}, 0.0, CertificateTag::standard_pm};
  const auto rep = poa_report(inst, eq, cert, AssignmentGrid(0.25));
  CHECK_FALSE(rep.undefined_ratio);
  CHECK(rep.ratio == 1.0);
  CHECK(certificate_tag_from_string(to_string(CertificateTag::power_pm)) == CertificateTag::power_pm);
}
