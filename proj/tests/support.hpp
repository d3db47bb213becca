#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "propauction/model.hpp"
#include "propauction/rng.hpp"

namespace support {

using namespace propauction;

inline AgentSpec linear_agent(std::vector<double> values, double budget, double rho) {
  return AgentSpec(ValuationSpec::linear(std::move(values)), budget, rho);
}

/// One-item instance with linear valuations.
inline Instance single_item(const std::vector<double>& values, const std::vector<double>& budgets,
                            const std::vector<double>& rhos) {
  std::vector<AgentSpec> agents;
  for (std::size_t i = 0; i < values.size(); ++i) agents.push_back(linear_agent({values[i]}, budgets[i], rhos[i]));
  return Instance(std::move(agents), 1);
}

inline BidMatrix bids_from(std::initializer_list<std::initializer_list<double>> rows) {
  const Index n = static_cast<Index>(rows.size());
  const Index m = static_cast<Index>(rows.begin()->size());
  BidMatrix b(n, m);
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double x : r) b.set(i, j++, x);
    ++i;
  }
  return b;
}

inline BidMatrix random_bids(Rng& rng, Index n, Index m, double lo, double hi) {
  BidMatrix b(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) b.set(i, j, rng.uniform(lo, hi));
  }
  return b;
}

inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace support
