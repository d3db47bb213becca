#pragma once

#include <cstdint>
#include <vector>

#include "propauction/model.hpp"
#include "propauction/payments.hpp"

namespace propauction {

struct RandomizedOutcome {
  std::vector<Index> winners;  // per item
  std::vector<double> charges;  // per item, paid by the winner: (B_j / b_ij) * p_ij
  std::uint64_t seed = 0;
};

/// Item j goes to agent i with probability b_ij / B_j; the winner pays (B_j / b_ij) * p_ij.
RandomizedOutcome sample_outcome(const BidMatrix& bids, const PaymentMatrix& payments,
                                 std::uint64_t seed);

struct ConversionReport {
  Index agent = 0;
  double mean_value = 0.0;
  double mean_payment = 0.0;
  double expected_value = 0.0;
  double expected_payment = 0.0;
  double sigma_value = 0.0;    // standard error of mean_value
  double sigma_payment = 0.0;  // standard error of mean_payment
  std::size_t draws = 0;
  std::uint64_t seed = 0;
  bool passes = true;  // both means within 4 sigma of their expectations
};

struct ExpectationCheck {
  std::vector<ConversionReport> agents;
  bool passes = true;
};

/// Monte Carlo comparison of the randomized outcome with the divisible one. Linear valuations only.
/// Draws are split into fixed-size chunks with seeds derived from `seed`, so results do not
/// depend on `workers`.
ExpectationCheck expectation_check(const Instance& instance, const BidMatrix& bids,
                                   const MechanismSpec& mech, std::size_t draws, std::uint64_t seed,
                                   std::size_t workers = 1);

}  // namespace propauction
