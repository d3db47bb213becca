#include "propauction/conversion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "propauction/errors.hpp"
#include "propauction/rng.hpp"

namespace propauction {

namespace {

constexpr std::size_t kChunk = 8192;

struct Sampler {
  std::vector<std::vector<double>> cumulative;  // per item, running bid sums
  std::vector<double> totals;

  explicit Sampler(const BidMatrix& bids) {
    for (Index j = 0; j < bids.items(); ++j) {
      std::vector<double> c;
      double run = 0.0;
      for (Index i = 0; i < bids.agents(); ++i) {
        run += bids(i, j);
        c.push_back(run);
      }
      if (!(run > 0.0)) {
        throw PreconditionError("item " + std::to_string(j) +
                                " has no positive bid; the randomized conversion is undefined");
      }
      cumulative.push_back(std::move(c));
      totals.push_back(run);
    }
  }

  Index draw(std::size_t j, Rng& rng) const {
    const double u = rng.uniform() * totals[j];
    const auto& c = cumulative[j];
    auto it = std::upper_bound(c.begin(), c.end(), u);
    if (it == c.end()) --it;
    return static_cast<Index>(it - c.begin());
  }
};

Eigen::MatrixXd charges_for(const BidMatrix& bids, const PaymentMatrix& payments) {
  if (payments.agents() != bids.agents() || payments.items() != bids.items()) {
    throw UsageError("payments do not match the bid matrix shape");
  }
  Eigen::MatrixXd charge = Eigen::MatrixXd::Zero(bids.agents(), bids.items());
  for (Index j = 0; j < bids.items(); ++j) {
    const double total = bids.column_total(j);
    for (Index i = 0; i < bids.agents(); ++i) {
      if (bids(i, j) > 0.0) {
        charge(i, j) = total / bids(i, j) * payments.values(i, j);
      } else if (payments.values(i, j) > 0.0) {
        throw PreconditionError("agent " + std::to_string(i) + " pays on item " + std::to_string(j) +
                                " without bidding; the randomized conversion cannot reproduce it");
      }
    }
  }
  return charge;
}

}  // namespace

RandomizedOutcome sample_outcome(const BidMatrix& bids, const PaymentMatrix& payments,
                                 std::uint64_t seed) {
  const Sampler sampler(bids);
  const Eigen::MatrixXd charge = charges_for(bids, payments);
  Rng rng(seed);
  RandomizedOutcome out;
  out.seed = seed;
  for (std::size_t j = 0; j < static_cast<std::size_t>(bids.items()); ++j) {
    const Index w = sampler.draw(j, rng);
    out.winners.push_back(w);
    out.charges.push_back(charge(w, static_cast<Index>(j)));
  }
  return out;
}

ExpectationCheck expectation_check(const Instance& instance, const BidMatrix& bids,
                                   const MechanismSpec& mech, std::size_t draws, std::uint64_t seed,
                                   std::size_t workers) {
  const std::size_t n = instance.agents();
  const std::size_t m = instance.items();
  for (std::size_t i = 0; i < n; ++i) {
    if (instance.agent(i).valuation().kind() != ValuationKind::linear) {
      throw UsageError("the randomized conversion is defined for linear valuations only");
    }
  }
  const PaymentMatrix pay = mechanism_payments(mech, bids);
  const AllocationMatrix alloc = mechanism_allocation(mech, bids);
  const Sampler sampler(bids);
  const Eigen::MatrixXd charge = charges_for(bids, pay);

  // Per chunk: sum and sum of squares of value and payment per agent.
  const std::size_t chunks = (draws + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> stats(chunks, std::vector<double>(4 * n, 0.0));
  auto run_chunk = [&](std::size_t c) {
    Rng rng(derive_seed(seed, c));
    const std::size_t begin = c * kChunk;
    const std::size_t end = std::min(draws, begin + kChunk);
    std::vector<double> value(n);
    std::vector<double> payment(n);
    auto& s = stats[c];
    for (std::size_t d = begin; d < end; ++d) {
      std::fill(value.begin(), value.end(), 0.0);
      std::fill(payment.begin(), payment.end(), 0.0);
      for (std::size_t j = 0; j < m; ++j) {
        const Index w = sampler.draw(j, rng);
        value[static_cast<std::size_t>(w)] += instance.agent(static_cast<std::size_t>(w)).valuation().coeffs()[j];
        payment[static_cast<std::size_t>(w)] += charge(w, static_cast<Index>(j));
      }
      for (std::size_t i = 0; i < n; ++i) {
        s[4 * i] += value[i];
        s[4 * i + 1] += value[i] * value[i];
        s[4 * i + 2] += payment[i];
        s[4 * i + 3] += payment[i] * payment[i];
      }
    }
  };
  const std::size_t pool = std::max<std::size_t>(1, std::min(workers, chunks));
  if (pool <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < pool; ++w) {
      threads.emplace_back([&, w] {
        for (std::size_t c = w; c < chunks; c += pool) run_chunk(c);
      });
    }
    for (auto& t : threads) t.join();
  }

  ExpectationCheck out;
  const double N = static_cast<double>(draws);
  for (std::size_t i = 0; i < n; ++i) {
    double sv = 0.0, svv = 0.0, sp = 0.0, spp = 0.0;
    for (const auto& s : stats) {
      sv += s[4 * i];
      svv += s[4 * i + 1];
      sp += s[4 * i + 2];
      spp += s[4 * i + 3];
    }
    ConversionReport r;
    r.agent = static_cast<Index>(i);
    r.draws = draws;
    r.seed = seed;
    const auto& coeffs = instance.agent(i).valuation().coeffs();
    for (std::size_t j = 0; j < m; ++j) {
      r.expected_value += alloc.shares(static_cast<Index>(i), static_cast<Index>(j)) * coeffs[j];
      r.expected_payment += pay.values(static_cast<Index>(i), static_cast<Index>(j));
    }
    auto standard_error = [N](double sum, double sum_sq) {
      if (N < 2.0) return std::numeric_limits<double>::infinity();
      const double mean = sum / N;
      const double var = std::max(0.0, (sum_sq - N * mean * mean) / (N - 1.0));
      return std::sqrt(var / N);
    };
    if (draws > 0) {
      r.mean_value = sv / N;
      r.mean_payment = sp / N;
    }
    r.sigma_value = standard_error(sv, svv);
    r.sigma_payment = standard_error(sp, spp);
    auto within = [](double mean, double expected, double sigma) {
      const double exact_tol = 1e-9 * std::max(1.0, std::abs(expected));
      return std::abs(mean - expected) <= 4.0 * sigma + exact_tol;
    };
    r.passes = draws == 0 || (within(r.mean_value, r.expected_value, r.sigma_value) &&
                              within(r.mean_payment, r.expected_payment, r.sigma_payment));
    out.passes = out.passes && r.passes;
    out.agents.push_back(r);
  }
  return out;
}

}  // namespace propauction
