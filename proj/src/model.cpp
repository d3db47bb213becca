#include "propauction/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "propauction/errors.hpp"
#include "propauction/tolerances.hpp"

namespace propauction {

namespace {

void require_finite_nonneg(const std::vector<double>& xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x) || x < 0.0) {
      throw DomainError(std::string(what) + " must be finite and nonnegative");
    }
  }
}

}  // namespace

std::string_view to_string(ValuationKind kind) {
  switch (kind) {
    case ValuationKind::linear:
      return "linear";
    case ValuationKind::power_sum:
      return "power-sum";
    case ValuationKind::log_sum:
      return "log-sum";
  }
  return "?";
}

ValuationKind valuation_kind_from_string(std::string_view name) {
  if (name == "linear") return ValuationKind::linear;
  if (name == "power-sum") return ValuationKind::power_sum;
  if (name == "log-sum") return ValuationKind::log_sum;
  throw UsageError("unknown valuation kind '" + std::string(name) + "'");
}

ValuationSpec::ValuationSpec(ValuationKind kind, std::vector<double> coeffs,
                             std::vector<double> exponents, double shift)
    : kind_(kind), coeffs_(std::move(coeffs)), exponents_(std::move(exponents)), shift_(shift) {
  require_finite_nonneg(coeffs_, "valuation coefficients");
  if (coeffs_.empty()) throw DomainError("valuation needs at least one item");
}

ValuationSpec ValuationSpec::linear(std::vector<double> coeffs) {
  return ValuationSpec(ValuationKind::linear, std::move(coeffs), {}, 1.0);
}

ValuationSpec ValuationSpec::power_sum(std::vector<double> coeffs, std::vector<double> exponents) {
  if (exponents.size() != coeffs.size()) {
    throw DomainError("power-sum valuation needs one exponent per item");
  }
  for (double q : exponents) {
    if (!(q > 0.0 && q <= 1.0)) throw DomainError("power-sum exponent must lie in (0, 1]");
  }
  return ValuationSpec(ValuationKind::power_sum, std::move(coeffs), std::move(exponents), 1.0);
}

ValuationSpec ValuationSpec::log_sum(std::vector<double> coeffs, double shift) {
  if (!(shift > 0.0) || !std::isfinite(shift)) throw DomainError("log-sum shift must be positive");
  return ValuationSpec(ValuationKind::log_sum, std::move(coeffs), {}, shift);
}

double ValuationSpec::item_value(std::size_t j, double share) const {
  const double c = coeffs_[j];
  switch (kind_) {
    case ValuationKind::linear:
      return c * share;
    case ValuationKind::power_sum:
      return share <= 0.0 ? 0.0 : c * std::pow(share, exponents_[j]);
    case ValuationKind::log_sum:
      return c * std::log1p(share / shift_);
  }
  return 0.0;
}

double ValuationSpec::item_marginal(std::size_t j, double share) const {
  const double c = coeffs_[j];
  switch (kind_) {
    case ValuationKind::linear:
      return c;
    case ValuationKind::power_sum: {
      const double q = exponents_[j];
      if (q == 1.0) return c;
      if (share <= 0.0) return c == 0.0 ? 0.0 : HUGE_VAL;
      return c * q * std::pow(share, q - 1.0);
    }
    case ValuationKind::log_sum:
      return c / (shift_ + share);
  }
  return 0.0;
}

double ValuationSpec::item_euler_term(std::size_t j, double share) const {
  if (share <= 0.0) return 0.0;
  if (kind_ == ValuationKind::power_sum) {
    return exponents_[j] * item_value(j, share);
  }
  return share * item_marginal(j, share);
}

namespace {

void check_allocation_vector(const ValuationSpec& val, std::span<const double> d) {
  if (d.size() != val.items()) {
    throw DomainError("allocation vector length " + std::to_string(d.size()) +
                      " does not match valuation items " + std::to_string(val.items()));
  }
  for (double x : d) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("allocation share outside [0, 1]");
  }
}

}  // namespace

double eval_valuation(const ValuationSpec& val, std::span<const double> d) {
  check_allocation_vector(val, d);
  double total = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) total += val.item_value(j, d[j]);
  return total;
}

std::vector<double> eval_gradient(const ValuationSpec& val, std::span<const double> d) {
  check_allocation_vector(val, d);
  std::vector<double> grad(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) grad[j] = val.item_marginal(j, d[j]);
  return grad;
}

AgentSpec::AgentSpec(ValuationSpec valuation, double budget, double rho)
    : valuation_(std::move(valuation)), budget_(budget), rho_(rho) {
  if (!(budget_ > 0.0) || !std::isfinite(budget_)) {
    throw DomainError("agent budget must be finite and positive");
  }
  if (!(rho_ >= 0.0 && rho_ <= 1.0)) throw DomainError("agent rho must lie in [0, 1]");
}

Instance::Instance(std::vector<AgentSpec> agents, std::size_t items)
    : agents_(std::move(agents)), items_(items) {
  if (agents_.empty()) throw DomainError("instance needs at least one agent");
  if (items_ == 0) throw DomainError("instance needs at least one item");
  for (const auto& a : agents_) {
    if (a.valuation().items() != items_) {
      throw DomainError("agent valuation item count does not match instance");
    }
  }
}

BidMatrix::BidMatrix(Index agents, Index items) : values_(Eigen::MatrixXd::Zero(agents, items)) {}

BidMatrix::BidMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (!values_.allFinite() || (values_.size() > 0 && values_.minCoeff() < 0.0)) {
    throw DomainError("bids must be finite and nonnegative");
  }
}

void BidMatrix::set(Index i, Index j, double bid) {
  if (!std::isfinite(bid) || bid < 0.0) throw DomainError("bids must be finite and nonnegative");
  values_(i, j) = bid;
}

void BidMatrix::set_row(Index i, std::span<const double> bids) {
  if (static_cast<Index>(bids.size()) != items()) throw DomainError("bid row has wrong length");
  for (Index j = 0; j < items(); ++j) set(i, j, bids[static_cast<std::size_t>(j)]);
}

std::vector<double> BidMatrix::row(Index i) const {
  std::vector<double> out(static_cast<std::size_t>(items()));
  for (Index j = 0; j < items(); ++j) out[static_cast<std::size_t>(j)] = values_(i, j);
  return out;
}

double BidMatrix::others_total(Index i, Index j) const {
  double total = 0.0;
  for (Index k = 0; k < agents(); ++k) {
    if (k != i) total += values_(k, j);
  }
  return total;
}

std::vector<double> AllocationMatrix::row(Index i) const {
  std::vector<double> out(static_cast<std::size_t>(items()));
  for (Index j = 0; j < items(); ++j) out[static_cast<std::size_t>(j)] = shares(i, j);
  return out;
}

std::vector<double> PaymentMatrix::row(Index i) const {
  std::vector<double> out(static_cast<std::size_t>(items()));
  for (Index j = 0; j < items(); ++j) out[static_cast<std::size_t>(j)] = values(i, j);
  return out;
}

AllocationMatrix allocate_proportional(const Eigen::MatrixXd& bids) {
  const Index n = bids.rows();
  const Index m = bids.cols();
  AllocationMatrix out{Eigen::MatrixXd::Zero(n, m), std::vector<bool>(static_cast<std::size_t>(m))};
  for (Index j = 0; j < m; ++j) {
    const double total = bids.col(j).sum();
    if (total > 0.0) {
      for (Index i = 0; i < n; ++i) out.shares(i, j) = bids(i, j) / total;
    } else {
      out.shares.col(j).setConstant(1.0 / static_cast<double>(n));
      out.degenerate[static_cast<std::size_t>(j)] = true;
    }
  }
  return out;
}

AllocationMatrix allocate_proportional(const BidMatrix& bids) {
  return allocate_proportional(bids.values());
}

ConstraintReport check_constraints(const AgentSpec& agent, std::span<const double> payments,
                                   double value) {
  double spend = 0.0;
  for (double p : payments) spend += p;
  ConstraintReport r{agent.budget() - spend, value - AgentSpec::ros_target() * spend, false};
  r.feasible = r.budget_slack >= -tol::kFeasibility && r.ros_slack >= -tol::kFeasibility;
  return r;
}

double liquid_welfare(const Instance& instance, const AllocationMatrix& alloc) {
  if (alloc.agents() != static_cast<Index>(instance.agents()) ||
      alloc.items() != static_cast<Index>(instance.items())) {
    throw DomainError("allocation shape does not match instance");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < instance.agents(); ++i) {
    const auto& a = instance.agent(i);
    const auto d = alloc.row(static_cast<Index>(i));
    total += std::min(a.budget(), eval_valuation(a.valuation(), d));
  }
  return total;
}

}  // namespace propauction
