#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace propauction {

using Index = Eigen::Index;

enum class ValuationKind { linear, power_sum, log_sum };

std::string_view to_string(ValuationKind kind);
ValuationKind valuation_kind_from_string(std::string_view name);

/// Additively separable concave valuation over fractional allocations, v(0) = 0.
///
///   linear     v(d) = sum_j c_j d_j
///   power-sum  v(d) = sum_j c_j d_j^{q_j},       q_j in (0, 1]
///   log-sum    v(d) = sum_j c_j ln(1 + d_j / s),  s > 0
class ValuationSpec {
 public:
  static ValuationSpec linear(std::vector<double> coeffs);
  static ValuationSpec power_sum(std::vector<double> coeffs, std::vector<double> exponents);
  static ValuationSpec log_sum(std::vector<double> coeffs, double shift);

  ValuationKind kind() const { return kind_; }
  std::size_t items() const { return coeffs_.size(); }
  const std::vector<double>& coeffs() const { return coeffs_; }
  const std::vector<double>& exponents() const { return exponents_; }
  double shift() const { return shift_; }

  // Single-item pieces of the separable sum. No range checks.
  double item_value(std::size_t j, double share) const;
  double item_marginal(std::size_t j, double share) const;
  // share * d/d(share) of the item term, with the 0 * inf = 0 convention at share = 0.
  double item_euler_term(std::size_t j, double share) const;

  bool operator==(const ValuationSpec&) const = default;

 private:
  ValuationSpec(ValuationKind kind, std::vector<double> coeffs, std::vector<double> exponents,
                double shift);

  ValuationKind kind_;
  std::vector<double> coeffs_;
  std::vector<double> exponents_;
  double shift_;
};

/// Value of the allocation vector `d` (one share per item, each in [0, 1]).
double eval_valuation(const ValuationSpec& val, std::span<const double> d);

/// Analytic gradient. Power-sum entries with q < 1 are +inf at a zero share.
std::vector<double> eval_gradient(const ValuationSpec& val, std::span<const double> d);

/// An autobidding agent. The return-on-spend target is normalized to 1.
class AgentSpec {
 public:
  AgentSpec(ValuationSpec valuation, double budget, double rho);

  const ValuationSpec& valuation() const { return valuation_; }
  double budget() const { return budget_; }
  double rho() const { return rho_; }
  static constexpr double ros_target() { return 1.0; }

  bool operator==(const AgentSpec&) const = default;

 private:
  ValuationSpec valuation_;
  double budget_;
  double rho_;
};

class Instance {
 public:
  Instance(std::vector<AgentSpec> agents, std::size_t items);

  std::size_t agents() const { return agents_.size(); }
  std::size_t items() const { return items_; }
  const AgentSpec& agent(std::size_t i) const { return agents_.at(i); }
  const std::vector<AgentSpec>& agent_list() const { return agents_; }

  bool operator==(const Instance&) const = default;

 private:
  std::vector<AgentSpec> agents_;
  std::size_t items_;
};

/// Nonnegative finite n x m bid profile.
class BidMatrix {
 public:
  BidMatrix(Index agents, Index items);
  explicit BidMatrix(Eigen::MatrixXd values);

  Index agents() const { return values_.rows(); }
  Index items() const { return values_.cols(); }
  double operator()(Index i, Index j) const { return values_(i, j); }
  void set(Index i, Index j, double bid);
  void set_row(Index i, std::span<const double> bids);
  std::vector<double> row(Index i) const;

  double column_total(Index j) const { return values_.col(j).sum(); }
  double others_total(Index i, Index j) const;

  const Eigen::MatrixXd& values() const { return values_; }

 private:
  Eigen::MatrixXd values_;
};

struct AllocationMatrix {
  Eigen::MatrixXd shares;
  std::vector<bool> degenerate;  // per item: all bids zero, equal split

  Index agents() const { return shares.rows(); }
  Index items() const { return shares.cols(); }
  std::vector<double> row(Index i) const;
};

struct PaymentMatrix {
  Eigen::MatrixXd values;

  Index agents() const { return values.rows(); }
  Index items() const { return values.cols(); }
  double row_total(Index i) const { return values.row(i).sum(); }
  std::vector<double> row(Index i) const;
};

/// d_ij = b_ij / B_j; an all-zero column is split equally and flagged degenerate.
AllocationMatrix allocate_proportional(const BidMatrix& bids);

/// Proportional allocation of an arbitrary nonnegative matrix (used for effective bids).
AllocationMatrix allocate_proportional(const Eigen::MatrixXd& bids);

struct ConstraintReport {
  double budget_slack;
  double ros_slack;
  bool feasible;
};

ConstraintReport check_constraints(const AgentSpec& agent, std::span<const double> payments,
                                   double value);

double liquid_welfare(const Instance& instance, const AllocationMatrix& alloc);

}  // namespace propauction
