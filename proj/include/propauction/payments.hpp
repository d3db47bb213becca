#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

#include "propauction/model.hpp"

namespace propauction {

enum class Scheme { standard, general, power, modified };

std::string_view to_string(Scheme scheme);
Scheme scheme_from_string(std::string_view name);

struct QuadratureSettings {
  double rel_tol = 1e-10;
  std::size_t max_subdivisions = 1'000'000;
};

/// User-supplied pricing functions for the integral payment rule.
///
/// `g(u, others)` may depend on the competing total so that the pay-your-bid rule
/// (g(u) = u^2 / others) is expressible. `h(others)` is the entry charge.
struct GeneralPricing {
  std::function<double(double u, double others)> g;
  std::function<double(double others)> h;
};

/// Power-family pricing g(u) = scale * u^exponent, h(u) = entry_scale * u^exponent.
/// This is the form of the general scheme that can be written to a config file.
GeneralPricing power_family_pricing(double exponent, double scale, double entry_scale);

struct MechanismSpec {
  Scheme scheme = Scheme::standard;
  double eps = 0.0;      // power / modified
  double bid_cap = 1.0;  // modified: public upper bound W on raw bids
  QuadratureSettings quadrature;
  GeneralPricing pricing;  // general
  // Parameters behind `pricing` when it came from a config file; 0 exponent means "custom".
  double general_exponent = 0.0;
  double general_scale = 1.0;
  double general_entry_scale = 0.0;

  static MechanismSpec standard();
  static MechanismSpec power(double eps);
  static MechanismSpec modified(double eps, double bid_cap);
  static MechanismSpec general(GeneralPricing pricing, QuadratureSettings quad = {});
  static MechanismSpec general_power_family(double exponent, double scale, double entry_scale,
                                            QuadratureSettings quad = {});

  /// Throws UsageError when the parameters are not admissible for `agents` bidders.
  void validate(std::size_t agents) const;

  /// (n - 1) * eps, the exponent in g(u) = u^{1 + (n-1) eps}.
  double power_exponent(std::size_t agents) const;
  /// Raw-bid threshold 1 / ((n - 1) eps) of the modified mechanism.
  double threshold(std::size_t agents) const;
};

PaymentMatrix payment_standard(const BidMatrix& bids);

/// One entry of the integral payment rule, by adaptive Gauss-Kronrod quadrature.
double general_payment(double bid, double others, const GeneralPricing& pricing,
                       const QuadratureSettings& quad);

PaymentMatrix payment_general_quadrature(const BidMatrix& bids, const GeneralPricing& pricing,
                                         const QuadratureSettings& quad = {});

/// p_ij = B_{-i,j} * B_j^{k} / k with k = (n - 1) eps.
PaymentMatrix payment_power_closed_form(const BidMatrix& bids, std::size_t agents, double eps);

/// |eps * sum_i p_ij - B_j^{1 + (n-1) eps}| per item; B_j is the payment-basis bid total
/// (the transformed bids for the modified mechanism).
std::vector<double> price_identity_residual(const BidMatrix& bids, const MechanismSpec& spec);

/// max{raw - threshold, 0} / (n W). Rejects raw bids above W.
BidMatrix transform_bids_modified(const BidMatrix& raw, std::size_t agents, double eps, double cap);

/// Power-scheme payments on the transformed bids. Checks p_ij <= raw_ij for every entry whose
/// raw bid clears the threshold.
PaymentMatrix payment_modified(const BidMatrix& raw, std::size_t agents, double eps, double cap);

/// Entries with p_ij > raw_ij (+ slack). The cap holds for entries above the threshold; a
/// sub-threshold bidder still owes the entry charge h(B_{-i,j}).
struct CapViolation {
  Index agent;
  Index item;
  double raw_bid;
  double payment;
};
std::vector<CapViolation> payment_cap_violations(const BidMatrix& raw, const PaymentMatrix& pay,
                                                 double slack = 0.0);

/// Proportional allocation on max{raw - threshold, 0}; the 1/(nW) scale is omitted.
AllocationMatrix allocation_for_modified(const BidMatrix& raw, std::size_t agents, double eps,
                                         double cap);

// ---------------------------------------------------------------------------------------------
// Mechanism-level dispatch.
//
// Every scheme allocates proportionally on an "effective" bid: the raw bid for
// standard / general / power, and the threshold excess max{raw - threshold, 0} for modified.
// Payments are a function of (own effective bid, others' effective total) per item.

Eigen::MatrixXd effective_bids(const MechanismSpec& mech, const BidMatrix& raw);
double raw_from_effective(const MechanismSpec& mech, std::size_t agents, double effective);

AllocationMatrix mechanism_allocation(const MechanismSpec& mech, const BidMatrix& raw);
PaymentMatrix mechanism_payments(const MechanismSpec& mech, const BidMatrix& raw);

/// The bids the payment rule is evaluated on (transformed bids for modified).
BidMatrix payment_basis_bids(const MechanismSpec& mech, const BidMatrix& raw);

/// Payment of one bidder on one item in effective units.
double item_payment(const MechanismSpec& mech, std::size_t agents, double effective,
                    double others);
/// d(payment)/d(effective bid).
double item_marginal_payment(const MechanismSpec& mech, std::size_t agents, double effective,
                             double others);
/// Largest meaningful effective bid on one item: the cap for modified, else the bid at which
/// the item payment alone reaches `budget`.
double effective_upper_bound(const MechanismSpec& mech, std::size_t agents, double others,
                             double budget);

/// g(u) = u^{1 + k}; the price function of the power scheme.
inline double power_price(double total, double k) { return std::pow(total, 1.0 + k); }

}  // namespace propauction
