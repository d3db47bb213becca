#include "propauction/payments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "propauction/errors.hpp"

namespace propauction {

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::standard:
      return "standard";
    case Scheme::general:
      return "general";
    case Scheme::power:
      return "power";
    case Scheme::modified:
      return "modified";
  }
  return "?";
}

Scheme scheme_from_string(std::string_view name) {
  if (name == "standard") return Scheme::standard;
  if (name == "general") return Scheme::general;
  if (name == "power") return Scheme::power;
  if (name == "modified") return Scheme::modified;
  throw UsageError("unknown payment scheme '" + std::string(name) + "'");
}

GeneralPricing power_family_pricing(double exponent, double scale, double entry_scale) {
  return GeneralPricing{
      [=](double u, double) { return scale * std::pow(u, exponent); },
      [=](double others) { return entry_scale * std::pow(others, exponent); },
  };
}

MechanismSpec MechanismSpec::standard() { return MechanismSpec{}; }

MechanismSpec MechanismSpec::power(double eps) {
  MechanismSpec m;
  m.scheme = Scheme::power;
  m.eps = eps;
  return m;
}

MechanismSpec MechanismSpec::modified(double eps, double bid_cap) {
  MechanismSpec m;
  m.scheme = Scheme::modified;
  m.eps = eps;
  m.bid_cap = bid_cap;
  return m;
}

MechanismSpec MechanismSpec::general(GeneralPricing pricing, QuadratureSettings quad) {
  MechanismSpec m;
  m.scheme = Scheme::general;
  m.pricing = std::move(pricing);
  m.quadrature = quad;
  return m;
}

MechanismSpec MechanismSpec::general_power_family(double exponent, double scale,
                                                  double entry_scale, QuadratureSettings quad) {
  MechanismSpec m = general(power_family_pricing(exponent, scale, entry_scale), quad);
  m.general_exponent = exponent;
  m.general_scale = scale;
  m.general_entry_scale = entry_scale;
  return m;
}

void MechanismSpec::validate(std::size_t agents) const {
  if (!(quadrature.rel_tol > 0.0) || quadrature.max_subdivisions == 0) {
    throw UsageError("quadrature tolerance must be positive with at least one subdivision");
  }
  switch (scheme) {
    case Scheme::standard:
      return;
    case Scheme::general:
      if (!pricing.g || !pricing.h) throw UsageError("general scheme needs both g and h");
      return;
    case Scheme::power:
    case Scheme::modified:
      if (agents < 2) throw UsageError("power-type schemes need at least two agents");
      if (!std::isfinite(eps) || power_exponent(agents) < 1.0) {
        throw UsageError("power-type schemes need eps * (n - 1) >= 1");
      }
      if (scheme == Scheme::modified && !(bid_cap >= 1.0 && std::isfinite(bid_cap))) {
        throw UsageError("modified mechanism needs a finite bid cap W >= 1");
      }
      return;
  }
}

double MechanismSpec::power_exponent(std::size_t agents) const {
  const double k = static_cast<double>(agents - 1) * eps;
  // eps = 1/(n-1) should give exactly k = 1, not 0.9999999999999999.
  const double nearest = std::round(k);
  return std::abs(k - nearest) <= 1e-12 * std::max(1.0, nearest) ? nearest : k;
}

double MechanismSpec::threshold(std::size_t agents) const {
  return 1.0 / power_exponent(agents);
}

PaymentMatrix payment_standard(const BidMatrix& bids) { return PaymentMatrix{bids.values()}; }

namespace {

unsigned depth_for(std::size_t max_subdivisions) {
  unsigned depth = 0;
  while (depth < 40 && (std::size_t{1} << depth) < max_subdivisions) ++depth;
  return depth;
}

}  // namespace

double general_payment(double bid, double others, const GeneralPricing& pricing,
                       const QuadratureSettings& quad) {
  if (others <= 0.0) {
    const double entry = pricing.h(0.0);
    const double top = bid > 0.0 ? pricing.g(bid, 0.0) : 0.0;
    if (!std::isfinite(entry) || !std::isfinite(top)) {
      throw PreconditionError("payment rule is undefined on a column with no competing bids");
    }
    return entry;
  }
  const double entry = pricing.h(others);
  if (bid <= 0.0) return entry;

  // Integrate over [0, 1] so tiny bids do not trip the absolute-width heuristics of the rule.
  auto integrand = [&](double t) {
    const double u = bid * t + others;
    return bid * pricing.g(u, others) / (u * u);
  };
  // Deeper recursion inflates the accumulated error estimate, so start shallow and escalate.
  const unsigned max_depth = depth_for(quad.max_subdivisions);
  double error = 0.0;
  double l1 = 0.0;
  double integral = 0.0;
  for (unsigned depth = 0;; depth = std::min(max_depth, depth + 4)) {
    integral = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, 0.0, 1.0, depth,
                                                                             quad.rel_tol, &error, &l1);
    if (error <= quad.rel_tol * l1 || depth == max_depth) break;
  }
  if (!std::isfinite(integral) || error > quad.rel_tol * std::max(l1, 1e-300)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "payment quadrature did not converge: bid=" << bid << " others=" << others
        << " estimate=" << integral << " error=" << error << " l1=" << l1
        << " rel_tol=" << quad.rel_tol;
    throw NumericError(msg.str());
  }
  return others * integral + entry;
}

PaymentMatrix payment_general_quadrature(const BidMatrix& bids, const GeneralPricing& pricing,
                                         const QuadratureSettings& quad) {
  PaymentMatrix out{Eigen::MatrixXd::Zero(bids.agents(), bids.items())};
  for (Index j = 0; j < bids.items(); ++j) {
    for (Index i = 0; i < bids.agents(); ++i) {
      out.values(i, j) = general_payment(bids(i, j), bids.others_total(i, j), pricing, quad);
    }
  }
  return out;
}

namespace {

double power_entry(double own, double others, double k) {
  if (others <= 0.0) return 0.0;
  return others * std::pow(own + others, k) / k;
}

void require_power_params(std::size_t agents, double eps) {
  MechanismSpec::power(eps).validate(agents);
}

}  // namespace

PaymentMatrix payment_power_closed_form(const BidMatrix& bids, std::size_t agents, double eps) {
  require_power_params(agents, eps);
  const double k = MechanismSpec::power(eps).power_exponent(agents);
  PaymentMatrix out{Eigen::MatrixXd::Zero(bids.agents(), bids.items())};
  for (Index j = 0; j < bids.items(); ++j) {
    for (Index i = 0; i < bids.agents(); ++i) {
      out.values(i, j) = power_entry(bids(i, j), bids.others_total(i, j), k);
    }
  }
  return out;
}

std::vector<double> price_identity_residual(const BidMatrix& bids, const MechanismSpec& spec) {
  if (spec.scheme != Scheme::power && spec.scheme != Scheme::modified) {
    throw UsageError("price identity is defined for the power and modified schemes only");
  }
  const auto n = static_cast<std::size_t>(bids.agents());
  spec.validate(n);
  const BidMatrix basis = payment_basis_bids(spec, bids);
  const PaymentMatrix pay = payment_power_closed_form(basis, n, spec.eps);
  const double k = spec.power_exponent(n);
  std::vector<double> residual(static_cast<std::size_t>(bids.items()));
  for (Index j = 0; j < bids.items(); ++j) {
    residual[static_cast<std::size_t>(j)] =
        std::abs(spec.eps * pay.values.col(j).sum() - power_price(basis.column_total(j), k));
  }
  return residual;
}

BidMatrix transform_bids_modified(const BidMatrix& raw, std::size_t agents, double eps,
                                  double cap) {
  const MechanismSpec spec = MechanismSpec::modified(eps, cap);
  spec.validate(agents);
  const double threshold = spec.threshold(agents);
  const double scale = 1.0 / (static_cast<double>(agents) * cap);
  BidMatrix out(raw.agents(), raw.items());
  for (Index i = 0; i < raw.agents(); ++i) {
    for (Index j = 0; j < raw.items(); ++j) {
      if (raw(i, j) > cap) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "raw bid (" << i << ", " << j << ") = " << raw(i, j) << " exceeds public bound W = "
            << cap;
        throw PreconditionError(msg.str());
      }
      out.set(i, j, std::max(raw(i, j) - threshold, 0.0) * scale);
    }
  }
  return out;
}

PaymentMatrix payment_modified(const BidMatrix& raw, std::size_t agents, double eps, double cap) {
  const BidMatrix scaled = transform_bids_modified(raw, agents, eps, cap);
  PaymentMatrix pay = payment_power_closed_form(scaled, agents, eps);
  const double threshold = MechanismSpec::modified(eps, cap).threshold(agents);
  for (Index i = 0; i < raw.agents(); ++i) {
    for (Index j = 0; j < raw.items(); ++j) {
      if (raw(i, j) > threshold && pay.values(i, j) > raw(i, j) * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "modified payment exceeds raw bid at (" << i << ", " << j
            << "): p=" << pay.values(i, j) << " bid=" << raw(i, j);
        throw InvariantError(msg.str());
      }
    }
  }
  return pay;
}

std::vector<CapViolation> payment_cap_violations(const BidMatrix& raw, const PaymentMatrix& pay,
                                                 double slack) {
  std::vector<CapViolation> out;
  for (Index i = 0; i < raw.agents(); ++i) {
    for (Index j = 0; j < raw.items(); ++j) {
      if (pay.values(i, j) > raw(i, j) + slack) {
        out.push_back({i, j, raw(i, j), pay.values(i, j)});
      }
    }
  }
  return out;
}

AllocationMatrix allocation_for_modified(const BidMatrix& raw, std::size_t agents, double eps,
                                         double cap) {
  if (static_cast<Index>(agents) != raw.agents()) throw UsageError("agent count does not match bids");
  return mechanism_allocation(MechanismSpec::modified(eps, cap), raw);
}

Eigen::MatrixXd effective_bids(const MechanismSpec& mech, const BidMatrix& raw) {
  if (mech.scheme != Scheme::modified) return raw.values();
  const auto n = static_cast<std::size_t>(raw.agents());
  mech.validate(n);
  const double threshold = mech.threshold(n);
  Eigen::MatrixXd out(raw.agents(), raw.items());
  for (Index i = 0; i < raw.agents(); ++i) {
    for (Index j = 0; j < raw.items(); ++j) {
      if (raw(i, j) > mech.bid_cap) {
        throw PreconditionError("raw bid exceeds the public bound W of the modified mechanism");
      }
      out(i, j) = std::max(raw(i, j) - threshold, 0.0);
    }
  }
  return out;
}

double raw_from_effective(const MechanismSpec& mech, std::size_t agents, double effective) {
  if (mech.scheme != Scheme::modified) return effective;
  if (effective <= 0.0) return 0.0;
  return std::min(effective + mech.threshold(agents), mech.bid_cap);
}

AllocationMatrix mechanism_allocation(const MechanismSpec& mech, const BidMatrix& raw) {
  return allocate_proportional(effective_bids(mech, raw));
}

BidMatrix payment_basis_bids(const MechanismSpec& mech, const BidMatrix& raw) {
  if (mech.scheme != Scheme::modified) return raw;
  const auto n = static_cast<std::size_t>(raw.agents());
  return transform_bids_modified(raw, n, mech.eps, mech.bid_cap);
}

PaymentMatrix mechanism_payments(const MechanismSpec& mech, const BidMatrix& raw) {
  const auto n = static_cast<std::size_t>(raw.agents());
  mech.validate(n);
  switch (mech.scheme) {
    case Scheme::standard:
      return payment_standard(raw);
    case Scheme::general:
      return payment_general_quadrature(raw, mech.pricing, mech.quadrature);
    case Scheme::power:
      return payment_power_closed_form(raw, n, mech.eps);
    case Scheme::modified:
      return payment_modified(raw, n, mech.eps, mech.bid_cap);
  }
  throw UsageError("unknown scheme");
}

double item_payment(const MechanismSpec& mech, std::size_t agents, double effective,
                    double others) {
  switch (mech.scheme) {
    case Scheme::standard:
      return effective;
    case Scheme::general:
      return general_payment(effective, others, mech.pricing, mech.quadrature);
    case Scheme::power:
      return power_entry(effective, others, mech.power_exponent(agents));
    case Scheme::modified: {
      const double scale = 1.0 / (static_cast<double>(agents) * mech.bid_cap);
      return power_entry(effective * scale, others * scale, mech.power_exponent(agents));
    }
  }
  return 0.0;
}

double item_marginal_payment(const MechanismSpec& mech, std::size_t agents, double effective,
                             double others) {
  switch (mech.scheme) {
    case Scheme::standard:
      return 1.0;
    case Scheme::general: {
      if (others <= 0.0) return 0.0;
      const double u = effective + others;
      return others * mech.pricing.g(u, others) / (u * u);
    }
    case Scheme::power: {
      if (others <= 0.0) return 0.0;
      return others * std::pow(effective + others, mech.power_exponent(agents) - 1.0);
    }
    case Scheme::modified: {
      if (others <= 0.0) return 0.0;
      const double scale = 1.0 / (static_cast<double>(agents) * mech.bid_cap);
      const double k = mech.power_exponent(agents);
      return scale * (others * scale) * std::pow((effective + others) * scale, k - 1.0);
    }
  }
  return 0.0;
}

double effective_upper_bound(const MechanismSpec& mech, std::size_t agents, double others,
                             double budget) {
  switch (mech.scheme) {
    case Scheme::standard:
      return budget;
    case Scheme::power: {
      if (others <= 0.0) return budget;
      const double k = mech.power_exponent(agents);
      return std::max(0.0, std::pow(k * budget / others, 1.0 / k) - others);
    }
    case Scheme::modified: {
      const double room = std::max(0.0, mech.bid_cap - mech.threshold(agents));
      if (others <= 0.0) return room;
      const double k = mech.power_exponent(agents);
      const double s = static_cast<double>(agents) * mech.bid_cap;
      const double by_budget = std::max(0.0, s * std::pow(k * budget * s / others, 1.0 / k) - others);
      return std::min(room, by_budget);
    }
    case Scheme::general: {
      if (item_payment(mech, agents, 0.0, others) >= budget) return 0.0;
      double hi = std::max({others, budget, 1e-12});
      for (int it = 0; it < 200 && item_payment(mech, agents, hi, others) < budget; ++it) hi *= 2.0;
      return hi;
    }
  }
  return budget;
}

}  // namespace propauction
