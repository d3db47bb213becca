#include "propauction/welfare.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "propauction/errors.hpp"
#include "propauction/tolerances.hpp"

namespace propauction {

AssignmentGrid::AssignmentGrid(double step, double budget) : step_(step), budget_(budget) {
  if (!(step > 0.0 && step <= 1.0)) throw UsageError("grid step must lie in (0, 1]");
  const double inv = 1.0 / step;
  const double rounded = std::round(inv);
  if (std::abs(inv - rounded) > 1e-9 * inv) throw UsageError("grid step must divide 1 exactly");
  divisions_ = static_cast<std::size_t>(rounded);
  if (!(budget > 0.0)) throw UsageError("enumeration budget must be positive");
}

// ---------------------------------------------------------------------------------------------
// Concave optimum

namespace {

double item_second(const ValuationSpec& val, std::size_t j, double d) {
  const double c = val.coeffs()[j];
  switch (val.kind()) {
    case ValuationKind::linear:
      return 0.0;
    case ValuationKind::power_sum: {
      const double q = val.exponents()[j];
      return q == 1.0 ? 0.0 : c * q * (q - 1.0) * std::pow(d, q - 2.0);
    }
    case ValuationKind::log_sum: {
      const double s = val.shift() + d;
      return -c / (s * s);
    }
  }
  return 0.0;
}

class BarrierProblem {
 public:
  explicit BarrierProblem(const Instance& inst)
      : inst_(inst), n_(inst.agents()), m_(inst.items()), dim_(n_ * m_ + n_) {}

  std::size_t dim() const { return dim_; }
  std::size_t constraints() const { return n_ * m_ + 2 * n_; }

  double d(const Eigen::VectorXd& z, std::size_t i, std::size_t j) const {
    return z(static_cast<Index>(i * m_ + j));
  }
  double t(const Eigen::VectorXd& z, std::size_t i) const {
    return z(static_cast<Index>(n_ * m_ + i));
  }

  double value_of(const Eigen::VectorXd& z, std::size_t i) const {
    double v = 0.0;
    for (std::size_t j = 0; j < m_; ++j) v += inst_.agent(i).valuation().item_value(j, d(z, i, j));
    return v;
  }

  Eigen::VectorXd start() const {
    Eigen::VectorXd z(static_cast<Index>(dim_));
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) z(static_cast<Index>(i * m_ + j)) = 1.0 / static_cast<double>(n_);
    }
    for (std::size_t i = 0; i < n_; ++i) {
      z(static_cast<Index>(n_ * m_ + i)) = std::min(inst_.agent(i).budget(), value_of(z, i)) - 1.0;
    }
    return z;
  }

  bool strictly_feasible(const Eigen::VectorXd& z) const {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) {
        if (!(d(z, i, j) > 0.0 && d(z, i, j) <= 1.0)) return false;
      }
      if (!(inst_.agent(i).budget() - t(z, i) > 0.0)) return false;
      if (!(value_of(z, i) - t(z, i) > 0.0)) return false;
    }
    return true;
  }

  double barrier_value(const Eigen::VectorXd& z, double mu) const {
    double f = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      f += t(z, i);
      f += mu * (std::log(inst_.agent(i).budget() - t(z, i)) + std::log(value_of(z, i) - t(z, i)));
      for (std::size_t j = 0; j < m_; ++j) f += mu * std::log(d(z, i, j));
    }
    return f;
  }

  void derivatives(const Eigen::VectorXd& z, double mu, Eigen::VectorXd& g, Eigen::MatrixXd& H) const {
    g.setZero(static_cast<Index>(dim_));
    H.setZero(static_cast<Index>(dim_), static_cast<Index>(dim_));
    for (std::size_t i = 0; i < n_; ++i) {
      const auto& val = inst_.agent(i).valuation();
      const auto ti = static_cast<Index>(n_ * m_ + i);
      const double slack_w = inst_.agent(i).budget() - t(z, i);
      const double slack_v = value_of(z, i) - t(z, i);
      g(ti) = 1.0 - mu / slack_w - mu / slack_v;
      H(ti, ti) = -mu / (slack_w * slack_w) - mu / (slack_v * slack_v);
      std::vector<double> grad(m_);
      for (std::size_t j = 0; j < m_; ++j) grad[j] = val.item_marginal(j, d(z, i, j));
      for (std::size_t j = 0; j < m_; ++j) {
        const auto a = static_cast<Index>(i * m_ + j);
        const double dij = d(z, i, j);
        g(a) = mu * grad[j] / slack_v + mu / dij;
        H(a, ti) = H(ti, a) = mu * grad[j] / (slack_v * slack_v);
        for (std::size_t k = 0; k < m_; ++k) {
          const auto b = static_cast<Index>(i * m_ + k);
          H(a, b) = -mu * grad[j] * grad[k] / (slack_v * slack_v);
        }
        H(a, a) += mu * item_second(val, j, dij) / slack_v - mu / (dij * dij);
      }
    }
  }

  Eigen::MatrixXd equality_matrix() const {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Index>(m_), static_cast<Index>(dim_));
    for (std::size_t j = 0; j < m_; ++j) {
      for (std::size_t i = 0; i < n_; ++i) A(static_cast<Index>(j), static_cast<Index>(i * m_ + j)) = 1.0;
    }
    return A;
  }

  AllocationMatrix allocation(const Eigen::VectorXd& z) const {
    AllocationMatrix a{Eigen::MatrixXd(static_cast<Index>(n_), static_cast<Index>(m_)),
                       std::vector<bool>(m_, false)};
    for (std::size_t j = 0; j < m_; ++j) {
      double total = 0.0;
      for (std::size_t i = 0; i < n_; ++i) total += d(z, i, j);
      for (std::size_t i = 0; i < n_; ++i) {
        a.shares(static_cast<Index>(i), static_cast<Index>(j)) = d(z, i, j) / total;
      }
    }
    return a;
  }

 private:
  const Instance& inst_;
  std::size_t n_;
  std::size_t m_;
  std::size_t dim_;
};

}  // namespace

WelfareOptimum optimal_lw_concave(const Instance& instance, const WelfareSolverParams& params) {
  BarrierProblem prob(instance);
  Eigen::VectorXd z = prob.start();
  const Eigen::MatrixXd A = prob.equality_matrix();
  const auto N = static_cast<Index>(prob.dim());
  const Index E = A.rows();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(N + E, N + E);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N + E);
  Eigen::VectorXd g;
  Eigen::MatrixXd H;

  double scale = 1.0;
  for (std::size_t i = 0; i < instance.agents(); ++i) scale += instance.agent(i).budget();
  double mu = 1.0;
  std::size_t newton_total = 0;
  bool stalled = false;
  const auto count = static_cast<double>(prob.constraints());

  for (;;) {
    for (std::size_t it = 0; it < params.max_newton; ++it) {
      prob.derivatives(z, mu, g, H);
      K.topLeftCorner(N, N) = H;
      K.topRightCorner(N, E) = A.transpose();
      K.bottomLeftCorner(E, N) = A;
      rhs.head(N) = -g;
      const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
      const Eigen::VectorXd step = sol.head(N);
      const double decrement = -step.dot(H * step);
      ++newton_total;
      if (!(decrement > 1e-14 * scale)) break;
      const double f0 = prob.barrier_value(z, mu);
      const double slope = g.dot(step);
      double s = 1.0;
      while (s > 1e-14 && !prob.strictly_feasible(z + s * step)) s *= 0.5;
      while (s > 1e-14 && prob.barrier_value(z + s * step, mu) < f0 + 0.25 * s * slope) s *= 0.5;
      if (s <= 1e-14) {
        stalled = true;
        break;
      }
      z += s * step;
    }
    if (mu * count <= params.gap_tol * scale) break;
    mu *= 0.2;
  }

  WelfareOptimum out;
  out.allocation = prob.allocation(z);
  out.value = liquid_welfare(instance, out.allocation);
  out.converged = !stalled || mu * count <= 1e-6 * scale;
  if (stalled) {
    std::ostringstream msg;
    msg << "line search stalled after " << newton_total << " Newton steps at barrier weight " << mu;
    out.diagnostic = msg.str();
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Grid optimum

namespace {

void compositions(std::size_t parts, std::size_t total, std::vector<std::size_t>& cur,
                  std::vector<std::vector<std::size_t>>& out) {
  if (parts == 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (std::size_t k = 0; k <= total; ++k) {
    cur.push_back(k);
    compositions(parts - 1, total - k, cur, out);
    cur.pop_back();
  }
}

}  // namespace

double grid_assignment_count(std::size_t agents, std::size_t items, const AssignmentGrid& grid) {
  // compositions of K into `agents` parts: C(K + n - 1, n - 1)
  const double K = static_cast<double>(grid.divisions());
  double per_item = 1.0;
  for (std::size_t r = 1; r < agents; ++r) per_item = per_item * (K + static_cast<double>(r)) / static_cast<double>(r);
  return std::pow(per_item, static_cast<double>(items));
}

WelfareOptimum optimal_lw_grid(const Instance& instance, const AssignmentGrid& grid) {
  const std::size_t n = instance.agents();
  const std::size_t m = instance.items();
  const std::size_t K = grid.divisions();
  std::vector<std::vector<std::size_t>> comps;
  std::vector<std::size_t> cur;
  compositions(n, K, cur, comps);
  const double evaluations = std::pow(static_cast<double>(comps.size()), static_cast<double>(m));
  if (evaluations > grid.budget()) {
    std::ostringstream msg;
    msg << "grid enumeration needs " << evaluations << " assignments, budget is " << grid.budget()
        << "; use a coarser grid step";
    throw UsageError(msg.str());
  }

  // item_values[j][c][i]: agent i's value for its share in composition c of item j
  std::vector<std::vector<std::vector<double>>> item_values(m);
  for (std::size_t j = 0; j < m; ++j) {
    item_values[j].resize(comps.size());
    for (std::size_t c = 0; c < comps.size(); ++c) {
      item_values[j][c].resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        item_values[j][c][i] = instance.agent(i).valuation().item_value(j, grid.fraction(comps[c][i]));
      }
    }
  }
  std::vector<double> budgets(n);
  for (std::size_t i = 0; i < n; ++i) budgets[i] = instance.agent(i).budget();

  std::vector<std::vector<double>> partial(m + 1, std::vector<double>(n, 0.0));
  std::vector<std::size_t> choice(m, 0);
  std::vector<std::size_t> best_choice(m, 0);
  double best = -1.0;
  std::function<void(std::size_t)> recurse = [&](std::size_t j) {
    if (j == m) {
      double lw = 0.0;
      for (std::size_t i = 0; i < n; ++i) lw += std::min(budgets[i], partial[m][i]);
      if (lw > best) {
        best = lw;
        best_choice = choice;
      }
      return;
    }
    for (std::size_t c = 0; c < comps.size(); ++c) {
      choice[j] = c;
      for (std::size_t i = 0; i < n; ++i) partial[j + 1][i] = partial[j][i] + item_values[j][c][i];
      recurse(j + 1);
    }
  };
  recurse(0);

  WelfareOptimum out;
  out.value = best;
  out.allocation.shares = Eigen::MatrixXd(static_cast<Index>(n), static_cast<Index>(m));
  out.allocation.degenerate.assign(m, false);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      out.allocation.shares(static_cast<Index>(i), static_cast<Index>(j)) =
          grid.fraction(comps[best_choice[j]][i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Dual certificates

std::string_view to_string(CertificateTag tag) {
  return tag == CertificateTag::standard_pm ? "standard-PM" : "power-PM";
}

CertificateTag certificate_tag_from_string(std::string_view name) {
  if (name == "standard-PM") return CertificateTag::standard_pm;
  if (name == "power-PM") return CertificateTag::power_pm;
  throw UsageError("unknown certificate tag '" + std::string(name) + "'");
}

namespace {

void check_shapes(const Instance& instance, const EquilibriumResult& eq) {
  if (eq.bids.agents() != static_cast<Index>(instance.agents()) ||
      eq.bids.items() != static_cast<Index>(instance.items()) ||
      eq.allocation.agents() != eq.bids.agents() || eq.allocation.items() != eq.bids.items()) {
    throw UsageError("equilibrium does not match the instance shape");
  }
}

void finish(DualCertificate& c) {
  c.objective = 0.0;
  for (double a : c.alpha) c.objective += a;
  for (double b : c.beta) c.objective += b;
  if (!std::isfinite(c.objective)) throw NumericError("dual objective is not finite");
}

}  // namespace

DualCertificate build_dual_standard(const Instance& instance, const EquilibriumResult& eq) {
  check_shapes(instance, eq);
  if (eq.mechanism.scheme != Scheme::standard) {
    throw UsageError("standard certificate needs a standard-payment equilibrium");
  }
  DualCertificate c;
  c.tag = CertificateTag::standard_pm;
  for (Index j = 0; j < eq.bids.items(); ++j) c.alpha.push_back(eq.bids.column_total(j));
  for (std::size_t i = 0; i < instance.agents(); ++i) {
    const AgentSpec& a = instance.agent(i);
    const auto d = eq.allocation.row(static_cast<Index>(i));
    const double v = eval_valuation(a.valuation(), d);
    if (a.rho() == 0.0) {
      c.beta.push_back(std::min(a.budget(), v));
    } else if (a.rho() == 1.0) {
      if (v >= a.budget()) {
        c.beta.push_back(a.budget());
      } else {
        double correction = 0.0;
        for (std::size_t j = 0; j < d.size(); ++j) {
          correction += (1.0 - d[j]) * a.valuation().item_euler_term(j, d[j]);
        }
        c.beta.push_back(2.0 * v - correction);
      }
    } else {
      throw UsageError("standard certificate is defined only for rho in {0, 1}; agent " +
                       std::to_string(i) + " has a hybrid rho");
    }
  }
  finish(c);
  return c;
}

DualCertificate build_dual_power(const Instance& instance, const EquilibriumResult& eq) {
  check_shapes(instance, eq);
  const MechanismSpec& mech = eq.mechanism;
  if (mech.scheme != Scheme::power && mech.scheme != Scheme::modified) {
    throw UsageError("power certificate needs a power or modified equilibrium");
  }
  const std::size_t n = instance.agents();
  const double k = mech.power_exponent(n);
  const BidMatrix basis = payment_basis_bids(mech, eq.bids);
  DualCertificate c;
  c.tag = CertificateTag::power_pm;
  for (Index j = 0; j < basis.items(); ++j) {
    const double total = basis.column_total(j);
    if (!(total > 0.0)) {
      throw PreconditionError("power certificate needs a positive bid total on item " + std::to_string(j));
    }
    c.alpha.push_back(power_price(total, k));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const AgentSpec& a = instance.agent(i);
    const auto d = eq.allocation.row(static_cast<Index>(i));
    const double v = eval_valuation(a.valuation(), d);
    if (v < a.budget()) {
      double euler = 0.0;
      for (std::size_t j = 0; j < d.size(); ++j) euler += a.valuation().item_euler_term(j, d[j]);
      c.beta.push_back(v - euler);
    } else {
      c.beta.push_back(a.budget());
    }
  }
  finish(c);
  return c;
}

FeasibilityReport check_dual_feasibility(const DualCertificate& cert, const Instance& instance,
                                         const AssignmentGrid& grid) {
  const std::size_t n = instance.agents();
  const std::size_t m = instance.items();
  if (cert.alpha.size() != m || cert.beta.size() != n) {
    throw UsageError("certificate does not match the instance shape");
  }
  const std::size_t K = grid.divisions();
  const double per_agent = std::pow(static_cast<double>(K + 1), static_cast<double>(m));
  if (per_agent * static_cast<double>(n) > grid.budget()) {
    throw UsageError("dual feasibility enumeration exceeds the budget; use a coarser grid step");
  }

  FeasibilityReport rep;
  rep.min_slack = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> ks(m, 0);
  std::vector<std::size_t> worst_ks;
  std::size_t worst_agent = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const AgentSpec& a = instance.agent(i);
    std::vector<std::vector<double>> values(m, std::vector<double>(K + 1));
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t k = 0; k <= K; ++k) values[j][k] = a.valuation().item_value(j, grid.fraction(k));
    }
    std::fill(ks.begin(), ks.end(), 0);
    for (;;) {
      double lhs = cert.beta[i];
      double v = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        lhs += grid.fraction(ks[j]) * cert.alpha[j];
        v += values[j][ks[j]];
      }
      const double slack = lhs - std::min(a.budget(), v);
      if (slack < rep.min_slack) {
        rep.min_slack = slack;
        worst_ks = ks;
        worst_agent = i;
      }
      std::size_t pos = 0;
      while (pos < m && ks[pos] == K) ks[pos++] = 0;
      if (pos == m) break;
      ++ks[pos];
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    rep.worst.push_back({static_cast<Index>(worst_agent), static_cast<Index>(j), grid.fraction(worst_ks[j])});
  }
  rep.feasible = rep.min_slack >= -tol::kDualFeasibility;
  return rep;
}

double joint_duality_gap(const DualCertificate& cert, const Instance& instance,
                         const AssignmentGrid& grid) {
  return cert.objective - optimal_lw_grid(instance, grid).value;
}

PoaReport poa_report(const Instance& instance, const EquilibriumResult& eq,
                     const DualCertificate& cert, const AssignmentGrid& grid) {
  PoaReport r;
  r.lw_eq = liquid_welfare(instance, eq.allocation);
  r.opt_concave = optimal_lw_concave(instance).value;
  r.opt_grid = optimal_lw_grid(instance, grid).value;
  r.opt = std::max(r.opt_concave, r.opt_grid);
  r.solvers_disagree = r.opt_grid > r.opt_concave + 1e-6 * std::max(1.0, r.opt);
  r.dual_obj = cert.objective;
  r.feasibility = check_dual_feasibility(cert, instance, grid);
  const double inf = std::numeric_limits<double>::infinity();
  if (r.lw_eq > 0.0) {
    r.ratio = r.opt / r.lw_eq;
    r.certified_ratio = r.dual_obj / r.lw_eq;
  } else {
    r.undefined_ratio = r.opt > 0.0;
    r.ratio = r.opt > 0.0 ? inf : 1.0;
    r.certified_ratio = r.dual_obj > 0.0 ? inf : 1.0;
  }
  return r;
}

}  // namespace propauction
