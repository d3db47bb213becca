#include "propauction/agent_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "propauction/tolerances.hpp"

namespace propauction {

std::string_view to_string(BidUpperStrategy s) {
  return s == BidUpperStrategy::budget ? "budget" : "fixed";
}

BidUpperStrategy bid_upper_strategy_from_string(std::string_view name) {
  if (name == "budget") return BidUpperStrategy::budget;
  if (name == "fixed") return BidUpperStrategy::fixed;
  throw UsageError("unknown bid upper strategy '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------------------------
// AgentView

AgentView::AgentView(const Instance& instance, const BidMatrix& profile, Index agent,
                     const MechanismSpec& mech)
    : agent_(&instance.agent(static_cast<std::size_t>(agent))),
      mech_(&mech),
      n_(instance.agents()),
      others_(instance.items(), 0.0) {
  if (profile.agents() != static_cast<Index>(instance.agents()) ||
      profile.items() != static_cast<Index>(instance.items())) {
    throw UsageError("bid profile shape does not match instance");
  }
  mech.validate(n_);
  const Eigen::MatrixXd eff = effective_bids(mech, profile);
  for (Index j = 0; j < eff.cols(); ++j) {
    double total = 0.0;
    for (Index k = 0; k < eff.rows(); ++k) {
      if (k != agent) total += eff(k, j);
    }
    others_[static_cast<std::size_t>(j)] = total;
  }
}

double AgentView::effective_from_raw(double raw) const {
  if (mech_->scheme != Scheme::modified) return raw;
  if (raw > mech_->bid_cap) {
    throw PreconditionError("raw bid exceeds the public bound W of the modified mechanism");
  }
  return std::max(raw - mech_->threshold(n_), 0.0);
}

double AgentView::raw_from_effective(double effective) const {
  return propauction::raw_from_effective(*mech_, n_, effective);
}

double AgentView::share(std::size_t j, double effective) const {
  const double total = effective + others_[j];
  return total > 0.0 ? effective / total : 1.0 / static_cast<double>(n_);
}

double AgentView::share_slope(std::size_t j, double effective) const {
  const double total = effective + others_[j];
  return total > 0.0 ? others_[j] / (total * total) : 0.0;
}

double AgentView::value(std::span<const double> effective) const {
  double v = 0.0;
  for (std::size_t j = 0; j < others_.size(); ++j) {
    v += agent_->valuation().item_value(j, share(j, effective[j]));
  }
  return v;
}

double AgentView::item_payment(std::size_t j, double effective) const {
  return propauction::item_payment(*mech_, n_, effective, others_[j]);
}

double AgentView::item_marginal_payment(std::size_t j, double effective) const {
  return propauction::item_marginal_payment(*mech_, n_, effective, others_[j]);
}

double AgentView::total_payment(std::span<const double> effective) const {
  double p = 0.0;
  for (std::size_t j = 0; j < others_.size(); ++j) p += item_payment(j, effective[j]);
  return p;
}

double AgentView::cap_effective() const {
  if (mech_->scheme != Scheme::modified) return std::numeric_limits<double>::infinity();
  return std::max(0.0, mech_->bid_cap - mech_->threshold(n_));
}

double AgentView::upper(std::size_t j, const SolverParams& params) const {
  if (params.bid_upper_strategy == BidUpperStrategy::fixed) {
    return std::min(effective_from_raw(std::min(params.bid_upper,
                                                mech_->scheme == Scheme::modified
                                                    ? mech_->bid_cap
                                                    : params.bid_upper)),
                    cap_effective());
  }
  return effective_upper_bound(*mech_, n_, others_[j], agent_->budget());
}

double AgentView::objective(std::span<const double> effective) const {
  return value(effective) - agent_->rho() * total_payment(effective);
}

ConstraintReport AgentView::constraints(std::span<const double> effective) const {
  std::vector<double> pay(others_.size());
  for (std::size_t j = 0; j < others_.size(); ++j) pay[j] = item_payment(j, effective[j]);
  return check_constraints(*agent_, pay, value(effective));
}

double agent_objective(const Instance& instance, std::span<const double> own_bids,
                       const BidMatrix& profile, Index agent, const MechanismSpec& mech) {
  AgentView view(instance, profile, agent, mech);
  if (own_bids.size() != view.items()) throw DomainError("own bid vector has wrong length");
  std::vector<double> eff(own_bids.size());
  for (std::size_t j = 0; j < eff.size(); ++j) {
    if (!(own_bids[j] >= 0.0) || !std::isfinite(own_bids[j])) {
      throw DomainError("bids must be finite and nonnegative");
    }
    eff[j] = view.effective_from_raw(own_bids[j]);
  }
  return view.objective(eff);
}

// ---------------------------------------------------------------------------------------------
// KKT multiplier recovery

namespace {

struct KktInputs {
  std::vector<double> value_slope;  // dv/dd_j * dd_j/db_j
  std::vector<double> pay_slope;    // dp_j/db_j
  std::vector<bool> at_lower;
  std::vector<bool> at_upper;
  std::vector<bool> skip;  // excluded from stationarity (uncontested items inside the solver)
  double rho = 0.0;
  double budget_slack = 0.0;
  double ros_slack = 0.0;
  bool budget_binding = false;
  bool ros_binding = false;
};

KktInputs kkt_inputs(const AgentView& view, std::span<const double> x,
                     const std::vector<bool>& skip) {
  const std::size_t m = view.items();
  KktInputs in;
  in.value_slope.resize(m);
  in.pay_slope.resize(m);
  in.at_lower.resize(m);
  in.at_upper.resize(m);
  in.skip = skip;
  in.rho = view.agent().rho();
  const double cap = view.cap_effective();
  for (std::size_t j = 0; j < m; ++j) {
    const double d = view.share(j, x[j]);
    const double slope = view.share_slope(j, x[j]);
    const double dv = view.agent().valuation().item_marginal(j, d);
    in.value_slope[j] = (slope == 0.0) ? 0.0 : dv * slope;
    in.pay_slope[j] = view.item_marginal_payment(j, x[j]);
    in.at_lower[j] = x[j] <= 0.0;
    in.at_upper[j] = std::isfinite(cap) && x[j] >= cap;
  }
  const double value = view.value(x);
  const double pay = view.total_payment(x);
  in.budget_slack = view.agent().budget() - pay;
  in.ros_slack = value - pay;
  in.budget_binding = in.budget_slack <= 1e-8 * std::max(1.0, view.agent().budget());
  in.ros_binding = in.ros_slack <= 1e-8 * std::max(1.0, std::abs(value));
  return in;
}

// Nonnegative least squares over the allowed multipliers, by enumerating supports.
KktReport solve_multipliers(const KktInputs& in) {
  const std::size_t m = in.value_slope.size();
  KktReport rep;
  rep.xi.assign(m, 0.0);
  rep.zeta.assign(m, 0.0);
  rep.stationarity.assign(m, 0.0);

  std::vector<std::size_t> rows;
  for (std::size_t j = 0; j < m; ++j) {
    if (!in.skip[j]) rows.push_back(j);
  }
  const auto R = static_cast<Index>(rows.size());
  Eigen::VectorXd base(R);
  bool finite = true;
  for (Index r = 0; r < R; ++r) {
    const std::size_t j = rows[static_cast<std::size_t>(r)];
    base(r) = in.value_slope[j] - in.rho * in.pay_slope[j];
    finite = finite && std::isfinite(base(r)) && std::isfinite(in.value_slope[j]);
  }
  if (!finite) {
    for (std::size_t j : rows) rep.stationarity[j] = std::numeric_limits<double>::infinity();
    rep.max_residual = std::numeric_limits<double>::infinity();
    return rep;
  }

  // Columns: lambda, mu, xi_j, zeta_j (only those allowed by the observed slacks).
  enum class Kind { lambda, mu, xi, zeta };
  struct Var {
    Kind kind;
    std::size_t item;
    Eigen::VectorXd column;
  };
  std::vector<Var> vars;
  if (in.budget_binding) {
    Eigen::VectorXd c(R);
    for (Index r = 0; r < R; ++r) c(r) = -in.pay_slope[rows[static_cast<std::size_t>(r)]];
    vars.push_back({Kind::lambda, 0, c});
  }
  if (in.ros_binding) {
    Eigen::VectorXd c(R);
    for (Index r = 0; r < R; ++r) {
      const std::size_t j = rows[static_cast<std::size_t>(r)];
      c(r) = in.value_slope[j] - in.pay_slope[j];
    }
    vars.push_back({Kind::mu, 0, c});
  }
  for (Index r = 0; r < R; ++r) {
    const std::size_t j = rows[static_cast<std::size_t>(r)];
    if (in.at_lower[j]) vars.push_back({Kind::xi, j, Eigen::VectorXd::Unit(R, r)});
    if (in.at_upper[j]) vars.push_back({Kind::zeta, j, -Eigen::VectorXd::Unit(R, r)});
  }
  if (vars.size() > 16) throw UsageError("too many active bounds for multiplier recovery");

  const std::size_t V = vars.size();
  double best_norm = base.squaredNorm();
  std::vector<double> best_y(V, 0.0);
  for (std::size_t mask = 1; mask < (std::size_t{1} << V); ++mask) {
    std::vector<std::size_t> support;
    for (std::size_t v = 0; v < V; ++v) {
      if (mask & (std::size_t{1} << v)) support.push_back(v);
    }
    Eigen::MatrixXd A(R, static_cast<Index>(support.size()));
    for (std::size_t s = 0; s < support.size(); ++s) A.col(static_cast<Index>(s)) = vars[support[s]].column;
    const Eigen::VectorXd y = A.completeOrthogonalDecomposition().solve(-base);
    if (!y.allFinite() || (y.size() > 0 && y.minCoeff() < 0.0)) continue;
    const double norm = (base + A * y).squaredNorm();
    if (norm < best_norm * (1.0 - 1e-12) - 1e-300) {
      best_norm = norm;
      std::fill(best_y.begin(), best_y.end(), 0.0);
      for (std::size_t s = 0; s < support.size(); ++s) best_y[support[s]] = y(static_cast<Index>(s));
    }
  }

  Eigen::VectorXd resid = base;
  for (std::size_t v = 0; v < V; ++v) {
    resid += best_y[v] * vars[v].column;
    switch (vars[v].kind) {
      case Kind::lambda:
        rep.lambda = best_y[v];
        break;
      case Kind::mu:
        rep.mu = best_y[v];
        break;
      case Kind::xi:
        rep.xi[vars[v].item] = best_y[v];
        break;
      case Kind::zeta:
        rep.zeta[vars[v].item] = best_y[v];
        break;
    }
  }
  for (Index r = 0; r < R; ++r) {
    const std::size_t j = rows[static_cast<std::size_t>(r)];
    rep.stationarity[j] = resid(r) / (1.0 + rep.mu);
    rep.max_residual = std::max(rep.max_residual, std::abs(rep.stationarity[j]));
  }
  rep.budget_complementarity = rep.lambda * std::max(0.0, in.budget_slack);
  rep.ros_complementarity = rep.mu * std::max(0.0, in.ros_slack);
  return rep;
}

}  // namespace

KktReport kkt_residual(const Instance& instance, const BidMatrix& bids, const MechanismSpec& mech,
                       Index agent) {
  AgentView view(instance, bids, agent, mech);
  const std::size_t m = view.items();
  std::vector<double> x(m);
  for (std::size_t j = 0; j < m; ++j) {
    x[j] = view.effective_from_raw(bids(agent, static_cast<Index>(j)));
    if (view.others(j) <= 0.0) {
      if (mech.scheme != Scheme::standard) {
        throw PreconditionError("KKT conditions need a positive competing bid total on item " +
                                std::to_string(j) + " under this payment scheme");
      }
      if (x[j] <= 0.0) {
        throw PreconditionError("KKT conditions are undefined on the all-zero column " +
                                std::to_string(j));
      }
    }
  }
  return solve_multipliers(kkt_inputs(view, x, std::vector<bool>(m, false)));
}

// ---------------------------------------------------------------------------------------------
// Best response

namespace {

struct PathPoint {
  double payment = 0.0;
  double value = 0.0;
};

class BestResponseSolver {
 public:
  BestResponseSolver(const AgentView& view, const SolverParams& params)
      : view_(view), params_(params), m_(view.items()), x_(m_, 0.0), upper_(m_, 0.0),
        contested_(m_, false) {
    for (std::size_t j = 0; j < m_; ++j) {
      contested_[j] = view.others(j) > 0.0;
      if (contested_[j]) upper_[j] = std::max(0.0, view.upper(j, params));
    }
    choose_uncontested();
  }

  BestResponseResult solve() {
    const double rho = view_.agent().rho();
    const double budget = view_.agent().budget();
    auto budget_gap = [&](const PathPoint& p) { return budget - p.payment; };
    auto ros_gap = [&](const PathPoint& p) { return p.value - p.payment; };

    double kappa = rho;
    PathPoint at = evaluate(kappa);
    bool feasible = true;

    if (ros_gap(at) < 0.0) {
      const PathPoint at_one = evaluate(1.0);
      if (rho >= 1.0 || ros_gap(at_one) < 0.0) {
        feasible = false;
      } else {
        kappa = bisect(rho, 1.0, [&](const PathPoint& p) { return ros_gap(p) >= 0.0; });
      }
    }
    if (feasible) {
      at = evaluate(kappa);
      if (budget_gap(at) < 0.0) {
        double hi = std::max(kappa, 1.0) * 2.0;
        int doublings = 0;
        while (budget_gap(evaluate(hi)) < 0.0 && doublings < 200) {
          hi *= 2.0;
          ++doublings;
        }
        if (budget_gap(evaluate(hi)) < 0.0) {
          feasible = false;
        } else {
          kappa = bisect(kappa, hi, [&](const PathPoint& p) { return budget_gap(p) >= 0.0; });
          at = evaluate(kappa);
          if (ros_gap(at) < -tol::kFeasibility * std::max(1.0, at.value)) feasible = false;
        }
      }
    }
    if (!feasible) kappa = least_infeasible_weight();

    evaluate(kappa);
    return finish(kappa);
  }

 private:
  void choose_uncontested() {
    const double n = static_cast<double>(view_.agents());
    const double grab = std::min(params_.uncontested_bid, view_.cap_effective());
    for (std::size_t j = 0; j < m_; ++j) {
      if (contested_[j] || !(grab > 0.0)) continue;
      const auto& val = view_.agent().valuation();
      const double gain = val.item_value(j, 1.0) - val.item_value(j, 1.0 / n);
      const double cost = view_.item_payment(j, grab) - view_.item_payment(j, 0.0);
      if (gain > view_.agent().rho() * cost) x_[j] = grab;
    }
  }

  // Maximizer of phi_j(share(x)) - kappa * p_j(x) over [0, upper_j].
  double solve_item(std::size_t j, double kappa) {
    const double hi0 = upper_[j];
    if (!(hi0 > 0.0)) return 0.0;
    const auto& val = view_.agent().valuation();
    auto slope = [&](double x) {
      const double dv = val.item_marginal(j, view_.share(j, x));
      const double gain = dv == 0.0 ? 0.0 : dv * view_.share_slope(j, x);
      return gain - kappa * view_.item_marginal_payment(j, x);
    };
    if (!(slope(0.0) > 0.0)) return 0.0;
    if (slope(hi0) >= 0.0) return hi0;
    double lo = 0.0;
    double hi = hi0;
    for (std::size_t it = 0; it < params_.max_iters; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      ++iterations_;
      (slope(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  PathPoint evaluate(double kappa) {
    for (std::size_t j = 0; j < m_; ++j) {
      if (contested_[j]) x_[j] = solve_item(j, kappa);
    }
    return {view_.total_payment(x_), view_.value(x_)};
  }

  // Smallest kappa in (lo, hi] with ok(evaluate(kappa)); ok(hi) must hold.
  template <class Pred>
  double bisect(double lo, double hi, Pred ok) {
    for (std::size_t it = 0; it < params_.max_iters; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (ok(evaluate(mid)) ? hi : lo) = mid;
    }
    return hi;
  }

  double violation(const PathPoint& p) const {
    return std::max(0.0, p.payment - view_.agent().budget()) + std::max(0.0, p.payment - p.value);
  }

  double least_infeasible_weight() {
    double best_kappa = 1.0;
    double best = violation(evaluate(1.0));
    for (double kappa = 2.0; kappa < 1e12; kappa *= 2.0) {
      const double v = violation(evaluate(kappa));
      if (v < best) {
        best = v;
        best_kappa = kappa;
      }
    }
    return best_kappa;
  }

  BestResponseResult finish(double kappa) {
    BestResponseResult r;
    r.price_weight = kappa;
    r.bids.resize(m_);
    for (std::size_t j = 0; j < m_; ++j) r.bids[j] = view_.raw_from_effective(x_[j]);
    // Re-derive the effective bids from the reported raw bids so that the report is
    // self-consistent with what the mechanism will see.
    std::vector<double> x(m_);
    for (std::size_t j = 0; j < m_; ++j) x[j] = view_.effective_from_raw(r.bids[j]);
    r.objective = view_.objective(x);
    const ConstraintReport c = view_.constraints(x);
    r.feasible = c.feasible;
    r.iterations = iterations_;

    std::vector<bool> skip(m_);
    for (std::size_t j = 0; j < m_; ++j) skip[j] = !contested_[j];
    const KktInputs in = kkt_inputs(view_, x, skip);
    r.active.budget = in.budget_binding;
    r.active.ros = in.ros_binding;
    r.active.lower = in.at_lower;
    r.active.upper = in.at_upper;
    r.kkt_residual = solve_multipliers(in).max_residual;
    return r;
  }

  const AgentView& view_;
  const SolverParams& params_;
  std::size_t m_;
  std::vector<double> x_;
  std::vector<double> upper_;
  std::vector<bool> contested_;
  std::size_t iterations_ = 0;
};

}  // namespace

BestResponseResult best_response(const Instance& instance, const BidMatrix& profile, Index agent,
                                 const MechanismSpec& mech, const SolverParams& params) {
  const AgentView view(instance, profile, agent, mech);
  BestResponseSolver solver(view, params);
  BestResponseResult r = solver.solve();
  if (r.feasible && !(r.kkt_residual <= params.kkt_tol)) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "best response for agent " << agent << " stopped with KKT residual " << r.kkt_residual
        << " > " << params.kkt_tol;
    throw BestResponseError(msg.str(), std::move(r));
  }
  return r;
}

// ---------------------------------------------------------------------------------------------
// Grid oracle

double default_bid_upper(const Instance& instance, const BidMatrix& profile, Index agent,
                         const MechanismSpec& mech, const SolverParams& params) {
  if (params.bid_upper_strategy == BidUpperStrategy::fixed) return params.bid_upper;
  const AgentView view(instance, profile, agent, mech);
  if (mech.scheme == Scheme::modified) return mech.bid_cap;
  double upper = 0.0;
  for (std::size_t j = 0; j < view.items(); ++j) {
    upper = std::max(upper, view.raw_from_effective(view.upper(j, params)));
  }
  return upper;
}

namespace {

std::vector<double> grid_points(double step, double upper) {
  std::vector<double> pts{0.0};
  if (!(upper > 0.0)) return pts;
  for (std::size_t k = 1;; ++k) {
    const double b = static_cast<double>(k) * step;
    if (b > upper * (1.0 + 1e-12)) break;
    pts.push_back(std::min(b, upper));
  }
  if (upper - pts.back() > 1e-12 * upper) pts.push_back(upper);
  return pts;
}

}  // namespace

GridOracleResult best_response_grid_oracle(const Instance& instance, const BidMatrix& profile,
                                           Index agent, const MechanismSpec& mech,
                                           double grid_step, double bid_upper) {
  const AgentView view(instance, profile, agent, mech);
  const std::size_t m = view.items();
  if (m > 2) throw UsageError("grid oracle supports at most two items");
  if (!(grid_step > 0.0) || !(bid_upper >= 0.0)) {
    throw UsageError("grid oracle needs a positive step and nonnegative upper bound");
  }
  const double upper = mech.scheme == Scheme::modified ? std::min(bid_upper, mech.bid_cap) : bid_upper;
  const std::vector<double> pts = grid_points(grid_step, upper);

  GridOracleResult out;
  bool have_feasible = false;
  double best_obj = -std::numeric_limits<double>::infinity();
  double best_violation = std::numeric_limits<double>::infinity();
  std::vector<double> best_bids(m, 0.0);
  std::vector<double> fallback_bids(m, 0.0);
  double fallback_obj = 0.0;

  std::vector<double> raw(m, 0.0);
  std::vector<double> eff(m, 0.0);
  auto visit = [&](double obj, const ConstraintReport& c) {
    ++out.evaluated;
    if (c.feasible) {
      if (!have_feasible || obj > best_obj) {
        have_feasible = true;
        best_obj = obj;
        best_bids = raw;
      }
    } else if (!have_feasible) {
      const double v = std::max(0.0, -c.budget_slack) + std::max(0.0, -c.ros_slack);
      if (v < best_violation) {
        best_violation = v;
        fallback_bids = raw;
        fallback_obj = obj;
      }
    }
  };
  auto eval = [&]() {
    for (std::size_t j = 0; j < m; ++j) eff[j] = view.effective_from_raw(raw[j]);
    const double obj = view.objective(eff);
    visit(obj, view.constraints(eff));
    return obj;
  };

  if (m == 1) {
    double prev = 0.0;
    for (std::size_t a = 0; a < pts.size(); ++a) {
      raw[0] = pts[a];
      const double f = eval();
      if (a > 0) out.lipschitz = std::max(out.lipschitz, std::abs(f - prev) / (pts[a] - pts[a - 1]));
      prev = f;
    }
  } else {
    std::vector<double> prev_row(pts.size(), 0.0);
    std::vector<double> row(pts.size(), 0.0);
    for (std::size_t a = 0; a < pts.size(); ++a) {
      raw[0] = pts[a];
      for (std::size_t b = 0; b < pts.size(); ++b) {
        raw[1] = pts[b];
        row[b] = eval();
        if (b > 0) {
          out.lipschitz = std::max(out.lipschitz, std::abs(row[b] - row[b - 1]) / (pts[b] - pts[b - 1]));
        }
        if (a > 0) {
          out.lipschitz = std::max(out.lipschitz, std::abs(row[b] - prev_row[b]) / (pts[a] - pts[a - 1]));
        }
      }
      std::swap(prev_row, row);
    }
  }

  BestResponseResult& r = out.best;
  r.feasible = have_feasible;
  r.bids = have_feasible ? best_bids : fallback_bids;
  r.objective = have_feasible ? best_obj : fallback_obj;
  r.iterations = out.evaluated;
  r.active.lower.resize(m);
  r.active.upper.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    eff[j] = view.effective_from_raw(r.bids[j]);
    r.active.lower[j] = eff[j] <= 0.0;
    r.active.upper[j] = mech.scheme == Scheme::modified && r.bids[j] >= mech.bid_cap;
  }
  const ConstraintReport c = view.constraints(eff);
  r.active.budget = c.budget_slack <= grid_step;
  r.active.ros = c.ros_slack <= grid_step;
  r.kkt_residual = std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace propauction
