#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "propauction/equilibrium.hpp"
#include "propauction/model.hpp"

namespace propauction {

/// D(step) = {k * step : 0 <= k <= 1/step}; 1/step must be an integer.
class AssignmentGrid {
 public:
  explicit AssignmentGrid(double step, double budget = 2e7);

  double step() const { return step_; }
  std::size_t divisions() const { return divisions_; }
  double fraction(std::size_t k) const { return static_cast<double>(k) / static_cast<double>(divisions_); }
  /// Largest number of evaluations an enumeration may perform.
  double budget() const { return budget_; }

 private:
  double step_;
  std::size_t divisions_;
  double budget_;
};

struct WelfareSolverParams {
  double gap_tol = 1e-10;  // barrier duality gap, relative to max(1, value)
  std::size_t max_newton = 200;
};

struct WelfareOptimum {
  double value = 0.0;
  AllocationMatrix allocation;
  bool converged = true;
  std::string diagnostic;
};

/// Interior-point maximum of sum_i min{W_i, v_i(d_i)} over per-item simplices.
WelfareOptimum optimal_lw_concave(const Instance& instance, const WelfareSolverParams& params = {});

/// Number of joint assignments the grid enumeration visits.
double grid_assignment_count(std::size_t agents, std::size_t items, const AssignmentGrid& grid);

/// Exact maximum over grid assignments whose per-item shares sum to one.
WelfareOptimum optimal_lw_grid(const Instance& instance, const AssignmentGrid& grid);

enum class CertificateTag { standard_pm, power_pm };
std::string_view to_string(CertificateTag tag);
CertificateTag certificate_tag_from_string(std::string_view name);

struct DualCertificate {
  std::vector<double> alpha;  // per item
  std::vector<double> beta;   // per agent
  double objective = 0.0;
  CertificateTag tag = CertificateTag::standard_pm;
};

DualCertificate build_dual_standard(const Instance& instance, const EquilibriumResult& eq);
DualCertificate build_dual_power(const Instance& instance, const EquilibriumResult& eq);

struct GridPoint {
  Index agent;
  Index item;
  double fraction;
};

struct FeasibilityReport {
  double min_slack = 0.0;
  std::vector<GridPoint> worst;  // the minimizing assignment as (agent, item, fraction) triples
  bool feasible = true;
};

/// min over agents and d in D(step)^m of sum_j d_j alpha_j + beta_i - min{W_i, v_i(d)}.
FeasibilityReport check_dual_feasibility(const DualCertificate& cert, const Instance& instance,
                                         const AssignmentGrid& grid);

/// dual objective - optimal grid welfare; nonnegative for any feasible certificate.
double joint_duality_gap(const DualCertificate& cert, const Instance& instance,
                         const AssignmentGrid& grid);

struct PoaReport {
  double lw_eq = 0.0;
  double opt_concave = 0.0;
  double opt_grid = 0.0;
  double opt = 0.0;
  double dual_obj = 0.0;
  double ratio = 1.0;
  double certified_ratio = 1.0;
  bool undefined_ratio = false;  // lw_eq = 0 with opt > 0
  bool solvers_disagree = false;  // grid optimum above the concave optimum beyond tolerance
  FeasibilityReport feasibility;
};

PoaReport poa_report(const Instance& instance, const EquilibriumResult& eq,
                     const DualCertificate& cert, const AssignmentGrid& grid);

}  // namespace propauction
