#pragma once

namespace propauction::tol {

inline constexpr double kFeasibility = 1e-9;
inline constexpr double kEquality = 1e-12;
inline constexpr double kGradientCheck = 1e-6;
inline constexpr double kDualFeasibility = 1e-8;

}  // namespace propauction::tol
