#pragma once

// One-step feasible input set {u in [0, u_max]^4 : C (A x + B u + o) <= c}
// where C picks +roll, -roll, +pitch, -pitch of the predicted state, and
// alternating halfspace projection onto it.

#include "lgvmpc/common.hpp"
#include "lgvmpc/quad_dynamics.hpp"

#include <vector>

namespace lgvmpc::projection {

struct Halfspace {
  Vec4 a = Vec4::Zero();
  double b = 0.0;
};

struct FeasibleSet {
  std::vector<Halfspace> halfspaces;  // rows with a != 0, fixed order
  double u_max = 12.0;
  int dropped_rows = 0;               // input-independent rows removed
  bool preview_infeasible = false;    // a dropped row was already violated
};

// Rows whose |a|^2 is at or below this are treated as input independent.
inline constexpr double kZeroRowTol = 1e-24;

FeasibleSet build_feasible_set(const dynamics::Linearization& lin, const StateVec& x, double angle_limit,
                               double u_max);

// Closed-form Euclidean projection onto {v : a.v <= b}; identity if u is
// already inside. Requires |a| > 0.
Vec4 project_halfspace(const Vec4& u, const Vec4& a, double b);

Vec4 clamp_box(const Vec4& u, double u_max);

// Largest violation over the box and every halfspace; 0 when feasible.
double max_violation(const FeasibleSet& fs, const Vec4& u);

struct ProjectionResult {
  Vec4 u = Vec4::Zero();
  std::vector<double> residuals;  // max_violation after each sweep
  double max_violation = 0.0;
  bool flagged = false;           // residual above kResidualFlag, or preview infeasible
};

inline constexpr double kResidualFlag = 1e-3;

// Each sweep clamps to the box, then projects through the halfspaces in
// order.
ProjectionResult project_policy_output(const Vec4& u_hat, const FeasibleSet& fs, int sweeps = 3);

}  // namespace lgvmpc::projection
