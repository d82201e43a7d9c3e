#pragma once

// Lyapunov guidance vector field for standoff tracking, the reference
// trajectory planner built on it, and the integral module that shifts the
// commanded radius to cancel a steady range bias.

#include "lgvmpc/common.hpp"

#include <vector>

namespace lgvmpc::guidance {

enum class Direction { kCounterClockwise, kClockwise };

struct TrackingPattern {
  double r_d = 2.0;
  double z_d = 5.0;
  double v_d = 1.0;
  double v_z = 1.0;
  int beta = 3;
  Direction direction = Direction::kCounterClockwise;

  void validate() const;
};

struct TargetState {
  Vec3 p_o = Vec3::Zero();
  Vec3 v_o = Vec3::Zero();
};

struct ReferenceTrajectory {
  // states[i] = [p_ref(i|k); 0; v_ref(i|k); 0], i = 0..N_p.
  std::vector<StateVec> states;

  int horizon() const { return static_cast<int>(states.size()) - 1; }
};

// 0 < c2 < c1 < 2 c2 and |sigma| <= sigma_clamp.
struct ImState {
  double sigma = 0.0;
  double c1 = 0.2;
  double c2 = 0.2 / 1.1;
  double sigma_clamp = 5.0;

  // Clamp chosen so that |c1 * sigma| <= 0.5 r_d.
  static ImState with_defaults(double r_d, double c1 = 0.2, double c2 = 0.2 / 1.1);
  void validate() const;
};

struct ImUpdate {
  ImState state;
  double r_d_eff;
};

// Planner faults when the predicted horizontal range drops below this.
inline constexpr double kMinRange = 1e-9;

double scalar_field(double x, double y);

Eigen::Vector2d unit_gradient(double x, double y);

Eigen::Vector2d lgv_velocity(const Eigen::Vector2d& rel, const TrackingPattern& pat, double r_d_eff);

struct RadialTangential {
  double r_dot;
  double r_phi_dot;
};

RadialTangential radial_tangential(double r, const TrackingPattern& pat);

ReferenceTrajectory plan_trajectory(const Vec3& xi, const TargetState& tgt, const TrackingPattern& pat,
                                    double r_d_eff, int horizon, double tau);

double sat(double x);

ImUpdate im_update(const ImState& im, double r_meas, double r_d);

}  // namespace lgvmpc::guidance
