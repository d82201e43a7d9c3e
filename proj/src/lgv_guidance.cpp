#include "lgvmpc/lgv_guidance.hpp"

#include <algorithm>
#include <cmath>

namespace lgvmpc::guidance {

void TrackingPattern::validate() const {
  if (!(r_d > 0.0) || !(v_d > 0.0) || !(v_z > 0.0) || beta < 1) {
    throw Fault(FaultKind::kConfig, "tracking pattern needs r_d > 0, v_d > 0, v_z > 0, beta >= 1");
  }
  if (!std::isfinite(z_d)) throw Fault(FaultKind::kConfig, "z_d must be finite");
}

ImState ImState::with_defaults(double r_d, double c1, double c2) {
  ImState im;
  im.c1 = c1;
  im.c2 = c2;
  im.sigma_clamp = 0.5 * r_d / c1;
  im.validate();
  return im;
}

void ImState::validate() const {
  if (!(0.0 < c2 && c2 < c1 && c1 < 2.0 * c2)) {
    throw Fault(FaultKind::kConfig, "integral module gains need 0 < c2 < c1 < 2*c2");
  }
  if (!(sigma_clamp > 0.0) || std::abs(sigma) > sigma_clamp) {
    throw Fault(FaultKind::kConfig, "integral module accumulator outside its clamp");
  }
}

double scalar_field(double x, double y) { return x * x + y * y; }

Eigen::Vector2d unit_gradient(double x, double y) {
  const double r = std::hypot(x, y);
  if (!(r > 0.0)) throw Fault(FaultKind::kUndefinedGradient, "gradient direction undefined at the origin");
  return {x / r, y / r};
}

namespace {

// With rho = (r_d / r)^beta:
//   radial = (r^b - r_d^b) / (r^b + r_d^b) = (1 - rho) / (1 + rho)
//   tangential = 2 sqrt(r^b r_d^b) / (r^b + r_d^b) = 2 sqrt(rho) / (1 + rho)
// evaluated through t = log(rho) so large beta cannot overflow.
struct FieldShape {
  double radial;
  double tangential;
};

FieldShape field_shape(double r, double r_d, int beta) {
  const double half_t = 0.5 * beta * std::log(r_d / r);
  return {-std::tanh(half_t), 1.0 / std::cosh(half_t)};
}

}  // namespace

Eigen::Vector2d lgv_velocity(const Eigen::Vector2d& rel, const TrackingPattern& pat, double r_d_eff) {
  const double r = rel.norm();
  if (!(r > 0.0)) throw Fault(FaultKind::kUndefinedGradient, "guidance field undefined at zero range");
  if (!(r_d_eff > 0.0)) throw Fault(FaultKind::kConfig, "effective standoff radius must be positive");
  const FieldShape s = field_shape(r, r_d_eff, pat.beta);
  const double x = rel[0], y = rel[1];
  const double k = -pat.v_d / r;
  if (pat.direction == Direction::kCounterClockwise) {
    return {k * (x * s.radial + y * s.tangential), k * (y * s.radial - x * s.tangential)};
  }
  return {k * (x * s.radial - y * s.tangential), k * (y * s.radial + x * s.tangential)};
}

RadialTangential radial_tangential(double r, const TrackingPattern& pat) {
  if (!(r > 0.0)) throw Fault(FaultKind::kUndefinedGradient, "range must be positive");
  const FieldShape s = field_shape(r, pat.r_d, pat.beta);
  const double sign = pat.direction == Direction::kCounterClockwise ? 1.0 : -1.0;
  return {-pat.v_d * s.radial, sign * pat.v_d * s.tangential};
}

ReferenceTrajectory plan_trajectory(const Vec3& xi, const TargetState& tgt, const TrackingPattern& pat,
                                    double r_d_eff, int horizon, double tau) {
  if (horizon < 1) throw Fault(FaultKind::kConfig, "planning horizon must be >= 1");
  ReferenceTrajectory ref;
  ref.states.reserve(static_cast<std::size_t>(horizon) + 1);

  Vec3 p_ref = xi;
  Vec3 p_tgt = tgt.p_o;
  for (int i = -1; i < horizon; ++i) {
    const Vec3 rel = p_ref - p_tgt;
    const double r = std::hypot(rel[0], rel[1]);
    if (r < kMinRange) {
      throw Fault(FaultKind::kUndefinedGradient, "planned trajectory reached zero horizontal range");
    }
    const Eigen::Vector2d v_l = lgv_velocity(rel.head<2>(), pat, r_d_eff);
    const Vec3 v_ref = Vec3(v_l[0], v_l[1], pat.v_z * std::tanh(pat.z_d - rel[2])) + tgt.v_o;
    p_ref += tau * v_ref;
    p_tgt += tau * tgt.v_o;

    StateVec x = StateVec::Zero();
    x.segment<3>(idx::kPos) = p_ref;
    x.segment<3>(idx::kVel) = v_ref;
    ref.states.push_back(x);
  }
  return ref;
}

double sat(double x) { return std::clamp(x, -1.0, 1.0); }

ImUpdate im_update(const ImState& im, double r_meas, double r_d) {
  ImUpdate out{im, r_d};
  out.state.sigma =
      std::clamp(im.sigma + sat((r_meas - r_d) / im.c2), -im.sigma_clamp, im.sigma_clamp);
  out.r_d_eff = r_d - im.c1 * out.state.sigma;
  return out;
}

}  // namespace lgvmpc::guidance
