#include "lgvmpc/quad_dynamics.hpp"

#include <cmath>
#include <numbers>

namespace lgvmpc {

const char* to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::kConfig: return "config error";
    case FaultKind::kSingularAttitude: return "singular attitude";
    case FaultKind::kInfeasibleHover: return "infeasible hover";
    case FaultKind::kNonFinite: return "non-finite value";
    case FaultKind::kUndefinedGradient: return "undefined gradient";
    case FaultKind::kDimension: return "dimension mismatch";
    case FaultKind::kParse: return "parse error";
  }
  return "fault";
}

}  // namespace lgvmpc

namespace lgvmpc::dynamics {

void QuadParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Fault(FaultKind::kConfig, std::string(name) + " must be finite and > 0");
    }
  };
  positive(mass, "mass");
  positive(arm_length, "arm_length");
  positive(thrust_coeff, "thrust_coeff");
  positive(drag_coeff, "drag_coeff");
  for (int i = 0; i < 3; ++i) {
    positive(inertia[i], "inertia");
    positive(linear_drag[i], "linear_drag");
  }
  positive(u_max, "u_max");
  positive(tau, "tau");
  if (!(gravity[2] < 0.0) || gravity[0] != 0.0 || gravity[1] != 0.0) {
    throw Fault(FaultKind::kConfig, "gravity must be (0, 0, -g) with g > 0");
  }
  if (hover_level(*this) >= u_max) {
    throw Fault(FaultKind::kInfeasibleHover, "hover input m*g/(4*l_c) is not below u_max");
  }
}

StateVec UavState::to_vector() const {
  StateVec v;
  v << xi, eta, xi_dot, eta_dot;
  return v;
}

UavState UavState::from_vector(const StateVec& v) {
  UavState s;
  s.xi = v.segment<3>(idx::kPos);
  s.eta = v.segment<3>(idx::kAngle);
  s.xi_dot = v.segment<3>(idx::kVel);
  s.eta_dot = v.segment<3>(idx::kRate);
  return s;
}

ThrustTorque thrust_torque(const ControlInput& u, const QuadParams& p) {
  const double ll = p.arm_length * p.thrust_coeff;
  ThrustTorque out;
  out.thrust = Vec3(0.0, 0.0, p.thrust_coeff * u.sum());
  out.torque = Vec3(ll * (-u[1] + u[3]), ll * (-u[0] + u[2]),
                    p.drag_coeff * (-u[0] + u[1] - u[2] + u[3]));
  return out;
}

Mat3 rotation(const Vec3& eta) {
  const double cf = std::cos(eta[0]), sf = std::sin(eta[0]);
  const double ct = std::cos(eta[1]), st = std::sin(eta[1]);
  const double cp = std::cos(eta[2]), sp = std::sin(eta[2]);
  Mat3 r;
  r << cp * ct, cp * st * sf - sp * cf, cp * st * cf + sp * sf,
      sp * ct, sp * st * sf + cp * cf, sp * st * cf - cp * sf,
      -st, ct * sf, ct * cf;
  return r;
}

Mat3 euler_inertia(const Vec3& eta, const QuadParams& p) {
  const double cf = std::cos(eta[0]), sf = std::sin(eta[0]);
  const double ct = std::cos(eta[1]), st = std::sin(eta[1]);
  // Maps Euler rates to body rates.
  Mat3 w;
  w << 1.0, 0.0, -st,
      0.0, cf, ct * sf,
      0.0, -sf, ct * cf;
  return w.transpose() * p.inertia.asDiagonal() * w;
}

Mat3 coriolis(const Vec3& eta, const Vec3& eta_dot, const QuadParams& p) {
  const double ixx = p.inertia[0], iyy = p.inertia[1], izz = p.inertia[2];
  const double cf = std::cos(eta[0]), sf = std::sin(eta[0]);
  const double ct = std::cos(eta[1]), st = std::sin(eta[1]);
  const double df = eta_dot[0], dt = eta_dot[1], dp = eta_dot[2];
  const double sf2 = sf * sf, cf2 = cf * cf, ct2 = ct * ct;

  Mat3 c;
  c(0, 0) = 0.0;
  c(0, 1) = (iyy - izz) * (dt * cf * sf + dp * sf2 * ct) + (izz - iyy) * dp * cf2 * ct - ixx * dp * ct;
  c(0, 2) = (izz - iyy) * dp * cf * sf * ct2;
  c(1, 0) = (izz - iyy) * (dt * cf * sf + dp * sf2 * ct) + (iyy - izz) * dp * cf2 * ct + ixx * dp * ct;
  c(1, 1) = (izz - iyy) * df * cf * sf;
  c(1, 2) = -ixx * dp * st * ct + iyy * dp * sf2 * st * ct + izz * dp * cf2 * st * ct;
  c(2, 0) = (iyy - izz) * dp * ct2 * sf * cf - ixx * dt * ct;
  c(2, 1) = (izz - iyy) * (dt * cf * sf * st + df * sf2 * ct) + (iyy - izz) * df * cf2 * ct +
            ixx * dp * st * ct - iyy * dp * sf2 * st * ct - izz * dp * cf2 * st * ct;
  c(2, 2) = (iyy - izz) * df * cf * sf * ct2 - iyy * dt * sf2 * ct * st - izz * dt * cf2 * ct * st +
            ixx * dt * ct * st;
  return c;
}

bool attitude_valid(const StateVec& x) {
  constexpr double kHalfPi = std::numbers::pi / 2.0;
  return x.allFinite() && std::abs(x[idx::kRoll]) < kHalfPi && std::abs(x[idx::kPitch]) < kHalfPi;
}

StateVec continuous_dynamics(const StateVec& x, const ControlInput& u, const QuadParams& p) {
  if (!attitude_valid(x)) {
    throw Fault(FaultKind::kSingularAttitude, "roll/pitch outside (-pi/2, pi/2) or non-finite state");
  }
  const Vec3 eta = x.segment<3>(idx::kAngle);
  const Vec3 xi_dot = x.segment<3>(idx::kVel);
  const Vec3 eta_dot = x.segment<3>(idx::kRate);
  const ThrustTorque tt = thrust_torque(u, p);

  StateVec dx;
  dx.segment<3>(idx::kPos) = xi_dot;
  dx.segment<3>(idx::kAngle) = eta_dot;
  dx.segment<3>(idx::kVel) =
      p.gravity + (rotation(eta) * tt.thrust - p.linear_drag.cwiseProduct(xi_dot)) / p.mass;

  const Mat3 j = euler_inertia(eta, p);
  const Vec3 rhs = tt.torque - coriolis(eta, eta_dot, p) * eta_dot;
  dx.segment<3>(idx::kRate) = j.ldlt().solve(rhs);
  return dx;
}

StateVec step_euler(const StateVec& x, const ControlInput& u, const QuadParams& p) {
  return x + p.tau * continuous_dynamics(x, u, p);
}

namespace {

double fd_step(double value) { return 1e-6 * std::max(1.0, std::abs(value)); }

}  // namespace

Linearization linearize(const StateVec& x, const ControlInput& u, const QuadParams& p) {
  Eigen::Matrix<double, kStateDim, kStateDim> fx;
  Eigen::Matrix<double, kStateDim, kInputDim> fu;
  for (int j = 0; j < kStateDim; ++j) {
    const double h = fd_step(x[j]);
    StateVec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    fx.col(j) = (continuous_dynamics(xp, u, p) - continuous_dynamics(xm, u, p)) / (2.0 * h);
  }
  for (int j = 0; j < kInputDim; ++j) {
    const double h = fd_step(u[j]);
    ControlInput up = u, um = u;
    up[j] += h;
    um[j] -= h;
    fu.col(j) = (continuous_dynamics(x, up, p) - continuous_dynamics(x, um, p)) / (2.0 * h);
  }
  if (!fx.allFinite() || !fu.allFinite()) {
    throw Fault(FaultKind::kNonFinite, "Jacobian has non-finite entries");
  }
  Linearization lin;
  lin.a_mat = Eigen::MatrixXd::Identity(kStateDim, kStateDim) + p.tau * fx;
  lin.b_mat = p.tau * fu;
  lin.offset = step_euler(x, u, p) - lin.a_mat * x - lin.b_mat * u;
  return lin;
}

double hover_level(const QuadParams& p) { return -p.mass * p.gravity[2] / (4.0 * p.thrust_coeff); }

ControlInput hover_input(const QuadParams& p) {
  const double level = hover_level(p);
  if (!(p.thrust_coeff > 0.0) || level >= p.u_max || level <= 0.0) {
    throw Fault(FaultKind::kInfeasibleHover, "hover input must lie strictly inside (0, u_max)");
  }
  return ControlInput::Constant(level);
}

Eigen::Matrix4d mixer_matrix(const QuadParams& p) {
  const double lc = p.thrust_coeff, ll = p.arm_length * p.thrust_coeff, dc = p.drag_coeff;
  Eigen::Matrix4d m;
  m << lc, lc, lc, lc,
      0.0, -ll, 0.0, ll,
      -ll, 0.0, ll, 0.0,
      -dc, dc, -dc, dc;
  return m;
}

}  // namespace lgvmpc::dynamics
