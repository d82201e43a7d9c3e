#pragma once

// Quadrotor Newton-Euler model with ZYX Euler angles, explicit Euler
// discretization and finite-difference linearization.
//
// Frame convention: inertial z points up, so gravity is (0, 0, -g). The body
// thrust acts along +z_body.

#include "lgvmpc/common.hpp"

namespace lgvmpc::dynamics {

// Defaults follow the MathWorks nonlinear-MPC quadrotor model (hover input
// 4.905 of an upper bound of 12).
struct QuadParams {
  double mass = 2.0;
  Vec3 gravity{0.0, 0.0, -9.81};
  double arm_length = 0.25;
  double thrust_coeff = 1.0;  // N per input unit
  double drag_coeff = 0.2;    // yaw torque, N*m per input unit
  Vec3 inertia{1.2, 1.2, 2.3};
  Vec3 linear_drag{0.25, 0.25, 0.25};
  double u_max = 12.0;
  double tau = 0.1;

  // Throws Fault(kConfig) or Fault(kInfeasibleHover).
  void validate() const;
};

struct UavState {
  Vec3 xi = Vec3::Zero();
  Vec3 eta = Vec3::Zero();
  Vec3 xi_dot = Vec3::Zero();
  Vec3 eta_dot = Vec3::Zero();

  StateVec to_vector() const;
  static UavState from_vector(const StateVec& v);
};

using ControlInput = Vec4;

// x+ ~= a_mat * x + b_mat * u + offset. With offset zero this is the plain
// linear form x+ = A x + B u.
struct Linearization {
  Eigen::MatrixXd a_mat;
  Eigen::MatrixXd b_mat;
  Eigen::VectorXd offset;
};

struct ThrustTorque {
  Vec3 thrust;
  Vec3 torque;
};

ThrustTorque thrust_torque(const ControlInput& u, const QuadParams& p);

// Body-to-inertial rotation, ZYX (yaw-pitch-roll).
Mat3 rotation(const Vec3& eta);

// Euler-angle inertia matrix J(eta) = W^T I W.
Mat3 euler_inertia(const Vec3& eta, const QuadParams& p);

// Coriolis matrix C(eta, eta_dot) of the Euler-Lagrange attitude model.
Mat3 coriolis(const Vec3& eta, const Vec3& eta_dot, const QuadParams& p);

// Returns false when |roll| or |pitch| has reached pi/2 or the vector is not
// finite.
bool attitude_valid(const StateVec& x);

StateVec continuous_dynamics(const StateVec& x, const ControlInput& u, const QuadParams& p);

StateVec step_euler(const StateVec& x, const ControlInput& u, const QuadParams& p);

Linearization linearize(const StateVec& x, const ControlInput& u, const QuadParams& p);

double hover_level(const QuadParams& p);
ControlInput hover_input(const QuadParams& p);

// 4x4 map from rotor commands to (total thrust, roll, pitch, yaw torque).
Eigen::Matrix4d mixer_matrix(const QuadParams& p);

}  // namespace lgvmpc::dynamics
