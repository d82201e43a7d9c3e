#pragma once

// Condensed tracking MPC for the 12-state quadrotor.
//
// Prediction, for a horizon of N_p steps with N_c free input blocks
// (inputs held after block N_c - 1):
//
//   dX = A~ dx(0) + B~ dU + D~
//
// where dX stacks state errors for steps 1..N_p and dU stacks input
// deviations from the hover input. The linearized controller solves one QP
// per step; the nonlinear controller runs an SQP loop on the Euler rollout.

#include "lgvmpc/common.hpp"
#include "lgvmpc/lgv_guidance.hpp"
#include "lgvmpc/qp_solver.hpp"
#include "lgvmpc/quad_dynamics.hpp"

#include <optional>
#include <vector>

namespace lgvmpc::mpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct MpcConfig {
  int n_p = 20;
  int n_c = 10;
  VectorXd q_diag = default_q();
  VectorXd r_diag = VectorXd::Constant(kInputDim, 0.1);
  double angle_limit = 0.7853981633974483;  // pi/4
  double u_max = 12.0;

  static VectorXd default_q();
  void validate() const;
};

struct Prediction {
  MatrixXd a_tilde;  // (n N_p) x n
  MatrixXd b_tilde;  // (n N_p) x (m N_c)
  VectorXd d_tilde;  // n N_p
};

struct CondensedQp {
  MatrixXd h_mat;
  VectorXd h_vec;
  MatrixXd w_mat;
  VectorXd w_vec;
};

// Block index that drives prediction step i under hold-last blocking.
inline int input_block(int step, int n_c) { return step < n_c ? step : n_c - 1; }

// r(i+1|k) = A x_ref(i) + B u_ref + offset - x_ref(i+1) for i = 0..N_p-1.
std::vector<VectorXd> build_offsets(const dynamics::Linearization& lin, const std::vector<VectorXd>& ref_states,
                                    const VectorXd& u_ref);
std::vector<VectorXd> build_offsets(const dynamics::Linearization& lin, const guidance::ReferenceTrajectory& ref,
                                    const VectorXd& u_ref);

// Time-invariant prediction matrices from one linearization.
Prediction assemble_condensed(const dynamics::Linearization& lin, const std::vector<VectorXd>& offsets, int n_c);

// Time-varying variant: lins[i] propagates step i -> i+1.
Prediction assemble_condensed_ltv(const std::vector<dynamics::Linearization>& lins,
                                  const std::vector<VectorXd>& offsets, int n_c);

// Angle rows C~ B~ dU <= c~ - C~ A~ dx0 - C~ D~ (4 per step: +roll, -roll,
// +pitch, -pitch) followed by box rows dU <= (u_max - u_ref), -dU <= u_ref for
// every one of the N_c input blocks.
std::pair<MatrixXd, VectorXd> assemble_constraints(const Prediction& pred, const guidance::ReferenceTrajectory& ref,
                                                   const VectorXd& x0_err, const MpcConfig& cfg, double u_ref);

// H = B~' Q~ B~ + R~, h = B~' Q~ (A~ dx0 + D~).
CondensedQp assemble_qp(const Prediction& pred, const guidance::ReferenceTrajectory& ref, const VectorXd& x0_err,
                        const MpcConfig& cfg, double u_ref);

// Expand blocked inputs (m N_c) into a per-step sequence of length N_p.
std::vector<dynamics::ControlInput> expand_inputs(const VectorXd& blocked, int n_p, int n_c);

std::vector<StateVec> rollout(const StateVec& x0, const VectorXd& blocked, const MpcConfig& cfg,
                              const dynamics::QuadParams& params);

// Nonlinear tracking objective J on the Euler rollout; +inf when the
// rollout leaves the valid attitude range.
double nonlinear_cost(const StateVec& x0, const guidance::ReferenceTrajectory& ref, const VectorXd& blocked,
                      const MpcConfig& cfg, const dynamics::QuadParams& params);

struct MpcDiagnostics {
  qp::QpStatus qp_status = qp::QpStatus::kSolved;
  int qp_iterations = 0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double solve_time_s = 0.0;
  bool fallback = false;         // QP failed, clamped unconstrained minimizer used
  bool state_violation = false;  // an input-independent constraint row is violated
  int sqp_iterations = 0;
  bool no_descent = false;       // SQP stopped without cost decrease
  double cost = 0.0;             // nonlinear J of the returned sequence (NMPC)
};

struct ControlResult {
  dynamics::ControlInput u = dynamics::ControlInput::Zero();
  VectorXd blocked;  // absolute inputs, m N_c
  MpcDiagnostics diag;
};

class LmpcController {
 public:
  LmpcController(MpcConfig cfg, dynamics::QuadParams params, qp::QpOptions qp_opts = {});

  // Linearizes at (x, previous applied input), solves the condensed QP.
  ControlResult control(const StateVec& x, const guidance::ReferenceTrajectory& ref);

  void set_previous_input(const dynamics::ControlInput& u) { u_prev_ = u; }
  const dynamics::ControlInput& previous_input() const { return u_prev_; }
  void reset();

  const MpcConfig& config() const { return cfg_; }
  const dynamics::QuadParams& params() const { return params_; }

 private:
  MpcConfig cfg_;
  dynamics::QuadParams params_;
  qp::QpOptions qp_opts_;
  double u_ref_;
  dynamics::ControlInput u_prev_;
  std::optional<qp::WarmStart> warm_;
};

struct NmpcOptions {
  int max_iterations = 20;
  double step_tol = 1e-6;
  int max_backtracks = 12;
};

class NmpcController {
 public:
  NmpcController(MpcConfig cfg, dynamics::QuadParams params, qp::QpOptions qp_opts = {}, NmpcOptions opts = {});

  ControlResult control(const StateVec& x, const guidance::ReferenceTrajectory& ref);

  void set_previous_input(const dynamics::ControlInput& u) { lmpc_.set_previous_input(u); }
  void reset();

 private:
  MpcConfig cfg_;
  dynamics::QuadParams params_;
  qp::QpOptions qp_opts_;
  NmpcOptions opts_;
  double u_ref_;
  LmpcController lmpc_;
  VectorXd previous_;
};

}  // namespace lgvmpc::mpc
