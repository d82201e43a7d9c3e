#include "lgvmpc/mpc_core.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

namespace lgvmpc::mpc {

using dynamics::ControlInput;
using dynamics::Linearization;
using guidance::ReferenceTrajectory;

VectorXd MpcConfig::default_q() {
  VectorXd q = VectorXd::Ones(kStateDim);
  q.tail<3>().setZero();
  return q;
}

void MpcConfig::validate() const {
  if (n_p < 1 || n_c < 1 || n_c > n_p) throw Fault(FaultKind::kConfig, "horizons need 1 <= n_c <= n_p");
  if (q_diag.size() != kStateDim || (q_diag.array() < 0.0).any()) {
    throw Fault(FaultKind::kConfig, "q_diag needs 12 nonnegative entries");
  }
  if (r_diag.size() != kInputDim || (r_diag.array() <= 0.0).any()) {
    throw Fault(FaultKind::kConfig, "r_diag needs 4 positive entries");
  }
  if (!(angle_limit > 0.0 && angle_limit < std::numbers::pi / 2.0)) {
    throw Fault(FaultKind::kConfig, "angle_limit must lie in (0, pi/2)");
  }
  if (!(u_max > 0.0)) throw Fault(FaultKind::kConfig, "u_max must be positive");
}

std::vector<VectorXd> build_offsets(const Linearization& lin, const std::vector<VectorXd>& ref_states,
                                    const VectorXd& u_ref) {
  const auto n = lin.a_mat.rows();
  if (ref_states.size() < 2 || lin.a_mat.cols() != n || lin.b_mat.rows() != n || lin.b_mat.cols() != u_ref.size()) {
    throw Fault(FaultKind::kDimension, "offsets need N_p + 1 >= 2 reference states and consistent Jacobians");
  }
  const VectorXd affine = lin.offset.size() == n ? lin.offset : VectorXd::Zero(n);
  const VectorXd input_term = lin.b_mat * u_ref + affine;
  std::vector<VectorXd> out;
  out.reserve(ref_states.size() - 1);
  for (std::size_t i = 0; i + 1 < ref_states.size(); ++i) {
    if (ref_states[i].size() != n || ref_states[i + 1].size() != n) {
      throw Fault(FaultKind::kDimension, "reference state dimension does not match the model");
    }
    out.push_back(lin.a_mat * ref_states[i] + input_term - ref_states[i + 1]);
  }
  return out;
}

std::vector<VectorXd> build_offsets(const Linearization& lin, const ReferenceTrajectory& ref, const VectorXd& u_ref) {
  std::vector<VectorXd> states(ref.states.begin(), ref.states.end());
  return build_offsets(lin, states, u_ref);
}

Prediction assemble_condensed_ltv(const std::vector<Linearization>& lins, const std::vector<VectorXd>& offsets,
                                  int n_c) {
  const int n_p = static_cast<int>(lins.size());
  if (n_p < 1 || static_cast<int>(offsets.size()) != n_p || n_c < 1 || n_c > n_p) {
    throw Fault(FaultKind::kDimension, "prediction needs N_p linearizations/offsets and 1 <= N_c <= N_p");
  }
  const auto n = lins[0].a_mat.rows();
  const auto m = lins[0].b_mat.cols();
  Prediction pred;
  pred.a_tilde.resize(n * n_p, n);
  pred.b_tilde = MatrixXd::Zero(n * n_p, m * n_c);
  pred.d_tilde.resize(n * n_p);

  MatrixXd phi = MatrixXd::Identity(n, n);
  MatrixXd brow = MatrixXd::Zero(n, m * n_c);
  VectorXd d = VectorXd::Zero(n);
  for (int i = 0; i < n_p; ++i) {
    const Linearization& lin = lins[static_cast<std::size_t>(i)];
    if (lin.a_mat.rows() != n || lin.a_mat.cols() != n || lin.b_mat.rows() != n || lin.b_mat.cols() != m ||
        offsets[static_cast<std::size_t>(i)].size() != n) {
      throw Fault(FaultKind::kDimension, "inconsistent linearization sequence");
    }
    phi = lin.a_mat * phi;
    brow = lin.a_mat * brow;
    brow.middleCols(m * input_block(i, n_c), m) += lin.b_mat;
    d = lin.a_mat * d + offsets[static_cast<std::size_t>(i)];
    pred.a_tilde.middleRows(n * i, n) = phi;
    pred.b_tilde.middleRows(n * i, n) = brow;
    pred.d_tilde.segment(n * i, n) = d;
  }
  return pred;
}

Prediction assemble_condensed(const Linearization& lin, const std::vector<VectorXd>& offsets, int n_c) {
  return assemble_condensed_ltv(std::vector<Linearization>(offsets.size(), lin), offsets, n_c);
}

namespace {

constexpr int kAngleRowsPerStep = 4;

// Angle rows on a predicted trajectory `base + b_tilde * d` followed by the
// per-block box lower <= d <= upper.
std::pair<MatrixXd, VectorXd> stack_constraints(const MatrixXd& b_tilde, const VectorXd& base, double limit,
                                                const VectorXd& lower, const VectorXd& upper) {
  const auto steps = b_tilde.rows() / kStateDim;
  const auto nu = b_tilde.cols();
  const auto rows = kAngleRowsPerStep * steps + 2 * nu;
  MatrixXd w_mat = MatrixXd::Zero(rows, nu);
  VectorXd w_vec(rows);
  for (Eigen::Index i = 0; i < steps; ++i) {
    const auto r = kAngleRowsPerStep * i;
    for (int a = 0; a < 2; ++a) {
      const auto state_row = kStateDim * i + idx::kRoll + a;
      w_mat.row(r + 2 * a) = b_tilde.row(state_row);
      w_vec[r + 2 * a] = limit - base[state_row];
      w_mat.row(r + 2 * a + 1) = -b_tilde.row(state_row);
      w_vec[r + 2 * a + 1] = limit + base[state_row];
    }
  }
  const auto off = kAngleRowsPerStep * steps;
  w_mat.block(off, 0, nu, nu).setIdentity();
  w_vec.segment(off, nu) = upper;
  w_mat.block(off + nu, 0, nu, nu) = -MatrixXd::Identity(nu, nu);
  w_vec.segment(off + nu, nu) = -lower;
  return {std::move(w_mat), std::move(w_vec)};
}

VectorXd stacked_reference(const ReferenceTrajectory& ref) {
  const int n_p = ref.horizon();
  VectorXd out(kStateDim * n_p);
  for (int i = 0; i < n_p; ++i) out.segment<kStateDim>(kStateDim * i) = ref.states[static_cast<std::size_t>(i) + 1];
  return out;
}

VectorXd tiled(const VectorXd& v, int count) {
  VectorXd out(v.size() * count);
  for (int i = 0; i < count; ++i) out.segment(v.size() * i, v.size()) = v;
  return out;
}

// Drops rows that do not depend on the decision variable. Returns true if one
// of them is violated.
bool prune_constant_rows(MatrixXd& w_mat, VectorXd& w_vec) {
  constexpr double kZeroRow = 1e-12;
  bool violated = false;
  Eigen::Index keep = 0;
  for (Eigen::Index i = 0; i < w_mat.rows(); ++i) {
    if (w_mat.row(i).lpNorm<Eigen::Infinity>() <= kZeroRow) {
      violated = violated || w_vec[i] < 0.0;
      continue;
    }
    if (keep != i) {
      w_mat.row(keep) = w_mat.row(i);
      w_vec[keep] = w_vec[i];
    }
    ++keep;
  }
  w_mat.conservativeResize(keep, Eigen::NoChange);
  w_vec.conservativeResize(keep);
  return violated;
}

struct BoxedSolve {
  VectorXd x;
  qp::QpSolution sol;
  bool fallback = false;
};

BoxedSolve solve_boxed(const CondensedQp& qp_data, const VectorXd& lower, const VectorXd& upper,
                       const qp::QpOptions& opts, const std::optional<qp::WarmStart>& warm) {
  BoxedSolve out;
  out.sol = qp::solve(qp_data.h_mat, qp_data.h_vec, qp_data.w_mat, qp_data.w_vec, opts, warm);
  if (out.sol.status == qp::QpStatus::kInfeasible || !out.sol.x_star.allFinite()) {
    out.fallback = true;
    out.x = qp_data.h_mat.llt().solve(-qp_data.h_vec);
  } else {
    out.x = out.sol.x_star;
  }
  out.x = out.x.cwiseMax(lower).cwiseMin(upper);
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::pair<MatrixXd, VectorXd> assemble_constraints(const Prediction& pred, const ReferenceTrajectory& ref,
                                                   const VectorXd& x0_err, const MpcConfig& cfg, double u_ref) {
  if (pred.b_tilde.rows() != kStateDim * ref.horizon() || x0_err.size() != kStateDim) {
    throw Fault(FaultKind::kDimension, "constraint assembly needs a 12-state prediction matching the reference");
  }
  const VectorXd base = stacked_reference(ref) + pred.a_tilde * x0_err + pred.d_tilde;
  const auto nu = pred.b_tilde.cols();
  return stack_constraints(pred.b_tilde, base, cfg.angle_limit, VectorXd::Constant(nu, -u_ref),
                           VectorXd::Constant(nu, cfg.u_max - u_ref));
}

CondensedQp assemble_qp(const Prediction& pred, const ReferenceTrajectory& ref, const VectorXd& x0_err,
                        const MpcConfig& cfg, double u_ref) {
  CondensedQp out;
  const VectorXd q_tilde = tiled(cfg.q_diag, ref.horizon());
  const VectorXd r_tilde = tiled(cfg.r_diag, cfg.n_c);
  const MatrixXd qb = q_tilde.asDiagonal() * pred.b_tilde;
  out.h_mat = pred.b_tilde.transpose() * qb;
  out.h_mat.diagonal() += r_tilde;
  out.h_mat = 0.5 * (out.h_mat + out.h_mat.transpose());
  out.h_vec = qb.transpose() * (pred.a_tilde * x0_err + pred.d_tilde);
  std::tie(out.w_mat, out.w_vec) = assemble_constraints(pred, ref, x0_err, cfg, u_ref);
  return out;
}

std::vector<ControlInput> expand_inputs(const VectorXd& blocked, int n_p, int n_c) {
  if (blocked.size() != kInputDim * n_c) throw Fault(FaultKind::kDimension, "blocked input size must be 4 * N_c");
  std::vector<ControlInput> seq;
  seq.reserve(static_cast<std::size_t>(n_p));
  for (int i = 0; i < n_p; ++i) seq.push_back(blocked.segment<kInputDim>(kInputDim * input_block(i, n_c)));
  return seq;
}

std::vector<StateVec> rollout(const StateVec& x0, const VectorXd& blocked, const MpcConfig& cfg,
                              const dynamics::QuadParams& params) {
  const auto inputs = expand_inputs(blocked, cfg.n_p, cfg.n_c);
  std::vector<StateVec> xs;
  xs.reserve(inputs.size() + 1);
  xs.push_back(x0);
  for (const auto& u : inputs) xs.push_back(dynamics::step_euler(xs.back(), u, params));
  return xs;
}

double nonlinear_cost(const StateVec& x0, const ReferenceTrajectory& ref, const VectorXd& blocked,
                      const MpcConfig& cfg, const dynamics::QuadParams& params) {
  if (ref.horizon() != cfg.n_p) throw Fault(FaultKind::kDimension, "reference horizon must equal n_p");
  std::vector<StateVec> xs;
  try {
    xs = rollout(x0, blocked, cfg, params);
  } catch (const Fault&) {
    return std::numeric_limits<double>::infinity();
  }
  const double u_ref = dynamics::hover_level(params);
  double j = 0.0;
  for (int i = 0; i <= cfg.n_p; ++i) {
    const StateVec e = xs[static_cast<std::size_t>(i)] - ref.states[static_cast<std::size_t>(i)];
    j += e.dot(cfg.q_diag.cwiseProduct(e));
  }
  for (int i = 0; i < cfg.n_p; ++i) {
    const Vec4 du = blocked.segment<kInputDim>(kInputDim * input_block(i, cfg.n_c)).array() - u_ref;
    j += du.dot(cfg.r_diag.cwiseProduct(du));
  }
  return std::isfinite(j) ? 0.5 * j : std::numeric_limits<double>::infinity();
}

LmpcController::LmpcController(MpcConfig cfg, dynamics::QuadParams params, qp::QpOptions qp_opts)
    : cfg_(std::move(cfg)), params_(params), qp_opts_(qp_opts) {
  cfg_.validate();
  params_.validate();
  u_ref_ = dynamics::hover_level(params_);
  u_prev_ = dynamics::hover_input(params_);
}

void LmpcController::reset() {
  u_prev_ = dynamics::hover_input(params_);
  warm_.reset();
}

ControlResult LmpcController::control(const StateVec& x, const ReferenceTrajectory& ref) {
  const auto t0 = std::chrono::steady_clock::now();
  if (ref.horizon() != cfg_.n_p) throw Fault(FaultKind::kDimension, "reference horizon must equal n_p");

  const Linearization lin = dynamics::linearize(x, u_prev_, params_);
  const VectorXd u_ref_vec = VectorXd::Constant(kInputDim, u_ref_);
  const Prediction pred = assemble_condensed(lin, build_offsets(lin, ref, u_ref_vec), cfg_.n_c);
  const VectorXd x0_err = x - ref.states.front();
  CondensedQp qp_data = assemble_qp(pred, ref, x0_err, cfg_, u_ref_);

  ControlResult res;
  res.diag.state_violation = prune_constant_rows(qp_data.w_mat, qp_data.w_vec);
  const auto nu = static_cast<Eigen::Index>(kInputDim) * cfg_.n_c;
  const BoxedSolve bs = solve_boxed(qp_data, VectorXd::Constant(nu, -u_ref_),
                                    VectorXd::Constant(nu, cfg_.u_max - u_ref_), qp_opts_, warm_);

  res.blocked = (bs.x.array() + u_ref_).cwiseMax(0.0).cwiseMin(cfg_.u_max);
  res.u = res.blocked.head<kInputDim>();
  res.diag.qp_status = bs.sol.status;
  res.diag.qp_iterations = bs.sol.iterations;
  res.diag.primal_res = bs.sol.primal_res;
  res.diag.dual_res = bs.sol.dual_res;
  res.diag.fallback = bs.fallback;
  if (!bs.fallback) warm_ = qp::WarmStart{bs.sol.x_star, bs.sol.lambda};
  u_prev_ = res.u;
  res.diag.solve_time_s = seconds_since(t0);
  return res;
}

NmpcController::NmpcController(MpcConfig cfg, dynamics::QuadParams params, qp::QpOptions qp_opts, NmpcOptions opts)
    : cfg_(std::move(cfg)), params_(params), qp_opts_(qp_opts), opts_(opts), lmpc_(cfg_, params_, qp_opts_) {
  u_ref_ = dynamics::hover_level(params_);
}

void NmpcController::reset() {
  lmpc_.reset();
  previous_.resize(0);
}

ControlResult NmpcController::control(const StateVec& x, const ReferenceTrajectory& ref) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n_p = cfg_.n_p, n_c = cfg_.n_c;
  const auto nu = static_cast<Eigen::Index>(kInputDim) * n_c;

  // Start from the better of the linearized solution and the shifted
  // previous sequence.
  ControlResult res;
  const ControlResult linear = lmpc_.control(x, ref);
  res.diag.state_violation = linear.diag.state_violation;
  VectorXd u_seq = linear.blocked;
  double j_cur = nonlinear_cost(x, ref, u_seq, cfg_, params_);
  if (previous_.size() == nu) {
    VectorXd shifted(nu);
    shifted.head(nu - kInputDim) = previous_.tail(nu - kInputDim);
    shifted.tail<kInputDim>() = previous_.tail<kInputDim>();
    const double j_shift = nonlinear_cost(x, ref, shifted, cfg_, params_);
    if (j_shift < j_cur) {
      u_seq = shifted;
      j_cur = j_shift;
    }
  }

  VectorXd r_eff = tiled(cfg_.r_diag, n_c);
  r_eff.tail<kInputDim>() *= static_cast<double>(n_p - n_c + 1);
  const VectorXd q_tilde = tiled(cfg_.q_diag, n_p);
  const VectorXd x_ref = stacked_reference(ref);

  if (std::isfinite(j_cur)) {
    std::vector<Linearization> lins(static_cast<std::size_t>(n_p));
    const std::vector<VectorXd> zero_offsets(static_cast<std::size_t>(n_p), VectorXd::Zero(kStateDim));
    for (int it = 0; it < opts_.max_iterations; ++it) {
      const auto xs = rollout(x, u_seq, cfg_, params_);
      const auto inputs = expand_inputs(u_seq, n_p, n_c);
      VectorXd base(kStateDim * n_p);
      for (int i = 0; i < n_p; ++i) {
        lins[static_cast<std::size_t>(i)] =
            dynamics::linearize(xs[static_cast<std::size_t>(i)], inputs[static_cast<std::size_t>(i)], params_);
        base.segment<kStateDim>(kStateDim * i) = xs[static_cast<std::size_t>(i) + 1];
      }
      const Prediction pred = assemble_condensed_ltv(lins, zero_offsets, n_c);

      CondensedQp sub;
      const MatrixXd qb = q_tilde.asDiagonal() * pred.b_tilde;
      sub.h_mat = pred.b_tilde.transpose() * qb;
      sub.h_mat.diagonal() += r_eff;
      sub.h_mat = 0.5 * (sub.h_mat + sub.h_mat.transpose());
      sub.h_vec = qb.transpose() * (base - x_ref) + r_eff.cwiseProduct((u_seq.array() - u_ref_).matrix());
      const VectorXd lower = -u_seq;
      const VectorXd upper = (cfg_.u_max - u_seq.array()).matrix();
      std::tie(sub.w_mat, sub.w_vec) = stack_constraints(pred.b_tilde, base, cfg_.angle_limit, lower, upper);
      res.diag.state_violation = prune_constant_rows(sub.w_mat, sub.w_vec) || res.diag.state_violation;

      const BoxedSolve bs = solve_boxed(sub, lower, upper, qp_opts_, std::nullopt);
      ++res.diag.sqp_iterations;
      res.diag.qp_status = bs.sol.status;
      res.diag.qp_iterations += bs.sol.iterations;
      res.diag.primal_res = bs.sol.primal_res;
      res.diag.dual_res = bs.sol.dual_res;
      res.diag.fallback = res.diag.fallback || bs.fallback;

      const VectorXd& step = bs.x;
      if (step.lpNorm<Eigen::Infinity>() < opts_.step_tol) break;

      double alpha = 1.0;
      bool accepted = false;
      for (int bt = 0; bt <= opts_.max_backtracks; ++bt, alpha *= 0.5) {
        const VectorXd trial = u_seq + alpha * step;
        const double j_trial = nonlinear_cost(x, ref, trial, cfg_, params_);
        if (j_trial < j_cur) {
          u_seq = trial;
          j_cur = j_trial;
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        res.diag.no_descent = true;
        break;
      }
      if (alpha * step.lpNorm<Eigen::Infinity>() < opts_.step_tol) break;
    }
  } else {
    res.diag.no_descent = true;
  }

  res.blocked = u_seq.cwiseMax(0.0).cwiseMin(cfg_.u_max);
  res.u = res.blocked.head<kInputDim>();
  res.diag.cost = j_cur;
  previous_ = res.blocked;
  lmpc_.set_previous_input(res.u);
  res.diag.solve_time_s = seconds_since(t0);
  return res;
}

}  // namespace lgvmpc::mpc
