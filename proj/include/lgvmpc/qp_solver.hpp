#pragma once

// Dense convex QP
//
//   minimize   0.5 x' H x + h' x
//   subject to W x <= w
//
// solved by operator splitting (ADMM on the slack z = W x) with residual-ratio
// penalty adaptation and an active-set polish of the final iterate.

#include <Eigen/Dense>

#include <optional>

namespace lgvmpc::qp {

enum class QpStatus { kSolved, kMaxIter, kInfeasible };

const char* to_string(QpStatus s);

struct QpOptions {
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  double eps_infeasible = 1e-7;
  int max_iter = 4000;
  double rho_init = 0.1;
  double rho_min = 1e-4;
  double rho_max = 1e4;
  double sigma = 1e-6;
  double alpha = 1.6;  // over-relaxation
  int adapt_interval = 10;
  double adapt_ratio = 5.0;
  bool polish = true;
};

struct QpSolution {
  Eigen::VectorXd x_star;
  Eigen::VectorXd lambda;
  QpStatus status = QpStatus::kMaxIter;
  double primal_res = 0.0;  // max(W x - w, 0), inf-norm
  double dual_res = 0.0;    // ||H x + h + W' lambda||_inf
  double comp_res = 0.0;    // |lambda' (W x - w)|
  int iterations = 0;
  bool polished = false;
};

struct WarmStart {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;
};

double objective(const Eigen::MatrixXd& h_mat, const Eigen::VectorXd& h_vec, const Eigen::VectorXd& x);

// KKT residuals of (x, lambda); fills the residual fields of a solution.
void kkt_residuals(const Eigen::MatrixXd& h_mat, const Eigen::VectorXd& h_vec, const Eigen::MatrixXd& w_mat,
                   const Eigen::VectorXd& w_vec, QpSolution& sol);

QpSolution solve(const Eigen::MatrixXd& h_mat, const Eigen::VectorXd& h_vec, const Eigen::MatrixXd& w_mat,
                 const Eigen::VectorXd& w_vec, const QpOptions& opts = {},
                 const std::optional<WarmStart>& warm = std::nullopt);

struct OracleResult {
  bool feasible = false;
  Eigen::VectorXd x_star;
  Eigen::VectorXd lambda;
  double objective = 0.0;
};

inline constexpr int kOracleMaxVars = 8;
inline constexpr int kOracleMaxRows = 16;

// Exhaustive active-set enumeration. Intended as a test oracle for n <= 8,
// m <= 16.
OracleResult brute_force_oracle(const Eigen::MatrixXd& h_mat, const Eigen::VectorXd& h_vec,
                                const Eigen::MatrixXd& w_mat, const Eigen::VectorXd& w_vec);

}  // namespace lgvmpc::qp
