#include "lgvmpc/qp_solver.hpp"

#include "lgvmpc/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace lgvmpc::qp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::kSolved: return "solved";
    case QpStatus::kMaxIter: return "max_iter";
    case QpStatus::kInfeasible: return "infeasible";
  }
  return "unknown";
}

double objective(const MatrixXd& h_mat, const VectorXd& h_vec, const VectorXd& x) {
  return 0.5 * x.dot(h_mat * x) + h_vec.dot(x);
}

void kkt_residuals(const MatrixXd& h_mat, const VectorXd& h_vec, const MatrixXd& w_mat, const VectorXd& w_vec,
                   QpSolution& sol) {
  const VectorXd& x = sol.x_star;
  VectorXd grad = h_mat * x + h_vec;
  if (w_mat.rows() > 0) {
    const VectorXd slack = w_mat * x - w_vec;
    grad += w_mat.transpose() * sol.lambda;
    sol.primal_res = std::max(0.0, slack.maxCoeff());
    sol.comp_res = std::abs(sol.lambda.dot(slack));
  } else {
    sol.primal_res = 0.0;
    sol.comp_res = 0.0;
  }
  sol.dual_res = grad.lpNorm<Eigen::Infinity>();
}

namespace {

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

void check_dims(const MatrixXd& h_mat, const VectorXd& h_vec, const MatrixXd& w_mat, const VectorXd& w_vec) {
  const auto n = h_mat.rows();
  if (h_mat.cols() != n || h_vec.size() != n || (w_mat.rows() > 0 && w_mat.cols() != n) ||
      w_mat.rows() != w_vec.size()) {
    throw Fault(FaultKind::kDimension, "QP data dimensions are inconsistent");
  }
}

// Solves the equality-constrained KKT system on `active` rows. Returns false
// when the system is numerically singular.
bool solve_kkt(const MatrixXd& h_mat, const VectorXd& h_vec, const MatrixXd& w_mat, const VectorXd& w_vec,
               const std::vector<int>& active, VectorXd& x, VectorXd& lambda_active) {
  const auto n = h_mat.rows();
  const auto k = static_cast<Eigen::Index>(active.size());
  MatrixXd kkt = MatrixXd::Zero(n + k, n + k);
  VectorXd rhs(n + k);
  kkt.topLeftCorner(n, n) = h_mat;
  rhs.head(n) = -h_vec;
  for (Eigen::Index i = 0; i < k; ++i) {
    kkt.block(n + i, 0, 1, n) = w_mat.row(active[i]);
    kkt.block(0, n + i, n, 1) = w_mat.row(active[i]).transpose();
    rhs[n + i] = w_vec[active[i]];
  }
  Eigen::FullPivLU<MatrixXd> lu(kkt);
  if (lu.rank() < n + k) return false;
  VectorXd sol = lu.solve(rhs);
  // One refinement pass against the exact system.
  sol += lu.solve(rhs - kkt * sol);
  if (!sol.allFinite()) return false;
  x = sol.head(n);
  lambda_active = sol.tail(k);
  return true;
}

// Active-set polish. Rows whose multiplier exceeds their slack are taken as
// active; the KKT solution is accepted only if it is primal and dual feasible.
bool polish(const MatrixXd& h_mat, const VectorXd& h_vec, const MatrixXd& w_mat, const VectorXd& w_vec,
            const VectorXd& z, const VectorXd& y, const QpOptions& opts, QpSolution& out) {
  std::vector<int> active;
  for (Eigen::Index i = 0; i < w_vec.size(); ++i) {
    if (y[i] > w_vec[i] - z[i]) active.push_back(static_cast<int>(i));
  }
  if (static_cast<Eigen::Index>(active.size()) > h_mat.rows()) return false;
  VectorXd x, lam_a;
  if (!solve_kkt(h_mat, h_vec, w_mat, w_vec, active, x, lam_a)) return false;

  QpSolution cand;
  cand.x_star = x;
  cand.lambda = VectorXd::Zero(w_vec.size());
  for (std::size_t i = 0; i < active.size(); ++i) cand.lambda[active[i]] = lam_a[static_cast<Eigen::Index>(i)];
  if (cand.lambda.size() > 0 && cand.lambda.minCoeff() < -opts.eps_abs) return false;
  cand.lambda = cand.lambda.cwiseMax(0.0);
  kkt_residuals(h_mat, h_vec, w_mat, w_vec, cand);
  if (cand.primal_res > opts.eps_abs || cand.dual_res > opts.eps_abs) return false;

  out.x_star = cand.x_star;
  out.lambda = cand.lambda;
  out.polished = true;
  return true;
}

}  // namespace

QpSolution solve(const MatrixXd& h_mat, const VectorXd& h_vec, const MatrixXd& w_mat, const VectorXd& w_vec,
                 const QpOptions& opts, const std::optional<WarmStart>& warm) {
  check_dims(h_mat, h_vec, w_mat, w_vec);
  const auto n = h_mat.rows();
  const auto m = w_mat.rows();
  QpSolution out;

  if (m == 0) {
    out.x_star = h_mat.llt().solve(-h_vec);
    out.lambda = VectorXd::Zero(0);
    out.status = QpStatus::kSolved;
    kkt_residuals(h_mat, h_vec, w_mat, w_vec, out);
    return out;
  }

  const MatrixXd wtw = w_mat.transpose() * w_mat;
  const MatrixXd h_reg = h_mat + opts.sigma * MatrixXd::Identity(n, n);
  double rho = std::clamp(opts.rho_init, opts.rho_min, opts.rho_max);
  Eigen::LLT<MatrixXd> factor(h_reg + rho * wtw);

  VectorXd x = VectorXd::Zero(n);
  VectorXd y = VectorXd::Zero(m);
  if (warm && warm->x.size() == n) x = warm->x;
  if (warm && warm->lambda.size() == m) y = warm->lambda.cwiseMax(0.0);
  VectorXd z = (w_mat * x).cwiseMin(w_vec);

  VectorXd x_tilde(n), z_tilde(m), z_hat(m), z_next(m), y_next(m), dy(m);
  VectorXd wx(m), hx(n), wty(n);
  double r_prim = 0.0, r_dual = 0.0;
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    x_tilde = factor.solve(opts.sigma * x - h_vec + w_mat.transpose() * (rho * z - y));
    z_tilde = w_mat * x_tilde;
    x = opts.alpha * x_tilde + (1.0 - opts.alpha) * x;
    z_hat = opts.alpha * z_tilde + (1.0 - opts.alpha) * z;
    z_next = (z_hat + y / rho).cwiseMin(w_vec);
    y_next = y + rho * (z_hat - z_next);
    dy = y_next - y;
    z = z_next;
    y = y_next;

    wx = w_mat * x;
    hx = h_mat * x;
    wty = w_mat.transpose() * y;
    r_prim = inf_norm(wx - z);
    r_dual = inf_norm(hx + h_vec + wty);
    const double scale_p = std::max(inf_norm(wx), inf_norm(z));
    const double scale_d = std::max({inf_norm(hx), inf_norm(wty), inf_norm(h_vec)});
    const double eps_p = opts.eps_abs + opts.eps_rel * scale_p;
    const double eps_d = opts.eps_abs + opts.eps_rel * scale_d;
    if (r_prim <= eps_p && r_dual <= eps_d) {
      out.status = QpStatus::kSolved;
      ++iter;
      break;
    }

    // Primal infeasibility certificate: W' dy ~ 0, dy >= 0, w' dy < 0.
    const double dy_norm = inf_norm(dy);
    if (dy_norm > 0.0) {
      const double tol = opts.eps_infeasible * dy_norm;
      if (dy.minCoeff() >= -tol && inf_norm(w_mat.transpose() * dy) <= tol && w_vec.dot(dy) < -tol) {
        out.status = QpStatus::kInfeasible;
        ++iter;
        break;
      }
    }

    if (opts.adapt_interval > 0 && (iter + 1) % opts.adapt_interval == 0) {
      const double rel_p = r_prim / std::max(scale_p, 1e-12);
      const double rel_d = r_dual / std::max(scale_d, 1e-12);
      const double ratio = std::sqrt(rel_p / std::max(rel_d, 1e-300));
      double next = rho;
      if (ratio > opts.adapt_ratio) next = rho * 2.0;
      if (ratio < 1.0 / opts.adapt_ratio) next = rho / 2.0;
      next = std::clamp(next, opts.rho_min, opts.rho_max);
      if (next != rho) {
        rho = next;
        factor.compute(h_reg + rho * wtw);
      }
    }
  }
  out.iterations = iter;
  out.x_star = x;
  out.lambda = y;

  if (out.status != QpStatus::kInfeasible && opts.polish) {
    polish(h_mat, h_vec, w_mat, w_vec, z, y, opts, out);
    if (out.polished) out.status = QpStatus::kSolved;
  }
  kkt_residuals(h_mat, h_vec, w_mat, w_vec, out);
  return out;
}

OracleResult brute_force_oracle(const MatrixXd& h_mat, const VectorXd& h_vec, const MatrixXd& w_mat,
                                const VectorXd& w_vec) {
  check_dims(h_mat, h_vec, w_mat, w_vec);
  const auto n = h_mat.rows();
  const auto m = w_mat.rows();
  if (n > kOracleMaxVars || m > kOracleMaxRows) {
    throw Fault(FaultKind::kDimension, "oracle limited to n <= 8 and m <= 16");
  }
  constexpr double kFeasTol = 1e-9;
  constexpr double kTieTol = 1e-12;

  OracleResult best;
  std::vector<int> active;
  const std::uint32_t subsets = 1u << static_cast<unsigned>(m);
  for (std::uint32_t mask = 0; mask < subsets; ++mask) {
    active.clear();
    for (int i = 0; i < m; ++i) {
      if (mask & (1u << static_cast<unsigned>(i))) active.push_back(i);
    }
    if (static_cast<Eigen::Index>(active.size()) > n) continue;
    VectorXd x, lam_a;
    if (!solve_kkt(h_mat, h_vec, w_mat, w_vec, active, x, lam_a)) continue;
    if (lam_a.size() > 0 && lam_a.minCoeff() < -kFeasTol) continue;
    if (m > 0 && ((w_mat * x - w_vec).array() > kFeasTol * (1.0 + w_vec.array().abs())).any()) continue;

    const double obj = objective(h_mat, h_vec, x);
    bool better = !best.feasible || obj < best.objective - kTieTol * (1.0 + std::abs(obj));
    if (!better && std::abs(obj - best.objective) <= kTieTol * (1.0 + std::abs(obj))) {
      better = std::lexicographical_compare(x.data(), x.data() + n, best.x_star.data(), best.x_star.data() + n);
    }
    if (better) {
      best.feasible = true;
      best.objective = obj;
      best.x_star = x;
      best.lambda = VectorXd::Zero(m);
      for (std::size_t i = 0; i < active.size(); ++i) best.lambda[active[i]] = lam_a[static_cast<Eigen::Index>(i)];
    }
  }
  return best;
}

}  // namespace lgvmpc::qp
