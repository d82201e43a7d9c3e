#include "lgvmpc/feasibility_projection.hpp"

#include <algorithm>

namespace lgvmpc::projection {

FeasibleSet build_feasible_set(const dynamics::Linearization& lin, const StateVec& x, double angle_limit,
                               double u_max) {
  if (lin.a_mat.rows() != kStateDim || lin.a_mat.cols() != kStateDim || lin.b_mat.rows() != kStateDim ||
      lin.b_mat.cols() != kInputDim) {
    throw Fault(FaultKind::kDimension, "feasible set needs a 12x12 / 12x4 linearization");
  }
  Eigen::VectorXd free = lin.a_mat * x;
  if (lin.offset.size() == kStateDim) free += lin.offset;

  FeasibleSet fs;
  fs.u_max = u_max;
  for (int angle : {idx::kRoll, idx::kPitch}) {
    for (double sign : {1.0, -1.0}) {
      Halfspace h;
      h.a = sign * lin.b_mat.row(angle).transpose();
      h.b = angle_limit - sign * free[angle];
      if (h.a.squaredNorm() <= kZeroRowTol) {
        ++fs.dropped_rows;
        if (h.b < 0.0) fs.preview_infeasible = true;
        continue;
      }
      fs.halfspaces.push_back(h);
    }
  }
  return fs;
}

Vec4 project_halfspace(const Vec4& u, const Vec4& a, double b) {
  const double gap = b - a.dot(u);
  if (gap >= 0.0) return u;
  return u + (gap / a.squaredNorm()) * a;
}

Vec4 clamp_box(const Vec4& u, double u_max) { return u.cwiseMax(0.0).cwiseMin(u_max); }

double max_violation(const FeasibleSet& fs, const Vec4& u) {
  double v = 0.0;
  for (int i = 0; i < kInputDim; ++i) v = std::max({v, -u[i], u[i] - fs.u_max});
  for (const Halfspace& h : fs.halfspaces) v = std::max(v, h.a.dot(u) - h.b);
  return v;
}

ProjectionResult project_policy_output(const Vec4& u_hat, const FeasibleSet& fs, int sweeps) {
  ProjectionResult res;
  res.u = u_hat;
  for (int s = 0; s < sweeps; ++s) {
    res.u = clamp_box(res.u, fs.u_max);
    for (const Halfspace& h : fs.halfspaces) res.u = project_halfspace(res.u, h.a, h.b);
    res.residuals.push_back(max_violation(fs, res.u));
  }
  res.max_violation = max_violation(fs, res.u);
  if (res.max_violation > kResidualFlag || fs.preview_infeasible) {
    res.flagged = true;
    res.u = clamp_box(res.u, fs.u_max);
  }
  return res;
}

}  // namespace lgvmpc::projection
