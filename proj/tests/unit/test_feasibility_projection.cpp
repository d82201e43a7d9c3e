#include <doctest.h>

#include "lgvmpc/feasibility_projection.hpp"
#include "lgvmpc/qp_solver.hpp"

#include <random>

using namespace lgvmpc;
using namespace lgvmpc::projection;

namespace {

constexpr double kLimit = 0.7853981633974483;

// min 0.5 |u - u_hat|^2 over the box and halfspaces.
Vec4 exact_projection(const Vec4& u_hat, const FeasibleSet& fs) {
  const int m = 8 + static_cast<int>(fs.halfspaces.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, 4);
  Eigen::VectorXd b(m);
  w.topRows(4).setIdentity();
  b.head(4).setConstant(fs.u_max);
  w.middleRows(4, 4) = -Eigen::MatrixXd::Identity(4, 4);
  b.segment(4, 4).setZero();
  for (std::size_t j = 0; j < fs.halfspaces.size(); ++j) {
    w.row(8 + static_cast<int>(j)) = fs.halfspaces[j].a.transpose();
    b[8 + static_cast<int>(j)] = fs.halfspaces[j].b;
  }
  const auto sol = qp::solve(Eigen::MatrixXd::Identity(4, 4), -u_hat, w, b);
  return sol.x_star;
}

}  // namespace

TEST_CASE("halfspace projection") {
  CHECK(project_halfspace(Vec4::Ones(), Vec4(1, 0, 0, 0), 0.5) == Vec4(0.5, 1, 1, 1));
  CHECK(project_halfspace(Vec4(0.2, 3, 3, 3), Vec4(1, 0, 0, 0), 0.5) == Vec4(0.2, 3, 3, 3));
  for (double scale : {1.0 / std::sqrt(2.0), 1.0, 7.5}) {
    const Vec4 p = project_halfspace(Vec4(1, 1, 0, 0), scale * Vec4(1, 1, 0, 0), 0.0);
    CHECK(p.norm() < 1e-15);
  }
}

TEST_CASE("hover is strictly feasible") {
  dynamics::QuadParams qp;
  const Vec4 uh = dynamics::hover_input(qp);
  const auto lin = dynamics::linearize(StateVec::Zero(), uh, qp);
  const FeasibleSet fs = build_feasible_set(lin, StateVec::Zero(), kLimit, qp.u_max);
  // one Euler step moves angles by tau * rate only, so every row is a state check
  CHECK(fs.dropped_rows == 4);
  CHECK(fs.halfspaces.empty());
  CHECK_FALSE(fs.preview_infeasible);
  CHECK(max_violation(fs, uh) == 0.0);
  const auto res = project_policy_output(uh, fs);
  CHECK(res.u == uh);
  CHECK_FALSE(res.flagged);

  StateVec x = StateVec::Zero();
  x[idx::kRoll] = 0.7;
  x[idx::kRate] = 1.0;  // 0.7 + 0.1 > pi/4
  const FeasibleSet bad = build_feasible_set(dynamics::linearize(x, uh, qp), x, kLimit, qp.u_max);
  CHECK(bad.preview_infeasible);
}

TEST_CASE("input placing the predicted roll on the limit is on the boundary") {
  std::mt19937_64 rng(53);
  std::normal_distribution<double> nd(0.0, 1.0);
  dynamics::Linearization lin;
  lin.a_mat = Eigen::MatrixXd::Identity(12, 12);
  lin.b_mat = Eigen::MatrixXd::Zero(12, 4);
  for (int j = 0; j < 4; ++j) lin.b_mat(idx::kRoll, j) = 0.02 * nd(rng);
  for (int j = 0; j < 4; ++j) lin.b_mat(idx::kPitch, j) = 0.02 * nd(rng);
  lin.offset = Eigen::VectorXd::Zero(12);
  StateVec x = StateVec::Zero();
  x[idx::kRoll] = 0.6;
  const FeasibleSet fs = build_feasible_set(lin, x, kLimit, 12.0);
  REQUIRE(fs.halfspaces.size() == 4u);
  CHECK(fs.halfspaces[0].b == doctest::Approx(kLimit - 0.6));
  const Vec4 a = lin.b_mat.row(idx::kRoll).transpose();
  const Vec4 u0 = Vec4::Constant(4.905);
  const double t = (kLimit - 0.6 - a.dot(u0)) / a.squaredNorm();
  const Vec4 u = u0 + t * a;
  const Eigen::VectorXd pred = lin.a_mat * x + lin.b_mat * u + lin.offset;
  CHECK(pred[idx::kRoll] == doctest::Approx(kLimit).epsilon(1e-12));
  CHECK(std::abs(fs.halfspaces[0].a.dot(u) - fs.halfspaces[0].b) < 1e-12);
}

TEST_CASE("input-independent rows") {
  dynamics::Linearization lin;
  lin.a_mat = Eigen::MatrixXd::Identity(12, 12);
  lin.b_mat = Eigen::MatrixXd::Zero(12, 4);
  lin.b_mat(idx::kPitch, 0) = 0.01;
  lin.offset = Eigen::VectorXd::Zero(12);
  StateVec x = StateVec::Zero();
  x[idx::kRoll] = 0.3;
  FeasibleSet fs = build_feasible_set(lin, x, kLimit, 12.0);
  CHECK(fs.dropped_rows == 2);
  CHECK(fs.halfspaces.size() == 2u);
  CHECK_FALSE(fs.preview_infeasible);

  x[idx::kRoll] = 1.0;
  fs = build_feasible_set(lin, x, kLimit, 12.0);
  CHECK(fs.preview_infeasible);
  const auto res = project_policy_output(Vec4(13, -1, 2, 2), fs);
  CHECK(res.flagged);
  CHECK(res.u.minCoeff() >= 0.0);
  CHECK(res.u.maxCoeff() <= 12.0);
}

TEST_CASE("box-only violation is an exact clamp") {
  FeasibleSet fs;
  fs.u_max = 12.0;
  const auto res = project_policy_output(Vec4(13, -1, 2, 5), fs, 1);
  CHECK(res.u == Vec4(12, 0, 2, 5));
  CHECK(res.max_violation == 0.0);
}

TEST_CASE("properties on random polytopes") {
  std::mt19937_64 rng(47);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> uu(0.0, 12.0);
  int close = 0, total = 0;
  for (int trial = 0; trial < 300; ++trial) {
    // slabs |a.u + f| <= c shaped like the roll and pitch rows, around a
    // random interior center
    FeasibleSet fs;
    fs.u_max = 12.0;
    Vec4 center;
    for (int i = 0; i < 4; ++i) center[i] = 2.0 + uu(rng) * 8.0 / 12.0;
    for (int row = 0; row < 2; ++row) {
      Vec4 a;
      for (int i = 0; i < 4; ++i) a[i] = 0.05 * nd(rng);
      const double f = -a.dot(center) + 0.9 * kLimit * (2.0 * uu(rng) / 12.0 - 1.0);
      fs.halfspaces.push_back({a, kLimit - f});
      fs.halfspaces.push_back({-a, kLimit + f});
    }
    Vec4 u_hat;
    for (int i = 0; i < 4; ++i) u_hat[i] = center[i] + 3.0 * nd(rng);
    const auto res = project_policy_output(u_hat, fs);
    for (std::size_t s = 1; s < res.residuals.size(); ++s) CHECK(res.residuals[s] <= res.residuals[s - 1] + 1e-12);

    const Vec4 exact = exact_projection(u_hat, fs);
    REQUIRE(max_violation(fs, exact) < 1e-6);
    ++total;
    if ((res.u - exact).norm() <= 1e-2 * fs.u_max) ++close;

    const auto again = project_policy_output(center, fs);
    CHECK(again.u == center);

    for (const auto& h : fs.halfspaces) {
      Vec4 v;
      for (int i = 0; i < 4; ++i) v[i] = uu(rng);
      const Vec4 pv = project_halfspace(v, h.a, h.b);
      CHECK(h.a.dot(pv) <= h.b + 1e-12);
      CHECK((pv - center).norm() <= (v - center).norm() + 1e-12);
    }
  }
  CHECK(static_cast<double>(close) >= 0.95 * total);
}
