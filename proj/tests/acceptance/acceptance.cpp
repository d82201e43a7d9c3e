// Acceptance checks, one per criterion. Each run prints a single
// "criterion N: PASS|FAIL ..." line and exits nonzero on failure.
//
//   acceptance --criterion N --work DIR
//   acceptance --prepare --work DIR     (collect + train the shared model)

#include "lgvmpc/feasibility_projection.hpp"
#include "lgvmpc/lgv_guidance.hpp"
#include "lgvmpc/mpc_core.hpp"
#include "lgvmpc/policy_learning.hpp"
#include "lgvmpc/qp_solver.hpp"
#include "lgvmpc/sim_harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lgvmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path g_work;

// ---- shared model

constexpr int kTrainRollouts = 4000;  // 2e5 samples at 50 steps
constexpr int kHeldoutRollouts = 200;
constexpr std::uint64_t kTrainSeed = 1;
constexpr std::uint64_t kHeldoutSeed = 0x5EED2;

learning::CollectOptions collect_options(int rollouts, std::uint64_t seed) {
  learning::CollectOptions c;
  c.n_rollouts = rollouts;
  c.seed = seed;
  return c;
}

json prepare_model() {
  fs::create_directories(g_work);
  const auto t0 = std::chrono::steady_clock::now();
  const auto col = learning::collect_samples(collect_options(kTrainRollouts, kTrainSeed));
  const double t_collect = seconds_since(t0);
  learning::TrainOptions to;
  to.seed = kTrainSeed;
  const auto t1 = std::chrono::steady_clock::now();
  const auto tr = learning::train(col.data, to);
  const double t_train = seconds_since(t1);
  learning::save_model(tr.model, (g_work / "model.json").string());

  const auto held = learning::collect_samples(collect_options(kHeldoutRollouts, kHeldoutSeed));
  learning::save_dataset(held.data, (g_work / "heldout.csv").string(), "seed=" + std::to_string(kHeldoutSeed));

  json j;
  j["samples"] = col.data.size();
  j["discarded_rollouts"] = col.discarded;
  j["collect_s"] = t_collect;
  j["train_s"] = t_train;
  j["epochs"] = tr.report.epochs;
  j["batch"] = tr.report.batch_size;
  j["train_loss"] = tr.report.train_loss;
  j["eval_loss"] = tr.report.eval_loss;
  j["best_epoch"] = tr.report.best_epoch;
  j["aborted"] = tr.report.aborted;
  j["heldout_samples"] = held.data.size();
  std::ofstream(g_work / "prepare.json") << j.dump(2) << '\n';
  return j;
}

json prepared() {
  const fs::path p = g_work / "prepare.json";
  if (!fs::exists(p) || !fs::exists(g_work / "model.json") || !fs::exists(g_work / "heldout.csv")) {
    return prepare_model();
  }
  std::ifstream is(p);
  return json::parse(is);
}

std::shared_ptr<const learning::MlpModel> shared_model() {
  prepared();
  return std::make_shared<const learning::MlpModel>(learning::load_model((g_work / "model.json").string()));
}

// ---- kinematic point mass under the field

struct PointRun {
  std::vector<double> t, r;
};

PointRun integrate_point(int beta, double r0, double t_end, double dt) {
  guidance::TrackingPattern pat;
  pat.beta = beta;
  Eigen::Vector2d p(r0, 0.0);
  PointRun run;
  const int n = static_cast<int>(std::llround(t_end / dt));
  for (int k = 0; k <= n; ++k) {
    run.t.push_back(k * dt);
    run.r.push_back(p.norm());
    p += dt * guidance::lgv_velocity(p, pat, pat.r_d);
  }
  return run;
}

// ---- criteria

Outcome c1_norm_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> rad(0.01, 10.0), ang(-std::numbers::pi, std::numbers::pi);
  guidance::TrackingPattern pat;
  double worst = 0.0;
  long n = 0;
  for (int i = 0; i < 1000; ++i) {
    const double r = rad(rng), a = ang(rng);
    const Eigen::Vector2d p(r * std::cos(a), r * std::sin(a));
    for (auto d : {guidance::Direction::kCounterClockwise, guidance::Direction::kClockwise}) {
      pat.direction = d;
      for (int beta : {1, 2, 3, 100}) {
        pat.beta = beta;
        worst = std::max(worst, std::abs(guidance::lgv_velocity(p, pat, pat.r_d).norm() - pat.v_d));
        ++n;
      }
    }
  }
  const double dt = seconds_since(t0);
  return {worst <= 1e-12 * pat.v_d && dt < 1.0,
          fmt("%ld evaluations, max | |v_L| - v_d | = %.2e (limit 1e-12), %.3f s (limit 1 s)", n, worst, dt)};
}

Outcome c2_lyapunov_rate() {
  const auto t0 = std::chrono::steady_clock::now();
  const double r_d = 2.0, v_d = 1.0, dt = 1e-3;
  const int beta = 3;
  const PointRun run = integrate_point(beta, 5.0, 40.0, dt);
  auto lyap = [&](double r) { return 0.5 * std::pow(std::pow(r, beta) - std::pow(r_d, beta), 2); };
  const double l0 = lyap(run.r.front());
  double reached = -1.0;
  double first_violation_t = -1.0, first_violation_r = 0.0, worst_ratio = 0.0;
  for (std::size_t k = 0; k < run.t.size(); ++k) {
    const double r = run.r[k];
    if (reached < 0.0 && std::abs(r - r_d) <= 1e-3) reached = run.t[k];
    if (r < r_d) continue;
    const double bound = l0 * std::exp(-beta * v_d * run.t[k] / r_d) * (1.0 + 1e-2);
    const double l = lyap(r);
    if (l > bound) {
      if (first_violation_t < 0.0) {
        first_violation_t = run.t[k];
        first_violation_r = r;
      }
      worst_ratio = std::max(worst_ratio, l / bound);
    }
  }
  const double secs = seconds_since(t0);
  // The bound needs 2 r_d r^(beta-1) >= r^beta + r_d^beta, i.e. r <= 1 + sqrt(5) for these values.
  const bool ok = reached >= 0.0 && first_violation_t < 0.0 && secs < 5.0;
  std::string d = fmt("|r-r_d|<=1e-3 at t=%.3f s; ", reached);
  if (first_violation_t >= 0.0) {
    d += fmt("exponential bound exceeded from t=%.3f s (r=%.3f), worst L1/bound=%.3g; "
             "the rate bound only holds for r <= %.3f",
             first_violation_t, first_violation_r, worst_ratio, 1.0 + std::sqrt(5.0));
  } else {
    d += "exponential bound holds at every logged t";
  }
  d += fmt("; %.2f s", secs);
  return {ok, d};
}

Outcome c3_beta_ordering() {
  double prev = std::numeric_limits<double>::infinity();
  bool ok = true;
  std::string d;
  for (int beta : {1, 2, 3}) {
    const PointRun run = integrate_point(beta, 5.0, 60.0, 1e-3);
    double settle = -1.0;
    for (std::size_t k = run.r.size(); k-- > 0;) {
      if (std::abs(run.r[k] - 2.0) >= 0.05) {
        settle = k + 1 < run.t.size() ? run.t[k + 1] : -1.0;
        break;
      }
    }
    if (!(settle >= 0.0 && settle < prev)) ok = false;
    prev = settle;
    d += fmt("beta=%d: %.3f s  ", beta, settle);
  }
  return {ok, d + "(strictly decreasing required)"};
}

Outcome c4_condensed_oracle() {
  dynamics::Linearization hand;
  hand.a_mat = MatrixXd::Constant(1, 1, 2.0);
  hand.b_mat = MatrixXd::Constant(1, 1, 1.0);
  hand.offset = VectorXd::Zero(1);
  const auto hp = mpc::assemble_condensed(hand, std::vector<VectorXd>(2, VectorXd::Zero(1)), 1);
  const bool hand_ok =
      hp.a_tilde(0, 0) == 2.0 && hp.a_tilde(1, 0) == 4.0 && hp.b_tilde(0, 0) == 1.0 && hp.b_tilde(1, 0) == 3.0;

  std::mt19937_64 rng(104);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  auto rnd = [&](int r, int c) {
    MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = u(rng);
    return m;
  };
  double worst = 0.0;
  int cases = 0;
  for (int n = 1; n <= 2; ++n)
    for (int n_p = 1; n_p <= 4; ++n_p)
      for (int n_c = 1; n_c <= n_p; ++n_c)
        for (int rep = 0; rep < 25; ++rep) {
          const int m = 1 + rep % 2;
          dynamics::Linearization lin;
          lin.a_mat = rnd(n, n);
          lin.b_mat = rnd(n, m);
          lin.offset = VectorXd::Zero(n);
          std::vector<VectorXd> off;
          for (int i = 0; i < n_p; ++i) off.push_back(rnd(n, 1));
          const auto p = mpc::assemble_condensed(lin, off, n_c);
          const VectorXd e0 = rnd(n, 1), du = rnd(m * n_c, 1);
          const VectorXd stacked = p.a_tilde * e0 + p.b_tilde * du + p.d_tilde;
          VectorXd e = e0;
          for (int i = 0; i < n_p; ++i) {
            e = lin.a_mat * e + lin.b_mat * du.segment(m * mpc::input_block(i, n_c), m) +
                off[static_cast<std::size_t>(i)];
            worst = std::max(worst, (stacked.segment(n * i, n) - e).cwiseAbs().maxCoeff());
          }
          ++cases;
        }
  return {hand_ok && worst <= 1e-10,
          fmt("hand case A~=[%g;%g] B~=[%g;%g]; %d random cases, max deviation %.2e (limit 1e-10)", hp.a_tilde(0, 0),
              hp.a_tilde(1, 0), hp.b_tilde(0, 0), hp.b_tilde(1, 0), cases, worst)};
}

Outcome c5_qp_certification() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(105);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst_gap = 0.0, worst_kkt = 0.0;
  int not_solved = 0;
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + static_cast<int>(rng() % 6);
    const int m = 1 + static_cast<int>(rng() % 10);
    MatrixXd l(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) l(i, j) = nd(rng);
    const MatrixXd h = l * l.transpose() + 0.1 * MatrixXd::Identity(n, n);
    VectorXd g(n), x0(n);
    for (int i = 0; i < n; ++i) g[i] = 3.0 * nd(rng), x0[i] = 0.3 * nd(rng);
    MatrixXd w(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) w(i, j) = nd(rng);
    VectorXd b = w * x0;
    for (int i = 0; i < m; ++i) b[i] += std::abs(nd(rng));
    const auto o = qp::brute_force_oracle(h, g, w, b);
    const auto s = qp::solve(h, g, w, b);
    if (s.status != qp::QpStatus::kSolved || !o.feasible) ++not_solved;
    worst_gap = std::max(worst_gap, std::abs(qp::objective(h, g, s.x_star) - o.objective));
    worst_kkt = std::max({worst_kkt, s.primal_res, s.dual_res, s.comp_res});
  }
  const double secs = seconds_since(t0);
  return {not_solved == 0 && worst_gap <= 1e-8 && worst_kkt <= 1e-5 && secs < 30.0,
          fmt("200 instances, %d unsolved, max objective gap %.2e (limit 1e-8), max KKT residual %.2e (limit 1e-5), "
              "%.2f s",
              not_solved, worst_gap, worst_kkt, secs)};
}

sim::Scenario stationary(sim::ControllerKind k) {
  sim::Scenario sc = sim::preset("stationary-se");
  sc.controller = k;
  return sc;
}

Outcome c6_lmpc_closed_loop() {
  const auto t0 = std::chrono::steady_clock::now();
  const sim::Scenario sc = stationary(sim::ControllerKind::kLmpc);
  const auto rec = sim::run_closed_loop(sc);
  const double secs = seconds_since(t0);
  if (rec.aborted) return {false, "run aborted: " + rec.abort_reason};
  const auto m = sim::steady_state_metrics(rec, sc.pattern, 20.0);
  return {m.range_err <= 0.1 && m.height_err <= 0.05 && m.speed_err <= 0.05 && secs < 120.0,
          fmt("range %.4f m (<=0.1), height %.4f m (<=0.05), speed %.4f m/s (<=0.05), %.1f s", m.range_err,
              m.height_err, m.speed_err, secs)};
}

Outcome c7_nmpc_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  const sim::Scenario sc = stationary(sim::ControllerKind::kNmpc);
  const dynamics::QuadParams& qp = sc.quad;
  const double tau = qp.tau;
  const int n_steps = sc.steps();
  const int ss_from = n_steps - static_cast<int>(std::llround(20.0 / tau));

  // NMPC closed loop with a shadow LMPC solved on every visited state.
  mpc::NmpcController nmpc(sc.mpc, qp);
  mpc::LmpcController shadow(sc.mpc, qp);
  StateVec x = StateVec::Zero();
  x.head<3>() = sc.uav_position;
  x[idx::kYaw] = sc.uav_yaw;
  const guidance::TargetState tgt;
  double worst_excess = -std::numeric_limits<double>::infinity();
  int violations = 0;
  double nmpc_height = 0.0;
  for (int k = 0; k < n_steps; ++k) {
    const auto ref = guidance::plan_trajectory(x.head<3>(), tgt, sc.pattern, sc.pattern.r_d, sc.mpc.n_p, tau);
    const auto lr = shadow.control(x, ref);
    const auto nr = nmpc.control(x, ref);
    if (k >= ss_from) {
      const double jl = mpc::nonlinear_cost(x, ref, lr.blocked, sc.mpc, qp);
      const double jn = mpc::nonlinear_cost(x, ref, nr.blocked, sc.mpc, qp);
      worst_excess = std::max(worst_excess, jn - jl);
      if (jn > jl + 1e-9) ++violations;
      nmpc_height += std::abs(x[2] - sc.pattern.z_d);
    }
    x = dynamics::step_euler(x, nr.u, qp);
    if (!dynamics::attitude_valid(x)) return {false, fmt("NMPC run left the valid attitude range at step %d", k)};
    shadow.set_previous_input(nr.u);
  }
  nmpc_height /= n_steps - ss_from;

  const auto lrec = sim::run_closed_loop(stationary(sim::ControllerKind::kLmpc));
  const auto lm = sim::steady_state_metrics(lrec, sc.pattern, 20.0);
  const double secs = seconds_since(t0);
  return {violations == 0 && nmpc_height < lm.height_err && secs < 600.0,
          fmt("%d steady-state steps with J_nmpc > J_lmpc + 1e-9 (max J_nmpc - J_lmpc = %.3g); height error NMPC "
              "%.5f m vs LMPC %.5f m; %.1f s",
              violations, worst_excess, nmpc_height, lm.height_err, secs)};
}

Outcome c8_fidelity() {
  const json prep = prepared();
  const auto model = learning::load_model((g_work / "model.json").string());
  const auto held = learning::load_dataset((g_work / "heldout.csv").string());
  const double threshold = 0.05 * 12.0;
  const auto st = learning::evaluate_fidelity(model, held, threshold);
  const auto eval = prep.at("eval_loss").get<std::vector<double>>();
  const double secs = prep.at("collect_s").get<double>() + prep.at("train_s").get<double>();
  const std::size_t samples = prep.at("samples").get<std::size_t>();
  const bool ok = samples >= 100000 && prep.at("epochs").get<int>() == 20 && prep.at("batch").get<int>() == 200 &&
                  eval.size() == 20 && eval.back() < eval.front() && st.fraction_within >= 0.9 && secs < 1800.0;
  return {ok, fmt("%zu training samples; eval loss epoch 1 %.4f -> epoch 20 %.4f; %.1f%% of %zu held-out points "
                  "within %.2f (>=90%%); collect+train %.0f s",
                  samples, eval.empty() ? NAN : eval.front(), eval.empty() ? NAN : eval.back(),
                  100.0 * st.fraction_within, st.n, threshold, secs)};
}

Outcome c9_distilled_im() {
  const auto model = shared_model();
  auto run = [&](sim::ControllerKind k) {
    sim::Scenario sc = stationary(k);
    sc.model = model;
    return sim::run_closed_loop(sc);
  };
  const auto plain = run(sim::ControllerKind::kNn);
  const auto with_im = run(sim::ControllerKind::kNnIm);
  if (plain.aborted || with_im.aborted) {
    return {false, "run aborted: " + (plain.aborted ? plain.abort_reason : with_im.abort_reason)};
  }
  const guidance::TrackingPattern pat;
  const auto mp = sim::steady_state_metrics(plain, pat, 20.0);
  const auto mi = sim::steady_state_metrics(with_im, pat, 20.0);
  double max_angle = 0.0, u_lo = 1e9, u_hi = -1e9;
  for (const auto* rec : {&plain, &with_im}) {
    for (const auto& s : rec->steps) {
      max_angle = std::max({max_angle, std::abs(s.x[idx::kRoll]), std::abs(s.x[idx::kPitch])});
      u_lo = std::min(u_lo, s.u.minCoeff());
      u_hi = std::max(u_hi, s.u.maxCoeff());
    }
  }
  const bool converged = mi.range_err <= 0.1 && mi.height_err <= 0.1;
  const bool ok = converged && mi.range_err < mp.range_err && mi.range_err <= 0.05 &&
                  max_angle <= std::numbers::pi / 4 + 1e-3 && u_lo >= 0.0 && u_hi <= 12.0;
  return {ok, fmt("range error without IM %.4f m, with IM %.4f m (<=0.05); height with IM %.4f m; max |roll|,|pitch| "
                  "%.4f rad; u in [%.3f, %.3f]",
                  mp.range_err, mi.range_err, mi.height_err, max_angle, u_lo, u_hi)};
}

Outcome c10_im_scalar() {
  const double c1 = 0.2, c2 = 0.2 / 1.1;
  const double expect = std::abs(1.0 - c1 / c2);
  bool converged = true;
  double worst_ratio_err = 0.0;
  int ratio_samples = 0;
  for (double d0 : {0.5, 0.1, -0.3}) {
    double d = d0;
    for (int k = 0; k < 400; ++k) {
      const double next = d - c1 * guidance::sat(d / c2);
      if (std::abs(d) < c2 && std::abs(d) > 1e-250) {
        worst_ratio_err = std::max(worst_ratio_err, std::abs(std::abs(next) / std::abs(d) - 0.1));
        ++ratio_samples;
      }
      d = next;
    }
    if (!(std::abs(d) < 1e-250)) converged = false;
  }
  // the same recursion through the module with r(k+1) = r_d_eff(k) + b
  double module_err = 0.0;
  for (double b : {0.5, 0.1, -0.3}) {
    guidance::ImState im = guidance::ImState::with_defaults(2.0, c1, c2);
    double r = 2.0 + b;
    for (int k = 0; k < 400; ++k) {
      const auto up = guidance::im_update(im, r, 2.0);
      im = up.state;
      r = up.r_d_eff + b;
    }
    module_err = std::max(module_err, std::abs(r - 2.0));
  }
  return {converged && ratio_samples > 0 && worst_ratio_err <= 1e-9 && std::abs(expect - 0.1) <= 1e-9 &&
              module_err < 1e-12,
          fmt("|1-c1/c2| = %.12f; %d in-band ratios, max |ratio-0.1| = %.2e (limit 1e-9); "
              "integral module residual %.2e",
              expect, ratio_samples, worst_ratio_err, module_err)};
}

Outcome c11_projection() {
  // Polytopes shaped like the one-step set: a slab |a_phi.u + f_phi| <= c and
  // one for pitch, plus the input box. A synthetic input map is used because
  // the Euler preview of the angles does not depend on u.
  std::mt19937_64 rng(111);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> uu(0.0, 1.0);
  const double u_max = 12.0, c = std::numbers::pi / 4;
  int close = 0, total = 0, idem_fail = 0, idem_total = 0;
  double worst = 0.0;
  while (total < 500) {
    projection::FeasibleSet fs;
    fs.u_max = u_max;
    Vec4 center;
    for (int i = 0; i < 4; ++i) center[i] = 2.0 + 8.0 * uu(rng);
    for (int row = 0; row < 2; ++row) {
      Vec4 a;
      for (int i = 0; i < 4; ++i) a[i] = 0.05 * nd(rng);
      const double f = -a.dot(center) + 0.9 * c * (2.0 * uu(rng) - 1.0);
      fs.halfspaces.push_back({a, c - f});
      fs.halfspaces.push_back({-a, c + f});
    }
    // a boundary point of one facet, pushed outward
    const auto& h = fs.halfspaces[rng() % 4];
    Vec4 on = center + ((h.b - h.a.dot(center)) / h.a.squaredNorm()) * h.a;
    if (projection::max_violation(fs, on) > 1e-9) continue;
    Vec4 u_hat = on;
    for (int i = 0; i < 4; ++i) u_hat[i] += 0.5 * nd(rng);
    u_hat += (0.5 * std::abs(nd(rng)) / h.a.norm()) * h.a;

    const int m = 8 + 4;
    MatrixXd w = MatrixXd::Zero(m, 4);
    VectorXd b(m);
    w.topRows(4).setIdentity();
    b.head(4).setConstant(u_max);
    w.middleRows(4, 4) = -MatrixXd::Identity(4, 4);
    b.segment(4, 4).setZero();
    for (int j = 0; j < 4; ++j) {
      w.row(8 + j) = fs.halfspaces[static_cast<std::size_t>(j)].a.transpose();
      b[8 + j] = fs.halfspaces[static_cast<std::size_t>(j)].b;
    }
    const auto exact = qp::solve(MatrixXd::Identity(4, 4), -u_hat, w, b);
    if (exact.status != qp::QpStatus::kSolved) continue;
    const auto res = projection::project_policy_output(u_hat, fs, 3);
    const double dist = (res.u - exact.x_star).norm();
    worst = std::max(worst, dist);
    if (dist <= 1e-2 * u_max) ++close;
    ++total;

    for (const Vec4& p : {center, on}) {
      if (projection::max_violation(fs, p) > 0.0) continue;
      ++idem_total;
      if (projection::project_policy_output(p, fs, 3).u != p) ++idem_fail;
    }
  }
  const double frac = static_cast<double>(close) / total;
  return {frac >= 0.95 && idem_fail == 0,
          fmt("%.1f%% of %d near-boundary samples within %.2f of the exact projection (>=95%%), max distance %.3g; "
              "idempotence failures %d of %d",
              100.0 * frac, total, 1e-2 * u_max, worst, idem_fail, idem_total)};
}

Outcome c12_latency() {
  const auto model = shared_model();
  const auto table = sim::bench_latency(stationary(sim::ControllerKind::kLmpc), *model, 200);
  const auto* nn = table.find("nn");
  const auto* lm = table.find("lmpc");
  const auto* nl = table.find("nmpc");
  const auto* np = table.find("nn+projection");
  if (!nn || !lm || !nl) return {false, "latency table incomplete"};
  return {nn->median_s <= lm->median_s / 10.0 && nl->median_s > lm->median_s,
          fmt("median NMPC %.3g s, LMPC %.3g s, network %.3g s (%.0fx faster than LMPC, >=10x), network+projection "
              "%.3g s",
              nl->median_s, lm->median_s, nn->median_s, lm->median_s / nn->median_s, np ? np->median_s : NAN)};
}

Outcome c13_moving_target() {
  sim::Scenario sc = sim::preset("moving");
  sc.controller = sim::ControllerKind::kNnIm;
  sc.noise_std = 0.1;
  sc.model = shared_model();
  const auto rec = sim::run_closed_loop(sc);
  if (rec.aborted) return {false, "run aborted: " + rec.abort_reason};
  const auto m = sim::steady_state_metrics(rec, sc.pattern, 20.0);
  return {m.range_err <= 0.15, fmt("mean |r - r_d| over the last 20 s = %.4f m (<=0.15); height %.4f m, speed %.4f m/s",
                                   m.range_err, m.height_err, m.speed_err)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int criterion = 0;
  bool prepare = false;
  std::string work = "acceptance_artifacts";
  app.add_option("--criterion", criterion, "criterion number 1..13");
  app.add_flag("--prepare", prepare, "collect samples and train the shared model");
  app.add_option("--work", work, "artifact directory");
  CLI11_PARSE(app, argc, argv);
  g_work = work;

  if (prepare) {
    try {
      const json j = prepare_model();
      std::printf("prepare: %zu samples, collect %.0f s, train %.0f s\n", j.at("samples").get<std::size_t>(),
                  j.at("collect_s").get<double>(), j.at("train_s").get<double>());
      return j.at("aborted").get<bool>() ? 1 : 0;
    } catch (const std::exception& e) {
      std::printf("prepare: FAIL (%s)\n", e.what());
      return 1;
    }
  }

  const std::vector<std::function<Outcome()>> table{
      c1_norm_identity, c2_lyapunov_rate, c3_beta_ordering, c4_condensed_oracle, c5_qp_certification,
      c6_lmpc_closed_loop, c7_nmpc_ordering, c8_fidelity, c9_distilled_im, c10_im_scalar,
      c11_projection, c12_latency, c13_moving_target};
  if (criterion < 1 || criterion > static_cast<int>(table.size())) {
    std::fprintf(stderr, "--criterion must be 1..%zu\n", table.size());
    return 2;
  }
  Outcome out;
  try {
    out = table[static_cast<std::size_t>(criterion - 1)]();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  std::printf("criterion %d: %s %s\n", criterion, out.pass ? "PASS" : "FAIL", out.detail.c_str());
  return out.pass ? 0 : 1;
}
