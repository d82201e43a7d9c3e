#include "lgvmpc/sim_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

namespace lgvmpc::sim {

using guidance::ReferenceTrajectory;
using guidance::TargetState;

const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::kNmpc: return "nmpc";
    case ControllerKind::kLmpc: return "lmpc";
    case ControllerKind::kNn: return "nn";
    case ControllerKind::kNnIm: return "nn-im";
    case ControllerKind::kPid: return "pid";
  }
  return "?";
}

ControllerKind parse_controller(const std::string& name) {
  for (ControllerKind k : {ControllerKind::kNmpc, ControllerKind::kLmpc, ControllerKind::kNn, ControllerKind::kNnIm,
                           ControllerKind::kPid}) {
    if (name == to_string(k)) return k;
  }
  throw Fault(FaultKind::kConfig, "unknown controller '" + name + "' (expected nmpc|lmpc|nn|nn-im|pid)");
}

Vec3 TargetMotion::velocity(double t) const {
  if (!scripted) return Vec3::Zero();
  Vec3 v;
  for (int i = 0; i < 3; ++i) v[i] = amplitude[i] * std::sin(frequency[i] * t + phase[i]);
  return v;
}

void Scenario::validate() const {
  if (!(duration > 0.0) || !std::isfinite(duration)) throw Fault(FaultKind::kConfig, "duration must be positive");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw Fault(FaultKind::kConfig, "noise_std must be >= 0");
  if (!(im_engage > 0.0)) throw Fault(FaultKind::kConfig, "im_engage must be positive");
  if (!std::isfinite(im_period)) throw Fault(FaultKind::kConfig, "im_period must be finite");
  if (projection_sweeps < 1) throw Fault(FaultKind::kConfig, "projection_sweeps must be >= 1");
  pattern.validate();
  mpc.validate();
  quad.validate();
  if (mpc.u_max != quad.u_max) throw Fault(FaultKind::kConfig, "mpc.u_max and quad.u_max differ");
  guidance::ImState::with_defaults(pattern.r_d, im_c1, im_c2);
  if (!uav_position.allFinite() || !std::isfinite(uav_yaw) || !target.initial_position.allFinite()) {
    throw Fault(FaultKind::kConfig, "initial positions must be finite");
  }
  if (steps() < 1) throw Fault(FaultKind::kConfig, "duration shorter than one step");
}

int Scenario::steps() const { return static_cast<int>(std::llround(duration / quad.tau)); }

std::vector<std::string> preset_names() {
  return {"stationary-ne", "stationary-nw", "stationary-sw", "stationary-se", "moving"};
}

Scenario preset(const std::string& name) {
  const double pi = std::numbers::pi;
  Scenario sc;
  sc.name = name;
  if (name == "stationary-ne") {
    sc.uav_position = Vec3(5.0, 5.0, 0.0);
    sc.uav_yaw = 0.0;
  } else if (name == "stationary-nw") {
    sc.uav_position = Vec3(-5.0, 5.0, 0.0);
    sc.uav_yaw = -pi / 12.0;
  } else if (name == "stationary-sw") {
    sc.uav_position = Vec3(-5.0, -5.0, 0.0);
    sc.uav_yaw = pi / 12.0;
  } else if (name == "stationary-se") {
    sc.uav_position = Vec3(5.0, -5.0, 0.0);
    sc.uav_yaw = -pi / 6.0;
  } else if (name == "moving") {
    sc.uav_position = Vec3(5.0, -5.0, 0.0);
    sc.uav_yaw = -pi / 6.0;
    sc.target.scripted = true;
    sc.noise_std = 0.1;
    sc.controller = ControllerKind::kNnIm;
  } else {
    throw Fault(FaultKind::kConfig, "unknown preset '" + name + "'");
  }
  return sc;
}

// ---- controllers

namespace {

class MpcAdapter final : public Controller {
 public:
  MpcAdapter(const Scenario& sc, bool nonlinear)
      : nonlinear_(nonlinear), lmpc_(sc.mpc, sc.quad), nmpc_(sc.mpc, sc.quad) {}

  Vec4 compute(const StateVec& x, const ReferenceTrajectory& ref, const TargetState&,
               StepDiagnostics& diag) override {
    const mpc::ControlResult res = nonlinear_ ? nmpc_.control(x, ref) : lmpc_.control(x, ref);
    diag.qp_status = static_cast<int>(res.diag.qp_status);
    diag.qp_iterations = res.diag.qp_iterations;
    diag.fallback = res.diag.fallback;
    diag.state_violation = res.diag.state_violation;
    return res.u;
  }

  void applied(const Vec4& u) override {
    if (nonlinear_) {
      nmpc_.set_previous_input(u);
    } else {
      lmpc_.set_previous_input(u);
    }
  }

  const char* name() const override { return nonlinear_ ? "nmpc" : "lmpc"; }

 private:
  bool nonlinear_;
  mpc::LmpcController lmpc_;
  mpc::NmpcController nmpc_;
};

class NetworkController final : public Controller {
 public:
  NetworkController(const Scenario& sc, bool with_projection)
      : model_(sc.model),
        quad_(sc.quad),
        angle_limit_(sc.mpc.angle_limit),
        projection_(with_projection),
        sweeps_(sc.projection_sweeps),
        u_prev_(dynamics::hover_input(sc.quad)) {
    if (!model_) throw Fault(FaultKind::kConfig, "network controller needs a model");
    if (model_->layer_dims.front() != learning::kFeatureDim || model_->layer_dims.back() != kInputDim) {
      throw Fault(FaultKind::kDimension, "model must map 18 features to 4 inputs");
    }
  }

  Vec4 compute(const StateVec& x, const ReferenceTrajectory& ref, const TargetState& target,
               StepDiagnostics& diag) override {
    const Vec4 u_hat = learning::mlp_forward(*model_, learning::encode_features(x, ref, target.p_o));
    if (!u_hat.allFinite()) throw Fault(FaultKind::kNonFinite, "network output is not finite");
    if (!projection_) return u_hat;
    const auto lin = dynamics::linearize(x, u_prev_, quad_);
    const auto fs = projection::build_feasible_set(lin, x, angle_limit_, quad_.u_max);
    const auto pr = projection::project_policy_output(u_hat, fs, sweeps_);
    diag.projection_residual = pr.max_violation;
    diag.projection_flagged = pr.flagged;
    diag.preview_infeasible = fs.preview_infeasible;
    return pr.u;
  }

  void applied(const Vec4& u) override { u_prev_ = u; }
  const char* name() const override { return "nn"; }

 private:
  std::shared_ptr<const learning::MlpModel> model_;
  dynamics::QuadParams quad_;
  double angle_limit_;
  bool projection_;
  int sweeps_;
  Vec4 u_prev_;
};

class PidController final : public Controller {
 public:
  explicit PidController(const Scenario& sc) : gains_(sc.pid), quad_(sc.quad) {}

  Vec4 compute(const StateVec& x, const ReferenceTrajectory& ref, const TargetState&, StepDiagnostics&) override {
    return pid_baseline(x, ref, gains_, quad_, &state_);
  }
  const char* name() const override { return "pid"; }

 private:
  PidGains gains_;
  dynamics::QuadParams quad_;
  PidState state_;
};

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

}  // namespace

std::unique_ptr<Controller> make_controller(const Scenario& sc) {
  switch (sc.controller) {
    case ControllerKind::kLmpc: return std::make_unique<MpcAdapter>(sc, false);
    case ControllerKind::kNmpc: return std::make_unique<MpcAdapter>(sc, true);
    case ControllerKind::kNn:
    case ControllerKind::kNnIm: return std::make_unique<NetworkController>(sc, sc.projection);
    case ControllerKind::kPid: return std::make_unique<PidController>(sc);
  }
  throw Fault(FaultKind::kConfig, "unknown controller kind");
}

Vec4 pid_baseline(const StateVec& x, const ReferenceTrajectory& ref, const PidGains& gains,
                  const dynamics::QuadParams& params, PidState* state) {
  if (ref.states.empty()) throw Fault(FaultKind::kDimension, "PID needs a reference state");
  const StateVec& r = ref.states[0];
  const Vec3 pos = x.segment<3>(idx::kPos), vel = x.segment<3>(idx::kVel);
  const Vec3 eta = x.segment<3>(idx::kAngle), eta_dot = x.segment<3>(idx::kRate);
  const Vec3 e = r.segment<3>(idx::kPos) - pos;
  const Vec3 ev = r.segment<3>(idx::kVel) - vel;

  Vec3 acc = gains.kp_pos.cwiseProduct(e) + gains.kd_pos.cwiseProduct(ev);
  if (state) {
    state->integral = (state->integral + params.tau * e).cwiseMax(-2.0).cwiseMin(2.0);
    acc += gains.ki_pos.cwiseProduct(state->integral);
  }
  Vec3 f = params.mass * (acc - params.gravity) + params.linear_drag.cwiseProduct(vel);
  f[2] = std::max(f[2], 0.1 * params.mass * -params.gravity[2]);
  const double fn = f.norm();

  const double psi = eta[2];
  const double s_phi = std::clamp((f[0] * std::sin(psi) - f[1] * std::cos(psi)) / fn, -1.0, 1.0);
  const double phi_d = std::clamp(std::asin(s_phi), -gains.max_tilt, gains.max_tilt);
  const double theta_d =
      std::clamp(std::atan2(f[0] * std::cos(psi) + f[1] * std::sin(psi), f[2]), -gains.max_tilt, gains.max_tilt);
  const Vec3 eta_d(phi_d, theta_d, 0.0);

  const double thrust = f.dot(dynamics::rotation(eta).col(2));
  Vec3 err = eta_d - eta;
  err[2] = wrap_angle(err[2]);
  const Vec3 alpha = gains.kp_att.cwiseProduct(err) - gains.kd_att.cwiseProduct(eta_dot);
  const Vec3 torque =
      dynamics::euler_inertia(eta, params) * alpha + dynamics::coriolis(eta, eta_dot, params) * eta_dot;

  Vec4 wrench(thrust, torque[0], torque[1], torque[2]);
  const Vec4 u = dynamics::mixer_matrix(params).fullPivLu().solve(wrench);
  return u.cwiseMax(0.0).cwiseMin(params.u_max);
}

// ---- loop

namespace {

void fill_geometry(SimStep& s) {
  const Vec3 rel = s.x.segment<3>(idx::kPos) - s.target.p_o;
  const Vec3 rel_v = s.x.segment<3>(idx::kVel) - s.target.v_o;
  s.range = std::hypot(rel[0], rel[1]);
  s.height = rel[2];
  s.speed = std::hypot(rel_v[0], rel_v[1]);
}

}  // namespace

SimRecord run_closed_loop(const Scenario& sc) {
  sc.validate();
  SimRecord rec;
  rec.tau = sc.quad.tau;
  const double tau = sc.quad.tau;
  const int n_steps = sc.steps();
  rec.steps.reserve(static_cast<std::size_t>(n_steps));
  rec.solve_times.reserve(static_cast<std::size_t>(n_steps));

  std::unique_ptr<Controller> ctl = make_controller(sc);
  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  StateVec x = StateVec::Zero();
  x.segment<3>(idx::kPos) = sc.uav_position;
  x[idx::kYaw] = sc.uav_yaw;
  TargetState tgt;
  tgt.p_o = sc.target.initial_position;
  tgt.v_o = sc.target.velocity(0.0);

  const bool use_im = sc.controller == ControllerKind::kNnIm;
  guidance::ImState im = guidance::ImState::with_defaults(sc.pattern.r_d, sc.im_c1, sc.im_c2);
  double r_d_eff = sc.pattern.r_d;
  const int im_steps = std::max(
      1, static_cast<int>(std::llround(
             (sc.im_period > 0.0 ? sc.im_period : 2.0 * std::numbers::pi * sc.pattern.r_d / sc.pattern.v_d) / tau)));
  bool im_engaged = false;
  double range_sum = 0.0;
  int range_count = 0;

  for (int k = 0; k < n_steps; ++k) {
    SimStep step;
    step.t = k * tau;
    step.x = x;
    step.target = tgt;
    fill_geometry(step);
    try {
      if (use_im) {
        if (!im_engaged && std::abs(step.range - sc.pattern.r_d) <= sc.im_engage) im_engaged = true;
        if (im_engaged) {
          range_sum += step.range;
          if (++range_count == im_steps) {
            const auto upd = guidance::im_update(im, range_sum / range_count, sc.pattern.r_d);
            im = upd.state;
            r_d_eff = upd.r_d_eff;
            range_sum = 0.0;
            range_count = 0;
          }
        }
      }
      step.r_d_eff = r_d_eff;
      const ReferenceTrajectory ref =
          guidance::plan_trajectory(x.segment<3>(idx::kPos), tgt, sc.pattern, r_d_eff, sc.mpc.n_p, tau);
      step.reference = ref.states[0];

      const auto t0 = std::chrono::steady_clock::now();
      Vec4 u = ctl->compute(x, ref, tgt, step.diag);
      rec.solve_times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());

      if (sc.noise_std > 0.0) {
        for (int i = 0; i < kInputDim; ++i) u[i] += sc.noise_std * noise(rng);
      }
      u = projection::clamp_box(u, sc.quad.u_max);
      ctl->applied(u);
      step.u = u;
      rec.steps.push_back(step);

      x = dynamics::step_euler(x, u, sc.quad);
      if (!dynamics::attitude_valid(x)) {
        throw Fault(FaultKind::kSingularAttitude, "roll/pitch reached pi/2 at t=" + std::to_string(step.t + tau));
      }
    } catch (const Fault& e) {
      rec.aborted = true;
      rec.abort_reason = e.what();
      break;
    }
    // Trapezoidal rule on the scripted velocity.
    const Vec3 v_next = sc.target.velocity((k + 1) * tau);
    tgt.p_o += 0.5 * tau * (tgt.v_o + v_next);
    tgt.v_o = v_next;
  }
  return rec;
}

SteadyStateMetrics steady_state_metrics(const SimRecord& rec, const guidance::TrackingPattern& pat, double window) {
  const double span = static_cast<double>(rec.steps.size()) * rec.tau;
  if (!(window > 0.0) || span <= window) {
    throw Fault(FaultKind::kConfig, "record (" + std::to_string(span) + " s) is not longer than the window");
  }
  const auto n = static_cast<std::size_t>(std::llround(window / rec.tau));
  SteadyStateMetrics m;
  m.samples = n;
  for (std::size_t i = rec.steps.size() - n; i < rec.steps.size(); ++i) {
    const SimStep& s = rec.steps[i];
    m.range_err += std::abs(s.range - pat.r_d);
    m.height_err += std::abs(s.height - pat.z_d);
    m.speed_err += std::abs(s.speed - pat.v_d);
  }
  m.range_err /= static_cast<double>(n);
  m.height_err /= static_cast<double>(n);
  m.speed_err /= static_cast<double>(n);
  return m;
}

double max_overshoot(const SimRecord& rec, double r_d) {
  if (rec.steps.empty()) return 0.0;
  const double side = rec.steps.front().range >= r_d ? 1.0 : -1.0;
  bool crossed = false;
  double worst = 0.0;
  for (const SimStep& s : rec.steps) {
    const double beyond = side * (r_d - s.range);
    if (beyond >= 0.0) crossed = true;
    if (crossed) worst = std::max(worst, beyond);
  }
  return worst;
}

// ---- latency

const LatencyRow* LatencyTable::find(const std::string& name) const {
  for (const LatencyRow& r : rows) {
    if (r.controller == name) return &r;
  }
  return nullptr;
}

namespace {

LatencyRow summarize(const std::string& name, std::vector<double> t) {
  LatencyRow row;
  row.controller = name;
  row.calls = t.size();
  if (t.empty()) return row;
  std::sort(t.begin(), t.end());
  const std::size_t n = t.size();
  row.median_s = n % 2 ? t[n / 2] : 0.5 * (t[n / 2 - 1] + t[n / 2]);
  row.p95_s = t[std::min(n - 1, static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1)];
  return row;
}

struct BenchPoint {
  StateVec x;
  ReferenceTrajectory ref;
  TargetState target;
  Vec4 u_applied;
};

}  // namespace

LatencyTable bench_latency(const Scenario& sc, const learning::MlpModel& model, int n_calls, int warmup) {
  LatencyTable table;
  if (n_calls <= 0) return table;
  Scenario base = sc;
  base.controller = ControllerKind::kLmpc;
  base.noise_std = 0.0;
  base.duration = (n_calls + warmup) * sc.quad.tau;
  const SimRecord rec = run_closed_loop(base);

  std::vector<BenchPoint> pts;
  for (const SimStep& s : rec.steps) {
    const auto ref = guidance::plan_trajectory(s.x.segment<3>(idx::kPos), s.target, sc.pattern, s.r_d_eff,
                                               sc.mpc.n_p, sc.quad.tau);
    pts.push_back({s.x, ref, s.target, s.u});
  }

  using clock = std::chrono::steady_clock;
  auto time_controller = [&](const std::string& name, Controller& c) {
    std::vector<double> t;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      StepDiagnostics d;
      const auto t0 = clock::now();
      const Vec4 u = c.compute(pts[i].x, pts[i].ref, pts[i].target, d);
      const double dt = std::chrono::duration<double>(clock::now() - t0).count();
      (void)u;
      c.applied(pts[i].u_applied);
      if (static_cast<int>(i) >= warmup) t.push_back(dt);
    }
    table.rows.push_back(summarize(name, std::move(t)));
  };

  Scenario cfg = sc;
  cfg.model = std::make_shared<const learning::MlpModel>(model);
  MpcAdapter nmpc(cfg, true), lmpc(cfg, false);
  time_controller("nmpc", nmpc);
  time_controller("lmpc", lmpc);

  // Bare network forward pass on the same features.
  {
    learning::MlpWorkspace ws;
    std::vector<double> t;
    volatile double sink = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const learning::Features s = learning::encode_features(pts[i].x, pts[i].ref, pts[i].target.p_o);
      const auto t0 = clock::now();
      const Eigen::VectorXd y = learning::mlp_forward(model, std::span<const double>(s.data(), s.size()), ws);
      const double dt = std::chrono::duration<double>(clock::now() - t0).count();
      sink = sink + y[0];
      if (static_cast<int>(i) >= warmup) t.push_back(dt);
    }
    table.rows.push_back(summarize("nn", std::move(t)));
  }
  NetworkController nn_proj(cfg, true);
  time_controller("nn+projection", nn_proj);
  return table;
}

void write_record_csv(const SimRecord& rec, std::ostream& os, const std::string& meta_line) {
  if (!meta_line.empty()) os << "# " << meta_line << '\n';
  os << "t,x,y,z,roll,pitch,yaw,vx,vy,vz,roll_rate,pitch_rate,yaw_rate,"
        "target_x,target_y,target_z,target_vx,target_vy,target_vz,u0,u1,u2,u3,"
        "ref_x,ref_y,ref_z,ref_vx,ref_vy,ref_vz,range,height,speed,r_d_eff,"
        "qp_status,qp_iterations,fallback,state_violation,projection_residual,projection_flagged\n";
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (const SimStep& s : rec.steps) {
    num(s.t);
    for (int i = 0; i < kStateDim; ++i) os << ',', num(s.x[i]);
    for (int i = 0; i < 3; ++i) os << ',', num(s.target.p_o[i]);
    for (int i = 0; i < 3; ++i) os << ',', num(s.target.v_o[i]);
    for (int i = 0; i < kInputDim; ++i) os << ',', num(s.u[i]);
    for (int i = 0; i < 3; ++i) os << ',', num(s.reference[idx::kPos + i]);
    for (int i = 0; i < 3; ++i) os << ',', num(s.reference[idx::kVel + i]);
    os << ',', num(s.range);
    os << ',', num(s.height);
    os << ',', num(s.speed);
    os << ',', num(s.r_d_eff);
    os << ',' << s.diag.qp_status << ',' << s.diag.qp_iterations << ',' << (s.diag.fallback ? 1 : 0) << ','
       << (s.diag.state_violation ? 1 : 0) << ',';
    num(s.diag.projection_residual);
    os << ',' << (s.diag.projection_flagged ? 1 : 0) << '\n';
  }
}

}  // namespace lgvmpc::sim
