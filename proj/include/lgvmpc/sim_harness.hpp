#pragma once

// Closed-loop standoff-tracking simulation: target motion, integral module,
// planner, controller, projection, input noise, saturation and the Euler
// quadrotor step, plus metrics, a cascaded PID baseline and latency timing.

#include "lgvmpc/common.hpp"
#include "lgvmpc/feasibility_projection.hpp"
#include "lgvmpc/lgv_guidance.hpp"
#include "lgvmpc/mpc_core.hpp"
#include "lgvmpc/policy_learning.hpp"
#include "lgvmpc/quad_dynamics.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lgvmpc::sim {

enum class ControllerKind { kNmpc, kLmpc, kNn, kNnIm, kPid };

const char* to_string(ControllerKind k);
// Accepts nmpc | lmpc | nn | nn-im | pid.
ControllerKind parse_controller(const std::string& name);

// v_o(t) = amplitude .* sin(frequency * t + phase) when scripted, else zero.
struct TargetMotion {
  bool scripted = false;
  Vec3 initial_position = Vec3::Zero();
  Vec3 amplitude{0.3, 0.3, 0.1};
  Vec3 frequency{0.01, 0.06, 0.15};
  Vec3 phase{0.5235987755982988, 1.5707963267948966, 0.0};

  Vec3 velocity(double t) const;
};

struct PidGains {
  Vec3 kp_pos{0.8, 0.8, 2.0};
  Vec3 kd_pos{1.6, 1.6, 2.4};
  Vec3 ki_pos{0.05, 0.05, 0.2};
  Vec3 kp_att{6.0, 6.0, 2.0};
  Vec3 kd_att{4.0, 4.0, 2.0};
  double max_tilt = 0.6;
};

struct Scenario {
  std::string name = "custom";
  TargetMotion target;
  Vec3 uav_position{5.0, -5.0, 0.0};
  double uav_yaw = -0.5235987755982988;
  guidance::TrackingPattern pattern;
  ControllerKind controller = ControllerKind::kLmpc;
  mpc::MpcConfig mpc;
  dynamics::QuadParams quad;
  double im_c1 = 0.2;
  double im_c2 = 0.2 / 1.1;
  // The integral module samples the mean range once per period and only
  // after r has first come within im_engage of r_d. A period <= 0 means one
  // nominal orbit, 2 pi r_d / v_d.
  double im_period = 0.0;
  double im_engage = 0.25;
  PidGains pid;
  bool projection = true;
  int projection_sweeps = 3;
  double noise_std = 0.0;
  double duration = 60.0;
  std::uint64_t seed = 1;
  std::shared_ptr<const learning::MlpModel> model;  // network controllers

  void validate() const;
  int steps() const;
};

// Named presets: stationary-ne, stationary-nw, stationary-sw, stationary-se,
// moving.
std::vector<std::string> preset_names();
Scenario preset(const std::string& name);

struct StepDiagnostics {
  int qp_status = 0;
  int qp_iterations = 0;
  bool fallback = false;
  bool state_violation = false;
  double projection_residual = 0.0;
  bool projection_flagged = false;
  bool preview_infeasible = false;
};

struct SimStep {
  double t = 0.0;
  StateVec x = StateVec::Zero();
  guidance::TargetState target;
  Vec4 u = Vec4::Zero();  // applied, after noise and saturation
  StateVec reference = StateVec::Zero();
  double range = 0.0;
  double height = 0.0;
  double speed = 0.0;  // horizontal speed relative to the target
  double r_d_eff = 0.0;
  StepDiagnostics diag;
};

struct SimRecord {
  double tau = 0.1;
  std::vector<SimStep> steps;
  std::vector<double> solve_times;  // controller wall-clock per step, s
  bool aborted = false;
  std::string abort_reason;
};

// Controller interface used by the loop. applied() is told the input that
// actually reached the rotors.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual Vec4 compute(const StateVec& x, const guidance::ReferenceTrajectory& ref,
                       const guidance::TargetState& target, StepDiagnostics& diag) = 0;
  virtual void applied(const Vec4& u) { (void)u; }
  virtual const char* name() const = 0;
};

std::unique_ptr<Controller> make_controller(const Scenario& sc);

SimRecord run_closed_loop(const Scenario& sc);

struct SteadyStateMetrics {
  double range_err = 0.0;
  double height_err = 0.0;
  double speed_err = 0.0;
  std::size_t samples = 0;
};

// Mean absolute deviations over the last `window` seconds. Throws
// Fault(kConfig) when the record is not longer than the window.
SteadyStateMetrics steady_state_metrics(const SimRecord& rec, const guidance::TrackingPattern& pat, double window);

// Largest excursion of r past r_d after r first reaches r_d, measured on the
// side opposite the start.
double max_overshoot(const SimRecord& rec, double r_d);

struct PidState {
  Vec3 integral = Vec3::Zero();
};

// Cascaded position -> attitude -> mixer loop. With state null the integral
// term is off.
Vec4 pid_baseline(const StateVec& x, const guidance::ReferenceTrajectory& ref, const PidGains& gains,
                  const dynamics::QuadParams& params, PidState* state = nullptr);

struct LatencyRow {
  std::string controller;
  std::size_t calls = 0;
  double median_s = 0.0;
  double p95_s = 0.0;
};

struct LatencyTable {
  std::vector<LatencyRow> rows;
  const LatencyRow* find(const std::string& name) const;
};

// Times NMPC, LMPC, network inference and network+projection on the same
// state sequence taken from an LMPC run of `sc`.
LatencyTable bench_latency(const Scenario& sc, const learning::MlpModel& model, int n_calls, int warmup = 5);

void write_record_csv(const SimRecord& rec, std::ostream& os, const std::string& meta_line);

}  // namespace lgvmpc::sim
