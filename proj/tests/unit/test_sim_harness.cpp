#include <doctest.h>

#include "lgvmpc/sim_harness.hpp"

#include <cmath>
#include <sstream>

using namespace lgvmpc;
using namespace lgvmpc::sim;

namespace {

SimRecord synthetic(double r, double z, double v, int n) {
  SimRecord rec;
  rec.tau = 0.1;
  for (int k = 0; k < n; ++k) {
    SimStep s;
    s.t = 0.1 * k;
    s.range = r;
    s.height = z;
    s.speed = v;
    rec.steps.push_back(s);
  }
  return rec;
}

Scenario short_lmpc(double duration) {
  Scenario sc = preset("stationary-se");
  sc.duration = duration;
  return sc;
}

}  // namespace

TEST_CASE("scenario validation") {
  Scenario sc = preset("stationary-se");
  CHECK_NOTHROW(sc.validate());
  sc.duration = 0.0;
  CHECK_THROWS_AS(sc.validate(), Fault);
  CHECK_THROWS_AS(run_closed_loop(sc), Fault);
  sc = preset("stationary-se");
  sc.noise_std = -0.1;
  CHECK_THROWS_AS(sc.validate(), Fault);
  sc = preset("stationary-se");
  sc.controller = ControllerKind::kNn;
  CHECK_THROWS_AS(make_controller(sc), Fault);
}

TEST_CASE("presets and controller names") {
  const auto names = preset_names();
  CHECK(names.size() == 5u);
  CHECK(preset("stationary-ne").uav_position == Vec3(5, 5, 0));
  CHECK(preset("stationary-nw").uav_yaw == doctest::Approx(-M_PI / 12));
  CHECK(preset("stationary-sw").uav_position == Vec3(-5, -5, 0));
  CHECK(preset("stationary-se").uav_yaw == doctest::Approx(-M_PI / 6));
  const Scenario mv = preset("moving");
  CHECK(mv.target.scripted);
  CHECK(mv.noise_std == 0.1);
  CHECK_THROWS_AS(preset("nowhere"), Fault);
  for (auto k : {ControllerKind::kNmpc, ControllerKind::kLmpc, ControllerKind::kNn, ControllerKind::kNnIm,
                 ControllerKind::kPid}) {
    CHECK(parse_controller(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_controller("mpc"), Fault);
}

TEST_CASE("target velocity script") {
  TargetMotion tm;
  tm.scripted = true;
  const Vec3 v = tm.velocity(10.0);
  CHECK(v[0] == doctest::Approx(0.3 * std::sin(0.1 + M_PI / 6)));
  CHECK(v[1] == doctest::Approx(0.3 * std::cos(0.6)));
  CHECK(v[2] == doctest::Approx(0.1 * std::sin(1.5)));
  tm.scripted = false;
  CHECK(tm.velocity(3.0).norm() == 0.0);
}

TEST_CASE("steady state metrics on synthetic records") {
  guidance::TrackingPattern pat;
  auto m = steady_state_metrics(synthetic(2.0, 5.0, 1.0, 300), pat, 20.0);
  CHECK(m.range_err == 0.0);
  CHECK(m.height_err == 0.0);
  CHECK(m.speed_err == 0.0);
  CHECK(m.samples == 200u);
  m = steady_state_metrics(synthetic(2.05, 4.9, 1.2, 300), pat, 20.0);
  CHECK(m.range_err == doctest::Approx(0.05));
  CHECK(m.height_err == doctest::Approx(0.1));
  CHECK(m.speed_err == doctest::Approx(0.2));
  CHECK_THROWS_AS(steady_state_metrics(synthetic(2.0, 5.0, 1.0, 200), pat, 20.0), Fault);

  SimRecord rec = synthetic(5.0, 5.0, 1.0, 4);
  rec.steps[1].range = 1.7;
  rec.steps[2].range = 2.1;
  rec.steps[3].range = 1.9;
  CHECK(max_overshoot(rec, 2.0) == doctest::Approx(0.3));
}

TEST_CASE("pid baseline") {
  dynamics::QuadParams qp;
  PidGains g;
  guidance::ReferenceTrajectory ref;
  ref.states.assign(21, StateVec::Zero());
  const Vec4 u = pid_baseline(StateVec::Zero(), ref, g, qp);
  CHECK((u - dynamics::hover_input(qp)).cwiseAbs().maxCoeff() < 1e-9);

  StateVec x = StateVec::Zero();
  x.head<3>() = Vec3(30, -40, -20);
  PidState st;
  const Vec4 far = pid_baseline(x, ref, g, qp, &st);
  CHECK(far.minCoeff() >= 0.0);
  CHECK(far.maxCoeff() <= qp.u_max);
}

TEST_CASE("closed loop is deterministic and legal") {
  Scenario sc = short_lmpc(3.0);
  sc.noise_std = 0.1;
  const SimRecord a = run_closed_loop(sc);
  const SimRecord b = run_closed_loop(sc);
  REQUIRE_FALSE(a.aborted);
  REQUIRE(a.steps.size() == 30u);
  REQUIRE(b.steps.size() == a.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    CHECK(a.steps[i].x == b.steps[i].x);
    CHECK(a.steps[i].u == b.steps[i].u);
    CHECK(a.steps[i].t == doctest::Approx(0.1 * static_cast<double>(i)));
    CHECK(a.steps[i].u.minCoeff() >= 0.0);
    CHECK(a.steps[i].u.maxCoeff() <= sc.quad.u_max);
  }
  std::ostringstream o1, o2;
  write_record_csv(a, o1, "config_hash=0 seed=1");
  write_record_csv(b, o2, "config_hash=0 seed=1");
  CHECK(o1.str() == o2.str());
  CHECK(o1.str().rfind("# config_hash=0 seed=1", 0) == 0);

  sc.seed = 2;
  const SimRecord c = run_closed_loop(sc);
  CHECK(c.steps.back().x != a.steps.back().x);
}

TEST_CASE("scripted target follows the integrated velocity") {
  Scenario sc = short_lmpc(10.0);
  sc.controller = ControllerKind::kPid;
  sc.target.scripted = true;
  sc.target.initial_position = Vec3(1, 2, 0);
  const SimRecord rec = run_closed_loop(sc);
  REQUIRE_FALSE(rec.aborted);
  const TargetMotion& tm = sc.target;
  for (const SimStep& s : rec.steps) {
    Vec3 exact;
    for (int i = 0; i < 3; ++i) {
      exact[i] = tm.initial_position[i] +
                 tm.amplitude[i] / tm.frequency[i] * (std::cos(tm.phase[i]) - std::cos(tm.frequency[i] * s.t + tm.phase[i]));
    }
    // trapezoid truncation: t tau^2 max|v''| / 12
    CHECK((s.target.p_o - exact).cwiseAbs().maxCoeff() <= s.t * 0.1 * 0.1 * 2.25e-3 / 12 + 1e-12);
    CHECK((s.target.v_o - tm.velocity(s.t)).norm() < 1e-15);
  }
}

TEST_CASE("lmpc approaches the orbit") {
  const SimRecord rec = run_closed_loop(short_lmpc(30.0));
  REQUIRE_FALSE(rec.aborted);
  CHECK(std::abs(rec.steps.back().range - 2.0) < 0.3);
  CHECK(std::abs(rec.steps.back().height - 5.0) < 0.2);
  for (const SimStep& s : rec.steps) {
    CHECK(std::abs(s.x[idx::kRoll]) <= M_PI / 4 + 1e-3);
    CHECK(std::abs(s.x[idx::kPitch]) <= M_PI / 4 + 1e-3);
  }
}

TEST_CASE("latency table") {
  const auto model = learning::init_model({learning::kFeatureDim, 8, 4}, 0.01, 1, {4.9, 4.9, 4.9, 4.9});
  const Scenario sc = short_lmpc(2.0);
  CHECK(bench_latency(sc, model, 0).rows.empty());
  const LatencyTable t = bench_latency(sc, model, 3, 1);
  for (const char* name : {"nmpc", "lmpc", "nn"}) {
    const LatencyRow* row = t.find(name);
    REQUIRE(row != nullptr);
    CHECK(row->calls == 3u);
    CHECK(row->median_s > 0.0);
    CHECK(row->p95_s >= row->median_s);
  }
  CHECK(t.find("nope") == nullptr);
}
