#include "lgvmpc/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace lgvmpc::config {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
  throw Fault(FaultKind::kConfig, "config field '" + path + "': " + msg);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad(path.empty() ? "<root>" : path, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!ok.count(it.key())) bad(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
  }
}

std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

void read(const json& obj, const std::string& path, const char* key, double& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number()) bad(join(path, key), "expected a number");
  out = v.get<double>();
}

void read(const json& obj, const std::string& path, const char* key, int& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) bad(join(path, key), "expected an integer");
  out = v.get<int>();
}

void read(const json& obj, const std::string& path, const char* key, std::uint64_t& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) bad(join(path, key), "expected a nonnegative integer");
  out = v.get<std::uint64_t>();
}

void read(const json& obj, const std::string& path, const char* key, bool& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_boolean()) bad(join(path, key), "expected true or false");
  out = v.get<bool>();
}

void read(const json& obj, const std::string& path, const char* key, std::string& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_string()) bad(join(path, key), "expected a string");
  out = v.get<std::string>();
}

template <class Vec>
void read_vec(const json& obj, const std::string& path, const char* key, Vec& out, int n) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_array() || static_cast<int>(v.size()) != n) bad(join(path, key), "expected an array of " + std::to_string(n) + " numbers");
  out.resize(n);
  for (int i = 0; i < n; ++i) {
    if (!v[i].is_number()) bad(join(path, key) + "[" + std::to_string(i) + "]", "expected a number");
    out[i] = v[i].get<double>();
  }
}

void read_vec3(const json& obj, const std::string& path, const char* key, Vec3& out) {
  Eigen::VectorXd tmp = out;
  read_vec(obj, path, key, tmp, 3);
  out = tmp;
}

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source, const std::string& preset_override) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Fault(FaultKind::kParse, source + ": " + e.what());
  }
  check_keys(root, "", {"name", "preset", "controller", "duration", "seed", "noise_std", "target", "uav", "pattern",
                        "mpc", "quad", "im", "pid", "projection", "model", "metrics_window", "collect", "train"});

  RunConfig cfg;
  if (!preset_override.empty()) root["preset"] = preset_override;
  if (root.contains("preset")) {
    std::string name;
    read(root, "", "preset", name);
    try {
      cfg.scenario = sim::preset(name);
    } catch (const Fault& e) {
      bad("preset", e.what());
    }
  }
  sim::Scenario& sc = cfg.scenario;
  read(root, "", "name", sc.name);
  if (root.contains("controller")) {
    std::string c;
    read(root, "", "controller", c);
    try {
      sc.controller = sim::parse_controller(c);
    } catch (const Fault& e) {
      bad("controller", e.what());
    }
  }
  read(root, "", "duration", sc.duration);
  read(root, "", "seed", sc.seed);
  read(root, "", "noise_std", sc.noise_std);
  read(root, "", "model", cfg.model_path);
  read(root, "", "metrics_window", cfg.metrics_window);

  if (root.contains("target")) {
    const json& t = root.at("target");
    check_keys(t, "target", {"scripted", "position", "amplitude", "frequency", "phase"});
    read(t, "target", "scripted", sc.target.scripted);
    read_vec3(t, "target", "position", sc.target.initial_position);
    read_vec3(t, "target", "amplitude", sc.target.amplitude);
    read_vec3(t, "target", "frequency", sc.target.frequency);
    read_vec3(t, "target", "phase", sc.target.phase);
  }
  if (root.contains("uav")) {
    const json& u = root.at("uav");
    check_keys(u, "uav", {"position", "yaw"});
    read_vec3(u, "uav", "position", sc.uav_position);
    read(u, "uav", "yaw", sc.uav_yaw);
  }
  if (root.contains("pattern")) {
    const json& p = root.at("pattern");
    check_keys(p, "pattern", {"r_d", "z_d", "v_d", "v_z", "beta", "direction"});
    read(p, "pattern", "r_d", sc.pattern.r_d);
    read(p, "pattern", "z_d", sc.pattern.z_d);
    read(p, "pattern", "v_d", sc.pattern.v_d);
    read(p, "pattern", "v_z", sc.pattern.v_z);
    read(p, "pattern", "beta", sc.pattern.beta);
    if (p.contains("direction")) {
      std::string d;
      read(p, "pattern", "direction", d);
      if (d == "ccw") {
        sc.pattern.direction = guidance::Direction::kCounterClockwise;
      } else if (d == "cw") {
        sc.pattern.direction = guidance::Direction::kClockwise;
      } else {
        bad("pattern.direction", "expected \"ccw\" or \"cw\"");
      }
    }
  }
  if (root.contains("mpc")) {
    const json& m = root.at("mpc");
    check_keys(m, "mpc", {"n_p", "n_c", "q_diag", "r_diag", "angle_limit", "u_max"});
    read(m, "mpc", "n_p", sc.mpc.n_p);
    read(m, "mpc", "n_c", sc.mpc.n_c);
    read_vec(m, "mpc", "q_diag", sc.mpc.q_diag, kStateDim);
    read_vec(m, "mpc", "r_diag", sc.mpc.r_diag, kInputDim);
    read(m, "mpc", "angle_limit", sc.mpc.angle_limit);
    read(m, "mpc", "u_max", sc.mpc.u_max);
  }
  if (root.contains("quad")) {
    const json& q = root.at("quad");
    check_keys(q, "quad", {"mass", "gravity", "arm_length", "thrust_coeff", "drag_coeff", "inertia", "linear_drag",
                           "u_max", "tau"});
    read(q, "quad", "mass", sc.quad.mass);
    read_vec3(q, "quad", "gravity", sc.quad.gravity);
    read(q, "quad", "arm_length", sc.quad.arm_length);
    read(q, "quad", "thrust_coeff", sc.quad.thrust_coeff);
    read(q, "quad", "drag_coeff", sc.quad.drag_coeff);
    read_vec3(q, "quad", "inertia", sc.quad.inertia);
    read_vec3(q, "quad", "linear_drag", sc.quad.linear_drag);
    read(q, "quad", "u_max", sc.quad.u_max);
    read(q, "quad", "tau", sc.quad.tau);
    // One bound for both the model and the controller unless mpc sets it.
    if (q.contains("u_max") && !(root.contains("mpc") && root.at("mpc").contains("u_max"))) {
      sc.mpc.u_max = sc.quad.u_max;
    }
  }
  if (root.contains("im")) {
    const json& im = root.at("im");
    check_keys(im, "im", {"c1", "c2", "period", "engage"});
    read(im, "im", "c1", sc.im_c1);
    read(im, "im", "c2", sc.im_c2);
    read(im, "im", "period", sc.im_period);
    read(im, "im", "engage", sc.im_engage);
  }
  if (root.contains("pid")) {
    const json& p = root.at("pid");
    check_keys(p, "pid", {"kp_pos", "kd_pos", "ki_pos", "kp_att", "kd_att", "max_tilt"});
    read_vec3(p, "pid", "kp_pos", sc.pid.kp_pos);
    read_vec3(p, "pid", "kd_pos", sc.pid.kd_pos);
    read_vec3(p, "pid", "ki_pos", sc.pid.ki_pos);
    read_vec3(p, "pid", "kp_att", sc.pid.kp_att);
    read_vec3(p, "pid", "kd_att", sc.pid.kd_att);
    read(p, "pid", "max_tilt", sc.pid.max_tilt);
  }
  if (root.contains("projection")) {
    const json& p = root.at("projection");
    check_keys(p, "projection", {"enabled", "sweeps"});
    read(p, "projection", "enabled", sc.projection);
    read(p, "projection", "sweeps", sc.projection_sweeps);
  }
  if (root.contains("collect")) {
    const json& c = root.at("collect");
    check_keys(c, "collect", {"teacher", "rollouts", "steps_per_rollout", "threads", "r_d_jitter"});
    read(c, "collect", "r_d_jitter", cfg.collect.r_d_jitter);
    if (c.contains("teacher")) {
      std::string t;
      read(c, "collect", "teacher", t);
      if (t == "lmpc") {
        cfg.collect.teacher = learning::Teacher::kLmpc;
      } else if (t == "nmpc") {
        cfg.collect.teacher = learning::Teacher::kNmpc;
      } else {
        bad("collect.teacher", "expected \"lmpc\" or \"nmpc\"");
      }
    }
    read(c, "collect", "rollouts", cfg.collect.n_rollouts);
    read(c, "collect", "steps_per_rollout", cfg.collect.steps_per_rollout);
    read(c, "collect", "threads", cfg.collect.threads);
  }
  if (root.contains("train")) {
    const json& t = root.at("train");
    check_keys(t, "train", {"epochs", "batch", "split", "hidden", "lr", "leaky_slope"});
    read(t, "train", "epochs", cfg.train.epochs);
    read(t, "train", "batch", cfg.train.batch);
    read(t, "train", "split", cfg.train.split);
    read(t, "train", "lr", cfg.train.lr);
    read(t, "train", "leaky_slope", cfg.train.leaky_slope);
    if (t.contains("hidden")) {
      const json& h = t.at("hidden");
      if (!h.is_array() || h.empty()) bad("train.hidden", "expected a nonempty array of integers");
      cfg.train.hidden.clear();
      for (std::size_t i = 0; i < h.size(); ++i) {
        if (!h[i].is_number_integer() || h[i].get<int>() < 1) {
          bad("train.hidden[" + std::to_string(i) + "]", "expected a positive integer");
        }
        cfg.train.hidden.push_back(h[i].get<int>());
      }
    }
  }
  sync_derived(cfg);
  try {
    sc.validate();
  } catch (const Fault& e) {
    throw Fault(FaultKind::kConfig, source + ": " + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path, const std::string& preset_override) {
  std::ifstream is(path);
  if (!is) throw Fault(FaultKind::kConfig, "cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path, preset_override);
}

void sync_derived(RunConfig& cfg) {
  cfg.collect.pattern = cfg.scenario.pattern;
  cfg.collect.mpc = cfg.scenario.mpc;
  cfg.collect.quad = cfg.scenario.quad;
  cfg.collect.seed = cfg.scenario.seed;
  cfg.train.seed = cfg.scenario.seed;
}

json to_json(const RunConfig& cfg) {
  const sim::Scenario& sc = cfg.scenario;
  json j;
  j["name"] = sc.name;
  j["controller"] = sim::to_string(sc.controller);
  j["duration"] = sc.duration;
  j["seed"] = sc.seed;
  j["noise_std"] = sc.noise_std;
  j["model"] = cfg.model_path;
  j["metrics_window"] = cfg.metrics_window;
  j["target"] = {{"scripted", sc.target.scripted},
                 {"position", vec_json(sc.target.initial_position)},
                 {"amplitude", vec_json(sc.target.amplitude)},
                 {"frequency", vec_json(sc.target.frequency)},
                 {"phase", vec_json(sc.target.phase)}};
  j["uav"] = {{"position", vec_json(sc.uav_position)}, {"yaw", sc.uav_yaw}};
  j["pattern"] = {{"r_d", sc.pattern.r_d},
                  {"z_d", sc.pattern.z_d},
                  {"v_d", sc.pattern.v_d},
                  {"v_z", sc.pattern.v_z},
                  {"beta", sc.pattern.beta},
                  {"direction", sc.pattern.direction == guidance::Direction::kClockwise ? "cw" : "ccw"}};
  j["mpc"] = {{"n_p", sc.mpc.n_p},
              {"n_c", sc.mpc.n_c},
              {"q_diag", vec_json(sc.mpc.q_diag)},
              {"r_diag", vec_json(sc.mpc.r_diag)},
              {"angle_limit", sc.mpc.angle_limit},
              {"u_max", sc.mpc.u_max}};
  j["quad"] = {{"mass", sc.quad.mass},
               {"gravity", vec_json(sc.quad.gravity)},
               {"arm_length", sc.quad.arm_length},
               {"thrust_coeff", sc.quad.thrust_coeff},
               {"drag_coeff", sc.quad.drag_coeff},
               {"inertia", vec_json(sc.quad.inertia)},
               {"linear_drag", vec_json(sc.quad.linear_drag)},
               {"u_max", sc.quad.u_max},
               {"tau", sc.quad.tau}};
  j["im"] = {{"c1", sc.im_c1}, {"c2", sc.im_c2}, {"period", sc.im_period}, {"engage", sc.im_engage}};
  j["pid"] = {{"kp_pos", vec_json(sc.pid.kp_pos)}, {"kd_pos", vec_json(sc.pid.kd_pos)},
              {"ki_pos", vec_json(sc.pid.ki_pos)}, {"kp_att", vec_json(sc.pid.kp_att)},
              {"kd_att", vec_json(sc.pid.kd_att)}, {"max_tilt", sc.pid.max_tilt}};
  j["projection"] = {{"enabled", sc.projection}, {"sweeps", sc.projection_sweeps}};
  j["collect"] = {{"teacher", cfg.collect.teacher == learning::Teacher::kNmpc ? "nmpc" : "lmpc"},
                  {"rollouts", cfg.collect.n_rollouts},
                  {"steps_per_rollout", cfg.collect.steps_per_rollout},
                  {"r_d_jitter", cfg.collect.r_d_jitter}};
  j["train"] = {{"epochs", cfg.train.epochs}, {"batch", cfg.train.batch},
                {"split", cfg.train.split},   {"hidden", cfg.train.hidden},
                {"lr", cfg.train.lr},         {"leaky_slope", cfg.train.leaky_slope}};
  return j;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash(const RunConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json(cfg).dump())));
  return buf;
}

std::string meta_line(const RunConfig& cfg) {
  return "config_hash=" + config_hash(cfg) + " seed=" + std::to_string(cfg.scenario.seed);
}

}  // namespace lgvmpc::config
