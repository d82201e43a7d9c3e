// lgvmpc: simulate | collect | train | eval | bench

#include "lgvmpc/config.hpp"
#include "lgvmpc/kernels.hpp"
#include "lgvmpc/policy_learning.hpp"
#include "lgvmpc/sim_harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lgvmpc;

namespace {

struct Flags {
  std::string config;
  std::string out = ".";
  std::string preset;
  std::string controller;
  std::string model;
  std::string dataset;
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  std::optional<int> epochs;
  int calls = 200;
  int threads = 0;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "seed override");
  cmd->add_option("--preset", f.preset, "scenario preset (stationary-ne|-nw|-sw|-se, moving)");
  cmd->add_option("--controller", f.controller, "nmpc|lmpc|nn|nn-im|pid");
}

config::RunConfig resolve(const Flags& f) {
  config::RunConfig cfg;
  if (!f.config.empty()) {
    if (!fs::exists(f.config)) throw Fault(FaultKind::kConfig, "config file not found: " + f.config);
    cfg = config::load_config(f.config, f.preset);
  } else if (!f.preset.empty()) {
    cfg = config::parse_config("{}", "flags", f.preset);
  }
  if (f.seed) cfg.scenario.seed = *f.seed;
  if (!f.controller.empty()) cfg.scenario.controller = sim::parse_controller(f.controller);
  if (!f.model.empty()) cfg.model_path = f.model;
  if (f.epochs) cfg.train.epochs = *f.epochs;
  if (f.samples) {
    if (*f.samples < 1) throw Fault(FaultKind::kConfig, "--samples must be >= 1");
    cfg.collect.n_rollouts = (*f.samples + cfg.collect.steps_per_rollout - 1) / cfg.collect.steps_per_rollout;
  }
  if (f.threads > 0) cfg.collect.threads = f.threads;
  config::sync_derived(cfg);
  cfg.scenario.validate();
  return cfg;
}

fs::path prepare_out(const Flags& f) {
  fs::path out(f.out);
  fs::create_directories(out);
  return out;
}

json meta(const config::RunConfig& cfg, const char* command) {
  return {{"config_hash", config::config_hash(cfg)}, {"seed", cfg.scenario.seed}, {"command", command}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Fault(FaultKind::kConfig, "cannot write " + path.string());
  os << j.dump(2) << '\n';
}

std::shared_ptr<const learning::MlpModel> require_model(const config::RunConfig& cfg) {
  if (cfg.model_path.empty()) throw Fault(FaultKind::kConfig, "this command needs --model (or \"model\" in the config)");
  if (!fs::exists(cfg.model_path)) throw Fault(FaultKind::kConfig, "model file not found: " + cfg.model_path);
  return std::make_shared<const learning::MlpModel>(learning::load_model(cfg.model_path));
}

int cmd_simulate(const Flags& f) {
  config::RunConfig cfg = resolve(f);
  const sim::ControllerKind kind = cfg.scenario.controller;
  if (kind == sim::ControllerKind::kNn || kind == sim::ControllerKind::kNnIm) cfg.scenario.model = require_model(cfg);
  const fs::path out = prepare_out(f);

  const sim::SimRecord rec = sim::run_closed_loop(cfg.scenario);
  {
    std::ofstream os(out / "run.csv");
    sim::write_record_csv(rec, os, config::meta_line(cfg));
  }

  json summary;
  summary["meta"] = meta(cfg, "simulate");
  summary["scenario"] = cfg.scenario.name;
  summary["controller"] = sim::to_string(kind);
  summary["steps"] = rec.steps.size();
  summary["aborted"] = rec.aborted;
  summary["abort_reason"] = rec.abort_reason;
  if (static_cast<double>(rec.steps.size()) * rec.tau > cfg.metrics_window) {
    const auto m = sim::steady_state_metrics(rec, cfg.scenario.pattern, cfg.metrics_window);
    summary["metrics"] = {{"window_s", cfg.metrics_window},
                          {"range_err", m.range_err},
                          {"height_err", m.height_err},
                          {"speed_err", m.speed_err}};
  } else {
    summary["metrics"] = nullptr;
  }
  int fallbacks = 0, violations = 0, flagged = 0;
  double max_residual = 0.0, max_roll = 0.0, max_pitch = 0.0, u_lo = 0.0, u_hi = 0.0;
  if (!rec.steps.empty()) u_lo = u_hi = rec.steps.front().u[0];
  for (const sim::SimStep& s : rec.steps) {
    fallbacks += s.diag.fallback;
    violations += s.diag.state_violation;
    flagged += s.diag.projection_flagged;
    max_residual = std::max(max_residual, s.diag.projection_residual);
    max_roll = std::max(max_roll, std::abs(s.x[idx::kRoll]));
    max_pitch = std::max(max_pitch, std::abs(s.x[idx::kPitch]));
    u_lo = std::min(u_lo, s.u.minCoeff());
    u_hi = std::max(u_hi, s.u.maxCoeff());
  }
  summary["diagnostics"] = {{"qp_fallbacks", fallbacks},         {"state_violations", violations},
                            {"projection_flagged", flagged},     {"max_projection_residual", max_residual},
                            {"max_abs_roll", max_roll},          {"max_abs_pitch", max_pitch},
                            {"u_min", u_lo},                     {"u_max", u_hi}};
  std::vector<double> t = rec.solve_times;
  std::sort(t.begin(), t.end());
  if (!t.empty()) {
    summary["latency"] = {{"median_s", t[t.size() / 2]},
                          {"p95_s", t[std::min(t.size() - 1, static_cast<std::size_t>(0.95 * t.size()))]},
                          {"mean_s", std::accumulate(t.begin(), t.end(), 0.0) / t.size()}};
  }
  summary["config"] = config::to_json(cfg);
  write_json(out / "summary.json", summary);

  std::printf("simulate: %zu steps, controller %s", rec.steps.size(), sim::to_string(kind));
  if (!summary["metrics"].is_null()) {
    std::printf(", range_err %.4f m, height_err %.4f m, speed_err %.4f m/s", summary["metrics"]["range_err"].get<double>(),
                summary["metrics"]["height_err"].get<double>(), summary["metrics"]["speed_err"].get<double>());
  }
  std::printf("\n");
  if (rec.aborted) {
    std::fprintf(stderr, "simulate: aborted: %s\n", rec.abort_reason.c_str());
    return 1;
  }
  return 0;
}

int cmd_collect(const Flags& f) {
  const config::RunConfig cfg = resolve(f);
  const fs::path out = prepare_out(f);
  const learning::CollectResult res = learning::collect_samples(cfg.collect);
  for (const std::string& line : res.log) std::fprintf(stderr, "collect: %s\n", line.c_str());
  learning::save_dataset(res.data, (out / "dataset.csv").string(), config::meta_line(cfg));
  std::printf("collect: %zu samples from %d rollouts (%d discarded)\n", res.data.size(), cfg.collect.n_rollouts,
              res.discarded);
  return 0;
}

int cmd_train(const Flags& f) {
  const config::RunConfig cfg = resolve(f);
  const fs::path ds = f.dataset.empty() ? fs::path(f.out) / "dataset.csv" : fs::path(f.dataset);
  if (!fs::exists(ds)) throw Fault(FaultKind::kConfig, "dataset file not found: " + ds.string());
  const learning::Dataset data = learning::load_dataset(ds.string());
  const fs::path out = prepare_out(f);

  learning::TrainResult tr = learning::train(data, cfg.train);
  tr.model.config_hash = config::config_hash(cfg);
  tr.model.seed = cfg.scenario.seed;
  learning::save_model(tr.model, (out / "model.json").string());

  const learning::TrainReport& r = tr.report;
  json rep;
  rep["meta"] = meta(cfg, "train");
  rep["epochs"] = r.epochs;
  rep["batch_size"] = r.batch_size;
  rep["seed"] = r.seed;
  rep["n_train"] = r.n_train;
  rep["n_eval"] = r.n_eval;
  rep["best_epoch"] = r.best_epoch;
  rep["train_loss"] = r.train_loss;
  rep["eval_loss"] = r.eval_loss;
  rep["aborted"] = r.aborted;
  rep["abort_reason"] = r.abort_reason;
  rep["kernels"] = simd::active_kernels().name;
  write_json(out / "train_report.json", rep);
  std::printf("train: %zu samples, best epoch %d, eval loss %.6g\n", data.size(), r.best_epoch,
              r.eval_loss.empty() ? NAN : r.eval_loss[static_cast<std::size_t>(r.best_epoch - 1)]);
  if (r.aborted) {
    std::fprintf(stderr, "train: aborted: %s\n", r.abort_reason.c_str());
    return 1;
  }
  return 0;
}

int cmd_eval(const Flags& f) {
  config::RunConfig cfg = resolve(f);
  const auto model = require_model(cfg);
  const fs::path out = prepare_out(f);
  learning::Dataset held_out;
  std::string source;
  if (!f.dataset.empty()) {
    if (!fs::exists(f.dataset)) throw Fault(FaultKind::kConfig, "dataset file not found: " + f.dataset);
    held_out = learning::load_dataset(f.dataset);
    source = f.dataset;
  } else {
    // Fresh rollouts on a seed stream the training data never used.
    learning::CollectOptions co = cfg.collect;
    co.seed = mix_seed(cfg.scenario.seed, 0xE7A1);
    if (!f.samples) co.n_rollouts = 200;
    held_out = learning::collect_samples(co).data;
    source = "collected";
  }
  const double threshold = 0.05 * cfg.scenario.quad.u_max;
  const auto st = learning::evaluate_fidelity(*model, held_out, threshold);
  json j;
  j["meta"] = meta(cfg, "eval");
  j["source"] = source;
  j["n"] = st.n;
  j["threshold"] = st.threshold;
  j["fraction_within"] = st.fraction_within;
  j["mean_inf_err"] = st.mean_inf_err;
  j["max_inf_err"] = st.max_inf_err;
  j["mse"] = st.mse;
  write_json(out / "eval.json", j);
  std::printf("eval: %zu points, %.2f%% with |err|_inf <= %.3g\n", st.n, 100.0 * st.fraction_within, threshold);
  return 0;
}

int cmd_bench(const Flags& f) {
  const config::RunConfig cfg = resolve(f);
  const auto model = require_model(cfg);
  const fs::path out = prepare_out(f);
  const sim::LatencyTable table = sim::bench_latency(cfg.scenario, *model, f.calls);
  json rows = json::array();
  for (const sim::LatencyRow& r : table.rows) {
    rows.push_back({{"controller", r.controller}, {"calls", r.calls}, {"median_s", r.median_s}, {"p95_s", r.p95_s}});
    std::printf("bench: %-14s median %.3e s  p95 %.3e s  (%zu calls)\n", r.controller.c_str(), r.median_s, r.p95_s,
                r.calls);
  }
  json j;
  j["meta"] = meta(cfg, "bench");
  j["kernels"] = simd::active_kernels().name;
  j["rows"] = rows;
  write_json(out / "bench.json", j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Standoff tracking with linear, nonlinear and distilled MPC"};
  app.require_subcommand(1);
  Flags f;

  auto* sim_cmd = app.add_subcommand("simulate", "run one closed-loop scenario");
  add_common(sim_cmd, f);
  sim_cmd->add_option("--model", f.model, "network model for nn / nn-im");

  auto* collect_cmd = app.add_subcommand("collect", "collect (state, optimal input) samples");
  add_common(collect_cmd, f);
  collect_cmd->add_option("--samples", f.samples, "number of samples (rounded up to whole rollouts)");
  collect_cmd->add_option("--threads", f.threads, "worker threads (0: all cores)");

  auto* train_cmd = app.add_subcommand("train", "train the network on a dataset");
  add_common(train_cmd, f);
  train_cmd->add_option("--dataset", f.dataset, "dataset CSV (default: <out>/dataset.csv)");
  train_cmd->add_option("--epochs", f.epochs, "training epochs");

  auto* eval_cmd = app.add_subcommand("eval", "held-out surrogate fidelity");
  add_common(eval_cmd, f);
  eval_cmd->add_option("--model", f.model, "model file");
  eval_cmd->add_option("--dataset", f.dataset, "held-out dataset CSV (default: collect fresh rollouts)");
  eval_cmd->add_option("--samples", f.samples, "held-out samples to collect when no dataset is given");

  auto* bench_cmd = app.add_subcommand("bench", "per-call latency of NMPC, LMPC and the network");
  add_common(bench_cmd, f);
  bench_cmd->add_option("--model", f.model, "model file");
  bench_cmd->add_option("--calls", f.calls, "timed calls per controller");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim_cmd->parsed()) return cmd_simulate(f);
    if (collect_cmd->parsed()) return cmd_collect(f);
    if (train_cmd->parsed()) return cmd_train(f);
    if (eval_cmd->parsed()) return cmd_eval(f);
    if (bench_cmd->parsed()) return cmd_bench(f);
  } catch (const Fault& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == FaultKind::kConfig || e.kind() == FaultKind::kParse ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
