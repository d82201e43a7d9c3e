#pragma once

// Supervised distillation of the MPC policy: sample collection from
// randomized closed-loop rollouts, a leaky-ReLU multilayer perceptron, Adam
// training and JSON model files.

#include "lgvmpc/common.hpp"
#include "lgvmpc/lgv_guidance.hpp"
#include "lgvmpc/mpc_core.hpp"
#include "lgvmpc/quad_dynamics.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace lgvmpc::learning {

inline constexpr int kFeatureDim = 18;
inline constexpr int kModelVersion = 1;

using Features = Eigen::Matrix<double, kFeatureDim, 1>;

struct Sample {
  Features s = Features::Zero();
  Vec4 u_star = Vec4::Zero();
};

using Dataset = std::vector<Sample>;

// col(x, p_ref(0), v_ref(0)) with the two position blocks taken relative to
// the target, so the map does not depend on where the target sits.
Features encode_features(const StateVec& x, const guidance::ReferenceTrajectory& ref, const Vec3& target_pos);

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out
};

struct MlpModel {
  std::vector<int> layer_dims;
  double leaky_slope = 0.01;
  std::vector<double> norm_mean;
  std::vector<double> norm_std;
  std::vector<DenseLayer> layers;
  std::string config_hash;
  std::uint64_t seed = 0;

  // Throws Fault(kConfig) on inconsistent shapes or non-finite parameters.
  void validate() const;
  std::size_t parameter_count() const;
};

// He-style random initialization; the output bias starts at out_bias.
MlpModel init_model(const std::vector<int>& layer_dims, double leaky_slope, std::uint64_t seed,
                    const std::vector<double>& out_bias = {});

// Per-call scratch buffers so repeated inference does not allocate.
struct MlpWorkspace {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> act;
};

std::vector<double> normalize_input(const MlpModel& model, std::span<const double> s);

Eigen::VectorXd mlp_forward(const MlpModel& model, std::span<const double> s, MlpWorkspace& ws);
Eigen::VectorXd mlp_forward(const MlpModel& model, std::span<const double> s);
Vec4 mlp_forward(const MlpModel& model, const Features& s);

// Flattened parameter view: layer by layer, weights then biases.
std::vector<double> flatten_parameters(const MlpModel& model);
void assign_parameters(MlpModel& model, std::span<const double> flat);

struct LossGradient {
  double loss = 0.0;           // mean over samples of |f(s) - u|^2
  std::vector<double> grad;    // same layout as flatten_parameters
};

LossGradient loss_gradient(const MlpModel& model, const Dataset& data, std::span<const std::size_t> indices);
double mean_loss(const MlpModel& model, const Dataset& data, std::span<const std::size_t> indices);

struct TrainOptions {
  double split = 0.9;
  int epochs = 20;
  int batch = 200;
  std::uint64_t seed = 1;
  std::vector<int> hidden{100, 100};
  double leaky_slope = 0.01;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> eval_loss;
  int epochs = 0;
  int batch_size = 0;
  std::uint64_t seed = 0;
  int best_epoch = 0;  // 1-based
  std::size_t n_train = 0;
  std::size_t n_eval = 0;
  bool aborted = false;
  std::string abort_reason;
};

struct TrainResult {
  MlpModel model;
  TrainReport report;
};

// Throws Fault(kConfig) on an empty dataset. A non-finite loss stops
// training and sets report.aborted; the best model so far is returned.
TrainResult train(const Dataset& data, const TrainOptions& opts);

void save_model(const MlpModel& model, const std::string& path);
// Throws Fault(kParse) with location on malformed input or version mismatch.
MlpModel load_model(const std::string& path);
std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(const std::string& text);

void write_dataset_csv(const Dataset& data, std::ostream& os, const std::string& meta_line);
void save_dataset(const Dataset& data, const std::string& path, const std::string& meta_line = {});
Dataset read_dataset_csv(std::istream& is);
Dataset load_dataset(const std::string& path);

enum class Teacher { kLmpc, kNmpc };

struct CollectOptions {
  Teacher teacher = Teacher::kLmpc;
  int n_rollouts = 2000;  // 1e5 samples at 50 steps
  int steps_per_rollout = 50;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
  // Each rollout plans around a radius drawn from r_d +- r_d_jitter, so the
  // data also covers references shifted by the integral module.
  double r_d_jitter = 0.2;
  guidance::TrackingPattern pattern;
  mpc::MpcConfig mpc;
  dynamics::QuadParams quad;
};

struct CollectResult {
  Dataset data;
  int discarded = 0;
  std::vector<std::string> log;
};

// Initial state draw for rollout `index`.
struct RolloutInit {
  StateVec x;
  guidance::TargetState target;
  double r_plan = 0.0;
};
RolloutInit draw_rollout_init(const CollectOptions& opts, int index);

CollectResult collect_samples(const CollectOptions& opts);

struct FidelityStats {
  std::size_t n = 0;
  double fraction_within = 0.0;  // |err|_inf <= threshold
  double threshold = 0.0;
  double mean_inf_err = 0.0;
  double max_inf_err = 0.0;
  double mse = 0.0;
};

FidelityStats evaluate_fidelity(const MlpModel& model, const Dataset& data, double threshold);

}  // namespace lgvmpc::learning
