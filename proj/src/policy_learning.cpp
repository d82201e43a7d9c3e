#include "lgvmpc/policy_learning.hpp"

#include "lgvmpc/kernels.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

namespace lgvmpc::learning {

using nlohmann::json;

Features encode_features(const StateVec& x, const guidance::ReferenceTrajectory& ref, const Vec3& target_pos) {
  if (ref.states.empty()) throw Fault(FaultKind::kDimension, "feature encoding needs a reference state");
  Features s;
  s.head<kStateDim>() = x;
  s.segment<3>(idx::kPos) -= target_pos;
  s.segment<3>(kStateDim) = ref.states[0].segment<3>(idx::kPos) - target_pos;
  s.segment<3>(kStateDim + 3) = ref.states[0].segment<3>(idx::kVel);
  return s;
}

void MlpModel::validate() const {
  if (layer_dims.size() < 2) throw Fault(FaultKind::kConfig, "model needs at least input and output dims");
  if (layers.size() != layer_dims.size() - 1) throw Fault(FaultKind::kConfig, "layer count does not match layer_dims");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw Fault(FaultKind::kConfig, "leaky_slope must lie in (0, 1)");
  const auto n_in = static_cast<std::size_t>(layer_dims.front());
  if (norm_mean.size() != n_in || norm_std.size() != n_in) {
    throw Fault(FaultKind::kConfig, "normalization vectors do not match the input dim");
  }
  for (std::size_t i = 0; i < n_in; ++i) {
    if (!std::isfinite(norm_mean[i]) || !(norm_std[i] > 0.0) || !std::isfinite(norm_std[i])) {
      throw Fault(FaultKind::kConfig, "normalization statistics must be finite with positive std");
    }
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& d = layers[l];
    if (d.in != layer_dims[l] || d.out != layer_dims[l + 1] || d.in < 1 || d.out < 1 ||
        d.w.size() != static_cast<std::size_t>(d.in) * d.out || d.b.size() != static_cast<std::size_t>(d.out)) {
      throw Fault(FaultKind::kConfig, "layer " + std::to_string(l) + " shape does not match layer_dims");
    }
    for (double v : d.w) {
      if (!std::isfinite(v)) throw Fault(FaultKind::kNonFinite, "non-finite weight in layer " + std::to_string(l));
    }
    for (double v : d.b) {
      if (!std::isfinite(v)) throw Fault(FaultKind::kNonFinite, "non-finite bias in layer " + std::to_string(l));
    }
  }
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& d : layers) n += d.w.size() + d.b.size();
  return n;
}

MlpModel init_model(const std::vector<int>& layer_dims, double leaky_slope, std::uint64_t seed,
                    const std::vector<double>& out_bias) {
  MlpModel m;
  m.layer_dims = layer_dims;
  m.leaky_slope = leaky_slope;
  m.seed = seed;
  if (layer_dims.size() < 2) throw Fault(FaultKind::kConfig, "model needs at least input and output dims");
  for (int d : layer_dims) {
    if (d < 1) throw Fault(FaultKind::kConfig, "layer dims must be positive");
  }
  m.norm_mean.assign(layer_dims.front(), 0.0);
  m.norm_std.assign(layer_dims.front(), 1.0);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    DenseLayer d;
    d.in = layer_dims[l];
    d.out = layer_dims[l + 1];
    const bool last = l + 2 == layer_dims.size();
    const double gain = last ? 0.1 : std::sqrt(2.0 / (1.0 + leaky_slope * leaky_slope));
    std::normal_distribution<double> nd(0.0, gain / std::sqrt(static_cast<double>(d.in)));
    d.w.resize(static_cast<std::size_t>(d.in) * d.out);
    for (double& v : d.w) v = nd(rng);
    d.b.assign(d.out, 0.0);
    if (last && out_bias.size() == static_cast<std::size_t>(d.out)) d.b = out_bias;
    m.layers.push_back(std::move(d));
  }
  return m;
}

std::vector<double> normalize_input(const MlpModel& model, std::span<const double> s) {
  if (s.size() != model.norm_mean.size()) {
    throw Fault(FaultKind::kDimension, "input has " + std::to_string(s.size()) + " entries, model expects " +
                                           std::to_string(model.norm_mean.size()));
  }
  std::vector<double> z(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) z[i] = (s[i] - model.norm_mean[i]) / model.norm_std[i];
  return z;
}

namespace {

// Forward pass keeping pre-activations and activations; act[0] is the
// normalized input.
void forward_into(const MlpModel& model, std::span<const double> s, MlpWorkspace& ws) {
  const auto& k = simd::active_kernels();
  const std::size_t n_layers = model.layers.size();
  if (s.size() != static_cast<std::size_t>(model.layer_dims.front())) {
    throw Fault(FaultKind::kDimension, "input has " + std::to_string(s.size()) + " entries, model expects " +
                                           std::to_string(model.layer_dims.front()));
  }
  ws.pre.resize(n_layers);
  ws.act.resize(n_layers + 1);
  ws.act[0].resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) ws.act[0][i] = (s[i] - model.norm_mean[i]) / model.norm_std[i];
  for (std::size_t l = 0; l < n_layers; ++l) {
    const DenseLayer& d = model.layers[l];
    ws.pre[l].resize(d.out);
    ws.act[l + 1].resize(d.out);
    k.gemv(d.w.data(), d.out, d.in, ws.act[l].data(), d.b.data(), ws.pre[l].data());
    if (l + 1 < n_layers) {
      k.leaky_relu(ws.pre[l].data(), ws.act[l + 1].data(), d.out, model.leaky_slope);
    } else {
      std::copy(ws.pre[l].begin(), ws.pre[l].end(), ws.act[l + 1].begin());
    }
  }
}

// Offsets of each layer's weights and biases in the flattened layout.
struct ParamLayout {
  std::vector<std::size_t> w_off;
  std::vector<std::size_t> b_off;
  std::size_t total = 0;
};

ParamLayout layout_of(const MlpModel& model) {
  ParamLayout p;
  for (const DenseLayer& d : model.layers) {
    p.w_off.push_back(p.total);
    p.total += d.w.size();
    p.b_off.push_back(p.total);
    p.total += d.b.size();
  }
  return p;
}

// Accumulates scale * d|f(s)-u|^2/dtheta into grad; returns |f(s)-u|^2.
double accumulate_sample(const MlpModel& model, const ParamLayout& lay, const Sample& smp, double scale,
                         MlpWorkspace& ws, std::vector<double>& delta, std::vector<double>& delta_prev,
                         double* grad) {
  const auto& k = simd::active_kernels();
  forward_into(model, std::span<const double>(smp.s.data(), kFeatureDim), ws);
  const std::size_t n_layers = model.layers.size();
  const std::vector<double>& y = ws.act[n_layers];
  if (y.size() != static_cast<std::size_t>(kInputDim)) {
    throw Fault(FaultKind::kDimension, "model output must have 4 entries");
  }
  double loss = 0.0;
  delta.resize(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double e = y[j] - smp.u_star[static_cast<Eigen::Index>(j)];
    loss += e * e;
    delta[j] = 2.0 * e * scale;
  }
  for (std::size_t l = n_layers; l-- > 0;) {
    const DenseLayer& d = model.layers[l];
    double* gw = grad + lay.w_off[l];
    double* gb = grad + lay.b_off[l];
    for (int r = 0; r < d.out; ++r) {
      k.axpy(delta[r], ws.act[l].data(), gw + static_cast<std::size_t>(r) * d.in, d.in);
      gb[r] += delta[r];
    }
    if (l == 0) break;
    delta_prev.assign(d.in, 0.0);
    k.gemv_t_acc(d.w.data(), d.out, d.in, delta.data(), delta_prev.data());
    k.leaky_relu_backward(ws.pre[l - 1].data(), delta_prev.data(), d.in, model.leaky_slope);
    delta.swap(delta_prev);
  }
  return loss;
}

}  // namespace

Eigen::VectorXd mlp_forward(const MlpModel& model, std::span<const double> s, MlpWorkspace& ws) {
  forward_into(model, s, ws);
  const std::vector<double>& y = ws.act.back();
  return Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
}

Eigen::VectorXd mlp_forward(const MlpModel& model, std::span<const double> s) {
  MlpWorkspace ws;
  return mlp_forward(model, s, ws);
}

Vec4 mlp_forward(const MlpModel& model, const Features& s) {
  thread_local MlpWorkspace ws;
  const Eigen::VectorXd y = mlp_forward(model, std::span<const double>(s.data(), kFeatureDim), ws);
  if (y.size() != kInputDim) throw Fault(FaultKind::kDimension, "model output must have 4 entries");
  return y;
}

std::vector<double> flatten_parameters(const MlpModel& model) {
  std::vector<double> flat;
  flat.reserve(model.parameter_count());
  for (const DenseLayer& d : model.layers) {
    flat.insert(flat.end(), d.w.begin(), d.w.end());
    flat.insert(flat.end(), d.b.begin(), d.b.end());
  }
  return flat;
}

void assign_parameters(MlpModel& model, std::span<const double> flat) {
  if (flat.size() != model.parameter_count()) throw Fault(FaultKind::kDimension, "parameter vector size mismatch");
  std::size_t o = 0;
  for (DenseLayer& d : model.layers) {
    std::copy_n(flat.begin() + o, d.w.size(), d.w.begin());
    o += d.w.size();
    std::copy_n(flat.begin() + o, d.b.size(), d.b.begin());
    o += d.b.size();
  }
}

LossGradient loss_gradient(const MlpModel& model, const Dataset& data, std::span<const std::size_t> indices) {
  LossGradient out;
  const ParamLayout lay = layout_of(model);
  out.grad.assign(lay.total, 0.0);
  if (indices.empty()) return out;
  MlpWorkspace ws;
  std::vector<double> delta, delta_prev;
  const double scale = 1.0 / static_cast<double>(indices.size());
  for (std::size_t i : indices) {
    out.loss += accumulate_sample(model, lay, data.at(i), scale, ws, delta, delta_prev, out.grad.data());
  }
  out.loss *= scale;
  return out;
}

double mean_loss(const MlpModel& model, const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) return 0.0;
  MlpWorkspace ws;
  double sum = 0.0;
  for (std::size_t i : indices) {
    const Sample& smp = data.at(i);
    const Eigen::VectorXd y = mlp_forward(model, std::span<const double>(smp.s.data(), kFeatureDim), ws);
    sum += (y - smp.u_star).squaredNorm();
  }
  return sum / static_cast<double>(indices.size());
}

TrainResult train(const Dataset& data, const TrainOptions& opts) {
  if (data.empty()) throw Fault(FaultKind::kConfig, "training needs a nonempty dataset");
  if (!(opts.split > 0.0 && opts.split <= 1.0) || opts.epochs < 1 || opts.batch < 1) {
    throw Fault(FaultKind::kConfig, "training needs split in (0, 1], epochs >= 1, batch >= 1");
  }
  const auto& k = simd::active_kernels();
  std::mt19937_64 rng(opts.seed);

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_train = static_cast<std::size_t>(std::floor(opts.split * static_cast<double>(data.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, data.size());
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> eval_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  // A full-data fit still reports an eval curve, on the training set.
  const std::span<const std::size_t> eval_span = eval_idx.empty() ? std::span<const std::size_t>(train_idx)
                                                                  : std::span<const std::size_t>(eval_idx);

  std::vector<double> mean(kFeatureDim, 0.0), var(kFeatureDim, 0.0), out_mean(kInputDim, 0.0);
  for (std::size_t i : train_idx) {
    for (int j = 0; j < kFeatureDim; ++j) mean[j] += data[i].s[j];
    for (int j = 0; j < kInputDim; ++j) out_mean[j] += data[i].u_star[j];
  }
  for (double& v : mean) v /= static_cast<double>(n_train);
  for (double& v : out_mean) v /= static_cast<double>(n_train);
  for (std::size_t i : train_idx) {
    for (int j = 0; j < kFeatureDim; ++j) var[j] += (data[i].s[j] - mean[j]) * (data[i].s[j] - mean[j]);
  }

  std::vector<int> dims{kFeatureDim};
  dims.insert(dims.end(), opts.hidden.begin(), opts.hidden.end());
  dims.push_back(kInputDim);
  MlpModel model = init_model(dims, opts.leaky_slope, opts.seed, out_mean);
  model.norm_mean = mean;
  for (int j = 0; j < kFeatureDim; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n_train));
    model.norm_std[j] = sd > 1e-9 ? sd : 1.0;
  }

  TrainResult result;
  TrainReport& rep = result.report;
  rep.epochs = opts.epochs;
  rep.batch_size = opts.batch;
  rep.seed = opts.seed;
  rep.n_train = n_train;
  rep.n_eval = eval_idx.size();

  const ParamLayout lay = layout_of(model);
  std::vector<double> grad(lay.total), m(lay.total, 0.0), v(lay.total, 0.0);
  MlpWorkspace ws;
  std::vector<double> delta, delta_prev;
  double best = std::numeric_limits<double>::infinity();
  MlpModel best_model = model;
  long step = 0;

  for (int epoch = 1; epoch <= opts.epochs && !rep.aborted; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(opts.batch)) {
      const std::size_t end = std::min(n_train, start + static_cast<std::size_t>(opts.batch));
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        batch_loss += accumulate_sample(model, lay, data[train_idx[b]], scale, ws, delta, delta_prev, grad.data());
      }
      if (!std::isfinite(batch_loss)) {
        rep.aborted = true;
        rep.abort_reason = "non-finite loss in epoch " + std::to_string(epoch);
        break;
      }
      epoch_loss += batch_loss;
      ++step;
      const simd::AdamCoeffs c{opts.lr, opts.beta1, opts.beta2, opts.eps,
                               1.0 / (1.0 - std::pow(opts.beta1, static_cast<double>(step))),
                               1.0 / (1.0 - std::pow(opts.beta2, static_cast<double>(step)))};
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        DenseLayer& d = model.layers[l];
        k.adam_step(d.w.data(), grad.data() + lay.w_off[l], m.data() + lay.w_off[l], v.data() + lay.w_off[l],
                    d.w.size(), c);
        k.adam_step(d.b.data(), grad.data() + lay.b_off[l], m.data() + lay.b_off[l], v.data() + lay.b_off[l],
                    d.b.size(), c);
      }
    }
    if (rep.aborted) break;
    const double eval = mean_loss(model, data, eval_span);
    if (!std::isfinite(eval)) {
      rep.aborted = true;
      rep.abort_reason = "non-finite eval loss in epoch " + std::to_string(epoch);
      break;
    }
    rep.train_loss.push_back(epoch_loss / static_cast<double>(n_train));
    rep.eval_loss.push_back(eval);
    if (eval < best) {
      best = eval;
      best_model = model;
      rep.best_epoch = epoch;
    }
  }
  result.model = std::move(best_model);
  return result;
}

// ---- model files

std::string model_to_json(const MlpModel& model) {
  json j;
  j["version"] = kModelVersion;
  j["layer_dims"] = model.layer_dims;
  j["leaky_slope"] = model.leaky_slope;
  j["norm_mean"] = model.norm_mean;
  j["norm_std"] = model.norm_std;
  json layers = json::array();
  for (const DenseLayer& d : model.layers) {
    json rows = json::array();
    for (int r = 0; r < d.out; ++r) {
      rows.push_back(std::vector<double>(d.w.begin() + static_cast<std::ptrdiff_t>(r) * d.in,
                                         d.w.begin() + static_cast<std::ptrdiff_t>(r + 1) * d.in));
    }
    layers.push_back({{"w", rows}, {"b", d.b}});
  }
  j["layers"] = layers;
  j["meta"] = {{"config_hash", model.config_hash}, {"seed", model.seed}};
  return j.dump(1);
}

MlpModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Fault(FaultKind::kParse, std::string("model file: ") + e.what());
  }
  auto field = [&](const json& obj, const char* key, const std::string& where) -> const json& {
    if (!obj.is_object() || !obj.contains(key)) throw Fault(FaultKind::kParse, "model file: missing field " + where + key);
    return obj.at(key);
  };
  MlpModel m;
  try {
    const json& ver = field(j, "version", "");
    if (!ver.is_number_integer() || ver.get<int>() != kModelVersion) {
      throw Fault(FaultKind::kParse, "model file: unsupported version " + ver.dump() + " (expected " +
                                         std::to_string(kModelVersion) + ")");
    }
    m.layer_dims = field(j, "layer_dims", "").get<std::vector<int>>();
    m.leaky_slope = field(j, "leaky_slope", "").get<double>();
    m.norm_mean = field(j, "norm_mean", "").get<std::vector<double>>();
    m.norm_std = field(j, "norm_std", "").get<std::vector<double>>();
    const json& layers = field(j, "layers", "");
    if (!layers.is_array()) throw Fault(FaultKind::kParse, "model file: layers must be an array");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string where = "layers[" + std::to_string(l) + "].";
      const auto rows = field(layers[l], "w", where).get<std::vector<std::vector<double>>>();
      DenseLayer d;
      d.b = field(layers[l], "b", where).get<std::vector<double>>();
      d.out = static_cast<int>(rows.size());
      d.in = rows.empty() ? 0 : static_cast<int>(rows.front().size());
      for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != d.in) throw Fault(FaultKind::kParse, "model file: ragged " + where + "w");
        d.w.insert(d.w.end(), row.begin(), row.end());
      }
      m.layers.push_back(std::move(d));
    }
    if (j.contains("meta")) {
      const json& meta = j.at("meta");
      if (meta.contains("config_hash")) m.config_hash = meta.at("config_hash").get<std::string>();
      if (meta.contains("seed")) m.seed = meta.at("seed").get<std::uint64_t>();
    }
  } catch (const json::exception& e) {
    throw Fault(FaultKind::kParse, std::string("model file: ") + e.what());
  }
  try {
    m.validate();
  } catch (const Fault& e) {
    throw Fault(FaultKind::kParse, std::string("model file: ") + e.what());
  }
  return m;
}

void save_model(const MlpModel& model, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Fault(FaultKind::kConfig, "cannot write model file " + path);
  os << model_to_json(model) << '\n';
}

MlpModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Fault(FaultKind::kConfig, "cannot open model file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return model_from_json(ss.str());
}

// ---- dataset files

void write_dataset_csv(const Dataset& data, std::ostream& os, const std::string& meta_line) {
  if (!meta_line.empty()) os << "# " << meta_line << '\n';
  for (int j = 0; j < kFeatureDim; ++j) os << 's' << j << ',';
  for (int j = 0; j < kInputDim; ++j) os << 'u' << j << (j + 1 < kInputDim ? ',' : '\n');
  char buf[32];
  for (const Sample& smp : data) {
    for (int j = 0; j < kFeatureDim; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", smp.s[j]);
      os << buf << ',';
    }
    for (int j = 0; j < kInputDim; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", smp.u_star[j]);
      os << buf << (j + 1 < kInputDim ? ',' : '\n');
    }
  }
}

void save_dataset(const Dataset& data, const std::string& path, const std::string& meta_line) {
  std::ofstream os(path);
  if (!os) throw Fault(FaultKind::kConfig, "cannot write dataset file " + path);
  write_dataset_csv(data, os, meta_line);
}

Dataset read_dataset_csv(std::istream& is) {
  Dataset data;
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      if (line.rfind("s0,", 0) != 0) throw Fault(FaultKind::kParse, "dataset line " + std::to_string(line_no) + ": expected header s0..s17,u0..u3");
      continue;
    }
    Sample smp;
    const char* p = line.c_str();
    for (int j = 0; j < kFeatureDim + kInputDim; ++j) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p || (j + 1 < kFeatureDim + kInputDim && *end != ',') ||
          (j + 1 == kFeatureDim + kInputDim && *end != '\0' && *end != '\r')) {
        throw Fault(FaultKind::kParse,
                    "dataset line " + std::to_string(line_no) + ", column " + std::to_string(j + 1) + ": bad number");
      }
      if (j < kFeatureDim) {
        smp.s[j] = v;
      } else {
        smp.u_star[j - kFeatureDim] = v;
      }
      p = end + 1;
    }
    data.push_back(smp);
  }
  if (!header) throw Fault(FaultKind::kParse, "dataset: missing header row");
  return data;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Fault(FaultKind::kConfig, "cannot open dataset file " + path);
  return read_dataset_csv(is);
}

// ---- collection

RolloutInit draw_rollout_init(const CollectOptions& opts, int index) {
  std::mt19937_64 rng(mix_seed(opts.seed, static_cast<std::uint64_t>(index)));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  const double pi = std::numbers::pi;
  // One scale per rollout, skewed toward small values so that near-orbit
  // states are well represented; every component stays inside its bound.
  const double scale = std::pow(frac(rng), 2.0);
  const double polar = pi * unit(rng);

  RolloutInit init;
  init.x.setZero();
  init.x[0] = opts.pattern.r_d * std::cos(polar) + 5.0 * scale * unit(rng);
  init.x[1] = opts.pattern.r_d * std::sin(polar) + 5.0 * scale * unit(rng);
  init.x[2] = opts.pattern.z_d + 5.0 * scale * unit(rng);
  init.x[idx::kRoll] = 0.5 * opts.mpc.angle_limit * scale * unit(rng);
  init.x[idx::kPitch] = 0.5 * opts.mpc.angle_limit * scale * unit(rng);
  init.x[idx::kYaw] = (pi / 6.0) * unit(rng);
  for (int i = 0; i < 3; ++i) init.x[idx::kVel + i] = 2.0 * scale * unit(rng);
  for (int i = 0; i < 3; ++i) init.x[idx::kRate + i] = 0.5 * scale * unit(rng);
  for (int i = 0; i < 3; ++i) init.target.v_o[i] = 0.5 * unit(rng);
  init.r_plan = opts.pattern.r_d + opts.r_d_jitter * unit(rng);
  // Keep clear of the range singularity at the target.
  if (std::hypot(init.x[0], init.x[1]) < 0.2) init.x[0] += 0.5;
  return init;
}

namespace {

struct RolloutOutcome {
  Dataset samples;
  std::string error;
};

RolloutOutcome run_rollout(const CollectOptions& opts, int index) {
  RolloutOutcome out;
  RolloutInit init = draw_rollout_init(opts, index);
  StateVec x = init.x;
  guidance::TargetState tgt = init.target;
  const double tau = opts.quad.tau;
  try {
    mpc::LmpcController lmpc(opts.mpc, opts.quad);
    mpc::NmpcController nmpc(opts.mpc, opts.quad);
    out.samples.reserve(static_cast<std::size_t>(opts.steps_per_rollout));
    for (int k = 0; k < opts.steps_per_rollout; ++k) {
      const auto ref = guidance::plan_trajectory(x.head<3>(), tgt, opts.pattern, init.r_plan, opts.mpc.n_p, tau);
      const mpc::ControlResult res = opts.teacher == Teacher::kLmpc ? lmpc.control(x, ref) : nmpc.control(x, ref);
      Sample smp;
      smp.s = encode_features(x, ref, tgt.p_o);
      smp.u_star = res.u;
      out.samples.push_back(smp);
      x = dynamics::step_euler(x, res.u, opts.quad);
      if (!dynamics::attitude_valid(x)) throw Fault(FaultKind::kSingularAttitude, "attitude left the valid range");
      tgt.p_o += tau * tgt.v_o;
    }
  } catch (const Fault& e) {
    out.samples.clear();
    out.error = "rollout " + std::to_string(index) + " discarded: " + e.what();
  }
  return out;
}

}  // namespace

CollectResult collect_samples(const CollectOptions& opts) {
  if (opts.steps_per_rollout < 1 || opts.n_rollouts < 0 || !(opts.r_d_jitter >= 0.0) ||
      opts.r_d_jitter >= opts.pattern.r_d) {
    throw Fault(FaultKind::kConfig, "collection needs steps_per_rollout >= 1, n_rollouts >= 0, 0 <= r_d_jitter < r_d");
  }
  opts.mpc.validate();
  opts.quad.validate();
  opts.pattern.validate();

  std::vector<RolloutOutcome> outcomes(static_cast<std::size_t>(opts.n_rollouts));
  int n_threads = opts.threads > 0 ? opts.threads : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::clamp(n_threads, 1, std::max(1, opts.n_rollouts));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < opts.n_rollouts; i = next++) outcomes[static_cast<std::size_t>(i)] = run_rollout(opts, i);
  };
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  CollectResult res;
  res.data.reserve(static_cast<std::size_t>(opts.n_rollouts) * static_cast<std::size_t>(opts.steps_per_rollout));
  for (RolloutOutcome& o : outcomes) {
    if (!o.error.empty()) {
      ++res.discarded;
      res.log.push_back(std::move(o.error));
      continue;
    }
    res.data.insert(res.data.end(), o.samples.begin(), o.samples.end());
  }
  return res;
}

FidelityStats evaluate_fidelity(const MlpModel& model, const Dataset& data, double threshold) {
  FidelityStats st;
  st.n = data.size();
  st.threshold = threshold;
  if (data.empty()) return st;
  MlpWorkspace ws;
  std::size_t within = 0;
  for (const Sample& smp : data) {
    const Eigen::VectorXd y = mlp_forward(model, std::span<const double>(smp.s.data(), kFeatureDim), ws);
    const double e = (y - smp.u_star).cwiseAbs().maxCoeff();
    st.mean_inf_err += e;
    st.max_inf_err = std::max(st.max_inf_err, e);
    st.mse += (y - smp.u_star).squaredNorm();
    if (e <= threshold) ++within;
  }
  const double n = static_cast<double>(data.size());
  st.fraction_within = static_cast<double>(within) / n;
  st.mean_inf_err /= n;
  st.mse /= n;
  return st;
}

}  // namespace lgvmpc::learning
