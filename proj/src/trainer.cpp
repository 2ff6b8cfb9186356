#include "superlora/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <zlib.h>

#include "json.hpp"
#include "superlora/rng.hpp"

namespace superlora {

void ToyModelConfig::validate() const {
  if (layers < 1 || width < 1 || classes < 2 || seq_len < 1 || ffn_mult < 1)
    throw std::invalid_argument("ToyModelConfig: layers/width/seq_len/ffn_mult must be >= 1 "
                                "and classes >= 2");
}

namespace {

DenseTensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                          std::uint64_t stream) {
  CounterRng rng(seed, stream);
  DenseTensor t(Shape{rows, cols});
  const double stddev = 1.0 / std::sqrt(static_cast<double>(rows));
  for (double& x : t.values()) x = stddev * rng.next_normal();
  return t;
}

std::string qv_name(std::size_t layer, char which) {
  return "layers." + std::to_string(layer) + ".attn.w" + which;
}

}  // namespace

ToyModel ToyModel::random(const ToyModelConfig& config, std::uint64_t seed) {
  config.validate();
  ToyModel model;
  model.config = config;
  const std::size_t d = config.width;
  const std::size_t f = config.width * config.ffn_mult;
  for (std::size_t l = 0; l < config.layers; ++l) {
    LayerWeights w;
    w.wq = random_matrix(d, d, seed, 6 * l + 0);
    w.wk = random_matrix(d, d, seed, 6 * l + 1);
    w.wv = random_matrix(d, d, seed, 6 * l + 2);
    w.wo = random_matrix(d, d, seed, 6 * l + 3);
    w.w1 = random_matrix(d, f, seed, 6 * l + 4);
    w.w2 = random_matrix(f, d, seed, 6 * l + 5);
    model.layers.push_back(std::move(w));
  }
  model.classifier = random_matrix(d, config.classes, seed, 6 * config.layers);
  return model;
}

WeightManifest ToyModel::adaptation_manifest() const {
  WeightManifest manifest;
  for (std::size_t l = 0; l < config.layers; ++l) {
    manifest.entries.push_back({qv_name(l, 'q'), config.width, config.width});
    manifest.entries.push_back({qv_name(l, 'v'), config.width, config.width});
  }
  return manifest;
}

std::uint64_t ToyModel::weights_checksum() const {
  uLong crc = crc32(0L, nullptr, 0);
  auto feed = [&](const DenseTensor& t) {
    crc = crc32(crc, reinterpret_cast<const Bytef*>(t.values().data()),
                static_cast<uInt>(t.size() * sizeof(double)));
  };
  for (const LayerWeights& w : layers) {
    feed(w.wq);
    feed(w.wk);
    feed(w.wv);
    feed(w.wo);
    feed(w.w1);
    feed(w.w2);
  }
  feed(classifier);
  return crc;
}

namespace {

struct AdaptedWeights {
  std::vector<DenseTensor> wq;
  std::vector<DenseTensor> wv;
};

AdaptedWeights adapt(const ToyModel& model, const NamedTensors& deltas) {
  AdaptedWeights out;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto adapted = [&](const DenseTensor& base, const std::string& name) {
      auto it = deltas.find(name);
      if (it == deltas.end())
        throw std::invalid_argument("forward: missing delta for '" + name + "'");
      if (!(it->second.shape() == base.shape()))
        throw std::invalid_argument("forward: delta shape mismatch for '" + name + "'");
      DenseTensor w = base;
      for (std::size_t i = 0; i < w.size(); ++i) w[i] += it->second[i];
      return w;
    };
    out.wq.push_back(adapted(model.layers[l].wq, qv_name(l, 'q')));
    out.wv.push_back(adapted(model.layers[l].wv, qv_name(l, 'v')));
  }
  return out;
}

void softmax_rows_inplace(DenseTensor& m) {
  const std::size_t rows = m.extent(0), cols = m.extent(1);
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = &m(i, 0);
    double mx = row[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < cols; ++j) row[j] /= sum;
  }
}

// forward for one sample; fills the cache when given
std::vector<double> sample_logits(const ToyModel& model, const AdaptedWeights& weights,
                                  const DenseTensor& input, SampleCache* cache) {
  const std::size_t d = model.config.width;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  DenseTensor x = input;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const LayerWeights& w = model.layers[l];
    DenseTensor q = matmul(x, weights.wq[l]);
    DenseTensor k = matmul(x, w.wk);
    DenseTensor v = matmul(x, weights.wv[l]);
    DenseTensor attn = matmul_nt(q, k);
    for (double& s : attn.values()) s *= inv_sqrt_d;
    softmax_rows_inplace(attn);
    DenseTensor ctx = matmul(attn, v);
    DenseTensor attn_out = matmul(ctx, w.wo);
    if (cache) {
      LayerCache lc;
      lc.in = x;
      lc.q = q;
      lc.k = k;
      lc.v = v;
      lc.attn = attn;
      cache->layers.push_back(std::move(lc));
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += attn_out[i];

    DenseTensor hidden = matmul(x, w.w1);
    for (double& h : hidden.values()) h = std::tanh(h);
    DenseTensor mlp_out = matmul(hidden, w.w2);
    if (cache) cache->layers[l].hidden = hidden;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += mlp_out[i];
  }

  const std::size_t t = model.config.seq_len;
  std::vector<double> pooled(d, 0.0);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < d; ++j) pooled[j] += x(i, j) / static_cast<double>(t);

  std::vector<double> logits(model.config.classes, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    const double pj = pooled[j];
    if (pj == 0.0) continue;
    for (std::size_t c = 0; c < model.config.classes; ++c)
      logits[c] += pj * model.classifier(j, c);
  }
  return logits;
}

double cross_entropy(const std::vector<double>& logits, std::size_t label,
                     std::vector<double>* probs) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  if (probs) {
    probs->resize(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c) (*probs)[c] = std::exp(logits[c] - mx) / sum;
  }
  return std::log(sum) + mx - logits[label];
}

void check_batch(const ToyModel& model, const Batch& batch) {
  if (batch.inputs.empty() || batch.inputs.size() != batch.labels.size())
    throw std::invalid_argument("batch: inputs and labels must be non-empty and aligned");
  const Shape want{model.config.seq_len, model.config.width};
  for (const DenseTensor& x : batch.inputs)
    if (!(x.shape() == want))
      throw std::invalid_argument("batch: input shape " + to_string(x.shape()) +
                                  ", expected " + to_string(want));
  for (std::size_t y : batch.labels)
    if (y >= model.config.classes) throw std::invalid_argument("batch: label out of range");
}

}  // namespace

double forward_loss(const ToyModel& model, const NamedTensors& deltas, const Batch& batch,
                    ForwardCache* cache) {
  check_batch(model, batch);
  const AdaptedWeights weights = adapt(model, deltas);
  if (cache) cache->samples.assign(batch.inputs.size(), SampleCache{});

  double loss = 0.0;
  for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
    SampleCache* sc = cache ? &cache->samples[i] : nullptr;
    const std::vector<double> logits = sample_logits(model, weights, batch.inputs[i], sc);
    loss += cross_entropy(logits, batch.labels[i], sc ? &sc->probs : nullptr);
  }
  return loss / static_cast<double>(batch.inputs.size());
}

NamedTensors backward_delta_grads(const ToyModel& model, const NamedTensors& deltas,
                                  const Batch& batch, const ForwardCache& cache) {
  check_batch(model, batch);
  if (cache.samples.size() != batch.inputs.size())
    throw std::invalid_argument("backward: cache does not match batch");
  const AdaptedWeights weights = adapt(model, deltas);

  const std::size_t d = model.config.width;
  const std::size_t t = model.config.seq_len;
  const std::size_t n_layers = model.layers.size();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double inv_batch = 1.0 / static_cast<double>(batch.inputs.size());

  NamedTensors grads;
  for (std::size_t l = 0; l < n_layers; ++l) {
    grads.emplace(qv_name(l, 'q'), DenseTensor(Shape{d, d}));
    grads.emplace(qv_name(l, 'v'), DenseTensor(Shape{d, d}));
  }

  for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
    const SampleCache& sc = cache.samples[i];
    if (sc.layers.size() != n_layers)
      throw std::invalid_argument("backward: cache missing layer activations");

    // d(loss)/d(logits), averaged over the batch
    std::vector<double> dlogits = sc.probs;
    dlogits[batch.labels[i]] -= 1.0;
    for (double& g : dlogits) g *= inv_batch;

    std::vector<double> dpooled(d, 0.0);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t c = 0; c < model.config.classes; ++c)
        dpooled[j] += dlogits[c] * model.classifier(j, c);

    DenseTensor dx(Shape{t, d});
    for (std::size_t r = 0; r < t; ++r)
      for (std::size_t j = 0; j < d; ++j) dx(r, j) = dpooled[j] / static_cast<double>(t);

    for (std::size_t l = n_layers; l-- > 0;) {
      const LayerWeights& w = model.layers[l];
      const LayerCache& lc = sc.layers[l];

      // x_out = x_mid + tanh(x_mid w1) w2
      DenseTensor dhidden = matmul_nt(dx, w.w2);
      for (std::size_t j = 0; j < dhidden.size(); ++j) {
        const double h = lc.hidden[j];
        dhidden[j] *= 1.0 - h * h;
      }
      DenseTensor dmid = matmul_nt(dhidden, w.w1);
      for (std::size_t j = 0; j < dx.size(); ++j) dmid[j] += dx[j];

      // x_mid = in + (softmax(q k^T / sqrt(d)) v) wo
      DenseTensor dctx = matmul_nt(dmid, w.wo);
      DenseTensor dattn = matmul_nt(dctx, lc.v);
      DenseTensor dv = matmul_tn(lc.attn, dctx);

      // softmax rows: ds = p .* (dp - <dp,p>)
      DenseTensor dscores(Shape{t, t});
      for (std::size_t r = 0; r < t; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < t; ++c) dot += dattn(r, c) * lc.attn(r, c);
        for (std::size_t c = 0; c < t; ++c)
          dscores(r, c) = lc.attn(r, c) * (dattn(r, c) - dot);
      }
      DenseTensor dq = matmul(dscores, lc.k);
      for (double& g : dq.values()) g *= inv_sqrt_d;
      DenseTensor dk = matmul_tn(dscores, lc.q);
      for (double& g : dk.values()) g *= inv_sqrt_d;

      DenseTensor din = matmul_nt(dq, weights.wq[l]);
      {
        const DenseTensor dk_in = matmul_nt(dk, w.wk);
        const DenseTensor dv_in = matmul_nt(dv, weights.wv[l]);
        for (std::size_t j = 0; j < din.size(); ++j) din[j] += dk_in[j] + dv_in[j] + dmid[j];
      }

      DenseTensor& gq = grads.at(qv_name(l, 'q'));
      DenseTensor& gv = grads.at(qv_name(l, 'v'));
      const DenseTensor gq_i = matmul_tn(lc.in, dq);
      const DenseTensor gv_i = matmul_tn(lc.in, dv);
      for (std::size_t j = 0; j < gq.size(); ++j) {
        gq[j] += gq_i[j];
        gv[j] += gv_i[j];
      }

      dx = std::move(din);
    }
  }
  return grads;
}

std::vector<std::size_t> predict(const ToyModel& model, const NamedTensors& deltas,
                                 const std::vector<DenseTensor>& inputs) {
  const AdaptedWeights weights = adapt(model, deltas);
  std::vector<std::size_t> out;
  out.reserve(inputs.size());
  for (const DenseTensor& x : inputs) {
    const std::vector<double> logits = sample_logits(model, weights, x, nullptr);
    out.push_back(static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin()));
  }
  return out;
}

double adapter_batch_loss(const AdapterState& state, const ToyModel& model, const Batch& batch) {
  return forward_loss(model, materialize_deltas(state), batch);
}

LossAndGrads loss_and_grads(const AdapterState& state, const ToyModel& model, const Batch& batch) {
  MaterializeCache mcache;
  const NamedTensors deltas = materialize_deltas(state, &mcache);
  ForwardCache fcache;
  LossAndGrads out;
  out.loss = forward_loss(model, deltas, batch, &fcache);
  const NamedTensors delta_grads = backward_delta_grads(model, deltas, batch, fcache);
  out.grads = delta_gradients(state, mcache, delta_grads);
  return out;
}

// --- synthetic task -----------------------------------------------------------

void TaskConfig::validate() const {
  if (train_samples < 1 || eval_samples < 1 || teacher_rank < 1)
    throw std::invalid_argument("TaskConfig: sample counts and teacher_rank must be >= 1");
  if (!(teacher_scale > 0.0))
    throw std::invalid_argument("TaskConfig: teacher_scale must be > 0");
}

SyntheticTask SyntheticTask::generate(const ToyModel& model, const TaskConfig& config) {
  config.validate();
  SyntheticTask task;
  task.config_ = config;

  // target teacher: base weights shifted by a low-rank update living in the
  // group-reshaped domain (G=1, M=2, reshape)
  const WeightManifest manifest = model.adaptation_manifest();
  const GroupPlan plan =
      build_group_plan(manifest, GroupMode::group_wise, 1, 2, /*reshape=*/true, 1.0);
  const Shape& target = plan.groups.front().target_shape;
  const std::size_t rows = target.dims[0], cols = target.dims[1];

  CounterRng urng(config.seed, 1);
  CounterRng vrng(config.seed, 2);
  DenseTensor folded(target);
  const double factor = config.teacher_scale /
                        (std::sqrt(static_cast<double>(config.teacher_rank)) *
                         std::sqrt(static_cast<double>(model.config.width)));
  for (std::size_t j = 0; j < config.teacher_rank; ++j) {
    std::vector<double> u(rows), v(cols);
    for (double& x : u) x = urng.next_normal();
    for (double& x : v) x = vrng.next_normal();
    for (std::size_t r = 0; r < rows; ++r) {
      const double fu = factor * u[r];
      for (std::size_t c = 0; c < cols; ++c) folded(r, c) += fu * v[c];
    }
  }
  task.teacher_deltas_ = scatter({folded}, plan, manifest);

  const Shape input_shape{model.config.seq_len, model.config.width};
  auto draw_inputs = [&](std::size_t count, std::uint64_t stream) {
    CounterRng rng(config.seed, stream);
    std::vector<DenseTensor> inputs;
    inputs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      DenseTensor x(input_shape);
      for (double& e : x.values()) e = rng.next_normal();
      inputs.push_back(std::move(x));
    }
    return inputs;
  };

  task.train_inputs_ = draw_inputs(config.train_samples, 3);
  task.train_labels_ = predict(model, task.teacher_deltas_, task.train_inputs_);
  task.eval_.inputs = draw_inputs(config.eval_samples, 4);
  task.eval_.labels = predict(model, task.teacher_deltas_, task.eval_.inputs);
  return task;
}

Batch SyntheticTask::train_batch(std::size_t step, std::size_t batch_size) const {
  Batch batch;
  for (std::size_t j = 0; j < batch_size; ++j) {
    const std::size_t idx = (step * batch_size + j) % train_inputs_.size();
    batch.inputs.push_back(train_inputs_[idx]);
    batch.labels.push_back(train_labels_[idx]);
  }
  return batch;
}

// --- training loop -------------------------------------------------------------

void TrainConfig::validate() const {
  if (steps < 1 || batch_size < 1 || eval_interval < 1)
    throw std::invalid_argument("TrainConfig: steps, batch_size and eval_interval must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("TrainConfig: learning_rate must be finite and >= 0");
}

namespace {

double eval_accuracy(const AdapterState& state, const ToyModel& model, const SyntheticTask& task) {
  const NamedTensors deltas = materialize_deltas(state);
  const std::vector<std::size_t> preds = predict(model, deltas, task.eval_batch().inputs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == task.eval_batch().labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

// spot check a few coordinates against central differences; a blown adjoint
// shows up here long before the loss curve does
void spot_gradient_check(const AdapterState& state, const ToyModel& model, const Batch& batch,
                         const std::vector<double>& analytic, std::uint64_t seed,
                         std::size_t step) {
  if (analytic.empty()) return;
  CounterRng rng(seed, step);
  AdapterState probe = state;
  std::vector<double> flat = probe.flat_parameters();
  const std::size_t checks = std::min<std::size_t>(3, analytic.size());
  for (std::size_t c = 0; c < checks; ++c) {
    const std::size_t i = rng.next_below(analytic.size());
    const double eps = 1e-5;
    const double saved = flat[i];
    flat[i] = saved + eps;
    probe.set_flat_parameters(flat);
    const double lp = adapter_batch_loss(probe, model, batch);
    flat[i] = saved - eps;
    probe.set_flat_parameters(flat);
    const double lm = adapter_batch_loss(probe, model, batch);
    flat[i] = saved;
    probe.set_flat_parameters(flat);
    const double fd = (lp - lm) / (2.0 * eps);
    const double scale = std::max({1.0, std::abs(fd), std::abs(analytic[i])});
    if (std::abs(fd - analytic[i]) > 1e-3 * scale)
      throw std::runtime_error("gradient check failed at step " + std::to_string(step) +
                               ", coordinate " + std::to_string(i) + ": analytic " +
                               std::to_string(analytic[i]) + " vs central difference " +
                               std::to_string(fd));
  }
}

}  // namespace

TrainResult train(AdapterState& state, const ToyModel& model, const SyntheticTask& task,
                  const TrainConfig& config) {
  config.validate();
  TrainResult result;
  double last_eval = 0.0;

  for (std::size_t step = 0; step < config.steps; ++step) {
    const Batch batch = task.train_batch(step, config.batch_size);
    const LossAndGrads lg = loss_and_grads(state, model, batch);
    if (!std::isfinite(lg.loss)) throw DivergenceError(step);

    const std::vector<double> grad = lg.grads.flatten(state);
    if (config.grad_check_interval > 0 && step % config.grad_check_interval == 0)
      spot_gradient_check(state, model, batch, grad, config.seed, step);

    if (step % config.eval_interval == 0 || step + 1 == config.steps)
      last_eval = eval_accuracy(state, model, task);
    result.history.push_back({step, lg.loss, last_eval});

    if (config.learning_rate != 0.0) {
      std::vector<double> flat = state.flat_parameters();
      for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= config.learning_rate * grad[i];
      state.set_flat_parameters(flat);
    }
  }

  result.initial_loss = result.history.front().loss;
  const std::size_t tail = std::max<std::size_t>(1, config.steps / 10);
  double acc = 0.0;
  for (std::size_t i = result.history.size() - tail; i < result.history.size(); ++i)
    acc += result.history[i].loss;
  result.final_loss = acc / static_cast<double>(tail);
  return result;
}

// --- run config ----------------------------------------------------------------

namespace {

void reject_unknown(const nlohmann::json& doc, std::initializer_list<const char*> known,
                    const char* where) {
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (std::find_if(known.begin(), known.end(),
                     [&](const char* k) { return key == k; }) == known.end())
      throw std::invalid_argument(std::string(where) + ": unknown key '" + key + "'");
  }
}

}  // namespace

ToyRunConfig parse_toy_run_config(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("train config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("train config: top level must be an object");
  reject_unknown(doc,
                 {"steps", "batch_size", "learning_rate", "grad_check_interval", "eval_interval",
                  "seed", "model", "task"},
                 "train config");

  ToyRunConfig run;
  if (doc.contains("steps")) run.train.steps = doc.at("steps").get<std::size_t>();
  if (doc.contains("batch_size")) run.train.batch_size = doc.at("batch_size").get<std::size_t>();
  if (doc.contains("learning_rate")) run.train.learning_rate = doc.at("learning_rate").get<double>();
  if (doc.contains("grad_check_interval"))
    run.train.grad_check_interval = doc.at("grad_check_interval").get<std::size_t>();
  if (doc.contains("eval_interval"))
    run.train.eval_interval = doc.at("eval_interval").get<std::size_t>();
  if (doc.contains("seed")) run.train.seed = doc.at("seed").get<std::uint64_t>();

  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    reject_unknown(m, {"layers", "width", "classes", "seq_len", "ffn_mult", "seed"},
                   "train config model");
    if (m.contains("layers")) run.model.layers = m.at("layers").get<std::size_t>();
    if (m.contains("width")) run.model.width = m.at("width").get<std::size_t>();
    if (m.contains("classes")) run.model.classes = m.at("classes").get<std::size_t>();
    if (m.contains("seq_len")) run.model.seq_len = m.at("seq_len").get<std::size_t>();
    if (m.contains("ffn_mult")) run.model.ffn_mult = m.at("ffn_mult").get<std::size_t>();
    if (m.contains("seed")) run.model_seed = m.at("seed").get<std::uint64_t>();
  }
  if (doc.contains("task")) {
    const auto& t = doc.at("task");
    reject_unknown(t, {"train_samples", "eval_samples", "teacher_rank", "teacher_scale", "seed"},
                   "train config task");
    if (t.contains("train_samples")) run.task.train_samples = t.at("train_samples").get<std::size_t>();
    if (t.contains("eval_samples")) run.task.eval_samples = t.at("eval_samples").get<std::size_t>();
    if (t.contains("teacher_rank")) run.task.teacher_rank = t.at("teacher_rank").get<std::size_t>();
    if (t.contains("teacher_scale")) run.task.teacher_scale = t.at("teacher_scale").get<double>();
    if (t.contains("seed")) run.task.seed = t.at("seed").get<std::uint64_t>();
  }
  run.model.validate();
  run.task.validate();
  run.train.validate();
  return run;
}

ToyRunConfig read_toy_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("train config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_toy_run_config(buf.str());
}

}  // namespace superlora
