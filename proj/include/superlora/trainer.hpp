#ifndef SUPERLORA_TRAINER_HPP
#define SUPERLORA_TRAINER_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "superlora/adapter.hpp"

namespace superlora {

// Frozen multi-layer single-head attention model at desk scale. Adaptation
// targets are exactly the per-layer query and value projections.
struct ToyModelConfig {
  std::size_t layers = 2;
  std::size_t width = 8;
  std::size_t classes = 4;
  std::size_t seq_len = 3;
  std::size_t ffn_mult = 2;  // MLP hidden width = ffn_mult * width

  void validate() const;
};

struct LayerWeights {
  DenseTensor wq, wk, wv, wo;  // width x width
  DenseTensor w1, w2;          // width x hidden, hidden x width
};

struct ToyModel {
  ToyModelConfig config;
  std::vector<LayerWeights> layers;
  DenseTensor classifier;  // width x classes

  static ToyModel random(const ToyModelConfig& config, std::uint64_t seed);

  // q and v projections per layer, in layer order, q before v
  WeightManifest adaptation_manifest() const;
  std::uint64_t weights_checksum() const;  // CRC32 over all frozen weights
};

struct Batch {
  std::vector<DenseTensor> inputs;  // each (seq_len, width)
  std::vector<std::size_t> labels;
};

struct LayerCache {
  DenseTensor in, q, k, v, attn, hidden;
};

struct SampleCache {
  std::vector<LayerCache> layers;
  std::vector<double> probs;
};

struct ForwardCache {
  std::vector<SampleCache> samples;
};

// Softmax-attention forward with adapted q/v weights and mean cross-entropy
// loss. `deltas` must hold one tensor per adaptation target.
double forward_loss(const ToyModel& model, const NamedTensors& deltas, const Batch& batch,
                    ForwardCache* cache = nullptr);

// Gradients of the batch loss with respect to the per-weight deltas
// (equivalently, the adapted weights); frozen weights receive none.
NamedTensors backward_delta_grads(const ToyModel& model, const NamedTensors& deltas,
                                  const Batch& batch, const ForwardCache& cache);

std::vector<std::size_t> predict(const ToyModel& model, const NamedTensors& deltas,
                                 const std::vector<DenseTensor>& inputs);

// Full pipeline loss: materialize the adapter, run the model.
double adapter_batch_loss(const AdapterState& state, const ToyModel& model, const Batch& batch);

struct LossAndGrads {
  double loss = 0.0;
  AdapterGrads grads;
};

// Reverse mode through model, scatter, projection, Kronecker chain and
// core/plane factors, for every trainable scalar.
LossAndGrads loss_and_grads(const AdapterState& state, const ToyModel& model, const Batch& batch);

// Deterministic teacher-labelled transfer task. The source teacher is the
// frozen base model itself; the target teacher shifts the base q/v weights
// by a low-rank update generated in the group-reshaped domain, so labels are
// reachable by the adapters under test.
struct TaskConfig {
  std::size_t train_samples = 256;
  std::size_t eval_samples = 64;
  std::size_t teacher_rank = 2;
  double teacher_scale = 0.7;  // delta magnitude relative to base weight scale
  std::uint64_t seed = 1;

  void validate() const;
};

class SyntheticTask {
 public:
  static SyntheticTask generate(const ToyModel& model, const TaskConfig& config);

  const TaskConfig& config() const { return config_; }
  const NamedTensors& teacher_deltas() const { return teacher_deltas_; }
  std::size_t train_samples() const { return train_inputs_.size(); }

  // fixed rotation through the training samples; deterministic per step
  Batch train_batch(std::size_t step, std::size_t batch_size) const;
  const Batch& eval_batch() const { return eval_; }

 private:
  TaskConfig config_;
  std::vector<DenseTensor> train_inputs_;
  std::vector<std::size_t> train_labels_;
  Batch eval_;
  NamedTensors teacher_deltas_;
};

struct TrainConfig {
  std::size_t steps = 500;
  std::size_t batch_size = 8;
  double learning_rate = 0.5;
  std::size_t grad_check_interval = 0;  // 0 disables spot finite-difference checks
  std::size_t eval_interval = 25;
  std::uint64_t seed = 0;  // grad-check coordinate picks

  void validate() const;
};

struct StepMetrics {
  std::size_t step = 0;
  double loss = 0.0;
  double eval_acc = 0.0;
};

struct TrainResult {
  std::vector<StepMetrics> history;
  double initial_loss = 0.0;
  double final_loss = 0.0;  // mean over the last 10% of steps
};

struct DivergenceError : std::runtime_error {
  explicit DivergenceError(std::size_t at_step)
      : std::runtime_error("training diverged at step " + std::to_string(at_step) +
                           ": loss is not finite"),
        step(at_step) {}
  std::size_t step;
};

// Plain SGD on the adapter factors only; the model stays frozen.
TrainResult train(AdapterState& state, const ToyModel& model, const SyntheticTask& task,
                  const TrainConfig& config);

// Model, task and training settings for one toy run, as read by the CLI.
struct ToyRunConfig {
  ToyModelConfig model;
  std::uint64_t model_seed = 11;
  TaskConfig task;
  TrainConfig train;
};

ToyRunConfig parse_toy_run_config(const std::string& json_text);
ToyRunConfig read_toy_run_config(const std::filesystem::path& path);

}  // namespace superlora

#endif  // SUPERLORA_TRAINER_HPP
