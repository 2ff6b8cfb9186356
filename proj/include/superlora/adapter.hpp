#ifndef SUPERLORA_ADAPTER_HPP
#define SUPERLORA_ADAPTER_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "superlora/factorization.hpp"
#include "superlora/grouping.hpp"
#include "superlora/projection.hpp"

namespace superlora {

enum class ScaleMode { alpha_over_r, alpha };

const char* to_string(ScaleMode mode);
ScaleMode scale_mode_from_string(const std::string& s);

// Full hyperparameter record of one adapter.
struct SuperLoraConfig {
  std::size_t groups = 1;                        // G
  GroupMode group_mode = GroupMode::group_wise;
  std::size_t order = 2;                         // M
  std::size_t splits = 1;                        // K
  std::vector<std::size_t> ranks = {8};          // scalar replicated, or per-mode
  CoreKind core = CoreKind::identity;
  bool reshape = true;
  ProjectionMode projection = ProjectionMode::identity;
  std::uint64_t projection_seed = 0;
  double rho = 1.0;
  double alpha = 1.0;
  std::optional<std::size_t> dense_split_dim;    // LoNKr/LoKr left dense factor
  ScaleMode scale_mode = ScaleMode::alpha_over_r;
  bool shared_projection = true;

  void validate() const;
  std::vector<std::size_t> mode_ranks() const;   // expanded to `order` entries
  double delta_scale() const;                    // alpha/r or alpha
};

// JSON schema carries exactly these fields; unknown keys are rejected and
// missing keys take the defaults above.
SuperLoraConfig parse_config(const std::string& json_text);
SuperLoraConfig read_config(const std::filesystem::path& path);
std::string config_to_json(const SuperLoraConfig& config);

// First matching taxonomy row: dense FT, LoRA, LoKr, LoTR, LoNKr, LoRTA,
// otherwise "SuperLoRA (general)".
std::string classify_variant(const SuperLoraConfig& config);

// Everything needed to materialize deltas: the group plan, trainable factors
// per group and the frozen per-group projection states.
struct AdapterState {
  SuperLoraConfig config;
  WeightManifest manifest;
  GroupPlan plan;
  std::vector<FactorizedGroup> groups;
  std::vector<ProjectionState> projections;  // one per group
  std::uint64_t base_seed = 0;

  std::size_t trainable_count() const;
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);
};

// Split structure for one group target; exposed so parameter counting and
// sweeps share the exact dimension-assignment logic with init. Throws on
// infeasible Kronecker splits (e.g. K=2 over a prime dimension).
std::vector<SplitSpec> make_split_specs(const SuperLoraConfig& config, const Shape& target);

// Builds the plan, draws zero-product factors (only the last split of each
// group is zeroed, so the materialized delta starts exactly at zero), and
// derives projection states from config.projection_seed (shared across
// groups when sizes agree and sharing is on, per-group derived seeds
// otherwise).
AdapterState init_adapter(const SuperLoraConfig& config, const WeightManifest& manifest,
                          std::uint64_t seed);

// Trainable parameter total; the projection contributes zero.
std::size_t count_params(const SuperLoraConfig& config, const WeightManifest& manifest);

// Intermediates the reverse pass needs: per-group split outputs (Kronecker
// chains) and pre-tanhshrink activations (nonlinear projections).
struct MaterializeCache {
  std::vector<std::vector<DenseTensor>> split_outputs;
  std::vector<DenseTensor> preactivations;
};

// Per group: materialize -> vectorize -> truncate to lora_elements ->
// project -> scatter across the manifest, then scale every delta by
// delta_scale(). The regular_dims padding never reaches the output.
NamedTensors materialize_deltas(const AdapterState& state, MaterializeCache* cache = nullptr);

// W' = W + delta per name; base is untouched. Key sets must agree.
NamedTensors apply_to_base(const NamedTensors& base, const NamedTensors& deltas);

// Cotangents of every trainable factor given cotangents of the named deltas.
struct AdapterGrads {
  std::vector<std::vector<SplitGrads>> groups;

  std::vector<double> flatten(const AdapterState& state) const;
};

AdapterGrads delta_gradients(const AdapterState& state, const MaterializeCache& cache,
                             const NamedTensors& delta_grads);

// Adapter file: magic "SLAD", u32 version, length-prefixed config and
// manifest JSON, base seed, then SLTF-framed factor tensors in (group,
// split, core-then-planes) order, CRC32 trailer. Projections are rebuilt
// from their seeds on load.
void save_adapter(const AdapterState& state, const std::filesystem::path& path);
AdapterState load_adapter(const std::filesystem::path& path);

}  // namespace superlora

#endif  // SUPERLORA_ADAPTER_HPP
