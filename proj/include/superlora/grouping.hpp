#ifndef SUPERLORA_GROUPING_HPP
#define SUPERLORA_GROUPING_HPP

#include <cstddef>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "superlora/tensor.hpp"

namespace superlora {

// A configuration that is well-formed on its own but impossible on the given
// manifest (e.g. Kronecker splits over a prime dimension, or stacking across
// a weight boundary without reshape).
struct InfeasibleConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Ordered list of named 2-D weight shapes defining the adaptation target.
struct ManifestEntry {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t elements() const { return rows * cols; }
  Shape shape() const { return Shape{rows, cols}; }
};

struct WeightManifest {
  std::vector<ManifestEntry> entries;

  std::size_t total_elements() const;
  void validate() const;  // unique names, nonzero shapes
};

// Manifest file: JSON array of {"name": string, "shape": [rows, cols]},
// order significant.
WeightManifest read_manifest(const std::filesystem::path& path);
WeightManifest parse_manifest(const std::string& json_text);
std::string manifest_to_json(const WeightManifest& manifest);

enum class GroupMode { weight_wise, group_wise };

const char* to_string(GroupMode mode);
GroupMode group_mode_from_string(const std::string& s);

// One group's slice of the concatenated row-major update vector, the shape
// the factorization materializes for it, and the element count it must
// produce ahead of the projection.
struct GroupRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  Shape target_shape;
  std::size_t lora_elements = 0;

  std::size_t length() const { return end - begin; }
};

struct GroupPlan {
  std::vector<GroupRange> groups;
  GroupMode mode = GroupMode::group_wise;
};

// Deterministic near-balanced M-tuple with product p, n <= p < 2n and
// max(d)/min(d) <= 4. Scans upward from n for the first target admitting
// such a factorization; for each candidate picks d_m (m = M..1) as its
// smallest divisor >= remaining^(1/m). Excess p-n elements are dropped
// when groups are scattered back onto weights.
Shape regular_dims(std::size_t n, std::size_t order);

// Partition the manifest into G groups. Weight-wise plans require G equal to
// the entry count and align ranges with entry boundaries; group-wise plans
// cut [0, total) into G contiguous near-equal ranges (the first total%G get
// one extra element). lora_elements = round(rho * range length), >= 1.
// Without reshape the target is the natural row-stacked 2-D shape, which
// requires rho = 1, matching column counts, and group boundaries that align
// with weight boundaries.
GroupPlan build_group_plan(const WeightManifest& manifest, GroupMode mode,
                           std::size_t groups, std::size_t order, bool reshape,
                           double rho);

using NamedTensors = std::map<std::string, DenseTensor>;

// Row-major flatten of each per-weight delta, concatenated in manifest order.
DenseTensor gather(const WeightManifest& manifest, const NamedTensors& deltas);

// Inverse of gather: vectorize each group tensor, truncate to its range
// length, concatenate, and slice back into named per-weight deltas.
NamedTensors scatter(const std::vector<DenseTensor>& group_tensors,
                     const GroupPlan& plan, const WeightManifest& manifest);

}  // namespace superlora

#endif  // SUPERLORA_GROUPING_HPP
