#ifndef SUPERLORA_FACTORIZATION_HPP
#define SUPERLORA_FACTORIZATION_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "superlora/tensor.hpp"

namespace superlora {

enum class CoreKind { identity, diagonal, full };

const char* to_string(CoreKind kind);
CoreKind core_kind_from_string(const std::string& s);

// Core tensor structure for one split: identity and diagonal cores are
// superdiagonal (all mode ranks equal); a full core permits distinct ranks.
struct CoreSpec {
  CoreKind kind = CoreKind::identity;
  std::vector<std::size_t> ranks;  // one per mode

  void validate() const;
};

// Structure of one split, before any values exist.
struct SplitSpec {
  CoreSpec core;
  Shape out_shape;          // (d_1, ..., d_M)
  bool dense = false;       // full 2-D trainable block (LoNKr left factor)

  std::size_t order() const { return out_shape.order(); }
  void validate() const;
};

// One split's trainable values: core values (empty for the identity core,
// length-r vector for diagonal, r_1 x ... x r_M tensor for full, the whole
// 2-D block for a dense split) plus M plane factors of shape (d_m, r_m).
struct SplitFactors {
  SplitSpec spec;
  DenseTensor core;
  std::vector<DenseTensor> planes;

  void validate() const;
};

// Ordered Kronecker chain: for K > 1 every split output must be 2-D.
struct FactorizedGroup {
  std::vector<SplitFactors> splits;

  void validate() const;
};

// Trainable scalar count of a split:
//   dense     -> d_1 * d_2
//   identity  -> sum_m d_m r_m
//   diagonal  -> r + sum_m d_m r_m
//   full      -> prod_m r_m + sum_m d_m r_m
std::size_t count_split(const SplitSpec& spec);

// C x_1 A_1 x_2 ... x_M A_M with shape out_shape. Superdiagonal cores are
// evaluated by direct CP summation, never expanded to a dense r^M core.
DenseTensor materialize_split(const SplitFactors& split);

// K = 1 passes through; K > 1 left-folds the Kronecker product of the split
// results in list order.
DenseTensor materialize_group(const FactorizedGroup& group);

// Initialization schemes:
//   "zero-product": last plane all-zeros, remaining planes N(0, 1/d_m),
//                   core values N(0, 1) -- the materialized split is exactly
//                   zero. Dense splits are zero-filled.
//   "random":       as above but without zeroing anything; used for the
//                   non-final splits of a Kronecker chain so they stay
//                   informative while one zero split annihilates the product.
SplitFactors init_factors(const SplitSpec& spec, std::uint64_t seed,
                          std::string_view scheme = "zero-product");

// --- adjoints (reverse-mode transport for the trainer) ----------------------

struct SplitGrads {
  DenseTensor core;                 // same shape as the split's core values
  std::vector<DenseTensor> planes;  // same shapes as the plane factors
};

// d<out_grad, materialize_split(split)> / d(values). Pure contraction; the
// finite-difference suites pin it down.
SplitGrads split_gradients(const SplitFactors& split, const DenseTensor& out_grad);

// Per-split gradients through the Kronecker chain. split_outputs must be the
// materialized splits (as produced by materialize_split, in order).
std::vector<SplitGrads> group_gradients(const FactorizedGroup& group,
                                        const std::vector<DenseTensor>& split_outputs,
                                        const DenseTensor& out_grad);

}  // namespace superlora

#endif  // SUPERLORA_FACTORIZATION_HPP
