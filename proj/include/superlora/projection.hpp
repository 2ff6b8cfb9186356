#ifndef SUPERLORA_PROJECTION_HPP
#define SUPERLORA_PROJECTION_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "superlora/tensor.hpp"

namespace superlora {

// The six fixed mappings from a factorized group output to the group delta.
// identity and shuffle are size-preserving; the fastfood variants map
// n_in <= n_out through pad -> FWHT -> diag(gauss) -> permute -> FWHT ->
// truncate -> diag(right); v2 modes draw the right diagonal from a normal
// instead of a Rademacher distribution, nonlinear modes append tanhshrink.
enum class ProjectionMode {
  identity,
  shuffle,
  linear,
  linear_v2,
  nonlinear,
  nonlinear_v2,
};

const char* to_string(ProjectionMode mode);
ProjectionMode projection_mode_from_string(const std::string& s);

bool is_linear_chain(ProjectionMode mode);  // true unless tanhshrink applies

struct ProjectionSpec {
  ProjectionMode mode = ProjectionMode::identity;
  std::uint64_t seed = 0;
  std::size_t n_in = 0;
  std::size_t n_out = 0;

  void validate() const;
};

// Frozen randomness of one projection. Rebuilding from the same seed is
// bitwise identical, so states are never serialized. The permutation covers [0, 2^N) for fastfood modes (N =
// ceil(log2(max(n_in, n_out)))) and [0, n) for shuffle.
struct ProjectionState {
  ProjectionSpec spec;
  unsigned exponent = 0;                 // N
  std::size_t padded = 0;                // 2^N (fastfood modes)
  std::vector<std::size_t> permutation;
  std::vector<double> gauss;             // 2^N draws
  std::vector<double> right_diag;        // n_out draws, +-1 unless a v2 mode
};

ProjectionState make_projection(const ProjectionSpec& spec);

// Forward map, length n_in -> n_out.
DenseTensor apply(const ProjectionState& state, const DenseTensor& x);

// Forward map without the tanhshrink tail; for linear-chain modes this
// equals apply. The trainer differentiates nonlinear modes through it.
DenseTensor apply_linear_part(const ProjectionState& state, const DenseTensor& x);

// Transpose of the linear chain, length n_out -> n_in. For nonlinear modes
// the caller must fold the tanhshrink Jacobian tanh(z)^2 into g first, with
// z the cached apply_linear_part output.
DenseTensor apply_adjoint(const ProjectionState& state, const DenseTensor& g);

inline double tanhshrink(double x) { return x - std::tanh(x); }

}  // namespace superlora

#endif  // SUPERLORA_PROJECTION_HPP
