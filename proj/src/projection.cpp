#include "superlora/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "superlora/rng.hpp"

namespace superlora {

const char* to_string(ProjectionMode mode) {
  switch (mode) {
    case ProjectionMode::identity: return "identity";
    case ProjectionMode::shuffle: return "shuffle";
    case ProjectionMode::linear: return "linear";
    case ProjectionMode::linear_v2: return "linear_v2";
    case ProjectionMode::nonlinear: return "nonlinear";
    case ProjectionMode::nonlinear_v2: return "nonlinear_v2";
  }
  return "?";
}

ProjectionMode projection_mode_from_string(const std::string& s) {
  if (s == "identity") return ProjectionMode::identity;
  if (s == "shuffle") return ProjectionMode::shuffle;
  if (s == "linear") return ProjectionMode::linear;
  if (s == "linear_v2") return ProjectionMode::linear_v2;
  if (s == "nonlinear") return ProjectionMode::nonlinear;
  if (s == "nonlinear_v2") return ProjectionMode::nonlinear_v2;
  throw std::invalid_argument("unknown projection mode '" + s + "'");
}

bool is_linear_chain(ProjectionMode mode) {
  return mode != ProjectionMode::nonlinear && mode != ProjectionMode::nonlinear_v2;
}

void ProjectionSpec::validate() const {
  if (n_in == 0 || n_out == 0)
    throw std::invalid_argument("ProjectionSpec: sizes must be >= 1");
  const bool size_preserving =
      mode == ProjectionMode::identity || mode == ProjectionMode::shuffle;
  if (size_preserving && n_in != n_out)
    throw std::invalid_argument(std::string("ProjectionSpec: ") + to_string(mode) +
                                " requires n_in == n_out, got " + std::to_string(n_in) +
                                " -> " + std::to_string(n_out));
  if (!size_preserving && n_in > n_out)
    throw std::invalid_argument("ProjectionSpec: fastfood modes require n_in <= n_out, got " +
                                std::to_string(n_in) + " -> " + std::to_string(n_out));
}

namespace {

unsigned ceil_log2(std::size_t n) {
  unsigned e = 0;
  std::size_t p = 1;
  while (p < n) {
    p <<= 1;
    ++e;
  }
  return e;
}

// Fisher-Yates with the shared counter generator (stream 0 of the seed).
std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  CounterRng rng(seed, 0);
  for (std::size_t i = n; i-- > 1;)
    std::swap(perm[i], perm[rng.next_below(i + 1)]);
  return perm;
}

}  // namespace

ProjectionState make_projection(const ProjectionSpec& spec) {
  spec.validate();
  ProjectionState state;
  state.spec = spec;
  state.exponent = ceil_log2(std::max(spec.n_in, spec.n_out));
  state.padded = std::size_t{1} << state.exponent;

  switch (spec.mode) {
    case ProjectionMode::identity:
      break;
    case ProjectionMode::shuffle:
      state.permutation = random_permutation(spec.n_in, spec.seed);
      break;
    case ProjectionMode::linear:
    case ProjectionMode::linear_v2:
    case ProjectionMode::nonlinear:
    case ProjectionMode::nonlinear_v2: {
      state.permutation = random_permutation(state.padded, spec.seed);
      CounterRng gauss_rng(spec.seed, 1);
      state.gauss.resize(state.padded);
      for (double& g : state.gauss) g = gauss_rng.next_normal();
      CounterRng diag_rng(spec.seed, 2);
      state.right_diag.resize(spec.n_out);
      const bool v2 = spec.mode == ProjectionMode::linear_v2 ||
                      spec.mode == ProjectionMode::nonlinear_v2;
      for (double& b : state.right_diag)
        b = v2 ? diag_rng.next_normal() : diag_rng.next_rademacher();
      break;
    }
  }
  return state;
}

namespace {

void check_length(const DenseTensor& x, std::size_t want, const char* what) {
  if (x.order() != 1 || x.size() != want)
    throw std::invalid_argument(std::string(what) + ": expected 1-D length " +
                                std::to_string(want) + ", got " + to_string(x.shape()));
}

}  // namespace

DenseTensor apply_linear_part(const ProjectionState& state, const DenseTensor& x) {
  check_length(x, state.spec.n_in, "projection apply");
  switch (state.spec.mode) {
    case ProjectionMode::identity:
      return x;
    case ProjectionMode::shuffle: {
      DenseTensor out(Shape{state.spec.n_in});
      for (std::size_t i = 0; i < state.permutation.size(); ++i)
        out[i] = x[state.permutation[i]];
      return out;
    }
    default: {
      // pad -> FWHT -> diag(gauss) -> permute -> FWHT -> truncate -> diag
      std::vector<double> buf(state.padded, 0.0);
      std::copy(x.values().begin(), x.values().end(), buf.begin());
      fwht_inplace(buf);
      for (std::size_t i = 0; i < state.padded; ++i) buf[i] *= state.gauss[i];
      std::vector<double> shuffled(state.padded);
      for (std::size_t i = 0; i < state.padded; ++i) shuffled[i] = buf[state.permutation[i]];
      fwht_inplace(shuffled);
      DenseTensor out(Shape{state.spec.n_out});
      for (std::size_t i = 0; i < state.spec.n_out; ++i)
        out[i] = shuffled[i] * state.right_diag[i];
      return out;
    }
  }
}

DenseTensor apply(const ProjectionState& state, const DenseTensor& x) {
  DenseTensor out = apply_linear_part(state, x);
  if (!is_linear_chain(state.spec.mode))
    for (double& v : out.values()) v = tanhshrink(v);
  return out;
}

DenseTensor apply_adjoint(const ProjectionState& state, const DenseTensor& g) {
  check_length(g, state.spec.n_out, "projection adjoint");
  switch (state.spec.mode) {
    case ProjectionMode::identity:
      return g;
    case ProjectionMode::shuffle: {
      DenseTensor out(Shape{state.spec.n_in});
      for (std::size_t i = 0; i < state.permutation.size(); ++i)
        out[state.permutation[i]] = g[i];
      return out;
    }
    default: {
      // transpose of the linear chain: diag -> pad -> FWHT -> inverse
      // permute -> diag(gauss) -> FWHT -> truncate
      std::vector<double> buf(state.padded, 0.0);
      for (std::size_t i = 0; i < state.spec.n_out; ++i)
        buf[i] = g[i] * state.right_diag[i];
      fwht_inplace(buf);
      std::vector<double> unshuffled(state.padded);
      for (std::size_t i = 0; i < state.padded; ++i)
        unshuffled[state.permutation[i]] = buf[i];
      for (std::size_t i = 0; i < state.padded; ++i) unshuffled[i] *= state.gauss[i];
      fwht_inplace(unshuffled);
      DenseTensor out(Shape{state.spec.n_in});
      std::copy(unshuffled.begin(), unshuffled.begin() + state.spec.n_in, out.values().begin());
      return out;
    }
  }
}

}  // namespace superlora
