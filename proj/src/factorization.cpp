#include "superlora/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "superlora/rng.hpp"

namespace superlora {

const char* to_string(CoreKind kind) {
  switch (kind) {
    case CoreKind::identity: return "identity";
    case CoreKind::diagonal: return "diagonal";
    case CoreKind::full: return "full";
  }
  return "?";
}

CoreKind core_kind_from_string(const std::string& s) {
  if (s == "identity") return CoreKind::identity;
  if (s == "diagonal") return CoreKind::diagonal;
  if (s == "full") return CoreKind::full;
  throw std::invalid_argument("unknown core kind '" + s + "'");
}

void CoreSpec::validate() const {
  if (ranks.empty()) throw std::invalid_argument("CoreSpec: no ranks");
  for (std::size_t r : ranks)
    if (r == 0) throw std::invalid_argument("CoreSpec: rank must be >= 1");
  if (kind != CoreKind::full) {
    for (std::size_t r : ranks)
      if (r != ranks.front())
        throw std::invalid_argument(
            std::string("CoreSpec: a superdiagonal (") + to_string(kind) +
            ") core requires equal mode ranks");
  }
}

void SplitSpec::validate() const {
  if (dense) {
    if (out_shape.order() != 2)
      throw std::invalid_argument("SplitSpec: dense split must be 2-D, got " +
                                  to_string(out_shape));
    return;
  }
  core.validate();
  if (core.ranks.size() != out_shape.order())
    throw std::invalid_argument("SplitSpec: " + std::to_string(core.ranks.size()) +
                                " ranks for order-" + std::to_string(out_shape.order()) +
                                " output");
  out_shape.element_count();  // validates extents
}

void SplitFactors::validate() const {
  spec.validate();
  if (spec.dense) {
    if (!(core.shape() == spec.out_shape))
      throw std::invalid_argument("SplitFactors: dense block shape " + to_string(core.shape()) +
                                  " != " + to_string(spec.out_shape));
    if (!planes.empty())
      throw std::invalid_argument("SplitFactors: dense split carries no plane factors");
    return;
  }
  const std::size_t order = spec.order();
  if (planes.size() != order)
    throw std::invalid_argument("SplitFactors: " + std::to_string(planes.size()) +
                                " planes for order " + std::to_string(order));
  for (std::size_t m = 0; m < order; ++m) {
    const Shape want{spec.out_shape.dims[m], spec.core.ranks[m]};
    if (!(planes[m].shape() == want))
      throw std::invalid_argument("SplitFactors: plane " + std::to_string(m) + " has shape " +
                                  to_string(planes[m].shape()) + ", expected " + to_string(want));
  }
  switch (spec.core.kind) {
    case CoreKind::identity:
      if (core.size() != 0)
        throw std::invalid_argument("SplitFactors: identity core carries no values");
      break;
    case CoreKind::diagonal:
      if (!(core.shape() == Shape{spec.core.ranks.front()}))
        throw std::invalid_argument("SplitFactors: diagonal core must be 1-D of length r");
      break;
    case CoreKind::full:
      if (!(core.shape() == Shape(spec.core.ranks)))
        throw std::invalid_argument("SplitFactors: full core shape " + to_string(core.shape()) +
                                    " != ranks " + to_string(Shape(spec.core.ranks)));
      break;
  }
}

void FactorizedGroup::validate() const {
  if (splits.empty()) throw std::invalid_argument("FactorizedGroup: K must be >= 1");
  for (const SplitFactors& s : splits) s.validate();
  if (splits.size() > 1) {
    for (const SplitFactors& s : splits)
      if (s.spec.out_shape.order() != 2)
        throw std::invalid_argument(
            "FactorizedGroup: Kronecker composition needs 2-D splits, got " +
            to_string(s.spec.out_shape));
  }
}

std::size_t count_split(const SplitSpec& spec) {
  spec.validate();
  if (spec.dense) return spec.out_shape.element_count();
  std::size_t planes = 0;
  for (std::size_t m = 0; m < spec.order(); ++m)
    planes += spec.out_shape.dims[m] * spec.core.ranks[m];
  switch (spec.core.kind) {
    case CoreKind::identity: return planes;
    case CoreKind::diagonal: return planes + spec.core.ranks.front();
    case CoreKind::full: {
      std::size_t core = 1;
      for (std::size_t r : spec.core.ranks) core *= r;
      return planes + core;
    }
  }
  return 0;
}

namespace {

// CP evaluation: out[i...] += sum_j w_j prod_m A_m(i_m, j), without ever
// expanding the superdiagonal core.
void cp_accumulate(const SplitFactors& split, std::span<const double> weights,
                   DenseTensor& out) {
  const std::size_t order = split.spec.order();
  const std::size_t r = split.spec.core.ranks.front();
  const auto& dims = split.spec.out_shape.dims;

  if (order == 1) {
    const DenseTensor& a = split.planes[0];
    for (std::size_t j = 0; j < r; ++j) {
      const double w = weights[j];
      for (std::size_t i = 0; i < dims[0]; ++i) out[i] += w * a(i, j);
    }
    return;
  }

  std::vector<std::vector<double>> cols(order);
  for (std::size_t j = 0; j < r; ++j) {
    for (std::size_t m = 0; m < order; ++m) {
      cols[m].resize(dims[m]);
      for (std::size_t i = 0; i < dims[m]; ++i) cols[m][i] = split.planes[m](i, j);
    }
    if (order == 2) {
      double* dst = out.values().data();
      const std::size_t d1 = dims[0], d2 = dims[1];
      for (std::size_t i = 0; i < d1; ++i) {
        const double f = weights[j] * cols[0][i];
        if (f == 0.0) continue;
        double* row = dst + i * d2;
        for (std::size_t k = 0; k < d2; ++k) row[k] += f * cols[1][k];
      }
      continue;
    }
    // generic order: odometer over the leading M-1 axes, contiguous last axis
    const std::size_t last = dims[order - 1];
    const std::size_t blocks = out.size() / last;
    std::vector<std::size_t> idx(order - 1, 0);
    double* dst = out.values().data();
    for (std::size_t blk = 0; blk < blocks; ++blk) {
      double prefix = weights[j];
      for (std::size_t m = 0; m + 1 < order; ++m) prefix *= cols[m][idx[m]];
      if (prefix != 0.0) {
        const double* lc = cols[order - 1].data();
        double* row = dst + blk * last;
        for (std::size_t k = 0; k < last; ++k) row[k] += prefix * lc[k];
      }
      for (std::size_t m = order - 1; m-- > 0;) {
        if (++idx[m] < dims[m]) break;
        idx[m] = 0;
      }
    }
  }
}

}  // namespace

DenseTensor materialize_split(const SplitFactors& split) {
  split.validate();
  if (split.spec.dense) return split.core;

  if (split.spec.core.kind == CoreKind::full) {
    DenseTensor acc = split.core;
    for (std::size_t m = 0; m < split.spec.order(); ++m)
      acc = mode_product(acc, split.planes[m], m);
    return acc;
  }

  const std::size_t r = split.spec.core.ranks.front();
  std::vector<double> weights(r, 1.0);
  if (split.spec.core.kind == CoreKind::diagonal)
    std::copy(split.core.values().begin(), split.core.values().end(), weights.begin());
  DenseTensor out(split.spec.out_shape);
  cp_accumulate(split, weights, out);
  return out;
}

DenseTensor materialize_group(const FactorizedGroup& group) {
  group.validate();
  DenseTensor acc = materialize_split(group.splits.front());
  for (std::size_t k = 1; k < group.splits.size(); ++k)
    acc = kronecker(acc, materialize_split(group.splits[k]));
  return acc;
}

namespace {

DenseTensor random_tensor(Shape shape, CounterRng& rng, double stddev) {
  DenseTensor t(std::move(shape));
  for (double& x : t.values()) x = stddev * rng.next_normal();
  return t;
}

}  // namespace

SplitFactors init_factors(const SplitSpec& spec, std::uint64_t seed,
                          std::string_view scheme) {
  spec.validate();
  const bool zero_product = scheme == "zero-product";
  if (!zero_product && scheme != "random")
    throw std::invalid_argument("init_factors: unknown scheme '" + std::string(scheme) + "'");

  SplitFactors out;
  out.spec = spec;

  if (spec.dense) {
    if (zero_product) {
      out.core = DenseTensor(spec.out_shape);
    } else {
      CounterRng rng(seed, 0);
      out.core = random_tensor(spec.out_shape, rng, 1.0 / std::sqrt(double(spec.out_shape.dims[0])));
    }
    return out;
  }

  // stream 0 for the core, stream m+1 for plane m; draws stay aligned with
  // the (core, planes...) serialization order
  switch (spec.core.kind) {
    case CoreKind::identity:
      out.core = DenseTensor();
      break;
    case CoreKind::diagonal: {
      CounterRng rng(seed, 0);
      out.core = random_tensor(Shape{spec.core.ranks.front()}, rng, 1.0);
      break;
    }
    case CoreKind::full: {
      CounterRng rng(seed, 0);
      out.core = random_tensor(Shape(spec.core.ranks), rng, 1.0);
      break;
    }
  }

  const std::size_t order = spec.order();
  for (std::size_t m = 0; m < order; ++m) {
    const Shape shape{spec.out_shape.dims[m], spec.core.ranks[m]};
    if (zero_product && m == order - 1) {
      out.planes.emplace_back(shape);
      continue;
    }
    CounterRng rng(seed, m + 1);
    out.planes.push_back(random_tensor(shape, rng, 1.0 / std::sqrt(double(spec.out_shape.dims[m]))));
  }
  return out;
}

// --- adjoints ----------------------------------------------------------------

namespace {

// grads for a superdiagonal (identity/diagonal) split via per-column
// contractions; the M=2 case reduces to two matrix products per column.
SplitGrads cp_gradients(const SplitFactors& split, const DenseTensor& out_grad) {
  const std::size_t order = split.spec.order();
  const std::size_t r = split.spec.core.ranks.front();
  const auto& dims = split.spec.out_shape.dims;
  const bool diagonal = split.spec.core.kind == CoreKind::diagonal;

  SplitGrads grads;
  if (diagonal) grads.core = DenseTensor(Shape{r});
  for (std::size_t m = 0; m < order; ++m)
    grads.planes.emplace_back(Shape{dims[m], r});

  std::vector<double> weights(r, 1.0);
  if (diagonal)
    std::copy(split.core.values().begin(), split.core.values().end(), weights.begin());

  if (order == 2) {
    // dA1(:,j) = w_j * G a2_j ; dA2(:,j) = w_j * G^T a1_j ; dw_j = a1_j^T G a2_j
    const DenseTensor ga2 = matmul(out_grad, split.planes[1]);        // d1 x r
    const DenseTensor gta1 = matmul_tn(out_grad, split.planes[0]);    // d2 x r
    for (std::size_t j = 0; j < r; ++j) {
      for (std::size_t i = 0; i < dims[0]; ++i)
        grads.planes[0](i, j) = weights[j] * ga2(i, j);
      for (std::size_t i = 0; i < dims[1]; ++i)
        grads.planes[1](i, j) = weights[j] * gta1(i, j);
      if (diagonal) {
        double acc = 0.0;
        for (std::size_t i = 0; i < dims[0]; ++i)
          acc += split.planes[0](i, j) * ga2(i, j);
        grads.core[j] = acc;
      }
    }
    return grads;
  }

  std::vector<std::vector<double>> cols(order);
  std::vector<std::size_t> idx(order, 0);
  for (std::size_t j = 0; j < r; ++j) {
    for (std::size_t m = 0; m < order; ++m) {
      cols[m].resize(dims[m]);
      for (std::size_t i = 0; i < dims[m]; ++i) cols[m][i] = split.planes[m](i, j);
    }
    std::fill(idx.begin(), idx.end(), 0);
    std::vector<double> prefix(order + 1), suffix(order + 1);
    double core_acc = 0.0;
    for (std::size_t flat = 0; flat < out_grad.size(); ++flat) {
      const double g = out_grad[flat];
      if (g != 0.0) {
        prefix[0] = 1.0;
        for (std::size_t m = 0; m < order; ++m)
          prefix[m + 1] = prefix[m] * cols[m][idx[m]];
        suffix[order] = 1.0;
        for (std::size_t m = order; m-- > 0;)
          suffix[m] = suffix[m + 1] * cols[m][idx[m]];
        for (std::size_t m = 0; m < order; ++m)
          grads.planes[m](idx[m], j) += weights[j] * g * prefix[m] * suffix[m + 1];
        core_acc += g * prefix[order];
      }
      std::size_t m = order;
      while (m-- > 0) {
        if (++idx[m] < dims[m]) break;
        idx[m] = 0;
      }
    }
    if (diagonal) grads.core[j] = core_acc;
  }
  return grads;
}

SplitGrads tucker_gradients(const SplitFactors& split, const DenseTensor& out_grad) {
  const std::size_t order = split.spec.order();
  SplitGrads grads;

  // core gradient: contract out_grad with every plane transposed
  DenseTensor acc = out_grad;
  for (std::size_t m = 0; m < order; ++m)
    acc = mode_product(acc, transpose(split.planes[m]), m);
  grads.core = std::move(acc);

  // plane m gradient: unfold the cotangent and the partially materialized
  // core (all planes applied except m) along mode m
  for (std::size_t m = 0; m < order; ++m) {
    DenseTensor partial = split.core;
    for (std::size_t mm = 0; mm < order; ++mm) {
      if (mm == m) continue;
      partial = mode_product(partial, split.planes[mm], mm);
    }
    grads.planes.push_back(matmul_nt(unfold_mode(out_grad, m), unfold_mode(partial, m)));
  }
  return grads;
}

}  // namespace

SplitGrads split_gradients(const SplitFactors& split, const DenseTensor& out_grad) {
  split.validate();
  if (!(out_grad.shape() == split.spec.out_shape))
    throw std::invalid_argument("split_gradients: cotangent shape " + to_string(out_grad.shape()) +
                                " != " + to_string(split.spec.out_shape));
  if (split.spec.dense) {
    SplitGrads grads;
    grads.core = out_grad;
    return grads;
  }
  if (split.spec.core.kind == CoreKind::full) return tucker_gradients(split, out_grad);
  return cp_gradients(split, out_grad);
}

std::vector<SplitGrads> group_gradients(const FactorizedGroup& group,
                                        const std::vector<DenseTensor>& split_outputs,
                                        const DenseTensor& out_grad) {
  group.validate();
  const std::size_t K = group.splits.size();
  if (split_outputs.size() != K)
    throw std::invalid_argument("group_gradients: need one output per split");

  if (K == 1) return {split_gradients(group.splits[0], out_grad)};

  // cotangent of each split output through the Kronecker chain, then chain
  // into the split factor adjoints
  std::vector<std::size_t> p(K), q(K);
  for (std::size_t k = 0; k < K; ++k) {
    p[k] = split_outputs[k].extent(0);
    q[k] = split_outputs[k].extent(1);
  }
  std::vector<DenseTensor> out_grads;
  for (std::size_t k = 0; k < K; ++k) out_grads.emplace_back(Shape{p[k], q[k]});

  std::vector<std::size_t> ri(K, 0), ci(K, 0);
  std::vector<double> vals(K), pre(K + 1), suf(K + 1);
  const std::size_t rows = out_grad.extent(0);
  const std::size_t cols = out_grad.extent(1);
  for (std::size_t I = 0; I < rows; ++I) {
    // mixed-radix row index (i_1 most significant)
    std::size_t rrem = I;
    for (std::size_t k = K; k-- > 0;) {
      ri[k] = rrem % p[k];
      rrem /= p[k];
    }
    for (std::size_t J = 0; J < cols; ++J) {
      std::size_t crem = J;
      for (std::size_t k = K; k-- > 0;) {
        ci[k] = crem % q[k];
        crem /= q[k];
      }
      const double g = out_grad(I, J);
      if (g == 0.0) continue;
      for (std::size_t k = 0; k < K; ++k) vals[k] = split_outputs[k](ri[k], ci[k]);
      pre[0] = 1.0;
      for (std::size_t k = 0; k < K; ++k) pre[k + 1] = pre[k] * vals[k];
      suf[K] = 1.0;
      for (std::size_t k = K; k-- > 0;) suf[k] = suf[k + 1] * vals[k];
      for (std::size_t k = 0; k < K; ++k)
        out_grads[k](ri[k], ci[k]) += g * pre[k] * suf[k + 1];
    }
  }

  std::vector<SplitGrads> grads;
  for (std::size_t k = 0; k < K; ++k)
    grads.push_back(split_gradients(group.splits[k], out_grads[k]));
  return grads;
}

}  // namespace superlora
