#include "superlora/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <zlib.h>

#include "json.hpp"
#include "superlora/detail/binary_io.hpp"
#include "superlora/rng.hpp"

namespace superlora {

const char* to_string(ScaleMode mode) {
  return mode == ScaleMode::alpha_over_r ? "alpha_over_r" : "alpha";
}

ScaleMode scale_mode_from_string(const std::string& s) {
  if (s == "alpha_over_r") return ScaleMode::alpha_over_r;
  if (s == "alpha") return ScaleMode::alpha;
  throw std::invalid_argument("unknown scale mode '" + s + "'");
}

void SuperLoraConfig::validate() const {
  if (groups < 1) throw std::invalid_argument("config: G must be >= 1");
  if (order < 1) throw std::invalid_argument("config: M must be >= 1");
  if (splits < 1) throw std::invalid_argument("config: K must be >= 1");
  if (splits > 1 && order != 2)
    throw std::invalid_argument("config: K > 1 composes matrices, so M must be 2 (got M=" +
                                std::to_string(order) + ")");
  if (ranks.empty()) throw std::invalid_argument("config: rank missing");
  for (std::size_t r : ranks)
    if (r < 1) throw std::invalid_argument("config: ranks must be >= 1");
  if (ranks.size() != 1 && ranks.size() != order)
    throw std::invalid_argument("config: rank list must have 1 or M entries, got " +
                                std::to_string(ranks.size()));
  if (core != CoreKind::full) {
    for (std::size_t r : ranks)
      if (r != ranks.front())
        throw std::invalid_argument("config: superdiagonal cores need equal per-mode ranks");
  }
  if (!(rho > 0.0 && rho <= 1.0))
    throw std::invalid_argument("config: rho must be in (0, 1]");
  if ((projection == ProjectionMode::identity || projection == ProjectionMode::shuffle) &&
      rho != 1.0)
    throw std::invalid_argument(std::string("config: ") + to_string(projection) +
                                " projection requires rho = 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("config: alpha must be > 0");
  if (dense_split_dim) {
    if (*dense_split_dim < 1) throw std::invalid_argument("config: dense_split_dim must be >= 1");
    if (splits < 2)
      throw std::invalid_argument("config: dense_split_dim needs K >= 2 (it is a Kronecker factor)");
  }
}

std::vector<std::size_t> SuperLoraConfig::mode_ranks() const {
  if (ranks.size() == order) return ranks;
  return std::vector<std::size_t>(order, ranks.front());
}

double SuperLoraConfig::delta_scale() const {
  if (scale_mode == ScaleMode::alpha) return alpha;
  return alpha / static_cast<double>(ranks.front());
}

// --- config JSON --------------------------------------------------------------

SuperLoraConfig parse_config(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("config: top level must be an object");

  static const char* known[] = {"groups",     "group_mode", "order",
                                "splits",     "rank",       "core",
                                "reshape",    "projection", "projection_seed",
                                "rho",        "alpha",      "dense_split_dim",
                                "scale_mode", "shared_projection"};
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (std::find_if(std::begin(known), std::end(known),
                     [&](const char* k) { return key == k; }) == std::end(known))
      throw std::invalid_argument("config: unknown key '" + key + "'");
  }

  SuperLoraConfig config;
  if (doc.contains("groups")) config.groups = doc.at("groups").get<std::size_t>();
  if (doc.contains("group_mode"))
    config.group_mode = group_mode_from_string(doc.at("group_mode").get<std::string>());
  if (doc.contains("order")) config.order = doc.at("order").get<std::size_t>();
  if (doc.contains("splits")) config.splits = doc.at("splits").get<std::size_t>();
  if (doc.contains("rank")) {
    const auto& r = doc.at("rank");
    config.ranks.clear();
    if (r.is_array())
      for (const auto& v : r) config.ranks.push_back(v.get<std::size_t>());
    else
      config.ranks.push_back(r.get<std::size_t>());
  }
  if (doc.contains("core"))
    config.core = core_kind_from_string(doc.at("core").get<std::string>());
  if (doc.contains("reshape")) config.reshape = doc.at("reshape").get<bool>();
  if (doc.contains("projection"))
    config.projection = projection_mode_from_string(doc.at("projection").get<std::string>());
  if (doc.contains("projection_seed"))
    config.projection_seed = doc.at("projection_seed").get<std::uint64_t>();
  if (doc.contains("rho")) config.rho = doc.at("rho").get<double>();
  if (doc.contains("alpha")) config.alpha = doc.at("alpha").get<double>();
  if (doc.contains("dense_split_dim"))
    config.dense_split_dim = doc.at("dense_split_dim").get<std::size_t>();
  if (doc.contains("scale_mode"))
    config.scale_mode = scale_mode_from_string(doc.at("scale_mode").get<std::string>());
  if (doc.contains("shared_projection"))
    config.shared_projection = doc.at("shared_projection").get<bool>();
  config.validate();
  return config;
}

SuperLoraConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_json(const SuperLoraConfig& config) {
  nlohmann::json doc;
  doc["groups"] = config.groups;
  doc["group_mode"] = to_string(config.group_mode);
  doc["order"] = config.order;
  doc["splits"] = config.splits;
  if (config.ranks.size() == 1)
    doc["rank"] = config.ranks.front();
  else
    doc["rank"] = config.ranks;
  doc["core"] = to_string(config.core);
  doc["reshape"] = config.reshape;
  doc["projection"] = to_string(config.projection);
  doc["projection_seed"] = config.projection_seed;
  doc["rho"] = config.rho;
  doc["alpha"] = config.alpha;
  if (config.dense_split_dim) doc["dense_split_dim"] = *config.dense_split_dim;
  doc["scale_mode"] = to_string(config.scale_mode);
  doc["shared_projection"] = config.shared_projection;
  return doc.dump();
}

std::string classify_variant(const SuperLoraConfig& config) {
  config.validate();
  const bool f_identity = config.projection == ProjectionMode::identity;
  const bool weight_wise = config.group_mode == GroupMode::weight_wise;
  const bool core_identity = config.core == CoreKind::identity;
  const std::size_t m = config.order, k = config.splits, g = config.groups;
  if (f_identity) {
    if (weight_wise && k == 1 && core_identity && m == 1) return "dense FT";
    if (weight_wise && k == 1 && core_identity && m == 2) return "LoRA";
    if (weight_wise && k == 2 && core_identity && m == 2) return "LoKr";
    if (!weight_wise && g == 1 && m > 2) return "LoTR";
    if (!weight_wise && k > 2 && core_identity && m == 2) return "LoNKr";
    if (!weight_wise && k == 1 && m > 2) return "LoRTA";
  }
  return "SuperLoRA (general)";
}

// --- split construction --------------------------------------------------------

namespace {

std::size_t floor_kth_root(std::size_t n, std::size_t k) {
  if (k == 1) return n;
  std::size_t r = static_cast<std::size_t>(std::pow(static_cast<double>(n), 1.0 / k));
  auto pow_le = [&](std::size_t base) {
    std::size_t acc = 1;
    for (std::size_t i = 0; i < k; ++i) {
      if (base != 0 && acc > n / base) return false;
      acc *= base;
    }
    return acc <= n;
  };
  while (r > 1 && !pow_le(r)) --r;
  while (pow_le(r + 1)) ++r;
  return r;
}

std::size_t smallest_divisor_at_least(std::size_t n, std::size_t threshold) {
  std::vector<std::size_t> small, large;
  for (std::size_t d = 1; d * d <= n; ++d) {
    if (n % d != 0) continue;
    if (d >= threshold) return d;
    if (n / d >= threshold) large.push_back(n / d);
  }
  return large.empty() ? n : large.back();
}

// n = prod of K factors as balanced as the divisor structure allows; factors
// of 1 (with n > 1) mean the dimension cannot support K Kronecker blocks.
std::vector<std::size_t> balanced_factors(std::size_t n, std::size_t k_splits) {
  std::vector<std::size_t> factors(k_splits, 1);
  std::size_t remaining = n;
  for (std::size_t k = k_splits; k >= 1; --k) {
    const std::size_t root = floor_kth_root(remaining, k);
    std::size_t threshold = root;
    std::size_t acc = 1;
    bool exact = true;
    for (std::size_t i = 0; i < k && exact; ++i) {
      acc *= root;
      exact = acc <= remaining;
    }
    if (!(exact && acc == remaining)) threshold = root + 1;
    const std::size_t d = smallest_divisor_at_least(remaining, threshold);
    factors[k - 1] = d;
    remaining /= d;
  }
  if (n > 1)
    for (std::size_t f : factors)
      if (f == 1)
        throw InfeasibleConfigError("cannot split dimension " + std::to_string(n) + " into " +
                                    std::to_string(k_splits) + " balanced Kronecker factors");
  return factors;
}

}  // namespace

std::vector<SplitSpec> make_split_specs(const SuperLoraConfig& config, const Shape& target) {
  config.validate();
  const std::vector<std::size_t> ranks = config.mode_ranks();

  if (config.splits == 1) {
    if (target.order() != config.order)
      throw std::invalid_argument("make_split_specs: target " + to_string(target) +
                                  " does not match M=" + std::to_string(config.order));
    SplitSpec spec;
    spec.core = CoreSpec{config.core, ranks};
    spec.out_shape = target;
    spec.validate();
    return {spec};
  }

  if (target.order() != 2)
    throw std::invalid_argument("make_split_specs: Kronecker splits need a 2-D target, got " +
                                to_string(target));
  std::size_t p = target.dims[0];
  std::size_t q = target.dims[1];
  std::size_t chain = config.splits;

  std::vector<SplitSpec> specs;
  if (config.dense_split_dim) {
    const std::size_t u = *config.dense_split_dim;
    if (p % u != 0 || q % u != 0)
      throw InfeasibleConfigError("make_split_specs: dense split dim " + std::to_string(u) +
                                  " does not divide target " + to_string(target));
    SplitSpec dense;
    dense.dense = true;
    dense.out_shape = Shape{u, u};
    specs.push_back(std::move(dense));
    p /= u;
    q /= u;
    --chain;
  }

  const std::vector<std::size_t> pf = balanced_factors(p, chain);
  const std::vector<std::size_t> qf = balanced_factors(q, chain);
  for (std::size_t k = 0; k < chain; ++k) {
    SplitSpec spec;
    spec.core = CoreSpec{config.core, ranks};
    spec.out_shape = Shape{pf[k], qf[k]};
    spec.validate();
    specs.push_back(std::move(spec));
  }
  return specs;
}

// --- adapter lifecycle ----------------------------------------------------------

namespace {

std::vector<SplitSpec> split_specs_for_group(const SuperLoraConfig& config,
                                             const GroupRange& range, std::size_t g) {
  try {
    return make_split_specs(config, range.target_shape);
  } catch (const InfeasibleConfigError& e) {
    throw InfeasibleConfigError("group " + std::to_string(g) + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::invalid_argument("group " + std::to_string(g) + ": " + e.what());
  }
}

}  // namespace

AdapterState init_adapter(const SuperLoraConfig& config, const WeightManifest& manifest,
                          std::uint64_t seed) {
  config.validate();
  manifest.validate();

  AdapterState state;
  state.config = config;
  state.manifest = manifest;
  state.base_seed = seed;
  state.plan = build_group_plan(manifest, config.group_mode, config.groups, config.order,
                                config.reshape, config.rho);

  for (std::size_t g = 0; g < state.plan.groups.size(); ++g) {
    const std::vector<SplitSpec> specs = split_specs_for_group(config, state.plan.groups[g], g);
    FactorizedGroup group;
    const std::uint64_t group_seed = derive_seed(seed, g);
    for (std::size_t k = 0; k < specs.size(); ++k) {
      const bool last = k + 1 == specs.size();
      group.splits.push_back(
          init_factors(specs[k], derive_seed(group_seed, k), last ? "zero-product" : "random"));
    }
    group.validate();
    state.groups.push_back(std::move(group));
  }

  bool uniform = true;
  for (const GroupRange& range : state.plan.groups)
    if (range.lora_elements != state.plan.groups.front().lora_elements ||
        range.length() != state.plan.groups.front().length())
      uniform = false;

  const bool share = config.shared_projection && uniform;
  for (std::size_t g = 0; g < state.plan.groups.size(); ++g) {
    const GroupRange& range = state.plan.groups[g];
    ProjectionSpec spec;
    spec.mode = config.projection;
    spec.seed = share ? config.projection_seed : derive_seed(config.projection_seed, g);
    spec.n_in = range.lora_elements;
    spec.n_out = range.length();
    if (share && g > 0)
      state.projections.push_back(state.projections.front());
    else
      state.projections.push_back(make_projection(spec));
  }
  return state;
}

std::size_t count_params(const SuperLoraConfig& config, const WeightManifest& manifest) {
  const GroupPlan plan = build_group_plan(manifest, config.group_mode, config.groups,
                                          config.order, config.reshape, config.rho);
  std::size_t total = 0;
  for (std::size_t g = 0; g < plan.groups.size(); ++g)
    for (const SplitSpec& spec : split_specs_for_group(config, plan.groups[g], g))
      total += count_split(spec);
  return total;
}

std::size_t AdapterState::trainable_count() const {
  std::size_t total = 0;
  for (const FactorizedGroup& group : groups)
    for (const SplitFactors& split : group.splits) total += count_split(split.spec);
  return total;
}

std::vector<double> AdapterState::flat_parameters() const {
  std::vector<double> out;
  out.reserve(trainable_count());
  for (const FactorizedGroup& group : groups)
    for (const SplitFactors& split : group.splits) {
      out.insert(out.end(), split.core.values().begin(), split.core.values().end());
      for (const DenseTensor& plane : split.planes)
        out.insert(out.end(), plane.values().begin(), plane.values().end());
    }
  return out;
}

void AdapterState::set_flat_parameters(std::span<const double> values) {
  std::size_t offset = 0;
  auto take = [&](DenseTensor& t) {
    if (offset + t.size() > values.size())
      throw std::invalid_argument("set_flat_parameters: vector too short");
    std::copy(values.begin() + offset, values.begin() + offset + t.size(), t.values().begin());
    offset += t.size();
  };
  for (FactorizedGroup& group : groups)
    for (SplitFactors& split : group.splits) {
      take(split.core);
      for (DenseTensor& plane : split.planes) take(plane);
    }
  if (offset != values.size())
    throw std::invalid_argument("set_flat_parameters: expected " + std::to_string(offset) +
                                " values, got " + std::to_string(values.size()));
}

NamedTensors materialize_deltas(const AdapterState& state, MaterializeCache* cache) {
  const std::size_t n_groups = state.groups.size();
  if (cache) {
    cache->split_outputs.assign(n_groups, {});
    cache->preactivations.assign(n_groups, DenseTensor());
  }

  std::vector<DenseTensor> group_vecs;
  group_vecs.reserve(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) {
    const FactorizedGroup& group = state.groups[g];
    const GroupRange& range = state.plan.groups[g];

    std::vector<DenseTensor> outputs;
    outputs.reserve(group.splits.size());
    for (const SplitFactors& split : group.splits)
      outputs.push_back(materialize_split(split));
    DenseTensor mat = outputs.front();
    for (std::size_t k = 1; k < outputs.size(); ++k) mat = kronecker(mat, outputs[k]);
    if (cache && group.splits.size() > 1) cache->split_outputs[g] = std::move(outputs);

    // drop the regular_dims padding ahead of the projection
    DenseTensor lora(Shape{range.lora_elements});
    std::copy(mat.values().begin(), mat.values().begin() + range.lora_elements,
              lora.values().begin());

    DenseTensor z = apply_linear_part(state.projections[g], lora);
    if (!is_linear_chain(state.config.projection)) {
      DenseTensor y(Shape{z.size()});
      for (std::size_t i = 0; i < z.size(); ++i) y[i] = tanhshrink(z[i]);
      if (cache) cache->preactivations[g] = std::move(z);
      group_vecs.push_back(std::move(y));
    } else {
      group_vecs.push_back(std::move(z));
    }
  }

  NamedTensors deltas = scatter(group_vecs, state.plan, state.manifest);
  const double scale = state.config.delta_scale();
  if (scale != 1.0)
    for (auto& [name, delta] : deltas)
      for (double& v : delta.values()) v *= scale;
  return deltas;
}

NamedTensors apply_to_base(const NamedTensors& base, const NamedTensors& deltas) {
  if (base.size() != deltas.size())
    throw std::invalid_argument("apply_to_base: " + std::to_string(base.size()) +
                                " base weights vs " + std::to_string(deltas.size()) + " deltas");
  NamedTensors out;
  for (const auto& [name, w] : base) {
    auto it = deltas.find(name);
    if (it == deltas.end())
      throw std::invalid_argument("apply_to_base: no delta for '" + name + "'");
    const DenseTensor& d = it->second;
    if (!(d.shape() == w.shape()))
      throw std::invalid_argument("apply_to_base: shape mismatch for '" + name + "': " +
                                  to_string(w.shape()) + " vs " + to_string(d.shape()));
    DenseTensor sum = w;
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += d[i];
    out.emplace(name, std::move(sum));
  }
  return out;
}

AdapterGrads delta_gradients(const AdapterState& state, const MaterializeCache& cache,
                             const NamedTensors& delta_grads) {
  const DenseTensor full = gather(state.manifest, delta_grads);
  const double scale = state.config.delta_scale();

  AdapterGrads grads;
  grads.groups.resize(state.groups.size());
  for (std::size_t g = 0; g < state.groups.size(); ++g) {
    const FactorizedGroup& group = state.groups[g];
    const GroupRange& range = state.plan.groups[g];

    DenseTensor gvec(Shape{range.length()});
    for (std::size_t i = 0; i < range.length(); ++i) gvec[i] = scale * full[range.begin + i];

    if (!is_linear_chain(state.config.projection)) {
      if (g >= cache.preactivations.size() || cache.preactivations[g].size() != range.length())
        throw std::invalid_argument(
            "delta_gradients: nonlinear projection needs the cached pre-activation for group " +
            std::to_string(g));
      const DenseTensor& z = cache.preactivations[g];
      for (std::size_t i = 0; i < range.length(); ++i) {
        const double t = std::tanh(z[i]);
        gvec[i] *= t * t;  // d tanhshrink = tanh^2
      }
    }

    const DenseTensor lora_grad = apply_adjoint(state.projections[g], gvec);

    DenseTensor target_grad(range.target_shape);
    std::copy(lora_grad.values().begin(), lora_grad.values().end(),
              target_grad.values().begin());

    if (group.splits.size() == 1) {
      grads.groups[g].push_back(split_gradients(group.splits[0], target_grad));
    } else {
      if (g >= cache.split_outputs.size() || cache.split_outputs[g].size() != group.splits.size())
        throw std::invalid_argument(
            "delta_gradients: Kronecker chain needs cached split outputs for group " +
            std::to_string(g));
      grads.groups[g] = group_gradients(group, cache.split_outputs[g], target_grad);
    }
  }
  return grads;
}

std::vector<double> AdapterGrads::flatten(const AdapterState& state) const {
  std::vector<double> out;
  out.reserve(state.trainable_count());
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t k = 0; k < groups[g].size(); ++k) {
      const SplitGrads& sg = groups[g][k];
      out.insert(out.end(), sg.core.values().begin(), sg.core.values().end());
      for (const DenseTensor& plane : sg.planes)
        out.insert(out.end(), plane.values().begin(), plane.values().end());
    }
  return out;
}

// --- adapter files --------------------------------------------------------------

namespace {

using detail::get_u32le;
using detail::get_u64le;
using detail::put_u32le;
using detail::put_u64le;

constexpr char kAdapterMagic[4] = {'S', 'L', 'A', 'D'};
constexpr std::uint32_t kAdapterVersion = 1;

void put_block(std::ostream& out, const std::string& text) {
  put_u64le(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string get_block(std::istream& in) {
  const std::uint64_t len = get_u64le(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("adapter file: truncated block");
  return text;
}

}  // namespace

void save_adapter(const AdapterState& state, const std::filesystem::path& path) {
  std::ostringstream buf(std::ios::binary);
  buf.write(kAdapterMagic, 4);
  put_u32le(buf, kAdapterVersion);
  put_block(buf, config_to_json(state.config));
  put_block(buf, manifest_to_json(state.manifest));
  put_u64le(buf, state.base_seed);
  put_u32le(buf, static_cast<std::uint32_t>(state.groups.size()));
  for (const FactorizedGroup& group : state.groups) {
    put_u32le(buf, static_cast<std::uint32_t>(group.splits.size()));
    for (const SplitFactors& split : group.splits) {
      if (split.core.size() > 0) write_sltf(buf, split.core);
      for (const DenseTensor& plane : split.planes) write_sltf(buf, plane);
    }
  }

  const std::string payload = buf.str();
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
            static_cast<uInt>(payload.size())));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("adapter file: cannot open " + path.string() + " for writing");
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  put_u32le(out, crc);
  if (!out) throw std::runtime_error("adapter file: write failure");
}

AdapterState load_adapter(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("adapter file: cannot open " + path.string());
  std::stringstream whole;
  whole << in.rdbuf();
  const std::string bytes = whole.str();
  if (bytes.size() < 12) throw std::runtime_error("adapter file: truncated");

  if (std::memcmp(bytes.data(), kAdapterMagic, 4) != 0)
    throw std::runtime_error("adapter file: bad magic");

  std::istringstream stream(bytes.substr(0, bytes.size() - 4), std::ios::binary);
  stream.ignore(4);
  const std::uint32_t version = get_u32le(stream);
  if (version != kAdapterVersion)
    throw std::runtime_error("adapter file: unsupported version " + std::to_string(version));

  {
    std::istringstream tail(bytes.substr(bytes.size() - 4), std::ios::binary);
    const std::uint32_t stored = get_u32le(tail);
    const auto computed = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()),
              static_cast<uInt>(bytes.size() - 4)));
    if (stored != computed)
      throw std::runtime_error("adapter file: checksum mismatch (stored " +
                               std::to_string(stored) + ", computed " +
                               std::to_string(computed) + ")");
  }

  const SuperLoraConfig config = parse_config(get_block(stream));
  const WeightManifest manifest = parse_manifest(get_block(stream));
  const std::uint64_t base_seed = get_u64le(stream);

  AdapterState state = init_adapter(config, manifest, base_seed);

  const std::uint32_t n_groups = get_u32le(stream);
  if (n_groups != state.groups.size())
    throw std::runtime_error("adapter file: group count mismatch");
  for (FactorizedGroup& group : state.groups) {
    const std::uint32_t n_splits = get_u32le(stream);
    if (n_splits != group.splits.size())
      throw std::runtime_error("adapter file: split count mismatch");
    for (SplitFactors& split : group.splits) {
      auto read_into = [&](DenseTensor& t) {
        DenseTensor loaded = read_sltf(stream);
        if (!(loaded.shape() == t.shape()))
          throw std::runtime_error("adapter file: tensor shape " + to_string(loaded.shape()) +
                                   " does not match expected " + to_string(t.shape()));
        t = std::move(loaded);
      };
      if (split.core.size() > 0) read_into(split.core);
      for (DenseTensor& plane : split.planes) read_into(plane);
    }
  }
  return state;
}

}  // namespace superlora
