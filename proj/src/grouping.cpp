#include "superlora/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace superlora {

std::size_t WeightManifest::total_elements() const {
  std::size_t total = 0;
  for (const ManifestEntry& e : entries) total += e.elements();
  return total;
}

void WeightManifest::validate() const {
  std::set<std::string> names;
  for (const ManifestEntry& e : entries) {
    if (e.name.empty()) throw std::invalid_argument("manifest: empty entry name");
    if (e.rows == 0 || e.cols == 0)
      throw std::invalid_argument("manifest: zero-sized shape for '" + e.name + "'");
    if (!names.insert(e.name).second)
      throw std::invalid_argument("manifest: duplicate entry name '" + e.name + "'");
  }
  if (total_elements() == 0) throw std::invalid_argument("manifest: no elements");
}

WeightManifest parse_manifest(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("manifest: invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw std::invalid_argument("manifest: top level must be an array");
  WeightManifest manifest;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("name") || !item.contains("shape"))
      throw std::invalid_argument("manifest: entries need \"name\" and \"shape\"");
    const auto& shape = item.at("shape");
    if (!shape.is_array() || shape.size() != 2)
      throw std::invalid_argument("manifest: \"shape\" must be [rows, cols]");
    ManifestEntry e;
    e.name = item.at("name").get<std::string>();
    e.rows = shape.at(0).get<std::size_t>();
    e.cols = shape.at(1).get<std::size_t>();
    manifest.entries.push_back(std::move(e));
  }
  manifest.validate();
  return manifest;
}

WeightManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

std::string manifest_to_json(const WeightManifest& manifest) {
  nlohmann::json doc = nlohmann::json::array();
  for (const ManifestEntry& e : manifest.entries)
    doc.push_back({{"name", e.name}, {"shape", {e.rows, e.cols}}});
  return doc.dump();
}

const char* to_string(GroupMode mode) {
  return mode == GroupMode::weight_wise ? "weight-wise" : "group-wise";
}

GroupMode group_mode_from_string(const std::string& s) {
  if (s == "weight-wise") return GroupMode::weight_wise;
  if (s == "group-wise") return GroupMode::group_wise;
  throw std::invalid_argument("unknown group mode '" + s + "'");
}

namespace {

// largest r with r^m <= n
std::size_t floor_nth_root(std::size_t n, std::size_t m) {
  if (m == 1) return n;
  std::size_t r = static_cast<std::size_t>(std::pow(static_cast<double>(n), 1.0 / m));
  auto pow_le = [&](std::size_t base) {
    std::size_t acc = 1;
    for (std::size_t i = 0; i < m; ++i) {
      if (base != 0 && acc > n / base) return false;
      acc *= base;
    }
    return acc <= n;
  };
  while (r > 1 && !pow_le(r)) --r;
  while (pow_le(r + 1)) ++r;
  return r;
}

std::vector<std::size_t> sorted_divisors(std::size_t n) {
  std::vector<std::size_t> small, large;
  for (std::size_t d = 1; d * d <= n; ++d) {
    if (n % d != 0) continue;
    small.push_back(d);
    if (d != n / d) large.push_back(n / d);
  }
  small.insert(small.end(), large.rbegin(), large.rend());
  return small;
}

// smallest divisor of n that is >= ceil(n^(1/m))
std::size_t balanced_divisor(std::size_t n, std::size_t m) {
  const std::size_t root = floor_nth_root(n, m);
  std::size_t threshold = root;
  std::size_t acc = 1;
  bool exact = true;
  for (std::size_t i = 0; i < m && exact; ++i) {
    acc *= root;
    exact = acc <= n;
  }
  if (!(exact && acc == n)) threshold = root + 1;
  for (std::size_t d : sorted_divisors(n))
    if (d >= threshold) return d;
  return n;  // unreachable: n itself qualifies
}

bool try_factor(std::size_t target, std::size_t order, std::vector<std::size_t>& dims) {
  dims.assign(order, 1);
  std::size_t remaining = target;
  for (std::size_t m = order; m >= 1; --m) {
    const std::size_t d = balanced_divisor(remaining, m);
    dims[m - 1] = d;
    remaining /= d;
  }
  const auto [lo, hi] = std::minmax_element(dims.begin(), dims.end());
  return *hi <= 4 * *lo;
}

}  // namespace

Shape regular_dims(std::size_t n, std::size_t order) {
  if (n == 0) throw std::invalid_argument("regular_dims: n must be >= 1");
  if (order == 0) throw std::invalid_argument("regular_dims: order must be >= 1");
  if (order == 1) return Shape{n};
  std::vector<std::size_t> dims;
  for (std::size_t target = n;; ++target) {
    if (try_factor(target, order, dims)) return Shape(std::move(dims));
    // a power of two always factors with ratio <= 2, so the scan terminates
    // before 2n
  }
}

GroupPlan build_group_plan(const WeightManifest& manifest, GroupMode mode,
                           std::size_t groups, std::size_t order, bool reshape,
                           double rho) {
  manifest.validate();
  if (groups < 1) throw std::invalid_argument("build_group_plan: G must be >= 1");
  if (!(rho > 0.0 && rho <= 1.0))
    throw std::invalid_argument("build_group_plan: rho must be in (0, 1]");
  if (order < 1) throw std::invalid_argument("build_group_plan: M must be >= 1");

  const std::size_t total = manifest.total_elements();
  const bool weight_wise = mode == GroupMode::weight_wise;
  if (weight_wise && groups != manifest.entries.size())
    throw std::invalid_argument("build_group_plan: weight-wise mode needs G == " +
                                std::to_string(manifest.entries.size()) + " entries, got G=" +
                                std::to_string(groups));

  GroupPlan plan;
  plan.mode = mode;

  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  if (weight_wise) {
    std::size_t offset = 0;
    for (const ManifestEntry& e : manifest.entries) {
      ranges.emplace_back(offset, offset + e.elements());
      offset += e.elements();
    }
  } else {
    if (groups > total)
      throw std::invalid_argument("build_group_plan: more groups than elements");
    const std::size_t base = total / groups;
    const std::size_t extra = total % groups;
    std::size_t offset = 0;
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t len = base + (g < extra ? 1 : 0);
      ranges.emplace_back(offset, offset + len);
      offset += len;
    }
  }

  for (std::size_t g = 0; g < ranges.size(); ++g) {
    GroupRange range;
    range.begin = ranges[g].first;
    range.end = ranges[g].second;
    const std::size_t len = range.length();
    range.lora_elements =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(rho * static_cast<double>(len))));

    if (reshape) {
      range.target_shape = regular_dims(range.lora_elements, order);
    } else {
      // natural row-stacked 2-D target; only valid without compression and
      // when the range covers whole weights sharing a column count
      if (order != 2)
        throw std::invalid_argument("build_group_plan: non-reshaped plans require M=2");
      if (rho != 1.0)
        throw std::invalid_argument("build_group_plan: non-reshaped plans require rho=1");
      std::size_t rows = 0, cols = 0, offset = 0;
      bool begin_aligned = false, end_aligned = false;
      for (const ManifestEntry& e : manifest.entries) {
        if (offset == range.begin) begin_aligned = true;
        if (offset >= range.begin && offset < range.end) {
          if (cols == 0) cols = e.cols;
          if (e.cols != cols)
            throw InfeasibleConfigError(
                "build_group_plan: non-reshaped group " + std::to_string(g) +
                " stacks weights with differing column counts");
          rows += e.rows;
        }
        offset += e.elements();
        if (offset == range.end) end_aligned = true;
      }
      if (!begin_aligned || !end_aligned)
        throw InfeasibleConfigError("build_group_plan: non-reshaped group " + std::to_string(g) +
                                    " crosses a weight boundary; reshape is required");
      range.target_shape = Shape{rows, cols};
    }
    plan.groups.push_back(std::move(range));
  }
  return plan;
}

DenseTensor gather(const WeightManifest& manifest, const NamedTensors& deltas) {
  manifest.validate();
  DenseTensor out(Shape{manifest.total_elements()});
  std::size_t offset = 0;
  for (const ManifestEntry& e : manifest.entries) {
    auto it = deltas.find(e.name);
    if (it == deltas.end())
      throw std::invalid_argument("gather: missing delta for '" + e.name + "'");
    const DenseTensor& d = it->second;
    if (!(d.shape() == e.shape()))
      throw std::invalid_argument("gather: delta for '" + e.name + "' has shape " +
                                  to_string(d.shape()) + ", expected " + to_string(e.shape()));
    std::copy(d.values().begin(), d.values().end(), out.values().begin() + offset);
    offset += d.size();
  }
  return out;
}

NamedTensors scatter(const std::vector<DenseTensor>& group_tensors,
                     const GroupPlan& plan, const WeightManifest& manifest) {
  manifest.validate();
  if (group_tensors.size() != plan.groups.size())
    throw std::invalid_argument("scatter: got " + std::to_string(group_tensors.size()) +
                                " tensors for " + std::to_string(plan.groups.size()) + " groups");

  DenseTensor full(Shape{manifest.total_elements()});
  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    const GroupRange& range = plan.groups[g];
    const DenseTensor& t = group_tensors[g];
    if (t.size() < range.length())
      throw std::invalid_argument("scatter: group " + std::to_string(g) + " tensor has " +
                                  std::to_string(t.size()) + " elements, range needs " +
                                  std::to_string(range.length()));
    std::copy(t.values().begin(), t.values().begin() + range.length(),
              full.values().begin() + range.begin);
  }

  NamedTensors out;
  std::size_t offset = 0;
  for (const ManifestEntry& e : manifest.entries) {
    std::vector<double> data(full.values().begin() + offset,
                             full.values().begin() + offset + e.elements());
    out.emplace(e.name, DenseTensor(e.shape(), std::move(data)));
    offset += e.elements();
  }
  return out;
}

}  // namespace superlora
