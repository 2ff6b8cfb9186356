#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "superlora/grouping.hpp"

using namespace superlora;

namespace {

WeightManifest vit_manifest() {
  WeightManifest m;
  for (std::size_t l = 0; l < 12; ++l) {
    m.entries.push_back({"layers." + std::to_string(l) + ".attn.wq", 768, 768});
    m.entries.push_back({"layers." + std::to_string(l) + ".attn.wv", 768, 768});
  }
  return m;
}

}  // namespace

TEST_CASE("regular_dims splits perfect squares evenly") {
  CHECK(regular_dims(589824, 2) == Shape{768, 768});
  CHECK(regular_dims(9, 2) == Shape{3, 3});
  CHECK(regular_dims(5, 1) == Shape{5});
}

TEST_CASE("regular_dims matches the exhaustive divisor-pair oracle") {
  const std::size_t n = 14155776;
  const Shape dims = regular_dims(n, 2);
  CHECK(dims == Shape{3456, 4096});

  // oracle: the best ratio over all ordered divisor pairs of n
  double best = 1e300;
  for (std::size_t d = 1; d * d <= n; ++d) {
    if (n % d != 0) continue;
    best = std::min(best, static_cast<double>(n / d) / static_cast<double>(d));
  }
  CHECK(static_cast<double>(dims.dims[1]) / static_cast<double>(dims.dims[0]) ==
        doctest::Approx(best));
}

TEST_CASE("regular_dims matches the exhaustive divisor-triple oracle") {
  const std::size_t n = 14155776;
  const Shape dims = regular_dims(n, 3);
  CHECK(dims == Shape{216, 256, 256});

  std::size_t product = 1;
  for (std::size_t d : dims.dims) product *= d;
  CHECK(product == n);

  const double ratio = 256.0 / 216.0;
  CHECK(oracles::best_factor_ratio(n, 3) == doctest::Approx(ratio));
}

TEST_CASE("regular_dims is deterministic, bounded and never too skewed") {
  CounterRng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + rng.next_below(std::size_t{1} << 26);
    const std::size_t order = 1 + rng.next_below(5);
    const Shape a = regular_dims(n, order);
    const Shape b = regular_dims(n, order);
    CHECK(a == b);
    std::size_t product = 1;
    for (std::size_t d : a.dims) product *= d;
    CHECK(product >= n);
    CHECK(product < 2 * n);
    const auto [lo, hi] = std::minmax_element(a.dims.begin(), a.dims.end());
    CHECK(*hi <= 4 * *lo);
  }
}

TEST_CASE("weight-wise plan on the ViT manifest") {
  const GroupPlan plan =
      build_group_plan(vit_manifest(), GroupMode::weight_wise, 24, 2, true, 1.0);
  REQUIRE(plan.groups.size() == 24);
  for (const GroupRange& g : plan.groups) {
    CHECK(g.length() == 589824);
    CHECK(g.lora_elements == 589824);
    CHECK(g.target_shape == Shape{768, 768});
  }
  CHECK(plan.groups.front().begin == 0);
  CHECK(plan.groups.back().end == 14155776);
}

TEST_CASE("group-wise G=1 covers the concatenated update in one range") {
  const GroupPlan plan = build_group_plan(vit_manifest(), GroupMode::group_wise, 1, 2, true, 1.0);
  REQUIRE(plan.groups.size() == 1);
  CHECK(plan.groups[0].begin == 0);
  CHECK(plan.groups[0].end == 14155776);
}

TEST_CASE("rho halves the factorization target") {
  WeightManifest m;
  m.entries.push_back({"a", 2, 2});
  m.entries.push_back({"b", 2, 2});
  const GroupPlan plan = build_group_plan(m, GroupMode::group_wise, 1, 2, true, 0.5);
  REQUIRE(plan.groups.size() == 1);
  CHECK(plan.groups[0].lora_elements == 4);
  CHECK(plan.groups[0].target_shape == Shape{2, 2});
}

TEST_CASE("group ranges partition the total element count") {
  WeightManifest m;
  m.entries.push_back({"a", 3, 5});
  m.entries.push_back({"b", 4, 4});
  m.entries.push_back({"c", 2, 7});  // total 45
  for (std::size_t groups : {1, 2, 3, 4, 7}) {
    const GroupPlan plan = build_group_plan(m, GroupMode::group_wise, groups, 2, true, 1.0);
    std::size_t expect_begin = 0;
    std::size_t sum = 0;
    for (const GroupRange& g : plan.groups) {
      CHECK(g.begin == expect_begin);
      expect_begin = g.end;
      sum += g.length();
    }
    CHECK(sum == 45);
  }
}

TEST_CASE("weight-wise mode rejects mismatched G") {
  CHECK_THROWS_AS(build_group_plan(vit_manifest(), GroupMode::weight_wise, 12, 2, true, 1.0),
                  std::invalid_argument);
}

TEST_CASE("non-reshaped plans demand aligned boundaries and rho=1") {
  WeightManifest m;
  m.entries.push_back({"a", 2, 4});
  m.entries.push_back({"b", 3, 4});

  const GroupPlan stacked = build_group_plan(m, GroupMode::group_wise, 1, 2, false, 1.0);
  CHECK(stacked.groups[0].target_shape == Shape{5, 4});

  // G=2 splits 20 elements as 10+10, which cuts through entry "a"
  CHECK_THROWS_AS(build_group_plan(m, GroupMode::group_wise, 2, 2, false, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_group_plan(m, GroupMode::group_wise, 1, 2, false, 0.5),
                  std::invalid_argument);

  WeightManifest ragged;
  ragged.entries.push_back({"a", 2, 4});
  ragged.entries.push_back({"b", 4, 2});
  CHECK_THROWS_AS(build_group_plan(ragged, GroupMode::group_wise, 1, 2, false, 1.0),
                  std::invalid_argument);
}

TEST_CASE("gather concatenates row-major in manifest order") {
  WeightManifest m;
  m.entries.push_back({"a", 2, 2});
  m.entries.push_back({"b", 2, 2});
  NamedTensors deltas;
  deltas.emplace("a", DenseTensor(Shape{2, 2}, {0, 1, 2, 3}));
  deltas.emplace("b", DenseTensor(Shape{2, 2}, {4, 5, 6, 7}));
  CHECK(gather(m, deltas) == DenseTensor(Shape{8}, {0, 1, 2, 3, 4, 5, 6, 7}));
}

TEST_CASE("gather on a single entry equals vectorize") {
  WeightManifest m;
  m.entries.push_back({"only", 3, 2});
  NamedTensors deltas;
  deltas.emplace("only", oracles::random_tensor(Shape{3, 2}, 5));
  CHECK(gather(m, deltas) == vectorize(deltas.at("only")));
}

TEST_CASE("gather rejects missing or misshapen entries") {
  WeightManifest m;
  m.entries.push_back({"a", 2, 2});
  NamedTensors none;
  CHECK_THROWS_AS(gather(m, none), std::invalid_argument);
  NamedTensors bad;
  bad.emplace("a", DenseTensor(Shape{2, 3}));
  CHECK_THROWS_AS(gather(m, bad), std::invalid_argument);
}

TEST_CASE("scatter inverts gather when nothing is padded") {
  WeightManifest m;
  m.entries.push_back({"a", 2, 3});
  m.entries.push_back({"b", 3, 2});
  const GroupPlan plan = build_group_plan(m, GroupMode::group_wise, 2, 2, true, 1.0);

  NamedTensors deltas;
  deltas.emplace("a", oracles::random_tensor(Shape{2, 3}, 8));
  deltas.emplace("b", oracles::random_tensor(Shape{3, 2}, 9));
  const DenseTensor flat = gather(m, deltas);

  std::vector<DenseTensor> groups;
  for (const GroupRange& g : plan.groups) {
    DenseTensor piece(Shape{g.length()});
    std::copy(flat.values().begin() + g.begin, flat.values().begin() + g.end,
              piece.values().begin());
    groups.push_back(std::move(piece));
  }
  const NamedTensors back = scatter(groups, plan, m);
  CHECK(back.at("a") == deltas.at("a"));
  CHECK(back.at("b") == deltas.at("b"));
}

TEST_CASE("scatter drops padding without leaking it") {
  // 7 elements force regular_dims to pad up to 8
  WeightManifest m;
  m.entries.push_back({"w", 7, 1});
  const GroupPlan plan = build_group_plan(m, GroupMode::group_wise, 1, 2, true, 1.0);
  REQUIRE(plan.groups[0].target_shape.element_count() == 8);

  DenseTensor group(plan.groups[0].target_shape);
  for (std::size_t i = 0; i < 7; ++i) group[i] = static_cast<double>(i + 1);
  group[7] = std::nan("");  // sentinel in the pad region

  const NamedTensors out = scatter({group}, plan, m);
  const DenseTensor& w = out.at("w");
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(w[i] == static_cast<double>(i + 1));
    CHECK(std::isfinite(w[i]));
  }
}

TEST_CASE("aligned group boundaries feed entries exactly") {
  WeightManifest m;
  m.entries.push_back({"a", 2, 2});
  m.entries.push_back({"b", 2, 2});
  const GroupPlan plan = build_group_plan(m, GroupMode::group_wise, 2, 2, true, 1.0);
  CHECK(plan.groups[0].begin == 0);
  CHECK(plan.groups[0].end == 4);
  CHECK(plan.groups[1].begin == 4);
  CHECK(plan.groups[1].end == 8);

  DenseTensor g0(Shape{2, 2}, {1, 2, 3, 4});
  DenseTensor g1(Shape{2, 2}, {0, 0, 0, 0});
  const NamedTensors out = scatter({g0, g1}, plan, m);
  CHECK(out.at("a") == g0);
  CHECK(out.at("b") == g1);
}

TEST_CASE("scatter rejects undersized group tensors") {
  WeightManifest m;
  m.entries.push_back({"a", 2, 2});
  const GroupPlan plan = build_group_plan(m, GroupMode::group_wise, 1, 2, true, 1.0);
  CHECK_THROWS_AS(scatter({DenseTensor(Shape{3})}, plan, m), std::invalid_argument);
}

TEST_CASE("manifest JSON round-trips and validates") {
  const std::string text =
      R"([{"name":"q","shape":[768,768]},{"name":"v","shape":[768,768]}])";
  const WeightManifest m = parse_manifest(text);
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].name == "q");
  CHECK(m.entries[1].shape() == Shape{768, 768});
  CHECK(parse_manifest(manifest_to_json(m)).entries.size() == 2);

  CHECK_THROWS_AS(parse_manifest(R"([{"name":"q","shape":[1,1]},{"name":"q","shape":[1,1]}])"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_manifest("{}"), std::invalid_argument);
  CHECK_THROWS_AS(parse_manifest("not json"), std::invalid_argument);
}
