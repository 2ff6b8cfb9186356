#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "superlora/geometry.hpp"

using namespace superlora;

namespace {

// random orthogonal matrix from the left singular basis of a random matrix
DenseTensor random_orthogonal(std::size_t n, std::uint64_t seed) {
  return svd_topk(oracles::random_tensor(Shape{n, n}, seed), n).u;
}

}  // namespace

TEST_CASE("identical matrices give similarity 1 and distance 0") {
  const DenseTensor w = oracles::random_tensor(Shape{16, 16}, 1);
  CHECK(std::abs(singular_similarity(w, w, 5, SimilaritySide::left) - 1.0) < 1e-8);
  CHECK(std::abs(singular_similarity(w, w, 5, SimilaritySide::right) - 1.0) < 1e-8);
  CHECK(euclidean_distance(w, w) == 0.0);

  const GeometryReport report = analyze_pair(w, w, 5);
  CHECK(std::abs(report.d_left - 1.0) < 1e-8);
  CHECK(std::abs(report.d_right - 1.0) < 1e-8);
  CHECK(report.d_euclid == 0.0);
  CHECK(report.k == 5);
}

TEST_CASE("constructed orthogonal top-k subspaces give similarity 0") {
  const std::size_t n = 32, k = 5;
  DenseTensor w1(Shape{n, n});
  DenseTensor w2(Shape{n, n});
  for (std::size_t i = 0; i < k; ++i) {
    w1(i, i) = static_cast<double>(k - i);          // spans e_0..e_4
    w2(k + i, k + i) = static_cast<double>(k - i);  // spans e_5..e_9
  }
  CHECK(singular_similarity(w1, w2, k, SimilaritySide::left) < 1e-10);
  CHECK(singular_similarity(w1, w2, k, SimilaritySide::right) < 1e-10);
}

TEST_CASE("similarity absorbs sign flips") {
  const DenseTensor w = oracles::random_tensor(Shape{12, 12}, 3);
  DenseTensor neg = w;
  for (double& v : neg.values()) v = -v;
  CHECK(std::abs(singular_similarity(w, neg, 5, SimilaritySide::left) - 1.0) < 1e-8);
  CHECK(std::abs(singular_similarity(w, neg, 5, SimilaritySide::right) - 1.0) < 1e-8);
}

TEST_CASE("similarity is symmetric in its arguments") {
  const DenseTensor a = oracles::random_tensor(Shape{10, 10}, 4);
  const DenseTensor b = oracles::random_tensor(Shape{10, 10}, 5);
  for (SimilaritySide side : {SimilaritySide::left, SimilaritySide::right})
    CHECK(std::abs(singular_similarity(a, b, 3, side) - singular_similarity(b, a, 3, side)) <
          1e-9);
}

TEST_CASE("euclidean distance fixed points") {
  const DenseTensor w = oracles::random_tensor(Shape{9, 7}, 6);
  const DenseTensor zero(Shape{9, 7});
  CHECK(euclidean_distance(w, zero) == doctest::Approx(1.0).epsilon(1e-12));

  DenseTensor twice = w;
  for (double& v : twice.values()) v *= 2.0;
  CHECK(euclidean_distance(w, twice) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(euclidean_distance(zero, w), std::invalid_argument);
  CHECK_THROWS_AS(euclidean_distance(w, DenseTensor(Shape{7, 9})), std::invalid_argument);
}

TEST_CASE("metrics are invariant under a simultaneous orthogonal change of basis") {
  const std::size_t n = 10;
  const DenseTensor a = oracles::random_tensor(Shape{n, n}, 7);
  const DenseTensor b = oracles::random_tensor(Shape{n, n}, 8);
  const DenseTensor q = random_orthogonal(n, 9);
  const DenseTensor qa = matmul(q, a);
  const DenseTensor qb = matmul(q, b);

  const GeometryReport before = analyze_pair(a, b, 3);
  const GeometryReport after = analyze_pair(qa, qb, 3);
  CHECK(std::abs(before.d_left - after.d_left) < 1e-8);
  CHECK(std::abs(before.d_right - after.d_right) < 1e-8);
  CHECK(std::abs(before.d_euclid - after.d_euclid) < 1e-8);
}

TEST_CASE("the spectral-norm flag exists and behaves as the alternative reading") {
  const DenseTensor w = oracles::random_tensor(Shape{8, 8}, 10);
  // under the spectral norm the self-similarity is 1/sqrt(k), which is why
  // the Frobenius reading is the default
  const double self = singular_similarity(w, w, 4, SimilaritySide::left, NormKind::spectral);
  CHECK(self == doctest::Approx(0.5).epsilon(1e-8));

  const DenseTensor zero(Shape{8, 8});
  CHECK(euclidean_distance(w, zero, NormKind::spectral) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("report serializes all four fields") {
  GeometryReport report;
  report.d_left = 0.25;
  report.d_right = 0.5;
  report.d_euclid = 1.5;
  report.k = 5;
  const std::string json = report_to_json(report);
  CHECK(json.find("\"d_left\"") != std::string::npos);
  CHECK(json.find("\"d_right\"") != std::string::npos);
  CHECK(json.find("\"d_euclid\"") != std::string::npos);
  CHECK(json.find("\"k\":5") != std::string::npos);
}

TEST_CASE("k validation") {
  const DenseTensor w = oracles::random_tensor(Shape{4, 6}, 11);
  CHECK_THROWS_AS(singular_similarity(w, w, 5, SimilaritySide::left), std::invalid_argument);
  CHECK_THROWS_AS(singular_similarity(w, w, 0, SimilaritySide::left), std::invalid_argument);
}
